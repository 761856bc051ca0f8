#pragma once

#include "picrnn/network.hpp"
#include "picrnn/training.hpp"

#include <json.hpp>

#include <filesystem>
#include <optional>

namespace picrnn::io {

/// A trained surrogate with everything needed to run it again. Saved as a
/// directory: manifest.json plus one portable array per tensor.
struct Checkpoint {
  PicrnnParams params;
  Normalizer normalizer;
  TrainConfig train;
  /// Case document the model was trained on (reservoir, wells, schedule).
  nlohmann::json case_config;
  /// Recurrent state and last predicted field after `trained_steps`.
  std::optional<HiddenState> hidden;
  std::optional<Vector> last_state;
  int trained_steps = 0;
};

void save_checkpoint(const std::filesystem::path& dir, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& dir);

}  // namespace picrnn::io
