#pragma once

#include "picrnn/autodiff/optim.hpp"
#include "picrnn/network.hpp"
#include "picrnn/statespace.hpp"

#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace picrnn {

/// How state-space residuals are made comparable to the smooth-L1 beta.
enum class ResidualScaling {
  /// r_i / (V_ii P_scale / dt): dimensionless, O(1).
  Nondimensional,
  /// Residual with pressure in psi and time in days (m^3/day).
  PaperUnits,
};

struct LossConfig {
  double beta = 1.0;
  ResidualScaling scaling = ResidualScaling::Nondimensional;
};

/// Per-cell factor applied to the residual before the smooth-L1 loss.
Vector residual_weights(const StateSpaceSystem& system, double dt,
                        const Normalizer& normalizer, ResidualScaling scaling);

/// Differentiable residual -V (x_k - x_{k-1}) / dt + T x_k + B u, scaled
/// per cell by `weights`. Shape [n]. T x_k is evaluated about `reference`
/// (see residual()).
ad::Tensor scaled_residual(const StateSpaceSystem& system,
                           const std::shared_ptr<const SparseMatrix>& transmissibility,
                           const ad::Tensor& x_k, const ad::Tensor& x_prev, const Vector& u,
                           double dt, const std::vector<double>& weights, double reference = 0.0);

/// Sum over k = 1..t of mean smooth-L1(scaled residual, 0). Transition
/// k uses schedule column first_step + k - 1 (the control applied over it).
ad::Tensor physics_loss(const StateSpaceSystem& system, const std::vector<ad::Tensor>& states,
                        const ControlSchedule& schedule, const Normalizer& normalizer,
                        const LossConfig& cfg, int first_step = 0,
                        std::vector<double>* per_step = nullptr);

/// eta0 * gamma^floor(epoch / interval)
double lr_schedule(int epoch, double initial, double decay, int interval);

struct TrainConfig {
  int epochs = 30000;
  double learning_rate = 0.0023;
  double decay = 0.995;
  int decay_interval = 100;
  int steps = 300;
  LossConfig loss{};
  std::uint64_t seed = 0;
  int checkpoint_every = 500;
  std::optional<double> clip_norm;
  ad::AdamConfig adam{};

  void validate() const;
};

struct LossRecord {
  std::vector<double> loss;     // one per epoch
  std::vector<double> lr;
  std::vector<double> wall_ms;
  /// Per-timestep breakdown captured at checkpoint epochs.
  std::vector<std::pair<int, std::vector<double>>> breakdown;

  bool finite() const;
};

struct TrainResult {
  PicrnnParams params;
  LossRecord record;
  PicrnnParams best;
  double best_loss = 0.0;
};

/// Raised when the loss turns non-finite; carries the record so far and
/// the parameters of the last checkpoint.
class TrainingDiverged : public std::runtime_error {
 public:
  TrainingDiverged(const std::string& what, int epoch, LossRecord record, PicrnnParams checkpoint)
      : std::runtime_error(what), epoch_(epoch), record_(std::move(record)),
        checkpoint_(std::move(checkpoint)) {}
  int epoch() const { return epoch_; }
  const LossRecord& record() const { return record_; }
  const PicrnnParams& checkpoint() const { return checkpoint_; }

 private:
  int epoch_;
  LossRecord record_;
  PicrnnParams checkpoint_;
};

struct TrainingProblem {
  const StateSpaceSystem& system;
  const ReservoirModel& model;
  Vector x0;
  ControlSchedule schedule;
  Normalizer normalizer;
};

/// Called after each epoch: (epoch, loss, params). Return false to stop.
using EpochCallback = std::function<bool(int epoch, double loss, const PicrnnParams& params)>;

/// Physics-informed training: full rollout from zero hidden state, loss,
/// backward, Adam with step-decayed learning rate.
TrainResult train(const TrainingProblem& problem, PicrnnParams params, const TrainConfig& cfg,
                  const EpochCallback& on_epoch = {});

struct Prediction {
  Trajectory trajectory;  // x_{t+1} .. x_{t+steps}; the start is not repeated
  HiddenState hidden;
};

/// Continues a rollout from (x_t, h_t, c_t) under future controls, without
/// recording gradients.
Prediction extrapolate(const PicrnnParams& params, const Vector& x_t, const HiddenState& hidden,
                       const ControlSchedule& future, int first_step, int steps,
                       const Normalizer& normalizer, const std::vector<WellSpec>& wells);

}  // namespace picrnn
