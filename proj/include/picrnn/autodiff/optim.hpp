#pragma once

#include "picrnn/autodiff/tensor.hpp"

#include <cstdint>
#include <random>
#include <vector>

namespace picrnn::ad {

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// Adam with bias correction. Moment buffers are shape-matched to the
/// parameters given at construction.
class Adam {
 public:
  explicit Adam(std::vector<Tensor> params, AdamConfig config = {});

  /// Applies one update from the parameters' accumulated gradients.
  void step(double learning_rate);
  void zero_grad();

  long long step_count() const { return steps_; }
  const AdamConfig& config() const { return config_; }
  const std::vector<std::vector<double>>& first_moments() const { return m_; }
  const std::vector<std::vector<double>>& second_moments() const { return v_; }
  /// Restores moments and counter (checkpoint resume).
  void restore(long long steps, std::vector<std::vector<double>> m, std::vector<std::vector<double>> v);

 private:
  std::vector<Tensor> params_;
  AdamConfig config_;
  std::vector<std::vector<double>> m_;
  std::vector<std::vector<double>> v_;
  long long steps_ = 0;
};

/// L2 norm over all parameter gradients.
double grad_norm(const std::vector<Tensor>& params);
/// Rescales gradients so their joint norm is at most max_norm. Returns the
/// norm before clipping.
double clip_grad_norm(std::vector<Tensor>& params, double max_norm);

/// Samples normal(0, sqrt(2 / fan_in)) values for a tensor of `shape`.
std::vector<double> kaiming_normal(const Shape& shape, int fan_in, std::mt19937_64& rng);
std::vector<double> kaiming_normal(const Shape& shape, int fan_in, std::uint64_t seed);

}  // namespace picrnn::ad
