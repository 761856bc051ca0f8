#include "picrnn/autodiff/optim.hpp"

#include <cmath>
#include <stdexcept>

namespace picrnn::ad {

Adam::Adam(std::vector<Tensor> params, AdamConfig config)
    : params_(std::move(params)), config_(config) {
  for (auto& p : params_) {
    if (!p.requires_grad() || !p.is_leaf()) throw std::invalid_argument("Adam: parameters must be leaves");
    m_.emplace_back(p.size(), 0.0);
    v_.emplace_back(p.size(), 0.0);
  }
}

void Adam::step(double lr) {
  if (!(lr > 0)) throw std::invalid_argument("Adam: learning rate must be positive");
  ++steps_;
  const double c1 = 1.0 - std::pow(config_.beta1, double(steps_));
  const double c2 = 1.0 - std::pow(config_.beta2, double(steps_));
  for (std::size_t k = 0; k < params_.size(); ++k) {
    auto value = params_[k].mutable_data();
    auto grad = params_[k].grad();
    if (grad.empty()) continue;
    auto& m = m_[k];
    auto& v = v_[k];
    for (std::size_t i = 0; i < value.size(); ++i) {
      const double g = grad[i];
      m[i] = config_.beta1 * m[i] + (1.0 - config_.beta1) * g;
      v[i] = config_.beta2 * v[i] + (1.0 - config_.beta2) * g * g;
      value[i] -= lr * (m[i] / c1) / (std::sqrt(v[i] / c2) + config_.epsilon);
    }
  }
}

void Adam::zero_grad() {
  for (auto& p : params_) p.zero_grad();
}

void Adam::restore(long long steps, std::vector<std::vector<double>> m,
                   std::vector<std::vector<double>> v) {
  if (m.size() != m_.size() || v.size() != v_.size())
    throw std::invalid_argument("Adam: moment buffer count mismatch");
  for (std::size_t k = 0; k < m.size(); ++k)
    if (m[k].size() != m_[k].size() || v[k].size() != v_[k].size())
      throw std::invalid_argument("Adam: moment buffer shape mismatch");
  steps_ = steps;
  m_ = std::move(m);
  v_ = std::move(v);
}

double grad_norm(const std::vector<Tensor>& params) {
  double total = 0.0;
  for (const auto& p : params)
    for (double g : p.grad()) total += g * g;
  return std::sqrt(total);
}

double clip_grad_norm(std::vector<Tensor>& params, double max_norm) {
  const double norm = grad_norm(params);
  if (norm > max_norm && norm > 0) {
    const double factor = max_norm / norm;
    for (auto& p : params)
      for (double& g : p.mutable_grad()) g *= factor;
  }
  return norm;
}

std::vector<double> kaiming_normal(const Shape& shape, int fan_in, std::mt19937_64& rng) {
  if (fan_in <= 0) throw std::invalid_argument("kaiming_normal: fan-in must be positive");
  std::normal_distribution<double> normal(0.0, std::sqrt(2.0 / fan_in));
  std::vector<double> values(numel(shape));
  for (double& v : values) v = normal(rng);
  return values;
}

std::vector<double> kaiming_normal(const Shape& shape, int fan_in, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  return kaiming_normal(shape, fan_in, rng);
}

}  // namespace picrnn::ad
