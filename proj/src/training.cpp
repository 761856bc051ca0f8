#include "picrnn/training.hpp"

#include "picrnn/units.hpp"

#include <chrono>
#include <cmath>

namespace picrnn {

Vector residual_weights(const StateSpaceSystem& system, double dt, const Normalizer& normalizer,
                        ResidualScaling scaling) {
  if (scaling == ResidualScaling::PaperUnits) return Vector::Constant(system.n, constants::day);
  return (dt / normalizer.scale) * system.accumulation.cwiseInverse();
}

ad::Tensor scaled_residual(const StateSpaceSystem& system,
                           const std::shared_ptr<const SparseMatrix>& transmissibility,
                           const ad::Tensor& x_k, const ad::Tensor& x_prev, const Vector& u,
                           double dt, const std::vector<double>& weights, double reference) {
  if (x_k.size() != std::size_t(system.n) || x_prev.size() != std::size_t(system.n) ||
      u.size() != system.m)
    throw std::invalid_argument("physics residual: dimension mismatch");
  const std::size_t n = std::size_t(system.n);
  std::vector<double> storage(n), source(n);
  for (std::size_t i = 0; i < n; ++i) storage[i] = -weights[i] * system.accumulation[Index(i)] / dt;
  const Vector bu = system.control * shifted_controls(system, u, reference);
  for (std::size_t i = 0; i < n; ++i) source[i] = weights[i] * bu[Index(i)];

  const ad::Tensor shifted = ad::affine(x_k, 1.0, -reference);
  const ad::Tensor flow = ad::scale(ad::sparse_matvec(transmissibility, shifted), weights);
  const ad::Tensor accumulation = ad::scale(ad::reshape(x_k - x_prev, {int(n)}), storage);
  return ad::add_constant(accumulation + flow, source);
}

ad::Tensor physics_loss(const StateSpaceSystem& system, const std::vector<ad::Tensor>& states,
                        const ControlSchedule& schedule, const Normalizer& normalizer,
                        const LossConfig& cfg, int first_step, std::vector<double>* per_step) {
  if (states.size() < 2) throw std::invalid_argument("physics_loss: trajectory needs at least one transition");
  const int steps = int(states.size()) - 1;
  if (first_step < 0 || first_step + steps > schedule.num_steps())
    throw std::invalid_argument("physics_loss: schedule does not cover the trajectory");
  if (schedule.num_wells() != system.m)
    throw std::invalid_argument("physics_loss: schedule well count does not match system");

  const double dt = schedule.dt();
  const Vector w = residual_weights(system, dt, normalizer, cfg.scaling);
  const std::vector<double> weights(w.data(), w.data() + w.size());
  auto t = std::make_shared<const SparseMatrix>(system.transmissibility);
  const ad::Tensor zero = ad::Tensor::zeros({int(system.n)});

  ad::Tensor total;
  if (per_step) per_step->clear();
  for (int k = 1; k <= steps; ++k) {
    const ad::Tensor r = scaled_residual(system, t, states[std::size_t(k)], states[std::size_t(k - 1)],
                                         schedule.control_at(first_step + k - 1), dt, weights,
                                         normalizer.reference);
    ad::Tensor term = ad::smooth_l1(r, zero, cfg.beta);
    if (per_step) per_step->push_back(term.item());
    total = total.defined() ? total + term : term;
  }
  return total;
}

double lr_schedule(int epoch, double initial, double decay, int interval) {
  if (epoch < 0) throw std::invalid_argument("lr_schedule: negative epoch");
  if (interval < 1) throw std::invalid_argument("lr_schedule: interval must be >= 1");
  return initial * std::pow(decay, double(epoch / interval));
}

void TrainConfig::validate() const {
  if (epochs < 0) throw std::invalid_argument("train config: epochs must be >= 0");
  if (!(learning_rate > 0)) throw std::invalid_argument("train config: learning rate must be positive");
  if (!(decay > 0 && decay <= 1)) throw std::invalid_argument("train config: decay must lie in (0, 1]");
  if (decay_interval < 1) throw std::invalid_argument("train config: decay interval must be >= 1");
  if (steps < 1) throw std::invalid_argument("train config: unrolled steps must be >= 1");
  if (!(loss.beta > 0)) throw std::invalid_argument("train config: beta must be positive");
  if (clip_norm && !(*clip_norm > 0)) throw std::invalid_argument("train config: clip norm must be positive");
}

bool LossRecord::finite() const {
  for (double v : loss)
    if (!std::isfinite(v)) return false;
  return true;
}

TrainResult train(const TrainingProblem& problem, PicrnnParams params, const TrainConfig& cfg,
                  const EpochCallback& on_epoch) {
  cfg.validate();
  if (problem.schedule.num_steps() < cfg.steps)
    throw std::invalid_argument("train: schedule shorter than the unrolled horizon");
  if (const auto report = validate_model(problem.model); !report.empty())
    throw std::invalid_argument("train: invalid model: " + report.front());

  const auto& arch = params.arch;
  const ad::Tensor x0 = field_tensor(problem.x0, arch.height, arch.width);
  const HiddenState h0 = HiddenState::zeros(arch);

  std::vector<ad::Tensor> tensors = params.tensors();
  ad::Adam adam(tensors, cfg.adam);

  TrainResult result{params, {}, params.clone(), 0.0};
  PicrnnParams checkpoint = params.clone();
  bool have_best = false;

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    const auto start = std::chrono::steady_clock::now();
    const double lr = lr_schedule(epoch, cfg.learning_rate, cfg.decay, cfg.decay_interval);

    adam.zero_grad();
    std::vector<double> per_step;
    double value = 0.0;
    try {
      const RolloutResult roll = rollout(params, x0, problem.schedule, 0, cfg.steps, h0,
                                         problem.normalizer, problem.model.wells);
      const ad::Tensor loss = physics_loss(problem.system, roll.states, problem.schedule,
                                           problem.normalizer, cfg.loss, 0, &per_step);
      value = loss.item();
      if (!std::isfinite(value)) throw RolloutError("non-finite loss", cfg.steps);
      ad::backward(loss);
    } catch (const RolloutError& e) {
      throw TrainingDiverged(std::string("training diverged at epoch ") + std::to_string(epoch) +
                                 ": " + e.what(),
                             epoch, result.record, checkpoint);
    }

    if (!have_best || value < result.best_loss) {
      result.best = params.clone();
      result.best_loss = value;
      have_best = true;
    }
    if (cfg.checkpoint_every > 0 && epoch % cfg.checkpoint_every == 0) {
      checkpoint = params.clone();
      result.record.breakdown.emplace_back(epoch, per_step);
    }

    if (cfg.clip_norm) ad::clip_grad_norm(tensors, *cfg.clip_norm);
    adam.step(lr);

    const auto elapsed = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start);
    result.record.loss.push_back(value);
    result.record.lr.push_back(lr);
    result.record.wall_ms.push_back(elapsed.count());
    if (on_epoch && !on_epoch(epoch, value, params)) break;
  }
  result.params = std::move(params);
  return result;
}

Prediction extrapolate(const PicrnnParams& params, const Vector& x_t, const HiddenState& hidden,
                       const ControlSchedule& future, int first_step, int steps,
                       const Normalizer& normalizer, const std::vector<WellSpec>& wells) {
  ad::NoGradGuard no_grad;
  const RolloutResult roll =
      rollout(params, field_tensor(x_t, params.arch.height, params.arch.width), future, first_step,
              steps, hidden, normalizer, wells);
  const std::vector<ad::Tensor> fresh(roll.states.begin() + 1, roll.states.end());
  return {to_trajectory(fresh, future.dt()), roll.hidden.detach()};
}

}  // namespace picrnn
