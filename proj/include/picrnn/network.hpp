#pragma once

#include "picrnn/autodiff/ops.hpp"
#include "picrnn/autodiff/tensor.hpp"
#include "picrnn/reservoir.hpp"

#include <array>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace picrnn {

/// Layer hyperparameters of the convolutional-recurrent surrogate.
struct Architecture {
  int height = 64;
  int width = 64;
  int downscale = 8;  // pixel-unshuffle factor of the control branch
  std::array<int, 3> encoder_channels{16, 32, 64};
  int encoder_kernel = 4;  // stride 2, padding 1
  int control_kernel = 5;  // stride 1, padding 2
  int hidden_channels = 64;
  int cell_kernel = 3;     // stride 1, padding 1
  std::array<int, 3> decoder_channels{64, 32, 16};
  int decoder_kernel = 3;  // after x2 upsampling, padding 1

  int latent_height() const { return height / downscale; }
  int latent_width() const { return width / downscale; }
  /// Throws std::invalid_argument if the shape chain does not close.
  void validate() const;
};

/// Conv layer reparameterised as w = g v / ||v||.
struct WeightNormConv {
  ad::Tensor direction;  // v, O x C x k x k
  ad::Tensor magnitude;  // g, [O]
  ad::Tensor bias;       // [O]
  int stride = 1;
  int padding = 0;
};

struct PlainConv {
  ad::Tensor weight;
  ad::Tensor bias;
  int stride = 1;
  int padding = 0;
};

struct NamedParameter {
  std::string name;
  std::string role;
  ad::Tensor tensor;
};

/// Trainable weights. The ConvLSTM gate kernels are stacked into a single
/// convolution: output channel blocks are (f, i, c~, o), input channel
/// blocks are (h, encoded state, encoded control), so block (a, b) of
/// `cell.weight` is W_{a b} and block a of `cell.bias` is b_a.
struct PicrnnParams {
  Architecture arch;
  std::array<WeightNormConv, 3> state_encoder;
  WeightNormConv control_encoder;
  PlainConv cell;
  std::array<WeightNormConv, 3> decoder;
  PlainConv output;

  /// Kaiming-normal weights, magnitudes equal to the initial filter norms,
  /// zero biases. Deterministic in the seed.
  static PicrnnParams initialize(const Architecture& arch, std::uint64_t seed);

  std::vector<NamedParameter> named() const;
  std::vector<ad::Tensor> tensors() const;
  std::size_t count() const;
  /// Deep copy with fresh leaves.
  PicrnnParams clone() const;
};

struct HiddenState {
  ad::Tensor h;
  ad::Tensor c;

  static HiddenState zeros(const Architecture& arch);
  HiddenState detach() const { return {h.detach(), c.detach()}; }
};

/// Affine pressure normalisation (x - reference) / scale; rate controls are
/// divided by rate_scale.
struct Normalizer {
  double reference = 0.0;
  double scale = 1.0;
  double rate_scale = 1.0;

  /// reference = initial pressure, scale = initial pressure minus the
  /// lowest scheduled BHP (0.1 x initial pressure if none lies below it).
  static Normalizer from(const ReservoirModel& model, const ControlSchedule& schedule);
  Vector controls(const Vector& u, const std::vector<WellSpec>& wells) const;
};

/// Conv weights after the weight-norm reparameterisation. Built once per
/// forward pass and shared by every unrolled step.
struct ConvLayer {
  ad::Tensor weight;
  ad::Tensor bias;
  int stride = 1;
  int padding = 0;

  ad::Tensor operator()(const ad::Tensor& x) const {
    return ad::conv2d(x, weight, bias, stride, padding);
  }
};

struct Layers {
  Architecture arch;
  std::array<ConvLayer, 3> state_encoder;
  ConvLayer control_encoder;
  ConvLayer cell;
  std::array<ConvLayer, 3> decoder;
  ConvLayer output;
};

Layers materialize(const PicrnnParams& params);

/// Three [conv 4x4 / 2 -> tanh] blocks: 1 x 1 x H x W -> 1 x 64 x H/8 x W/8.
ad::Tensor encode_state(const Layers& layers, const ad::Tensor& x_normalized);

/// 1 x 1 x H x W map, zero except the normalised control at each well cell.
ad::Tensor control_map(const Vector& u_normalized, const std::vector<WellSpec>& wells,
                       int height, int width);
/// Pixel-unshuffle of the control map followed by the 5x5 conv.
ad::Tensor encode_control(const Layers& layers, const ad::Tensor& map);

/// Control-aware ConvLSTM update.
HiddenState convlstm_cell(const Layers& layers, const HiddenState& prev,
                          const ad::Tensor& encoded_state, const ad::Tensor& encoded_control);

/// Normalised increment 1 x 1 x H x W from the hidden state.
ad::Tensor decode(const Layers& layers, const ad::Tensor& h);
/// Decoder output before the final 1x1 scaling conv (1 x 16 x H x W).
ad::Tensor decode_features(const Layers& layers, const ad::Tensor& h);

class RolloutError : public std::runtime_error {
 public:
  RolloutError(const std::string& what, int step) : std::runtime_error(what), step_(step) {}
  int step() const { return step_; }

 private:
  int step_;
};

struct RolloutResult {
  std::vector<ad::Tensor> states;  // x_0 .. x_steps, 1 x 1 x H x W, Pa
  HiddenState hidden;              // (h, c) after the last step
};

/// Unrolls the network for `steps` transitions starting from x0 with
/// hidden state `start`, feeding schedule columns first_step,
/// first_step + 1, ... Each step: x_k = x_{k-1} + scale * decode(h_k).
RolloutResult rollout(const PicrnnParams& params, const ad::Tensor& x0,
                      const ControlSchedule& schedule, int first_step, int steps,
                      const HiddenState& start, const Normalizer& normalizer,
                      const std::vector<WellSpec>& wells);

ad::Tensor field_tensor(const Vector& x, int height, int width);
Vector field_vector(const ad::Tensor& x);
Trajectory to_trajectory(const std::vector<ad::Tensor>& states, double dt);

}  // namespace picrnn
