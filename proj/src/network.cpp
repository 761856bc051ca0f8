#include "picrnn/network.hpp"

#include "picrnn/autodiff/optim.hpp"

#include <Eigen/Core>

#include <cmath>
#include <random>

namespace picrnn {

using ad::Shape;
using ad::Tensor;

void Architecture::validate() const {
  if (height < 1 || width < 1) throw std::invalid_argument("architecture: grid must be non-empty");
  if (downscale != 8)
    throw std::invalid_argument("architecture: three stride-2 encoder blocks require downscale 8");
  if (height % downscale != 0 || width % downscale != 0)
    throw std::invalid_argument("architecture: grid " + std::to_string(height) + "x" +
                                std::to_string(width) + " not divisible by " +
                                std::to_string(downscale));
  if (encoder_kernel != 4) throw std::invalid_argument("architecture: encoder kernel must be 4 (stride 2, padding 1)");
  if (control_kernel % 2 == 0 || cell_kernel % 2 == 0 || decoder_kernel % 2 == 0)
    throw std::invalid_argument("architecture: same-size kernels must be odd");
  if (encoder_channels[2] < 1 || hidden_channels < 1)
    throw std::invalid_argument("architecture: channel counts must be positive");
}

namespace {

struct Initializer {
  std::mt19937_64 rng;

  Tensor kaiming(const Shape& shape) {
    const int fan_in = shape[1] * shape[2] * shape[3];
    return Tensor::parameter(shape, ad::kaiming_normal(shape, fan_in, rng));
  }

  WeightNormConv weight_norm(int out, int in, int k, int stride, int padding) {
    WeightNormConv layer;
    layer.direction = kaiming({out, in, k, k});
    const auto v = layer.direction.data();
    const std::size_t per = v.size() / std::size_t(out);
    std::vector<double> norms(static_cast<std::size_t>(out), 0.0);
    for (int o = 0; o < out; ++o) {
      double s = 0;
      for (std::size_t i = 0; i < per; ++i) s += v[o * per + i] * v[o * per + i];
      norms[std::size_t(o)] = std::sqrt(s);
    }
    layer.magnitude = Tensor::parameter({out}, std::move(norms));
    layer.bias = Tensor::parameter({out}, std::vector<double>(std::size_t(out), 0.0));
    layer.stride = stride;
    layer.padding = padding;
    return layer;
  }

  PlainConv plain(int out, int in, int k, int stride, int padding) {
    PlainConv layer;
    layer.weight = kaiming({out, in, k, k});
    layer.bias = Tensor::parameter({out}, std::vector<double>(std::size_t(out), 0.0));
    layer.stride = stride;
    layer.padding = padding;
    return layer;
  }
};

Tensor copy_leaf(const Tensor& t) {
  return Tensor::parameter(t.shape(), std::vector<double>(t.data().begin(), t.data().end()));
}

WeightNormConv copy_layer(const WeightNormConv& l) {
  return {copy_leaf(l.direction), copy_leaf(l.magnitude), copy_leaf(l.bias), l.stride, l.padding};
}

PlainConv copy_layer(const PlainConv& l) {
  return {copy_leaf(l.weight), copy_leaf(l.bias), l.stride, l.padding};
}

ConvLayer realize(const WeightNormConv& l) {
  return {ad::weight_norm(l.direction, l.magnitude), l.bias, l.stride, l.padding};
}

ConvLayer realize(const PlainConv& l) { return {l.weight, l.bias, l.stride, l.padding}; }

void check_finite(const Tensor& t, const char* what, int step) {
  for (double v : t.data())
    if (!std::isfinite(v))
      throw RolloutError(std::string("non-finite ") + what + " at rollout step " + std::to_string(step), step);
}

}  // namespace

PicrnnParams PicrnnParams::initialize(const Architecture& arch, std::uint64_t seed) {
  arch.validate();
  Initializer init{std::mt19937_64(seed)};
  PicrnnParams p;
  p.arch = arch;
  int in = 1;
  for (int b = 0; b < 3; ++b) {
    p.state_encoder[std::size_t(b)] = init.weight_norm(arch.encoder_channels[std::size_t(b)], in, arch.encoder_kernel, 2, 1);
    in = arch.encoder_channels[std::size_t(b)];
  }
  const int unshuffled = arch.downscale * arch.downscale;
  p.control_encoder = init.weight_norm(arch.hidden_channels, unshuffled, arch.control_kernel, 1,
                                       arch.control_kernel / 2);
  const int hc = arch.hidden_channels;
  p.cell = init.plain(4 * hc, hc + arch.encoder_channels[2] + arch.hidden_channels, arch.cell_kernel,
                      1, arch.cell_kernel / 2);
  in = hc;
  for (int b = 0; b < 3; ++b) {
    p.decoder[std::size_t(b)] = init.weight_norm(arch.decoder_channels[std::size_t(b)], in, arch.decoder_kernel, 1,
                                                 arch.decoder_kernel / 2);
    in = arch.decoder_channels[std::size_t(b)];
  }
  p.output = init.plain(1, in, 1, 1, 0);
  return p;
}

std::vector<NamedParameter> PicrnnParams::named() const {
  std::vector<NamedParameter> out;
  auto add_wn = [&](const std::string& prefix, const WeightNormConv& l, const std::string& role) {
    out.push_back({prefix + ".v", role + "/direction", l.direction});
    out.push_back({prefix + ".g", role + "/magnitude", l.magnitude});
    out.push_back({prefix + ".b", role + "/bias", l.bias});
  };
  for (int b = 0; b < 3; ++b)
    add_wn("state_encoder." + std::to_string(b), state_encoder[std::size_t(b)], "state_encoder");
  add_wn("control_encoder", control_encoder, "control_encoder");
  out.push_back({"cell.weight", "convlstm/gate_kernels[f,i,c,o]x[h,ex,eu]", cell.weight});
  out.push_back({"cell.bias", "convlstm/gate_bias[f,i,c,o]", cell.bias});
  for (int b = 0; b < 3; ++b) add_wn("decoder." + std::to_string(b), decoder[std::size_t(b)], "decoder");
  out.push_back({"output.weight", "decoder/scaling_weight", output.weight});
  out.push_back({"output.bias", "decoder/scaling_bias", output.bias});
  return out;
}

std::vector<Tensor> PicrnnParams::tensors() const {
  std::vector<Tensor> out;
  for (auto& np : named()) out.push_back(np.tensor);
  return out;
}

std::size_t PicrnnParams::count() const {
  std::size_t n = 0;
  for (const auto& t : tensors()) n += t.size();
  return n;
}

PicrnnParams PicrnnParams::clone() const {
  PicrnnParams p;
  p.arch = arch;
  for (std::size_t b = 0; b < 3; ++b) {
    p.state_encoder[b] = copy_layer(state_encoder[b]);
    p.decoder[b] = copy_layer(decoder[b]);
  }
  p.control_encoder = copy_layer(control_encoder);
  p.cell = copy_layer(cell);
  p.output = copy_layer(output);
  return p;
}

HiddenState HiddenState::zeros(const Architecture& arch) {
  const Shape shape{1, arch.hidden_channels, arch.latent_height(), arch.latent_width()};
  return {Tensor::zeros(shape), Tensor::zeros(shape)};
}

Normalizer Normalizer::from(const ReservoirModel& model, const ControlSchedule& schedule) {
  Normalizer n;
  n.reference = model.rock.initial_pressure;
  double min_bhp = n.reference;
  double max_rate = 0.0;
  for (int w = 0; w < schedule.num_wells() && w < int(model.wells.size()); ++w) {
    const auto row = schedule.values().row(w);
    if (model.wells[std::size_t(w)].kind == ControlKind::Bhp)
      min_bhp = std::min(min_bhp, row.minCoeff());
    else
      max_rate = std::max(max_rate, row.cwiseAbs().maxCoeff());
  }
  n.scale = n.reference - min_bhp > 0 ? n.reference - min_bhp : 0.1 * n.reference;
  n.rate_scale = max_rate > 0 ? max_rate : 1.0;
  return n;
}

Vector Normalizer::controls(const Vector& u, const std::vector<WellSpec>& wells) const {
  if (std::size_t(u.size()) != wells.size())
    throw std::invalid_argument("normalizer: control count does not match wells");
  Vector out(u.size());
  for (Index w = 0; w < u.size(); ++w)
    out[w] = wells[std::size_t(w)].kind == ControlKind::Bhp ? (u[w] - reference) / scale : u[w] / rate_scale;
  return out;
}

Layers materialize(const PicrnnParams& params) {
  Layers layers;
  layers.arch = params.arch;
  for (std::size_t b = 0; b < 3; ++b) {
    layers.state_encoder[b] = realize(params.state_encoder[b]);
    layers.decoder[b] = realize(params.decoder[b]);
  }
  layers.control_encoder = realize(params.control_encoder);
  layers.cell = realize(params.cell);
  layers.output = realize(params.output);
  return layers;
}

ad::Tensor encode_state(const Layers& layers, const ad::Tensor& x) {
  if (x.rank() != 4 || x.dim(1) != 1 || x.dim(2) % 8 != 0 || x.dim(3) % 8 != 0 || x.dim(2) < 8 ||
      x.dim(3) < 8)
    throw std::invalid_argument("encode_state: expected 1 x 1 x H x W with H, W divisible by 8, got " +
                                ad::to_string(x.shape()));
  Tensor e = x;
  for (const auto& layer : layers.state_encoder) e = ad::tanh(layer(e));
  return e;
}

ad::Tensor control_map(const Vector& u, const std::vector<WellSpec>& wells, int height, int width) {
  if (std::size_t(u.size()) != wells.size())
    throw std::invalid_argument("control_map: control count does not match wells");
  std::vector<double> map(std::size_t(height) * std::size_t(width), 0.0);
  for (std::size_t w = 0; w < wells.size(); ++w) {
    const auto& well = wells[w];
    if (well.i < 0 || well.j < 0 || well.i >= width || well.j >= height)
      throw std::invalid_argument("control_map: well " + well.name + " outside grid");
    map[std::size_t(well.j) * std::size_t(width) + std::size_t(well.i)] = u[Index(w)];
  }
  return Tensor::from({1, 1, height, width}, std::move(map));
}

ad::Tensor encode_control(const Layers& layers, const ad::Tensor& map) {
  return layers.control_encoder(ad::pixel_unshuffle(map, layers.arch.downscale));
}

HiddenState convlstm_cell(const Layers& layers, const HiddenState& prev,
                          const ad::Tensor& encoded_state, const ad::Tensor& encoded_control) {
  const int hc = layers.arch.hidden_channels;
  const auto& s = prev.h.shape();
  if (prev.c.shape() != s || encoded_state.rank() != 4 || encoded_control.rank() != 4 ||
      encoded_state.dim(2) != s[2] || encoded_state.dim(3) != s[3] ||
      encoded_control.dim(2) != s[2] || encoded_control.dim(3) != s[3])
    throw std::invalid_argument("convlstm_cell: operands are not on the same latent grid");
  const Tensor z = layers.cell(ad::concat_channels({prev.h, encoded_state, encoded_control}));
  const Tensor f = ad::sigmoid(ad::slice_channels(z, 0, hc));
  const Tensor i = ad::sigmoid(ad::slice_channels(z, hc, hc));
  const Tensor candidate = ad::tanh(ad::slice_channels(z, 2 * hc, hc));
  const Tensor o = ad::sigmoid(ad::slice_channels(z, 3 * hc, hc));
  Tensor c = f * prev.c + i * candidate;
  Tensor h = o * ad::tanh(c);
  return {std::move(h), std::move(c)};
}

ad::Tensor decode_features(const Layers& layers, const ad::Tensor& h) {
  if (h.rank() != 4 || h.dim(2) * 8 != layers.arch.height || h.dim(3) * 8 != layers.arch.width)
    throw std::invalid_argument("decode: latent " + ad::to_string(h.shape()) + " does not match grid");
  Tensor d = h;
  for (const auto& layer : layers.decoder) d = ad::tanh(layer(ad::upsample_nearest(d, 2)));
  return d;
}

ad::Tensor decode(const Layers& layers, const ad::Tensor& h) {
  return layers.output(decode_features(layers, h));
}

RolloutResult rollout(const PicrnnParams& params, const ad::Tensor& x0,
                      const ControlSchedule& schedule, int first_step, int steps,
                      const HiddenState& start, const Normalizer& normalizer,
                      const std::vector<WellSpec>& wells) {
  const auto& arch = params.arch;
  if (steps < 0 || first_step < 0 || first_step + steps > schedule.num_steps())
    throw std::invalid_argument("rollout: requested steps exceed the schedule");
  if (x0.shape() != Shape{1, 1, arch.height, arch.width})
    throw std::invalid_argument("rollout: initial state must be 1 x 1 x H x W");
  check_finite(x0, "initial state", 0);

  RolloutResult result;
  result.states.reserve(std::size_t(steps) + 1);
  result.states.push_back(x0);
  result.hidden = start;
  if (steps == 0) return result;

  const Layers layers = materialize(params);
  const double inv_scale = 1.0 / normalizer.scale;
  for (int k = 1; k <= steps; ++k) {
    const Tensor& prev = result.states.back();
    const Tensor x_norm = ad::affine(prev, inv_scale, -normalizer.reference * inv_scale);
    const Vector u = normalizer.controls(schedule.control_at(first_step + k - 1), wells);
    const Tensor ex = encode_state(layers, x_norm);
    const Tensor eu = encode_control(layers, control_map(u, wells, arch.height, arch.width));
    result.hidden = convlstm_cell(layers, result.hidden, ex, eu);
    Tensor next = prev + ad::affine(decode(layers, result.hidden.h), normalizer.scale);
    check_finite(next, "state", k);
    result.states.push_back(std::move(next));
  }
  return result;
}

ad::Tensor field_tensor(const Vector& x, int height, int width) {
  if (x.size() != Index(height) * width) throw std::invalid_argument("field_tensor: size mismatch");
  return Tensor::from({1, 1, height, width}, std::vector<double>(x.data(), x.data() + x.size()));
}

Vector field_vector(const ad::Tensor& x) {
  const auto d = x.data();
  return Eigen::Map<const Vector>(d.data(), Index(d.size()));
}

Trajectory to_trajectory(const std::vector<ad::Tensor>& states, double dt) {
  Trajectory t;
  t.dt = dt;
  t.provenance = Provenance::Network;
  for (const auto& s : states) t.states.push_back(field_vector(s));
  return t;
}

}  // namespace picrnn
