#include "picrnn/network.hpp"
#include "support/oracles.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace picrnn;
using namespace picrnn::testing;
using ad::Tensor;

namespace {

Architecture arch_for(int n) {
  Architecture a;
  a.height = n;
  a.width = n;
  return a;
}

/// Parameter count of the layer chain, written out layer by layer.
std::size_t expected_count(const Architecture& a) {
  auto wn = [](std::size_t o, std::size_t c, std::size_t k) { return o * c * k * k + o + o; };
  const std::size_t r2 = std::size_t(a.downscale * a.downscale);
  const std::size_t hc = std::size_t(a.hidden_channels);
  std::size_t n = wn(16, 1, 4) + wn(32, 16, 4) + wn(64, 32, 4);
  n += wn(64, r2, 5);
  n += 4 * hc * (hc + 64 + 64) * 9 + 4 * hc;
  n += wn(64, hc, 3) + wn(32, 64, 3) + wn(16, 32, 3);
  n += 16 + 1;
  return n;
}

void zero(Tensor& t) {
  for (auto& x : t.mutable_data()) x = 0.0;
}

std::vector<WellSpec> case1_wells() { return {{"P1", 10, 10}, {"P2", 54, 54}}; }

}  // namespace

TEST(Architecture, ValidatesShapeChain) {
  EXPECT_NO_THROW(arch_for(64).validate());
  EXPECT_NO_THROW(arch_for(16).validate());
  EXPECT_THROW(arch_for(60).validate(), std::invalid_argument);
  Architecture a = arch_for(64);
  a.downscale = 4;
  EXPECT_THROW(a.validate(), std::invalid_argument);
  a = arch_for(64);
  a.cell_kernel = 4;
  EXPECT_THROW(a.validate(), std::invalid_argument);
}

TEST(Params, CountMatchesLayerChain) {
  auto p = PicrnnParams::initialize(arch_for(64), 0);
  EXPECT_EQ(p.count(), expected_count(arch_for(64)));
  EXPECT_EQ(p.count(), 646737u);
  // Grid size does not change the convolution weights.
  EXPECT_EQ(PicrnnParams::initialize(arch_for(16), 0).count(), 646737u);
}

TEST(Params, NamedTensorsHaveExpectedShapes) {
  auto p = PicrnnParams::initialize(arch_for(16), 0);
  auto named = p.named();
  ASSERT_EQ(named.size(), 3u * 3 + 3 + 2 + 3 * 3 + 2);
  EXPECT_EQ(named.front().name, "state_encoder.0.v");
  EXPECT_EQ(named.front().tensor.shape(), (ad::Shape{16, 1, 4, 4}));
  EXPECT_EQ(p.cell.weight.shape(), (ad::Shape{256, 192, 3, 3}));
  EXPECT_EQ(p.control_encoder.direction.shape(), (ad::Shape{64, 64, 5, 5}));
  EXPECT_EQ(p.output.weight.shape(), (ad::Shape{1, 16, 1, 1}));
  for (const auto& np : named) EXPECT_TRUE(np.tensor.requires_grad()) << np.name;
}

TEST(Params, InitialisationDeterministicWithUnitReparameterisation) {
  auto a = PicrnnParams::initialize(arch_for(16), 5);
  auto b = PicrnnParams::initialize(arch_for(16), 5);
  auto c = PicrnnParams::initialize(arch_for(16), 6);
  auto ta = a.tensors(), tb = b.tensors(), tc = c.tensors();
  bool differs = false;
  for (std::size_t t = 0; t < ta.size(); ++t) {
    ASSERT_TRUE(std::equal(ta[t].data().begin(), ta[t].data().end(), tb[t].data().begin()));
    differs |= !std::equal(ta[t].data().begin(), ta[t].data().end(), tc[t].data().begin());
  }
  EXPECT_TRUE(differs);
  // g starts at ||v||, so the effective weight equals v.
  Tensor w = ad::weight_norm(a.decoder[1].direction, a.decoder[1].magnitude);
  for (std::size_t i = 0; i < w.size(); i += 97) EXPECT_NEAR(w[i], a.decoder[1].direction[i], 1e-14);
  for (double bias : a.cell.bias.data()) EXPECT_EQ(bias, 0.0);
}

TEST(Params, CloneIsIndependent) {
  auto a = PicrnnParams::initialize(arch_for(16), 1);
  auto b = a.clone();
  b.output.weight.mutable_data()[0] += 1.0;
  EXPECT_NE(a.output.weight[0], b.output.weight[0]);
}

TEST(StateEncoder, LatentShapesAndRange) {
  ad::NoGradGuard guard;
  for (int n : {64, 16}) {
    auto p = PicrnnParams::initialize(arch_for(n), 2);
    Tensor x = Tensor::from({1, 1, n, n}, random_values(std::size_t(n * n), 3));
    Tensor e = encode_state(materialize(p), x);
    EXPECT_EQ(e.shape(), (ad::Shape{1, 64, n / 8, n / 8}));
    for (double v : e.data()) {
      EXPECT_GT(v, -1.0);
      EXPECT_LT(v, 1.0);
    }
  }
}

TEST(ControlEncoder, UnshuffledMapHasOneNonzeroPerWell) {
  Vector u(2);
  u << -1.0, -0.5;
  Tensor map = control_map(u, case1_wells(), 64, 64);
  Tensor un = ad::pixel_unshuffle(map, 8);
  EXPECT_EQ(un.shape(), (ad::Shape{1, 64, 8, 8}));
  int nonzeros = 0;
  for (double v : un.data()) nonzeros += v != 0.0;
  EXPECT_EQ(nonzeros, 2);
  EXPECT_EQ(map[10 * 64 + 10], -1.0);
  EXPECT_EQ(map[54 * 64 + 54], -0.5);
}

TEST(ControlEncoder, ZeroControlsWithZeroBiasGiveZero) {
  ad::NoGradGuard guard;
  auto p = PicrnnParams::initialize(arch_for(64), 4);
  Tensor e = encode_control(materialize(p), control_map(Vector::Zero(2), case1_wells(), 64, 64));
  EXPECT_EQ(e.shape(), (ad::Shape{1, 64, 8, 8}));
  for (double v : e.data()) EXPECT_EQ(v, 0.0);
}

TEST(ControlEncoder, RejectsWellOutsideGrid) {
  EXPECT_THROW(control_map(Vector::Zero(1), {{"X", 70, 1}}, 64, 64), std::invalid_argument);
  EXPECT_THROW(control_map(Vector::Zero(2), {{"X", 1, 1}}, 64, 64), std::invalid_argument);
}

TEST(ConvLstm, ZeroWeightsHalveCellState) {
  ad::NoGradGuard guard;
  auto p = PicrnnParams::initialize(arch_for(16), 5);
  zero(p.cell.weight);
  Layers layers = materialize(p);
  HiddenState prev{Tensor::from({1, 64, 2, 2}, random_values(256, 6)), Tensor::from({1, 64, 2, 2}, random_values(256, 7, -3, 3))};
  Tensor ex = Tensor::from({1, 64, 2, 2}, random_values(256, 8));
  HiddenState next = convlstm_cell(layers, prev, ex, ex);
  for (std::size_t i = 0; i < 256; ++i) {
    EXPECT_DOUBLE_EQ(next.c[i], 0.5 * prev.c[i]);
    EXPECT_DOUBLE_EQ(next.h[i], 0.5 * std::tanh(0.5 * prev.c[i]));
  }
}

TEST(ConvLstm, CentreTapKernelsMatchPointwiseOracle) {
  ad::NoGradGuard guard;
  auto p = PicrnnParams::initialize(arch_for(16), 9);
  const int hc = 64, cin = 192;
  auto w = p.cell.weight.mutable_data();
  auto bias = p.cell.bias.mutable_data();
  auto centre = random_values(std::size_t(4 * hc * cin), 10, -0.2, 0.2);
  auto bvals = random_values(std::size_t(4 * hc), 11, -0.5, 0.5);
  for (std::size_t i = 0; i < w.size(); ++i) w[i] = 0.0;
  for (int o = 0; o < 4 * hc; ++o) {
    bias[std::size_t(o)] = bvals[std::size_t(o)];
    for (int c = 0; c < cin; ++c) w[(std::size_t(o) * cin + c) * 9 + 4] = centre[std::size_t(o) * cin + c];
  }
  Layers layers = materialize(p);
  HiddenState prev{Tensor::from({1, hc, 2, 2}, random_values(256, 12)), Tensor::from({1, hc, 2, 2}, random_values(256, 13))};
  Tensor ex = Tensor::from({1, 64, 2, 2}, random_values(256, 14));
  Tensor eu = Tensor::from({1, 64, 2, 2}, random_values(256, 15));
  HiddenState next = convlstm_cell(layers, prev, ex, eu);

  auto sig = [](double z) { return 1.0 / (1.0 + std::exp(-z)); };
  for (int pix = 0; pix < 4; ++pix) {
    std::vector<double> in(cin);
    for (int c = 0; c < 64; ++c) {
      in[std::size_t(c)] = prev.h[std::size_t(c * 4 + pix)];
      in[std::size_t(64 + c)] = ex[std::size_t(c * 4 + pix)];
      in[std::size_t(128 + c)] = eu[std::size_t(c * 4 + pix)];
    }
    auto gate = [&](int block, int ch) {
      const int o = block * hc + ch;
      double z = bvals[std::size_t(o)];
      for (int c = 0; c < cin; ++c) z += centre[std::size_t(o) * cin + c] * in[std::size_t(c)];
      return z;
    };
    for (int ch = 0; ch < hc; ++ch) {
      const double f = sig(gate(0, ch)), i = sig(gate(1, ch)), g = std::tanh(gate(2, ch)), o = sig(gate(3, ch));
      const double c = f * prev.c[std::size_t(ch * 4 + pix)] + i * g;
      EXPECT_NEAR(next.c[std::size_t(ch * 4 + pix)], c, 1e-12);
      EXPECT_NEAR(next.h[std::size_t(ch * 4 + pix)], o * std::tanh(c), 1e-12);
    }
  }
}

TEST(ConvLstm, GatesBounded) {
  ad::NoGradGuard guard;
  auto p = PicrnnParams::initialize(arch_for(16), 16);
  Layers layers = materialize(p);
  HiddenState prev = HiddenState::zeros(p.arch);
  Tensor ex = Tensor::from({1, 64, 2, 2}, random_values(256, 17, -5, 5));
  HiddenState next = convlstm_cell(layers, prev, ex, ex);
  for (double h : next.h.data()) EXPECT_LT(std::abs(h), 1.0);
  for (double c : next.c.data()) EXPECT_LT(std::abs(c), 1.0);  // |c| <= |f c_prev| + |i g| < 1 from zero
}

TEST(ConvLstm, RejectsMismatchedLatentGrid) {
  ad::NoGradGuard guard;
  auto p = PicrnnParams::initialize(arch_for(16), 16);
  Layers layers = materialize(p);
  Tensor bad = Tensor::zeros({1, 64, 3, 3});
  EXPECT_THROW(convlstm_cell(layers, HiddenState::zeros(p.arch), bad, bad), std::invalid_argument);
}

TEST(Decoder, ShapesAndRange) {
  ad::NoGradGuard guard;
  for (int n : {64, 16}) {
    auto p = PicrnnParams::initialize(arch_for(n), 18);
    Layers layers = materialize(p);
    Tensor h = Tensor::from({1, 64, n / 8, n / 8}, random_values(std::size_t(n * n), 19));
    Tensor feat = decode_features(layers, h);
    EXPECT_EQ(feat.shape(), (ad::Shape{1, 16, n, n}));
    for (double v : feat.data()) EXPECT_LT(std::abs(v), 1.0);
    EXPECT_EQ(decode(layers, h).shape(), (ad::Shape{1, 1, n, n}));
  }
}

TEST(Decoder, ZeroOutputLayerGivesZero) {
  ad::NoGradGuard guard;
  auto p = PicrnnParams::initialize(arch_for(16), 20);
  zero(p.output.weight);
  Tensor y = decode(materialize(p), Tensor::from({1, 64, 2, 2}, random_values(256, 21)));
  for (double v : y.data()) EXPECT_EQ(v, 0.0);
}

TEST(Normalizer, ReferenceAndScale) {
  auto m = desk_model();
  auto sched = ControlSchedule::constant(Vector::Constant(2, psi(1800.0)), days(0.5), 4);
  auto n = Normalizer::from(m, sched);
  EXPECT_DOUBLE_EQ(n.reference, psi(3000.0));
  EXPECT_NEAR(n.scale, psi(1200.0), 1e-6);
  Vector u = n.controls(sched.control_at(0), m.wells);
  EXPECT_NEAR(u[0], -1.0, 1e-15);
}

TEST(Normalizer, FallbackAndRateScale) {
  auto m = desk_model();
  m.wells[1].kind = ControlKind::Rate;
  Eigen::MatrixXd v(2, 2);
  v << psi(3200.0), psi(3100.0), 2e-3, -4e-3;
  auto n = Normalizer::from(m, ControlSchedule(v, days(0.5)));
  EXPECT_DOUBLE_EQ(n.scale, 0.1 * psi(3000.0));
  EXPECT_DOUBLE_EQ(n.rate_scale, 4e-3);
  EXPECT_DOUBLE_EQ(n.controls(v.col(1), m.wells)[1], -1.0);
}

class RolloutTest : public ::testing::Test {
 protected:
  ReservoirModel model = desk_model();
  ControlSchedule schedule = ControlSchedule::constant(Vector::Constant(2, psi(1800.0)), days(0.5), 20);
  Normalizer norm = Normalizer::from(model, schedule);
  PicrnnParams params = PicrnnParams::initialize(arch_for(16), 22);
  Tensor x0 = field_tensor(model.initial_state(), 16, 16);
};

TEST_F(RolloutTest, ZeroOutputLayerKeepsInitialState) {
  ad::NoGradGuard guard;
  zero(params.output.weight);
  auto r = rollout(params, x0, schedule, 0, 5, HiddenState::zeros(params.arch), norm, model.wells);
  ASSERT_EQ(r.states.size(), 6u);
  for (const auto& x : r.states)
    for (std::size_t i = 0; i < x.size(); ++i) EXPECT_EQ(x[i], x0[i]);
}

TEST_F(RolloutTest, CompositionIsBitwise) {
  ad::NoGradGuard guard;
  for (auto [a, b] : {std::pair{1, 1}, std::pair{10, 5}}) {
    auto full = rollout(params, x0, schedule, 0, a + b, HiddenState::zeros(params.arch), norm, model.wells);
    auto head = rollout(params, x0, schedule, 0, a, HiddenState::zeros(params.arch), norm, model.wells);
    auto tail = rollout(params, head.states.back(), schedule, a, b, head.hidden, norm, model.wells);
    for (int k = 0; k <= b; ++k) {
      auto s1 = full.states[std::size_t(a + k)].data();
      auto s2 = tail.states[std::size_t(k)].data();
      EXPECT_TRUE(std::equal(s1.begin(), s1.end(), s2.begin())) << "a=" << a << " k=" << k;
    }
    auto h1 = full.hidden.h.data(), h2 = tail.hidden.h.data();
    EXPECT_TRUE(std::equal(h1.begin(), h1.end(), h2.begin()));
  }
}

TEST_F(RolloutTest, ZeroStepsReturnsStart) {
  auto r = rollout(params, x0, schedule, 3, 0, HiddenState::zeros(params.arch), norm, model.wells);
  EXPECT_EQ(r.states.size(), 1u);
}

TEST_F(RolloutTest, RejectsHorizonBeyondSchedule) {
  EXPECT_THROW(rollout(params, x0, schedule, 15, 6, HiddenState::zeros(params.arch), norm, model.wells),
               std::invalid_argument);
  EXPECT_THROW(rollout(params, Tensor::zeros({1, 1, 8, 8}), schedule, 0, 1, HiddenState::zeros(params.arch), norm,
                       model.wells),
               std::invalid_argument);
}

TEST_F(RolloutTest, NonFiniteStateRaisesWithStep) {
  ad::NoGradGuard guard;
  params.output.bias.mutable_data()[0] = std::numeric_limits<double>::infinity();
  try {
    rollout(params, x0, schedule, 0, 3, HiddenState::zeros(params.arch), norm, model.wells);
    FAIL() << "expected RolloutError";
  } catch (const RolloutError& e) {
    EXPECT_EQ(e.step(), 1);
  }
}

TEST_F(RolloutTest, TrajectoryConversion) {
  ad::NoGradGuard guard;
  auto r = rollout(params, x0, schedule, 0, 2, HiddenState::zeros(params.arch), norm, model.wells);
  auto t = to_trajectory(r.states, schedule.dt());
  EXPECT_EQ(t.provenance, Provenance::Network);
  EXPECT_EQ(t.states.size(), 3u);
  EXPECT_EQ(t.states[0], model.initial_state());
}
