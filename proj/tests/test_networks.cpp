#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>

#include "test_util.hpp"
#include "vdn/error.hpp"
#include "vdn/networks.hpp"

using namespace vdn;

namespace {

std::size_t conv_params(std::size_t in, std::size_t out, std::size_t k = 3) { return out * in * k * k + out; }

// Independent tally of the architecture described in the header.
std::size_t dnet_param_oracle(const DNetConfig& c) {
  std::size_t n = 0, in = static_cast<std::size_t>(c.in_channels);
  std::vector<std::size_t> ch;
  for (int l = 0; l < c.depth; ++l) ch.push_back(static_cast<std::size_t>(c.base_channels) << l);
  for (std::size_t l = 0; l < ch.size(); ++l) {
    n += conv_params(in, ch[l]) + conv_params(ch[l], ch[l]);
    in = ch[l];
  }
  for (std::size_t l = 0; l + 1 < ch.size(); ++l)
    n += (ch[l + 1] * ch[l] * 4 + ch[l]) + conv_params(2 * ch[l], ch[l]) + conv_params(ch[l], ch[l]);
  return n + conv_params(ch[0], 2 * static_cast<std::size_t>(c.in_channels));
}

std::size_t snet_param_oracle(const SNetConfig& c) {
  const auto C = static_cast<std::size_t>(c.channels), in = static_cast<std::size_t>(c.in_channels);
  return conv_params(in, C) + static_cast<std::size_t>(c.layers - 2) * conv_params(C, C) + conv_params(C, 2 * in);
}

void perturb(ParamStore& ps, std::uint64_t seed, float scale) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<float> n(0.0f, scale);
  for (auto& t : ps.tensors())
    if (t.name.rfind("head", 0) == 0)
      for (float& v : t.value) v += n(rng);
}

double weighted_sum(const Tensor& a, const Tensor& w) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += static_cast<double>(a[i]) * w[i];
  return s;
}

// Zero biases put every pixel with an all-zero input exactly on a ReLU kink,
// where the two sides of a central difference disagree.
void jitter_biases(ParamStore& ps, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<float> u(0.05f, 0.2f);
  for (auto& t : ps.tensors())
    if (t.name.ends_with(".bias") && t.name.rfind("head", 0) != 0)
      for (float& v : t.value) v += rng() % 2 ? u(rng) : -u(rng);
}

// Checks accumulated parameter gradients against central differences of a
// scalar objective.  Kinks near the evaluation point can still spoil a
// handful of float differences, so a small fraction of misses is tolerated.
void check_param_grads(ParamStore& ps, const std::function<double()>& objective) {
  std::size_t checked = 0, bad = 0;
  for (auto& t : ps.tensors())
    for (std::size_t i = 0; i < t.size(); ++i) {
      const float orig = t.value[i];
      const float h = 1e-3f * std::max(1.0f, std::abs(orig));
      t.value[i] = orig + h;
      const double hi = objective();
      t.value[i] = orig - h;
      const double lo = objective();
      t.value[i] = orig;
      const double fd = (hi - lo) / (2.0 * h);
      const double an = t.grad[i];
      ++checked;
      if (std::abs(fd - an) > 2e-2 * std::max({std::abs(fd), std::abs(an), 1e-2})) ++bad;
    }
  EXPECT_LE(bad, checked / 50) << bad << " of " << checked << " gradients disagree";
}

}  // namespace

TEST(NetConfigs, DefaultsAndDeskPresets) {
  EXPECT_EQ(SNet(SNetConfig{}).conv_layer_count(), 5u);
  const DNetConfig d = desk_dnet_config();
  EXPECT_EQ(d.depth, 3);
  EXPECT_EQ(d.base_channels, 16);
  const SNetConfig s = desk_snet_config();
  EXPECT_EQ(s.layers, 4);
  EXPECT_EQ(s.channels, 24);
  DNetConfig bad = d;
  bad.depth = 0;
  EXPECT_THROW(bad.validate(), ConfigError);
  SNetConfig bad_s = s;
  bad_s.layers = 1;
  EXPECT_THROW(bad_s.validate(), ConfigError);
}

TEST(NetConfigs, ParameterCountsMatchOracle) {
  for (int depth : {1, 2, 3, 4})
    for (int base : {4, 16}) {
      DNetConfig c;
      c.depth = depth;
      c.base_channels = base;
      EXPECT_EQ(count_params(c), dnet_param_oracle(c)) << depth << "/" << base;
    }
  for (int layers : {2, 4, 5}) {
    SNetConfig c;
    c.layers = layers;
    c.channels = 24;
    c.in_channels = 1;
    EXPECT_EQ(count_params(c), snet_param_oracle(c));
  }
}

TEST(DNet, InitialisationGivesIdentityMean) {
  DNet net(desk_dnet_config());
  net.init(5);
  const Tensor y = testutil::random_tensor(Shape{3, 32, 32}, 1);
  const DNet::Output out = net.forward(y);
  EXPECT_EQ(out.mu, y);
  for (float v : out.m_sq.values()) EXPECT_NEAR(v, kSyntheticEpsilon0Sq, 1e-5 * kSyntheticEpsilon0Sq);
}

TEST(DNet, InferHandlesArbitrarySizes) {
  DNet net(desk_dnet_config());
  net.init(6);
  perturb(net.params(), 1, 0.05f);
  const Tensor y = testutil::random_tensor(Shape{3, 65, 63}, 2);
  EXPECT_THROW(net.forward(y), ShapeError);
  const DNet::Output out = net.infer(y);
  EXPECT_EQ(out.mu.shape(), y.shape());
  EXPECT_EQ(out.m_sq.shape(), y.shape());
  EXPECT_TRUE(out.mu.all_finite());
  for (float v : out.m_sq.values()) EXPECT_GT(v, 0.0f);
  EXPECT_THROW(net.infer(Tensor(Shape{1, 8, 8})), ShapeError);
}

TEST(DNet, InitIsDeterministicPerSeed) {
  DNet a(desk_dnet_config()), b(desk_dnet_config()), c(desk_dnet_config());
  a.init(42);
  b.init(42);
  c.init(43);
  EXPECT_EQ(a.params().checksum(), b.params().checksum());
  EXPECT_NE(a.params().checksum(), c.params().checksum());
}

TEST(DNet, BackwardMatchesFiniteDifferences) {
  DNetConfig cfg;
  cfg.depth = 2;
  cfg.base_channels = 2;
  cfg.in_channels = 1;
  cfg.m_sq_init = 0.1;
  DNet net(cfg);
  net.init(7);
  perturb(net.params(), 2, 0.3f);
  jitter_biases(net.params(), 12);
  const Tensor y = testutil::random_tensor(Shape{1, 6, 6}, 3);
  const Tensor wm = testutil::random_tensor(y.shape(), 4, -1, 1), ws = testutil::random_tensor(y.shape(), 5, -1, 1);
  DNet::Cache cache;
  net.forward(y, &cache);
  net.params().zero_grad();
  net.backward(cache, wm, ws);
  check_param_grads(net.params(), [&] {
    const DNet::Output o = net.forward(y);
    return weighted_sum(o.mu, wm) + weighted_sum(o.m_sq, ws);
  });
}

TEST(SNet, InitialisationHitsHeadTargets) {
  SNetConfig cfg = desk_snet_config();
  SNet net(cfg);
  net.init(1);
  const SNet::Output out = net.forward(testutil::random_tensor(Shape{3, 16, 16}, 2));
  for (float a : out.alpha.values()) EXPECT_NEAR(a, cfg.alpha_init, 1e-5 * cfg.alpha_init);
  for (float b : out.beta.values()) EXPECT_NEAR(b, cfg.beta_init, 1e-5 * cfg.beta_init);
}

TEST(SNet, OutputsStayPositive) {
  SNet net(desk_snet_config());
  net.init(3);
  perturb(net.params(), 3, 1.0f);
  const SNet::Output out = net.forward(testutil::random_tensor(Shape{3, 20, 17}, 4));
  for (float a : out.alpha.values()) EXPECT_GT(a, 0.0f);
  for (float b : out.beta.values()) EXPECT_GT(b, 0.0f);
  EXPECT_TRUE(out.alpha.all_finite() && out.beta.all_finite());
}

TEST(SNet, BackwardMatchesFiniteDifferences) {
  SNetConfig cfg;
  cfg.layers = 3;
  cfg.channels = 3;
  cfg.in_channels = 1;
  cfg.alpha_init = 2.0;
  cfg.beta_init = 0.5;
  SNet net(cfg);
  net.init(8);
  perturb(net.params(), 4, 0.3f);
  jitter_biases(net.params(), 13);
  const Tensor y = testutil::random_tensor(Shape{1, 5, 5}, 6);
  const Tensor wa = testutil::random_tensor(y.shape(), 7, -1, 1), wb = testutil::random_tensor(y.shape(), 8, -1, 1);
  SNet::Cache cache;
  net.forward(y, &cache);
  net.params().zero_grad();
  net.backward(cache, wa, wb);
  check_param_grads(net.params(), [&] {
    const SNet::Output o = net.forward(y);
    return weighted_sum(o.alpha, wa) + weighted_sum(o.beta, wb);
  });
}

TEST(SNet, TranslationCovariantAwayFromBorders) {
  SNet net(desk_snet_config());
  net.init(9);
  perturb(net.params(), 5, 0.2f);
  const Tensor y = testutil::random_tensor(Shape{3, 40, 40}, 10);
  const std::size_t shift = 3;
  Tensor shifted(y.shape());
  for (std::size_t c = 0; c < 3; ++c)
    for (std::size_t r = 0; r < 40; ++r)
      for (std::size_t x = 0; x < 40; ++x) shifted.at(c, r, x) = y.at(c, (r + shift) % 40, (x + shift) % 40);
  const SNet::Output a = net.forward(y), b = net.forward(shifted);
  // Four 3x3 layers see 4 pixels in each direction.
  for (std::size_t c = 0; c < 3; ++c)
    for (std::size_t r = 4; r + shift + 4 < 40; ++r)
      for (std::size_t x = 4; x + shift + 4 < 40; ++x) {
        ASSERT_NEAR(b.alpha.at(c, r, x), a.alpha.at(c, r + shift, x + shift), 1e-4f);
        ASSERT_NEAR(b.beta.at(c, r, x), a.beta.at(c, r + shift, x + shift), 1e-6f);
      }
}

TEST(DNet, TranslationCovariantForAlignedShifts) {
  DNet net(desk_dnet_config());
  net.init(11);
  perturb(net.params(), 6, 0.05f);
  const std::size_t N = 96, shift = 8;  // a multiple of the pooling factor
  const Tensor y = testutil::random_tensor(Shape{3, N, N}, 12);
  Tensor shifted(y.shape());
  for (std::size_t c = 0; c < 3; ++c)
    for (std::size_t r = 0; r < N; ++r)
      for (std::size_t x = 0; x < N; ++x) shifted.at(c, r, x) = y.at(c, (r + shift) % N, (x + shift) % N);
  const DNet::Output a = net.forward(y), b = net.forward(shifted);
  for (std::size_t c = 0; c < 3; ++c)
    for (std::size_t r = 36; r < 52; ++r)
      for (std::size_t x = 36; x < 52; ++x)
        ASSERT_NEAR(b.mu.at(c, r, x), a.mu.at(c, r + shift, x + shift), 1e-5f);
}
