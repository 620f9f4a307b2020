#include "vdn/networks.hpp"

#include <algorithm>

#include "vdn/error.hpp"
#include "vdn/rng.hpp"

namespace vdn {

void DNetConfig::validate() const {
  if (depth < 1 || depth > 12) throw ConfigError("D-Net depth must be in [1,12]");
  if (base_channels < 1) throw ConfigError("D-Net base_channels must be >= 1");
  if (in_channels < 1) throw ConfigError("D-Net in_channels must be >= 1");
  if (!(m_sq_init > 0.0)) throw ConfigError("D-Net m_sq_init must be > 0");
}

void SNetConfig::validate() const {
  if (layers < 2) throw ConfigError("S-Net needs at least 2 layers");
  if (channels < 1) throw ConfigError("S-Net channels must be >= 1");
  if (in_channels < 1) throw ConfigError("S-Net in_channels must be >= 1");
  if (!(alpha_init > 0.0) || !(beta_init > 0.0)) throw ConfigError("S-Net head targets must be > 0");
}

DNetConfig desk_dnet_config() {
  DNetConfig c;
  c.depth = 3;
  c.base_channels = 16;
  return c;
}

SNetConfig desk_snet_config() {
  SNetConfig c;
  c.layers = 4;
  c.channels = 24;
  return c;
}

// ---------------------------------------------------------------------------
// D-Net

DNet::DNet(DNetConfig config) : config_(config) {
  config_.validate();
  int in = config_.in_channels;
  for (int l = 0; l < config_.depth; ++l) {
    const int ch = config_.base_channels << l;
    const std::string p = "enc" + std::to_string(l);
    Level level{nn::make_conv(params_, p + ".conv1", in, ch), nn::make_conv(params_, p + ".conv2", ch, ch)};
    enc_.push_back(level);
    in = ch;
  }
  dec_.resize(static_cast<std::size_t>(config_.depth - 1));
  for (int l = config_.depth - 2; l >= 0; --l) {
    const int ch = config_.base_channels << l;
    const std::string p = "dec" + std::to_string(l);
    auto& d = dec_[static_cast<std::size_t>(l)];
    d.up = nn::make_conv_transpose(params_, p + ".up", ch * 2, ch);
    d.conv1 = nn::make_conv(params_, p + ".conv1", ch * 2, ch);
    d.conv2 = nn::make_conv(params_, p + ".conv2", ch, ch);
  }
  head_ = nn::make_conv(params_, "head", config_.base_channels, 2 * config_.in_channels);
}

void DNet::init(std::uint64_t seed) {
  Rng rng(derive_seed(seed, "dnet-init"));
  for (auto& l : enc_) {
    nn::he_init(params_, l.conv1, rng);
    nn::he_init(params_, l.conv2, rng);
  }
  for (int l = config_.depth - 2; l >= 0; --l) {
    auto& d = dec_[static_cast<std::size_t>(l)];
    nn::he_init(params_, d.up, rng);
    nn::he_init(params_, d.conv1, rng);
    nn::he_init(params_, d.conv2, rng);
  }
  auto& hw = params_[head_.weight].value;
  std::fill(hw.begin(), hw.end(), 0.0f);
  auto& hb = params_[head_.bias].value;
  const auto C = static_cast<std::size_t>(config_.in_channels);
  const auto m_bias = static_cast<float>(nn::softplus_inverse(config_.m_sq_init));
  for (std::size_t c = 0; c < C; ++c) {
    hb[c] = 0.0f;
    hb[C + c] = m_bias;
  }
}

DNet::Output DNet::forward(const Tensor& y, Cache* cache) const {
  if (static_cast<int>(y.channels()) != config_.in_channels)
    throw ShapeError("D-Net expects " + std::to_string(config_.in_channels) + " channels, got " +
                     std::to_string(y.channels()));
  const std::size_t div = config_.divisor();
  if (y.height() % div || y.width() % div)
    throw ShapeError("D-Net input " + y.shape().str() + " not divisible by " + std::to_string(div) +
                     "; pad first or use infer()");

  const auto D = static_cast<std::size_t>(config_.depth);
  Cache local;
  Cache& c = cache ? *cache : local;
  c.input = y;
  c.enc_in.assign(D, {});
  c.enc_a.assign(D, {});
  c.enc_b.assign(D, {});
  c.up_in.assign(D, {});
  c.cat.assign(D, {});
  c.dec_a.assign(D, {});
  c.dec_b.assign(D, {});

  Tensor x = y;
  for (std::size_t l = 0; l < D; ++l) {
    if (l > 0) x = nn::avg_pool2(x);
    c.enc_in[l] = x;
    Tensor a = nn::conv_forward(params_, enc_[l].conv1, x);
    nn::relu_inplace(a);
    Tensor b = nn::conv_forward(params_, enc_[l].conv2, a);
    nn::relu_inplace(b);
    c.enc_a[l] = std::move(a);
    c.enc_b[l] = b;
    x = std::move(b);
  }
  for (std::size_t l = D - 1; l-- > 0;) {
    const auto& d = dec_[l];
    c.up_in[l] = x;
    Tensor up = nn::conv_transpose_forward(params_, d.up, x);
    c.cat[l] = nn::concat_channels(up, c.enc_b[l]);
    Tensor a = nn::conv_forward(params_, d.conv1, c.cat[l]);
    nn::relu_inplace(a);
    Tensor b = nn::conv_forward(params_, d.conv2, a);
    nn::relu_inplace(b);
    c.dec_a[l] = std::move(a);
    c.dec_b[l] = b;
    x = std::move(b);
  }
  c.head_in = x;
  Tensor head = nn::conv_forward(params_, head_, x);
  const auto C = static_cast<std::size_t>(config_.in_channels);
  auto [residual, m_raw] = nn::split_channels(head, C);

  Output out{Tensor(y.shape()), Tensor(y.shape())};
  for (std::size_t i = 0; i < y.size(); ++i) {
    out.mu[i] = y[i] + residual[i];
    out.m_sq[i] = nn::softplus(m_raw[i]);
  }
  c.m_raw = std::move(m_raw);
  return out;
}

void DNet::backward(const Cache& c, const Tensor& d_mu, const Tensor& d_m_sq) {
  require_same_shape(d_mu.shape(), c.input.shape(), "D-Net backward d_mu");
  require_same_shape(d_m_sq.shape(), c.input.shape(), "D-Net backward d_m_sq");
  Tensor d_raw(c.m_raw.shape());
  for (std::size_t i = 0; i < d_raw.size(); ++i) d_raw[i] = d_m_sq[i] * nn::sigmoid(c.m_raw[i]);
  Tensor d_head = nn::concat_channels(d_mu, d_raw);
  Tensor g = nn::conv_backward(params_, head_, c.head_in, d_head);

  const auto D = static_cast<std::size_t>(config_.depth);
  std::vector<Tensor> d_skip(D);
  for (std::size_t l = 0; l + 1 < D; ++l) {
    const auto& d = dec_[l];
    nn::relu_backward(c.dec_b[l], g);
    g = nn::conv_backward(params_, d.conv2, c.dec_a[l], g);
    nn::relu_backward(c.dec_a[l], g);
    g = nn::conv_backward(params_, d.conv1, c.cat[l], g);
    auto [d_up, d_sk] = nn::split_channels(g, static_cast<std::size_t>(d.up.out));
    d_skip[l] = std::move(d_sk);
    g = nn::conv_transpose_backward(params_, d.up, c.up_in[l], d_up);
  }
  for (std::size_t l = D; l-- > 0;) {
    if (!d_skip[l].empty())
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += d_skip[l][i];
    nn::relu_backward(c.enc_b[l], g);
    g = nn::conv_backward(params_, enc_[l].conv2, c.enc_a[l], g);
    nn::relu_backward(c.enc_a[l], g);
    const bool need_input = l > 0;
    g = nn::conv_backward(params_, enc_[l].conv1, c.enc_in[l], g, need_input);
    if (need_input) g = nn::avg_pool2_backward(g);
  }
}

DNet::Output DNet::infer(const Tensor& y) const {
  const Tensor padded = pad_to_multiple(y, config_.divisor());
  Output full = forward(padded);
  if (padded.shape() == y.shape()) return full;
  return {full.mu.crop(0, 0, y.height(), y.width()), full.m_sq.crop(0, 0, y.height(), y.width())};
}

// ---------------------------------------------------------------------------
// S-Net

SNet::SNet(SNetConfig config) : config_(config) {
  config_.validate();
  int in = config_.in_channels;
  for (int l = 0; l + 1 < config_.layers; ++l) {
    convs_.push_back(nn::make_conv(params_, "conv" + std::to_string(l), in, config_.channels));
    in = config_.channels;
  }
  convs_.push_back(nn::make_conv(params_, "head", in, 2 * config_.in_channels));
}

void SNet::init(std::uint64_t seed) {
  Rng rng(derive_seed(seed, "snet-init"));
  for (auto& c : convs_) nn::he_init(params_, c, rng);
  const auto& head = convs_.back();
  auto& hw = params_[head.weight].value;
  std::fill(hw.begin(), hw.end(), 0.0f);
  auto& hb = params_[head.bias].value;
  const auto C = static_cast<std::size_t>(config_.in_channels);
  for (std::size_t c = 0; c < C; ++c) {
    hb[c] = static_cast<float>(nn::softplus_inverse(config_.alpha_init));
    hb[C + c] = static_cast<float>(nn::softplus_inverse(config_.beta_init));
  }
}

SNet::Output SNet::forward(const Tensor& y, Cache* cache) const {
  if (static_cast<int>(y.channels()) != config_.in_channels)
    throw ShapeError("S-Net expects " + std::to_string(config_.in_channels) + " channels, got " +
                     std::to_string(y.channels()));
  Cache local;
  Cache& c = cache ? *cache : local;
  c.inputs.clear();
  Tensor x = y;
  for (std::size_t l = 0; l < convs_.size(); ++l) {
    c.inputs.push_back(x);
    x = nn::conv_forward(params_, convs_[l], x);
    if (l + 1 < convs_.size()) nn::relu_inplace(x);
  }
  const auto C = static_cast<std::size_t>(config_.in_channels);
  auto [a_raw, b_raw] = nn::split_channels(x, C);
  Output out{Tensor(y.shape()), Tensor(y.shape())};
  for (std::size_t i = 0; i < y.size(); ++i) {
    out.alpha[i] = nn::softplus(a_raw[i]);
    out.beta[i] = nn::softplus(b_raw[i]);
  }
  c.raw = std::move(x);
  return out;
}

void SNet::backward(const Cache& c, const Tensor& d_alpha, const Tensor& d_beta) {
  const auto C = static_cast<std::size_t>(config_.in_channels);
  const std::size_t plane = c.raw.height() * c.raw.width();
  Tensor g(c.raw.shape());
  for (std::size_t i = 0; i < C * plane; ++i) {
    g[i] = d_alpha[i] * nn::sigmoid(c.raw[i]);
    g[C * plane + i] = d_beta[i] * nn::sigmoid(c.raw[C * plane + i]);
  }
  for (std::size_t l = convs_.size(); l-- > 0;) {
    if (l + 1 < convs_.size()) nn::relu_backward(c.inputs[l + 1], g);
    g = nn::conv_backward(params_, convs_[l], c.inputs[l], g, l > 0);
  }
}

std::size_t count_params(const DNetConfig& config) { return DNet(config).parameter_count(); }
std::size_t count_params(const SNetConfig& config) { return SNet(config).parameter_count(); }

}  // namespace vdn
