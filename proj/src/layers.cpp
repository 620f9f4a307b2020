#include "vdn/layers.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cstring>

#include "vdn/error.hpp"

namespace vdn {

std::size_t ParamStore::add(std::string name, std::vector<std::uint32_t> dims) {
  std::size_t n = 1;
  for (auto d : dims) n *= d;
  tensors_.push_back({std::move(name), std::move(dims), FloatBuffer(n, 0.0f), FloatBuffer(n, 0.0f)});
  return tensors_.size() - 1;
}

std::size_t ParamStore::parameter_count() const {
  std::size_t n = 0;
  for (const auto& t : tensors_) n += t.size();
  return n;
}

void ParamStore::zero_grad() {
  for (auto& t : tensors_) std::fill(t.grad.begin(), t.grad.end(), 0.0f);
}

std::uint64_t ParamStore::checksum() const {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const auto& t : tensors_) {
    const auto* bytes = reinterpret_cast<const unsigned char*>(t.value.data());
    for (std::size_t i = 0; i < t.value.size() * sizeof(float); ++i) {
      h ^= bytes[i];
      h *= 0x100000001b3ULL;
    }
  }
  return h;
}

namespace nn {
namespace {

using MatR = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapR = Eigen::Map<MatR>;
using CMapR = Eigen::Map<const MatR>;

void require_channels(const Tensor& t, int expected, const char* what) {
  if (static_cast<int>(t.channels()) != expected)
    throw ShapeError(std::string(what) + ": expected " + std::to_string(expected) + " input channels, got " +
                     std::to_string(t.channels()));
}

// Column buffer of shape (in*k*k) x (H*W) for a "same" k x k convolution.
void im2col(const Tensor& in, int k, FloatBuffer& col) {
  const std::size_t C = in.channels(), H = in.height(), W = in.width(), HW = H * W;
  const int pad = k / 2;
  col.assign(C * static_cast<std::size_t>(k * k) * HW, 0.0f);
  for (std::size_t c = 0; c < C; ++c) {
    const float* src = in.channel(c);
    for (int ky = 0; ky < k; ++ky)
      for (int kx = 0; kx < k; ++kx) {
        float* dst = col.data() + ((c * k + ky) * k + kx) * HW;
        const int dy = ky - pad, dx = kx - pad;
        const std::ptrdiff_t x_lo = std::max(0, -dx);
        const std::ptrdiff_t x_hi = std::min<std::ptrdiff_t>(static_cast<std::ptrdiff_t>(W), static_cast<std::ptrdiff_t>(W) - dx);
        if (x_hi <= x_lo) continue;
        for (std::size_t y = 0; y < H; ++y) {
          const std::ptrdiff_t sy = static_cast<std::ptrdiff_t>(y) + dy;
          if (sy < 0 || sy >= static_cast<std::ptrdiff_t>(H)) continue;
          std::memcpy(dst + y * W + x_lo, src + sy * static_cast<std::ptrdiff_t>(W) + x_lo + dx,
                      static_cast<std::size_t>(x_hi - x_lo) * sizeof(float));
        }
      }
  }
}

void col2im(const FloatBuffer& col, int k, Tensor& out) {
  const std::size_t C = out.channels(), H = out.height(), W = out.width(), HW = H * W;
  const int pad = k / 2;
  std::fill(out.storage().begin(), out.storage().end(), 0.0f);
  for (std::size_t c = 0; c < C; ++c) {
    float* dst = out.channel(c);
    for (int ky = 0; ky < k; ++ky)
      for (int kx = 0; kx < k; ++kx) {
        const float* src = col.data() + ((c * k + ky) * k + kx) * HW;
        const int dy = ky - pad, dx = kx - pad;
        const std::ptrdiff_t x_lo = std::max(0, -dx);
        const std::ptrdiff_t x_hi = std::min<std::ptrdiff_t>(static_cast<std::ptrdiff_t>(W), static_cast<std::ptrdiff_t>(W) - dx);
        if (x_hi <= x_lo) continue;
        for (std::size_t y = 0; y < H; ++y) {
          const std::ptrdiff_t sy = static_cast<std::ptrdiff_t>(y) + dy;
          if (sy < 0 || sy >= static_cast<std::ptrdiff_t>(H)) continue;
          float* d = dst + sy * static_cast<std::ptrdiff_t>(W) + dx;
          const float* s = src + y * W;
          for (std::ptrdiff_t x = x_lo; x < x_hi; ++x) d[x] += s[x];
        }
      }
  }
}

}  // namespace

Conv2d make_conv(ParamStore& ps, const std::string& name, int in, int out, int k) {
  if (in < 1 || out < 1 || k < 1 || k % 2 == 0) throw DomainError("invalid conv geometry for " + name);
  Conv2d c;
  c.in = in;
  c.out = out;
  c.k = k;
  c.weight = ps.add(name + ".weight", {static_cast<std::uint32_t>(out), static_cast<std::uint32_t>(in),
                                       static_cast<std::uint32_t>(k), static_cast<std::uint32_t>(k)});
  c.bias = ps.add(name + ".bias", {static_cast<std::uint32_t>(out)});
  return c;
}

ConvTranspose2x2 make_conv_transpose(ParamStore& ps, const std::string& name, int in, int out) {
  if (in < 1 || out < 1) throw DomainError("invalid transposed conv geometry for " + name);
  ConvTranspose2x2 c;
  c.in = in;
  c.out = out;
  c.weight = ps.add(name + ".weight", {static_cast<std::uint32_t>(in), static_cast<std::uint32_t>(out), 2, 2});
  c.bias = ps.add(name + ".bias", {static_cast<std::uint32_t>(out)});
  return c;
}

void he_init(ParamStore& ps, const Conv2d& layer, Rng& rng) {
  const double fan_in = static_cast<double>(layer.in) * layer.k * layer.k;
  std::normal_distribution<double> normal(0.0, std::sqrt(2.0 / fan_in));
  for (float& w : ps[layer.weight].value) w = static_cast<float>(normal(rng));
  std::fill(ps[layer.bias].value.begin(), ps[layer.bias].value.end(), 0.0f);
}

void he_init(ParamStore& ps, const ConvTranspose2x2& layer, Rng& rng) {
  // Each output pixel receives exactly one tap from each input channel.
  const double fan_in = static_cast<double>(layer.in);
  std::normal_distribution<double> normal(0.0, std::sqrt(2.0 / fan_in));
  for (float& w : ps[layer.weight].value) w = static_cast<float>(normal(rng));
  std::fill(ps[layer.bias].value.begin(), ps[layer.bias].value.end(), 0.0f);
}

Tensor conv_forward(const ParamStore& ps, const Conv2d& layer, const Tensor& in) {
  require_channels(in, layer.in, "conv");
  const std::size_t HW = in.height() * in.width();
  const std::size_t K = static_cast<std::size_t>(layer.in) * layer.k * layer.k;
  FloatBuffer col;
  im2col(in, layer.k, col);
  Tensor out(Shape{static_cast<std::size_t>(layer.out), in.height(), in.width()});
  CMapR w(ps[layer.weight].value.data(), layer.out, static_cast<Eigen::Index>(K));
  CMapR c(col.data(), static_cast<Eigen::Index>(K), static_cast<Eigen::Index>(HW));
  MapR o(out.data(), layer.out, static_cast<Eigen::Index>(HW));
  o.noalias() = w * c;
  const auto& b = ps[layer.bias].value;
  for (int co = 0; co < layer.out; ++co) o.row(co).array() += b[static_cast<std::size_t>(co)];
  return out;
}

Tensor conv_backward(ParamStore& ps, const Conv2d& layer, const Tensor& in, const Tensor& d_out,
                     bool need_input_grad) {
  require_channels(in, layer.in, "conv backward");
  const std::size_t HW = in.height() * in.width();
  const std::size_t K = static_cast<std::size_t>(layer.in) * layer.k * layer.k;
  FloatBuffer col;
  im2col(in, layer.k, col);
  CMapR c(col.data(), static_cast<Eigen::Index>(K), static_cast<Eigen::Index>(HW));
  CMapR g(d_out.data(), layer.out, static_cast<Eigen::Index>(HW));
  MapR dw(ps[layer.weight].grad.data(), layer.out, static_cast<Eigen::Index>(K));
  dw.noalias() += g * c.transpose();
  auto& db = ps[layer.bias].grad;
  for (int co = 0; co < layer.out; ++co) db[static_cast<std::size_t>(co)] += g.row(co).sum();
  if (!need_input_grad) return {};
  CMapR w(ps[layer.weight].value.data(), layer.out, static_cast<Eigen::Index>(K));
  MapR dc(col.data(), static_cast<Eigen::Index>(K), static_cast<Eigen::Index>(HW));
  dc.noalias() = w.transpose() * g;
  Tensor d_in(in.shape());
  col2im(col, layer.k, d_in);
  return d_in;
}

Tensor conv_transpose_forward(const ParamStore& ps, const ConvTranspose2x2& layer, const Tensor& in) {
  require_channels(in, layer.in, "conv transpose");
  const std::size_t H = in.height(), W = in.width(), HW = H * W;
  const auto rows = static_cast<Eigen::Index>(layer.out) * 4;
  CMapR a(ps[layer.weight].value.data(), layer.in, rows);
  CMapR x(in.data(), layer.in, static_cast<Eigen::Index>(HW));
  const MatR r = a.transpose() * x;  // (out*4) x HW
  Tensor out(Shape{static_cast<std::size_t>(layer.out), 2 * H, 2 * W});
  const auto& b = ps[layer.bias].value;
  for (int co = 0; co < layer.out; ++co)
    for (int dy = 0; dy < 2; ++dy)
      for (int dx = 0; dx < 2; ++dx) {
        const float* src = r.data() + (static_cast<std::size_t>(co) * 4 + dy * 2 + dx) * HW;
        for (std::size_t y = 0; y < H; ++y)
          for (std::size_t xx = 0; xx < W; ++xx)
            out.at(static_cast<std::size_t>(co), 2 * y + dy, 2 * xx + dx) =
                src[y * W + xx] + b[static_cast<std::size_t>(co)];
      }
  return out;
}

Tensor conv_transpose_backward(ParamStore& ps, const ConvTranspose2x2& layer, const Tensor& in,
                               const Tensor& d_out) {
  const std::size_t H = in.height(), W = in.width(), HW = H * W;
  const auto rows = static_cast<Eigen::Index>(layer.out) * 4;
  MatR dr(rows, static_cast<Eigen::Index>(HW));
  auto& db = ps[layer.bias].grad;
  for (int co = 0; co < layer.out; ++co) {
    double bsum = 0.0;
    for (int dy = 0; dy < 2; ++dy)
      for (int dx = 0; dx < 2; ++dx) {
        float* dst = dr.data() + (static_cast<std::size_t>(co) * 4 + dy * 2 + dx) * HW;
        for (std::size_t y = 0; y < H; ++y)
          for (std::size_t xx = 0; xx < W; ++xx) {
            const float g = d_out.at(static_cast<std::size_t>(co), 2 * y + dy, 2 * xx + dx);
            dst[y * W + xx] = g;
            bsum += g;
          }
      }
    db[static_cast<std::size_t>(co)] += static_cast<float>(bsum);
  }
  CMapR x(in.data(), layer.in, static_cast<Eigen::Index>(HW));
  MapR da(ps[layer.weight].grad.data(), layer.in, rows);
  da.noalias() += x * dr.transpose();
  CMapR a(ps[layer.weight].value.data(), layer.in, rows);
  Tensor d_in(in.shape());
  MapR dx(d_in.data(), layer.in, static_cast<Eigen::Index>(HW));
  dx.noalias() = a * dr;
  return d_in;
}

void relu_inplace(Tensor& t) {
  for (float& v : t.storage()) v = v > 0.0f ? v : 0.0f;
}

void relu_backward(const Tensor& out, Tensor& d_out) {
  for (std::size_t i = 0; i < out.size(); ++i)
    if (!(out[i] > 0.0f)) d_out[i] = 0.0f;
}

Tensor avg_pool2(const Tensor& in) {
  if (in.height() % 2 || in.width() % 2) throw ShapeError("avg_pool2 needs even spatial dims, got " + in.shape().str());
  const std::size_t H = in.height() / 2, W = in.width() / 2;
  Tensor out(Shape{in.channels(), H, W});
  for (std::size_t c = 0; c < in.channels(); ++c)
    for (std::size_t y = 0; y < H; ++y)
      for (std::size_t x = 0; x < W; ++x)
        out.at(c, y, x) = 0.25f * (in.at(c, 2 * y, 2 * x) + in.at(c, 2 * y, 2 * x + 1) +
                                   in.at(c, 2 * y + 1, 2 * x) + in.at(c, 2 * y + 1, 2 * x + 1));
  return out;
}

Tensor avg_pool2_backward(const Tensor& d_out) {
  Tensor d_in(Shape{d_out.channels(), 2 * d_out.height(), 2 * d_out.width()});
  for (std::size_t c = 0; c < d_out.channels(); ++c)
    for (std::size_t y = 0; y < d_in.height(); ++y)
      for (std::size_t x = 0; x < d_in.width(); ++x) d_in.at(c, y, x) = 0.25f * d_out.at(c, y / 2, x / 2);
  return d_in;
}

Tensor concat_channels(const Tensor& a, const Tensor& b) {
  if (a.height() != b.height() || a.width() != b.width())
    throw ShapeError("concat: spatial mismatch " + a.shape().str() + " vs " + b.shape().str());
  Tensor out(Shape{a.channels() + b.channels(), a.height(), a.width()});
  std::copy(a.storage().begin(), a.storage().end(), out.data());
  std::copy(b.storage().begin(), b.storage().end(), out.data() + a.size());
  return out;
}

std::pair<Tensor, Tensor> split_channels(const Tensor& t, std::size_t first) {
  if (first == 0 || first >= t.channels()) throw ShapeError("split_channels: bad split point");
  const std::size_t plane = t.height() * t.width();
  Tensor a(Shape{first, t.height(), t.width()});
  Tensor b(Shape{t.channels() - first, t.height(), t.width()});
  std::copy(t.data(), t.data() + first * plane, a.data());
  std::copy(t.data() + first * plane, t.data() + t.size(), b.data());
  return {std::move(a), std::move(b)};
}

}  // namespace nn
}  // namespace vdn
