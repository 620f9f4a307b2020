#include "vdn/prior.hpp"

#include <algorithm>
#include <cmath>

#include "vdn/error.hpp"

namespace vdn {

void validate_window(int p) {
  if (p < 3 || p % 2 == 0) throw DomainError("window size p must be odd and >= 3, got " + std::to_string(p));
}

void PriorSpec::validate() const {
  if (!(epsilon0_sq > 0.0)) throw DomainError("epsilon0_sq must be > 0");
  validate_window(p);
  if (!(xi_floor > 0.0)) throw DomainError("xi_floor must be > 0");
  for (double v : xi.data)
    if (!(v >= xi_floor)) throw DomainError("xi entries must be >= xi_floor");
}

namespace {

std::vector<double> gaussian_taps(int p) {
  const double sd = p / 6.0;
  const int r = p / 2;
  std::vector<double> k(static_cast<std::size_t>(p));
  double sum = 0.0;
  for (int i = -r; i <= r; ++i) {
    k[static_cast<std::size_t>(i + r)] = std::exp(-0.5 * (i * i) / (sd * sd));
    sum += k[static_cast<std::size_t>(i + r)];
  }
  for (double& v : k) v /= sum;
  return k;
}

}  // namespace

std::vector<double> gaussian_window(int p) {
  validate_window(p);
  const auto k = gaussian_taps(p);
  std::vector<double> w(k.size() * k.size());
  for (std::size_t i = 0; i < k.size(); ++i)
    for (std::size_t j = 0; j < k.size(); ++j) w[i * k.size() + j] = k[i] * k[j];
  return w;
}

Field filter_variance(const Field& sq, int p, double xi_floor) {
  validate_window(p);
  if (!(xi_floor > 0.0)) throw DomainError("xi_floor must be > 0");
  const auto k = gaussian_taps(p);
  const std::ptrdiff_t r = p / 2;
  const std::size_t C = sq.shape.channels, H = sq.shape.height, W = sq.shape.width;
  const auto h = static_cast<std::ptrdiff_t>(H), w = static_cast<std::ptrdiff_t>(W);

  // Separable pass: rows then columns.
  std::vector<double> tmp(sq.size());
  Field out(sq.shape);
  for (std::size_t c = 0; c < C; ++c) {
    const double* src = sq.data.data() + c * H * W;
    double* mid = tmp.data() + c * H * W;
    for (std::ptrdiff_t y = 0; y < h; ++y)
      for (std::ptrdiff_t x = 0; x < w; ++x) {
        double acc = 0.0;
        for (std::ptrdiff_t d = -r; d <= r; ++d)
          acc += k[static_cast<std::size_t>(d + r)] * src[y * w + reflect_index(x + d, w)];
        mid[y * w + x] = acc;
      }
    double* dst = out.data.data() + c * H * W;
    for (std::ptrdiff_t y = 0; y < h; ++y)
      for (std::ptrdiff_t x = 0; x < w; ++x) {
        double acc = 0.0;
        for (std::ptrdiff_t d = -r; d <= r; ++d)
          acc += k[static_cast<std::size_t>(d + r)] * mid[reflect_index(y + d, h) * w + x];
        dst[y * w + x] = std::max(acc, xi_floor);
      }
  }
  return out;
}

Field compute_xi(const ImageTensor& noisy, const ImageTensor& clean, int p, double xi_floor) {
  require_same_shape(noisy.shape(), clean.shape(), "compute_xi");
  Field sq(noisy.shape());
  for (std::size_t i = 0; i < sq.size(); ++i) {
    const double d = static_cast<double>(noisy[i]) - static_cast<double>(clean[i]);
    sq[i] = d * d;
  }
  return filter_variance(sq, p, xi_floor);
}

SigmaPrior prior_sigma_params(const PriorSpec& spec) {
  validate_window(spec.p);
  SigmaPrior out;
  const double p2 = static_cast<double>(spec.p) * spec.p;
  out.alpha0 = 0.5 * p2 - 1.0;
  out.beta0 = Field(spec.xi.shape);
  for (std::size_t i = 0; i < spec.xi.size(); ++i) out.beta0[i] = 0.5 * p2 * spec.xi[i];
  return out;
}

}  // namespace vdn
