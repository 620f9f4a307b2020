#pragma once

// Reference computations shared by the unit tests and the acceptance binary.
// Nothing here calls the closed forms under test.

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <random>
#include <vector>

namespace oracle {

inline constexpr double kPi = 3.14159265358979323846;

inline double log_normal(double v, double mean, double var) {
  const double d = v - mean;
  return -0.5 * std::log(2.0 * kPi * var) - d * d / (2.0 * var);
}

inline double log_inv_gamma(double s, double a, double b) {
  return a * std::log(b) - std::lgamma(a) - (a + 1.0) * std::log(s) - b / s;
}

// KL(N(mu, m2) || N(x, eps)) by adaptive Gauss-Kronrod over the real line,
// in the standardised variable of q.
inline double kl_normal_quadrature(double mu, double m2, double x, double eps) {
  const double sd = std::sqrt(m2);
  auto f = [&](double u) {
    const double z = mu + sd * u;
    const double w = std::exp(-0.5 * u * u) / std::sqrt(2.0 * kPi);
    if (w == 0.0) return 0.0;
    return w * (log_normal(z, mu, m2) - log_normal(z, x, eps));
  };
  double err = 0.0;
  return boost::math::quadrature::gauss_kronrod<double, 61>::integrate(
      f, -std::numeric_limits<double>::infinity(), std::numeric_limits<double>::infinity(), 20, 1e-13,
      &err);
}

// KL(IG(a, b) || IG(a0, b0)) integrated in t = log s, centred on the mode of
// q's log-density and scaled by its width.
inline double kl_inv_gamma_quadrature(double a, double b, double a0, double b0) {
  const double t_star = std::log(b / a);
  const double width = 1.0 / std::sqrt(a);
  auto f = [&](double u) {
    const double t = t_star + width * u;
    const double log_qt = a * std::log(b) - std::lgamma(a) - a * t - b * std::exp(-t);
    const double w = std::exp(log_qt) * width;
    if (w == 0.0 || !std::isfinite(w)) return 0.0;
    const double s = std::exp(t);
    return w * (log_inv_gamma(s, a, b) - log_inv_gamma(s, a0, b0));
  };
  double err = 0.0;
  return boost::math::quadrature::gauss_kronrod<double, 61>::integrate(
      f, -std::numeric_limits<double>::infinity(), std::numeric_limits<double>::infinity(), 20, 1e-13,
      &err);
}

struct Mc {
  double mean = 0.0;
  double stderr_ = 0.0;
};

// Plain Monte-Carlo mean and standard error of a scalar sampler, two-pass.
inline Mc monte_carlo(std::size_t n, const std::function<double()>& draw) {
  std::vector<double> v(n);
  for (double& s : v) s = draw();
  double mean = 0.0;
  for (double s : v) mean += s;
  mean /= static_cast<double>(n);
  double ss = 0.0;
  for (double s : v) ss += (s - mean) * (s - mean);
  return {mean, std::sqrt(ss / static_cast<double>(n - 1) / static_cast<double>(n))};
}

// One pixel of posterior, prior and data.
struct Pixel {
  double y, x, mu, m2, alpha, beta, xi;
};

// E_q[log p(y,z,s) - log q(z,s)] over a set of pixels sharing (eps, p).
inline Mc mc_lower_bound(const std::vector<Pixel>& px, double eps, int p, std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  const double a0 = p * p / 2.0 - 1.0;
  std::vector<std::gamma_distribution<double>> gam;
  for (const Pixel& q : px) gam.emplace_back(q.alpha, 1.0);
  return monte_carlo(n, [&] {
    double total = 0.0;
    for (std::size_t i = 0; i < px.size(); ++i) {
      const Pixel& q = px[i];
      const double z = q.mu + std::sqrt(q.m2) * normal(rng);
      const double s = q.beta / gam[i](rng);  // 1/s ~ Gamma(alpha, 1/beta)
      const double b0 = p * p * q.xi / 2.0;
      total += log_normal(q.y, z, s) + log_normal(z, q.x, eps) + log_inv_gamma(s, a0, b0) -
               log_normal(z, q.mu, q.m2) - log_inv_gamma(s, q.alpha, q.beta);
    }
    return total;
  });
}

// Central difference with a step relative to the magnitude of the argument.
inline double central_difference(const std::function<double(double)>& f, double at, double rel_step = 1e-5) {
  const double h = rel_step * std::max(std::abs(at), 1e-300);
  const double hi = at + h, lo = at - h;
  return (f(hi) - f(lo)) / (hi - lo);
}

// |a - b| / max(|a|, |b|, 1).
inline double rel_error(double a, double b) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1.0});
}

// Pearson correlation, straight from the definition.
inline double pearson(const std::vector<double>& a, const std::vector<double>& b) {
  const double n = static_cast<double>(a.size());
  double ma = 0.0, mb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ma += a[i];
    mb += b[i];
  }
  ma /= n;
  mb /= n;
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    sab += (a[i] - ma) * (b[i] - mb);
    saa += (a[i] - ma) * (a[i] - ma);
    sbb += (b[i] - mb) * (b[i] - mb);
  }
  return sab / std::sqrt(saa * sbb);
}

}  // namespace oracle
