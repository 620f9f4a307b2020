#include "vdn/objective.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "vdn/error.hpp"
#include "vdn/rng.hpp"
#include "vdn/special.hpp"

namespace vdn {
namespace {

constexpr double kHalfLog2Pi = 0.91893853320467274178;  // 0.5 * log(2 pi)

void require_positive_field(const Field& f, const char* what) {
  for (double v : f.data)
    if (!(v > 0.0)) throw DomainError(std::string(what) + " must be strictly positive");
}

}  // namespace

void VariationalPosterior::validate() const {
  require_same_shape(mu.shape, m_sq.shape, "posterior m_sq");
  require_same_shape(mu.shape, alpha.shape, "posterior alpha");
  require_same_shape(mu.shape, beta.shape, "posterior beta");
  require_positive_field(m_sq, "m_sq");
  require_positive_field(alpha, "alpha");
  require_positive_field(beta, "beta");
}

VariationalPosterior VariationalPosterior::floored() const {
  VariationalPosterior q = *this;
  for (double& v : q.alpha.data) v = std::max(v, kAlphaFloor);
  for (double& v : q.beta.data) v = std::max(v, kPositiveFloor);
  for (double& v : q.m_sq.data) v = std::max(v, kPositiveFloor);
  return q;
}

LossBreakdown& LossBreakdown::operator+=(const LossBreakdown& o) {
  neg_likelihood_term += o.neg_likelihood_term;
  kl_z += o.kl_z;
  kl_sigma += o.kl_sigma;
  total += o.total;
  return *this;
}

LossBreakdown LossBreakdown::scaled(double s) const {
  return {neg_likelihood_term * s, kl_z * s, kl_sigma * s, total * s};
}

double likelihood_term(const VariationalPosterior& q, const Field& y) {
  q.validate();
  require_same_shape(q.shape(), y.shape, "likelihood_term");
  double sum = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    const double a = q.alpha[i], b = q.beta[i], r = y[i] - q.mu[i];
    sum += -kHalfLog2Pi - 0.5 * (std::log(b) - digamma(a)) - a / (2.0 * b) * (r * r + q.m_sq[i]);
  }
  return sum;
}

double kl_gaussian(const VariationalPosterior& q, const Field& x, double epsilon0_sq) {
  if (!(epsilon0_sq > 0.0)) throw DomainError("epsilon0_sq must be > 0");
  require_same_shape(q.shape(), x.shape, "kl_gaussian");
  require_positive_field(q.m_sq, "m_sq");
  double sum = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double d = q.mu[i] - x[i];
    const double ratio = q.m_sq[i] / epsilon0_sq;
    sum += d * d / (2.0 * epsilon0_sq) + 0.5 * (ratio - std::log(ratio) - 1.0);
  }
  return sum;
}

double kl_inverse_gamma(const VariationalPosterior& q, const SigmaPrior& prior) {
  require_same_shape(q.shape(), prior.beta0.shape, "kl_inverse_gamma");
  require_positive_field(q.alpha, "alpha");
  require_positive_field(q.beta, "beta");
  require_positive_field(prior.beta0, "beta0");
  const double a0 = prior.alpha0;
  if (!(a0 > 0.0)) throw DomainError("alpha0 must be > 0");
  const double lg_a0 = log_gamma(a0);
  double sum = 0.0;
  for (std::size_t i = 0; i < q.alpha.size(); ++i) {
    const double a = q.alpha[i], b = q.beta[i], b0 = prior.beta0[i];
    sum += (a - a0) * digamma(a) + (lg_a0 - log_gamma(a)) + a0 * (std::log(b) - std::log(b0)) +
           a * (b0 / b - 1.0);
  }
  return sum;
}

LossBreakdown negative_elbo(const VariationalPosterior& q_in, const Field& y, const Field& x,
                            const PriorSpec& prior, PosteriorGrad* grad) {
  require_same_shape(q_in.mu.shape, q_in.m_sq.shape, "posterior m_sq");
  require_same_shape(q_in.mu.shape, q_in.alpha.shape, "posterior alpha");
  require_same_shape(q_in.mu.shape, q_in.beta.shape, "posterior beta");
  require_same_shape(q_in.shape(), y.shape, "negative_elbo y");
  require_same_shape(q_in.shape(), x.shape, "negative_elbo x");
  require_same_shape(q_in.shape(), prior.xi.shape, "negative_elbo xi");
  if (!(prior.epsilon0_sq > 0.0)) throw DomainError("epsilon0_sq must be > 0");
  validate_window(prior.p);

  const double eps = prior.epsilon0_sq;
  const double p2 = static_cast<double>(prior.p) * prior.p;
  const double a0 = 0.5 * p2 - 1.0;
  const double lg_a0 = log_gamma(a0);
  const std::size_t n = y.size();
  if (grad) *grad = PosteriorGrad(q_in.shape());

  double neg_lik = 0.0, kl_z = 0.0, kl_s = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double a_raw = q_in.alpha[i], b_raw = q_in.beta[i], m_raw = q_in.m_sq[i];
    const double a = std::max(a_raw, kAlphaFloor);
    const double b = std::max(b_raw, kPositiveFloor);
    const double m2 = std::max(m_raw, kPositiveFloor);
    const double mu = q_in.mu[i];
    const double b0 = 0.5 * p2 * prior.xi[i];
    if (!(b0 > 0.0)) throw DomainError("xi must be strictly positive");
    const double psi = digamma(a);
    const double r = y[i] - mu;
    const double e2 = r * r + m2;
    const double d = mu - x[i];

    neg_lik += kHalfLog2Pi + 0.5 * (std::log(b) - psi) + a / (2.0 * b) * e2;
    const double ratio = m2 / eps;
    kl_z += d * d / (2.0 * eps) + 0.5 * (ratio - std::log(ratio) - 1.0);
    kl_s += (a - a0) * psi + (lg_a0 - log_gamma(a)) + a0 * (std::log(b) - std::log(b0)) + a * (b0 / b - 1.0);

    if (grad) {
      const double psi1 = trigamma(a);
      grad->mu[i] = -(a / b) * r + d / eps;
      grad->m_sq[i] = m_raw >= kPositiveFloor ? a / (2.0 * b) + 0.5 * (1.0 / eps - 1.0 / m2) : 0.0;
      grad->alpha[i] = a_raw >= kAlphaFloor
                           ? (-0.5 * psi1 + e2 / (2.0 * b)) + ((a - a0) * psi1 + b0 / b - 1.0)
                           : 0.0;
      grad->beta[i] = b_raw >= kPositiveFloor
                          ? (1.0 / (2.0 * b) - a * e2 / (2.0 * b * b)) + (a0 / b - a * b0 / (b * b))
                          : 0.0;
    }
  }
  LossBreakdown out;
  out.neg_likelihood_term = neg_lik;
  out.kl_z = kl_z;
  out.kl_sigma = kl_s;
  out.total = out.neg_likelihood_term + out.kl_z + out.kl_sigma;
  return out;
}

double mse_loss(const Field& mu, const Field& x, Field* grad_mu) {
  require_same_shape(mu.shape, x.shape, "mse_loss");
  if (grad_mu) *grad_mu = Field(mu.shape);
  double sum = 0.0;
  for (std::size_t i = 0; i < mu.size(); ++i) {
    const double d = mu[i] - x[i];
    sum += d * d;
    if (grad_mu) (*grad_mu)[i] = 2.0 * d;
  }
  return sum;
}

double optimal_mu(double y, double x, double alpha, double beta, double epsilon0_sq) {
  const double noise_precision = alpha / beta;
  const double prior_precision = 1.0 / epsilon0_sq;
  return (y * noise_precision + x * prior_precision) / (noise_precision + prior_precision);
}

double log_normal_pdf(double v, double mean, double var) {
  const double d = v - mean;
  return -kHalfLog2Pi - 0.5 * std::log(var) - d * d / (2.0 * var);
}

double log_inverse_gamma_pdf(double s, double alpha, double beta) {
  return alpha * std::log(beta) - std::lgamma(alpha) - (alpha + 1.0) * std::log(s) - beta / s;
}

namespace {

McEstimate summarize(double sum, double sum_sq, std::size_t n) {
  McEstimate e;
  e.samples = n;
  e.mean = sum / static_cast<double>(n);
  const double var = (sum_sq - static_cast<double>(n) * e.mean * e.mean) / static_cast<double>(n - 1);
  e.std_error = std::sqrt(std::max(var, 0.0) / static_cast<double>(n));
  return e;
}

// Draws are shifted by a pilot draw so the one-pass variance stays well
// conditioned when the mean is large.
template <class Draw>
McEstimate run_mc(std::size_t samples, Draw&& draw) {
  if (samples < 2) throw DomainError("Monte-Carlo estimate needs at least 2 samples");
  const double pilot = draw();
  double sum = 0.0, sum_sq = 0.0;
  for (std::size_t s = 0; s < samples; ++s) {
    const double v = draw() - pilot;
    sum += v;
    sum_sq += v * v;
  }
  McEstimate e = summarize(sum, sum_sq, samples);
  e.mean += pilot;
  return e;
}

}  // namespace

McEstimate mc_likelihood_term(const VariationalPosterior& q, const Field& y, std::size_t samples,
                              std::uint64_t seed) {
  q.validate();
  require_same_shape(q.shape(), y.shape, "mc_likelihood_term");
  Rng rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<std::gamma_distribution<double>> gammas;
  for (std::size_t i = 0; i < y.size(); ++i) gammas.emplace_back(q.alpha[i], 1.0 / q.beta[i]);
  return run_mc(samples, [&] {
    double total = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) {
      const double z = q.mu[i] + std::sqrt(q.m_sq[i]) * normal(rng);
      const double s = 1.0 / gammas[i](rng);
      total += log_normal_pdf(y[i], z, s);
    }
    return total;
  });
}

McEstimate mc_lower_bound(const VariationalPosterior& q, const Field& y, const Field& x,
                          const PriorSpec& prior, std::size_t samples, std::uint64_t seed) {
  q.validate();
  require_same_shape(q.shape(), y.shape, "mc_lower_bound y");
  require_same_shape(q.shape(), x.shape, "mc_lower_bound x");
  require_same_shape(q.shape(), prior.xi.shape, "mc_lower_bound xi");
  const double p2 = static_cast<double>(prior.p) * prior.p;
  const double a0 = p2 / 2.0 - 1.0;
  Rng rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<std::gamma_distribution<double>> gammas;
  for (std::size_t i = 0; i < y.size(); ++i) gammas.emplace_back(q.alpha[i], 1.0 / q.beta[i]);
  return run_mc(samples, [&] {
    double total = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) {
      const double z = q.mu[i] + std::sqrt(q.m_sq[i]) * normal(rng);
      const double s = 1.0 / gammas[i](rng);
      const double b0 = p2 * prior.xi[i] / 2.0;
      total += log_normal_pdf(y[i], z, s) + log_normal_pdf(z, x[i], prior.epsilon0_sq) +
               log_inverse_gamma_pdf(s, a0, b0) - log_normal_pdf(z, q.mu[i], q.m_sq[i]) -
               log_inverse_gamma_pdf(s, q.alpha[i], q.beta[i]);
    }
    return total;
  });
}

ElboTrial random_elbo_trial(const Shape& shape, std::uint64_t seed) {
  Rng rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::normal_distribution<double> normal(0.0, 1.0);
  auto log_uniform = [&](double lo, double hi) { return lo * std::pow(hi / lo, u(rng)); };

  static constexpr int kWindows[] = {3, 5, 7};
  ElboTrial t;
  t.prior.p = kWindows[static_cast<int>(u(rng) * 3) % 3];
  t.prior.epsilon0_sq = log_uniform(1e-4, 1e-2);
  t.y = Field(shape);
  t.x = Field(shape);
  t.q = VariationalPosterior(shape);
  t.prior.xi = Field(shape);
  for (std::size_t i = 0; i < shape.size(); ++i) {
    t.x[i] = 0.2 + 0.6 * u(rng);
    t.y[i] = t.x[i] + 0.1 * normal(rng);
    t.q.mu[i] = t.x[i] + 0.05 * normal(rng);
    t.q.m_sq[i] = log_uniform(1e-4, 1e-2);
    t.prior.xi[i] = log_uniform(1e-4, 1e-2);
    t.q.alpha[i] = 2.0 + 38.0 * u(rng);
    t.q.beta[i] = t.q.alpha[i] * t.prior.xi[i] * (0.5 + 1.5 * u(rng));
  }
  return t;
}

std::vector<ElboAuditRow> audit_elbo(std::size_t trials, std::size_t samples, const Shape& shape,
                                     std::uint64_t seed) {
  std::vector<ElboAuditRow> rows;
  for (std::size_t k = 0; k < trials; ++k) {
    const ElboTrial t = random_elbo_trial(shape, derive_seed(seed, "elbo-trial", k));
    const LossBreakdown loss = negative_elbo(t.q, t.y, t.x, t.prior);
    const McEstimate mc = mc_lower_bound(t.q, t.y, t.x, t.prior, samples, derive_seed(seed, "elbo-mc", k));
    ElboAuditRow row;
    row.trial = k;
    row.analytic = -loss.total;
    row.mc_mean = mc.mean;
    row.mc_stderr = mc.std_error;
    row.z_score = (mc.mean - row.analytic) / mc.std_error;
    rows.push_back(row);
  }
  return rows;
}

}  // namespace vdn
