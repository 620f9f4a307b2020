#pragma once

#include <cstdint>
#include <vector>

#include "vdn/prior.hpp"
#include "vdn/tensor.hpp"

namespace vdn {

// Floors applied to the posterior before the objective is evaluated.
inline constexpr double kAlphaFloor = 1e-2;
inline constexpr double kPositiveFloor = 1e-10;  // beta and m^2

// Mean-field posterior, per pixel:
//   q(z_i)       = N(mu_i, m_sq_i)
//   q(sigma_i^2) = IG(alpha_i, beta_i)
struct VariationalPosterior {
  Field mu;
  Field m_sq;
  Field alpha;
  Field beta;

  VariationalPosterior() = default;
  explicit VariationalPosterior(Shape s) : mu(s), m_sq(s), alpha(s), beta(s) {}

  const Shape& shape() const { return mu.shape; }
  // Shapes agree and m_sq, alpha, beta are strictly positive.
  void validate() const;
  // Copy with alpha >= kAlphaFloor and beta, m_sq >= kPositiveFloor.
  VariationalPosterior floored() const;
};

// d(objective)/d(field), same layout as VariationalPosterior.
struct PosteriorGrad {
  Field mu;
  Field m_sq;
  Field alpha;
  Field beta;

  PosteriorGrad() = default;
  explicit PosteriorGrad(Shape s) : mu(s), m_sq(s), alpha(s), beta(s) {}
};

// The three terms of the negative lower bound, summed over pixels.
// total = neg_likelihood_term + kl_z + kl_sigma, added in that order.
struct LossBreakdown {
  double neg_likelihood_term = 0.0;
  double kl_z = 0.0;
  double kl_sigma = 0.0;
  double total = 0.0;

  LossBreakdown& operator+=(const LossBreakdown& o);
  LossBreakdown scaled(double s) const;
};

// E_q[log p(y | z, sigma^2)]
//   = sum_i -1/2 log 2pi - 1/2 (log beta_i - psi(alpha_i))
//           - alpha_i / (2 beta_i) [(y_i - mu_i)^2 + m_sq_i]
double likelihood_term(const VariationalPosterior& q, const Field& y);

// KL(q(z) || N(x, eps0^2))
//   = sum_i (mu_i - x_i)^2 / (2 eps0^2) + 1/2 [m_sq_i/eps0^2 - log(m_sq_i/eps0^2) - 1]
double kl_gaussian(const VariationalPosterior& q, const Field& x, double epsilon0_sq);

// KL(IG(alpha, beta) || IG(alpha0, beta0))
//   = sum_i (alpha_i - alpha0) psi(alpha_i) + log Gamma(alpha0) - log Gamma(alpha_i)
//           + alpha0 (log beta_i - log beta0_i) + alpha_i (beta0_i / beta_i - 1)
double kl_inverse_gamma(const VariationalPosterior& q, const SigmaPrior& prior);

// Negative lower bound for one image.  The posterior is floored first; when
// `grad` is non-null it receives d(total)/d(field) with respect to the
// unfloored inputs (zero where a floor is active).
LossBreakdown negative_elbo(const VariationalPosterior& q, const Field& y, const Field& x,
                            const PriorSpec& prior, PosteriorGrad* grad = nullptr);

// sum_i (mu_i - x_i)^2 and its gradient; the plain-regression baseline.
double mse_loss(const Field& mu, const Field& x, Field* grad_mu = nullptr);

// Stationary point in mu of the single-pixel objective with alpha, beta,
// m_sq held fixed: the precision-weighted average of y and x.
double optimal_mu(double y, double x, double alpha, double beta, double epsilon0_sq);

// ---------------------------------------------------------------------------
// Monte-Carlo oracles.  These sample the defining expectations directly from
// the log densities and share no algebra with the closed forms above.

struct McEstimate {
  double mean = 0.0;
  double std_error = 0.0;
  std::size_t samples = 0;
};

double log_normal_pdf(double v, double mean, double var);
double log_inverse_gamma_pdf(double s, double alpha, double beta);

// E_q[log p(y|z,sigma^2)] by sampling z ~ q(z), sigma^2 ~ q(sigma^2).
McEstimate mc_likelihood_term(const VariationalPosterior& q, const Field& y, std::size_t samples,
                              std::uint64_t seed);

// E_q[log p(y|z,s) + log p(z) + log p(s) - log q(z) - log q(s)], the lower
// bound itself (not negated).
McEstimate mc_lower_bound(const VariationalPosterior& q, const Field& y, const Field& x,
                          const PriorSpec& prior, std::size_t samples, std::uint64_t seed);

// One randomly drawn audit problem: image, clean reference, posterior and
// prior, all in realistic ranges.
struct ElboTrial {
  VariationalPosterior q;
  Field y;
  Field x;
  PriorSpec prior;
};

ElboTrial random_elbo_trial(const Shape& shape, std::uint64_t seed);

struct ElboAuditRow {
  std::size_t trial = 0;
  double analytic = 0.0;  // lower bound = -negative_elbo().total
  double mc_mean = 0.0;
  double mc_stderr = 0.0;
  double z_score = 0.0;
};

std::vector<ElboAuditRow> audit_elbo(std::size_t trials, std::size_t samples, const Shape& shape,
                                     std::uint64_t seed);

}  // namespace vdn
