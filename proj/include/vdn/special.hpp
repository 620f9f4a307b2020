#pragma once

#include <boost/math/special_functions/digamma.hpp>
#include <boost/math/special_functions/trigamma.hpp>
#include <cmath>
#include <string>

#include "vdn/error.hpp"

namespace vdn {

namespace detail {
inline void require_positive(double x, const char* fn) {
  if (!(x > 0.0) || !std::isfinite(x))
    throw DomainError(std::string(fn) + ": argument must be positive and finite, got " + std::to_string(x));
}
}  // namespace detail

// psi(x) = d/dx log Gamma(x), x > 0.
inline double digamma(double x) {
  detail::require_positive(x, "digamma");
  return boost::math::digamma(x);
}

// psi'(x), x > 0.
inline double trigamma(double x) {
  detail::require_positive(x, "trigamma");
  return boost::math::trigamma(x);
}

// log Gamma(x), x > 0.  lgamma_r keeps this reentrant (no signgam write).
inline double log_gamma(double x) {
  detail::require_positive(x, "log_gamma");
  int sign = 0;
  return ::lgamma_r(x, &sign);
}

}  // namespace vdn
