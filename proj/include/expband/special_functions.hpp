#pragma once

// Gamma-family cdfs and quantiles, chi-square and F quantiles, and the two real
// branches of the Lambert W function. Everything here is a pure function.

#include "expband/error.hpp"

namespace expband {

// A probability in [0, 1]. Construction outside that range throws DomainError.
class Probability {
public:
  constexpr Probability() = default;
  explicit Probability(double value);

  constexpr double value() const noexcept { return value_; }
  constexpr double complement() const noexcept { return 1.0 - value_; }

  friend constexpr auto operator<=>(Probability, Probability) = default;

private:
  double value_ = 0.0;
};

namespace special {

/// Regularized lower incomplete gamma function P(shape, x). Zero for x <= 0.
double gamma_cdf(double shape, double x);

/// Regularized upper incomplete gamma function Q(shape, x) = 1 - P(shape, x),
/// computed without cancellation for large x.
double gamma_sf(double shape, double x);

/// Density of Gamma(shape, 1).
double gamma_pdf(double shape, double x);

/// beta-quantile of Gamma(shape, 1); beta must lie in (0, 1).
double gamma_quantile(double shape, Probability beta);

/// beta-quantile of chi-square with k degrees of freedom, i.e. 2 * Gamma(k/2, 1).
double chi2_quantile(Probability beta, int k);

/// Regularized incomplete beta function I_x(a, b).
double beta_cdf(double a, double b, double x);

double beta_quantile(double a, double b, Probability beta);

/// beta-quantile of the F(k1, k2) distribution. For k1 == 2 the closed form
/// (k2/2) * ((1-beta)^(-2/k2) - 1) is used.
double f_quantile(Probability beta, int k1, int k2);

/// Principal branch W0 on [-1/e, inf); returns w >= -1 with w e^w = x.
double lambert_w0(double x);

/// Lower branch W-1 on [-1/e, 0); returns w <= -1 with w e^w = x.
double lambert_wm1(double x);

}  // namespace special
}  // namespace expband
