#include "expband/special_functions.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numbers>
#include <string>

namespace expband {

Probability::Probability(double value) : value_(value) {
  if (!(value >= 0.0 && value <= 1.0)) {
    throw DomainError("probability outside [0,1]: " + std::to_string(value));
  }
}

namespace special {
namespace {

constexpr double kEps = std::numeric_limits<double>::epsilon();
constexpr double kTiny = 1e-300;
constexpr int kMaxSeriesTerms = 100000;

void require_open_unit(Probability beta, const char* who) {
  if (!(beta.value() > 0.0 && beta.value() < 1.0)) {
    throw DomainError(std::string(who) + ": level must lie in (0,1), got " +
                      std::to_string(beta.value()));
  }
}

void require_shape(double shape, const char* who) {
  if (!(shape > 0.0) || !std::isfinite(shape)) {
    throw DomainError(std::string(who) + ": shape must be positive and finite");
  }
}

// log of x^a e^-x / Gamma(a)
double log_gamma_prefactor(double a, double x) { return a * std::log(x) - x - std::lgamma(a); }

double gamma_p_series(double a, double x) {
  double term = 1.0 / a;
  double sum = term;
  for (int n = 1; n < kMaxSeriesTerms; ++n) {
    term *= x / (a + n);
    sum += term;
    if (std::abs(term) < std::abs(sum) * kEps) {
      return sum * std::exp(log_gamma_prefactor(a, x));
    }
  }
  throw NumericError("incomplete gamma series did not converge (a=" + std::to_string(a) +
                     ", x=" + std::to_string(x) + ")");
}

// Modified Lentz evaluation of the continued fraction for Q(a, x).
double gamma_q_fraction(double a, double x) {
  double b = x + 1.0 - a;
  double c = 1.0 / kTiny;
  double d = 1.0 / b;
  double h = d;
  for (int i = 1; i < kMaxSeriesTerms; ++i) {
    const double an = -i * (i - a);
    b += 2.0;
    d = an * d + b;
    if (std::abs(d) < kTiny) d = kTiny;
    c = b + an / c;
    if (std::abs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    const double delta = d * c;
    h *= delta;
    if (std::abs(delta - 1.0) < kEps) {
      return std::exp(log_gamma_prefactor(a, x)) * h;
    }
  }
  throw NumericError("incomplete gamma continued fraction did not converge (a=" +
                     std::to_string(a) + ", x=" + std::to_string(x) + ")");
}

double beta_fraction(double a, double b, double x) {
  const double qab = a + b;
  const double qap = a + 1.0;
  const double qam = a - 1.0;
  double c = 1.0;
  double d = 1.0 - qab * x / qap;
  if (std::abs(d) < kTiny) d = kTiny;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m < kMaxSeriesTerms; ++m) {
    const int m2 = 2 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::abs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::abs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    const double delta = d * c;
    h *= delta;
    if (std::abs(delta - 1.0) < kEps) return h;
  }
  throw NumericError("incomplete beta continued fraction did not converge");
}

double beta_pdf(double a, double b, double x) {
  if (x <= 0.0 || x >= 1.0) return 0.0;
  return std::exp((a - 1.0) * std::log(x) + (b - 1.0) * std::log1p(-x) + std::lgamma(a + b) -
                  std::lgamma(a) - std::lgamma(b));
}

// Bracketed bisection refined by Newton steps. cdf must be nondecreasing on
// [lo, hi] with cdf(lo) <= target <= cdf(hi).
double invert_cdf(const std::function<double(double)>& cdf,
                  const std::function<double(double)>& pdf, double target, double lo,
                  double hi, double guess) {
  double x = std::clamp(guess, lo, hi);
  for (int iter = 0; iter < 400; ++iter) {
    const double f = cdf(x) - target;
    if (f == 0.0) return x;
    if (f < 0.0) {
      lo = x;
    } else {
      hi = x;
    }
    const double dens = pdf(x);
    double next = (dens > 0.0 && std::isfinite(dens)) ? x - f / dens : lo - 1.0;
    if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
    const double tol = std::max(1e-12 * std::abs(next), 1e-300);
    if (std::abs(next - x) <= tol || hi - lo <= tol) return next;
    x = next;
  }
  throw NumericError("quantile root finding did not converge");
}

}  // namespace

double gamma_cdf(double shape, double x) {
  require_shape(shape, "gamma_cdf");
  if (std::isnan(x)) throw DomainError("gamma_cdf: x is NaN");
  if (x <= 0.0) return 0.0;
  if (std::isinf(x)) return 1.0;
  if (x < shape + 1.0) return gamma_p_series(shape, x);
  return 1.0 - gamma_q_fraction(shape, x);
}

double gamma_sf(double shape, double x) {
  require_shape(shape, "gamma_sf");
  if (std::isnan(x)) throw DomainError("gamma_sf: x is NaN");
  if (x <= 0.0) return 1.0;
  if (std::isinf(x)) return 0.0;
  if (x < shape + 1.0) return 1.0 - gamma_p_series(shape, x);
  return gamma_q_fraction(shape, x);
}

double gamma_pdf(double shape, double x) {
  require_shape(shape, "gamma_pdf");
  if (x < 0.0) return 0.0;
  if (x == 0.0) return shape == 1.0 ? 1.0 : (shape < 1.0 ? std::numeric_limits<double>::infinity() : 0.0);
  return std::exp((shape - 1.0) * std::log(x) - x - std::lgamma(shape));
}

double gamma_quantile(double shape, Probability beta) {
  require_shape(shape, "gamma_quantile");
  require_open_unit(beta, "gamma_quantile");
  double hi = std::max(1.0, shape);
  while (gamma_cdf(shape, hi) < beta.value()) hi *= 2.0;
  auto pdf = [shape](double x) { return gamma_pdf(shape, x); };
  if (beta.value() > 0.5) {
    // upper tail: solve -Q(x) = -(1 - beta) to keep relative precision
    return invert_cdf([shape](double x) { return -gamma_sf(shape, x); }, pdf, -beta.complement(), 0.0,
                      hi, shape);
  }
  return invert_cdf([shape](double x) { return gamma_cdf(shape, x); }, pdf, beta.value(), 0.0, hi,
                    shape);
}

double chi2_quantile(Probability beta, int k) {
  if (k < 1) throw DomainError("chi2_quantile: degrees of freedom must be >= 1");
  require_open_unit(beta, "chi2_quantile");
  return 2.0 * gamma_quantile(0.5 * k, beta);
}

double beta_cdf(double a, double b, double x) {
  require_shape(a, "beta_cdf");
  require_shape(b, "beta_cdf");
  if (std::isnan(x)) throw DomainError("beta_cdf: x is NaN");
  if (x <= 0.0) return 0.0;
  if (x >= 1.0) return 1.0;
  const double log_front = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) +
                           a * std::log(x) + b * std::log1p(-x);
  if (x < (a + 1.0) / (a + b + 2.0)) {
    return std::exp(log_front) * beta_fraction(a, b, x) / a;
  }
  return 1.0 - std::exp(log_front) * beta_fraction(b, a, 1.0 - x) / b;
}

double beta_quantile(double a, double b, Probability beta) {
  require_shape(a, "beta_quantile");
  require_shape(b, "beta_quantile");
  require_open_unit(beta, "beta_quantile");
  return invert_cdf([a, b](double x) { return beta_cdf(a, b, x); },
                    [a, b](double x) { return beta_pdf(a, b, x); }, beta.value(), 0.0, 1.0,
                    a / (a + b));
}

double f_quantile(Probability beta, int k1, int k2) {
  if (k1 < 1 || k2 < 1) throw DomainError("f_quantile: degrees of freedom must be >= 1");
  require_open_unit(beta, "f_quantile");
  if (k1 == 2) {
    return 0.5 * k2 * std::expm1(-(2.0 / k2) * std::log1p(-beta.value()));
  }
  const double b = beta_quantile(0.5 * k1, 0.5 * k2, beta);
  return (static_cast<double>(k2) / k1) * b / (1.0 - b);
}

namespace {

constexpr double kInvE = 0.36787944117144232159552377016146;
constexpr int kMaxHalley = 50;

double halley(double x, double w, const char* branch) {
  for (int i = 0; i < kMaxHalley; ++i) {
    const double ew = std::exp(w);
    const double f = w * ew - x;
    const double wp1 = w + 1.0;
    if (f == 0.0 || wp1 == 0.0) return w;
    const double step = f / (ew * wp1 - (w + 2.0) * f / (2.0 * wp1));
    w -= step;
    if (!std::isfinite(w)) break;
    if (std::abs(step) <= 4.0 * kEps * (1.0 + std::abs(w))) return w;
  }
  throw NumericError(std::string("lambert_") + branch + ": Halley iteration did not converge at x=" +
                     std::to_string(x));
}

// Expansion around the branch point, p = +-sqrt(2(e x + 1)).
double branch_point_series(double p) {
  constexpr double c[] = {-1.0, 1.0, -1.0 / 3.0, 11.0 / 72.0, -43.0 / 540.0, 769.0 / 17280.0,
                          -221.0 / 8505.0, 680863.0 / 43545600.0};
  double acc = 0.0;
  for (int i = 7; i >= 0; --i) acc = acc * p + c[i];
  return acc;
}
double branch_distance(double x) {
  // 2 e (x + 1/e) with 1/e split in two doubles; x + hi is exact near -1/e.
  constexpr double kInvELo = -1.2428753672788363e-17;
  return std::max(0.0, 2.0 * std::numbers::e * ((x + kInvE) + kInvELo));
}

}  // namespace

double lambert_w0(double x) {
  if (std::isnan(x) || x < -kInvE * (1.0 + 4.0 * kEps)) {
    throw DomainError("lambert_w0: argument below -1/e: " + std::to_string(x));
  }
  if (x == 0.0) return 0.0;
  if (x <= -kInvE) return -1.0;
  if (std::isinf(x)) return x;
  double w;
  if (x < -0.25) {
    const double p = std::sqrt(branch_distance(x));
    // Halley stalls where W' blows up; the series is exact to rounding there.
    if (p < 1e-2) return branch_point_series(p);
    w = branch_point_series(p);
  } else if (x < 3.0) {
    w = std::log1p(x);
    if (x < 0.0) w = x / (1.0 + x) * (1.0 - 0.5 * x);
  } else {
    const double l1 = std::log(x);
    const double l2 = std::log(l1);
    w = l1 - l2 + l2 / l1;
  }
  return std::max(-1.0, halley(x, w, "w0"));
}

double lambert_wm1(double x) {
  if (std::isnan(x) || x < -kInvE * (1.0 + 4.0 * kEps) || x >= 0.0) {
    throw DomainError("lambert_wm1: argument outside [-1/e, 0): " + std::to_string(x));
  }
  if (x <= -kInvE) return -1.0;
  double w;
  if (x < -0.25) {
    const double p = -std::sqrt(branch_distance(x));
    if (p > -1e-2) return branch_point_series(p);
    w = branch_point_series(p);
  } else {
    const double l1 = std::log(-x);
    const double l2 = std::log(-l1);
    w = l1 - l2 + l2 / l1;
  }
  return std::min(-1.0, halley(x, w, "wm1"));
}

}  // namespace special
}  // namespace expband
