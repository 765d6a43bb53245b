#pragma once

#include <functional>
#include <string>

namespace expband::numerics {

struct QuadratureResult {
  double value = 0.0;
  double abs_error = 0.0;
  int evaluations = 0;
  int intervals = 0;
};

/// Globally adaptive 15-point Gauss-Kronrod quadrature on [a, b]. b may be
/// +infinity (mapped through x = a + t / (1 - t)). Stops once the summed error
/// estimate is below max(abs_tol, rel_tol * |value|); throws NumericError with
/// the reached estimate when `max_intervals` subdivisions do not suffice.
QuadratureResult integrate(const std::function<double(double)>& f, double a, double b,
                           double abs_tol, double rel_tol = 0.0, int max_intervals = 4000);

struct Extremum {
  double x;
  double value;
};

/// Golden-section search for the maximum of a unimodal f on [a, b]; the
/// endpoints are also compared so monotone f returns the right end value.
Extremum golden_section_max(const std::function<double(double)>& f, double a, double b,
                            double tol = 1e-10);

Extremum golden_section_min(const std::function<double(double)>& f, double a, double b,
                            double tol = 1e-10);

/// Root of a continuous f on [a, b] with a sign change, by bisection.
double bisect_root(const std::function<double(double)>& f, double a, double b,
                   double tol = 1e-14, int max_iter = 200);

}  // namespace expband::numerics
