#pragma once

// Parameter-space confidence regions for (mu, sigma): the two trapezoids built
// from independent pivots, the minimum-area region, and the regions induced by
// the Kolmogorov-Smirnov type statistic. All regions are closed.

#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "expband/censoring.hpp"
#include "expband/special_functions.hpp"
#include "json.hpp"

namespace expband {

using Point = std::pair<double, double>;  // (mu, sigma)

/// Equal split of the level 1-p between the two pivots and their tails:
/// q1 = (1 - sqrt(1-p)) / 2, q2 = 1 - q1.
struct LevelSplit {
  double q1;
  double q2;
};
LevelSplit uniform_split(Probability p);

/// {a_{q1}(sigma) <= mu <= a_{q2}(sigma), sigma_lo <= sigma <= sigma_hi} with
/// a_q(sigma) = mu_hat + sigma ln(q) / n and sigma_q = 2 m sigma_hat / chi2_q(2m-2).
struct RegionC1 {
  double mu_hat, sigma_hat;
  int m;
  double n;
  double p, q1, q2;
  double sigma_lo;  // sigma_{q2}
  double sigma_hi;  // sigma_{q1}

  double a(double q, double sigma) const;
  bool contains(const LocScale& theta) const;
  std::vector<Point> boundary(int points) const;
};

/// {mu_lo <= mu <= mu_hi, b_{q2}(mu) <= sigma <= b_{q1}(mu)} with
/// b_q(mu) = 2 (n (mu_hat - mu) + m sigma_hat) / chi2_q(2m) and
/// mu_q = mu_hat - m sigma_hat F_q(2, 2m-2) / ((m-1) n).
struct RegionC2 {
  double mu_hat, sigma_hat;
  int m;
  double n;
  double p, q1, q2;
  double mu_lo;  // mu_{q2}
  double mu_hi;  // mu_{q1}
  double chi2_q1, chi2_q2;  // chi2 quantiles with 2m degrees of freedom

  double b(double chi2_q, double mu) const;
  bool contains(const LocScale& theta) const;
  std::vector<Point> boundary(int points) const;
};

/// Minimum-area region {mu <= mu_hat,
///   (m+1) ln(sigma_hat/sigma) - (n (mu_hat - mu) + m sigma_hat) / sigma >= c_p},
/// equivalently mu_hat + g(sigma) <= mu <= mu_hat on [z_m1, z_0].
struct RegionC3 {
  double mu_hat, sigma_hat;
  int m;
  double n;
  double c_p;
  double z_m1, z_0;

  /// g(z) = ([c_p - (m+1)(ln sigma_hat - ln z)] z + m sigma_hat) / n.
  double g(double z) const;
  /// Left side of the defining inequality.
  double statistic(const LocScale& theta) const;
  bool contains(const LocScale& theta) const;
  std::vector<Point> boundary(int points) const;
};

/// Data-free description of the KS regions in pivot coordinates
/// s = sigma_hat / sigma, t = (mu_hat - mu) / sigma:
///   lower(s) <= t <= o(s), lower = u (C4') or max(u, 0) (C4'').
class KsPivotRegion {
public:
  KsPivotRegion(double d_p, bool trimmed);

  double d() const noexcept { return d_; }
  bool trimmed() const noexcept { return trimmed_; }

  /// h(x) = ln(d / |1-x|)(x - 1) + x ln x, h(1) = 0, h(0) = -ln d.
  double h(double x) const;
  double u(double x) const;
  double o(double x) const;
  double lower(double x) const;

  /// Feasible s range (where lower(s) <= o(s)); s_hi may be +inf for d >= 1/2.
  double s_lo() const noexcept { return s_lo_; }
  double s_hi() const noexcept { return s_hi_; }
  /// For C4'': the s in (0, 1-d) where u crosses zero.
  double u_zero() const noexcept { return u_zero_; }

  bool contains(double s, double t) const;

private:
  double d_;
  bool trimmed_;
  double s_lo_ = 0.0;
  double s_hi_ = 0.0;
  double u_zero_ = 0.0;
};

/// C4' = {theta : sup_x |F_theta - F_hat| <= d_p}; C4'' additionally mu <= mu_hat.
struct RegionC4 {
  double mu_hat, sigma_hat;
  double d_p;
  bool trimmed;  // C4'' when set
  KsPivotRegion pivot;

  bool contains(const LocScale& theta) const;
  std::vector<Point> boundary(int points) const;
};

using Region = std::variant<RegionC1, RegionC2, RegionC3, RegionC4>;

RegionC1 build_c1(const MleEstimate& est, const GeneralizedScheme& scheme, Probability p);
RegionC2 build_c2(const MleEstimate& est, const GeneralizedScheme& scheme, Probability p);
/// Requires c_p < -m; throws DomainError otherwise (infeasible level).
RegionC3 build_c3(const MleEstimate& est, const GeneralizedScheme& scheme, double c_p);
RegionC4 build_c4(const MleEstimate& est, double d_p, bool trimmed);

bool region_membership(const Region& region, const LocScale& theta);
std::string region_tag(const Region& region);

/// P(Delta) for the strip added by the comprehensive convex hull of C3, by
/// nested adaptive quadrature over (u, v) with Gamma(1) x Gamma(m-1) density.
double comprehensive_convex_hull_delta_prob(int m, double c_p);

nlohmann::json region_to_json(const Region& region, int boundary_points = 512);
Region region_from_json(const nlohmann::json& j);

namespace detail {
/// -(m/(m+1)) exp(c/(m+1)); the C3 endpoints exist while this is >= -1/e.
double c3_lambert_argument(int m, double c);
/// (Z_{-1}, Z_0) without the c < -m guard.
std::pair<double, double> c3_endpoints(int m, double sigma_hat, double c);
/// (y, z) bounds of the Delta strip in v = m sigma_hat / sigma.
std::pair<double, double> delta_strip_bounds(int m, double c);
double delta_prob_unchecked(int m, double c);
}  // namespace detail

}  // namespace expband
