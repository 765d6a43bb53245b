#pragma once

// Confidence bands for the cdf: the closed-form bands B1..B4, the trimmed
// KS bands B4' and B4'', the reliability and SOS-marginal transforms, and the
// KS distance between two exponential cdfs.

#include <optional>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "expband/censoring.hpp"
#include "expband/regions.hpp"
#include "expband/special_functions.hpp"
#include "json.hpp"

namespace expband {

// ---------------------------------------------------------------- boundary pieces

struct ConstantAtom {
  double value;
  double operator()(double) const { return value; }
};

/// clamp(F_{(loc, scale)}(x) + shift, 0, 1).
struct ExpCdfAtom {
  double loc;
  double scale;
  double shift = 0.0;
  double operator()(double x) const;
  /// x where the unclamped value crosses the given level (nullopt if never).
  std::optional<double> crossing(double level) const;
};

/// Upper boundary of B3 between the points where sigma*_x hits Z_0 and Z_{-1}:
/// F_{(mu_hat + g(sigma*_x), sigma*_x)}(x).
struct B3ArcAtom {
  double mu_hat, sigma_hat, n;
  int m;
  double c_p;
  double sigma_star(double x) const;
  double operator()(double x) const;
};

/// Linear interpolation through (xs, ys), optionally bounded below by `floor`
/// and above by `ceil` (used to keep trimmed bands inside B4).
struct GridAtom {
  std::vector<double> xs;
  std::vector<double> ys;
  std::optional<ExpCdfAtom> floor;
  std::optional<ExpCdfAtom> ceil;
  double interpolate(double x) const;
  double operator()(double x) const;
};

using PieceFunction = std::variant<ConstantAtom, ExpCdfAtom, B3ArcAtom, GridAtom>;

/// Applies on [x_lo, x_hi); the first piece starts at -inf, the last ends at +inf.
struct Piece {
  double x_lo;
  double x_hi;
  PieceFunction f;
};

class Boundary {
public:
  Boundary() = default;
  explicit Boundary(std::vector<Piece> pieces);

  double operator()(double x) const;
  const std::vector<Piece>& pieces() const noexcept { return pieces_; }
  /// Finite piece joins, cdf locations, clip points and grid nodes, sorted.
  std::vector<double> breakpoints() const;
  double limit_left() const;
  double limit_right() const;

private:
  std::size_t locate(double x) const;
  std::vector<Piece> pieces_;
};

// ---------------------------------------------------------------- bands

enum class BandKind { b1, b2, b3, b4, b4p, b4pp };
std::string to_string(BandKind kind);
BandKind band_kind_from_string(const std::string& s);

/// Value maps applied after the base boundaries: reliability (y -> 1 - y with
/// lower/upper swapped) and the SOS marginal push-forward y -> H(y).
struct ValueTransform {
  enum class Kind { reliability, marginal };
  Kind kind;
  std::vector<double> gammas;   // marginal only
  std::vector<double> weights;  // prod_j gamma_j * a_i / gamma_i
};

class Band {
public:
  Band(BandKind kind, Boundary lower, Boundary upper, Probability level, Probability nominal,
       nlohmann::json constants);

  BandKind base_kind() const noexcept { return kind_; }
  /// "b1", "reliability-of-b1", "marginal-of-b4pp", ...
  std::string kind_name() const;

  /// Exact confidence level and the nominal input level (they differ for B3).
  Probability level() const noexcept { return level_; }
  Probability nominal() const noexcept { return nominal_; }
  const nlohmann::json& constants() const noexcept { return constants_; }
  const std::vector<ValueTransform>& transforms() const noexcept { return transforms_; }
  const MonotoneMap& scale() const noexcept { return scale_; }

  const Boundary& base_lower() const noexcept { return lower_; }
  const Boundary& base_upper() const noexcept { return upper_; }

  /// (lower, upper) on the working x scale after all value transforms.
  std::pair<double, double> eval(double x) const;
  double lower(double x) const { return eval(x).first; }
  double upper(double x) const { return eval(x).second; }
  std::pair<double, double> limits_left() const;
  std::pair<double, double> limits_right() const;
  std::vector<double> breakpoints() const;
  /// Applies the transform chain to a (lower, upper) pair of base values.
  std::pair<double, double> transform_values(double lo, double up) const;

  Band with_transform(ValueTransform t) const;
  Band with_scale(MonotoneMap scale) const;

private:
  BandKind kind_;
  Boundary lower_;
  Boundary upper_;
  Probability level_;
  Probability nominal_;
  nlohmann::json constants_;
  std::vector<ValueTransform> transforms_;
  MonotoneMap scale_ = MonotoneMap::identity();
};

Band band_b1(const MleEstimate& est, const GeneralizedScheme& scheme, Probability p);
Band band_b2(const MleEstimate& est, const GeneralizedScheme& scheme, Probability p);
/// `nominal` is 1-p of the c_p calibration, `exact` the exact level tau.
Band band_b3(const MleEstimate& est, const GeneralizedScheme& scheme, double c_p,
             Probability nominal, Probability exact);
Band band_b4(const MleEstimate& est, double d_p, Probability level);

/// sup_x |F_theta(x) - F_(0,1)(x)| in closed form.
double ks_distance(const LocScale& theta);

/// Standardized trimmed bands in k = (x - mu_hat) / sigma_hat. Depends on d only.
struct TrimmedProfile {
  struct Vertex {
    double s, t;  // pivot coordinates sigma_hat/sigma, (mu_hat - mu)/sigma
  };
  double d = 0.0;
  std::vector<double> k;
  std::vector<double> lower_p, upper_p, lower_pp, upper_pp;
  Vertex lo;          // shared left vertex (smallest s)
  Vertex hi_p, hi_pp; // right vertices of C4' and C4''
  double k_left = 0.0;

  /// Requires 0 < d < 1/2 (C4' is bounded). `points` >= 16.
  static TrimmedProfile compute(double d, int points = 1024);
};

/// Golden-section extremization of k s + o(s) (sup) and k s + lower(s) (inf)
/// over the feasible s range, arc by arc.
std::pair<double, double> trimmed_extremes(const KsPivotRegion& region, double k);

/// Band B4' or B4'' as the affine image of the profile at the fit.
Band trimmed_band(const MleEstimate& est, const TrimmedProfile& profile, bool trimmed,
                  Probability level);
/// Convenience: profile from the C4 region's d_p, at `grid` points.
Band trim_band(const Band& b4, const RegionC4& region, int grid = 1024);

Band reliability_band(const Band& band);

/// H(y) = 1 - prod(gamma) sum_i a_i/gamma_i (1 - y)^{gamma_i}; gammas pairwise distinct.
double marginal_transform_h(const std::vector<double>& gammas, Probability y);
ValueTransform marginal_transform(const std::vector<double>& gammas);
Band marginal_band(const Band& band, const std::vector<double>& gammas);

namespace detail {
/// The two routes behind marginal_transform_h: the alternating closed-form sum
/// (unclamped) and the positive-term uniformization series.
double marginal_h_closed_form(const std::vector<double>& gammas, double y);
double marginal_h_uniformized(const std::vector<double>& gammas, double y);
}  // namespace detail

/// Largest violation of graph(T(F_theta)) inside the band, T the band's transform
/// chain (monotone bijections, so the base band is checked). Candidates are
/// the exact extremum locations per piece; B3 arcs are sampled and refined.
/// +inf when F_theta leaves an exponential tail piece asymptotically.
double graph_excess(const Band& band, const LocScale& theta);
/// Audit variant on a `points`-point quantile grid of F_theta plus breakpoints.
double graph_excess_on_grid(const Band& band, const LocScale& theta, int points = 2048);
bool contains_graph(const Band& band, const LocScale& theta, double slack = 1e-12);

// ---------------------------------------------------------------- export

/// Sample points for plotting/CSV: breakpoints plus an even grid over the
/// informative x range.
std::vector<double> band_x_grid(const Band& band, int points);
void write_band_csv(std::ostream& out, const Band& band, int points = 1024);
nlohmann::json band_to_json(const Band& band, int points = 0);
Band band_from_json(const nlohmann::json& j);
void write_band_svg(std::ostream& out, const Band& band, const std::optional<LocScale>& fit,
                    int points = 400);

}  // namespace expband
