#pragma once

// Maximum width and area of a band, and Monte-Carlo coverage experiments for
// regions and bands.

#include <cstdint>
#include <string>

#include "expband/bands.hpp"
#include "expband/censoring.hpp"
#include "expband/regions.hpp"
#include "json.hpp"

namespace expband {

struct WidthResult {
  double value;
  double argmax;
};

struct AreaResult {
  double value;  // +inf when infinite
  bool infinite;
  double abs_error;
};

struct BandMetrics {
  std::string kind;
  double max_width;
  double width_argmax;
  double area;
  bool area_infinite;
  double quadrature_error_estimate;

  nlohmann::json to_json() const;
};

/// sup_x (upper - lower), panel by panel between breakpoints.
WidthResult max_width(const Band& band);
/// Integral of the width over the real line; infinite iff the width does not
/// vanish at -inf or +inf (read off the outermost pieces).
AreaResult area(const Band& band, double abs_tol = 1e-9);
BandMetrics band_metrics(const Band& band);

enum class CoverageTarget { c1, c2, c3, c4p, c4pp, b1, b2, b3, b4, b4p, b4pp };
std::string to_string(CoverageTarget t);
CoverageTarget coverage_target_from_string(const std::string& s);

/// Everything a replicate needs besides the sample. `p` is the region's p
/// (C1/C2/B1/B2), c_p for C3/B3, d_p for C4/B4 kinds; `expected` is the exact level.
struct CoverageSpec {
  CoverageTarget target;
  double p = 0.1;
  double c_p = 0.0;
  double d_p = 0.0;
  double expected = 0.9;
  int grid = 1024;  // trimmed band profile points
};

struct CoverageReport {
  std::string kind;
  double expected;
  std::int64_t replicates;
  std::int64_t hits;
  double coverage;
  double std_error;
  double mu, sigma;
  std::uint64_t seed;

  nlohmann::json to_json() const;
};

CoverageReport coverage_experiment(const CoverageSpec& spec, const LocScale& theta,
                                   const GeneralizedScheme& scheme, std::int64_t replicates,
                                   std::uint64_t seed, unsigned workers = 0);

}  // namespace expband
