#pragma once

// Progressively type-II censored experiments under the two-parameter
// exponential model F(x) = 1 - exp(-(x - mu) / sigma), x > mu.

#include <cmath>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "expband/random.hpp"

namespace expband {

/// Location-scale parameter (mu, sigma) with sigma > 0.
class LocScale {
public:
  LocScale(double mu, double sigma);

  double mu() const noexcept { return mu_; }
  double sigma() const noexcept { return sigma_; }

  /// Exponential cdf with this location and scale.
  double cdf(double x) const noexcept;

  friend bool operator==(const LocScale&, const LocScale&) = default;

private:
  double mu_;
  double sigma_;
};

/// Exponential cdf F_{(loc, scale)}(x); zero left of loc.
inline double exp_cdf(double loc, double scale, double x) noexcept {
  return x > loc ? -std::expm1(-(x - loc) / scale) : 0.0;
}

/// Removal design (n, m, R_1..R_m) with sum R = n - m and m >= 2.
class CensoringScheme {
public:
  CensoringScheme(int n, std::vector<int> removals);

  /// Conventional type-II right censoring: R = (0, ..., 0, n - m).
  static CensoringScheme right_censored(int n, int m);
  static CensoringScheme complete(int n);

  int n() const noexcept { return n_; }
  int m() const noexcept { return static_cast<int>(removals_.size()); }
  const std::vector<int>& removals() const noexcept { return removals_; }

  /// gamma_j = sum_{i >= j} (R_i + 1); gamma_1 = n, strictly decreasing.
  std::vector<double> gammas() const;

private:
  int n_;
  std::vector<int> removals_;
};

/// Any vector of positive gamma coefficients (sequential order statistics and
/// friends). The "n" used by every downstream formula is gamma_1.
class GeneralizedScheme {
public:
  explicit GeneralizedScheme(std::vector<double> gammas);
  GeneralizedScheme(const CensoringScheme& scheme);  // NOLINT: implicit by intent

  /// gamma_j = (n - j + 1) alpha_j for j = 1..m = alphas.size().
  static GeneralizedScheme sequential_order_statistics(int n, std::span<const double> alphas);

  int m() const noexcept { return static_cast<int>(gammas_.size()); }
  double n() const noexcept { return gammas_.front(); }
  const std::vector<double>& gammas() const noexcept { return gammas_; }

  /// Removal counts when the scheme came from a CensoringScheme.
  const std::optional<CensoringScheme>& design() const noexcept { return design_; }

private:
  std::vector<double> gammas_;
  std::optional<CensoringScheme> design_;
};

/// Strictly increasing map g applied to the data before fitting
/// (F(x) = 1 - exp(-(g(x) - mu)/sigma)).
class MonotoneMap {
public:
  enum class Kind { identity, log, table };

  static MonotoneMap identity() { return MonotoneMap(Kind::identity, {}, {}); }
  static MonotoneMap log() { return MonotoneMap(Kind::log, {}, {}); }
  /// Piecewise-linear map through (xs[i], ys[i]), linearly extrapolated; both
  /// coordinates must be strictly increasing.
  static MonotoneMap table(std::vector<double> xs, std::vector<double> ys);

  Kind kind() const noexcept { return kind_; }
  const std::vector<double>& table_x() const noexcept { return xs_; }
  const std::vector<double>& table_y() const noexcept { return ys_; }

  double apply(double x) const;
  double inverse(double y) const;
  std::string name() const;

  friend bool operator==(const MonotoneMap&, const MonotoneMap&) = default;

private:
  MonotoneMap(Kind kind, std::vector<double> xs, std::vector<double> ys)
      : kind_(kind), xs_(std::move(xs)), ys_(std::move(ys)) {}

  Kind kind_;
  std::vector<double> xs_;
  std::vector<double> ys_;
};

/// Ordered observed failure times x_1 <= ... <= x_m together with the scheme.
/// Times are on the working scale; `scale()` maps original units onto it.
class ProgressiveSample {
public:
  ProgressiveSample(GeneralizedScheme scheme, std::vector<double> times,
                    MonotoneMap scale = MonotoneMap::identity());

  const GeneralizedScheme& scheme() const noexcept { return scheme_; }
  const std::vector<double>& times() const noexcept { return times_; }
  const MonotoneMap& scale() const noexcept { return scale_; }
  int m() const noexcept { return scheme_.m(); }

private:
  GeneralizedScheme scheme_;
  std::vector<double> times_;
  MonotoneMap scale_;
};

struct MleEstimate {
  double mu_hat;
  double sigma_hat;

  LocScale as_locscale() const { return {mu_hat, sigma_hat}; }
};

struct Umvue {
  double mu_tilde;
  double sigma_tilde;
};

std::vector<double> gammas(const CensoringScheme& scheme);

/// mu_hat = x_1, sigma_hat = (1/m) sum_{j>=2} gamma_j (x_j - x_{j-1}).
/// Throws DomainError when all times coincide.
MleEstimate mle(const ProgressiveSample& sample);

/// sigma_tilde = m sigma_hat / (m - 1), mu_tilde = mu_hat - sigma_tilde / n.
Umvue umvue(const MleEstimate& est, const GeneralizedScheme& scheme);

/// X_j = mu + sigma * sum_{i<=j} E_i / gamma_i with E_i iid standard exponential.
ProgressiveSample simulate_sample(const LocScale& theta, const GeneralizedScheme& scheme,
                                  RandomStream& stream);

/// Applies g elementwise and records it for back-transforming x coordinates.
ProgressiveSample g_transform(const ProgressiveSample& sample, const MonotoneMap& g);

/// CSV with header `time,removed`; n is inferred as m + sum(removed).
ProgressiveSample read_sample_csv(std::istream& in);
ProgressiveSample read_sample_csv_file(const std::string& path);
void write_sample_csv(std::ostream& out, const ProgressiveSample& sample);

}  // namespace expband
