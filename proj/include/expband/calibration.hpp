#pragma once

// Data-free constants: Monte-Carlo quantiles c_p and d_p, the exact level tau
// of B3 and its inverse p(tau), plus a JSON-lines cache for them.

#include <cstdint>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "expband/special_functions.hpp"
#include "json.hpp"

namespace expband {

enum class CalibrationKind { c_p, d_p, tau, p_of_tau };
std::string to_string(CalibrationKind kind);
CalibrationKind calibration_kind_from_string(const std::string& s);

/// n is 0 for the constants that depend on m only (c_p, tau, p_of_tau).
struct CalibrationKey {
  CalibrationKind kind;
  int m;
  double n;
  double level;
  std::int64_t reps;
  std::uint64_t seed;

  friend bool operator==(const CalibrationKey&, const CalibrationKey&) = default;
};

struct CalibrationResult {
  double value = 0.0;
  double mc_std_error = 0.0;  // 0 for analytic values
  CalibrationKey key{};
  /// p_of_tau only: the critical value c_{p(tau)} and the tau it achieves.
  std::optional<double> c;
  std::optional<double> tau;

  nlohmann::json to_json() const;
  static CalibrationResult from_json(const nlohmann::json& j);
};

/// Workers default to std::thread::hardware_concurrency(); results do not
/// depend on the worker count.
struct McOptions {
  std::int64_t reps = 1'000'000;
  std::uint64_t seed = 20240607;
  unsigned workers = 0;
};

/// Draws of (m+1) ln Y - m Y - Z, Y ~ Gamma(m-1, 1/m), Z ~ Exp(1); unsorted,
/// replicate order.
std::vector<double> cp_draws(int m, const McOptions& opt);
/// Draws of max{U, V} with S ~ Exp/n and T ~ Gamma(m-1, 1/m).
std::vector<double> dp_draws(int m, double n, const McOptions& opt);

/// Order statistic at ceil(q N) of the sorted draws.
double empirical_quantile(const std::vector<double>& sorted, double q);
/// Std error of the q-quantile by sectioning the replicate-ordered draws into
/// 100 batches.
double sectioning_std_error(const std::vector<double>& draws, double q, int batches = 100);

/// p-quantile of the c statistic.
CalibrationResult calibrate_cp(int m, Probability p, const McOptions& opt);
/// (1-p)-quantile of the KS statistic.
CalibrationResult calibrate_dp(int m, double n, Probability p, const McOptions& opt);

/// Exact level of B3 given c_p < -m.
Probability tau_of_p(int m, Probability p, double c_p);

/// Solves tau_of_p(m, p, c(p)) = tau by bisection on p with c(p) from one fixed
/// sorted draw set. value = p; c and the achieved tau are filled in.
CalibrationResult p_of_tau(int m, Probability tau, const McOptions& opt);
/// Same on caller-provided draws (replicate order) and their sorted copy, so one
/// draw set can serve several tau targets.
CalibrationResult p_of_tau_draws(int m, Probability tau, const std::vector<double>& draws,
                                 const std::vector<double>& sorted);

/// Append-only JSON-lines store; the latest record for a key wins.
class CalibrationCache {
public:
  explicit CalibrationCache(std::string path);

  std::optional<CalibrationResult> get(const CalibrationKey& key) const;
  void put(const CalibrationResult& result);
  const std::string& path() const noexcept { return path_; }

private:
  void load();

  std::string path_;
  std::vector<CalibrationResult> records_;
  mutable std::mutex mu_;
};

/// Cache lookups wrapped around the calibrators; `cache` may be null and
/// `force` skips the lookup (the fresh value is still stored).
CalibrationResult cached_cp(CalibrationCache* cache, int m, Probability p, const McOptions& opt,
                            bool force = false);
CalibrationResult cached_dp(CalibrationCache* cache, int m, double n, Probability p,
                            const McOptions& opt, bool force = false);
CalibrationResult cached_p_of_tau(CalibrationCache* cache, int m, Probability tau,
                                  const McOptions& opt, bool force = false);

}  // namespace expband
