#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "expband/bands.hpp"
#include "expband/calibration.hpp"
#include "expband/censoring.hpp"
#include "json.hpp"

namespace expband::cli {

// Resolved run configuration (flags > config file > defaults).
struct RunConfig {
  std::string command;
  std::string data;
  std::vector<std::string> methods;
  double level = 0.9025;
  std::int64_t reps = 1'000'000;
  std::int64_t replicates = 100'000;
  std::uint64_t seed = 20240607;
  int grid = 1024;
  int points = 512;
  std::string out;
  std::vector<std::string> formats{"json"};
  std::string cache;
  bool force = false;
  bool all = false;
  std::string transform = "identity";
  double mu = 0.0;
  double sigma = 1.0;
  std::string kind = "c_p";
  int m = 0;
  double n = 0.0;
  std::vector<int> removals;
  unsigned workers = 0;

  nlohmann::json to_json() const;  // everything except `out`
};

std::string config_hash(const RunConfig& cfg);

struct Context {
  RunConfig cfg;
  std::unique_ptr<CalibrationCache> cache;
  nlohmann::json provenance = nlohmann::json::array();

  McOptions mc() const { return {cfg.reps, cfg.seed, cfg.workers}; }
  nlohmann::json meta() const;
  void emit(const std::string& name, const std::string& ext, const std::string& content) const;
};

ProgressiveSample load_sample(const RunConfig& cfg);

// Calibrated constants at exact level `level`; each lookup is recorded in the
// context's provenance.
double d_for(Context& ctx, const GeneralizedScheme& s, Probability level);
double c_for(Context& ctx, const GeneralizedScheme& s, Probability level);
std::pair<double, double> b3_constants(Context& ctx, const GeneralizedScheme& s, Probability tau);
Band make_band(Context& ctx, const std::string& method, const ProgressiveSample& sample, Probability level);

int run_reproduce(Context& ctx);

}  // namespace expband::cli
