// expband: confidence regions and bands for the two-parameter exponential model
// from progressively type-II censored data.

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "cli.hpp"
#include "expband/bands.hpp"
#include "expband/error.hpp"
#include "expband/metrics.hpp"
#include "expband/regions.hpp"

namespace expband::cli {
namespace {

// Insulating fluid data, also shipped as data/insulating_fluid.csv.
constexpr const char* kBundledSample =
    "time,removed\n0.19,0\n0.78,0\n0.96,3\n1.31,0\n2.78,3\n4.85,0\n6.50,0\n7.35,5\n";

std::string default_cache_path() {
  if (const char* env = std::getenv("EXPBAND_CACHE"); env && *env) return env;
  if (const char* home = std::getenv("HOME"); home && *home) {
    return std::string(home) + "/.cache/expband/calibration.jsonl";
  }
  return "expband-calibration.jsonl";
}

}  // namespace

double record(Context& ctx, const CalibrationResult& r) {
  ctx.provenance.push_back(r.to_json());
  return r.value;
}

double d_for(Context& ctx, const GeneralizedScheme& s, Probability level) {
  return record(ctx, cached_dp(ctx.cache.get(), s.m(), s.n(), Probability(level.complement()), ctx.mc(),
                               ctx.cfg.force));
}

double c_for(Context& ctx, const GeneralizedScheme& s, Probability level) {
  return record(ctx, cached_cp(ctx.cache.get(), s.m(), Probability(level.complement()), ctx.mc(),
                               ctx.cfg.force));
}

// B3 at exact level tau: returns (p, c).
std::pair<double, double> b3_constants(Context& ctx, const GeneralizedScheme& s, Probability tau) {
  const auto r = cached_p_of_tau(ctx.cache.get(), s.m(), tau, ctx.mc(), ctx.cfg.force);
  ctx.provenance.push_back(r.to_json());
  return {r.value, *r.c};
}

Band make_band(Context& ctx, const std::string& method, const ProgressiveSample& sample, Probability level) {
  const auto& scheme = sample.scheme();
  const MleEstimate est = mle(sample);
  const Probability p(level.complement());
  auto finish = [&](Band b) { return b.with_scale(sample.scale()); };
  if (method == "b1") return finish(band_b1(est, scheme, p));
  if (method == "b2") return finish(band_b2(est, scheme, p));
  if (method == "b3") {
    const auto [pt, c] = b3_constants(ctx, scheme, level);
    return finish(band_b3(est, scheme, c, Probability(1.0 - pt), level));
  }
  if (method == "b4" || method == "b4p" || method == "b4pp") {
    const double d = d_for(ctx, scheme, level);
    Band b4 = band_b4(est, d, level);
    if (method == "b4") return finish(b4);
    return finish(trim_band(b4, build_c4(est, d, method == "b4pp"), ctx.cfg.grid));
  }
  throw DomainError("unknown band method '" + method + "' (b1 b2 b3 b4 b4p b4pp)");
}

nlohmann::json RunConfig::to_json() const {
  return {{"command", command}, {"data", data},     {"methods", methods},       {"level", level},
          {"reps", reps},       {"replicates", replicates}, {"seed", seed},     {"grid", grid},
          {"points", points},   {"formats", formats}, {"force", force},       {"all", all},
          {"transform", transform}, {"mu", mu},     {"sigma", sigma},           {"kind", kind},
          {"m", m},             {"n", n},           {"removals", removals}};
}

std::string config_hash(const RunConfig& cfg) {
  // FNV-1a over the canonical JSON text.
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : cfg.to_json().dump()) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

nlohmann::json Context::meta() const {
  return {{"config_hash", config_hash(cfg)},
          {"seed", cfg.seed},
          {"reps", cfg.reps},
          {"config", cfg.to_json()},
          {"calibration", provenance}};
}

void Context::emit(const std::string& name, const std::string& ext, const std::string& content) const {
  if (cfg.out.empty()) {
    std::cout << content;
    if (!content.empty() && content.back() != '\n') std::cout << '\n';
    return;
  }
  std::filesystem::create_directories(cfg.out);
  const auto path = std::filesystem::path(cfg.out) / (name + "." + ext);
  std::ofstream f(path, std::ios::binary);
  if (!f) throw DomainError("cannot write output file " + path.string());
  f << content;
}

ProgressiveSample load_sample(const RunConfig& cfg) {
  ProgressiveSample sample = [&] {
    if (cfg.data.empty() || cfg.data == "bundled") {
      std::istringstream in(kBundledSample);
      return read_sample_csv(in);
    }
    return read_sample_csv_file(cfg.data);
  }();
  if (cfg.transform == "identity") return sample;
  if (cfg.transform == "log") return g_transform(sample, MonotoneMap::log());
  throw DomainError("invalid transform '" + cfg.transform + "' (expected identity or log)");
}

namespace {

Probability level_of(const RunConfig& cfg) {
  if (!(cfg.level > 0.0 && cfg.level < 1.0)) throw DomainError("--level must lie in (0, 1)");
  return Probability(cfg.level);
}

std::vector<std::string> methods_or(const RunConfig& cfg, std::vector<std::string> all) {
  if (cfg.all || cfg.methods.empty()) return all;
  return cfg.methods;
}

bool wants(const RunConfig& cfg, const std::string& fmt) {
  return std::find(cfg.formats.begin(), cfg.formats.end(), fmt) != cfg.formats.end();
}

int cmd_fit(Context& ctx) {
  const auto sample = load_sample(ctx.cfg);
  const MleEstimate est = mle(sample);
  const Umvue u = umvue(est, sample.scheme());
  nlohmann::json j = {{"mu_hat", est.mu_hat},     {"sigma_hat", est.sigma_hat},
                      {"mu_tilde", u.mu_tilde},   {"sigma_tilde", u.sigma_tilde},
                      {"m", sample.m()},          {"n", sample.scheme().n()},
                      {"gammas", sample.scheme().gammas()}, {"scale", sample.scale().name()},
                      {"meta", ctx.meta()}};
  ctx.emit("fit", "json", j.dump(2));
  return 0;
}

int cmd_region(Context& ctx) {
  const auto sample = load_sample(ctx.cfg);
  const auto& scheme = sample.scheme();
  const MleEstimate est = mle(sample);
  const Probability level = level_of(ctx.cfg);
  const Probability p(level.complement());
  for (const auto& method : methods_or(ctx.cfg, {"c1", "c2", "c3", "c4p", "c4pp"})) {
    Region region = [&]() -> Region {
      if (method == "c1") return build_c1(est, scheme, p);
      if (method == "c2") return build_c2(est, scheme, p);
      if (method == "c3") return build_c3(est, scheme, c_for(ctx, scheme, level));
      if (method == "c4p" || method == "c4pp") return build_c4(est, d_for(ctx, scheme, level), method == "c4pp");
      throw DomainError("unknown region method '" + method + "' (c1 c2 c3 c4p c4pp)");
    }();
    auto j = region_to_json(region, ctx.cfg.points);
    j["level"] = level.value();
    j["meta"] = ctx.meta();
    ctx.emit("region_" + method, "json", j.dump(2));
  }
  return 0;
}

int cmd_band(Context& ctx) {
  const auto sample = load_sample(ctx.cfg);
  const MleEstimate est = mle(sample);
  for (const auto& method : methods_or(ctx.cfg, {"b1", "b2", "b3", "b4", "b4p", "b4pp"})) {
    const Band band = make_band(ctx, method, sample, level_of(ctx.cfg));
    if (wants(ctx.cfg, "json")) {
      auto j = band_to_json(band, ctx.cfg.points);
      j["meta"] = ctx.meta();
      ctx.emit("band_" + method, "json", j.dump(2));
    }
    if (wants(ctx.cfg, "csv")) {
      std::ostringstream os;
      write_band_csv(os, band, ctx.cfg.points);
      ctx.emit("band_" + method, "csv", os.str());
    }
    if (wants(ctx.cfg, "svg")) {
      std::ostringstream os;
      write_band_svg(os, band, est.as_locscale());
      ctx.emit("band_" + method, "svg", os.str());
    }
  }
  return 0;
}

int cmd_metrics(Context& ctx) {
  const auto sample = load_sample(ctx.cfg);
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& method : methods_or(ctx.cfg, {"b1", "b2", "b3", "b4", "b4p", "b4pp"})) {
    rows.push_back(band_metrics(make_band(ctx, method, sample, level_of(ctx.cfg))).to_json());
  }
  nlohmann::json j = {{"level", ctx.cfg.level}, {"rows", rows}, {"meta", ctx.meta()}};
  ctx.emit("metrics", "json", j.dump(2));
  return 0;
}

int cmd_calibrate(Context& ctx) {
  const auto& cfg = ctx.cfg;
  if (cfg.m < 2) throw DomainError("calibrate needs --m >= 2");
  const Probability level = level_of(cfg);
  const auto kind = calibration_kind_from_string(cfg.kind);
  CalibrationResult r;
  switch (kind) {
    case CalibrationKind::c_p:
      r = cached_cp(ctx.cache.get(), cfg.m, Probability(level.complement()), ctx.mc(), cfg.force);
      break;
    case CalibrationKind::d_p: {
      const double n = cfg.n > 0 ? cfg.n : cfg.m;
      r = cached_dp(ctx.cache.get(), cfg.m, n, Probability(level.complement()), ctx.mc(), cfg.force);
      break;
    }
    case CalibrationKind::p_of_tau:
      r = cached_p_of_tau(ctx.cache.get(), cfg.m, level, ctx.mc(), cfg.force);
      break;
    case CalibrationKind::tau: {
      const auto c = cached_cp(ctx.cache.get(), cfg.m, Probability(level.complement()), ctx.mc(), cfg.force);
      ctx.provenance.push_back(c.to_json());
      r.key = {CalibrationKind::tau, cfg.m, 0.0, level.value(), cfg.reps, cfg.seed};
      r.value = tau_of_p(cfg.m, Probability(level.complement()), c.value).value();
      r.c = c.value;
      break;
    }
  }
  ctx.provenance.push_back(r.to_json());
  nlohmann::json j = r.to_json();
  j["meta"] = ctx.meta();
  ctx.emit("calibrate_" + cfg.kind, "json", j.dump(2));
  return 0;
}

GeneralizedScheme scheme_of(const RunConfig& cfg) {
  if (!cfg.removals.empty()) {
    int n = static_cast<int>(cfg.removals.size());
    for (int r : cfg.removals) n += r;
    return CensoringScheme(n, cfg.removals);
  }
  return load_sample(cfg).scheme();
}

int cmd_coverage(Context& ctx) {
  const auto& cfg = ctx.cfg;
  const auto scheme = scheme_of(cfg);
  const Probability level = level_of(cfg);
  const LocScale theta(cfg.mu, cfg.sigma);
  nlohmann::json reports = nlohmann::json::array();
  for (const auto& method :
       methods_or(cfg, {"c1", "c2", "c3", "c4p", "c4pp", "b1", "b2", "b3", "b4", "b4p", "b4pp"})) {
    CoverageSpec spec{coverage_target_from_string(method)};
    spec.p = level.complement();
    spec.expected = level.value();
    spec.grid = cfg.grid;
    if (method == "c3") spec.c_p = c_for(ctx, scheme, level);
    if (method == "b3") std::tie(spec.p, spec.c_p) = b3_constants(ctx, scheme, level);
    if (method.rfind("c4", 0) == 0 || method.rfind("b4", 0) == 0) spec.d_p = d_for(ctx, scheme, level);
    reports.push_back(coverage_experiment(spec, theta, scheme, cfg.replicates, cfg.seed, cfg.workers).to_json());
  }
  nlohmann::json j = {{"reports", reports}, {"meta", ctx.meta()}};
  ctx.emit("coverage", "json", j.dump(2));
  return 0;
}

int cmd_simulate(Context& ctx) {
  const auto scheme = scheme_of(ctx.cfg);
  if (!scheme.design()) throw DomainError("simulate needs an integer removal design");
  RandomStream rs(ctx.cfg.seed, 0);
  const auto sample = simulate_sample(LocScale(ctx.cfg.mu, ctx.cfg.sigma), scheme, rs);
  std::ostringstream os;
  os << "# config_hash=" << config_hash(ctx.cfg) << " seed=" << ctx.cfg.seed << " mu=" << ctx.cfg.mu
     << " sigma=" << ctx.cfg.sigma << '\n';
  write_sample_csv(os, sample);
  ctx.emit("sample", "csv", os.str());
  return 0;
}

void print_error(const std::string& kind, const std::string& message) {
  nlohmann::json j = {{"error", {{"kind", kind}, {"message", message}}}};
  std::cerr << j.dump() << '\n';
}

}  // namespace
}  // namespace expband::cli

int main(int argc, char** argv) {
  using namespace expband;
  using namespace expband::cli;
  CLI::App app{"Exact confidence regions and bands for the two-parameter exponential model"};
  app.require_subcommand(1);
  app.fallthrough();

  RunConfig cfg;
  std::string config_path;
  std::string removals;
  auto* o_config = app.add_option("--config", config_path, "JSON config file (flags take precedence)");
  (void)o_config;
  auto* o_data = app.add_option("--data", cfg.data, "sample CSV (time,removed); default: bundled insulating fluid data");
  auto* o_method = app.add_option("--method", cfg.methods, "method(s): c1 c2 c3 c4p c4pp / b1 b2 b3 b4 b4p b4pp")->delimiter(',');
  auto* o_level = app.add_option("--level", cfg.level, "exact confidence level (tau for b3)");
  auto* o_reps = app.add_option("--reps", cfg.reps, "Monte-Carlo draws for calibration");
  auto* o_repl = app.add_option("--replicates", cfg.replicates, "coverage replicates");
  auto* o_seed = app.add_option("--seed", cfg.seed, "random seed");
  auto* o_grid = app.add_option("--grid", cfg.grid, "grid points for trimmed bands");
  auto* o_points = app.add_option("--points", cfg.points, "points for polylines and CSV output");
  auto* o_out = app.add_option("--out", cfg.out, "output directory (default: stdout)");
  auto* o_format = app.add_option("--format", cfg.formats, "csv,json,svg")->delimiter(',');
  auto* o_cache = app.add_option("--cache", cfg.cache, "calibration cache file");
  auto* o_force = app.add_flag("--force", cfg.force, "recompute calibration constants");
  auto* o_all = app.add_flag("--all", cfg.all, "all methods");
  auto* o_transform = app.add_option("--transform", cfg.transform, "identity or log");
  auto* o_mu = app.add_option("--mu", cfg.mu, "true location (coverage, simulate)");
  auto* o_sigma = app.add_option("--sigma", cfg.sigma, "true scale (coverage, simulate)");
  auto* o_kind = app.add_option("--kind", cfg.kind, "c_p, d_p, tau or p_of_tau");
  auto* o_m = app.add_option("--m", cfg.m, "observed failures (calibrate)");
  auto* o_n = app.add_option("--n", cfg.n, "units on test (calibrate d_p)");
  auto* o_removals = app.add_option("--removals", removals, "removal design R_1,...,R_m (coverage, simulate)");
  auto* o_workers = app.add_option("--workers", cfg.workers, "worker threads (0: all cores)");

  for (const char* name : {"fit", "region", "band", "metrics", "calibrate", "coverage", "simulate", "reproduce"}) {
    app.add_subcommand(name)->fallthrough();
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    print_error("parse", e.what());
    return exit_code(ErrorKind::parse);
  }

  try {
    cfg.command = app.get_subcommands().front()->get_name();
    if (!config_path.empty()) {
      std::ifstream in(config_path);
      if (!in) throw ParseError("cannot open config file " + config_path);
      nlohmann::json j;
      try {
        j = nlohmann::json::parse(in);
      } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("config file: ") + e.what());
      }
      auto take = [&](CLI::Option* opt, const char* key, auto& field) {
        if (opt->count() == 0 && j.contains(key)) field = j.at(key).get<std::decay_t<decltype(field)>>();
      };
      try {
        take(o_data, "data", cfg.data);
        take(o_method, "method", cfg.methods);
        take(o_level, "level", cfg.level);
        take(o_reps, "reps", cfg.reps);
        take(o_repl, "replicates", cfg.replicates);
        take(o_seed, "seed", cfg.seed);
        take(o_grid, "grid", cfg.grid);
        take(o_points, "points", cfg.points);
        take(o_out, "out", cfg.out);
        take(o_format, "format", cfg.formats);
        take(o_cache, "cache", cfg.cache);
        take(o_force, "force", cfg.force);
        take(o_all, "all", cfg.all);
        take(o_transform, "transform", cfg.transform);
        take(o_mu, "mu", cfg.mu);
        take(o_sigma, "sigma", cfg.sigma);
        take(o_kind, "kind", cfg.kind);
        take(o_m, "m", cfg.m);
        take(o_n, "n", cfg.n);
        take(o_workers, "workers", cfg.workers);
        if (o_removals->count() == 0 && j.contains("removals")) cfg.removals = j.at("removals").get<std::vector<int>>();
      } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("config file: ") + e.what());
      }
    }
    if (!removals.empty()) {
      std::stringstream ss(removals);
      std::string item;
      while (std::getline(ss, item, ',')) {
        try {
          cfg.removals.push_back(std::stoi(item));
        } catch (const std::exception&) {
          throw ParseError("--removals: cannot parse '" + item + "'");
        }
      }
    }
    if (!(cfg.level > 0.0 && cfg.level < 1.0)) throw DomainError("--level must lie in (0, 1)");
    if (cfg.reps < 1 || cfg.replicates < 1) throw DomainError("--reps and --replicates must be >= 1");
    if (cfg.cache.empty()) cfg.cache = default_cache_path();

    Context ctx;
    ctx.cfg = cfg;
    ctx.cache = std::make_unique<CalibrationCache>(cfg.cache);
    const auto& cmd = cfg.command;
    if (cmd == "fit") return cmd_fit(ctx);
    if (cmd == "region") return cmd_region(ctx);
    if (cmd == "band") return cmd_band(ctx);
    if (cmd == "metrics") return cmd_metrics(ctx);
    if (cmd == "calibrate") return cmd_calibrate(ctx);
    if (cmd == "coverage") return cmd_coverage(ctx);
    if (cmd == "simulate") return cmd_simulate(ctx);
    if (cmd == "reproduce") return run_reproduce(ctx);
    throw ParseError("unknown command " + cmd);
  } catch (const Error& e) {
    print_error(to_string(e.kind()), e.what());
    return exit_code(e.kind());
  } catch (const std::exception& e) {
    print_error("internal", e.what());
    return 1;
  }
}
