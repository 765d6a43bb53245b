#include "expband/calibration.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <algorithm>
#include <cerrno>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <thread>

#include "expband/bands.hpp"
#include "expband/error.hpp"
#include "expband/random.hpp"

namespace expband {
namespace {

unsigned worker_count(unsigned requested) {
  if (requested > 0) return requested;
  return std::max(1u, std::thread::hardware_concurrency());
}

// out[i] = draw(RandomStream(seed, i)), split into contiguous replicate ranges.
std::vector<double> parallel_draws(const McOptions& opt,
                                   const std::function<double(RandomStream&)>& draw) {
  if (opt.reps < 1) throw DomainError("reps must be >= 1");
  std::vector<double> out(static_cast<std::size_t>(opt.reps));
  const unsigned w = std::min<unsigned>(worker_count(opt.workers),
                                        static_cast<unsigned>(std::min<std::int64_t>(opt.reps, 64)));
  auto run = [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      RandomStream rs(opt.seed, i);
      out[i] = draw(rs);
    }
  };
  if (w <= 1) {
    run(0, out.size());
    return out;
  }
  std::vector<std::thread> threads;
  const std::size_t chunk = (out.size() + w - 1) / w;
  for (unsigned t = 0; t < w; ++t) {
    const std::size_t b = t * chunk;
    const std::size_t e = std::min(out.size(), b + chunk);
    if (b < e) threads.emplace_back(run, b, e);
  }
  for (auto& th : threads) th.join();
  return out;
}

void check_m(int m) {
  if (m < 2) throw DomainError("calibration needs m >= 2");
}

void check_open(Probability p, const char* what) {
  if (!(p.value() > 0.0 && p.value() < 1.0)) throw DomainError(std::string(what) + " must lie in (0, 1)");
}

}  // namespace

std::string to_string(CalibrationKind kind) {
  switch (kind) {
    case CalibrationKind::c_p: return "c_p";
    case CalibrationKind::d_p: return "d_p";
    case CalibrationKind::tau: return "tau";
    case CalibrationKind::p_of_tau: return "p_of_tau";
  }
  return "unknown";
}

CalibrationKind calibration_kind_from_string(const std::string& s) {
  for (auto k : {CalibrationKind::c_p, CalibrationKind::d_p, CalibrationKind::tau, CalibrationKind::p_of_tau}) {
    if (to_string(k) == s) return k;
  }
  throw ParseError("unknown calibration kind '" + s + "'");
}

std::vector<double> cp_draws(int m, const McOptions& opt) {
  check_m(m);
  return parallel_draws(opt, [m](RandomStream& rs) {
    double acc = 0.0;
    for (int j = 0; j < m - 1; ++j) acc += rs.exponential();
    const double y = acc / m;
    const double z = rs.exponential();
    return (m + 1) * std::log(y) - m * y - z;
  });
}

std::vector<double> dp_draws(int m, double n, const McOptions& opt) {
  check_m(m);
  if (!(n >= m)) throw DomainError("d_p calibration needs n >= m");
  return parallel_draws(opt, [m, n](RandomStream& rs) {
    const double s = rs.exponential() / n;
    double acc = 0.0;
    for (int j = 0; j < m - 1; ++j) acc += rs.exponential();
    return ks_distance(LocScale(s, acc / m));
  });
}

double empirical_quantile(const std::vector<double>& sorted, double q) {
  if (sorted.empty()) throw DomainError("quantile of an empty draw set");
  const auto n = static_cast<double>(sorted.size());
  auto idx = static_cast<std::int64_t>(std::ceil(q * n)) - 1;
  idx = std::clamp<std::int64_t>(idx, 0, static_cast<std::int64_t>(sorted.size()) - 1);
  return sorted[static_cast<std::size_t>(idx)];
}

double sectioning_std_error(const std::vector<double>& draws, double q, int batches) {
  const std::size_t b = std::min<std::size_t>(static_cast<std::size_t>(batches), draws.size() / 2);
  if (b < 2) return std::numeric_limits<double>::infinity();
  const std::size_t size = draws.size() / b;
  std::vector<double> qs;
  std::vector<double> buf;
  for (std::size_t i = 0; i < b; ++i) {
    buf.assign(draws.begin() + static_cast<std::ptrdiff_t>(i * size),
               draws.begin() + static_cast<std::ptrdiff_t>((i + 1) * size));
    std::sort(buf.begin(), buf.end());
    qs.push_back(empirical_quantile(buf, q));
  }
  double mean = 0.0;
  for (double v : qs) mean += v;
  mean /= static_cast<double>(b);
  double ss = 0.0;
  for (double v : qs) ss += (v - mean) * (v - mean);
  return std::sqrt(ss / static_cast<double>(b - 1) / static_cast<double>(b));
}

CalibrationResult calibrate_cp(int m, Probability p, const McOptions& opt) {
  check_open(p, "p");
  auto draws = cp_draws(m, opt);
  CalibrationResult r;
  r.key = {CalibrationKind::c_p, m, 0.0, p.value(), opt.reps, opt.seed};
  r.mc_std_error = sectioning_std_error(draws, p.value());
  std::sort(draws.begin(), draws.end());
  r.value = empirical_quantile(draws, p.value());
  return r;
}

CalibrationResult calibrate_dp(int m, double n, Probability p, const McOptions& opt) {
  check_open(p, "p");
  auto draws = dp_draws(m, n, opt);
  CalibrationResult r;
  r.key = {CalibrationKind::d_p, m, n, p.value(), opt.reps, opt.seed};
  r.mc_std_error = sectioning_std_error(draws, p.complement());
  std::sort(draws.begin(), draws.end());
  r.value = empirical_quantile(draws, p.complement());
  return r;
}

Probability tau_of_p(int m, Probability p, double c_p) {
  check_m(m);
  check_open(p, "p");
  if (!(c_p < -m)) throw DomainError("tau_of_p needs c_p < -m");
  const double arg = -(static_cast<double>(m) / (m + 1)) * std::exp(c_p / (m + 1));
  const double y = -(m + 1) * special::lambert_w0(arg);
  const double z = m * std::exp(1.0 + c_p / (m + 1));
  // e^c m^(m+1) / (2 (m-2)!) in log space.
  const double log_front = c_p + (m + 1) * std::log(m) - std::log(2.0) - std::lgamma(m - 1.0);
  const double t1 = std::exp(log_front) * (1.0 / (y * y) - 1.0 / (z * z));
  const double t2 = std::exp((m - 1) * std::log(z / (m + 1))) *
                    (special::gamma_cdf(m - 1, (m + 1) * y / z) - special::gamma_cdf(m - 1, m + 1.0));
  const double tau = p.complement() + t1 + t2;
  if (!std::isfinite(tau)) throw NumericError("tau_of_p: non-finite result");
  return Probability(std::clamp(tau, 0.0, 1.0));
}

CalibrationResult p_of_tau_draws(int m, Probability tau, const std::vector<double>& draws,
                                 const std::vector<double>& sorted) {
  check_m(m);
  check_open(tau, "tau");
  const double n = static_cast<double>(sorted.size());
  // c(p) must stay below -m: p <= (#draws below -m) / N.
  const auto below = std::lower_bound(sorted.begin(), sorted.end(), static_cast<double>(-m)) - sorted.begin();
  if (below == 0) throw CalibrationError("p_of_tau: no draw below -m");
  auto c_of = [&](double p) { return empirical_quantile(sorted, p); };
  auto f = [&](double p) { return tau_of_p(m, Probability(p), c_of(p)).value() - tau.value(); };
  double lo = 1e-6;
  double hi = std::min(static_cast<double>(below) / n, 1.0 - 1e-6);
  if (!(f(lo) > 0.0) || !(f(hi) < 0.0)) {
    throw CalibrationError("p_of_tau: tau = " + std::to_string(tau.value()) +
                           " is not bracketed for m = " + std::to_string(m));
  }
  for (int i = 0; i < 60; ++i) {
    const double mid = 0.5 * (lo + hi);
    if (f(mid) > 0.0) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  const double achieved = f(lo) + tau.value();
  if (std::abs(achieved - tau.value()) > 1e-4) {
    throw CalibrationError("p_of_tau: achieved tau " + std::to_string(achieved) +
                           " misses the target by more than 1e-4");
  }
  CalibrationResult r;
  r.key = {CalibrationKind::p_of_tau, m, 0.0, tau.value(), static_cast<std::int64_t>(sorted.size()), 0};
  r.value = lo;
  r.c = c_of(lo);
  r.tau = achieved;
  r.mc_std_error = draws.empty() ? std::numeric_limits<double>::infinity()
                                 : sectioning_std_error(draws, lo);
  return r;
}

CalibrationResult p_of_tau(int m, Probability tau, const McOptions& opt) {
  const auto draws = cp_draws(m, opt);
  auto sorted = draws;
  std::sort(sorted.begin(), sorted.end());
  auto r = p_of_tau_draws(m, tau, draws, sorted);
  r.key.seed = opt.seed;
  return r;
}

// ---------------------------------------------------------------- results and cache

namespace {

nlohmann::json finite_or_null(double v) {
  return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr);
}

}  // namespace

nlohmann::json CalibrationResult::to_json() const {
  nlohmann::json j = {{"kind", to_string(key.kind)},
                      {"m", key.m},
                      {"n", key.n},
                      {"level", key.level},
                      {"reps", key.reps},
                      {"seed", key.seed},
                      {"value", value},
                      {"std_error", finite_or_null(mc_std_error)}};
  if (c) j["c"] = *c;
  if (tau) j["tau"] = *tau;
  return j;
}

CalibrationResult CalibrationResult::from_json(const nlohmann::json& j) {
  CalibrationResult r;
  r.key.kind = calibration_kind_from_string(j.at("kind").get<std::string>());
  r.key.m = j.at("m").get<int>();
  r.key.n = j.at("n").get<double>();
  r.key.level = j.at("level").get<double>();
  r.key.reps = j.at("reps").get<std::int64_t>();
  r.key.seed = j.at("seed").get<std::uint64_t>();
  r.value = j.at("value").get<double>();
  const auto& se = j.at("std_error");
  r.mc_std_error = se.is_null() ? std::numeric_limits<double>::infinity() : se.get<double>();
  if (j.contains("c")) r.c = j.at("c").get<double>();
  if (j.contains("tau")) r.tau = j.at("tau").get<double>();
  return r;
}

CalibrationCache::CalibrationCache(std::string path) : path_(std::move(path)) { load(); }

void CalibrationCache::load() {
  std::ifstream in(path_);
  if (!in) return;  // no store yet
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      records_.push_back(CalibrationResult::from_json(nlohmann::json::parse(line)));
    } catch (const std::exception& e) {
      throw IntegrityError("corrupt calibration cache " + path_ + " at line " + std::to_string(lineno) +
                           ": " + e.what());
    }
  }
}

std::optional<CalibrationResult> CalibrationCache::get(const CalibrationKey& key) const {
  std::lock_guard lock(mu_);
  for (auto it = records_.rbegin(); it != records_.rend(); ++it) {
    if (it->key == key) return *it;
  }
  return std::nullopt;
}

void CalibrationCache::put(const CalibrationResult& result) {
  std::lock_guard lock(mu_);
  const std::filesystem::path p(path_);
  if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
  const std::string line = result.to_json().dump() + "\n";
  const int fd = ::open(path_.c_str(), O_WRONLY | O_APPEND | O_CREAT, 0644);
  if (fd < 0) throw CalibrationError("cannot open calibration cache " + path_ + ": " + std::strerror(errno));
  const ssize_t written = ::write(fd, line.data(), line.size());
  const int synced = ::fsync(fd);
  ::close(fd);
  if (written != static_cast<ssize_t>(line.size()) || synced != 0) {
    throw CalibrationError("failed to append to calibration cache " + path_);
  }
  records_.push_back(result);
}

namespace {

template <class Compute>
CalibrationResult through_cache(CalibrationCache* cache, const CalibrationKey& key, bool force,
                                Compute compute) {
  if (cache && !force) {
    if (auto hit = cache->get(key)) return *hit;
  }
  CalibrationResult r = compute();
  if (cache) cache->put(r);
  return r;
}

}  // namespace

CalibrationResult cached_cp(CalibrationCache* cache, int m, Probability p, const McOptions& opt,
                            bool force) {
  return through_cache(cache, {CalibrationKind::c_p, m, 0.0, p.value(), opt.reps, opt.seed}, force,
                       [&] { return calibrate_cp(m, p, opt); });
}

CalibrationResult cached_dp(CalibrationCache* cache, int m, double n, Probability p,
                            const McOptions& opt, bool force) {
  return through_cache(cache, {CalibrationKind::d_p, m, n, p.value(), opt.reps, opt.seed}, force,
                       [&] { return calibrate_dp(m, n, p, opt); });
}

CalibrationResult cached_p_of_tau(CalibrationCache* cache, int m, Probability tau,
                                  const McOptions& opt, bool force) {
  return through_cache(cache, {CalibrationKind::p_of_tau, m, 0.0, tau.value(), opt.reps, opt.seed},
                       force, [&] { return p_of_tau(m, tau, opt); });
}

}  // namespace expband
