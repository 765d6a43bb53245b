#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <random>
#include <unistd.h>

#include <boost/math/distributions/gamma.hpp>
#include <boost/math/distributions/normal.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "doctest.h"
#include "expband/bands.hpp"
#include "expband/calibration.hpp"
#include "expband/censoring.hpp"
#include "expband/error.hpp"
#include "oracles.hpp"

using namespace expband;

namespace {

// P((m+1) ln Y - m Y - Z <= c) = E min(1, exp(c - (m+1) ln Y + m Y)).
double c_stat_cdf(int m, double c) {
  const boost::math::gamma_distribution<double> y(m - 1, 1.0 / m);
  auto f = [&](double v) {
    if (v <= 0.0) return 0.0;
    const double a = (m + 1) * std::log(v) - m * v;
    return boost::math::pdf(y, v) * std::min(1.0, std::exp(c - a));
  };
  const double hi = boost::math::quantile(boost::math::complement(y, 1e-16));
  return boost::math::quadrature::gauss_kronrod<double, 61>::integrate(f, 0.0, hi, 15, 1e-12);
}

double fraction_le(const std::vector<double>& v, double x) {
  return static_cast<double>(std::count_if(v.begin(), v.end(), [x](double w) { return w <= x; })) / v.size();
}

std::string temp_path(const char* name) {
  const auto p = std::filesystem::temp_directory_path() / ("expband_test_" + std::to_string(::getpid()) + name);
  std::filesystem::remove(p);
  return p.string();
}

}  // namespace

TEST_CASE("empirical quantile and sectioning") {
  std::vector<double> v(100);
  std::iota(v.begin(), v.end(), 1.0);
  CHECK(empirical_quantile(v, 0.9) == 90.0);
  CHECK(empirical_quantile(v, 0.905) == 91.0);
  CHECK(empirical_quantile(v, 1e-9) == 1.0);

  // normal draws: se of the 0.9-quantile is sqrt(q(1-q)/N) / phi(z_q)
  std::mt19937_64 gen(3);
  std::normal_distribution<double> nd;
  std::vector<double> d(200000);
  for (auto& x : d) x = nd(gen);
  const boost::math::normal_distribution<double> z;
  const double zq = boost::math::quantile(z, 0.9);
  const double se = std::sqrt(0.09 / d.size()) / boost::math::pdf(z, zq);
  CHECK(sectioning_std_error(d, 0.9) == doctest::Approx(se).epsilon(0.3));
}

TEST_CASE("c statistic draws follow their law") {
  for (int m : {2, 8, 25}) {
    const auto draws = cp_draws(m, {200000, 11, 0});
    for (double c : {-2.0 * m - 4.0, -1.5 * m - 2.0, -1.0 * m - 1.0}) {
      const double p = c_stat_cdf(m, c);
      const double emp = fraction_le(draws, c);
      CHECK(std::abs(emp - p) <= 4.5 * std::sqrt(p * (1 - p) / draws.size()) + 1e-6);
    }
  }
}

TEST_CASE("KS statistic draws match a direct simulation") {
  // direct: simulate the life test, fit, and take the grid KS distance to the truth
  const CensoringScheme sc(19, {0, 0, 3, 0, 3, 0, 0, 5});
  const int direct = 4000;
  std::vector<double> ks(direct);
  for (int r = 0; r < direct; ++r) {
    RandomStream rs(5, static_cast<std::uint64_t>(r));
    const auto est = mle(simulate_sample({0.0, 1.0}, sc, rs));
    ks[r] = oracle::ks_grid(est.mu_hat, est.sigma_hat, 4000);
  }
  const auto draws = dp_draws(8, 19.0, {200000, 9, 0});
  for (double x : {0.1, 0.2, 0.25, 0.35}) {
    const double a = fraction_le(ks, x), b = fraction_le(draws, x);
    const double se = std::sqrt(a * (1 - a) / direct + b * (1 - b) / draws.size());
    CHECK(std::abs(a - b) <= 4.5 * se + 1e-3);
  }
}

TEST_CASE("draws do not depend on the worker count") {
  CHECK(cp_draws(8, {5000, 42, 1}) == cp_draws(8, {5000, 42, 7}));
  CHECK(dp_draws(8, 19.0, {5000, 42, 1}) == dp_draws(8, 19.0, {5000, 42, 3}));
  CHECK(cp_draws(8, {5000, 42, 1}) != cp_draws(8, {5000, 43, 1}));
  const auto a = calibrate_dp(8, 19.0, Probability(0.1), {20000, 1, 2});
  const auto b = calibrate_dp(8, 19.0, Probability(0.1), {20000, 1, 5});
  CHECK(a.value == b.value);
  CHECK(a.mc_std_error == b.mc_std_error);
}

TEST_CASE("exact B3 level exceeds the nominal one") {
  for (int m : {2, 5, 10, 40}) {
    for (double p : {0.05, 0.1, 0.2}) {
      const auto c = calibrate_cp(m, Probability(p), {100000, 7, 0});
      const double tau = tau_of_p(m, Probability(p), c.value).value();
      CHECK(tau > 1.0 - p);
      CHECK(tau < 1.0);
    }
  }
  CHECK_THROWS_AS(tau_of_p(8, Probability(0.1), -7.5), DomainError);
}

TEST_CASE("p(tau) inverts tau(p)") {
  const McOptions opt{100000, 3, 0};
  for (double t : {0.9, 0.9025, 0.95}) {
    const auto r = p_of_tau(8, Probability(t), opt);
    REQUIRE(r.c);
    REQUIRE(r.tau);
    CHECK(*r.tau == doctest::Approx(t).epsilon(1e-3));
    CHECK(tau_of_p(8, Probability(r.value), *r.c).value() == doctest::Approx(*r.tau).epsilon(1e-12));
    // the calibrated c is the p-quantile of the same draws
    const auto c = calibrate_cp(8, Probability(r.value), opt);
    CHECK(c.value == doctest::Approx(*r.c).epsilon(1e-12));
    CHECK(r.value > 1.0 - t);
  }
}

TEST_CASE("calibration cache") {
  const auto path = temp_path("cache.jsonl");
  const McOptions opt{20000, 5, 0};
  {
    CalibrationCache cache(path);
    const auto a = cached_dp(&cache, 8, 19.0, Probability(0.1), opt);
    CHECK(cache.get(a.key));
    // hit: same value, no new record
    const auto b = cached_dp(&cache, 8, 19.0, Probability(0.1), opt);
    CHECK(b.value == a.value);
  }
  std::size_t lines = 0;
  {
    std::ifstream in(path);
    for (std::string l; std::getline(in, l);) ++lines;
  }
  CHECK(lines == 1);
  {
    // reload from disk; force recomputes and appends, latest record wins
    CalibrationCache cache(path);
    auto r = cache.get({CalibrationKind::d_p, 8, 19.0, 0.1, 20000, 5});
    REQUIRE(r);
    r->value = 0.5;
    cache.put(*r);
    CHECK(cache.get(r->key)->value == 0.5);
    const auto f = cached_dp(&cache, 8, 19.0, Probability(0.1), opt, true);
    CHECK(f.value != 0.5);
    CHECK(CalibrationCache(path).get(r->key)->value == f.value);
  }
  {
    // a different key misses
    CalibrationCache cache(path);
    CHECK_FALSE(cache.get({CalibrationKind::d_p, 8, 19.0, 0.1, 20000, 6}));
  }
  {
    std::ofstream out(path, std::ios::app);
    out << "{\"kind\": \"d_p\", \"m\": 8\n";
  }
  CHECK_THROWS_AS(CalibrationCache{path}, IntegrityError);
  std::filesystem::remove(path);
}

TEST_CASE("calibration records round trip through JSON") {
  CalibrationResult r;
  r.value = 0.1;
  r.mc_std_error = std::numeric_limits<double>::infinity();
  r.key = {CalibrationKind::p_of_tau, 8, 0.0, 0.9025, 1000, 1};
  r.c = -11.5;
  r.tau = 0.9026;
  const auto j = r.to_json();
  CHECK(j.at("std_error").is_null());
  const auto back = CalibrationResult::from_json(nlohmann::json::parse(j.dump()));
  CHECK(back.key == r.key);
  CHECK(std::isinf(back.mc_std_error));
  CHECK(*back.c == -11.5);
  CHECK(*back.tau == 0.9026);
  CHECK(calibration_kind_from_string("p_of_tau") == CalibrationKind::p_of_tau);
  CHECK_THROWS_AS(calibration_kind_from_string("nope"), ParseError);
}
