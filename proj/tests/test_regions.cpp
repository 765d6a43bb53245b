#include <boost/math/distributions/chi_squared.hpp>
#include <boost/math/distributions/fisher_f.hpp>
#include <cmath>
#include <random>

#include "doctest.h"
#include "expband/bands.hpp"
#include "expband/calibration.hpp"
#include "expband/regions.hpp"
#include "oracles.hpp"

using namespace expband;
namespace bm = boost::math;

namespace {

const CensoringScheme kFluid(19, {0, 0, 3, 0, 3, 0, 0, 5});
const MleEstimate kFit{0.19, 8.635};

}  // namespace

TEST_CASE("uniform level split") {
  const auto s = uniform_split(Probability(0.0975));
  CHECK(s.q1 == doctest::Approx(0.025).epsilon(1e-12));
  CHECK(s.q2 == doctest::Approx(0.975).epsilon(1e-12));
  CHECK_THROWS_AS(uniform_split(Probability(0.0)), DomainError);
}

TEST_CASE("C1 and C2 constants against boost quantiles") {
  const Probability p(0.0975);
  const auto c1 = build_c1(kFit, kFluid, p);
  bm::chi_squared chi14(14), chi16(16);
  CHECK(c1.sigma_lo == doctest::Approx(2 * 8 * 8.635 / bm::quantile(chi14, 0.975)).epsilon(1e-12));
  CHECK(c1.sigma_hi == doctest::Approx(2 * 8 * 8.635 / bm::quantile(chi14, 0.025)).epsilon(1e-12));
  CHECK(c1.a(0.025, 10.0) == doctest::Approx(0.19 + 10.0 * std::log(0.025) / 19.0));

  const auto c2 = build_c2(kFit, kFluid, p);
  bm::fisher_f f(2, 14);
  CHECK(c2.mu_lo == doctest::Approx(0.19 - 8 * 8.635 * bm::quantile(f, 0.975) / (7 * 19.0)).epsilon(1e-12));
  CHECK(c2.mu_hi == doctest::Approx(0.19 - 8 * 8.635 * bm::quantile(f, 0.025) / (7 * 19.0)).epsilon(1e-12));
  CHECK(c2.chi2_q1 == doctest::Approx(bm::quantile(chi16, 0.025)).epsilon(1e-12));
  CHECK(c2.b(c2.chi2_q1, 0.0) == doctest::Approx(2 * (19 * 0.19 + 8 * 8.635) / bm::quantile(chi16, 0.025)));

  CHECK(c1.contains({0.0, 9.0}));
  CHECK_FALSE(c1.contains({0.5, 9.0}));
  CHECK(c2.contains({0.0, 9.0}));
  CHECK_FALSE(c2.contains({0.0, 1.0}));
}

TEST_CASE("C3 endpoints solve the defining equation at mu_hat") {
  for (int m : {2, 8, 25, 100}) {
    const double c = -m - 3.0;
    std::vector<double> g;
    for (int j = 0; j < m; ++j) g.push_back(m + 5.0 - j);
    const auto r = build_c3({1.0, 2.0}, GeneralizedScheme(g), c);
    CHECK(r.statistic({1.0, r.z_m1}) == doctest::Approx(c).epsilon(1e-10));
    CHECK(r.statistic({1.0, r.z_0}) == doctest::Approx(c).epsilon(1e-10));
    // the statistic at mu_hat peaks at sigma = m sigma_hat / (m+1)
    const double peak = m * 2.0 / (m + 1);
    CHECK(r.z_m1 < peak);
    CHECK(peak < r.z_0);
    CHECK(r.contains({1.0, peak}));
    CHECK_FALSE(r.contains({1.0 + 1e-9, peak}));
    CHECK(r.g(r.z_m1) == doctest::Approx(0.0).epsilon(1e-9));
  }
}

TEST_CASE("C3 guard and the collapse point") {
  CHECK_THROWS_AS(build_c3(kFit, kFluid, -8.0), DomainError);
  CHECK_THROWS_AS(build_c3(kFit, kFluid, -7.0), DomainError);
  // The Lambert argument reaches -1/e at c* = (m+1) ln(1+1/m) - (m+1), just above -m.
  const int m = 8;
  const double c_star = (m + 1) * std::log1p(1.0 / m) - (m + 1);
  CHECK(c_star > -m);
  CHECK(detail::c3_lambert_argument(m, c_star) == doctest::Approx(-std::exp(-1.0)).epsilon(1e-14));
  const auto [z1, z0] = detail::c3_endpoints(m, 8.635, c_star);
  CHECK(z1 == doctest::Approx(m * 8.635 / (m + 1)).epsilon(1e-6));
  CHECK(z0 == doctest::Approx(m * 8.635 / (m + 1)).epsilon(1e-6));
  CHECK(detail::delta_prob_unchecked(m, c_star) == doctest::Approx(0.0));
}

TEST_CASE("Delta integral against the closed form") {
  for (auto [m, c] : {std::pair{2, -10.0}, std::pair{8, -11.587}, std::pair{25, -28.0}, std::pair{5, -9.0}}) {
    const double closed = tau_of_p(m, Probability(0.5), c).value() - 0.5;
    CHECK(comprehensive_convex_hull_delta_prob(m, c) == doctest::Approx(closed).epsilon(1e-6));
  }
}

TEST_CASE("C4 pivot region at the data example's d") {
  const KsPivotRegion a(0.249, false), b(0.249, true);
  CHECK(a.s_lo() == doctest::Approx(0.3353).epsilon(1e-3));
  CHECK(a.s_hi() == doctest::Approx(2.9829).epsilon(1e-3));
  CHECK(b.s_hi() == doctest::Approx(1.9942).epsilon(1e-3));
  CHECK(b.s_lo() == doctest::Approx(a.s_lo()));
  CHECK(a.h(0.0) == doctest::Approx(-std::log(0.249)));
  CHECK(a.contains(1.0, 0.0));
  CHECK_FALSE(b.contains(1.0, -0.01));
  CHECK(a.contains(1.0, -0.01));
  // o and lower meet at both ends
  CHECK(a.o(a.s_lo()) == doctest::Approx(a.lower(a.s_lo())).epsilon(1e-9));
  CHECK(a.o(a.s_hi()) == doctest::Approx(a.lower(a.s_hi())).epsilon(1e-9));
  CHECK_THROWS_AS(KsPivotRegion(0.0, false), DomainError);
  CHECK(std::isinf(KsPivotRegion(0.6, false).s_hi()));
}

TEST_CASE("C4 membership equals the brute-force KS distance test") {
  std::mt19937_64 gen(3);
  std::uniform_real_distribution<double> t(-1.5, 1.5), ls(-1.5, 1.5);
  for (bool trimmed : {false, true}) {
    const auto r = build_c4(kFit, 0.249, trimmed);
    int inside = 0;
    for (int i = 0; i < 3000; ++i) {
      const double mu = 0.19 + 8.635 * t(gen), sigma = 8.635 * std::exp(ls(gen));
      // relative to the fit: F_theta vs F_hat on the fit's standardized axis
      const double d = oracle::ks_grid((mu - 0.19) / 8.635, sigma / 8.635);
      if (std::abs(d - 0.249) < 1e-6) continue;
      const bool expect = d <= 0.249 && (!trimmed || mu <= 0.19);
      CHECK(r.contains({mu, sigma}) == expect);
      inside += expect;
    }
    CHECK(inside > 100);
  }
}

TEST_CASE("C4' slices are intervals (connected region)") {
  // For fixed s the feasible t's found by brute force form one interval that
  // matches [lower(s), o(s)].
  const KsPivotRegion r(0.249, false);
  for (int i = 1; i < 20; ++i) {
    const double s = r.s_lo() + (r.s_hi() - r.s_lo()) * i / 20.0;
    int runs = 0;
    bool prev = false;
    double first = NAN, last = NAN;
    for (int j = 0; j <= 4000; ++j) {
      const double tt = -3.0 + 6.0 * j / 4000.0;
      // pivot (s, t) is theta-hat = (t, s) relative to theta = (0, 1)
      const bool in = oracle::ks_grid(tt, s, 4000) <= 0.249;
      if (in && !prev) ++runs, first = tt;
      if (in) last = tt;
      prev = in;
    }
    CHECK(runs == 1);
    CHECK(first == doctest::Approx(r.lower(s)).epsilon(2e-3).scale(1.0));
    CHECK(last == doctest::Approx(r.o(s)).epsilon(2e-3).scale(1.0));
  }
}

TEST_CASE("region JSON round trip") {
  const Probability p(0.1);
  const std::vector<Region> regions{build_c1(kFit, kFluid, p), build_c2(kFit, kFluid, p),
                                    build_c3(kFit, kFluid, -11.0), build_c4(kFit, 0.249, false),
                                    build_c4(kFit, 0.249, true)};
  std::mt19937_64 gen(5);
  std::uniform_real_distribution<double> mu(-4.0, 1.0), sg(1.0, 30.0);
  for (const auto& r : regions) {
    const auto j = region_to_json(r, 64);
    const auto back = region_from_json(nlohmann::json::parse(j.dump()));
    CHECK(region_tag(back) == region_tag(r));
    CHECK(region_to_json(back, 64) == j);
    for (int i = 0; i < 500; ++i) {
      const LocScale th(mu(gen), sg(gen));
      CHECK(region_membership(back, th) == region_membership(r, th));
    }
    CHECK(j.at("boundary").size() >= 64);
  }
}
