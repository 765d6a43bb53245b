// Acceptance run: one PASS/FAIL line per criterion; exit 1 if any of 1-10 fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "expband/bands.hpp"
#include "expband/calibration.hpp"
#include "expband/censoring.hpp"
#include "expband/metrics.hpp"
#include "expband/regions.hpp"
#include "oracles.hpp"
#include "properties.hpp"

using namespace expband;

namespace {

// Pinned tolerances.
constexpr double kMleTol = 1e-12;
constexpr double kDTol = 0.005;
constexpr double kPTolPP = 0.3;
constexpr double kCTol = 0.1;
constexpr double kCTol25 = 0.15;
constexpr double kTauTolPP = 0.1;
constexpr double kDeltaTol = 1e-6;
constexpr double kKsTol = 1e-5;
constexpr double kWTol = 0.01;
constexpr double kARel = 0.02;
constexpr double kCoverageTol = 0.005;
constexpr std::uint64_t kSeed = 20240607;

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

struct Outcome {
  bool ok;
  std::string detail;
};

struct Options {
  std::int64_t reps = 1'000'000;
  std::int64_t replicates = 100'000;
  unsigned workers = 0;
};

const std::string kFluidCsv = EXPBAND_DATA_DIR "/insulating_fluid.csv";

Outcome c1_mle(const Options&) {
  const auto est = mle(read_sample_csv_file(kFluidCsv));
  const bool ok = std::abs(est.mu_hat - 0.19) <= kMleTol && std::abs(est.sigma_hat - 8.635) <= kMleTol;
  return {ok, "mu_hat=" + fmt("%.15g", est.mu_hat) + " sigma_hat=" + fmt("%.15g", est.sigma_hat) + " (tol 1e-12)"};
}

Outcome c2_d(const Options& o) {
  const auto r = calibrate_dp(8, 19.0, Probability(0.0975), {o.reps, kSeed, o.workers});
  return {std::abs(r.value - 0.249) <= kDTol,
          "d=" + fmt("%.5f", r.value) + " se " + fmt("%.5f", r.mc_std_error) + " (target 0.249 +- 0.005)"};
}

Outcome c3_p_of_tau(const Options& o) {
  const auto r = p_of_tau(8, Probability(0.9025), {o.reps, kSeed, o.workers});
  const double pp = 100.0 * (1.0 - r.value);
  const bool ok = std::abs(pp - 87.3) <= kPTolPP && std::abs(*r.c + 11.587) <= kCTol;
  return {ok, "1-p=" + fmt("%.3f", pp) + "% (87.3 +- 0.3) c=" + fmt("%.4f", *r.c) + " (-11.587 +- 0.1)"};
}

Outcome c4_tau_table(const Options& o) {
  const int ms[] = {2, 5, 10, 100};
  const double ref[] = {91.1, 92.2, 92.5, 92.5};
  bool ok = true;
  std::string d;
  for (int i = 0; i < 4; ++i) {
    const Probability p(0.1);
    const auto c = calibrate_cp(ms[i], p, {o.reps, kSeed, o.workers});
    const double tau = 100.0 * tau_of_p(ms[i], p, c.value).value();
    ok = ok && std::abs(tau - ref[i]) <= kTauTolPP;
    d += "m=" + std::to_string(ms[i]) + ":" + fmt("%.3f", tau) + " ";
  }
  return {ok, d + "(each +- 0.1 pp)"};
}

Outcome c5_table_spots(const Options& o) {
  const auto a = p_of_tau(10, Probability(0.90), {o.reps, kSeed, o.workers});
  const auto b = p_of_tau(25, Probability(0.95), {o.reps, kSeed, o.workers});
  const double pp = 100.0 * (1.0 - a.value);
  const bool ok = std::abs(*a.c + 13.385) <= kCTol && std::abs(pp - 86.9) <= kPTolPP && std::abs(*b.c + 28.806) <= kCTol25;
  return {ok, "(10, 90%): c=" + fmt("%.4f", *a.c) + " 1-p=" + fmt("%.3f", pp) + "%; (25, 95%): c=" + fmt("%.4f", *b.c)};
}

Outcome c6_delta(const Options&) {
  double worst = 0.0;
  for (auto [m, c] : {std::pair{2, -10.0}, std::pair{8, -11.587}, std::pair{25, -28.0}}) {
    const double closed = tau_of_p(m, Probability(0.5), c).value() - 0.5;
    worst = std::max(worst, std::abs(closed - comprehensive_convex_hull_delta_prob(m, c)));
  }
  return {worst <= kDeltaTol, "max |closed form - double integral| = " + fmt("%.3g", worst) + " (tol 1e-6)"};
}

Outcome c7_ks(const Options&) {
  std::mt19937_64 gen(kSeed);
  std::uniform_real_distribution<double> mu(-3.0, 3.0), ls(-2.5, 2.5);
  double worst = 0.0;
  for (int i = 0; i < 10000; ++i) {
    const double m = mu(gen), s = std::exp(ls(gen));
    worst = std::max(worst, std::abs(ks_distance({m, s}) - oracle::ks_grid(m, s)));
  }
  return {worst <= kKsTol, "10000 parameters, max deviation " + fmt("%.3g", worst) + " (tol 1e-5)"};
}

Outcome c8_width_area(const Options& o) {
  const auto sample = read_sample_csv_file(kFluidCsv);
  const auto& sc = sample.scheme();
  const auto est = mle(sample);
  const Probability level(0.9025), p(0.0975);
  const McOptions mc{o.reps, kSeed, o.workers};
  const double d = calibrate_dp(sc.m(), sc.n(), p, mc).value;
  const auto pt = p_of_tau(sc.m(), level, mc);
  auto b4 = band_b4(est, d, level);
  const std::vector<Band> bands{band_b1(est, sc, p),
                                band_b2(est, sc, p),
                                band_b3(est, sc, *pt.c, Probability(1.0 - pt.value), level),
                                b4,
                                trim_band(b4, build_c4(est, d, false), 1024),
                                trim_band(b4, build_c4(est, d, true), 1024)};
  const double w_ref[] = {.54, .57, .59, .50, .50, .47};
  const double a_ref[] = {20.59, 27.53, 18.87, INFINITY, 18.70, 17.90};
  double w[6], a[6];
  bool ok = true;
  std::string det = "W=(";
  for (int i = 0; i < 6; ++i) {
    const auto bm = band_metrics(bands[i]);
    w[i] = bm.max_width;
    a[i] = bm.area_infinite ? INFINITY : bm.area;
    ok = ok && std::abs(w[i] - w_ref[i]) <= kWTol;
    if (std::isinf(a_ref[i])) {
      ok = ok && bm.area_infinite;
    } else {
      ok = ok && !bm.area_infinite && std::abs(a[i] - a_ref[i]) <= kARel * a_ref[i];
    }
    det += fmt("%.4f", w[i]) + (i < 5 ? "," : ")");
  }
  det += " A=(";
  for (int i = 0; i < 6; ++i) det += (std::isinf(a[i]) ? std::string("inf") : fmt("%.3f", a[i])) + (i < 5 ? "," : ")");
  // 0 b1, 1 b2, 2 b3, 3 b4, 4 b4p, 5 b4pp
  auto chain = [](const double* v, std::initializer_list<int> order) {
    const int* it = order.begin();
    for (std::size_t k = 1; k < order.size(); ++k) {
      if (!(v[it[k - 1]] <= v[it[k]] + 1e-12)) return false;
    }
    return true;
  };
  const bool ow = chain(w, {5, 4, 3, 0, 1, 2});
  const bool oa = chain(a, {5, 4, 2, 0, 1, 3});
  det += std::string(" orderings W ") + (ow ? "ok" : "broken") + ", A " + (oa ? "ok" : "broken");
  return {ok && ow && oa, det};
}

Outcome c9_coverage(const Options& o) {
  const CensoringScheme sc(19, {0, 0, 3, 0, 3, 0, 0, 5});
  const McOptions mc{o.reps, kSeed, o.workers};
  const double d = calibrate_dp(sc.m(), sc.n(), Probability(0.1), mc).value;
  const double c = calibrate_cp(sc.m(), Probability(0.1), mc).value;
  const auto pt = p_of_tau(sc.m(), Probability(0.9025), mc);
  std::vector<CoverageSpec> specs;
  for (auto t : {CoverageTarget::c1, CoverageTarget::c2, CoverageTarget::b1, CoverageTarget::b2}) {
    CoverageSpec s{t};
    s.p = 0.1;
    specs.push_back(s);
  }
  {
    CoverageSpec s{CoverageTarget::c3};
    s.p = 0.1;
    s.c_p = c;
    specs.push_back(s);
  }
  for (auto t : {CoverageTarget::c4p, CoverageTarget::c4pp, CoverageTarget::b4, CoverageTarget::b4p,
                 CoverageTarget::b4pp}) {
    CoverageSpec s{t};
    s.d_p = d;
    specs.push_back(s);
  }
  {
    CoverageSpec s{CoverageTarget::b3};
    s.p = pt.value;
    s.c_p = *pt.c;
    s.expected = 0.9025;
    specs.push_back(s);
  }
  bool ok = true;
  std::string det;
  for (const LocScale theta : {LocScale(0.0, 1.0), LocScale(5.0, 3.0)}) {
    det += "theta=(" + fmt("%g", theta.mu()) + "," + fmt("%g", theta.sigma()) + "):";
    for (const auto& s : specs) {
      const auto r = coverage_experiment(s, theta, sc, o.replicates, kSeed + 1, o.workers);
      const bool pass = std::abs(r.coverage - s.expected) <= kCoverageTol;
      ok = ok && pass;
      det += " " + r.kind + "=" + fmt("%.4f", r.coverage) + (pass ? "" : "(!)");
    }
    det += ";";
  }
  return {ok, det + " tol 0.5 pp"};
}

Outcome c10_properties(const Options&) {
  const std::pair<const char*, props::Result> rs[] = {
      {"monotone", props::monotone_and_ordered()},  {"exhaustive", props::exhaustive_c1_c2()},
      {"c3 witness", props::c3_noncomprehensive_witness()}, {"nesting", props::nesting()},
      {"involution", props::reliability_involution()}, {"H", props::h_properties()}};
  bool ok = true;
  std::string det;
  for (const auto& [name, r] : rs) {
    ok = ok && r.ok;
    det += (det.empty() ? "" : "; ") + std::string(name) + (r.ok ? " ok" : " FAILED (" + r.detail + ")");
  }
  return {ok, det};
}

Outcome c11_audit(const Options& o) {
  // informational: tabulated d_p at 90% against a fresh MC; the report is the deliverable
  const int ms[] = {3, 4, 5, 10, 15, 20, 50};
  const int ns[] = {3, 4, 5, 10, 15, 20, 50};
  const double tab[7][7] = {{.123, .109, .099, .075, .064, .058, .045}, {0, .095, .086, .064, .055, .049, .037},
                            {0, 0, .078, .058, .049, .044, .033},       {0, 0, 0, .045, .038, .034, .024},
                            {0, 0, 0, 0, .033, .029, .020},             {0, 0, 0, 0, 0, .027, .018},
                            {0, 0, 0, 0, 0, 0, .014}};
  double lo = 1e9, hi = 0.0;
  int cells = 0;
  for (int i = 0; i < 7; ++i) {
    for (int j = 0; j < 7; ++j) {
      if (tab[i][j] == 0.0) continue;
      const double d = calibrate_dp(ms[i], ns[j], Probability(0.1), {o.reps / 10, kSeed, o.workers}).value;
      lo = std::min(lo, d / tab[i][j]);
      hi = std::max(hi, d / tab[i][j]);
      ++cells;
    }
  }
  return {true, std::to_string(cells) + " cells, recomputed/tabulated ratio " + fmt("%.1f", lo) + " to " +
                    fmt("%.1f", hi) + "; the tabulated values are inconsistent with d=0.249 at (8,19)" +
                    " (full table: expband reproduce)"};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app("acceptance criteria 1-11");
  Options o;
  std::vector<int> only;
  app.add_option("--only", only, "criteria to run")->delimiter(',');
  app.add_option("--reps", o.reps, "Monte-Carlo draws per constant");
  app.add_option("--replicates", o.replicates, "coverage replicates");
  app.add_option("--workers", o.workers, "worker threads (0: all cores)");
  CLI11_PARSE(app, argc, argv);

  const std::vector<std::pair<const char*, std::function<Outcome(const Options&)>>> criteria = {
      {"MLE golden test", c1_mle},
      {"d constant at 90.25%", c2_d},
      {"B3 calibration p(tau)", c3_p_of_tau},
      {"exact B3 level at 1-p=90%", c4_tau_table},
      {"p(tau) and c spot checks", c5_table_spots},
      {"closed form vs Delta-set integral", c6_delta},
      {"KS closed form vs grid supremum", c7_ks},
      {"width and area on the fluid data", c8_width_area},
      {"coverage suite", c9_coverage},
      {"property suites", c10_properties},
      {"d_p table audit (informational)", c11_audit},
  };
  const std::set<int> sel(only.begin(), only.end());
  bool all_ok = true;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int id = static_cast<int>(i) + 1;
    if (!sel.empty() && !sel.count(id)) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome r;
    try {
      r = criteria[i].second(o);
    } catch (const std::exception& e) {
      r = {false, std::string("threw: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::printf("criterion %2d %s: %s [%s] (%.1f s)\n", id, r.ok ? "PASS" : "FAIL", criteria[i].first,
                r.detail.c_str(), secs);
    std::fflush(stdout);
    if (id <= 10) all_ok = all_ok && r.ok;
  }
  return all_ok ? 0 : 1;
}
