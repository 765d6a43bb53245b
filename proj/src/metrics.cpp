#include "expband/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <thread>

#include "expband/error.hpp"
#include "expband/numerics.hpp"
#include "expband/random.hpp"

namespace expband {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kZeroWidth = 1e-12;

double width_at(const Band& b, double x) {
  const auto [l, u] = b.eval(x);
  return u - l;
}

// Far enough right that the width has settled (vanished or gone flat).
double right_reach(const Band& band, double from) {
  double span = 1.0;
  const auto bps = band.breakpoints();
  if (bps.size() > 1) span = std::max(span, bps.back() - bps.front());
  double x = from;
  for (int i = 0; i < 200; ++i) {
    const double next = x + span;
    if (width_at(band, next) < 1e-15) return next;
    if (std::abs(width_at(band, next) - width_at(band, x)) < 1e-15) return next;
    x = next;
  }
  return x;
}

bool only_reliability(const Band& band) {
  return std::all_of(band.transforms().begin(), band.transforms().end(), [](const ValueTransform& t) {
    return t.kind == ValueTransform::Kind::reliability;
  });
}

}  // namespace

WidthResult max_width(const Band& band) {
  const auto bps = band.breakpoints();
  const auto [ll, lu] = band.limits_left();
  WidthResult best{lu - ll, -kInf};
  auto consider = [&](double x, double w) {
    if (w > best.value) best = {w, x};
  };
  if (bps.empty()) {
    const auto [rl, ru] = band.limits_right();
    consider(kInf, ru - rl);
    return best;
  }
  auto f = [&](double x) { return width_at(band, x); };
  for (std::size_t i = 0; i + 1 < bps.size(); ++i) {
    const double a = bps[i], b = bps[i + 1];
    auto r = numerics::golden_section_max(f, a, b, 1e-10 * std::max(1.0, std::abs(b)));
    consider(r.x, r.value);
  }
  const double b = bps.back();
  const double reach = right_reach(band, b);
  auto r = numerics::golden_section_max(f, b, reach, 1e-10 * std::max(1.0, std::abs(reach)));
  consider(r.x, r.value);
  const auto [rl, ru] = band.limits_right();
  consider(kInf, ru - rl);
  return best;
}

AreaResult area(const Band& band, double abs_tol) {
  const auto [ll, lu] = band.limits_left();
  const auto [rl, ru] = band.limits_right();
  if (lu - ll > kZeroWidth || ru - rl > kZeroWidth) return {kInf, true, 0.0};

  const auto bps = band.breakpoints();
  if (bps.empty()) return {0.0, false, 0.0};
  auto f = [&](double x) { return width_at(band, x); };
  const double tol = std::max(1e-13, abs_tol / static_cast<double>(bps.size() + 1));
  double total = 0.0, err = 0.0;
  for (std::size_t i = 0; i + 1 < bps.size(); ++i) {
    const auto q = numerics::integrate(f, bps[i], bps[i + 1], tol);
    total += q.value;
    err += q.abs_error;
  }
  const double b = bps.back();
  const auto* le = std::get_if<ExpCdfAtom>(&band.base_lower().pieces().back().f);
  const auto* ue = std::get_if<ExpCdfAtom>(&band.base_upper().pieces().back().f);
  if (only_reliability(band) && le && ue && le->shift == 0.0 && ue->shift == 0.0) {
    // Width is F_lower-atom-complement minus F_upper-atom-complement; integrate exactly.
    total += le->scale * std::exp(-(b - le->loc) / le->scale) - ue->scale * std::exp(-(b - ue->loc) / ue->scale);
  } else {
    const auto q = numerics::integrate(f, b, kInf, tol);
    total += q.value;
    err += q.abs_error;
  }
  return {total, false, err};
}

BandMetrics band_metrics(const Band& band) {
  const auto w = max_width(band);
  const auto a = area(band);
  return {band.kind_name(), w.value, w.argmax, a.value, a.infinite, a.abs_error};
}

nlohmann::json BandMetrics::to_json() const {
  nlohmann::json j = {{"kind", kind},
                      {"max_width", max_width},
                      {"width_argmax", std::isfinite(width_argmax) ? nlohmann::json(width_argmax) : nlohmann::json(nullptr)},
                      {"area_infinite", area_infinite},
                      {"quadrature_error_estimate", quadrature_error_estimate}};
  j["area"] = area_infinite ? nlohmann::json("inf") : nlohmann::json(area);
  return j;
}

// ---------------------------------------------------------------- coverage

std::string to_string(CoverageTarget t) {
  switch (t) {
    case CoverageTarget::c1: return "c1";
    case CoverageTarget::c2: return "c2";
    case CoverageTarget::c3: return "c3";
    case CoverageTarget::c4p: return "c4p";
    case CoverageTarget::c4pp: return "c4pp";
    case CoverageTarget::b1: return "b1";
    case CoverageTarget::b2: return "b2";
    case CoverageTarget::b3: return "b3";
    case CoverageTarget::b4: return "b4";
    case CoverageTarget::b4p: return "b4p";
    case CoverageTarget::b4pp: return "b4pp";
  }
  return "unknown";
}

CoverageTarget coverage_target_from_string(const std::string& s) {
  for (int i = 0; i <= static_cast<int>(CoverageTarget::b4pp); ++i) {
    const auto t = static_cast<CoverageTarget>(i);
    if (to_string(t) == s) return t;
  }
  throw ParseError("unknown coverage target '" + s + "'");
}

nlohmann::json CoverageReport::to_json() const {
  return {{"kind", kind},   {"expected", expected}, {"replicates", replicates}, {"hits", hits},
          {"coverage", coverage}, {"std_error", std_error}, {"mu", mu}, {"sigma", sigma},
          {"seed", seed}};
}

CoverageReport coverage_experiment(const CoverageSpec& spec, const LocScale& theta,
                                   const GeneralizedScheme& scheme, std::int64_t replicates,
                                   std::uint64_t seed, unsigned workers) {
  if (replicates < 1) throw DomainError("coverage needs at least one replicate");
  const Probability p(spec.p);
  const Probability level(spec.expected);

  // Trimmed bands depend on the fit only through an affine map of x, so one
  // standardized band serves every replicate.
  std::optional<Band> standard;
  if (spec.target == CoverageTarget::b4p || spec.target == CoverageTarget::b4pp) {
    const auto prof = TrimmedProfile::compute(spec.d_p, spec.grid);
    standard = trimmed_band({0.0, 1.0}, prof, spec.target == CoverageTarget::b4pp, level);
  }

  auto covered = [&](std::uint64_t i) {
    RandomStream rs(seed, i);
    const auto sample = simulate_sample(theta, scheme, rs);
    const MleEstimate est = mle(sample);
    switch (spec.target) {
      case CoverageTarget::c1: return build_c1(est, scheme, p).contains(theta);
      case CoverageTarget::c2: return build_c2(est, scheme, p).contains(theta);
      case CoverageTarget::c3: return build_c3(est, scheme, spec.c_p).contains(theta);
      case CoverageTarget::c4p: return build_c4(est, spec.d_p, false).contains(theta);
      case CoverageTarget::c4pp: return build_c4(est, spec.d_p, true).contains(theta);
      case CoverageTarget::b1: return contains_graph(band_b1(est, scheme, p), theta);
      case CoverageTarget::b2: return contains_graph(band_b2(est, scheme, p), theta);
      case CoverageTarget::b3:
        return contains_graph(band_b3(est, scheme, spec.c_p, Probability(1.0 - spec.p), level), theta);
      case CoverageTarget::b4: return contains_graph(band_b4(est, spec.d_p, level), theta);
      case CoverageTarget::b4p:
      case CoverageTarget::b4pp: {
        const LocScale rel((theta.mu() - est.mu_hat) / est.sigma_hat, theta.sigma() / est.sigma_hat);
        return contains_graph(*standard, rel);
      }
    }
    return false;
  };

  const unsigned w = std::max(1u, workers > 0 ? workers : std::thread::hardware_concurrency());
  const auto n = static_cast<std::uint64_t>(replicates);
  std::vector<std::int64_t> hits(w, 0);
  auto run = [&](unsigned t) {
    const std::uint64_t chunk = (n + w - 1) / w;
    const std::uint64_t b = t * chunk, e = std::min(n, b + chunk);
    for (std::uint64_t i = b; i < e; ++i) hits[t] += covered(i) ? 1 : 0;
  };
  if (w == 1) {
    run(0);
  } else {
    std::vector<std::thread> threads;
    for (unsigned t = 0; t < w; ++t) threads.emplace_back(run, t);
    for (auto& th : threads) th.join();
  }
  CoverageReport r;
  r.kind = to_string(spec.target);
  r.expected = spec.expected;
  r.replicates = replicates;
  r.hits = 0;
  for (auto h : hits) r.hits += h;
  r.coverage = static_cast<double>(r.hits) / static_cast<double>(replicates);
  r.std_error = std::sqrt(r.coverage * (1.0 - r.coverage) / static_cast<double>(replicates));
  r.mu = theta.mu();
  r.sigma = theta.sigma();
  r.seed = seed;
  return r;
}

}  // namespace expband
