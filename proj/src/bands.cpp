#include "expband/bands.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "expband/error.hpp"
#include "expband/numerics.hpp"

namespace expband {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double clamp01(double v) { return std::clamp(v, 0.0, 1.0); }

}  // namespace

// ---------------------------------------------------------------- atoms

double ExpCdfAtom::operator()(double x) const { return clamp01(exp_cdf(loc, scale, x) + shift); }

std::optional<double> ExpCdfAtom::crossing(double level) const {
  const double target = level - shift;
  if (!(target > 0.0 && target < 1.0)) return std::nullopt;
  return loc - scale * std::log1p(-target);
}

double B3ArcAtom::sigma_star(double x) const {
  return (n * (mu_hat - x) + m * sigma_hat) / (m + 1);
}

double B3ArcAtom::operator()(double x) const {
  const double s = sigma_star(x);
  const double g = ((c_p - (m + 1) * (std::log(sigma_hat) - std::log(s))) * s + m * sigma_hat) / n;
  return exp_cdf(mu_hat + g, s, x);
}

double GridAtom::interpolate(double x) const {
  if (x <= xs.front()) return ys.front();
  if (x >= xs.back()) return ys.back();
  const auto it = std::upper_bound(xs.begin(), xs.end(), x);
  const std::size_t hi = static_cast<std::size_t>(it - xs.begin());
  const std::size_t lo = hi - 1;
  const double t = (x - xs[lo]) / (xs[hi] - xs[lo]);
  return ys[lo] + t * (ys[hi] - ys[lo]);
}

double GridAtom::operator()(double x) const {
  double v = interpolate(x);
  if (floor) v = std::max(v, (*floor)(x));
  if (ceil) v = std::min(v, (*ceil)(x));
  return clamp01(v);
}

// ---------------------------------------------------------------- Boundary

Boundary::Boundary(std::vector<Piece> pieces) : pieces_(std::move(pieces)) {
  if (pieces_.empty()) throw DomainError("boundary needs at least one piece");
  if (pieces_.front().x_lo != -kInf || pieces_.back().x_hi != kInf) {
    throw DomainError("boundary pieces must cover the real line");
  }
  for (std::size_t i = 0; i < pieces_.size(); ++i) {
    if (!(pieces_[i].x_lo < pieces_[i].x_hi)) throw DomainError("boundary piece with empty interval");
    if (i + 1 < pieces_.size() && pieces_[i].x_hi != pieces_[i + 1].x_lo) {
      throw DomainError("boundary pieces are not contiguous");
    }
    if (const auto* g = std::get_if<GridAtom>(&pieces_[i].f)) {
      if (g->xs.size() < 2 || g->xs.size() != g->ys.size()) throw DomainError("grid piece needs matching xs/ys");
    }
  }
}

std::size_t Boundary::locate(double x) const {
  const auto it = std::partition_point(pieces_.begin(), pieces_.end(),
                                       [x](const Piece& p) { return p.x_hi <= x; });
  return std::min<std::size_t>(static_cast<std::size_t>(it - pieces_.begin()), pieces_.size() - 1);
}

double Boundary::operator()(double x) const {
  const Piece& p = pieces_[locate(x)];
  return std::visit([x](const auto& f) { return f(x); }, p.f);
}

namespace {

void add_exp_points(std::vector<double>& out, const ExpCdfAtom& a) {
  out.push_back(a.loc);
  if (auto c = a.crossing(0.0)) out.push_back(*c);
  if (auto c = a.crossing(1.0)) out.push_back(*c);
}

}  // namespace

std::vector<double> Boundary::breakpoints() const {
  std::vector<double> raw;
  for (const auto& p : pieces_) {
    if (std::isfinite(p.x_lo)) raw.push_back(p.x_lo);
    std::vector<double> local;
    if (const auto* e = std::get_if<ExpCdfAtom>(&p.f)) add_exp_points(local, *e);
    if (const auto* g = std::get_if<GridAtom>(&p.f)) {
      local.insert(local.end(), g->xs.begin(), g->xs.end());
      if (g->floor) add_exp_points(local, *g->floor);
      if (g->ceil) add_exp_points(local, *g->ceil);
    }
    for (double x : local) {
      if (x > p.x_lo && x < p.x_hi) raw.push_back(x);
    }
  }
  std::sort(raw.begin(), raw.end());
  raw.erase(std::unique(raw.begin(), raw.end()), raw.end());
  return raw;
}

double Boundary::limit_left() const {
  return std::visit([](const auto& f) { return f(-kInf); }, pieces_.front().f);
}

double Boundary::limit_right() const {
  return std::visit([](const auto& f) { return f(kInf); }, pieces_.back().f);
}

// ---------------------------------------------------------------- Band

std::string to_string(BandKind kind) {
  switch (kind) {
    case BandKind::b1: return "b1";
    case BandKind::b2: return "b2";
    case BandKind::b3: return "b3";
    case BandKind::b4: return "b4";
    case BandKind::b4p: return "b4p";
    case BandKind::b4pp: return "b4pp";
  }
  return "unknown";
}

BandKind band_kind_from_string(const std::string& s) {
  for (auto k : {BandKind::b1, BandKind::b2, BandKind::b3, BandKind::b4, BandKind::b4p, BandKind::b4pp}) {
    if (to_string(k) == s) return k;
  }
  throw ParseError("unknown band kind '" + s + "'");
}

Band::Band(BandKind kind, Boundary lower, Boundary upper, Probability level, Probability nominal,
           nlohmann::json constants)
    : kind_(kind),
      lower_(std::move(lower)),
      upper_(std::move(upper)),
      level_(level),
      nominal_(nominal),
      constants_(std::move(constants)) {}

std::string Band::kind_name() const {
  std::string name = to_string(kind_);
  for (const auto& t : transforms_) {
    name = (t.kind == ValueTransform::Kind::reliability ? "reliability-of-" : "marginal-of-") + name;
  }
  return name;
}

namespace {

// H(y) = P(sum_i E_i / gamma_i <= t), t = -ln(1 - y), by uniformization: a
// Poisson(Lambda t) mixture of the embedded chain's absorption probabilities.
// Every term is positive, so close gammas cost nothing in precision.
double h_uniformized(const std::vector<double>& gammas, double y) {
  if (y <= 0.0) return 0.0;
  if (y >= 1.0) return 1.0;
  const double t = -std::log1p(-y);
  const double lam = *std::max_element(gammas.begin(), gammas.end());
  const double mean = lam * t;
  const std::size_t k = gammas.size();
  std::vector<double> state(k, 0.0);
  state[0] = 1.0;
  double absorbed = 0.0, acc = 0.0;
  const auto stop = static_cast<std::size_t>(mean + 40.0 * std::sqrt(mean) + 200.0);
  for (std::size_t n = 0; n <= stop; ++n) {
    const double w = std::exp(-mean + static_cast<double>(n) * std::log(mean) - std::lgamma(n + 1.0));
    acc += w * absorbed;
    // past the mode the Poisson tail is below w / (1 - ratio)
    const double ratio = mean / (n + 1.0);
    if (ratio < 0.5 && acc > 0.0 && 2.0 * w < 1e-17 * acc) break;
    // one step of the embedded chain, last state first
    absorbed += state[k - 1] * gammas[k - 1] / lam;
    for (std::size_t i = k - 1; i > 0; --i) {
      const double move = state[i - 1] * gammas[i - 1] / lam;
      state[i] = state[i] * (1.0 - gammas[i] / lam) + move;
    }
    state[0] *= 1.0 - gammas[0] / lam;
  }
  return clamp01(acc);
}

double apply_h(const ValueTransform& t, double y) {
  if (!(y > 0.0)) return 0.0;
  if (y >= 1.0) return 1.0;
  double spread = 0.0;
  for (double w : t.weights) spread = std::max(spread, std::abs(w));
  // The alternating sum carries an absolute error near spread * eps; fall back
  // when that is not small against the value itself.
  if (spread > 1e4) return h_uniformized(t.gammas, y);
  const double l = std::log1p(-y);
  double acc = 0.0;
  for (std::size_t i = 0; i < t.gammas.size(); ++i) acc += t.weights[i] * -std::expm1(t.gammas[i] * l);
  if (t.gammas.size() > 1 && acc < 1e4 * spread * t.gammas.size() * 2.2e-16) return h_uniformized(t.gammas, y);
  return clamp01(acc);
}

}  // namespace

std::pair<double, double> Band::transform_values(double lo, double up) const {
  for (const auto& t : transforms_) {
    if (t.kind == ValueTransform::Kind::reliability) {
      std::tie(lo, up) = std::pair{1.0 - up, 1.0 - lo};
    } else {
      lo = apply_h(t, lo);
      up = apply_h(t, up);
    }
  }
  return {lo, up};
}

std::pair<double, double> Band::eval(double x) const { return transform_values(lower_(x), upper_(x)); }

std::pair<double, double> Band::limits_left() const {
  return transform_values(lower_.limit_left(), upper_.limit_left());
}

std::pair<double, double> Band::limits_right() const {
  return transform_values(lower_.limit_right(), upper_.limit_right());
}

std::vector<double> Band::breakpoints() const {
  auto a = lower_.breakpoints();
  auto b = upper_.breakpoints();
  std::vector<double> out;
  std::merge(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(out));
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

Band Band::with_transform(ValueTransform t) const {
  Band out = *this;
  if (t.kind == ValueTransform::Kind::reliability) {
    if (!out.transforms_.empty() && out.transforms_.back().kind == ValueTransform::Kind::reliability) {
      out.transforms_.pop_back();
    } else {
      out.transforms_.push_back(std::move(t));
    }
    return out;
  }
  for (const auto& prev : out.transforms_) {
    if (prev.kind == ValueTransform::Kind::reliability) {
      throw DomainError("marginal transform needs a cdf band, not a reliability band");
    }
    throw DomainError("marginal transform already applied");
  }
  out.transforms_.push_back(std::move(t));
  return out;
}

Band Band::with_scale(MonotoneMap scale) const {
  Band out = *this;
  out.scale_ = std::move(scale);
  return out;
}

// ---------------------------------------------------------------- closed-form bands

namespace {

Piece piece(double a, double b, PieceFunction f) { return Piece{a, b, std::move(f)}; }

}  // namespace

Band band_b1(const MleEstimate& est, const GeneralizedScheme& scheme, Probability p) {
  const RegionC1 r = build_c1(est, scheme, p);
  const double mu = est.mu_hat;
  Boundary lower({piece(-kInf, mu, ExpCdfAtom{r.a(r.q2, r.sigma_lo), r.sigma_lo}),
                  piece(mu, kInf, ExpCdfAtom{r.a(r.q2, r.sigma_hi), r.sigma_hi})});
  Boundary upper({piece(-kInf, mu, ExpCdfAtom{r.a(r.q1, r.sigma_hi), r.sigma_hi}),
                  piece(mu, kInf, ExpCdfAtom{r.a(r.q1, r.sigma_lo), r.sigma_lo})});
  nlohmann::json c = {{"mu_hat", est.mu_hat}, {"sigma_hat", est.sigma_hat}, {"p", r.p},
                      {"q1", r.q1},         {"q2", r.q2},                 {"sigma_lo", r.sigma_lo},
                      {"sigma_hi", r.sigma_hi}};
  const Probability level(p.complement());
  return Band(BandKind::b1, std::move(lower), std::move(upper), level, level, std::move(c));
}

Band band_b2(const MleEstimate& est, const GeneralizedScheme& scheme, Probability p) {
  const RegionC2 r = build_c2(est, scheme, p);
  const double split = est.mu_hat + r.m * est.sigma_hat / r.n;
  Boundary lower({piece(-kInf, split, ExpCdfAtom{r.mu_hi, r.b(r.chi2_q1, r.mu_hi)}),
                  piece(split, kInf, ExpCdfAtom{r.mu_lo, r.b(r.chi2_q1, r.mu_lo)})});
  Boundary upper({piece(-kInf, split, ExpCdfAtom{r.mu_lo, r.b(r.chi2_q2, r.mu_lo)}),
                  piece(split, kInf, ExpCdfAtom{r.mu_hi, r.b(r.chi2_q2, r.mu_hi)})});
  nlohmann::json c = {{"mu_hat", est.mu_hat}, {"sigma_hat", est.sigma_hat}, {"p", r.p},
                      {"q1", r.q1},         {"q2", r.q2},                 {"mu_lo", r.mu_lo},
                      {"mu_hi", r.mu_hi}};
  const Probability level(p.complement());
  return Band(BandKind::b2, std::move(lower), std::move(upper), level, level, std::move(c));
}

Band band_b3(const MleEstimate& est, const GeneralizedScheme& scheme, double c_p,
             Probability nominal, Probability exact) {
  const RegionC3 r = build_c3(est, scheme, c_p);
  const double mu = est.mu_hat;
  const double ms = r.m * est.sigma_hat;
  const double x0 = mu + (ms - (r.m + 1) * r.z_0) / r.n;
  const double x1 = mu + (ms - (r.m + 1) * r.z_m1) / r.n;
  Boundary lower({piece(-kInf, kInf, ExpCdfAtom{mu, r.z_0})});
  Boundary upper({piece(-kInf, x0, ExpCdfAtom{mu, r.z_0}),
                  piece(x0, x1, B3ArcAtom{mu, est.sigma_hat, r.n, r.m, c_p}),
                  piece(x1, kInf, ExpCdfAtom{mu, r.z_m1})});
  nlohmann::json c = {{"mu_hat", est.mu_hat}, {"sigma_hat", est.sigma_hat}, {"c_p", c_p},
                      {"z_m1", r.z_m1},     {"z_0", r.z_0}};
  return Band(BandKind::b3, std::move(lower), std::move(upper), exact, nominal, std::move(c));
}

Band band_b4(const MleEstimate& est, double d_p, Probability level) {
  if (!(d_p > 0.0 && d_p < 1.0)) throw DomainError("d_p must lie in (0, 1)");
  Boundary lower({piece(-kInf, kInf, ExpCdfAtom{est.mu_hat, est.sigma_hat, -d_p})});
  Boundary upper({piece(-kInf, kInf, ExpCdfAtom{est.mu_hat, est.sigma_hat, d_p})});
  nlohmann::json c = {{"mu_hat", est.mu_hat}, {"sigma_hat", est.sigma_hat}, {"d_p", d_p}};
  return Band(BandKind::b4, std::move(lower), std::move(upper), level, level, std::move(c));
}

double ks_distance(const LocScale& theta) {
  const double mu = theta.mu();
  const double sigma = theta.sigma();
  const double u = -std::expm1(-std::max(mu, -mu / sigma));
  if (sigma == 1.0) return u;
  const double ls = std::log(sigma);
  const bool active = sigma < 1.0 ? mu > sigma * ls : mu < ls;
  if (!active) return u;
  const double v = std::abs(1.0 - sigma) * std::exp((mu - sigma * ls) / (sigma - 1.0));
  return std::max(u, v);
}

// ---------------------------------------------------------------- trimmed bands

std::pair<double, double> trimmed_extremes(const KsPivotRegion& region, double k) {
  const double a = region.s_lo();
  const double b = region.s_hi();
  const double d = region.d();
  auto arcs = [a, b](std::vector<double> cuts) {
    std::vector<double> pts{a};
    for (double c : cuts) {
      if (c > a && c < b) pts.push_back(c);
    }
    pts.push_back(b);
    std::sort(pts.begin(), pts.end());
    return pts;
  };
  const double tol = 1e-10;
  double sup = -kInf;
  const auto up = arcs({1.0 / (1.0 - d)});
  for (std::size_t i = 0; i + 1 < up.size(); ++i) {
    auto r = numerics::golden_section_max([&](double s) { return k * s + region.o(s); }, up[i],
                                          up[i + 1], tol * std::max(1.0, up[i + 1]));
    sup = std::max(sup, r.value);
  }
  double inf = kInf;
  std::vector<double> cuts{1.0 - d};
  if (region.trimmed()) cuts.push_back(region.u_zero());
  const auto lo = arcs(cuts);
  for (std::size_t i = 0; i + 1 < lo.size(); ++i) {
    auto r = numerics::golden_section_min([&](double s) { return k * s + region.lower(s); }, lo[i],
                                          lo[i + 1], tol * std::max(1.0, lo[i + 1]));
    inf = std::min(inf, r.value);
  }
  return {sup, inf};
}

TrimmedProfile TrimmedProfile::compute(double d, int points) {
  if (!(d > 0.0 && d < 0.5)) {
    throw DomainError("trimmed bands need 0 < d_p < 1/2 (C4' is unbounded otherwise)");
  }
  if (points < 16) throw DomainError("trimmed band grid needs at least 16 points");
  const KsPivotRegion rp(d, false);
  const KsPivotRegion rpp(d, true);
  TrimmedProfile prof;
  prof.d = d;
  prof.lo = {rp.s_lo(), rp.o(rp.s_lo())};
  prof.hi_p = {rp.s_hi(), rp.o(rp.s_hi())};
  prof.hi_pp = {rpp.s_hi(), rpp.o(rpp.s_hi())};
  // For k <= 0 the sup sits at the left vertex on the flat part of o.
  prof.k_left = std::log1p(-d) / prof.lo.s;
  // Past these k the extremum is pinned to a vertex and the tails are exact cdfs.
  auto upper_tail = [d](double s_hi) {
    if (s_hi <= 1.0 / (1.0 - d)) return 0.0;
    return std::max(0.0, std::log((1.0 - 1.0 / s_hi) / d));
  };
  const double k_lo_tail = std::log((1.0 / prof.lo.s - 1.0) / d);
  const double k_end =
      std::max({upper_tail(prof.hi_p.s), upper_tail(prof.hi_pp.s), k_lo_tail, prof.k_left + 1.0});

  // Lower bounds are 0 until the inf crosses zero and concave after, so nodes at
  // the crossings keep chords below them. k = 0 is the crossing for C4'' and a
  // kink of the sup (the argmax leaves the left vertex).
  const double k_zero_p = numerics::bisect_root(
      [&rp](double k) { return trimmed_extremes(rp, k).second; }, prof.k_left, k_end, 1e-15);
  for (int i = 0; i < points; ++i) {
    prof.k.push_back(prof.k_left + (k_end - prof.k_left) * i / (points - 1));
  }
  for (double extra : {0.0, k_zero_p}) {
    const auto it = std::lower_bound(prof.k.begin(), prof.k.end(), extra);
    if (it == prof.k.end() || it == prof.k.begin()) continue;
    if (*it - extra > 1e-12 && extra - *(it - 1) > 1e-12) prof.k.insert(it, extra);
  }

  const std::size_t n = prof.k.size();
  prof.lower_p.resize(n);
  prof.upper_p.resize(n);
  prof.lower_pp.resize(n);
  prof.upper_pp.resize(n);
  auto to_prob = [](double e) { return -std::expm1(-std::max(0.0, e)); };
  for (std::size_t i = 0; i < n; ++i) {
    const double k = prof.k[i];
    const auto [sp, ip] = trimmed_extremes(rp, k);
    const auto [spp, ipp] = trimmed_extremes(rpp, k);
    prof.upper_p[i] = to_prob(sp);
    prof.lower_p[i] = to_prob(ip);
    prof.upper_pp[i] = to_prob(spp);
    prof.lower_pp[i] = to_prob(ipp);
  }
  for (auto* v : {&prof.lower_p, &prof.upper_p, &prof.lower_pp, &prof.upper_pp}) {
    for (std::size_t i = 1; i < n; ++i) (*v)[i] = std::max((*v)[i], (*v)[i - 1]);
  }
  // Nesting B4'' within B4' within B4 at the nodes; interpolation keeps it.
  for (std::size_t i = 0; i < n; ++i) {
    const double f = exp_cdf(0.0, 1.0, prof.k[i]);
    prof.upper_p[i] = std::min(prof.upper_p[i], std::min(1.0, f + d));
    prof.upper_pp[i] = std::min(prof.upper_pp[i], prof.upper_p[i]);
    prof.lower_p[i] = std::max(prof.lower_p[i], std::max(0.0, f - d));
    prof.lower_pp[i] = std::max(prof.lower_pp[i], prof.lower_p[i]);
    prof.lower_pp[i] = std::min(prof.lower_pp[i], prof.upper_pp[i]);
    prof.lower_p[i] = std::min(prof.lower_p[i], prof.lower_pp[i]);
  }
  return prof;
}

Band trimmed_band(const MleEstimate& est, const TrimmedProfile& profile, bool trimmed,
                  Probability level) {
  const double mu = est.mu_hat;
  const double sh = est.sigma_hat;
  std::vector<double> xs(profile.k.size());
  for (std::size_t i = 0; i < xs.size(); ++i) xs[i] = mu + sh * profile.k[i];
  const double x_left = xs.front();
  const double x_end = xs.back();
  auto vertex_cdf = [&](const TrimmedProfile::Vertex& v) {
    return ExpCdfAtom{mu - sh * v.t / v.s, sh / v.s};
  };
  const auto& hi = trimmed ? profile.hi_pp : profile.hi_p;
  GridAtom up{xs, trimmed ? profile.upper_pp : profile.upper_p, std::nullopt,
              ExpCdfAtom{mu, sh, profile.d}};
  GridAtom lo{xs, trimmed ? profile.lower_pp : profile.lower_p, ExpCdfAtom{mu, sh, -profile.d},
              std::nullopt};
  Boundary upper({piece(-kInf, x_left, ConstantAtom{0.0}), piece(x_left, x_end, std::move(up)),
                  piece(x_end, kInf, vertex_cdf(hi))});
  Boundary lower({piece(-kInf, x_left, ConstantAtom{0.0}), piece(x_left, x_end, std::move(lo)),
                  piece(x_end, kInf, vertex_cdf(profile.lo))});
  nlohmann::json c = {{"mu_hat", mu},
                      {"sigma_hat", sh},
                      {"d_p", profile.d},
                      {"grid", profile.k.size()},
                      {"s_lo", profile.lo.s},
                      {"s_hi", hi.s}};
  return Band(trimmed ? BandKind::b4pp : BandKind::b4p, std::move(lower), std::move(upper), level,
              level, std::move(c));
}

Band trim_band(const Band& b4, const RegionC4& region, int grid) {
  if (b4.base_kind() != BandKind::b4 || !b4.transforms().empty()) {
    throw DomainError("trim_band expects an untransformed B4 band");
  }
  if (b4.constants().at("d_p").get<double>() != region.d_p) {
    throw DomainError("trim_band: B4 and C4 use different d_p");
  }
  const auto prof = TrimmedProfile::compute(region.d_p, grid);
  return trimmed_band({region.mu_hat, region.sigma_hat}, prof, region.trimmed, b4.level())
      .with_scale(b4.scale());
}

// ---------------------------------------------------------------- transforms

Band reliability_band(const Band& band) {
  return band.with_transform({ValueTransform::Kind::reliability, {}, {}});
}

ValueTransform marginal_transform(const std::vector<double>& gammas) {
  if (gammas.empty()) throw DomainError("marginal transform needs at least one gamma");
  std::vector<double> w(gammas.size());
  for (std::size_t i = 0; i < gammas.size(); ++i) {
    if (!(gammas[i] > 0.0)) throw DomainError("marginal transform: gammas must be positive");
    double prod = 1.0;
    for (std::size_t j = 0; j < gammas.size(); ++j) {
      if (j == i) continue;
      if (gammas[j] == gammas[i]) {
        throw DomainError("unsupported case: marginal transform needs pairwise distinct gammas");
      }
      prod *= gammas[j] / (gammas[j] - gammas[i]);
    }
    w[i] = prod;
  }
  return {ValueTransform::Kind::marginal, gammas, std::move(w)};
}

double marginal_transform_h(const std::vector<double>& gammas, Probability y) {
  return apply_h(marginal_transform(gammas), y.value());
}

namespace detail {

double marginal_h_closed_form(const std::vector<double>& gammas, double y) {
  const auto t = marginal_transform(gammas);
  const double l = std::log1p(-clamp01(y));
  double acc = 0.0;
  for (std::size_t i = 0; i < gammas.size(); ++i) acc += t.weights[i] * -std::expm1(gammas[i] * l);
  return acc;
}

double marginal_h_uniformized(const std::vector<double>& gammas, double y) {
  marginal_transform(gammas);  // same argument checks
  return h_uniformized(gammas, y);
}

}  // namespace detail

Band marginal_band(const Band& band, const std::vector<double>& gammas) {
  return band.with_transform(marginal_transform(gammas));
}

// ---------------------------------------------------------------- graph containment

namespace {

// x where F_theta - F_(loc, scale) is stationary (both strictly increasing there).
std::optional<double> stationary_point(const LocScale& th, double loc, double scale) {
  const double sig = th.sigma();
  if (scale == sig) return std::nullopt;
  const double x = (std::log(sig / scale) + loc / scale - th.mu() / sig) / (1.0 / scale - 1.0 / sig);
  if (!std::isfinite(x)) return std::nullopt;
  return x;
}

void exp_candidates(std::vector<double>& out, const ExpCdfAtom& a, const LocScale& th) {
  add_exp_points(out, a);
  if (auto x = stationary_point(th, a.loc, a.scale)) out.push_back(*x);
}

double side_excess(const Boundary& bd, bool upper_side, const LocScale& th) {
  double worst = -kInf;
  auto excess = [&](const PieceFunction& f, double x) {
    const double v = std::visit([x](const auto& g) { return g(x); }, f);
    const double F = th.cdf(x);
    return upper_side ? F - v : v - F;
  };
  std::vector<double> cand;
  for (const auto& p : bd.pieces()) {
    cand.clear();
    cand.push_back(p.x_lo);
    cand.push_back(p.x_hi);
    cand.push_back(th.mu());
    if (const auto* e = std::get_if<ExpCdfAtom>(&p.f)) {
      // On an unbounded unshifted tail the sign of boundary - F_theta far out
      // is decided by the scales alone; the F-gap there can be far below any slack.
      if (std::isinf(p.x_hi) && e->shift == 0.0 &&
          (upper_side ? th.sigma() < e->scale : th.sigma() > e->scale)) {
        return kInf;
      }
      exp_candidates(cand, *e, th);
    } else if (const auto* g = std::get_if<GridAtom>(&p.f)) {
      const double sig = th.sigma();
      for (std::size_t i = 0; i < g->xs.size(); ++i) {
        const double x = g->xs[i];
        if (x < p.x_lo || x > p.x_hi) continue;
        cand.push_back(x);
        if (i + 1 < g->xs.size()) {
          const double slope = (g->ys[i + 1] - g->ys[i]) / (g->xs[i + 1] - x);
          if (slope > 0.0) {
            const double xs = th.mu() - sig * std::log(sig * slope);
            if (xs > x && xs < g->xs[i + 1]) cand.push_back(xs);
          }
        }
      }
      if (g->floor) exp_candidates(cand, *g->floor, th);
      if (g->ceil) exp_candidates(cand, *g->ceil, th);
    } else if (std::holds_alternative<B3ArcAtom>(p.f)) {
      // No closed form: quantile points of F_theta plus an even grid, then refine.
      constexpr int kQuant = 2048;
      constexpr int kEven = 64;
      const double a = p.x_lo, b = p.x_hi;
      std::vector<double> xs;
      for (int i = 0; i <= kEven; ++i) xs.push_back(a + (b - a) * i / kEven);
      const double fa = th.cdf(a), fb = th.cdf(b);
      for (int i = static_cast<int>(std::ceil(fa * (kQuant + 1))); i <= static_cast<int>(fb * (kQuant + 1)) && i <= kQuant; ++i) {
        if (i < 1) continue;
        xs.push_back(th.mu() - th.sigma() * std::log1p(-static_cast<double>(i) / (kQuant + 1)));
      }
      std::sort(xs.begin(), xs.end());
      std::size_t best = 0;
      double best_v = -kInf;
      for (std::size_t i = 0; i < xs.size(); ++i) {
        const double v = excess(p.f, xs[i]);
        if (v > best_v) {
          best_v = v;
          best = i;
        }
      }
      const double lo = xs[best > 0 ? best - 1 : 0];
      const double hi = xs[std::min(best + 1, xs.size() - 1)];
      if (hi > lo) {
        auto r = numerics::golden_section_max([&](double x) { return excess(p.f, x); }, lo, hi, 1e-12 * std::max(1.0, std::abs(hi)));
        worst = std::max(worst, r.value);
      }
      worst = std::max(worst, best_v);
    }
    for (double x : cand) {
      if (std::isnan(x) || x < p.x_lo || x > p.x_hi) continue;
      worst = std::max(worst, excess(p.f, x));
    }
  }
  return worst;
}

}  // namespace

double graph_excess(const Band& band, const LocScale& theta) {
  return std::max(side_excess(band.base_lower(), false, theta),
                  side_excess(band.base_upper(), true, theta));
}

double graph_excess_on_grid(const Band& band, const LocScale& theta, int points) {
  std::vector<double> xs = band.breakpoints();
  xs.push_back(theta.mu());
  for (int i = 1; i <= points; ++i) {
    xs.push_back(theta.mu() - theta.sigma() * std::log1p(-static_cast<double>(i) / (points + 1)));
  }
  double worst = -kInf;
  for (double x : xs) {
    const double F = theta.cdf(x);
    worst = std::max({worst, band.base_lower()(x) - F, F - band.base_upper()(x)});
  }
  return worst;
}

bool contains_graph(const Band& band, const LocScale& theta, double slack) {
  return graph_excess(band, theta) <= slack;
}

}  // namespace expband
