#include "expband/regions.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "expband/error.hpp"
#include "expband/numerics.hpp"

namespace expband {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Appends `count` points of the segment a -> b, excluding b.
void add_segment(std::vector<Point>& out, Point a, Point b, int count) {
  for (int i = 0; i < count; ++i) {
    const double t = static_cast<double>(i) / count;
    out.emplace_back(a.first + t * (b.first - a.first), a.second + t * (b.second - a.second));
  }
}

int edge_points(int points, int edges) { return std::max(1, points / edges); }

}  // namespace

LevelSplit uniform_split(Probability p) {
  if (!(p.value() > 0.0 && p.value() < 1.0)) throw DomainError("level split needs 0 < p < 1");
  const double q1 = 0.5 * (1.0 - std::sqrt(p.complement()));
  return {q1, 1.0 - q1};
}

// ---------------------------------------------------------------- C1

double RegionC1::a(double q, double sigma) const { return mu_hat + sigma * std::log(q) / n; }

bool RegionC1::contains(const LocScale& theta) const {
  const double s = theta.sigma();
  if (s < sigma_lo || s > sigma_hi) return false;
  return a(q1, s) <= theta.mu() && theta.mu() <= a(q2, s);
}

std::vector<Point> RegionC1::boundary(int points) const {
  const Point p1{a(q1, sigma_lo), sigma_lo}, p2{a(q2, sigma_lo), sigma_lo};
  const Point p3{a(q2, sigma_hi), sigma_hi}, p4{a(q1, sigma_hi), sigma_hi};
  const int k = edge_points(points, 4);
  std::vector<Point> out;
  add_segment(out, p1, p2, k);
  add_segment(out, p2, p3, k);
  add_segment(out, p3, p4, k);
  add_segment(out, p4, p1, k);
  out.push_back(p1);
  return out;
}

RegionC1 build_c1(const MleEstimate& est, const GeneralizedScheme& scheme, Probability p) {
  const auto [q1, q2] = uniform_split(p);
  const int m = scheme.m();
  RegionC1 r{};
  r.mu_hat = est.mu_hat;
  r.sigma_hat = est.sigma_hat;
  r.m = m;
  r.n = scheme.n();
  r.p = p.value();
  r.q1 = q1;
  r.q2 = q2;
  r.sigma_lo = 2.0 * m * est.sigma_hat / special::chi2_quantile(Probability(q2), 2 * m - 2);
  r.sigma_hi = 2.0 * m * est.sigma_hat / special::chi2_quantile(Probability(q1), 2 * m - 2);
  return r;
}

// ---------------------------------------------------------------- C2

double RegionC2::b(double chi2_q, double mu) const {
  return 2.0 * (n * (mu_hat - mu) + m * sigma_hat) / chi2_q;
}

bool RegionC2::contains(const LocScale& theta) const {
  const double mu = theta.mu();
  if (mu < mu_lo || mu > mu_hi) return false;
  return b(chi2_q2, mu) <= theta.sigma() && theta.sigma() <= b(chi2_q1, mu);
}

std::vector<Point> RegionC2::boundary(int points) const {
  const Point p1{mu_lo, b(chi2_q2, mu_lo)}, p2{mu_hi, b(chi2_q2, mu_hi)};
  const Point p3{mu_hi, b(chi2_q1, mu_hi)}, p4{mu_lo, b(chi2_q1, mu_lo)};
  const int k = edge_points(points, 4);
  std::vector<Point> out;
  add_segment(out, p1, p2, k);
  add_segment(out, p2, p3, k);
  add_segment(out, p3, p4, k);
  add_segment(out, p4, p1, k);
  out.push_back(p1);
  return out;
}

RegionC2 build_c2(const MleEstimate& est, const GeneralizedScheme& scheme, Probability p) {
  const auto [q1, q2] = uniform_split(p);
  const int m = scheme.m();
  const double n = scheme.n();
  RegionC2 r{};
  r.mu_hat = est.mu_hat;
  r.sigma_hat = est.sigma_hat;
  r.m = m;
  r.n = n;
  r.p = p.value();
  r.q1 = q1;
  r.q2 = q2;
  auto mu_q = [&](double q) {
    return est.mu_hat -
           m * est.sigma_hat * special::f_quantile(Probability(q), 2, 2 * m - 2) / ((m - 1) * n);
  };
  r.mu_lo = mu_q(q2);
  r.mu_hi = mu_q(q1);
  r.chi2_q1 = special::chi2_quantile(Probability(q1), 2 * m);
  r.chi2_q2 = special::chi2_quantile(Probability(q2), 2 * m);
  return r;
}

// ---------------------------------------------------------------- C3

double RegionC3::g(double z) const {
  return ((c_p - (m + 1) * (std::log(sigma_hat) - std::log(z))) * z + m * sigma_hat) / n;
}

double RegionC3::statistic(const LocScale& theta) const {
  const double s = theta.sigma();
  return (m + 1) * std::log(sigma_hat / s) - (n * (mu_hat - theta.mu()) + m * sigma_hat) / s;
}

bool RegionC3::contains(const LocScale& theta) const {
  return theta.mu() <= mu_hat && statistic(theta) >= c_p;
}

std::vector<Point> RegionC3::boundary(int points) const {
  const int arc = std::max(2, points - edge_points(points, 4));
  std::vector<Point> out;
  out.reserve(static_cast<std::size_t>(points) + 1);
  // Lower-left arc mu_hat + g(sigma), sigma from Z_{-1} up to Z_0, log-spaced.
  const double la = std::log(z_m1), lb = std::log(z_0);
  for (int i = 0; i < arc; ++i) {
    const double s = std::exp(la + (lb - la) * i / (arc - 1));
    out.emplace_back(mu_hat + std::min(0.0, g(s)), s);
  }
  add_segment(out, {mu_hat, z_0}, {mu_hat, z_m1}, std::max(1, points - arc));
  out.emplace_back(out.front());
  return out;
}

namespace detail {

double c3_lambert_argument(int m, double c) {
  return -(static_cast<double>(m) / (m + 1)) * std::exp(c / (m + 1));
}

std::pair<double, double> c3_endpoints(int m, double sigma_hat, double c) {
  const double arg = c3_lambert_argument(m, c);
  if (arg < -std::exp(-1.0) * (1.0 + 4.0 * std::numeric_limits<double>::epsilon())) {
    throw DomainError("infeasible level: Lambert argument below -1/e");
  }
  const double x = std::max(arg, -std::exp(-1.0));
  const double scale = m * sigma_hat / (m + 1);
  return {-scale / special::lambert_wm1(x), -scale / special::lambert_w0(x)};
}

std::pair<double, double> delta_strip_bounds(int m, double c) {
  const double arg = std::max(c3_lambert_argument(m, c), -std::exp(-1.0));
  return {-(m + 1) * special::lambert_w0(arg), m * std::exp(1.0 + c / (m + 1))};
}

double delta_prob_unchecked(int m, double c) {
  const auto [y, z] = delta_strip_bounds(m, c);
  if (!(z > y)) return 0.0;
  const double slope = (m + 1) / z - 1.0;
  auto outer = [&](double v) {
    const double hi = slope * v;
    const double lo = std::max(0.0, (m + 1) * std::log(v / m) - v - c);
    if (!(hi > lo)) return 0.0;
    const auto inner =
        numerics::integrate([](double u) { return std::exp(-u); }, lo, hi, 1e-9);
    return inner.value * special::gamma_pdf(m - 1, v);
  };
  return numerics::integrate(outer, y, z, 1e-8).value;
}

}  // namespace detail

RegionC3 build_c3(const MleEstimate& est, const GeneralizedScheme& scheme, double c_p) {
  const int m = scheme.m();
  if (!(c_p < -m)) {
    throw DomainError("infeasible level: C3 needs c_p < -m (c_p = " + std::to_string(c_p) +
                      ", m = " + std::to_string(m) + ")");
  }
  RegionC3 r{};
  r.mu_hat = est.mu_hat;
  r.sigma_hat = est.sigma_hat;
  r.m = m;
  r.n = scheme.n();
  r.c_p = c_p;
  std::tie(r.z_m1, r.z_0) = detail::c3_endpoints(m, est.sigma_hat, c_p);
  return r;
}

double comprehensive_convex_hull_delta_prob(int m, double c_p) {
  if (m < 2) throw DomainError("Delta probability needs m >= 2");
  if (!(c_p < -m)) throw DomainError("infeasible level: Delta probability needs c_p < -m");
  return detail::delta_prob_unchecked(m, c_p);
}

// ---------------------------------------------------------------- C4

KsPivotRegion::KsPivotRegion(double d_p, bool trimmed) : d_(d_p), trimmed_(trimmed) {
  if (!(d_p > 0.0 && d_p < 1.0)) throw DomainError("d_p must lie in (0, 1)");
  auto gap = [this](double s) { return o(s) - lower(s); };
  // gap is concave with gap(1) = -ln(1-d) > 0.
  if (d_ >= 0.5) {
    s_lo_ = 0.0;
  } else {
    s_lo_ = numerics::bisect_root(gap, 0.0, 1.0);
  }
  if (!trimmed_ && d_ >= 0.5) {
    s_hi_ = kInf;
  } else {
    double hi = 2.0;
    while (gap(hi) >= 0.0) {
      hi *= 2.0;
      if (hi > 1e12) throw NumericError("C4: feasible s range does not close");
    }
    s_hi_ = numerics::bisect_root(gap, 1.0, hi);
  }
  u_zero_ = numerics::bisect_root([this](double s) { return h(s); }, 0.0, 1.0 - d_);
}

double KsPivotRegion::h(double x) const {
  if (x == 1.0) return 0.0;
  const double xlogx = x > 0.0 ? x * std::log(x) : 0.0;
  return std::log(d_ / std::abs(1.0 - x)) * (x - 1.0) + xlogx;
}

double KsPivotRegion::u(double x) const {
  return x < 1.0 - d_ ? h(x) : x * std::log1p(-d_);
}

double KsPivotRegion::o(double x) const {
  return x <= 1.0 / (1.0 - d_) ? -std::log1p(-d_) : h(x);
}

double KsPivotRegion::lower(double x) const {
  const double v = u(x);
  return trimmed_ ? std::max(v, 0.0) : v;
}

bool KsPivotRegion::contains(double s, double t) const {
  return lower(s) <= t && t <= o(s);
}

bool RegionC4::contains(const LocScale& theta) const {
  const double s = sigma_hat / theta.sigma();
  const double t = (mu_hat - theta.mu()) / theta.sigma();
  return pivot.contains(s, t);
}

std::vector<Point> RegionC4::boundary(int points) const {
  // Unbounded pieces (d_p >= 1/2) are cut at s in [1e-3, 1e3] for plotting.
  const double a = std::max(pivot.s_lo(), 1e-3);
  const double b = std::min(pivot.s_hi(), 1e3);
  const int half = std::max(2, points / 2);
  auto to_theta = [&](double s, double t) {
    const double sigma = sigma_hat / s;
    return Point{mu_hat - t * sigma, sigma};
  };
  std::vector<Point> out;
  out.reserve(2 * static_cast<std::size_t>(half) + 1);
  for (int i = 0; i < half; ++i) {
    const double s = a + (b - a) * i / (half - 1);
    out.push_back(to_theta(s, pivot.o(s)));
  }
  for (int i = half - 1; i >= 0; --i) {
    const double s = a + (b - a) * i / (half - 1);
    out.push_back(to_theta(s, std::min(pivot.lower(s), pivot.o(s))));
  }
  out.push_back(out.front());
  return out;
}

RegionC4 build_c4(const MleEstimate& est, double d_p, bool trimmed) {
  return RegionC4{est.mu_hat, est.sigma_hat, d_p, trimmed, KsPivotRegion(d_p, trimmed)};
}

// ---------------------------------------------------------------- dispatch and I/O

bool region_membership(const Region& region, const LocScale& theta) {
  return std::visit([&](const auto& r) { return r.contains(theta); }, region);
}

std::string region_tag(const Region& region) {
  struct Tag {
    std::string operator()(const RegionC1&) const { return "c1"; }
    std::string operator()(const RegionC2&) const { return "c2"; }
    std::string operator()(const RegionC3&) const { return "c3"; }
    std::string operator()(const RegionC4& r) const { return r.trimmed ? "c4pp" : "c4p"; }
  };
  return std::visit(Tag{}, region);
}

namespace {

nlohmann::json constants_of(const RegionC1& r) {
  return {{"mu_hat", r.mu_hat}, {"sigma_hat", r.sigma_hat}, {"m", r.m},       {"n", r.n},
          {"p", r.p},           {"q1", r.q1},               {"q2", r.q2},     {"sigma_lo", r.sigma_lo},
          {"sigma_hi", r.sigma_hi}};
}

nlohmann::json constants_of(const RegionC2& r) {
  return {{"mu_hat", r.mu_hat}, {"sigma_hat", r.sigma_hat}, {"m", r.m},
          {"n", r.n},           {"p", r.p},                 {"q1", r.q1},
          {"q2", r.q2},         {"mu_lo", r.mu_lo},         {"mu_hi", r.mu_hi},
          {"chi2_q1", r.chi2_q1}, {"chi2_q2", r.chi2_q2}};
}

nlohmann::json constants_of(const RegionC3& r) {
  return {{"mu_hat", r.mu_hat}, {"sigma_hat", r.sigma_hat}, {"m", r.m},    {"n", r.n},
          {"c_p", r.c_p},       {"z_m1", r.z_m1},           {"z_0", r.z_0}};
}

nlohmann::json constants_of(const RegionC4& r) {
  return {{"mu_hat", r.mu_hat}, {"sigma_hat", r.sigma_hat}, {"d_p", r.d_p},
          {"s_lo", r.pivot.s_lo()}, {"s_hi", std::isinf(r.pivot.s_hi()) ? nlohmann::json(nullptr)
                                                                      : nlohmann::json(r.pivot.s_hi())}};
}

template <class T>
T get(const nlohmann::json& c, const char* key) {
  if (!c.contains(key)) throw ParseError(std::string("region JSON: missing constant '") + key + "'");
  return c.at(key).get<T>();
}

}  // namespace

nlohmann::json region_to_json(const Region& region, int boundary_points) {
  nlohmann::json j;
  j["type"] = region_tag(region);
  j["constants"] = std::visit([](const auto& r) { return constants_of(r); }, region);
  nlohmann::json poly = nlohmann::json::array();
  for (const auto& [mu, sigma] :
       std::visit([&](const auto& r) { return r.boundary(boundary_points); }, region)) {
    poly.push_back({mu, sigma});
  }
  j["boundary"] = std::move(poly);
  return j;
}

Region region_from_json(const nlohmann::json& j) {
  try {
    const std::string type = j.at("type").get<std::string>();
    const auto& c = j.at("constants");
    if (type == "c1") {
      RegionC1 r{};
      r.mu_hat = get<double>(c, "mu_hat");
      r.sigma_hat = get<double>(c, "sigma_hat");
      r.m = get<int>(c, "m");
      r.n = get<double>(c, "n");
      r.p = get<double>(c, "p");
      r.q1 = get<double>(c, "q1");
      r.q2 = get<double>(c, "q2");
      r.sigma_lo = get<double>(c, "sigma_lo");
      r.sigma_hi = get<double>(c, "sigma_hi");
      return r;
    }
    if (type == "c2") {
      RegionC2 r{};
      r.mu_hat = get<double>(c, "mu_hat");
      r.sigma_hat = get<double>(c, "sigma_hat");
      r.m = get<int>(c, "m");
      r.n = get<double>(c, "n");
      r.p = get<double>(c, "p");
      r.q1 = get<double>(c, "q1");
      r.q2 = get<double>(c, "q2");
      r.mu_lo = get<double>(c, "mu_lo");
      r.mu_hi = get<double>(c, "mu_hi");
      r.chi2_q1 = get<double>(c, "chi2_q1");
      r.chi2_q2 = get<double>(c, "chi2_q2");
      return r;
    }
    if (type == "c3") {
      RegionC3 r{};
      r.mu_hat = get<double>(c, "mu_hat");
      r.sigma_hat = get<double>(c, "sigma_hat");
      r.m = get<int>(c, "m");
      r.n = get<double>(c, "n");
      r.c_p = get<double>(c, "c_p");
      r.z_m1 = get<double>(c, "z_m1");
      r.z_0 = get<double>(c, "z_0");
      return r;
    }
    if (type == "c4p" || type == "c4pp") {
      return build_c4({get<double>(c, "mu_hat"), get<double>(c, "sigma_hat")}, get<double>(c, "d_p"),
                      type == "c4pp");
    }
    throw ParseError("region JSON: unknown type '" + type + "'");
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("region JSON: ") + e.what());
  }
}

}  // namespace expband
