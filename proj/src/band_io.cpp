#include <algorithm>
#include <charconv>
#include <cmath>
#include <limits>
#include <ostream>
#include <sstream>

#include "expband/bands.hpp"
#include "expband/error.hpp"

namespace expband {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

std::string fmt(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

nlohmann::json num_or_null(double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr); }

double num_from(const nlohmann::json& j, double if_null) {
  return j.is_null() ? if_null : j.get<double>();
}

nlohmann::json exp_json(const ExpCdfAtom& a) {
  return {{"loc", a.loc}, {"scale", a.scale}, {"shift", a.shift}};
}

ExpCdfAtom exp_from(const nlohmann::json& j) {
  return {j.at("loc").get<double>(), j.at("scale").get<double>(), j.at("shift").get<double>()};
}

struct PieceToJson {
  nlohmann::json operator()(const ConstantAtom& a) const {
    return {{"type", "constant"}, {"value", a.value}};
  }
  nlohmann::json operator()(const ExpCdfAtom& a) const {
    auto j = exp_json(a);
    j["type"] = "expcdf";
    return j;
  }
  nlohmann::json operator()(const B3ArcAtom& a) const {
    return {{"type", "b3arc"}, {"mu_hat", a.mu_hat}, {"sigma_hat", a.sigma_hat},
            {"n", a.n},        {"m", a.m},           {"c_p", a.c_p}};
  }
  nlohmann::json operator()(const GridAtom& a) const {
    nlohmann::json j = {{"type", "grid"}, {"xs", a.xs}, {"ys", a.ys}};
    if (a.floor) j["floor"] = exp_json(*a.floor);
    if (a.ceil) j["ceil"] = exp_json(*a.ceil);
    return j;
  }
};

nlohmann::json boundary_json(const Boundary& b) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& p : b.pieces()) {
    auto j = std::visit(PieceToJson{}, p.f);
    j["x_lo"] = num_or_null(p.x_lo);
    j["x_hi"] = num_or_null(p.x_hi);
    arr.push_back(std::move(j));
  }
  return arr;
}

Boundary boundary_from(const nlohmann::json& arr) {
  std::vector<Piece> pieces;
  for (const auto& j : arr) {
    const std::string type = j.at("type").get<std::string>();
    PieceFunction f;
    if (type == "constant") {
      f = ConstantAtom{j.at("value").get<double>()};
    } else if (type == "expcdf") {
      f = exp_from(j);
    } else if (type == "b3arc") {
      f = B3ArcAtom{j.at("mu_hat").get<double>(), j.at("sigma_hat").get<double>(),
                    j.at("n").get<double>(), j.at("m").get<int>(), j.at("c_p").get<double>()};
    } else if (type == "grid") {
      GridAtom g{j.at("xs").get<std::vector<double>>(), j.at("ys").get<std::vector<double>>(),
                 std::nullopt, std::nullopt};
      if (j.contains("floor")) g.floor = exp_from(j.at("floor"));
      if (j.contains("ceil")) g.ceil = exp_from(j.at("ceil"));
      f = std::move(g);
    } else {
      throw ParseError("band JSON: unknown piece type '" + type + "'");
    }
    pieces.push_back({num_from(j.at("x_lo"), -kInf), num_from(j.at("x_hi"), kInf), std::move(f)});
  }
  return Boundary(std::move(pieces));
}

nlohmann::json scale_json(const MonotoneMap& s) {
  nlohmann::json j = {{"kind", s.name()}};
  if (s.kind() == MonotoneMap::Kind::table) {
    j["x"] = s.table_x();
    j["y"] = s.table_y();
  }
  return j;
}

MonotoneMap scale_from(const nlohmann::json& j) {
  const std::string kind = j.at("kind").get<std::string>();
  if (kind == "identity") return MonotoneMap::identity();
  if (kind == "log") return MonotoneMap::log();
  if (kind == "table") {
    return MonotoneMap::table(j.at("x").get<std::vector<double>>(), j.at("y").get<std::vector<double>>());
  }
  throw ParseError("band JSON: unknown scale '" + kind + "'");
}

}  // namespace

std::vector<double> band_x_grid(const Band& band, int points) {
  auto bps = band.breakpoints();
  double lo = bps.empty() ? 0.0 : bps.front();
  double hi = bps.empty() ? 1.0 : bps.back();
  const double span = std::max(hi - lo, 1e-3 * std::max(1.0, std::abs(hi)));
  // March right until the band has settled.
  double x = hi;
  for (int i = 0; i < 60; ++i) {
    const auto [l, u] = band.eval(x + span);
    const auto [l0, u0] = band.eval(x);
    x += span;
    if (u - l < 1e-4 || (std::abs(l - l0) < 1e-5 && std::abs(u - u0) < 1e-5)) break;
  }
  hi = x;
  lo -= 0.05 * (hi - lo);
  std::vector<double> xs;
  const int n = std::max(points, 2);
  for (int i = 0; i < n; ++i) xs.push_back(lo + (hi - lo) * i / (n - 1));
  for (double b : bps) {
    if (b >= lo && b <= hi) xs.push_back(b);
  }
  std::sort(xs.begin(), xs.end());
  xs.erase(std::unique(xs.begin(), xs.end()), xs.end());
  return xs;
}

void write_band_csv(std::ostream& out, const Band& band, int points) {
  out << "x,lower,upper\n";
  for (double x : band_x_grid(band, points)) {
    const auto [l, u] = band.eval(x);
    out << fmt(band.scale().inverse(x)) << ',' << fmt(l) << ',' << fmt(u) << '\n';
  }
}

nlohmann::json band_to_json(const Band& band, int points) {
  nlohmann::json j;
  j["kind"] = band.kind_name();
  j["base_kind"] = to_string(band.base_kind());
  j["level"] = band.level().value();
  j["nominal"] = band.nominal().value();
  j["constants"] = band.constants();
  j["scale"] = scale_json(band.scale());
  nlohmann::json tr = nlohmann::json::array();
  for (const auto& t : band.transforms()) {
    if (t.kind == ValueTransform::Kind::reliability) {
      tr.push_back({{"type", "reliability"}});
    } else {
      tr.push_back({{"type", "marginal"}, {"gammas", t.gammas}});
    }
  }
  j["transforms"] = std::move(tr);
  j["lower"] = boundary_json(band.base_lower());
  j["upper"] = boundary_json(band.base_upper());
  if (points > 0) {
    nlohmann::json xs = nlohmann::json::array(), ls = nlohmann::json::array(), us = nlohmann::json::array();
    for (double x : band_x_grid(band, points)) {
      const auto [l, u] = band.eval(x);
      xs.push_back(band.scale().inverse(x));
      ls.push_back(l);
      us.push_back(u);
    }
    j["samples"] = {{"x", xs}, {"lower", ls}, {"upper", us}};
  }
  return j;
}

Band band_from_json(const nlohmann::json& j) {
  try {
    Band band(band_kind_from_string(j.at("base_kind").get<std::string>()),
              boundary_from(j.at("lower")), boundary_from(j.at("upper")),
              Probability(j.at("level").get<double>()), Probability(j.at("nominal").get<double>()),
              j.at("constants"));
    for (const auto& t : j.at("transforms")) {
      const std::string type = t.at("type").get<std::string>();
      if (type == "reliability") {
        band = reliability_band(band);
      } else if (type == "marginal") {
        band = marginal_band(band, t.at("gammas").get<std::vector<double>>());
      } else {
        throw ParseError("band JSON: unknown transform '" + type + "'");
      }
    }
    return band.with_scale(scale_from(j.at("scale")));
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("band JSON: ") + e.what());
  }
}

void write_band_svg(std::ostream& out, const Band& band, const std::optional<LocScale>& fit,
                    int points) {
  constexpr double W = 800, H = 500, L = 60, R = 20, T = 30, B = 50;
  const auto xs = band_x_grid(band, points);
  const double x0 = band.scale().inverse(xs.front());
  const double x1 = band.scale().inverse(xs.back());
  auto px = [&](double x) { return L + (x - x0) / (x1 - x0) * (W - L - R); };
  auto py = [&](double y) { return H - B - y * (H - T - B); };

  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"800\" height=\"500\" viewBox=\"0 0 800 500\">\n";
  out << "<rect width=\"800\" height=\"500\" fill=\"white\"/>\n";
  out << "<text x=\"400\" y=\"20\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"14\">"
      << band.kind_name() << " (level " << band.level().value() << ")</text>\n";

  std::ostringstream upper, lower;
  for (double x : xs) upper << fmt(px(band.scale().inverse(x))) << ',' << fmt(py(band.upper(x))) << ' ';
  for (auto it = xs.rbegin(); it != xs.rend(); ++it) {
    lower << fmt(px(band.scale().inverse(*it))) << ',' << fmt(py(band.lower(*it))) << ' ';
  }
  out << "<polygon points=\"" << upper.str() << lower.str()
      << "\" fill=\"#9ecae1\" fill-opacity=\"0.6\" stroke=\"#3182bd\" stroke-width=\"1\"/>\n";

  if (fit) {
    std::ostringstream curve;
    for (double x : xs) {
      const double f = fit->cdf(x);
      curve << fmt(px(band.scale().inverse(x))) << ',' << fmt(py(band.transform_values(f, f).first)) << ' ';
    }
    out << "<polyline points=\"" << curve.str() << "\" fill=\"none\" stroke=\"#d62728\" stroke-width=\"1.5\"/>\n";
  }

  // Axes with five ticks each.
  out << "<line x1=\"" << L << "\" y1=\"" << H - B << "\" x2=\"" << W - R << "\" y2=\"" << H - B
      << "\" stroke=\"black\"/>\n";
  out << "<line x1=\"" << L << "\" y1=\"" << T << "\" x2=\"" << L << "\" y2=\"" << H - B
      << "\" stroke=\"black\"/>\n";
  for (int i = 0; i <= 5; ++i) {
    const double y = i / 5.0;
    const double x = x0 + (x1 - x0) * i / 5.0;
    std::ostringstream xl, yl;
    xl.precision(3);
    yl.precision(2);
    xl << x;
    yl << y;
    out << "<text x=\"" << fmt(px(x)) << "\" y=\"" << H - B + 18
        << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"11\">" << xl.str() << "</text>\n";
    out << "<text x=\"" << L - 8 << "\" y=\"" << fmt(py(y) + 4)
        << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\">" << yl.str() << "</text>\n";
  }
  out << "</svg>\n";
}

}  // namespace expband
