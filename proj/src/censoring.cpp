#include "expband/censoring.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <numeric>
#include <sstream>

#include "expband/error.hpp"

namespace expband {

LocScale::LocScale(double mu, double sigma) : mu_(mu), sigma_(sigma) {
  if (!std::isfinite(mu)) throw DomainError("location must be finite");
  if (!(sigma > 0.0) || !std::isfinite(sigma)) {
    throw DomainError("scale must be positive and finite, got " + std::to_string(sigma));
  }
}

double LocScale::cdf(double x) const noexcept { return exp_cdf(mu_, sigma_, x); }

CensoringScheme::CensoringScheme(int n, std::vector<int> removals)
    : n_(n), removals_(std::move(removals)) {
  const int m = static_cast<int>(removals_.size());
  if (m < 2) throw DomainError("invalid scheme: need at least m = 2 observed failures");
  if (n < m) throw DomainError("invalid scheme: n < m");
  if (std::any_of(removals_.begin(), removals_.end(), [](int r) { return r < 0; })) {
    throw DomainError("invalid scheme: negative removal count");
  }
  const long total = std::accumulate(removals_.begin(), removals_.end(), 0L);
  if (total != n - m) {
    throw DomainError("invalid scheme: sum of removals " + std::to_string(total) +
                      " != n - m = " + std::to_string(n - m));
  }
}

CensoringScheme CensoringScheme::right_censored(int n, int m) {
  if (m < 2 || n < m) throw DomainError("invalid scheme: need 2 <= m <= n");
  std::vector<int> r(static_cast<std::size_t>(m), 0);
  r.back() = n - m;
  return CensoringScheme(n, std::move(r));
}

CensoringScheme CensoringScheme::complete(int n) { return right_censored(n, n); }

std::vector<double> CensoringScheme::gammas() const {
  std::vector<double> g(removals_.size());
  double suffix = 0.0;
  for (std::size_t j = removals_.size(); j-- > 0;) {
    suffix += removals_[j] + 1;
    g[j] = suffix;
  }
  return g;
}

std::vector<double> gammas(const CensoringScheme& scheme) { return scheme.gammas(); }

GeneralizedScheme::GeneralizedScheme(std::vector<double> gammas) : gammas_(std::move(gammas)) {
  if (gammas_.size() < 2) throw DomainError("invalid scheme: need at least two gammas");
  for (double g : gammas_) {
    if (!(g > 0.0) || !std::isfinite(g)) throw DomainError("invalid scheme: gammas must be positive");
  }
}

GeneralizedScheme::GeneralizedScheme(const CensoringScheme& scheme)
    : gammas_(scheme.gammas()), design_(scheme) {}

GeneralizedScheme GeneralizedScheme::sequential_order_statistics(int n,
                                                                 std::span<const double> alphas) {
  if (static_cast<int>(alphas.size()) > n) throw DomainError("more alphas than units");
  std::vector<double> g(alphas.size());
  for (std::size_t j = 0; j < alphas.size(); ++j) {
    g[j] = (n - static_cast<double>(j)) * alphas[j];
  }
  return GeneralizedScheme(std::move(g));
}

MonotoneMap MonotoneMap::table(std::vector<double> xs, std::vector<double> ys) {
  if (xs.size() != ys.size() || xs.size() < 2) {
    throw DomainError("invalid transform: table needs two or more (x, y) pairs");
  }
  for (std::size_t i = 1; i < xs.size(); ++i) {
    if (!(xs[i] > xs[i - 1]) || !(ys[i] > ys[i - 1])) {
      throw DomainError("invalid transform: table is not strictly increasing");
    }
  }
  return MonotoneMap(Kind::table, std::move(xs), std::move(ys));
}

namespace {

double interpolate(const std::vector<double>& from, const std::vector<double>& to, double v) {
  auto it = std::upper_bound(from.begin(), from.end(), v);
  std::size_t hi = std::clamp<std::size_t>(it - from.begin(), 1, from.size() - 1);
  const std::size_t lo = hi - 1;
  const double t = (v - from[lo]) / (from[hi] - from[lo]);
  return to[lo] + t * (to[hi] - to[lo]);
}

}  // namespace

double MonotoneMap::apply(double x) const {
  switch (kind_) {
    case Kind::identity: return x;
    case Kind::log:
      if (!(x > 0.0)) throw DomainError("log transform needs positive data");
      return std::log(x);
    case Kind::table: return interpolate(xs_, ys_, x);
  }
  return x;
}

double MonotoneMap::inverse(double y) const {
  switch (kind_) {
    case Kind::identity: return y;
    case Kind::log: return std::exp(y);
    case Kind::table: return interpolate(ys_, xs_, y);
  }
  return y;
}

std::string MonotoneMap::name() const {
  switch (kind_) {
    case Kind::identity: return "identity";
    case Kind::log: return "log";
    case Kind::table: return "table";
  }
  return "unknown";
}

ProgressiveSample::ProgressiveSample(GeneralizedScheme scheme, std::vector<double> times,
                                     MonotoneMap scale)
    : scheme_(std::move(scheme)), times_(std::move(times)), scale_(std::move(scale)) {
  if (static_cast<int>(times_.size()) != scheme_.m()) {
    throw DomainError("sample size " + std::to_string(times_.size()) +
                      " does not match scheme m = " + std::to_string(scheme_.m()));
  }
  for (std::size_t j = 0; j < times_.size(); ++j) {
    if (!std::isfinite(times_[j])) throw DomainError("non-finite failure time");
    if (j > 0 && times_[j] < times_[j - 1]) {
      throw DomainError("failure times must be nondecreasing (row " + std::to_string(j + 1) + ")");
    }
  }
}

MleEstimate mle(const ProgressiveSample& sample) {
  const auto& x = sample.times();
  const auto& g = sample.scheme().gammas();
  const int m = sample.m();
  double weighted = 0.0;
  for (int j = 1; j < m; ++j) weighted += g[j] * (x[j] - x[j - 1]);
  const double sigma_hat = weighted / m;
  if (!(sigma_hat > 0.0)) {
    throw DomainError("degenerate sample: all failure times are equal, sigma_hat = 0");
  }
  return {x.front(), sigma_hat};
}

Umvue umvue(const MleEstimate& est, const GeneralizedScheme& scheme) {
  const int m = scheme.m();
  const double sigma_tilde = m * est.sigma_hat / (m - 1);
  return {est.mu_hat - sigma_tilde / scheme.n(), sigma_tilde};
}

ProgressiveSample simulate_sample(const LocScale& theta, const GeneralizedScheme& scheme,
                                  RandomStream& stream) {
  const auto& g = scheme.gammas();
  std::vector<double> x(g.size());
  double acc = 0.0;
  for (std::size_t j = 0; j < g.size(); ++j) {
    acc += stream.exponential() / g[j];
    x[j] = theta.mu() + theta.sigma() * acc;
  }
  return ProgressiveSample(scheme, std::move(x));
}

ProgressiveSample g_transform(const ProgressiveSample& sample, const MonotoneMap& g) {
  if (sample.scale().kind() != MonotoneMap::Kind::identity) {
    throw DomainError("invalid transform: sample is already transformed");
  }
  std::vector<double> y;
  y.reserve(sample.times().size());
  for (double x : sample.times()) y.push_back(g.apply(x));
  return ProgressiveSample(sample.scheme(), std::move(y), g);
}

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

template <class T>
T parse_field(const std::string& text, int line, const char* what) {
  T value{};
  const char* first = text.data();
  const char* last = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec != std::errc() || ptr != last || text.empty()) {
    throw ParseError("line " + std::to_string(line) + ": cannot parse " + what + " '" + text + "'");
  }
  return value;
}

}  // namespace

ProgressiveSample read_sample_csv(std::istream& in) {
  std::string line;
  int lineno = 0;
  bool header_seen = false;
  std::vector<double> times;
  std::vector<int> removed;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string row = trim(line);
    if (row.empty() || row.front() == '#') continue;
    const auto comma = row.find(',');
    if (comma == std::string::npos || row.find(',', comma + 1) != std::string::npos) {
      throw ParseError("line " + std::to_string(lineno) + ": expected two comma-separated fields");
    }
    const std::string a = trim(std::string_view(row).substr(0, comma));
    const std::string b = trim(std::string_view(row).substr(comma + 1));
    if (!header_seen) {
      if (a != "time" || b != "removed") {
        throw ParseError("line " + std::to_string(lineno) + ": header must be 'time,removed'");
      }
      header_seen = true;
      continue;
    }
    times.push_back(parse_field<double>(a, lineno, "time"));
    const int r = parse_field<int>(b, lineno, "removed");
    if (r < 0) throw ParseError("line " + std::to_string(lineno) + ": negative removal count");
    removed.push_back(r);
  }
  if (!header_seen) throw ParseError("empty sample file");
  if (times.size() < 2) throw ParseError("sample needs at least two observed failures");
  const int m = static_cast<int>(times.size());
  const int n = m + std::accumulate(removed.begin(), removed.end(), 0);
  return ProgressiveSample(CensoringScheme(n, std::move(removed)), std::move(times));
}

ProgressiveSample read_sample_csv_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open sample file: " + path);
  return read_sample_csv(in);
}

void write_sample_csv(std::ostream& out, const ProgressiveSample& sample) {
  const auto& design = sample.scheme().design();
  if (!design) throw DomainError("sample has no removal design; cannot write time,removed CSV");
  out << "time,removed\n";
  char buf[64];
  for (int j = 0; j < sample.m(); ++j) {
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, sample.scale().inverse(sample.times()[j]));
    out << std::string_view(buf, ptr - buf) << ',' << design->removals()[j] << '\n';
  }
}

}  // namespace expband
