#pragma once

// Benchmark objectives used to exercise the similarity measure, and the
// evenly spaced lattices they are sampled on.

#include <array>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <map>
#include <numbers>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "gpsim/kernel.hpp"

namespace gpsim {

enum class BenchmarkId { michalewicz, parabola, styblinski_tang, ellipsoid, sphere, griewank, levy, ackley };

struct Interval {
  double lo = 0.0;
  double hi = 1.0;
  friend bool operator==(const Interval&, const Interval&) = default;
};

using Domain = std::vector<Interval>;

struct BenchmarkFunction {
  BenchmarkId id = BenchmarkId::sphere;
  double m = 10.0;    // michalewicz steepness
  double a = 20.0;    // ackley
  double b = 0.2;     // ackley
  double c = 2.0 * std::numbers::pi;  // ackley
  Domain domain;

  [[nodiscard]] int dimension() const { return static_cast<int>(domain.size()); }

  [[nodiscard]] BenchmarkFunction with_domain(Domain d) const {
    if (d.size() != domain.size())
      throw std::invalid_argument("with_domain: dimension differs from the function's");
    BenchmarkFunction f = *this;
    f.domain = std::move(d);
    return f;
  }

  [[nodiscard]] std::string label() const;
};

namespace detail {

// sin(pi * x), exact at integers.
inline double sin_pi(double x) {
  const double n = std::nearbyint(x);
  const double s = std::sin(std::numbers::pi * (x - n));
  return std::fmod(n, 2.0) == 0.0 ? s : -s;
}

inline double sq(double x) { return x * x; }

inline std::string format_number(double v) {
  // Multiples of pi print symbolically so labels stay readable.
  const double k = v / std::numbers::pi;
  if (v != 0.0 && std::abs(k - std::nearbyint(k)) < 1e-12 && std::abs(k) < 1000) {
    const auto ki = static_cast<long>(std::nearbyint(k));
    return ki == 1 ? std::string("pi") : std::to_string(ki) + "pi";
  }
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

inline double parse_number(std::string_view s) {
  if (s.empty()) throw std::invalid_argument("empty numeric parameter");
  double scale = 1.0;
  if (s.ends_with("pi")) {
    scale = std::numbers::pi;
    s.remove_suffix(2);
    if (s.empty()) return scale;
  }
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size())
    throw std::invalid_argument("bad numeric parameter '" + std::string(s) + "'");
  return v * scale;
}

struct BenchmarkInfo {
  BenchmarkId id;
  const char* name;
  Domain default_domain;
};

inline const std::vector<BenchmarkInfo>& benchmark_table() {
  static const std::vector<BenchmarkInfo> table = {
      {BenchmarkId::michalewicz, "michalewicz", {{0.0, std::numbers::pi}}},
      {BenchmarkId::parabola, "parabola", {{-2.0, 2.0}}},
      {BenchmarkId::styblinski_tang, "styblinski_tang", {{-5.0, 5.0}, {-5.0, 5.0}}},
      {BenchmarkId::ellipsoid, "ellipsoid", {{-5.0, 5.0}, {-5.0, 5.0}}},
      {BenchmarkId::sphere, "sphere", {{-5.0, 5.0}, {-5.0, 5.0}}},
      {BenchmarkId::griewank, "griewank", {{-5.0, 5.0}, {-5.0, 5.0}}},
      {BenchmarkId::levy, "levy", {{-10.0, 10.0}, {-10.0, 10.0}}},
      {BenchmarkId::ackley, "ackley", {{-5.0, 5.0}, {-5.0, 5.0}}},
  };
  return table;
}

inline const BenchmarkInfo& info(BenchmarkId id) {
  for (const auto& e : benchmark_table())
    if (e.id == id) return e;
  throw std::invalid_argument("unknown benchmark id");
}

}  // namespace detail

inline BenchmarkFunction make_benchmark(BenchmarkId id) {
  BenchmarkFunction f;
  f.id = id;
  f.domain = detail::info(id).default_domain;
  return f;
}

inline BenchmarkFunction make_michalewicz(double m) {
  auto f = make_benchmark(BenchmarkId::michalewicz);
  f.m = m;
  return f;
}

inline BenchmarkFunction make_ackley(double a, double b, double c) {
  auto f = make_benchmark(BenchmarkId::ackley);
  f.a = a;
  f.b = b;
  f.c = c;
  return f;
}

inline std::string BenchmarkFunction::label() const {
  std::string s = detail::info(id).name;
  if (id == BenchmarkId::michalewicz) s += ":m=" + detail::format_number(m);
  if (id == BenchmarkId::ackley)
    s += ":a=" + detail::format_number(a) + ",b=" + detail::format_number(b) +
         ",c=" + detail::format_number(c);
  return s;
}

/// Parses "id[:key=value,...]", e.g. "michalewicz:m=50" or
/// "ackley:a=20,b=0.2,c=6pi". Values accept a trailing "pi" multiplier.
inline BenchmarkFunction parse_benchmark(std::string_view text) {
  const auto colon = text.find(':');
  const std::string_view name = text.substr(0, colon);
  const detail::BenchmarkInfo* entry = nullptr;
  for (const auto& e : detail::benchmark_table())
    if (name == e.name) entry = &e;
  if (entry == nullptr) throw std::invalid_argument("unknown benchmark function '" + std::string(name) + "'");
  BenchmarkFunction f = make_benchmark(entry->id);
  if (colon == std::string_view::npos) return f;

  std::string_view rest = text.substr(colon + 1);
  while (!rest.empty()) {
    const auto comma = rest.find(',');
    const std::string_view kv = rest.substr(0, comma);
    rest = comma == std::string_view::npos ? std::string_view{} : rest.substr(comma + 1);
    const auto eq = kv.find('=');
    if (eq == std::string_view::npos)
      throw std::invalid_argument("expected key=value in '" + std::string(kv) + "'");
    const std::string_view key = kv.substr(0, eq);
    const double value = detail::parse_number(kv.substr(eq + 1));
    if (f.id == BenchmarkId::michalewicz && key == "m") {
      if (!(value >= 1.0)) throw std::invalid_argument("michalewicz: m must be >= 1");
      f.m = value;
    } else if (f.id == BenchmarkId::ackley && key == "a") {
      f.a = value;
    } else if (f.id == BenchmarkId::ackley && key == "b") {
      f.b = value;
    } else if (f.id == BenchmarkId::ackley && key == "c") {
      f.c = value;
    } else {
      throw std::invalid_argument("parameter '" + std::string(key) + "' not accepted by " +
                                  std::string(name));
    }
  }
  return f;
}

template <typename Derived>
double evaluate(const BenchmarkFunction& fn, const Eigen::MatrixBase<Derived>& x) {
  if (x.size() != fn.dimension())
    throw std::invalid_argument("evaluate: point dimension does not match " + fn.label());
  for (int i = 0; i < fn.dimension(); ++i)
    if (!(x(i) >= fn.domain[i].lo && x(i) <= fn.domain[i].hi))
      throw std::invalid_argument("evaluate: point outside the domain of " + fn.label());

  using detail::sq;
  constexpr double pi = std::numbers::pi;
  switch (fn.id) {
    case BenchmarkId::michalewicz: {
      const double s = std::sin(x(0) * x(0) / pi);
      return -std::sin(x(0)) * std::pow(s * s, fn.m);
    }
    case BenchmarkId::parabola:
      return x(0) * x(0);
    case BenchmarkId::styblinski_tang: {
      double acc = 0.0;
      for (int i = 0; i < 2; ++i) acc += std::pow(x(i), 4) - 16.0 * sq(x(i)) + 5.0 * x(i);
      return 0.5 * acc;
    }
    case BenchmarkId::ellipsoid: {
      double acc = 0.0, inner = 0.0;
      for (int i = 0; i < 2; ++i) {
        inner += sq(x(i));
        acc += inner;
      }
      return acc;
    }
    case BenchmarkId::sphere:
      return sq(x(0)) + sq(x(1));
    case BenchmarkId::griewank:
      return (sq(x(0)) + sq(x(1))) / 4000.0 - std::cos(x(0)) * std::cos(x(1) / std::sqrt(2.0)) + 1.0;
    case BenchmarkId::levy: {
      const double w1 = 1.0 + (x(0) - 1.0) / 4.0;
      const double w2 = 1.0 + (x(1) - 1.0) / 4.0;
      return sq(detail::sin_pi(w1)) + sq(w1 - 1.0) * (1.0 + 10.0 * sq(std::sin(pi * w1 + 1.0))) +
             sq(w2 - 1.0) * (1.0 + sq(detail::sin_pi(2.0 * w2)));
    }
    case BenchmarkId::ackley: {
      const double d = 2.0;
      const double r = std::sqrt((sq(x(0)) + sq(x(1))) / d);
      const double cs = (std::cos(fn.c * x(0)) + std::cos(fn.c * x(1))) / d;
      return -fn.a * std::exp(-fn.b * r) - std::exp(cs) + fn.a + std::numbers::e;
    }
  }
  throw std::invalid_argument("evaluate: unknown benchmark");
}

inline double evaluate(const BenchmarkFunction& fn, std::initializer_list<double> x) {
  Eigen::VectorXd v(static_cast<Eigen::Index>(x.size()));
  Eigen::Index i = 0;
  for (double xi : x) v[i++] = xi;
  return evaluate(fn, v);
}

/// Evaluates `fn` at every row of `points`.
inline Eigen::VectorXd sample(const BenchmarkFunction& fn, const Points& points) {
  Eigen::VectorXd y(points.rows());
  for (Eigen::Index i = 0; i < points.rows(); ++i) y[i] = evaluate(fn, points.row(i));
  return y;
}

/// Evenly spaced lattice with both endpoints, row-major (last coordinate fastest).
inline Points grid(const Domain& domain, int points_per_dim) {
  if (domain.empty()) throw std::invalid_argument("grid: empty domain");
  if (points_per_dim < 2) throw std::invalid_argument("grid: need at least two points per dimension");
  for (const auto& iv : domain)
    if (!(iv.hi > iv.lo) || !std::isfinite(iv.lo) || !std::isfinite(iv.hi))
      throw std::invalid_argument("grid: degenerate interval");

  const auto d = static_cast<Eigen::Index>(domain.size());
  Eigen::Index total = 1;
  for (Eigen::Index k = 0; k < d; ++k) total *= points_per_dim;

  std::vector<std::vector<double>> axes;
  for (const auto& iv : domain) {
    std::vector<double> axis(static_cast<std::size_t>(points_per_dim));
    const double step = (iv.hi - iv.lo) / (points_per_dim - 1);
    for (int i = 0; i < points_per_dim; ++i) axis[static_cast<std::size_t>(i)] = iv.lo + i * step;
    axis.back() = iv.hi;
    axes.push_back(std::move(axis));
  }

  Points P(total, d);
  for (Eigen::Index row = 0; row < total; ++row) {
    Eigen::Index rem = row;
    for (Eigen::Index k = d - 1; k >= 0; --k) {
      P(row, k) = axes[static_cast<std::size_t>(k)][static_cast<std::size_t>(rem % points_per_dim)];
      rem /= points_per_dim;
    }
  }
  return P;
}

/// Names accepted by parse_benchmark, with their parameters and default domains.
inline std::vector<std::string> list_benchmarks() {
  std::vector<std::string> out;
  for (const auto& e : detail::benchmark_table()) {
    std::string line = e.name;
    if (e.id == BenchmarkId::michalewicz) line += "[:m=<m>]";
    if (e.id == BenchmarkId::ackley) line += "[:a=<a>,b=<b>,c=<c>]";
    line += "  dim=" + std::to_string(e.default_domain.size()) + "  domain=";
    for (std::size_t i = 0; i < e.default_domain.size(); ++i) {
      if (i) line += "x";
      line += "[" + detail::format_number(e.default_domain[i].lo) + "," +
              detail::format_number(e.default_domain[i].hi) + "]";
    }
    out.push_back(std::move(line));
  }
  return out;
}

}  // namespace gpsim
