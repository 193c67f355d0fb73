#pragma once

// Experiment runner: fits a GP to each function of a benchmark pair on a
// shared lattice, compares the two predictive distributions and writes a
// CSV summary plus one JSON document (with plot data) per experiment.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "gpsim/benchmarks.hpp"
#include "gpsim/gp.hpp"
#include "gpsim/similarity.hpp"

namespace gpsim {

/// Exact header of the summary file.
inline constexpr const char* kSummaryHeader = "pair_id,fn_a,fn_b,a,b,clamped,d1,d2,rho,degenerate_rho,s1,s2,s3,total";

/// Malformed or unreadable suite configuration.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Failure inside one experiment; `stage` names the step that failed.
class ExperimentError : public std::runtime_error {
 public:
  ExperimentError(std::string stage, const std::string& what)
      : std::runtime_error(stage + ": " + what), stage_(std::move(stage)) {}
  [[nodiscard]] const std::string& stage() const { return stage_; }

 private:
  std::string stage_;
};

struct GridSpec {
  Domain domain;
  int points_per_dim = 21;
  int prediction_points_per_dim = 0;  // 0: predict on the training lattice

  [[nodiscard]] int prediction_resolution() const {
    return prediction_points_per_dim > 0 ? prediction_points_per_dim : points_per_dim;
  }
};

struct ExperimentSpec {
  std::string pair_id;
  BenchmarkFunction fn_a;
  BenchmarkFunction fn_b;
  GridSpec grid;
  MeasureConfig measure;
  std::uint64_t seed = 0;
  int restarts = 5;
  /// Ceiling on sigma_n^2 / sigma_f^2 during hyperparameter search. The
  /// benchmarks are noise-free, so the GPs are kept near-interpolating.
  double max_noise_ratio = 1e-6;

  void validate() const {
    if (fn_a.dimension() != fn_b.dimension())
      throw std::invalid_argument("functions " + fn_a.label() + " and " + fn_b.label() +
                                  " live in different dimensions");
    if (static_cast<int>(grid.domain.size()) != fn_a.dimension())
      throw std::invalid_argument("grid domain dimension does not match the functions");
    if (restarts < 1) throw std::invalid_argument("restarts must be >= 1");
    if (!(max_noise_ratio >= kNoiseFloorRatio))
      throw std::invalid_argument("max_noise_ratio must be at least the noise floor ratio");
    measure.validate();
  }
};

/// Fit and prediction of one side of a pair.
struct FunctionFit {
  Hyperparameters hyper;
  double lml = 0.0;
  Eigen::VectorXd samples;           // raw function values on the training lattice
  double max_train_residual = 0.0;   // max |mean - y| at training points, standardized units
  PredictiveDistribution prediction;
};

struct ExperimentResult {
  ExperimentSpec spec;
  SimilarityReport report;
  FunctionFit fit_a;
  FunctionFit fit_b;
  double wall_seconds = 0.0;
};

namespace detail {

inline FunctionFit fit_function(const BenchmarkFunction& fn, const Points& train, const Points& query,
                                const ExperimentSpec& spec, const char* tag) {
  FunctionFit out;
  const std::string side(tag);
  Dataset data;
  try {
    out.samples = sample(fn, train);
    data = Dataset::standardize(train, out.samples);
  } catch (const std::exception& e) {
    throw ExperimentError("sample " + side, e.what());
  }
  FittedGP fitted;
  try {
    OptimizerOptions opt;
    opt.max_noise_ratio = spec.max_noise_ratio;
    const auto opt_result = optimize_hyperparameters_detailed(data, spec.restarts, spec.seed, opt);
    fitted = fit(data, opt_result.best);
  } catch (const std::exception& e) {
    throw ExperimentError("fit " + side, e.what());
  }
  out.hyper = fitted.hyper;
  out.lml = fitted.lml;
  try {
    const PredictiveDistribution at_train = predict(fitted, train);
    out.max_train_residual =
        ((at_train.mean - out.samples).array().abs() / data.y_std).maxCoeff();
    out.prediction = query.rows() == train.rows() && (query.array() == train.array()).all()
                         ? at_train
                         : predict(fitted, query);
  } catch (const std::exception& e) {
    throw ExperimentError("predict " + side, e.what());
  }
  return out;
}

}  // namespace detail

/// Samples both functions, fits and predicts each on the shared grid and
/// applies the similarity measure (f = fn_a aligned onto g = fn_b).
inline ExperimentResult run_experiment(const ExperimentSpec& spec) {
  const auto t0 = std::chrono::steady_clock::now();
  try {
    spec.validate();
  } catch (const std::exception& e) {
    throw ExperimentError("validate", e.what());
  }

  ExperimentResult result;
  result.spec = spec;
  result.spec.fn_a = spec.fn_a.with_domain(spec.grid.domain);
  result.spec.fn_b = spec.fn_b.with_domain(spec.grid.domain);

  Points train, query;
  try {
    train = grid(spec.grid.domain, spec.grid.points_per_dim);
    query = grid(spec.grid.domain, spec.grid.prediction_resolution());
  } catch (const std::exception& e) {
    throw ExperimentError("grid", e.what());
  }

  result.fit_a = detail::fit_function(result.spec.fn_a, train, query, spec, "a");
  result.fit_b = detail::fit_function(result.spec.fn_b, train, query, spec, "b");
  try {
    result.report = similarity(result.fit_a.prediction, result.fit_b.prediction, spec.measure);
  } catch (const std::exception& e) {
    throw ExperimentError("measure", e.what());
  }
  result.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return result;
}

// ---------------------------------------------------------------------------
// Suite configuration

/// One configured experiment: either a parsed spec or the reason it could not be parsed.
struct SuiteItem {
  std::string pair_id;
  std::string fn_a;
  std::string fn_b;
  std::optional<ExperimentSpec> spec;
  std::string parse_error;
};

struct SuiteConfig {
  std::vector<SuiteItem> items;
};

namespace detail {

inline MeasureConfig parse_measure(const nlohmann::json& j, MeasureConfig m) {
  if (j.contains("eps1")) m.eps1 = j.at("eps1").get<double>();
  if (j.contains("eps2")) m.eps2 = j.at("eps2").get<double>();
  if (j.contains("delta")) m.delta = j.at("delta").get<double>();
  if (j.contains("d1")) parse_d1_variant(j.at("d1").get<std::string>(), m);
  if (j.contains("p")) m.p = j.at("p").get<double>();
  if (j.contains("d2")) m.d2_variant = parse_d2_variant(j.at("d2").get<std::string>());
  return m;
}

struct SuiteDefaults {
  MeasureConfig measure;
  std::uint64_t seed = 0;
  int restarts = 5;
  int points_per_dim = 21;
  int prediction_points_per_dim = 0;
  double max_noise_ratio = 1e-6;
};

inline SuiteDefaults apply_common(const nlohmann::json& j, SuiteDefaults d) {
  if (j.contains("measure")) d.measure = parse_measure(j.at("measure"), d.measure);
  if (j.contains("seed")) d.seed = j.at("seed").get<std::uint64_t>();
  if (j.contains("restarts")) d.restarts = j.at("restarts").get<int>();
  if (j.contains("points_per_dim")) d.points_per_dim = j.at("points_per_dim").get<int>();
  if (j.contains("prediction_points_per_dim"))
    d.prediction_points_per_dim = j.at("prediction_points_per_dim").get<int>();
  if (j.contains("max_noise_ratio")) d.max_noise_ratio = j.at("max_noise_ratio").get<double>();
  return d;
}

inline ExperimentSpec parse_experiment(const nlohmann::json& j, const SuiteDefaults& defaults,
                                       const SuiteItem& item) {
  const SuiteDefaults d = apply_common(j, defaults);
  ExperimentSpec spec;
  spec.pair_id = item.pair_id;
  spec.fn_a = parse_benchmark(item.fn_a);
  spec.fn_b = parse_benchmark(item.fn_b);
  if (j.contains("domain")) {
    for (const auto& iv : j.at("domain")) {
      if (!iv.is_array() || iv.size() != 2) throw std::invalid_argument("domain entries must be [lo, hi]");
      spec.grid.domain.push_back({iv[0].get<double>(), iv[1].get<double>()});
    }
  } else {
    spec.grid.domain = spec.fn_a.domain;
  }
  spec.grid.points_per_dim = d.points_per_dim;
  spec.grid.prediction_points_per_dim = d.prediction_points_per_dim;
  spec.measure = d.measure;
  spec.seed = d.seed;
  spec.restarts = d.restarts;
  spec.max_noise_ratio = d.max_noise_ratio;
  spec.validate();
  return spec;
}

}  // namespace detail

/// Parses a suite document. Structural problems raise ConfigError; a
/// malformed experiment entry is kept as an item carrying its parse error.
inline SuiteConfig parse_suite(const nlohmann::json& doc) {
  if (!doc.is_object()) throw ConfigError("suite config must be a JSON object");
  if (!doc.contains("experiments") || !doc.at("experiments").is_array())
    throw ConfigError("suite config needs an \"experiments\" array");

  detail::SuiteDefaults defaults;
  try {
    if (doc.contains("defaults")) defaults = detail::apply_common(doc.at("defaults"), defaults);
    defaults.measure.validate();
  } catch (const std::exception& e) {
    throw ConfigError(std::string("invalid defaults: ") + e.what());
  }

  SuiteConfig cfg;
  std::size_t index = 0;
  for (const auto& j : doc.at("experiments")) {
    SuiteItem item;
    item.pair_id = "experiment_" + std::to_string(index++);
    try {
      if (!j.is_object()) throw std::invalid_argument("experiment entry must be an object");
      if (j.contains("id")) item.pair_id = j.at("id").get<std::string>();
      item.fn_a = j.at("fn_a").get<std::string>();
      item.fn_b = j.at("fn_b").get<std::string>();
      item.spec = detail::parse_experiment(j, defaults, item);
    } catch (const std::exception& e) {
      item.parse_error = e.what();
    }
    cfg.items.push_back(std::move(item));
  }
  return cfg;
}

inline SuiteConfig load_suite(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("cannot parse " + path.string() + ": " + e.what());
  }
  return parse_suite(doc);
}

// ---------------------------------------------------------------------------
// Running and reporting

struct SuiteEntry {
  SuiteItem item;
  std::optional<ExperimentResult> result;
  std::string error;
  std::string stage;

  [[nodiscard]] bool ok() const { return result.has_value(); }
};

struct SuiteResult {
  std::vector<SuiteEntry> entries;

  [[nodiscard]] std::size_t failures() const {
    return static_cast<std::size_t>(std::count_if(entries.begin(), entries.end(),
                                                  [](const SuiteEntry& e) { return !e.ok(); }));
  }
  [[nodiscard]] std::size_t warnings() const { return failures(); }

  /// 0 success, 2 every experiment failed, 3 some failed.
  [[nodiscard]] int exit_code() const {
    const std::size_t f = failures();
    if (f == 0) return 0;
    return f == entries.size() ? 2 : 3;
  }
};

struct SuiteOverrides {
  std::optional<std::uint64_t> seed;
  std::optional<int> restarts;
  unsigned jobs = 1;
};

inline SuiteEntry run_item(const SuiteItem& item, const SuiteOverrides& ov) {
  SuiteEntry entry{item, std::nullopt, {}, {}};
  if (!item.spec) {
    entry.error = item.parse_error;
    entry.stage = "config";
    return entry;
  }
  ExperimentSpec spec = *item.spec;
  if (ov.seed) spec.seed = *ov.seed;
  if (ov.restarts) spec.restarts = *ov.restarts;
  try {
    entry.result = run_experiment(spec);
  } catch (const ExperimentError& e) {
    entry.error = e.what();
    entry.stage = e.stage();
  } catch (const std::exception& e) {
    entry.error = e.what();
    entry.stage = "unknown";
  }
  return entry;
}

/// Runs every item; up to `jobs` experiments execute concurrently and results
/// keep the configured order.
inline SuiteResult run_suite(const SuiteConfig& cfg, const SuiteOverrides& ov = {}) {
  SuiteResult out;
  out.entries.resize(cfg.items.size());
  const std::size_t n = cfg.items.size();
  const std::size_t jobs = std::max<std::size_t>(1, std::min<std::size_t>(ov.jobs, n));
  if (jobs <= 1) {
    for (std::size_t i = 0; i < n; ++i) out.entries[i] = run_item(cfg.items[i], ov);
    return out;
  }
  std::vector<std::thread> workers;
  for (std::size_t w = 0; w < jobs; ++w)
    workers.emplace_back([&, w] {
      for (std::size_t i = w; i < n; i += jobs) out.entries[i] = run_item(cfg.items[i], ov);
    });
  for (auto& t : workers) t.join();
  return out;
}

namespace detail {

inline std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string q = "\"";
  for (char c : s) {
    if (c == '"') q += '"';
    q += c;
  }
  return q + "\"";
}

inline std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline std::string file_stem(const std::string& id) {
  std::string s = id;
  for (char& c : s)
    if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_' || c == '.')) c = '_';
  return s.empty() ? "experiment" : s;
}

inline nlohmann::json to_json(const Hyperparameters& h) {
  return {{"lengthscale", h.lengthscale()},
          {"signal_variance", h.signal_variance()},
          {"noise_variance", h.noise_variance()}};
}

inline nlohmann::json to_json(const Eigen::VectorXd& v) {
  return nlohmann::json(std::vector<double>(v.data(), v.data() + v.size()));
}

}  // namespace detail

/// One CSV row per entry; failed entries keep their identifiers and leave
/// the numeric fields empty.
inline std::string summary_row(const SuiteEntry& e) {
  using detail::csv_field;
  using detail::fmt;
  std::string row = csv_field(e.item.pair_id) + ',' + csv_field(e.item.fn_a) + ',' + csv_field(e.item.fn_b);
  if (!e.ok()) return row + ",,,,,,,,,,,";
  const SimilarityReport& r = e.result->report;
  row += ',' + fmt(r.transform.a) + ',' + fmt(r.transform.b) + ',' + (r.transform.clamped ? "true" : "false");
  row += ',' + fmt(r.d1_raw) + ',' + fmt(r.d2_raw) + ',' + fmt(r.rho) + ',' + (r.degenerate_rho ? "true" : "false");
  row += ',' + fmt(r.s1) + ',' + fmt(r.s2) + ',' + fmt(r.s3) + ',' + fmt(r.total);
  return row;
}

inline std::string summary_csv(const SuiteResult& result) {
  std::string out = std::string(kSummaryHeader) + '\n';
  for (const auto& e : result.entries) out += summary_row(e) + '\n';
  return out;
}

/// Structured result document, including the plot data for the pair.
inline nlohmann::json result_document(const SuiteEntry& e) {
  nlohmann::json j;
  j["pair_id"] = e.item.pair_id;
  j["fn_a"] = e.item.fn_a;
  j["fn_b"] = e.item.fn_b;
  if (!e.ok()) {
    j["status"] = "error";
    j["stage"] = e.stage;
    j["error"] = e.error;
    return j;
  }
  const ExperimentResult& r = *e.result;
  const ExperimentSpec& s = r.spec;
  j["status"] = "ok";
  nlohmann::json domain = nlohmann::json::array();
  for (const auto& iv : s.grid.domain) domain.push_back({iv.lo, iv.hi});
  j["spec"] = {{"domain", domain},
               {"points_per_dim", s.grid.points_per_dim},
               {"prediction_points_per_dim", s.grid.prediction_resolution()},
               {"seed", s.seed},
               {"restarts", s.restarts},
               {"max_noise_ratio", s.max_noise_ratio},
               {"measure",
                {{"eps1", s.measure.eps1},
                 {"eps2", s.measure.eps2},
                 {"delta", s.measure.delta},
                 {"d1", std::string(to_string(s.measure.d1_variant))},
                 {"p", s.measure.p},
                 {"d2", std::string(to_string(s.measure.d2_variant))}}}};
  const SimilarityReport& rep = r.report;
  j["report"] = {{"a", rep.transform.a},   {"b", rep.transform.b},   {"clamped", rep.transform.clamped},
                 {"d1", rep.d1_raw},       {"d2", rep.d2_raw},       {"rho", rep.rho},
                 {"degenerate_rho", rep.degenerate_rho},
                 {"s1", rep.s1},           {"s2", rep.s2},           {"s3", rep.s3},
                 {"total", rep.total}};
  j["fits"] = {{"a", {{"hyperparameters", detail::to_json(r.fit_a.hyper)}, {"lml", r.fit_a.lml},
                      {"max_train_residual", r.fit_a.max_train_residual}}},
               {"b", {{"hyperparameters", detail::to_json(r.fit_b.hyper)}, {"lml", r.fit_b.lml},
                      {"max_train_residual", r.fit_b.max_train_residual}}}};
  nlohmann::json grid_pts = nlohmann::json::array();
  const Points& g = r.fit_a.prediction.grid;
  for (Eigen::Index i = 0; i < g.rows(); ++i) {
    const Eigen::RowVectorXd p = g.row(i);
    grid_pts.push_back(std::vector<double>(p.data(), p.data() + p.size()));
  }
  j["plot"] = {{"grid", grid_pts},
               {"mean_a", detail::to_json(r.fit_a.prediction.mean)},
               {"mean_b", detail::to_json(r.fit_b.prediction.mean)},
               {"std_a", detail::to_json(r.fit_a.prediction.stddev())},
               {"std_b", detail::to_json(r.fit_b.prediction.stddev())}};
  j["wall_seconds"] = r.wall_seconds;
  return j;
}

/// Writes summary.csv and <pair_id>.json for every entry into `dir`.
inline void write_outputs(const SuiteResult& result, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  {
    std::ofstream out(dir / "summary.csv", std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + (dir / "summary.csv").string());
    out << summary_csv(result);
  }
  for (const auto& e : result.entries) {
    std::ofstream out(dir / (detail::file_stem(e.item.pair_id) + ".json"), std::ios::binary);
    out << result_document(e).dump(2) << '\n';
  }
}

}  // namespace gpsim
