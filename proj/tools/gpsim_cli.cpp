// gpsim command line: run a configured suite of GP comparisons, compare a
// single benchmark pair, or list the available benchmark functions.

#include <cstdint>
#include <cstdio>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "gpsim/harness.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 1;

// "lo:hi" per dimension, comma separated, e.g. "-5:5,-5:5".
gpsim::Domain parse_domain(const std::string& text) {
  gpsim::Domain d;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const auto comma = text.find(',', pos);
    const std::string part = text.substr(pos, comma == std::string::npos ? std::string::npos : comma - pos);
    const auto colon = part.find(':');
    if (colon == std::string::npos) throw std::invalid_argument("domain entries must look like lo:hi");
    d.push_back({std::stod(part.substr(0, colon)), std::stod(part.substr(colon + 1))});
    if (comma == std::string::npos) break;
    pos = comma + 1;
  }
  return d;
}

void print_report(const gpsim::ExperimentResult& r) {
  const auto& rep = r.report;
  std::printf("fn_a            %s\n", r.spec.fn_a.label().c_str());
  std::printf("fn_b            %s\n", r.spec.fn_b.label().c_str());
  std::printf("grid            %d per dim, %lld points\n", r.spec.grid.prediction_resolution(),
              static_cast<long long>(r.fit_a.prediction.grid.rows()));
  std::printf("transform       a=%.6g b=%.6g clamped=%s\n", rep.transform.a, rep.transform.b,
              rep.transform.clamped ? "true" : "false");
  std::printf("d1              %.6f\n", rep.d1_raw);
  std::printf("d2              %.6f\n", rep.d2_raw);
  std::printf("rho             %.6f%s\n", rep.rho, rep.degenerate_rho ? " (degenerate)" : "");
  std::printf("s1 s2 s3        %.6f %.6f %.6f\n", rep.s1, rep.s2, rep.s3);
  std::printf("total           %.6f\n", rep.total);
  std::printf("lengthscale a/b %.6g %.6g\n", r.fit_a.hyper.lengthscale(), r.fit_b.hyper.lengthscale());
  std::printf("wall seconds    %.2f\n", r.wall_seconds);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Gaussian-process predictive distribution similarity"};
  app.require_subcommand(1);

  auto* run = app.add_subcommand("run", "Run every experiment of a suite config");
  std::string config_path, out_dir;
  std::optional<std::uint64_t> seed;
  std::optional<int> restarts;
  unsigned jobs = 1;
  run->add_option("--config", config_path, "Suite config (JSON)")->required();
  run->add_option("--out", out_dir, "Output directory")->required();
  run->add_option("--seed", seed, "Override every experiment's seed");
  run->add_option("--restarts", restarts, "Override optimizer restarts")->check(CLI::PositiveNumber);
  run->add_option("--jobs", jobs, "Experiments to run concurrently")->check(CLI::PositiveNumber);

  auto* compare = app.add_subcommand("compare", "Fit and compare a single pair");
  std::string fn_a, fn_b, domain_text, d1_text = "avg_relative_distance", d2_text = "none";
  gpsim::MeasureConfig measure;
  int points = 21;
  std::uint64_t cmp_seed = 0;
  int cmp_restarts = 5;
  double max_noise_ratio = 1e-6;
  compare->add_option("--fn-a", fn_a, "Function f, e.g. michalewicz:m=50")->required();
  compare->add_option("--fn-b", fn_b, "Function g, e.g. parabola")->required();
  compare->add_option("--eps1", measure.eps1, "Weight of the mean distance")->capture_default_str();
  compare->add_option("--eps2", measure.eps2, "Weight of the covariance distance")->capture_default_str();
  compare->add_option("--delta", measure.delta, "Residual tolerance")->capture_default_str();
  compare->add_option("--d1", d1_text, "avg_relative_distance | p_norm[:p] | fraction_differing")
      ->capture_default_str();
  compare->add_option("--d2", d2_text, "none | entrywise_frobenius | entrywise_max")->capture_default_str();
  compare->add_option("--domain", domain_text, "lo:hi per dimension, comma separated (default: fn-a's)");
  compare->add_option("--points", points, "Lattice points per dimension")->capture_default_str();
  compare->add_option("--seed", cmp_seed, "Optimizer seed")->capture_default_str();
  compare->add_option("--restarts", cmp_restarts, "Optimizer restarts")->capture_default_str();
  compare->add_option("--max-noise-ratio", max_noise_ratio, "Ceiling on noise variance relative to the target variance")
      ->capture_default_str();

  auto* list = app.add_subcommand("list-functions", "List benchmark functions");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kExitOk : kExitConfig;
  }

  if (*list) {
    for (const auto& line : gpsim::list_benchmarks()) std::cout << line << '\n';
    return kExitOk;
  }

  if (*compare) {
    gpsim::ExperimentSpec spec;
    try {
      spec.pair_id = "compare";
      spec.fn_a = gpsim::parse_benchmark(fn_a);
      spec.fn_b = gpsim::parse_benchmark(fn_b);
      spec.grid.domain = domain_text.empty() ? spec.fn_a.domain : parse_domain(domain_text);
      spec.grid.points_per_dim = points;
      gpsim::parse_d1_variant(d1_text, measure);
      measure.d2_variant = gpsim::parse_d2_variant(d2_text);
      spec.measure = measure;
      spec.seed = cmp_seed;
      spec.restarts = cmp_restarts;
      spec.max_noise_ratio = max_noise_ratio;
      spec.validate();
    } catch (const std::exception& e) {
      std::cerr << "error: " << e.what() << '\n';
      return kExitConfig;
    }
    try {
      print_report(gpsim::run_experiment(spec));
    } catch (const std::exception& e) {
      std::cerr << "error: " << e.what() << '\n';
      return 2;
    }
    return kExitOk;
  }

  gpsim::SuiteConfig cfg;
  try {
    cfg = gpsim::load_suite(config_path);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitConfig;
  }
  gpsim::SuiteOverrides ov;
  ov.seed = seed;
  ov.restarts = restarts;
  ov.jobs = jobs;
  const gpsim::SuiteResult result = gpsim::run_suite(cfg, ov);
  try {
    gpsim::write_outputs(result, out_dir);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitConfig;
  }
  for (const auto& e : result.entries) {
    if (e.ok())
      std::cerr << e.item.pair_id << ": total=" << e.result->report.total << " rho=" << e.result->report.rho
                << " d1=" << e.result->report.d1_raw << '\n';
    else
      std::cerr << "warning: " << e.item.pair_id << " failed (" << e.error << ")\n";
  }
  std::cerr << result.entries.size() << " experiments, " << result.warnings() << " warnings\n";
  return result.exit_code();
}
