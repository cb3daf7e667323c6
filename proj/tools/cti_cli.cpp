// Command-line experiment runner.
//
//   cti_cli --scenario hetero-gauss --methods cti-forest,cqr,split --reps 10 --out results
//   cti_cli --config experiment.cfg --alpha 0.05
//
// Exit status: 0 success, 1 invalid configuration, 2 runtime failure.

#include "cti/experiment.hpp"

#include <CLI11.hpp>

#include <iostream>
#include <optional>

int main(int argc, char** argv) {
  CLI::App app{"Conformal thresholded intervals: calibrate and benchmark prediction sets"};

  std::string config_path;
  std::optional<std::string> dataset, scenario, methods, out, boundary, response;
  std::optional<double> alpha;
  std::optional<int> K, reps;
  std::optional<std::uint64_t> seed;
  std::vector<std::string> settings;
  bool validate_only = false;

  app.add_option("--config", config_path, "Key-value config file")->check(CLI::ExistingFile);
  app.add_option("--dataset", dataset, "Dataset CSV with a header row");
  app.add_option("--response", response, "Response column of the dataset");
  app.add_option("--scenario", scenario, "Synthetic scenario: hetero-gauss, bimodal, lognormal, uniform");
  app.add_option("--alpha", alpha, "Miscoverage level in (0, 1)");
  app.add_option("--K", K, "Number of interquantile intervals");
  app.add_option("--methods", methods, "Comma list of cti-forest, cti-pinball, cti-harmonic, split, cqr");
  app.add_option("--reps", reps, "Repetitions");
  app.add_option("--seed", seed, "Root seed (u64); repetition r uses seed + r");
  app.add_option("--out", out, "Output directory");
  app.add_option("--boundary", boundary, "Boundary policy: clamp or infinite");
  app.add_option("--set", settings, "Extra key=value config overrides (repeatable)");
  app.add_flag("--validate", validate_only, "Only validate the configuration");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  cti::ExperimentConfig cfg;
  try {
    if (!config_path.empty()) cfg = cti::load_config(config_path);
    if (dataset) cfg.dataset_path = *dataset;
    if (scenario) cfg.scenario = *scenario;
    if (response) cfg.response = *response;
    if (alpha) cfg.alpha = *alpha;
    if (K) cfg.K = *K;
    if (reps) cfg.repetitions = *reps;
    if (seed) cfg.seed = *seed;
    if (out) cfg.out_dir = *out;
    if (methods) cti::apply_setting(cfg, "methods", *methods);
    if (boundary) cti::apply_setting(cfg, "boundary", *boundary);
    for (const auto& s : settings) {
      const auto eq = s.find('=');
      if (eq == std::string::npos) throw cti::InvalidArgument("--set expects key=value, got " + s);
      cti::apply_setting(cfg, s.substr(0, eq), s.substr(eq + 1));
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }

  if (const auto problems = cti::validate(cfg); !problems.empty()) {
    for (const auto& p : problems) std::cerr << "config error: " << p.field << ": " << p.message << '\n';
    return 1;
  }
  if (validate_only) {
    std::cout << cti::describe(cfg);
    return 0;
  }

  try {
    const auto result = cti::run(cfg);
    for (const auto& r : result.reports) {
      std::cout << r.method << "\tcoverage " << r.coverage.format() << "\tsize " << r.size.format();
      if (r.has_components) std::cout << "\tcomponents " << r.n_components.format(2);
      std::cout << '\n';
    }
    if (result.failed_repetitions > 0)
      std::cerr << result.failed_repetitions << " repetition(s) failed\n";
    std::cout << "wrote " << result.files.size() << " files to " << cfg.out_dir << '\n';
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
