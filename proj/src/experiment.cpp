#include "cti/experiment.hpp"

#include "cti/conformal.hpp"
#include "cti/data_io.hpp"
#include "cti/oracle.hpp"
#include "csv.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <future>
#include <iostream>
#include <sstream>
#include <thread>

namespace cti {
namespace {

namespace fs = std::filesystem;

bool has_method(const ExperimentConfig& cfg, const std::string& m) {
  return std::find(cfg.methods.begin(), cfg.methods.end(), m) != cfg.methods.end();
}

template <typename T>
T parse_number(const std::string& key, const std::string& value) {
  const auto s = csv::trim(value);
  T out{};
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  if (ec != std::errc() || ptr != s.data() + s.size())
    throw InvalidArgument("config: cannot parse '" + value + "' for " + key);
  return out;
}

bool parse_bool(const std::string& key, const std::string& value) {
  const auto s = csv::trim(value);
  if (s == "true" || s == "1" || s == "yes") return true;
  if (s == "false" || s == "0" || s == "no") return false;
  throw InvalidArgument("config: cannot parse '" + value + "' for " + key);
}

std::vector<std::string> parse_list(const std::string& value) {
  std::vector<std::string> out;
  std::stringstream ss(value);
  std::string item;
  while (std::getline(ss, item, ',')) {
    auto t = csv::trim(item);
    if (!t.empty()) out.emplace_back(t);
  }
  return out;
}

template <typename T>
std::string join(const std::vector<T>& v) {
  std::ostringstream out;
  for (std::size_t i = 0; i < v.size(); ++i) out << (i ? "," : "") << v[i];
  return out.str();
}

std::string num(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

struct PartitionRun {
  std::vector<IntervalPartitiond> cal, test;
  Eigen::MatrixXd test_grids;
};

PartitionRun partitions_for(const QuantileModel& model, const Dataset& cal,
                            const Dataset& test) {
  PartitionRun out;
  const Eigen::MatrixXd gc = model.predict_grids(cal.X);
  out.test_grids = model.predict_grids(test.X);
  for (Index i = 0; i < gc.rows(); ++i) out.cal.push_back(build_partition(gc.row(i).transpose()));
  for (Index i = 0; i < out.test_grids.rows(); ++i)
    out.test.push_back(build_partition(out.test_grids.row(i).transpose()));
  return out;
}

void fill_from_sets(MethodOutcome& o, const std::vector<PredictionSetd>& sets,
                    const Eigen::VectorXd& y) {
  const Index n = y.size();
  o.y = y;
  o.covered.resize(n);
  o.set_size.resize(n);
  o.components.resize(n);
  o.lo.resize(n);
  o.hi.resize(n);
  for (Index i = 0; i < n; ++i) {
    const auto& s = sets[static_cast<std::size_t>(i)];
    o.covered(i) = set_contains(s, y(i)) ? 1 : 0;
    o.set_size(i) = s.size;
    o.components(i) = static_cast<int>(s.n_components());
    o.lo(i) = s.empty() ? 0.0 : s.components.front().lo;
    o.hi(i) = s.empty() ? 0.0 : s.components.back().hi;
  }
  o.coverage = coverage(sets, y);
  o.size = mean_size(sets);
  o.n_components = mean_components(sets);
}

MethodOutcome run_cti(const ExperimentConfig& cfg, const std::string& method,
                      const QuantileModel& model, const Dataset& cal, const Dataset& test) {
  MethodOutcome o;
  o.method = method;
  o.partition_based = true;
  PartitionRun parts = partitions_for(model, cal, test);

  Eigen::VectorXd scores(cal.size());
  for (Index i = 0; i < cal.size(); ++i)
    scores(i) = conformity_score(parts.cal[static_cast<std::size_t>(i)], cal.y(i), cfg.boundary).value;
  const auto th = cti_calibrate(scores, cfg.alpha);
  o.threshold = th.t;

  std::vector<PredictionSetd> sets;
  sets.reserve(parts.test.size());
  Index clamped = 0;
  for (Index i = 0; i < test.size(); ++i) {
    const auto& p = parts.test[static_cast<std::size_t>(i)];
    sets.push_back(cti_predict(p, th, CtiOptions{cfg.fallback_shortest}));
    clamped += interval_index(p, test.y(i), BoundaryPolicy::Clamp).boundary_clamped ? 1 : 0;
  }
  fill_from_sets(o, sets, test.y);
  o.clamp_rate = static_cast<double>(clamped) / static_cast<double>(test.size());
  o.histogram = length_histograms(parts.test, test.y, cfg.histogram_bins, cfg.boundary);
  o.test_grids = std::move(parts.test_grids);
  return o;
}

MethodOutcome run_harmonic(const ExperimentConfig& cfg, const QuantileModel& a,
                           const QuantileModel& b, const Dataset& cal, const Dataset& test) {
  MethodOutcome o;
  o.method = "cti-harmonic";
  o.partition_based = true;
  PartitionRun pa = partitions_for(a, cal, test);
  PartitionRun pb = partitions_for(b, cal, test);

  Eigen::VectorXd scores(cal.size());
  for (Index i = 0; i < cal.size(); ++i) {
    const auto k = static_cast<std::size_t>(i);
    scores(i) = harmonic_score(pa.cal[k], pb.cal[k], cal.y(i), cfg.boundary);
  }
  const auto th = cti_calibrate(scores, cfg.alpha);
  o.threshold = th.t;

  std::vector<PredictionSetd> sets;
  Index clamped = 0;
  for (Index i = 0; i < test.size(); ++i) {
    const auto k = static_cast<std::size_t>(i);
    sets.push_back(harmonic_predict(pa.test[k], pb.test[k], th.t, cfg.boundary));
    const double y = test.y(i);
    const bool outside_both =
        interval_index(pa.test[k], y, BoundaryPolicy::Clamp).boundary_clamped &&
        interval_index(pb.test[k], y, BoundaryPolicy::Clamp).boundary_clamped;
    clamped += outside_both ? 1 : 0;
  }
  fill_from_sets(o, sets, test.y);
  o.clamp_rate = static_cast<double>(clamped) / static_cast<double>(test.size());
  return o;
}

MethodOutcome from_baseline(const BaselineResult& r, const Eigen::VectorXd& y) {
  MethodOutcome o;
  o.method = r.method;
  o.threshold = r.Q;
  o.y = y;
  o.lo = r.lo;
  o.hi = r.hi;
  o.set_size = r.hi - r.lo;
  o.covered = (y.array() >= r.lo.array() && y.array() <= r.hi.array()).cast<int>();
  o.components = Eigen::VectorXi::Ones(y.size());
  o.coverage = coverage(r, y);
  o.size = mean_size(r);
  o.n_components = 1.0;
  return o;
}

void write_repetition_csv(const std::string& path, const MethodOutcome& o) {
  std::ofstream out(path);
  if (!out) throw FormatError("cannot write " + path);
  out << "row,y,covered,size,n_components,lo,hi\n";
  for (Index i = 0; i < o.y.size(); ++i)
    out << o.rows[static_cast<std::size_t>(i)] << ',' << num(o.y(i)) << ',' << o.covered(i)
        << ',' << num(o.set_size(i)) << ',' << o.components(i) << ',' << num(o.lo(i)) << ','
        << num(o.hi(i)) << '\n';
}

}  // namespace

std::vector<ConfigProblem> validate(const ExperimentConfig& cfg) {
  std::vector<ConfigProblem> p;
  const bool has_data = !cfg.dataset_path.empty();
  const bool has_scenario = !cfg.scenario.empty();
  if (has_data == has_scenario)
    p.push_back({"dataset", "exactly one of dataset and scenario must be set"});
  if (has_data && !fs::exists(cfg.dataset_path))
    p.push_back({"dataset", "file not found: " + cfg.dataset_path});
  if (has_scenario) {
    try {
      Scenario::from_name(cfg.scenario);
    } catch (const InvalidArgument& e) {
      p.push_back({"scenario", e.what()});
    }
    if (cfg.n_samples < 10) p.push_back({"n_samples", "must be at least 10"});
  }
  if (has_data && cfg.response.empty()) p.push_back({"response", "must name a column"});
  if (!(cfg.alpha > 0.0 && cfg.alpha < 1.0)) p.push_back({"alpha", "must lie in (0, 1)"});
  if (cfg.K < 2) p.push_back({"K", "must be at least 2"});
  if (!(cfg.tau_min >= 0.0 && cfg.tau_min < cfg.tau_max && cfg.tau_max <= 1.0))
    p.push_back({"tau_min", "need 0 <= tau_min < tau_max <= 1"});
  if (cfg.methods.empty()) p.push_back({"methods", "at least one method is required"});
  for (const auto& m : cfg.methods)
    if (std::find(known_methods().begin(), known_methods().end(), m) == known_methods().end())
      p.push_back({"methods", "unknown method '" + m + "'"});
  if (cfg.baseline_model != "forest" && cfg.baseline_model != "pinball")
    p.push_back({"baseline_model", "must be forest or pinball"});
  for (const auto& m : validate(cfg.forest)) p.push_back({"forest", m});
  for (const auto& m : validate(cfg.pinball)) p.push_back({"pinball", m});
  if (cfg.histogram_bins < 2) p.push_back({"histogram_bins", "must be at least 2"});
  if (cfg.repetitions < 1) p.push_back({"reps", "must be at least 1"});
  if (cfg.out_dir.empty()) p.push_back({"out", "output directory must be set"});
  if (cfg.threads < 0) p.push_back({"threads", "must be >= 0"});
  return p;
}

void apply_setting(ExperimentConfig& cfg, const std::string& raw_key, const std::string& value) {
  const std::string key(csv::trim(raw_key));
  const std::string v(csv::trim(value));
  if (key == "dataset") cfg.dataset_path = v;
  else if (key == "scenario") cfg.scenario = v;
  else if (key == "n_samples") cfg.n_samples = parse_number<Index>(key, v);
  else if (key == "response") cfg.response = v;
  else if (key == "alpha") cfg.alpha = parse_number<double>(key, v);
  else if (key == "K") cfg.K = parse_number<int>(key, v);
  else if (key == "tau_min") cfg.tau_min = parse_number<double>(key, v);
  else if (key == "tau_max") cfg.tau_max = parse_number<double>(key, v);
  else if (key == "methods") cfg.methods = parse_list(v);
  else if (key == "baseline_model") cfg.baseline_model = v;
  else if (key == "boundary") cfg.boundary = parse_boundary_policy(v);
  else if (key == "fallback_shortest") cfg.fallback_shortest = parse_bool(key, v);
  else if (key == "histogram_bins") cfg.histogram_bins = parse_number<int>(key, v);
  else if (key == "reps") cfg.repetitions = parse_number<int>(key, v);
  else if (key == "seed") cfg.seed = parse_number<std::uint64_t>(key, v);
  else if (key == "out") cfg.out_dir = v;
  else if (key == "threads") cfg.threads = parse_number<int>(key, v);
  else if (key == "forest.trees") cfg.forest.n_trees = parse_number<int>(key, v);
  else if (key == "forest.max_depth") cfg.forest.max_depth = parse_number<int>(key, v);
  else if (key == "forest.min_leaf") cfg.forest.min_leaf = parse_number<int>(key, v);
  else if (key == "forest.feature_fraction") cfg.forest.feature_fraction = parse_number<double>(key, v);
  else if (key == "forest.bootstrap") cfg.forest.bootstrap = parse_bool(key, v);
  else if (key == "pinball.hidden") {
    cfg.pinball.hidden.clear();
    for (const auto& h : parse_list(v)) cfg.pinball.hidden.push_back(parse_number<int>(key, h));
  } else if (key == "pinball.lr") cfg.pinball.learning_rate = parse_number<double>(key, v);
  else if (key == "pinball.epochs") cfg.pinball.epochs = parse_number<int>(key, v);
  else if (key == "pinball.batch_size") cfg.pinball.batch_size = parse_number<int>(key, v);
  else throw InvalidArgument("config: unknown key '" + key + "'");
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InvalidArgument("cannot open config " + path);
  ExperimentConfig cfg;
  std::string line;
  int lineno = 0;
  while (csv::next_line(in, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    if (csv::trim(line).empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw InvalidArgument(path + ":" + std::to_string(lineno) + ": expected key = value");
    apply_setting(cfg, line.substr(0, eq), line.substr(eq + 1));
  }
  return cfg;
}

std::string describe(const ExperimentConfig& cfg) {
  std::ostringstream out;
  out << "dataset = " << cfg.dataset_path << '\n'
      << "scenario = " << cfg.scenario << '\n'
      << "n_samples = " << cfg.n_samples << '\n'
      << "response = " << cfg.response << '\n'
      << "alpha = " << num(cfg.alpha) << '\n'
      << "K = " << cfg.K << '\n'
      << "tau_min = " << num(cfg.tau_min) << '\n'
      << "tau_max = " << num(cfg.tau_max) << '\n'
      << "methods = " << join(cfg.methods) << '\n'
      << "baseline_model = " << cfg.baseline_model << '\n'
      << "boundary = " << to_string(cfg.boundary) << '\n'
      << "fallback_shortest = " << (cfg.fallback_shortest ? "true" : "false") << '\n'
      << "histogram_bins = " << cfg.histogram_bins << '\n'
      << "reps = " << cfg.repetitions << '\n'
      << "seed = " << cfg.seed << '\n'
      << "out = " << cfg.out_dir << '\n'
      << "forest.trees = " << cfg.forest.n_trees << '\n'
      << "forest.max_depth = " << cfg.forest.max_depth << '\n'
      << "forest.min_leaf = " << cfg.forest.min_leaf << '\n'
      << "forest.feature_fraction = " << num(cfg.forest.feature_fraction) << '\n'
      << "forest.bootstrap = " << (cfg.forest.bootstrap ? "true" : "false") << '\n'
      << "pinball.hidden = " << join(cfg.pinball.hidden) << '\n'
      << "pinball.lr = " << num(cfg.pinball.learning_rate) << '\n'
      << "pinball.epochs = " << cfg.pinball.epochs << '\n'
      << "pinball.batch_size = " << cfg.pinball.batch_size << '\n';
  return out.str();
}

std::string dataset_name(const ExperimentConfig& cfg) {
  if (!cfg.scenario.empty()) return cfg.scenario;
  return fs::path(cfg.dataset_path).stem().string();
}

RepetitionSeeds repetition_seeds(std::uint64_t root, int r) {
  RepetitionSeeds s;
  s.split = root + static_cast<std::uint64_t>(r);
  s.data = mix_seed(s.split, 1);
  s.forest = mix_seed(s.split, 2);
  s.pinball = mix_seed(s.split, 3);
  return s;
}

std::vector<MethodOutcome> run_repetition(const ExperimentConfig& cfg, const Dataset& data,
                                          const RepetitionSeeds& seeds) {
  const DataSplit sp = split(data.size(), seeds.split);
  const auto [std_data, standardizer] = standardize(data, sp);
  const Dataset train = std_data.subset(sp.train);
  const Dataset cal = std_data.subset(sp.cal);
  const Dataset test = std_data.subset(sp.test);
  const auto levels = QuantileLevels::equispaced(cfg.K, cfg.tau_min, cfg.tau_max);

  const bool baselines = has_method(cfg, "split") || has_method(cfg, "cqr");
  const bool need_forest = has_method(cfg, "cti-forest") || has_method(cfg, "cti-harmonic") ||
                           (baselines && cfg.baseline_model == "forest");
  const bool need_pinball = has_method(cfg, "cti-pinball") ||
                            has_method(cfg, "cti-harmonic") ||
                            (baselines && cfg.baseline_model == "pinball");

  std::optional<QuantileForest> forest;
  std::optional<PinballNet> net;
  if (need_forest) {
    ForestConfig fc = cfg.forest;
    fc.seed = seeds.forest;
    forest.emplace(fit_forest(train, levels, fc));
  }
  if (need_pinball) {
    PinballConfig pc = cfg.pinball;
    pc.seed = seeds.pinball;
    net.emplace(fit_pinball_joint(train, levels, pc));
  }
  const QuantileModel* baseline =
      cfg.baseline_model == "forest" ? static_cast<const QuantileModel*>(forest ? &*forest : nullptr)
                                     : (net ? &*net : nullptr);

  std::vector<MethodOutcome> out;
  for (const auto& m : cfg.methods) {
    MethodOutcome o;
    if (m == "cti-forest") o = run_cti(cfg, m, *forest, cal, test);
    else if (m == "cti-pinball") o = run_cti(cfg, m, *net, cal, test);
    else if (m == "cti-harmonic") o = run_harmonic(cfg, *forest, *net, cal, test);
    else if (m == "split") o = from_baseline(split_conformal(*baseline, cal, test, cfg.alpha), test.y);
    else if (m == "cqr") o = from_baseline(cqr(*baseline, cal, test, cfg.alpha), test.y);
    o.rows = sp.test;
    out.push_back(std::move(o));
  }
  return out;
}

RunResult run(const ExperimentConfig& cfg) {
  if (auto problems = validate(cfg); !problems.empty())
    throw InvalidArgument("invalid config: " + problems.front().field + ": " +
                          problems.front().message);
  fs::create_directories(cfg.out_dir);
  const std::string name = dataset_name(cfg);

  std::optional<Dataset> loaded;
  if (!cfg.dataset_path.empty()) loaded = load_csv(cfg.dataset_path, cfg.response);
  const std::optional<Scenario> scenario =
      cfg.scenario.empty() ? std::nullopt : std::optional(Scenario::from_name(cfg.scenario));

  struct RepOutput {
    std::vector<MethodOutcome> methods;
    std::string error;
  };
  auto one_rep = [&](int r) {
    RepOutput ro;
    try {
      const auto seeds = repetition_seeds(cfg.seed, r);
      if (scenario) {
        ro.methods = run_repetition(cfg, generate(*scenario, cfg.n_samples, seeds.data), seeds);
      } else {
        ro.methods = run_repetition(cfg, *loaded, seeds);
      }
    } catch (const std::exception& e) {
      ro.error = e.what();
    }
    return ro;
  };

  const int workers = std::max(
      1, std::min(cfg.repetitions,
                  cfg.threads > 0 ? cfg.threads
                                  : static_cast<int>(std::max(1u, std::thread::hardware_concurrency()))));
  std::vector<RepOutput> reps(static_cast<std::size_t>(cfg.repetitions));
  for (int start = 0; start < cfg.repetitions; start += workers) {
    std::vector<std::future<RepOutput>> jobs;
    for (int r = start; r < std::min(cfg.repetitions, start + workers); ++r)
      jobs.push_back(std::async(std::launch::async, one_rep, r));
    for (std::size_t j = 0; j < jobs.size(); ++j)
      reps[static_cast<std::size_t>(start) + j] = jobs[j].get();
  }

  // All file output happens here, on one thread, in repetition order.
  RunResult result;
  std::vector<MethodReport> reports;
  for (const auto& m : cfg.methods) reports.push_back(MethodReport{m, {}, {}, {}, {}});
  for (int r = 0; r < cfg.repetitions; ++r) {
    const auto& ro = reps[static_cast<std::size_t>(r)];
    if (!ro.error.empty()) {
      std::cerr << "repetition " << r << " failed: " << ro.error << '\n';
      ++result.failed_repetitions;
      continue;
    }
    for (std::size_t k = 0; k < ro.methods.size(); ++k) {
      const auto& o = ro.methods[k];
      const std::string stem =
          (fs::path(cfg.out_dir) / (name + "_" + o.method + "_rep" + std::to_string(r))).string();
      write_repetition_csv(stem + ".csv", o);
      result.files.push_back(stem + ".csv");
      if (o.histogram) {
        write_histogram_csv(stem + "_hist.csv", *o.histogram);
        result.files.push_back(stem + "_hist.csv");
      }
      if (o.test_grids.size() > 0) {
        std::vector<std::string> ids;
        for (Index row : o.rows) ids.push_back("r" + std::to_string(row));
        write_external_grids(stem + "_grids.csv", ids, o.test_grids);
        result.files.push_back(stem + "_grids.csv");
      }
      auto& rep = reports[k];
      rep.coverage.push_back(o.coverage);
      rep.size.push_back(o.size);
      if (o.partition_based) {
        rep.n_components.push_back(o.n_components);
        rep.clamp_rate.push_back(o.clamp_rate);
      }
    }
  }
  if (result.failed_repetitions == cfg.repetitions)
    throw std::runtime_error("all repetitions failed");

  for (const auto& rep : reports) result.reports.push_back(aggregate(rep));
  const std::string summary = (fs::path(cfg.out_dir) / (name + "_summary.csv")).string();
  write_report_csv(summary, name, result.reports);
  result.files.push_back(summary);

  const std::string manifest = (fs::path(cfg.out_dir) / (name + "_manifest.txt")).string();
  {
    std::ofstream out(manifest);
    if (!out) throw FormatError("cannot write " + manifest);
    out << "# cti experiment manifest\n"
        << "version = " << CTI_VERSION << '\n'
        << "eigen = " << EIGEN_WORLD_VERSION << '.' << EIGEN_MAJOR_VERSION << '.'
        << EIGEN_MINOR_VERSION << '\n'
        << describe(cfg);
    for (int r = 0; r < cfg.repetitions; ++r) {
      const auto s = repetition_seeds(cfg.seed, r);
      out << "rep" << r << ".seed.split = " << s.split << '\n';
      if (!cfg.scenario.empty()) out << "rep" << r << ".seed.data = " << s.data << '\n';
      out << "rep" << r << ".seed.forest = " << s.forest << '\n'
          << "rep" << r << ".seed.pinball = " << s.pinball << '\n'
          << "rep" << r << ".status = "
          << (reps[static_cast<std::size_t>(r)].error.empty() ? "ok" : "failed") << '\n';
    }
  }
  result.files.push_back(manifest);
  return result;
}

}  // namespace cti
