#include "cti/quantile_models.hpp"

#include "csv.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

namespace cti {

QuantileLevels QuantileLevels::equispaced(int K, double tau_min,
                                          double tau_max) {
  if (K < 1) throw InvalidArgument("QuantileLevels: K must be positive");
  if (!(tau_min >= 0.0 && tau_min < tau_max && tau_max <= 1.0))
    throw InvalidArgument("QuantileLevels: need 0 <= tau_min < tau_max <= 1");
  QuantileLevels out;
  out.K_ = K;
  out.tau_min_ = tau_min;
  out.tau_max_ = tau_max;
  out.values_.resize(K + 1);
  const double step = (tau_max - tau_min) / K;
  for (int k = 0; k <= K; ++k) out.values_(k) = tau_min + step * k;
  out.values_(K) = tau_max;
  return out;
}

std::pair<Index, double> QuantileLevels::nearest(double tau) const {
  Index best = 0;
  (values_.array() - tau).abs().minCoeff(&best);
  return {best, std::abs(values_(best) - tau)};
}

double pinball_loss(double residual, double tau) {
  if (!(tau > 0.0 && tau < 1.0))
    throw InvalidArgument("pinball_loss: tau must lie in (0, 1)");
  return residual > 0.0 ? tau * residual : -(1.0 - tau) * residual;
}

QuantileGrid enforce_monotone(Eigen::VectorXd raw) {
  if (raw.hasNaN()) throw DataError("enforce_monotone: NaN quantile estimate");
  std::sort(raw.begin(), raw.end());
  return raw;
}

std::string to_string(ModelKind kind) {
  switch (kind) {
    case ModelKind::PinballJoint: return "pinball-joint";
    case ModelKind::Forest: return "forest";
    case ModelKind::External: return "external";
  }
  return "unknown";
}

std::vector<std::string> validate(const PinballConfig& cfg) {
  std::vector<std::string> problems;
  if (cfg.hidden.empty()) problems.emplace_back("hidden: need at least one layer");
  for (int h : cfg.hidden)
    if (h <= 0) problems.emplace_back("hidden: layer sizes must be positive");
  if (!(cfg.learning_rate > 0.0)) problems.emplace_back("learning_rate: must be > 0");
  if (cfg.epochs <= 0) problems.emplace_back("epochs: must be positive");
  if (cfg.batch_size < 0) problems.emplace_back("batch_size: must be >= 0");
  return problems;
}

std::vector<std::string> validate(const ForestConfig& cfg) {
  std::vector<std::string> problems;
  if (cfg.n_trees <= 0) problems.emplace_back("n_trees: must be positive");
  if (cfg.max_depth < 0) problems.emplace_back("max_depth: must be >= 0");
  if (cfg.min_leaf <= 0) problems.emplace_back("min_leaf: must be positive");
  if (!(cfg.feature_fraction > 0.0 && cfg.feature_fraction <= 1.0))
    problems.emplace_back("feature_fraction: must lie in (0, 1]");
  return problems;
}

QuantileGrid QuantileModel::predict_grid(
    const Eigen::Ref<const Eigen::VectorXd>& x) const {
  if (x.size() != input_dim_) {
    std::ostringstream msg;
    msg << "predict_grid: expected " << input_dim_ << " features, got " << x.size();
    throw InvalidArgument(msg.str());
  }
  QuantileGrid g = enforce_monotone(predict_raw(x));
  if (g.size() != levels_.K() + 1)
    throw InvalidArgument("predict_grid: estimator returned wrong grid length");
  return g;
}

Eigen::MatrixXd QuantileModel::predict_grids(const Eigen::MatrixXd& X) const {
  Eigen::MatrixXd out(X.rows(), levels_.K() + 1);
  for (Index i = 0; i < X.rows(); ++i)
    out.row(i) = predict_grid(X.row(i).transpose()).transpose();
  return out;
}

Eigen::VectorXd ExternalQuantileModel::predict_raw(
    const Eigen::Ref<const Eigen::VectorXd>& x) const {
  return fn_(Eigen::VectorXd(x));
}

ExternalGrids load_external_grids(const std::string& path, int K) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open grid file " + path);
  std::string line;
  if (!csv::next_line(in, line)) throw FormatError(path + ": empty grid file");
  const auto header = csv::split_record(line);
  const std::size_t expected = static_cast<std::size_t>(K) + 2;
  if (header.size() != expected) {
    std::ostringstream msg;
    msg << path << ": header has " << header.size() << " columns, expected "
        << expected << " (id,q0..q" << K << ")";
    throw FormatError(msg.str());
  }

  ExternalGrids out;
  std::vector<Eigen::VectorXd> rows;
  std::size_t lineno = 1;
  while (csv::next_line(in, line)) {
    ++lineno;
    if (csv::trim(line).empty()) continue;
    const auto fields = csv::split_record(line);
    if (fields.size() != expected) {
      std::ostringstream msg;
      msg << path << ":" << lineno << ": " << fields.size()
          << " columns, expected " << expected;
      throw FormatError(msg.str());
    }
    Eigen::VectorXd q(K + 1);
    for (int k = 0; k <= K; ++k) {
      auto v = csv::parse_double(fields[k + 1]);
      if (!v || !std::isfinite(*v)) {
        std::ostringstream msg;
        msg << path << ":" << lineno << ": non-numeric quantile in column q" << k;
        throw DataError(msg.str());
      }
      q(k) = *v;
    }
    out.ids.push_back(fields[0]);
    rows.push_back(enforce_monotone(std::move(q)));
  }
  out.grids.resize(static_cast<Index>(rows.size()), K + 1);
  for (std::size_t i = 0; i < rows.size(); ++i)
    out.grids.row(static_cast<Index>(i)) = rows[i].transpose();
  return out;
}

void write_external_grids(const std::string& path,
                          const std::vector<std::string>& ids,
                          const Eigen::MatrixXd& grids) {
  if (static_cast<Index>(ids.size()) != grids.rows())
    throw InvalidArgument("write_external_grids: ids/grids row mismatch");
  std::ofstream out(path);
  if (!out) throw FormatError("cannot write " + path);
  out << "id";
  for (Index k = 0; k < grids.cols(); ++k) out << ",q" << k;
  out << '\n' << std::setprecision(17);
  for (Index i = 0; i < grids.rows(); ++i) {
    out << ids[static_cast<std::size_t>(i)];
    for (Index k = 0; k < grids.cols(); ++k) out << ',' << grids(i, k);
    out << '\n';
  }
}

}  // namespace cti
