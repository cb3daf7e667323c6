#pragma once

#include "cti/common.hpp"

#include <functional>
#include <memory>
#include <string>
#include <vector>

namespace cti {

/// Equispaced quantile levels tau_0 < ... < tau_K with clipped extremes.
///
/// The nominal levels are k/K; because most estimators cannot fit tau = 0 or
/// tau = 1 the end points are replaced by tau_min and tau_max and the grid is
/// spread evenly between them.
class QuantileLevels {
 public:
  QuantileLevels() = default;
  static QuantileLevels equispaced(int K, double tau_min = 0.001,
                                   double tau_max = 0.999);

  int K() const { return K_; }
  double tau_min() const { return tau_min_; }
  double tau_max() const { return tau_max_; }
  double operator[](Index k) const { return values_(k); }
  const Eigen::VectorXd& values() const { return values_; }

  /// Index of the level closest to tau, and the distance to it.
  std::pair<Index, double> nearest(double tau) const;

 private:
  int K_ = 0;
  double tau_min_ = 0.0;
  double tau_max_ = 1.0;
  Eigen::VectorXd values_;
};

/// K+1 non-decreasing quantile estimates for one input.
using QuantileGrid = Eigen::VectorXd;

/// Check loss rho_tau(r): tau*r for r > 0, -(1-tau)*r otherwise.
double pinball_loss(double residual, double tau);

/// Monotone rearrangement: the ascending sort of raw. Throws DataError on NaN.
QuantileGrid enforce_monotone(Eigen::VectorXd raw);

enum class ModelKind { PinballJoint, Forest, External };

std::string to_string(ModelKind kind);

struct PinballConfig {
  std::vector<int> hidden{64};
  double learning_rate = 1e-3;
  int epochs = 200;
  int batch_size = 0;  // 0 = full batch
  std::uint64_t seed = 0;
};

struct ForestConfig {
  int n_trees = 100;
  int max_depth = 0;  // 0 = unlimited
  int min_leaf = 20;
  double feature_fraction = 1.0 / 3.0;
  bool bootstrap = true;
  std::uint64_t seed = 0;
};

std::vector<std::string> validate(const PinballConfig& cfg);
std::vector<std::string> validate(const ForestConfig& cfg);

/// Conditional quantile estimator evaluated on a fixed level grid.
///
/// Fitted models are immutable; predict_grid is const and thread-safe.
class QuantileModel {
 public:
  virtual ~QuantileModel() = default;

  virtual ModelKind kind() const = 0;
  const QuantileLevels& levels() const { return levels_; }
  Index input_dim() const { return input_dim_; }

  /// Monotone grid at x. Throws InvalidArgument on a dimension mismatch.
  QuantileGrid predict_grid(const Eigen::Ref<const Eigen::VectorXd>& x) const;

  /// One monotone grid per row of X, as rows of an n x (K+1) matrix.
  Eigen::MatrixXd predict_grids(const Eigen::MatrixXd& X) const;

 protected:
  QuantileModel(QuantileLevels levels, Index input_dim)
      : levels_(std::move(levels)), input_dim_(input_dim) {}

  /// Raw estimator output before rearrangement; may cross.
  virtual Eigen::VectorXd predict_raw(
      const Eigen::Ref<const Eigen::VectorXd>& x) const = 0;

 private:
  QuantileLevels levels_;
  Index input_dim_;
};

/// Multilayer perceptron with K+1 outputs trained jointly on the summed
/// pinball loss over all levels.
class PinballNet final : public QuantileModel {
 public:
  ModelKind kind() const override { return ModelKind::PinballJoint; }

  /// Mean summed pinball loss on (X, y) in response units.
  double loss(const Eigen::MatrixXd& X, const Eigen::VectorXd& y) const;

  struct Layer {
    Eigen::MatrixXd W;  // out x in
    Eigen::VectorXd b;
  };

 protected:
  Eigen::VectorXd predict_raw(
      const Eigen::Ref<const Eigen::VectorXd>& x) const override;

 private:
  friend PinballNet fit_pinball_joint(const Dataset&, const QuantileLevels&,
                                      const PinballConfig&);
  PinballNet(QuantileLevels levels, Index dim) : QuantileModel(std::move(levels), dim) {}

  Eigen::MatrixXd forward(const Eigen::MatrixXd& Z) const;  // Z: in x n

  std::vector<Layer> layers_;
  Eigen::VectorXd x_mean_, x_scale_;
  double y_mean_ = 0.0, y_scale_ = 1.0;
};

/// Fits PinballNet by Adam on the joint pinball objective. Deterministic for
/// a given (data, levels, cfg). Throws DataError on non-finite data.
PinballNet fit_pinball_joint(const Dataset& train, const QuantileLevels& levels,
                             const PinballConfig& cfg);

/// Quantile regression forest: CART trees on squared error whose leaves keep
/// the training responses; quantiles come from the leaf-weighted empirical
/// distribution using the "higher" rule.
class QuantileForest final : public QuantileModel {
 public:
  ModelKind kind() const override { return ModelKind::Forest; }
  int n_trees() const { return static_cast<int>(trees_.size()); }

  /// Training rows and their weights in the conditional distribution at x.
  std::vector<std::pair<double, double>> weighted_responses(
      const Eigen::Ref<const Eigen::VectorXd>& x) const;

  struct Node {
    int feature = -1;  // -1 for leaves
    double threshold = 0.0;
    int left = -1, right = -1;
    int begin = 0, end = 0;  // leaf slice of Tree::samples
  };
  struct Tree {
    std::vector<Node> nodes;
    std::vector<int> samples;  // training row ids, bootstrap multiplicity kept
  };

 protected:
  Eigen::VectorXd predict_raw(
      const Eigen::Ref<const Eigen::VectorXd>& x) const override;

 private:
  friend QuantileForest fit_forest(const Dataset&, const QuantileLevels&,
                                   const ForestConfig&);
  QuantileForest(QuantileLevels levels, Index dim)
      : QuantileModel(std::move(levels), dim) {}

  std::vector<Tree> trees_;
  Eigen::VectorXd y_train_;
};

/// Throws FitError when train has fewer rows than cfg.min_leaf, DataError on
/// non-finite data.
QuantileForest fit_forest(const Dataset& train, const QuantileLevels& levels,
                          const ForestConfig& cfg);

/// Quantiles supplied by a callable x -> raw grid, e.g. a known quantile
/// function or a lookup into grids produced elsewhere.
class ExternalQuantileModel final : public QuantileModel {
 public:
  using Function = std::function<Eigen::VectorXd(const Eigen::VectorXd&)>;

  ExternalQuantileModel(QuantileLevels levels, Index input_dim, Function fn)
      : QuantileModel(std::move(levels), input_dim), fn_(std::move(fn)) {}

  ModelKind kind() const override { return ModelKind::External; }

 protected:
  Eigen::VectorXd predict_raw(
      const Eigen::Ref<const Eigen::VectorXd>& x) const override;

 private:
  Function fn_;
};

/// Grids read from the interchange CSV ("id,q0,...,qK").
struct ExternalGrids {
  std::vector<std::string> ids;
  Eigen::MatrixXd grids;  // rows in file order, K+1 columns, monotone

  Index size() const { return grids.rows(); }
  QuantileGrid grid(Index row) const { return grids.row(row).transpose(); }
};

ExternalGrids load_external_grids(const std::string& path, int K);
void write_external_grids(const std::string& path,
                          const std::vector<std::string>& ids,
                          const Eigen::MatrixXd& grids);

}  // namespace cti
