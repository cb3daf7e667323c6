#include "cti/quantile_models.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

namespace cti {
namespace {

struct SplitChoice {
  int feature = -1;
  double threshold = 0.0;
  double gain = 0.0;
  Index left_count = 0;
};

class TreeBuilder {
 public:
  TreeBuilder(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
              const ForestConfig& cfg, std::uint64_t seed)
      : X_(X), y_(y), cfg_(cfg), rng_(seed) {
    const int d = static_cast<int>(X.cols());
    features_.resize(static_cast<std::size_t>(d));
    std::iota(features_.begin(), features_.end(), 0);
    mtry_ = std::max(1, static_cast<int>(std::lround(cfg.feature_fraction * d)));
    mtry_ = std::min(mtry_, std::max(d, 1));
  }

  QuantileForest::Tree build() {
    const Index n = y_.size();
    std::vector<int> rows(static_cast<std::size_t>(n));
    if (cfg_.bootstrap) {
      std::uniform_int_distribution<int> pick(0, static_cast<int>(n) - 1);
      for (auto& r : rows) r = pick(rng_);
    } else {
      std::iota(rows.begin(), rows.end(), 0);
    }
    tree_.samples = std::move(rows);
    grow(0, static_cast<int>(tree_.samples.size()), 0);
    return std::move(tree_);
  }

 private:
  int grow(int begin, int end, int depth) {
    const int id = static_cast<int>(tree_.nodes.size());
    tree_.nodes.emplace_back();
    tree_.nodes[id].begin = begin;
    tree_.nodes[id].end = end;

    const int count = end - begin;
    const bool depth_ok = cfg_.max_depth == 0 || depth < cfg_.max_depth;
    if (!depth_ok || count < 2 * cfg_.min_leaf || X_.cols() == 0) return id;

    SplitChoice best = find_split(begin, end);
    if (best.feature < 0) return id;

    auto mid = std::partition(
        tree_.samples.begin() + begin, tree_.samples.begin() + end,
        [&](int r) { return X_(r, best.feature) <= best.threshold; });
    const int split = static_cast<int>(mid - tree_.samples.begin());

    tree_.nodes[id].feature = best.feature;
    tree_.nodes[id].threshold = best.threshold;
    const int left = grow(begin, split, depth + 1);
    const int right = grow(split, end, depth + 1);
    tree_.nodes[id].left = left;
    tree_.nodes[id].right = right;
    return id;
  }

  // Best variance-reducing split over a random subset of mtry features.
  SplitChoice find_split(int begin, int end) {
    const int count = end - begin;
    double sum = 0.0;
    for (int i = begin; i < end; ++i) sum += y_(tree_.samples[i]);

    std::shuffle(features_.begin(), features_.end(), rng_);
    SplitChoice best;
    std::vector<std::pair<double, double>> col(static_cast<std::size_t>(count));
    const double base = sum * sum / count;

    for (int f = 0; f < mtry_; ++f) {
      const int j = features_[static_cast<std::size_t>(f)];
      for (int i = 0; i < count; ++i) {
        const int r = tree_.samples[begin + i];
        col[i] = {X_(r, j), y_(r)};
      }
      std::sort(col.begin(), col.end());
      if (col.front().first == col.back().first) continue;

      double left_sum = 0.0;
      for (int i = 0; i + 1 < count; ++i) {
        left_sum += col[i].second;
        const int nl = i + 1;
        const int nr = count - nl;
        if (nl < cfg_.min_leaf) continue;
        if (nr < cfg_.min_leaf) break;
        if (col[i].first == col[i + 1].first) continue;
        const double right_sum = sum - left_sum;
        // Reduction in SSE equals this minus its parent value.
        const double gain =
            left_sum * left_sum / nl + right_sum * right_sum / nr - base;
        if (gain > best.gain + 1e-12 * std::abs(base) + 1e-15) {
          best.gain = gain;
          best.feature = j;
          best.threshold = 0.5 * (col[i].first + col[i + 1].first);
          best.left_count = nl;
        }
      }
    }
    return best;
  }

  const Eigen::MatrixXd& X_;
  const Eigen::VectorXd& y_;
  const ForestConfig& cfg_;
  std::mt19937_64 rng_;
  std::vector<int> features_;
  int mtry_ = 1;
  QuantileForest::Tree tree_;
};

}  // namespace

QuantileForest fit_forest(const Dataset& train, const QuantileLevels& levels,
                          const ForestConfig& cfg) {
  if (auto problems = validate(cfg); !problems.empty())
    throw InvalidArgument("fit_forest: " + problems.front());
  if (train.size() < cfg.min_leaf || train.size() == 0)
    throw FitError("fit_forest: fewer training samples than min_leaf");
  if (!train.X.allFinite() || !train.y.allFinite())
    throw DataError("fit_forest: training data contains non-finite values");

  QuantileForest forest(levels, train.dim());
  forest.y_train_ = train.y;
  forest.trees_.reserve(static_cast<std::size_t>(cfg.n_trees));
  for (int t = 0; t < cfg.n_trees; ++t) {
    TreeBuilder builder(train.X, train.y, cfg,
                        mix_seed(cfg.seed, static_cast<std::uint64_t>(t)));
    forest.trees_.push_back(builder.build());
  }
  return forest;
}

std::vector<std::pair<double, double>> QuantileForest::weighted_responses(
    const Eigen::Ref<const Eigen::VectorXd>& x) const {
  std::vector<std::pair<double, double>> pairs;
  const double per_tree = 1.0 / static_cast<double>(trees_.size());
  for (const auto& tree : trees_) {
    int id = 0;
    while (tree.nodes[id].feature >= 0) {
      const auto& node = tree.nodes[id];
      id = x(node.feature) <= node.threshold ? node.left : node.right;
    }
    const auto& leaf = tree.nodes[id];
    const double w = per_tree / static_cast<double>(leaf.end - leaf.begin);
    for (int i = leaf.begin; i < leaf.end; ++i)
      pairs.emplace_back(y_train_(tree.samples[i]), w);
  }
  return pairs;
}

Eigen::VectorXd QuantileForest::predict_raw(
    const Eigen::Ref<const Eigen::VectorXd>& x) const {
  auto pairs = weighted_responses(x);
  std::sort(pairs.begin(), pairs.end());

  const Eigen::VectorXd& tau = levels().values();
  Eigen::VectorXd out(tau.size());
  // "higher" rule: smallest response whose cumulative weight reaches tau.
  double cum = 0.0;
  std::size_t idx = 0;
  for (Index k = 0; k < tau.size(); ++k) {
    while (idx < pairs.size() && cum + pairs[idx].second < tau(k) - 1e-12) {
      cum += pairs[idx].second;
      ++idx;
    }
    out(k) = pairs[std::min(idx, pairs.size() - 1)].first;
  }
  return out;
}

}  // namespace cti
