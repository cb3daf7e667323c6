#include "cti/quantile_models.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

namespace cti {
namespace {

void check_finite(const Dataset& d, const char* who) {
  if (!d.X.allFinite() || !d.y.allFinite())
    throw DataError(std::string(who) + ": training data contains non-finite values");
}

// Linear-interpolated empirical quantile of sorted values.
double empirical_quantile(const std::vector<double>& sorted, double tau) {
  const double pos = tau * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, sorted.size() - 1);
  const double w = pos - static_cast<double>(lo);
  return (1.0 - w) * sorted[lo] + w * sorted[hi];
}

struct AdamState {
  Eigen::MatrixXd mW, vW;
  Eigen::VectorXd mb, vb;
};

}  // namespace

Eigen::MatrixXd PinballNet::forward(const Eigen::MatrixXd& Z) const {
  Eigen::MatrixXd a = Z;
  for (std::size_t l = 0; l + 1 < layers_.size(); ++l) {
    a = ((layers_[l].W * a).colwise() + layers_[l].b).cwiseMax(0.0);
  }
  return (layers_.back().W * a).colwise() + layers_.back().b;
}

Eigen::VectorXd PinballNet::predict_raw(
    const Eigen::Ref<const Eigen::VectorXd>& x) const {
  Eigen::MatrixXd z = ((x - x_mean_).array() / x_scale_.array()).matrix();
  Eigen::VectorXd out = forward(z).col(0);
  return (out.array() * y_scale_ + y_mean_).matrix();
}

double PinballNet::loss(const Eigen::MatrixXd& X, const Eigen::VectorXd& y) const {
  const Eigen::VectorXd& tau = levels().values();
  double total = 0.0;
  for (Index i = 0; i < X.rows(); ++i) {
    Eigen::VectorXd q = predict_raw(X.row(i).transpose());
    for (Index k = 0; k < q.size(); ++k) total += pinball_loss(y(i) - q(k), tau(k));
  }
  return total / static_cast<double>(X.rows());
}

PinballNet fit_pinball_joint(const Dataset& train, const QuantileLevels& levels,
                             const PinballConfig& cfg) {
  if (train.size() == 0) throw InvalidArgument("fit_pinball_joint: empty training set");
  if (auto problems = validate(cfg); !problems.empty())
    throw InvalidArgument("fit_pinball_joint: " + problems.front());
  check_finite(train, "fit_pinball_joint");

  const Index n = train.size();
  const Index d = train.dim();
  const Index m = levels.K() + 1;
  PinballNet net(levels, d);

  net.x_mean_ = train.X.colwise().mean().transpose();
  net.x_scale_.resize(d);
  for (Index j = 0; j < d; ++j) {
    const double sd = std::sqrt(
        (train.X.col(j).array() - net.x_mean_(j)).square().mean());
    net.x_scale_(j) = sd > 1e-12 ? sd : 1.0;
  }
  net.y_mean_ = train.y.mean();
  {
    const double sd = std::sqrt((train.y.array() - net.y_mean_).square().mean());
    net.y_scale_ = sd > 1e-12 ? sd : 1.0;
  }

  const Eigen::MatrixXd Z =
      ((train.X.rowwise() - net.x_mean_.transpose()).array().rowwise() /
       net.x_scale_.transpose().array())
          .matrix()
          .transpose();  // d x n
  const Eigen::RowVectorXd Y =
      ((train.y.array() - net.y_mean_) / net.y_scale_).matrix().transpose();

  std::mt19937_64 rng(cfg.seed);
  std::normal_distribution<double> normal(0.0, 1.0);

  // He initialisation for hidden layers. The output layer starts at zero
  // weights with biases at the marginal quantiles, so the untrained net
  // already predicts the unconditional quantile grid.
  Index in = d;
  for (int width : cfg.hidden) {
    PinballNet::Layer layer;
    layer.W.resize(width, in);
    const double scale = std::sqrt(2.0 / static_cast<double>(std::max<Index>(in, 1)));
    for (Index r = 0; r < layer.W.rows(); ++r)
      for (Index c = 0; c < layer.W.cols(); ++c) layer.W(r, c) = scale * normal(rng);
    layer.b = Eigen::VectorXd::Zero(width);
    net.layers_.push_back(std::move(layer));
    in = width;
  }
  {
    PinballNet::Layer out;
    out.W = Eigen::MatrixXd::Zero(m, in);
    out.b.resize(m);
    std::vector<double> sorted(Y.data(), Y.data() + n);
    std::sort(sorted.begin(), sorted.end());
    for (Index k = 0; k < m; ++k) out.b(k) = empirical_quantile(sorted, levels[k]);
    net.layers_.push_back(std::move(out));
  }

  const std::size_t L = net.layers_.size();
  std::vector<AdamState> adam(L);
  for (std::size_t l = 0; l < L; ++l) {
    const auto& layer = net.layers_[l];
    adam[l].mW = Eigen::MatrixXd::Zero(layer.W.rows(), layer.W.cols());
    adam[l].vW = adam[l].mW;
    adam[l].mb = Eigen::VectorXd::Zero(layer.b.size());
    adam[l].vb = adam[l].mb;
  }
  constexpr double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;

  const Eigen::ArrayXd tau = levels.values().array();
  const Index batch = cfg.batch_size > 0 ? std::min<Index>(cfg.batch_size, n) : n;
  std::vector<Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Index{0});

  std::vector<Eigen::MatrixXd> pre(L), act(L + 1);
  long step = 0;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    if (batch < n) std::shuffle(order.begin(), order.end(), rng);
    for (Index start = 0; start < n; start += batch) {
      const Index bs = std::min(batch, n - start);
      Eigen::MatrixXd Zb(d, bs);
      Eigen::RowVectorXd Yb(bs);
      for (Index j = 0; j < bs; ++j) {
        const Index i = order[static_cast<std::size_t>(start + j)];
        Zb.col(j) = Z.col(i);
        Yb(j) = Y(i);
      }

      act[0] = Zb;
      for (std::size_t l = 0; l < L; ++l) {
        pre[l] = (net.layers_[l].W * act[l]).colwise() + net.layers_[l].b;
        act[l + 1] = l + 1 < L ? pre[l].cwiseMax(0.0) : pre[l];
      }

      // d/dq of rho_tau(y - q): -tau above, 1 - tau below, 0 at the kink.
      Eigen::MatrixXd G(m, bs);
      for (Index j = 0; j < bs; ++j) {
        for (Index k = 0; k < m; ++k) {
          const double r = Yb(j) - act[L](k, j);
          G(k, j) = r > 0.0 ? -tau(k) : (r < 0.0 ? 1.0 - tau(k) : 0.0);
        }
      }
      G /= static_cast<double>(bs);

      ++step;
      const double c1 = 1.0 - std::pow(beta1, static_cast<double>(step));
      const double c2 = 1.0 - std::pow(beta2, static_cast<double>(step));
      for (std::size_t l = L; l-- > 0;) {
        auto& layer = net.layers_[l];
        Eigen::MatrixXd gW = G * act[l].transpose();
        Eigen::VectorXd gb = G.rowwise().sum();
        if (l > 0) {
          G = (layer.W.transpose() * G).cwiseProduct(
              (pre[l - 1].array() > 0.0).cast<double>().matrix());
        }
        auto& s = adam[l];
        s.mW = beta1 * s.mW + (1.0 - beta1) * gW;
        s.vW = beta2 * s.vW + (1.0 - beta2) * gW.cwiseAbs2();
        s.mb = beta1 * s.mb + (1.0 - beta1) * gb;
        s.vb = beta2 * s.vb + (1.0 - beta2) * gb.cwiseAbs2();
        layer.W.array() -= cfg.learning_rate * (s.mW.array() / c1) /
                           ((s.vW.array() / c2).sqrt() + eps);
        layer.b.array() -= cfg.learning_rate * (s.mb.array() / c1) /
                           ((s.vb.array() / c2).sqrt() + eps);
      }
    }
  }
  return net;
}

}  // namespace cti
