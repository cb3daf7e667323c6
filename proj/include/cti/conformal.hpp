#pragma once

// Conformal calibration and prediction: the thresholded-interval method
// (CTI), the split-conformal and CQR baselines, and harmonic-mean score
// aggregation of two partitions.

#include "cti/common.hpp"
#include "cti/interval_engine.hpp"
#include "cti/quantile_models.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

namespace cti {

/// ceil((1 + n_cal)(1 - alpha)), the rank of the calibration order statistic.
inline Index rank_index(Index n_cal, double alpha) {
  if (n_cal < 1) throw InvalidArgument("rank_index: need at least one calibration score");
  if (!(alpha > 0.0 && alpha < 1.0))
    throw InvalidArgument("rank_index: alpha must lie in (0, 1)");
  const double v = static_cast<double>(n_cal + 1) * (1.0 - alpha);
  // Products like 10 * 0.9 can land a hair above an integer.
  const double nearest = std::round(v);
  if (std::abs(v - nearest) <= 1e-9 * std::max(1.0, v))
    return static_cast<Index>(nearest);
  return static_cast<Index>(std::ceil(v));
}

template <typename Scalar>
struct Threshold {
  Scalar t = 0;
  Index rank = 0;
  Index n_cal = 0;
  double alpha = 0.0;

  bool saturated() const { return rank > n_cal; }
};

/// rank-th smallest score; +inf scores sort last. If the rank exceeds the
/// number of scores the threshold is +inf (every interval is kept).
template <typename Derived>
Threshold<typename Derived::Scalar> cti_calibrate(
    const Eigen::DenseBase<Derived>& scores, double alpha) {
  using Scalar = typename Derived::Scalar;
  if (scores.size() == 0)
    throw InvalidArgument("cti_calibrate: no calibration scores");
  Threshold<Scalar> th;
  th.n_cal = scores.size();
  th.alpha = alpha;
  th.rank = rank_index(th.n_cal, alpha);
  if (th.saturated()) {
    th.t = std::numeric_limits<Scalar>::infinity();
    return th;
  }
  std::vector<Scalar> v(static_cast<std::size_t>(scores.size()));
  for (Index i = 0; i < scores.size(); ++i) {
    if (std::isnan(scores(i))) throw DataError("cti_calibrate: NaN score");
    v[static_cast<std::size_t>(i)] = scores(i);
  }
  auto nth = v.begin() + (th.rank - 1);
  std::nth_element(v.begin(), nth, v.end());
  th.t = *nth;
  return th;
}

/// Union of disjoint closed intervals, sorted by lower end.
template <typename Scalar>
struct PredictionSet {
  struct Component {
    Scalar lo, hi;
  };
  std::vector<Component> components;
  Scalar size = 0;  // Lebesgue measure

  Index n_components() const { return static_cast<Index>(components.size()); }
  bool empty() const { return components.empty(); }
};

struct CtiOptions {
  // Substitute the single shortest interval when nothing passes the threshold.
  bool fallback_shortest = false;
};

namespace detail {

// Appends (lo, hi] to a sorted component list, merging with the last one
// when they touch.
template <typename Scalar>
void append_component(PredictionSet<Scalar>& s, Scalar lo, Scalar hi) {
  if (!(hi > lo)) return;  // (a, a] is empty
  s.size += hi - lo;
  if (!s.components.empty() && s.components.back().hi >= lo) {
    s.components.back().hi = std::max(s.components.back().hi, hi);
  } else {
    s.components.push_back({lo, hi});
  }
}

// length <= t, allowing for the rounding in length = hi - lo. Edges like
// 0.7 and 1.0 give 1.0 - 0.7 = 0.30000000000000004, which should still pass
// t = 0.3.
template <typename Scalar>
bool passes(Scalar length, Scalar t, Scalar lo, Scalar hi) {
  const Scalar slack = 4 * std::numeric_limits<Scalar>::epsilon() *
                       std::max(std::abs(lo), std::abs(hi));
  return length <= t + slack;
}

}  // namespace detail

/// All intervals with length <= t, adjacent ones merged.
template <typename Scalar>
PredictionSet<Scalar> cti_predict(const IntervalPartition<Scalar>& p, Scalar t,
                                  CtiOptions opts = {}) {
  PredictionSet<Scalar> s;
  for (Index j = 0; j < p.size(); ++j)
    if (detail::passes(p.lengths(j), t, p.lower(j), p.upper(j)))
      detail::append_component(s, p.lower(j), p.upper(j));
  if (s.empty() && opts.fallback_shortest) {
    Index best = -1;
    for (Index j = 0; j < p.size(); ++j)
      if (p.lengths(j) > 0 && (best < 0 || p.lengths(j) < p.lengths(best))) best = j;
    if (best >= 0) detail::append_component(s, p.lower(best), p.upper(best));
  }
  return s;
}

template <typename Scalar>
PredictionSet<Scalar> cti_predict(const IntervalPartition<Scalar>& p,
                                  const Threshold<Scalar>& th,
                                  CtiOptions opts = {}) {
  return cti_predict(p, th.t, opts);
}

/// Closed-interval membership. Throws DataError on NaN.
template <typename Scalar>
bool set_contains(const PredictionSet<Scalar>& s, Scalar y) {
  if (std::isnan(y)) throw DataError("set_contains: NaN response");
  auto it = std::upper_bound(
      s.components.begin(), s.components.end(), y,
      [](Scalar v, const typename PredictionSet<Scalar>::Component& c) { return v < c.lo; });
  if (it == s.components.begin()) return false;
  --it;
  return y <= it->hi;
}

/// 2 / (1/a + 1/b), with 0 if either is 0 and 2v for {v, +inf}.
template <typename Scalar>
Scalar harmonic_aggregate(Scalar a, Scalar b) {
  if (std::isnan(a) || std::isnan(b) || a < 0 || b < 0)
    throw InvalidArgument("harmonic_aggregate: scores must be non-negative");
  if (a == 0 || b == 0) return Scalar(0);
  const Scalar inf = std::numeric_limits<Scalar>::infinity();
  if (a == inf && b == inf) return inf;
  if (a == inf) return 2 * b;
  if (b == inf) return 2 * a;
  return Scalar(2) / (Scalar(1) / a + Scalar(1) / b);
}

/// Aggregated score of y against two partitions of the same response.
template <typename Scalar>
Scalar harmonic_score(const IntervalPartition<Scalar>& a,
                      const IntervalPartition<Scalar>& b, Scalar y,
                      BoundaryPolicy policy) {
  return harmonic_aggregate(conformity_score(a, y, policy).value,
                            conformity_score(b, y, policy).value);
}

/// {y in [min q_0, max q_K] : harmonic_score(y) <= t}, computed exactly on
/// the common refinement of both partitions.
template <typename Scalar>
PredictionSet<Scalar> harmonic_predict(const IntervalPartition<Scalar>& a,
                                       const IntervalPartition<Scalar>& b,
                                       Scalar t, BoundaryPolicy policy) {
  std::vector<Scalar> cuts(a.edges.data(), a.edges.data() + a.edges.size());
  cuts.insert(cuts.end(), b.edges.data(), b.edges.data() + b.edges.size());
  std::sort(cuts.begin(), cuts.end());
  cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());

  PredictionSet<Scalar> s;
  for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
    const Scalar lo = cuts[i], hi = cuts[i + 1];
    const Scalar mid = lo + (hi - lo) / 2;
    if (detail::passes(harmonic_score(a, b, mid, policy), t, lo, hi))
      detail::append_component(s, lo, hi);
  }
  return s;
}

/// Per-sample intervals from a baseline method.
struct BaselineResult {
  std::string method;
  Eigen::VectorXd lo, hi;
  double Q = 0.0;
  Threshold<double> threshold;
  double snap_distance = 0.0;  // |grid level - requested level|, worst case

  Index size() const { return lo.size(); }
};

/// Split conformal with absolute residual scores around a point prediction.
inline BaselineResult split_conformal(const Eigen::VectorXd& cal_pred,
                                      const Eigen::VectorXd& cal_y,
                                      const Eigen::VectorXd& test_pred,
                                      double alpha) {
  if (cal_pred.size() != cal_y.size())
    throw InvalidArgument("split_conformal: prediction/response size mismatch");
  BaselineResult r;
  r.method = "split";
  r.threshold = cti_calibrate((cal_y - cal_pred).cwiseAbs(), alpha);
  r.Q = r.threshold.t;
  r.lo = test_pred.array() - r.Q;
  r.hi = test_pred.array() + r.Q;
  return r;
}

/// CQR score max(lo - y, y - hi); negative inside the band.
inline double cqr_score(double lo, double hi, double y) {
  return std::max(lo - y, y - hi);
}

/// Conformalized quantile regression on a lower/upper quantile band.
inline BaselineResult cqr(const Eigen::VectorXd& cal_lo, const Eigen::VectorXd& cal_hi,
                          const Eigen::VectorXd& cal_y, const Eigen::VectorXd& test_lo,
                          const Eigen::VectorXd& test_hi, double alpha) {
  if (cal_lo.size() != cal_y.size() || cal_hi.size() != cal_y.size())
    throw InvalidArgument("cqr: calibration size mismatch");
  Eigen::VectorXd scores(cal_y.size());
  for (Index i = 0; i < cal_y.size(); ++i)
    scores(i) = cqr_score(cal_lo(i), cal_hi(i), cal_y(i));
  BaselineResult r;
  r.method = "cqr";
  r.threshold = cti_calibrate(scores, alpha);
  r.Q = r.threshold.t;
  r.lo = test_lo.array() - r.Q;
  r.hi = test_hi.array() + r.Q;
  // A negative Q can shrink a band past itself; collapse it to its midpoint.
  for (Index i = 0; i < r.lo.size(); ++i) {
    if (r.lo(i) > r.hi(i)) {
      const double m = 0.5 * (test_lo(i) + test_hi(i));
      r.lo(i) = r.hi(i) = m;
    }
  }
  return r;
}

/// Split conformal around the grid's median level.
inline BaselineResult split_conformal(const QuantileModel& model, const Dataset& cal,
                                      const Dataset& test, double alpha) {
  const auto [k, snap] = model.levels().nearest(0.5);
  const Eigen::VectorXd cal_pred = model.predict_grids(cal.X).col(k);
  const Eigen::VectorXd test_pred = model.predict_grids(test.X).col(k);
  BaselineResult r = split_conformal(cal_pred, cal.y, test_pred, alpha);
  r.snap_distance = snap;
  return r;
}

/// CQR using the grid levels nearest to alpha/2 and 1 - alpha/2.
inline BaselineResult cqr(const QuantileModel& model, const Dataset& cal,
                          const Dataset& test, double alpha) {
  const auto [klo, snap_lo] = model.levels().nearest(alpha / 2.0);
  const auto [khi, snap_hi] = model.levels().nearest(1.0 - alpha / 2.0);
  if (!(klo < khi)) throw InvalidArgument("cqr: grid too coarse for the requested band");
  const Eigen::MatrixXd gc = model.predict_grids(cal.X);
  const Eigen::MatrixXd gt = model.predict_grids(test.X);
  BaselineResult r = cqr(gc.col(klo), gc.col(khi), cal.y, gt.col(klo), gt.col(khi), alpha);
  r.snap_distance = std::max(snap_lo, snap_hi);
  return r;
}

}  // namespace cti
