#include "cti/conformal.hpp"
#include "cti/oracle.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <random>

namespace cti {
namespace {

const double kInfty = std::numeric_limits<double>::infinity();

Eigen::VectorXd vec(std::initializer_list<double> v) {
  Eigen::VectorXd out(static_cast<Index>(v.size()));
  Index i = 0;
  for (double x : v) out(i++) = x;
  return out;
}

// k-th smallest (1-based) by full sort; the reference for calibration.
double kth_smallest(Eigen::VectorXd v, Index k) {
  std::sort(v.begin(), v.end());
  return v(k - 1);
}

TEST(RankIndex, Examples) {
  EXPECT_EQ(rank_index(9, 0.1), 9);
  EXPECT_EQ(rank_index(99, 0.1), 90);
  EXPECT_EQ(rank_index(4, 0.5), 3);
  EXPECT_EQ(rank_index(1000, 0.1), 901);
  EXPECT_THROW(rank_index(9, 0.0), InvalidArgument);
  EXPECT_THROW(rank_index(9, 1.0), InvalidArgument);
  EXPECT_THROW(rank_index(9, std::nan("")), InvalidArgument);
  EXPECT_THROW(rank_index(0, 0.1), InvalidArgument);
}

TEST(Calibrate, Examples) {
  const auto a = cti_calibrate(vec({0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9}), 0.1);
  EXPECT_EQ(a.rank, 9);
  EXPECT_EQ(a.t, 0.9);
  const auto b = cti_calibrate(vec({0.5, 0.5, 0.5}), 0.5);
  EXPECT_EQ(b.rank, 2);
  EXPECT_EQ(b.t, 0.5);
  const auto c = cti_calibrate(vec({1, 2}), 0.05);
  EXPECT_EQ(c.rank, 3);
  EXPECT_TRUE(c.saturated());
  EXPECT_EQ(c.t, kInfty);
  EXPECT_THROW(cti_calibrate(Eigen::VectorXd(0), 0.1), InvalidArgument);
}

TEST(Calibrate, InfiniteScoresSortLast) {
  const auto th = cti_calibrate(vec({kInfty, 3, kInfty, 1, 2}), 0.5);  // rank 3
  EXPECT_EQ(th.t, 3.0);
  EXPECT_EQ(cti_calibrate(vec({kInfty, 3, kInfty, 1, 2}), 0.2).t, kInfty);
}

TEST(Calibrate, MatchesSortedOrderStatistic) {
  std::mt19937_64 rng(21);
  std::exponential_distribution<double> expo;
  std::uniform_real_distribution<double> unif(0.01, 0.99);
  for (int trial = 0; trial < 200; ++trial) {
    Eigen::VectorXd s(1 + trial * 3);
    for (auto& v : s) v = std::floor(expo(rng) * 4) / 4;  // heavy ties
    const double alpha = unif(rng);
    const auto th = cti_calibrate(s, alpha);
    const auto expected_rank = static_cast<Index>(std::ceil((s.size() + 1) * (1 - alpha) - 1e-9));
    ASSERT_EQ(th.rank, expected_rank);
    if (th.rank <= s.size())
      EXPECT_EQ(th.t, kth_smallest(s, th.rank));
    else
      EXPECT_EQ(th.t, kInfty);
  }
}

class PredictExample : public ::testing::Test {
 protected:
  IntervalPartition<double> p = build_partition(vec({0, 0.5, 0.7, 1.0}));
};

TEST_F(PredictExample, MergesAdjacentIntervals) {
  const auto s = cti_predict(p, 0.3);
  ASSERT_EQ(s.n_components(), 1);
  EXPECT_EQ(s.components[0].lo, 0.5);
  EXPECT_EQ(s.components[0].hi, 1.0);
  EXPECT_EQ(s.size, (0.7 - 0.5) + (1.0 - 0.7));
}

TEST_F(PredictExample, SingleInterval) {
  const auto s = cti_predict(p, 0.2);
  ASSERT_EQ(s.n_components(), 1);
  EXPECT_EQ(s.components[0].lo, 0.5);
  EXPECT_EQ(s.components[0].hi, 0.7);
  EXPECT_EQ(s.size, 0.7 - 0.5);
}

TEST_F(PredictExample, EmptyAndFallback) {
  const auto s = cti_predict(p, 0.1);
  EXPECT_TRUE(s.empty());
  EXPECT_EQ(s.size, 0.0);
  const auto f = cti_predict(p, 0.1, CtiOptions{true});
  ASSERT_EQ(f.n_components(), 1);
  EXPECT_EQ(f.components[0].lo, 0.5);
  EXPECT_EQ(f.components[0].hi, 0.7);
}

TEST(Predict, DisjointComponentsAndInfiniteThreshold) {
  const auto p = build_partition(vec({-4, -3, -2.5, 0, 2.5, 3, 4}));
  const auto s = cti_predict(p, 1.0);
  ASSERT_EQ(s.n_components(), 2);
  EXPECT_EQ(s.components[0].lo, -4);
  EXPECT_EQ(s.components[0].hi, -2.5);
  EXPECT_EQ(s.components[1].lo, 2.5);
  EXPECT_EQ(s.components[1].hi, 4);
  EXPECT_EQ(s.size, 3.0);
  Threshold<double> all;
  all.t = kInfty;
  const auto whole = cti_predict(p, all);
  ASSERT_EQ(whole.n_components(), 1);
  EXPECT_EQ(whole.size, 8.0);
}

TEST(SetContains, Examples) {
  PredictionSet<double> s;
  s.components.push_back({0.5, 1.0});
  EXPECT_TRUE(set_contains(s, 0.7));
  EXPECT_FALSE(set_contains(s, 0.4));
  EXPECT_TRUE(set_contains(s, 0.5));
  EXPECT_TRUE(set_contains(s, 1.0));
  EXPECT_FALSE(set_contains(PredictionSet<double>{}, 0.0));
  EXPECT_THROW(set_contains(s, std::nan("")), DataError);
}

class RandomSets : public ::testing::Test {
 protected:
  std::mt19937_64 rng{99};
  std::normal_distribution<double> normal;
  std::uniform_real_distribution<double> unif;

  IntervalPartition<double> partition(Index K) {
    Eigen::VectorXd g(K + 1);
    for (auto& v : g) v = normal(rng);
    std::sort(g.begin(), g.end());
    return build_partition(g);
  }
};

TEST_F(RandomSets, SizeIdentityAndInvariants) {
  for (int trial = 0; trial < 500; ++trial) {
    const auto p = partition(1 + trial % 40);
    const double t = unif(rng) * 0.5;
    const auto s = cti_predict(p, t);
    double selected = 0.0;
    for (Index k = 0; k < p.size(); ++k)
      if (p.lengths(k) <= t) selected += p.lengths(k);
    EXPECT_NEAR(s.size, selected, 1e-12 * (1 + selected));
    double total = 0.0;
    for (std::size_t c = 0; c < s.components.size(); ++c) {
      EXPECT_GT(s.components[c].hi, s.components[c].lo);
      if (c > 0) EXPECT_GT(s.components[c].lo, s.components[c - 1].hi);
      total += s.components[c].hi - s.components[c].lo;
    }
    EXPECT_NEAR(total, s.size, 1e-12 * (1 + total));
    // Membership agrees with the selected intervals away from edges.
    for (Index k = 0; k < p.size(); ++k) {
      if (p.lengths(k) <= 0) continue;
      const double mid = 0.5 * (p.lower(k) + p.upper(k));
      EXPECT_EQ(set_contains(s, mid), p.lengths(k) <= t);
    }
  }
}

TEST_F(RandomSets, NestedInThreshold) {
  for (int trial = 0; trial < 300; ++trial) {
    const auto p = partition(30);
    double t1 = unif(rng) * 0.3, t2 = unif(rng) * 0.3;
    if (t1 > t2) std::swap(t1, t2);
    const auto s1 = cti_predict(p, t1), s2 = cti_predict(p, t2);
    EXPECT_LE(s1.size, s2.size);
    for (const auto& c : s1.components) {
      EXPECT_TRUE(set_contains(s2, c.lo));
      EXPECT_TRUE(set_contains(s2, c.hi));
      EXPECT_TRUE(set_contains(s2, 0.5 * (c.lo + c.hi)));
    }
  }
}

TEST_F(RandomSets, MonotoneInAlpha) {
  Eigen::VectorXd scores(200);
  for (auto& v : scores) v = std::abs(normal(rng));
  const auto p = partition(40);
  double prev_t = kInfty;
  PredictionSet<double> prev = cti_predict(p, prev_t);
  for (double alpha = 0.01; alpha < 0.99; alpha += 0.02) {
    const auto th = cti_calibrate(scores, alpha);
    EXPECT_LE(th.t, prev_t);
    const auto s = cti_predict(p, th);
    EXPECT_LE(s.size, prev.size);
    for (const auto& c : s.components) EXPECT_TRUE(set_contains(prev, 0.5 * (c.lo + c.hi)));
    prev_t = th.t;
    prev = s;
  }
}

// Small n_cal keeps the finite-sample excess 1/(n_cal+1) well above the
// Monte-Carlo error, so the lower bound is a real check.
TEST(CoverageGuarantee, MonteCarloMarginalCoverage) {
  const Scenario s = Scenario::hetero_gauss();
  const int K = 20;
  const double alpha = 0.1;
  const Index n_cal = 10, n_test = 50;
  const int trials = 2000;
  const auto lv = QuantileLevels::equispaced(K);

  double sum = 0.0, sum_sq = 0.0;
  for (int trial = 0; trial < trials; ++trial) {
    const auto cal = generate(s, n_cal, mix_seed(1000, trial));
    const auto test = generate(s, n_test, mix_seed(2000, trial));
    Eigen::VectorXd scores(n_cal);
    for (Index i = 0; i < n_cal; ++i) {
      const auto p = build_partition(true_quantile_grid(s, cal.X(i, 0), lv.values()));
      scores(i) = conformity_score(p, cal.y(i), BoundaryPolicy::Infinite).value;
    }
    const auto th = cti_calibrate(scores, alpha);
    Index covered = 0;
    for (Index i = 0; i < n_test; ++i) {
      const auto p = build_partition(true_quantile_grid(s, test.X(i, 0), lv.values()));
      covered += set_contains(cti_predict(p, th), test.y(i)) ? 1 : 0;
    }
    const double c = static_cast<double>(covered) / n_test;
    sum += c;
    sum_sq += c * c;
  }
  const double mean = sum / trials;
  const double se = std::sqrt((sum_sq / trials - mean * mean) / (trials - 1));
  EXPECT_GE(mean, 1 - alpha);
  EXPECT_LE(mean, 1 - alpha + 1.0 / (n_cal + 1) + 3 * se);
}

TEST(CoverageGuarantee, CalibrationSelfConsistency) {
  const Scenario s = Scenario::hetero_gauss();
  const auto lv = QuantileLevels::equispaced(40);
  const auto train = generate(s, 1000, 1);
  const auto cal = generate(s, 500, 2);
  ForestConfig fc;
  fc.n_trees = 30;
  const auto model = fit_forest(train, lv, fc);
  const Eigen::MatrixXd grids = model.predict_grids(cal.X);
  for (auto policy : {BoundaryPolicy::Clamp, BoundaryPolicy::Infinite}) {
    std::vector<ConformityScore<double>> sc;
    Eigen::VectorXd values(cal.size());
    for (Index i = 0; i < cal.size(); ++i) {
      sc.push_back(conformity_score(build_partition(grids.row(i).transpose().eval()), cal.y(i), policy));
      values(i) = sc.back().value;
    }
    const auto th = cti_calibrate(values, 0.1);
    Index covered = 0, exempt = 0;
    for (Index i = 0; i < cal.size(); ++i) {
      const auto set = cti_predict(build_partition(grids.row(i).transpose().eval()), th);
      if (set_contains(set, cal.y(i)))
        ++covered;
      else if (sc[i].value <= th.t && sc[i].location.boundary_clamped)
        ++exempt;
      else
        EXPECT_GT(sc[i].value, th.t);
    }
    EXPECT_GE(covered + exempt, th.rank - 1);
  }
}

TEST(Harmonic, AggregateExamples) {
  EXPECT_EQ(harmonic_aggregate(1.0, 1.0), 1.0);
  EXPECT_DOUBLE_EQ(harmonic_aggregate(0.5, 1.0), 2.0 / 3.0);
  EXPECT_EQ(harmonic_aggregate(0.0, 5.0), 0.0);
  EXPECT_EQ(harmonic_aggregate(3.0, kInfty), 6.0);
  EXPECT_EQ(harmonic_aggregate(kInfty, kInfty), kInfty);
  EXPECT_THROW(harmonic_aggregate(-1.0, 1.0), InvalidArgument);
}

TEST(Harmonic, PredictMatchesDenseScan) {
  std::mt19937_64 rng(8);
  std::normal_distribution<double> normal;
  std::uniform_real_distribution<double> unif(0.05, 1.0);
  for (int trial = 0; trial < 50; ++trial) {
    Eigen::VectorXd ga(11), gb(11);
    for (auto& v : ga) v = normal(rng);
    for (auto& v : gb) v = normal(rng);
    std::sort(ga.begin(), ga.end());
    std::sort(gb.begin(), gb.end());
    const auto a = build_partition(ga), b = build_partition(gb);
    const double t = unif(rng);
    const auto s = harmonic_predict(a, b, t, BoundaryPolicy::Infinite);
    const double lo = std::min(ga(0), gb(0)), hi = std::max(ga(10), gb(10));
    const int n = 20000;
    const double h = (hi - lo) / n;
    double measure = 0.0;
    for (int i = 0; i < n; ++i) {
      const double y = lo + (i + 0.5) * h;
      const bool in = harmonic_score(a, b, y, BoundaryPolicy::Infinite) <= t;
      measure += in ? h : 0.0;
    }
    // Each cut point can misclassify at most one scan cell.
    EXPECT_NEAR(s.size, measure, 22 * h) << trial;
  }
}

TEST(Harmonic, IdenticalPartitionsReduceToCti) {
  const auto p = build_partition(vec({0, 1, 1.5, 3, 3.2, 5}));
  for (double t : {0.1, 0.3, 0.5, 1.0, 2.0}) {
    const auto h = harmonic_predict(p, p, t, BoundaryPolicy::Clamp);
    const auto c = cti_predict(p, t);
    EXPECT_EQ(h.size, c.size);
    EXPECT_EQ(h.n_components(), c.n_components());
  }
}

TEST(SplitConformal, Examples) {
  const auto perfect = split_conformal(vec({1, 2, 3}), vec({1, 2, 3}), vec({5, 6}), 0.5);
  EXPECT_EQ(perfect.Q, 0.0);
  EXPECT_EQ(perfect.lo, perfect.hi);
  const auto r = split_conformal(vec({0, 0, 0}), vec({1, -2, 3}), vec({10}), 0.5);
  EXPECT_EQ(r.threshold.rank, 2);
  EXPECT_EQ(r.Q, 2.0);
  EXPECT_EQ(r.lo(0), 8.0);
  EXPECT_EQ(r.hi(0), 12.0);
}

TEST(SplitConformal, GaussianResidualQuantile) {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> normal;
  Eigen::VectorXd y(10000);
  for (auto& v : y) v = normal(rng);
  const auto r = split_conformal(Eigen::VectorXd::Zero(y.size()), y, vec({0}), 0.1);
  EXPECT_EQ(r.Q, kth_smallest(y.cwiseAbs(), rank_index(y.size(), 0.1)));
  EXPECT_NEAR(r.Q, 1.645, 0.05);
}

TEST(Cqr, ScoreSignConvention) {
  EXPECT_NEAR(cqr_score(0.0, 1.0, 0.2), -0.2, 1e-15);
  EXPECT_NEAR(cqr_score(0.0, 1.0, 0.7), -0.3, 1e-15);
  EXPECT_EQ(cqr_score(0.0, 1.0, 1.5), 0.5);
  EXPECT_EQ(cqr_score(0.0, 1.0, -2.0), 2.0);
}

TEST(Cqr, ResponsesAtUpperBand) {
  const Eigen::VectorXd lo = vec({0, 1, 2, 3}), hi = vec({1, 2, 3, 4});
  const auto r = cqr(lo, hi, hi, vec({5}), vec({7}), 0.2);
  EXPECT_EQ(r.Q, 0.0);
  EXPECT_EQ(r.lo(0), 5.0);
  EXPECT_EQ(r.hi(0), 7.0);
}

TEST(Cqr, OracleBandsNeedNoCorrection) {
  std::mt19937_64 rng(6);
  std::normal_distribution<double> normal;
  const Index n = 10000;
  Eigen::VectorXd y(n);
  for (auto& v : y) v = normal(rng);
  const double z = normal_quantile(0.95);
  const Eigen::VectorXd lo = Eigen::VectorXd::Constant(n, -z), hi = Eigen::VectorXd::Constant(n, z);
  const auto r = cqr(lo, hi, y, vec({-z}), vec({z}), 0.1);
  EXPECT_LE(std::abs(r.Q), 0.05);
  EXPECT_LE(r.lo(0), r.hi(0));
}

TEST(Cqr, ModelVersionSnapsToGridLevels) {
  const Scenario s = Scenario::standard_normal();
  const auto lv = QuantileLevels::equispaced(40);
  ExternalQuantileModel truth(lv, 1, [&](const Eigen::VectorXd& x) {
    return true_quantile_grid(s, x(0), lv.values());
  });
  const auto cal = generate(s, 4000, 3);
  const auto test = generate(s, 10, 4);
  const auto r = cqr(truth, cal, test, 0.1);
  EXPECT_NEAR(r.snap_distance, std::abs(lv[2] - 0.05), 1e-12);
  EXPECT_LE(std::abs(r.Q), 0.08);
  const auto sc = split_conformal(truth, cal, test, 0.1);
  EXPECT_NEAR(sc.Q, 1.645, 0.08);
  EXPECT_EQ(sc.snap_distance, lv.nearest(0.5).second);
}

}  // namespace
}  // namespace cti
