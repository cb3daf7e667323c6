#include "cti/evaluation.hpp"
#include "cti/oracle.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <random>

namespace cti {
namespace {

PredictionSetd make_set(std::initializer_list<std::pair<double, double>> comps) {
  PredictionSetd s;
  for (auto [lo, hi] : comps) {
    s.components.push_back({lo, hi});
    s.size += hi - lo;
  }
  return s;
}

std::string slurp(const std::string& path) {
  std::ifstream in(path);
  return {std::istreambuf_iterator<char>(in), {}};
}

TEST(Coverage, Examples) {
  const Eigen::VectorXd y = Eigen::VectorXd::LinSpaced(10, 0.0, 9.0);
  std::vector<PredictionSetd> whole(10, make_set({{0.0, 9.0}}));
  EXPECT_EQ(coverage(whole, y), 1.0);
  std::vector<PredictionSetd> none(10);
  EXPECT_EQ(coverage(none, y), 0.0);
  std::vector<PredictionSetd> most(10, make_set({{0.0, 8.5}}));
  EXPECT_DOUBLE_EQ(coverage(most, y), 0.9);
  EXPECT_THROW(coverage(most, Eigen::VectorXd::Zero(3)), InvalidArgument);
}

TEST(Coverage, BaselineIntervals) {
  BaselineResult r;
  r.lo = Eigen::Vector4d(0, 0, 0, 0);
  r.hi = Eigen::Vector4d(1, 2, 3, 4);
  EXPECT_EQ(coverage(r, Eigen::Vector4d(0.5, 2.5, 3.0, -1)), 0.5);
  EXPECT_EQ(mean_size(r), 2.5);
}

TEST(MeanSize, Examples) {
  EXPECT_EQ(mean_size({make_set({{0, 1}}), make_set({{2, 3}}), make_set({{-1, 0}})}), 1.0);
  EXPECT_EQ(mean_size({make_set({}), make_set({{0, 1}, {2, 3}})}), 1.0);
  EXPECT_EQ(mean_size({make_set({})}), 0.0);
  EXPECT_THROW(mean_size(std::vector<PredictionSetd>{}), InvalidArgument);
  EXPECT_EQ(mean_components({make_set({}), make_set({{0, 1}, {2, 3}})}), 1.0);
}

TEST(Metrics, InvariantToTestOrder) {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> normal;
  std::vector<PredictionSetd> sets;
  Eigen::VectorXd y(200);
  for (Index i = 0; i < 200; ++i) {
    const double a = normal(rng), b = a + std::abs(normal(rng));
    sets.push_back(make_set({{a, b}}));
    y(i) = normal(rng);
  }
  const double c = coverage(sets, y), s = mean_size(sets);
  std::vector<Index> perm(200);
  std::iota(perm.begin(), perm.end(), 0);
  std::shuffle(perm.begin(), perm.end(), rng);
  std::vector<PredictionSetd> sets2;
  Eigen::VectorXd y2(200);
  for (Index i = 0; i < 200; ++i) {
    sets2.push_back(sets[perm[i]]);
    y2(i) = y(perm[i]);
  }
  EXPECT_EQ(coverage(sets2, y2), c);
  EXPECT_NEAR(mean_size(sets2), s, 1e-12);
}

TEST(Metrics, CtiSizeBoundedByFullRange) {
  std::mt19937_64 rng(4);
  std::normal_distribution<double> normal;
  std::vector<PredictionSetd> sets, full;
  double range = 0.0;
  for (int i = 0; i < 100; ++i) {
    Eigen::VectorXd g(21);
    for (auto& v : g) v = normal(rng);
    std::sort(g.begin(), g.end());
    const auto p = build_partition(g);
    sets.push_back(cti_predict(p, 0.2));
    full.push_back(cti_predict(p, std::numeric_limits<double>::infinity()));
    range += p.range();
  }
  EXPECT_LE(mean_size(sets), mean_size(full));
  EXPECT_NEAR(mean_size(full), range / 100, 1e-12);
}

TEST(LengthHistogram, EqualLengthsGiveZeroDifference) {
  std::vector<IntervalPartitiond> parts(5, build_partition(Eigen::Vector4d(0, 1, 2, 3)));
  const auto h = length_histograms(parts, Eigen::VectorXd::Constant(5, 1.5), 10);
  EXPECT_EQ(h.mean_difference, 0.0);
  EXPECT_EQ(h.count_all.sum(), 15);
  EXPECT_EQ(h.count_response.sum(), 5);
}

TEST(LengthHistogram, ResponsesInShortestInterval) {
  std::vector<IntervalPartitiond> parts(4, build_partition(Eigen::Vector3d(0, 1, 4)));
  const auto h = length_histograms(parts, Eigen::VectorXd::Constant(4, 0.5), 2);
  EXPECT_EQ(h.mean_response, 1.0);
  EXPECT_EQ(h.mean_all, 2.0);
  EXPECT_EQ(h.mean_difference, -1.0);
  EXPECT_EQ(h.count_response, Eigen::Vector2i(4, 0));
  EXPECT_EQ(h.count_all, Eigen::Vector2i(4, 4));
}

TEST(LengthHistogram, Errors) {
  std::vector<IntervalPartitiond> parts(2, build_partition(Eigen::Vector3d(0, 1, 4)));
  EXPECT_THROW(length_histograms(parts, Eigen::Vector2d(9, 9), 10, BoundaryPolicy::Infinite),
               DataError);
  EXPECT_NO_THROW(length_histograms(parts, Eigen::Vector2d(9, 9), 10, BoundaryPolicy::Clamp));
  EXPECT_THROW(length_histograms(parts, Eigen::Vector2d(1, 1), 1), InvalidArgument);
  EXPECT_THROW(length_histograms(parts, Eigen::Vector3d(1, 1, 1), 10), InvalidArgument);
}

// Equal-mass intervals: each holds a response with probability 1/K, so the
// covering length averages to the mean length. The difference is zero up to
// Monte-Carlo error when the quantile model is exact.
TEST(LengthHistogram, ExactQuantilesGiveNoShift) {
  const Scenario s = Scenario::hetero_gauss();
  const auto lv = QuantileLevels::equispaced(20, 0.05, 0.95);
  const auto d = generate(s, 40000, 6);
  std::vector<IntervalPartitiond> parts;
  for (Index i = 0; i < d.size(); ++i)
    parts.push_back(build_partition(true_quantile_grid(s, d.X(i, 0), lv.values())));
  const auto h = length_histograms(parts, d.y, 50, BoundaryPolicy::Infinite);
  // Covering lengths have sd below 0.5 here, over ~36000 in-range draws.
  EXPECT_NEAR(h.mean_difference, 0.0, 0.01);
  EXPECT_EQ(h.count_all.sum(), 20 * 40000);
}

TEST(Summary, Examples) {
  EXPECT_EQ(summarize({0.9, 0.9}).format(), "0.900 (0.000)");
  const auto single = summarize({0.7});
  EXPECT_EQ(single.stddev, 0.0);
  EXPECT_EQ(single.n, 1);
  const auto two = summarize({0.8, 1.0});
  EXPECT_NEAR(two.mean, 0.9, 1e-15);
  EXPECT_NEAR(two.stddev, 0.1414, 1e-4);
  EXPECT_EQ(two.format(), "0.900 (0.141)");
}

TEST(Aggregate, ReportAndCsv) {
  MethodReport cti{"cti-forest", {0.9, 0.92}, {1.0, 1.2}, {1.0, 2.0}, {0.0, 0.01}};
  MethodReport cqr_report{"cqr", {0.91}, {2.0}, {}, {}};
  const auto a = aggregate(cti);
  EXPECT_TRUE(a.has_components);
  EXPECT_NEAR(a.size.mean, 1.1, 1e-15);
  EXPECT_FALSE(aggregate(cqr_report).has_components);
  EXPECT_THROW(aggregate(MethodReport{}), InvalidArgument);

  std::filesystem::create_directories(CTI_TEST_TMP);
  const std::string path = std::string(CTI_TEST_TMP) + "/report.csv";
  write_report_csv(path, "toy", {a, aggregate(cqr_report)});
  EXPECT_EQ(slurp(path),
            "dataset,method,metric,mean,std,n_reps\n"
            "toy,cti-forest,coverage,0.910000,0.014142,2\n"
            "toy,cti-forest,size,1.100000,0.141421,2\n"
            "toy,cti-forest,n_components,1.500000,0.707107,2\n"
            "toy,cti-forest,clamp_rate,0.005000,0.007071,2\n"
            "toy,cqr,coverage,0.910000,0.000000,1\n"
            "toy,cqr,size,2.000000,0.000000,1\n");
}

TEST(Aggregate, HistogramCsv) {
  std::vector<IntervalPartitiond> parts(4, build_partition(Eigen::Vector3d(0, 1, 4)));
  const auto h = length_histograms(parts, Eigen::VectorXd::Constant(4, 0.5), 2);
  const std::string path = std::string(CTI_TEST_TMP) + "/hist.csv";
  std::filesystem::create_directories(CTI_TEST_TMP);
  write_histogram_csv(path, h);
  EXPECT_EQ(slurp(path),
            "bin_lo,bin_hi,count_response,count_all\n"
            "1.000000,2.000000,4,4\n"
            "2.000000,3.000000,0,4\n");
}

}  // namespace
}  // namespace cti
