#pragma once

#include "cti/conformal.hpp"
#include "cti/interval_engine.hpp"

#include <string>
#include <vector>

namespace cti {

using PredictionSetd = PredictionSet<double>;
using IntervalPartitiond = IntervalPartition<double>;

/// Fraction of responses inside their prediction set.
double coverage(const std::vector<PredictionSetd>& sets, const Eigen::VectorXd& y);
double coverage(const BaselineResult& intervals, const Eigen::VectorXd& y);

double mean_size(const std::vector<PredictionSetd>& sets);
double mean_size(const BaselineResult& intervals);
double mean_components(const std::vector<PredictionSetd>& sets);

struct LengthHistogram {
  Eigen::VectorXd bin_edges;  // bins + 1
  Eigen::VectorXi count_response;
  Eigen::VectorXi count_all;
  double mean_response = 0.0;
  double mean_all = 0.0;
  double mean_difference = 0.0;  // mean_response - mean_all
};

/// Histogram of covering-interval lengths against all interval lengths,
/// equal-width bins over the pooled range. Out-of-range responses are
/// clamped or skipped per policy; DataError if none remain.
LengthHistogram length_histograms(const std::vector<IntervalPartitiond>& partitions,
                                  const Eigen::VectorXd& y, int bins = 50,
                                  BoundaryPolicy policy = BoundaryPolicy::Clamp);

/// Mean and sample standard deviation (n-1) over repetitions; stddev is 0 for a
/// single value.
struct Summary {
  double mean = 0.0;
  double stddev = 0.0;
  Index n = 0;

  /// "0.899 (0.007)"
  std::string format(int digits = 3) const;
};

Summary summarize(const std::vector<double>& values);

struct MethodReport {
  std::string method;
  std::vector<double> coverage;
  std::vector<double> size;
  std::vector<double> n_components;  // CTI-style methods only
  std::vector<double> clamp_rate;    // CTI-style methods only

  Index repetitions() const { return static_cast<Index>(coverage.size()); }
};

struct AggregatedReport {
  std::string method;
  Summary coverage, size, n_components, clamp_rate;
  bool has_components = false;
};

AggregatedReport aggregate(const MethodReport& report);

/// Rows "dataset,method,metric,mean,std,n_reps".
void write_report_csv(const std::string& path, const std::string& dataset,
                      const std::vector<AggregatedReport>& reports);

/// Rows "bin_lo,bin_hi,count_response,count_all".
void write_histogram_csv(const std::string& path, const LengthHistogram& h);

}  // namespace cti
