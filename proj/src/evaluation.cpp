#include "cti/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <sstream>

namespace cti {

double coverage(const std::vector<PredictionSetd>& sets, const Eigen::VectorXd& y) {
  if (static_cast<Index>(sets.size()) != y.size())
    throw InvalidArgument("coverage: sets and responses differ in length");
  if (sets.empty()) throw InvalidArgument("coverage: no samples");
  Index hit = 0;
  for (Index i = 0; i < y.size(); ++i)
    hit += set_contains(sets[static_cast<std::size_t>(i)], y(i)) ? 1 : 0;
  return static_cast<double>(hit) / static_cast<double>(y.size());
}

double coverage(const BaselineResult& r, const Eigen::VectorXd& y) {
  if (r.size() != y.size())
    throw InvalidArgument("coverage: intervals and responses differ in length");
  if (y.size() == 0) throw InvalidArgument("coverage: no samples");
  const auto inside = (y.array() >= r.lo.array() && y.array() <= r.hi.array());
  return static_cast<double>(inside.count()) / static_cast<double>(y.size());
}

double mean_size(const std::vector<PredictionSetd>& sets) {
  if (sets.empty()) throw InvalidArgument("mean_size: no sets");
  double total = 0.0;
  for (const auto& s : sets) total += s.size;
  return total / static_cast<double>(sets.size());
}

double mean_size(const BaselineResult& r) {
  if (r.size() == 0) throw InvalidArgument("mean_size: no intervals");
  return (r.hi - r.lo).mean();
}

double mean_components(const std::vector<PredictionSetd>& sets) {
  if (sets.empty()) throw InvalidArgument("mean_components: no sets");
  double total = 0.0;
  for (const auto& s : sets) total += static_cast<double>(s.n_components());
  return total / static_cast<double>(sets.size());
}

LengthHistogram length_histograms(const std::vector<IntervalPartitiond>& partitions,
                                  const Eigen::VectorXd& y, int bins,
                                  BoundaryPolicy policy) {
  if (bins < 2) throw InvalidArgument("length_histograms: need at least 2 bins");
  if (static_cast<Index>(partitions.size()) != y.size())
    throw InvalidArgument("length_histograms: partitions and responses differ in length");

  std::vector<double> response, all;
  for (std::size_t i = 0; i < partitions.size(); ++i) {
    const auto& p = partitions[i];
    all.insert(all.end(), p.lengths.data(), p.lengths.data() + p.lengths.size());
    const auto loc = interval_index(p, y(static_cast<Index>(i)), policy);
    if (loc.index) response.push_back(p.lengths(*loc.index));
  }
  if (response.empty())
    throw DataError("length_histograms: no response falls inside its partition");

  LengthHistogram h;
  const auto [mn, mx] = std::minmax_element(all.begin(), all.end());
  double lo = *mn, hi = *mx;
  if (!(hi > lo)) hi = lo + 1.0;
  h.bin_edges = Eigen::VectorXd::LinSpaced(bins + 1, lo, hi);
  h.count_response = Eigen::VectorXi::Zero(bins);
  h.count_all = Eigen::VectorXi::Zero(bins);
  auto bin_of = [&](double v) {
    const int b = static_cast<int>((v - lo) / (hi - lo) * bins);
    return std::clamp(b, 0, bins - 1);
  };
  double sr = 0.0, sa = 0.0;
  for (double v : response) {
    ++h.count_response(bin_of(v));
    sr += v;
  }
  for (double v : all) {
    ++h.count_all(bin_of(v));
    sa += v;
  }
  h.mean_response = sr / static_cast<double>(response.size());
  h.mean_all = sa / static_cast<double>(all.size());
  h.mean_difference = h.mean_response - h.mean_all;
  return h;
}

std::string Summary::format(int digits) const {
  std::ostringstream out;
  out << std::fixed << std::setprecision(digits) << mean << " (" << stddev << ")";
  return out.str();
}

Summary summarize(const std::vector<double>& values) {
  Summary s;
  s.n = static_cast<Index>(values.size());
  if (values.empty()) return s;
  double sum = 0.0;
  for (double v : values) sum += v;
  s.mean = sum / static_cast<double>(s.n);
  if (s.n > 1) {
    double ss = 0.0;
    for (double v : values) ss += (v - s.mean) * (v - s.mean);
    s.stddev = std::sqrt(ss / static_cast<double>(s.n - 1));
  }
  return s;
}

AggregatedReport aggregate(const MethodReport& r) {
  if (r.coverage.empty()) throw InvalidArgument("aggregate: no repetitions");
  AggregatedReport a;
  a.method = r.method;
  a.coverage = summarize(r.coverage);
  a.size = summarize(r.size);
  a.has_components = !r.n_components.empty();
  if (a.has_components) {
    a.n_components = summarize(r.n_components);
    a.clamp_rate = summarize(r.clamp_rate);
  }
  return a;
}

namespace {

std::string fixed(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

}  // namespace

void write_report_csv(const std::string& path, const std::string& dataset,
                      const std::vector<AggregatedReport>& reports) {
  std::ofstream out(path);
  if (!out) throw FormatError("cannot write " + path);
  out << "dataset,method,metric,mean,std,n_reps\n";
  auto row = [&](const std::string& method, const char* metric, const Summary& s) {
    out << dataset << ',' << method << ',' << metric << ',' << fixed(s.mean) << ','
        << fixed(s.stddev) << ',' << s.n << '\n';
  };
  for (const auto& r : reports) {
    row(r.method, "coverage", r.coverage);
    row(r.method, "size", r.size);
    if (r.has_components) {
      row(r.method, "n_components", r.n_components);
      row(r.method, "clamp_rate", r.clamp_rate);
    }
  }
}

void write_histogram_csv(const std::string& path, const LengthHistogram& h) {
  std::ofstream out(path);
  if (!out) throw FormatError("cannot write " + path);
  out << "bin_lo,bin_hi,count_response,count_all\n";
  for (Index b = 0; b < h.count_all.size(); ++b)
    out << fixed(h.bin_edges(b)) << ',' << fixed(h.bin_edges(b + 1)) << ','
        << h.count_response(b) << ',' << h.count_all(b) << '\n';
}

}  // namespace cti
