#include "cti/data_io.hpp"

#include "csv.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iostream>
#include <numeric>
#include <random>
#include <sstream>

namespace cti {

Dataset load_csv(const std::string& path, const std::string& response_column) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open " + path);
  std::string line;
  if (!csv::next_line(in, line)) throw FormatError(path + ": missing header row");
  auto header = csv::split_record(line);
  for (auto& h : header) h = std::string(csv::trim(h));

  const auto it = std::find(header.begin(), header.end(), response_column);
  if (it == header.end())
    throw FormatError(path + ": no response column '" + response_column + "'");
  const std::size_t response = static_cast<std::size_t>(it - header.begin());

  Dataset ds;
  ds.provenance = path;
  for (std::size_t c = 0; c < header.size(); ++c)
    if (c != response) ds.feature_names.push_back(header[c]);

  std::vector<double> cells;
  std::vector<double> ys;
  std::size_t lineno = 1;
  while (csv::next_line(in, line)) {
    ++lineno;
    if (csv::trim(line).empty()) continue;
    const auto fields = csv::split_record(line);
    if (fields.size() != header.size()) {
      std::ostringstream msg;
      msg << path << ":" << lineno << ": " << fields.size() << " fields, header has "
          << header.size();
      throw FormatError(msg.str());
    }
    if (std::any_of(fields.begin(), fields.end(),
                    [](const std::string& f) { return csv::is_missing(f); })) {
      ++ds.dropped_rows;
      continue;
    }
    for (std::size_t c = 0; c < fields.size(); ++c) {
      const auto v = csv::parse_double(fields[c]);
      if (!v || !std::isfinite(*v)) {
        std::ostringstream msg;
        msg << path << ":" << lineno << ": column '" << header[c]
            << "' is not numeric (value '" << fields[c] << "')";
        throw FormatError(msg.str());
      }
      if (c == response)
        ys.push_back(*v);
      else
        cells.push_back(*v);
    }
  }
  if (ds.dropped_rows > 0)
    std::cerr << "warning: " << path << ": dropped " << ds.dropped_rows
              << " row(s) with missing values\n";

  const Index n = static_cast<Index>(ys.size());
  const Index d = static_cast<Index>(header.size()) - 1;
  ds.y = Eigen::Map<Eigen::VectorXd>(ys.data(), n);
  ds.X = Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
      cells.data(), n, d);
  return ds;
}

DataSplit split(Index n, std::uint64_t seed) {
  if (n < 10) throw InvalidArgument("split: need at least 10 samples");
  std::vector<Index> perm(static_cast<std::size_t>(n));
  std::iota(perm.begin(), perm.end(), Index{0});
  std::mt19937_64 rng(seed);
  std::shuffle(perm.begin(), perm.end(), rng);

  DataSplit s;
  s.seed = seed;
  const auto n_test = static_cast<Index>(std::llround(s.test_fraction * n));
  const auto n_train = static_cast<Index>(std::llround(s.train_fraction * (n - n_test)));
  auto at = [&](Index i) { return perm.begin() + i; };
  s.test.assign(at(0), at(n_test));
  s.train.assign(at(n_test), at(n_test + n_train));
  s.cal.assign(at(n_test + n_train), perm.end());
  return s;
}

std::pair<Dataset, Standardizer> standardize(const Dataset& ds, const DataSplit& split) {
  std::vector<Index> fit_rows = split.train;
  fit_rows.insert(fit_rows.end(), split.cal.begin(), split.cal.end());
  if (fit_rows.size() < 2) throw DataError("standardize: need at least two non-test rows");

  double sum = 0.0;
  for (Index i : fit_rows) sum += ds.y(i);
  const double mean = sum / static_cast<double>(fit_rows.size());
  double ss = 0.0;
  for (Index i : fit_rows) ss += (ds.y(i) - mean) * (ds.y(i) - mean);
  const double sd = std::sqrt(ss / static_cast<double>(fit_rows.size() - 1));
  if (!(sd > 0.0)) throw DataError("standardize: response has zero variance");

  Standardizer st{mean, sd};
  Dataset out = ds;
  out.y = (ds.y.array() - mean) / sd;
  return {std::move(out), st};
}

}  // namespace cti
