#pragma once

#include "cti/common.hpp"

#include <string>
#include <vector>

namespace cti {

/// Reads a numeric CSV with a header row. Rows with a missing cell (empty,
/// NA, NaN, ?) are dropped and counted in Dataset::dropped_rows; a warning
/// goes to stderr. A non-numeric cell elsewhere is a FormatError naming the
/// column, as is an unknown response column.
Dataset load_csv(const std::string& path, const std::string& response_column);

/// Disjoint train/calibration/test index sets drawn from one seeded
/// permutation: |test| = round(0.2 n), |train| = round(0.7 (n - |test|)).
struct DataSplit {
  std::vector<Index> train, cal, test;
  std::uint64_t seed = 0;
  double test_fraction = 0.2;
  double train_fraction = 0.7;
};

DataSplit split(Index n, std::uint64_t seed);

/// Affine response transform fitted on the non-test rows.
struct Standardizer {
  double mean = 0.0;
  double scale = 1.0;

  double transform(double y) const { return (y - mean) / scale; }
  double inverse(double z) const { return z * scale + mean; }
};

/// Standardizes y on every row using statistics from train and cal only.
/// Throws DataError if those responses have zero variance.
std::pair<Dataset, Standardizer> standardize(const Dataset& ds, const DataSplit& split);

}  // namespace cti
