#pragma once

// Interquantile interval partitions and the length-based conformity score.
//
// A grid q_0 <= ... <= q_K defines K half-open intervals (q_{k-1}, q_k].
// Indices here are 0-based: interval j is (edges[j], edges[j+1]].

#include "cti/common.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <string>

namespace cti {

enum class BoundaryPolicy {
  Clamp,     // responses outside (q_0, q_K] use the nearest extreme interval
  Infinite,  // responses outside get score +inf
};

inline std::string to_string(BoundaryPolicy p) {
  return p == BoundaryPolicy::Clamp ? "clamp" : "infinite";
}

inline BoundaryPolicy parse_boundary_policy(const std::string& s) {
  if (s == "clamp") return BoundaryPolicy::Clamp;
  if (s == "infinite") return BoundaryPolicy::Infinite;
  throw InvalidArgument("unknown boundary policy '" + s + "'");
}

template <typename Scalar>
struct IntervalPartition {
  Vector<Scalar> edges;    // K+1, non-decreasing
  Vector<Scalar> lengths;  // K

  Index size() const { return lengths.size(); }
  Scalar lower(Index j) const { return edges(j); }
  Scalar upper(Index j) const { return edges(j + 1); }
  Scalar range() const { return edges(edges.size() - 1) - edges(0); }
};

/// Where a response falls relative to a partition.
struct IntervalLocation {
  std::optional<Index> index;  // empty when out of range under Infinite
  bool boundary_clamped = false;
  bool below = false;  // y <= q_0
  bool above = false;  // y > q_K

  bool in_range() const { return !below && !above; }
};

template <typename Scalar>
struct ConformityScore {
  Scalar value = 0;
  IntervalLocation location;
};

template <typename Derived>
IntervalPartition<typename Derived::Scalar> build_partition(
    const Eigen::MatrixBase<Derived>& grid) {
  using Scalar = typename Derived::Scalar;
  if (grid.size() < 2)
    throw InvalidArgument("build_partition: grid needs at least two quantiles");
  IntervalPartition<Scalar> p;
  p.edges = grid;
  const Index K = p.edges.size() - 1;
  p.lengths = p.edges.tail(K) - p.edges.head(K);
  return p;
}

template <typename Scalar>
IntervalLocation interval_index(const IntervalPartition<Scalar>& p, Scalar y,
                                BoundaryPolicy policy) {
  if (std::isnan(y)) throw DataError("interval_index: NaN response");
  const Index K = p.size();
  const Scalar* first = p.edges.data();
  const Scalar* last = first + K + 1;
  // First edge >= y; then edges[pos-1] < y <= edges[pos]. Zero-length
  // intervals (a, a] are skipped automatically.
  const Index pos = std::lower_bound(first, last, y) - first;

  IntervalLocation loc;
  if (pos == 0) {
    loc.below = true;
  } else if (pos == K + 1) {
    loc.above = true;
  } else {
    loc.index = pos - 1;
    return loc;
  }
  if (policy == BoundaryPolicy::Clamp) {
    loc.index = loc.below ? Index{0} : K - 1;
    loc.boundary_clamped = true;
  }
  return loc;
}

template <typename Scalar>
ConformityScore<Scalar> conformity_score(const IntervalPartition<Scalar>& p,
                                         Scalar y, BoundaryPolicy policy) {
  ConformityScore<Scalar> s;
  s.location = interval_index(p, y, policy);
  s.value = s.location.index ? p.lengths(*s.location.index)
                             : std::numeric_limits<Scalar>::infinity();
  return s;
}

}  // namespace cti
