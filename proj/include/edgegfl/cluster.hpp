#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace edgegfl {

struct KMeansResult {
  std::vector<std::size_t> assignments;
  std::vector<double> centroids;  ///< k × d, row-major
  double inertia = 0.0;
  std::size_t iterations = 0;
  /// Inertia after every assignment step.
  std::vector<double> inertia_history;
};

struct KMeansOptions {
  std::size_t k = 2;
  std::uint64_t seed = 0;
  std::size_t max_iter = 300;
  double tol = 1e-8;
};

/// Lloyd's algorithm with k-means++ seeding over the rows of the n × d matrix
/// `x`. Stops once no centroid moves more than `tol` (Euclidean) or after
/// max_iter iterations. A cluster that empties out claims the point farthest
/// from its current centroid.
KMeansResult kmeans(std::span<const double> x, std::size_t n, std::size_t d, const KMeansOptions& options);

}  // namespace edgegfl
