#include "edgegfl/cluster.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include <fmt/format.h>

#include "edgegfl/errors.hpp"

namespace edgegfl {
namespace {

double sq_dist(const double* a, const double* b, std::size_t d) {
  double s = 0.0;
  for (std::size_t j = 0; j < d; ++j) {
    const double diff = a[j] - b[j];
    s += diff * diff;
  }
  return s;
}

std::vector<double> plus_plus_seeds(std::span<const double> x, std::size_t n, std::size_t d, std::size_t k,
                                    std::mt19937_64& rng) {
  std::vector<double> centroids(k * d);
  std::uniform_int_distribution<std::size_t> first(0, n - 1);
  std::size_t pick = first(rng);
  std::copy_n(&x[pick * d], d, &centroids[0]);
  std::vector<double> nearest(n, std::numeric_limits<double>::infinity());
  for (std::size_t c = 1; c < k; ++c) {
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      nearest[i] = std::min(nearest[i], sq_dist(&x[i * d], &centroids[(c - 1) * d], d));
      total += nearest[i];
    }
    if (total == 0.0) {
      // fewer distinct points than clusters: fall back to uniform picks
      pick = first(rng);
    } else {
      std::uniform_real_distribution<double> u(0.0, total);
      double target = u(rng);
      pick = n - 1;
      for (std::size_t i = 0; i < n; ++i) {
        target -= nearest[i];
        if (target < 0.0) {
          pick = i;
          break;
        }
      }
    }
    std::copy_n(&x[pick * d], d, &centroids[c * d]);
  }
  return centroids;
}

}  // namespace

KMeansResult kmeans(std::span<const double> x, std::size_t n, std::size_t d, const KMeansOptions& options) {
  const std::size_t k = options.k;
  if (k == 0 || n < k) throw ContractError(fmt::format("kmeans: need n >= k >= 1, got n={} k={}", n, k));
  if (x.size() != n * d) throw DimensionError(fmt::format("kmeans: {} values for {}x{} input", x.size(), n, d));
  for (double v : x) {
    if (!std::isfinite(v)) throw EvaluationError("kmeans: input contains non-finite values");
  }

  std::mt19937_64 rng(options.seed);
  KMeansResult r;
  r.centroids = plus_plus_seeds(x, n, d, k, rng);
  r.assignments.assign(n, 0);
  std::vector<double> dist(n);

  auto assign = [&]() {
    double inertia = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      double best = std::numeric_limits<double>::infinity();
      for (std::size_t c = 0; c < k; ++c) {
        const double s = sq_dist(&x[i * d], &r.centroids[c * d], d);
        if (s < best) {
          best = s;
          r.assignments[i] = c;
        }
      }
      dist[i] = best;
      inertia += best;
    }
    return inertia;
  };

  r.inertia = assign();
  r.inertia_history.push_back(r.inertia);
  for (r.iterations = 1; r.iterations <= options.max_iter; ++r.iterations) {
    // repair empty clusters before the update step
    std::vector<std::size_t> counts(k, 0);
    for (std::size_t a : r.assignments) ++counts[a];
    for (std::size_t c = 0; c < k; ++c) {
      if (counts[c] != 0) continue;
      std::size_t far = n;
      for (std::size_t i = 0; i < n; ++i) {
        if (counts[r.assignments[i]] > 1 && (far == n || dist[i] > dist[far])) far = i;
      }
      --counts[r.assignments[far]];
      r.assignments[far] = c;
      counts[c] = 1;
      dist[far] = 0.0;
    }

    std::vector<double> next(k * d, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < d; ++j) next[r.assignments[i] * d + j] += x[i * d + j];
    }
    double shift = 0.0;
    for (std::size_t c = 0; c < k; ++c) {
      for (std::size_t j = 0; j < d; ++j) next[c * d + j] /= static_cast<double>(counts[c]);
      shift = std::max(shift, std::sqrt(sq_dist(&next[c * d], &r.centroids[c * d], d)));
    }
    r.centroids = std::move(next);
    r.inertia = assign();
    r.inertia_history.push_back(r.inertia);
    if (shift < options.tol) break;
  }
  r.iterations = std::min(r.iterations, options.max_iter);
  return r;
}

}  // namespace edgegfl
