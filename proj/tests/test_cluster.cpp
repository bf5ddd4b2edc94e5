#include <doctest.h>

#include <cmath>
#include <random>

#include "edgegfl/cluster.hpp"
#include "edgegfl/errors.hpp"
#include "edgegfl/metrics.hpp"

using namespace edgegfl;

TEST_SUITE("cluster") {
  TEST_CASE("k = 1 gives the column mean and total scatter") {
    const std::vector<double> x{1, 2, 3, 4, 5, 9, -1, 0};
    const auto r = kmeans(x, 4, 2, KMeansOptions{1, 0});
    CHECK(r.centroids[0] == doctest::Approx(2.0));
    CHECK(r.centroids[1] == doctest::Approx(3.75));
    double scatter = 0;
    for (std::size_t i = 0; i < 4; ++i) scatter += std::pow(x[2 * i] - 2.0, 2) + std::pow(x[2 * i + 1] - 3.75, 2);
    CHECK(r.inertia == doctest::Approx(scatter));
  }

  TEST_CASE("n = k puts every point in its own cluster") {
    const std::vector<double> x{0, 0, 1, 1, 5, 5};
    const auto r = kmeans(x, 3, 2, KMeansOptions{3, 4});
    CHECK(r.inertia == 0.0);
    CHECK(metrics::same_partition(r.assignments, std::vector<std::size_t>{0, 1, 2}));
  }

  TEST_CASE("well separated blobs are recovered exactly") {
    std::mt19937_64 rng(12);
    std::normal_distribution<double> noise(0.0, 0.1);
    std::vector<double> x;
    std::vector<std::size_t> truth;
    for (std::size_t i = 0; i < 100; ++i) {
      const double c = i % 2 == 0 ? 0.0 : 10.0;
      x.push_back(c + noise(rng));
      x.push_back(c + noise(rng));
      truth.push_back(i % 2);
    }
    const auto r = kmeans(x, 100, 2, KMeansOptions{2, 1});
    CHECK(metrics::adjusted_rand_index(truth, r.assignments) == doctest::Approx(1.0));
  }

  TEST_CASE("property: inertia never increases across iterations") {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(-5, 5);
    for (int trial = 0; trial < 20; ++trial) {
      std::vector<double> x(60 * 3);
      for (auto& v : x) v = u(rng);
      const auto r = kmeans(x, 60, 3, KMeansOptions{4, static_cast<std::uint64_t>(trial)});
      for (std::size_t i = 1; i < r.inertia_history.size(); ++i)
        CHECK(r.inertia_history[i] <= r.inertia_history[i - 1] + 1e-9);
      std::vector<std::size_t> sizes(4, 0);
      for (auto a : r.assignments) ++sizes[a];
      for (auto s : sizes) CHECK(s > 0);
    }
  }

  TEST_CASE("same seed, same result") {
    std::vector<double> x;
    for (int i = 0; i < 40; ++i) x.push_back(std::sin(i * 1.3) * 4);
    const auto a = kmeans(x, 20, 2, KMeansOptions{3, 8});
    const auto b = kmeans(x, 20, 2, KMeansOptions{3, 8});
    CHECK(a.assignments == b.assignments);
    CHECK(a.inertia == b.inertia);
  }

  TEST_CASE("invalid requests") {
    const std::vector<double> x{0, 1, 2};
    CHECK_THROWS_AS(kmeans(x, 3, 1, KMeansOptions{4, 0}), ContractError);
    CHECK_THROWS_AS(kmeans(x, 3, 1, KMeansOptions{0, 0}), ContractError);
  }
}
