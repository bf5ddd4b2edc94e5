#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "edgegfl/errors.hpp"
#include "edgegfl/metrics.hpp"
#include "support.hpp"

using namespace edgegfl;
using namespace edgegfl::metrics;
using Labels = std::vector<std::size_t>;

namespace {

Labels random_labels(std::mt19937_64& rng, std::size_t n, std::size_t k) {
  std::uniform_int_distribution<std::size_t> u(0, k - 1);
  Labels out(n);
  for (auto& x : out) x = u(rng);
  return out;
}

Labels permute(const Labels& x, const std::vector<std::size_t>& perm) {
  Labels out;
  for (auto v : x) out.push_back(perm[v]);
  return out;
}

}  // namespace

TEST_SUITE("metrics") {
  TEST_CASE("micro_f1 examples") {
    CHECK(micro_f1(Labels{0, 1, 2}, Labels{0, 1, 2}) == 1.0);
    CHECK(micro_f1(Labels{0, 1, 2, 1}, Labels{0, 1, 1, 1}) == doctest::Approx(0.75));
    CHECK(micro_f1(Labels{0, 1}, Labels{1, 0}) == 0.0);
  }

  TEST_CASE("macro_f1 examples") {
    CHECK(macro_f1(Labels{0, 1, 2}, Labels{0, 1, 2}) == 1.0);
    CHECK(macro_f1(Labels{0, 0, 1}, Labels{0, 0, 0}) == doctest::Approx(0.4));
    const Labels t{0, 1, 2, 2, 1}, p{0, 2, 2, 1, 1};
    const std::vector<std::size_t> perm{2, 0, 1};
    CHECK(macro_f1(permute(t, perm), permute(p, perm)) == doctest::Approx(macro_f1(t, p)).epsilon(1e-15));
  }

  TEST_CASE("multi-label tally pools per-class binary counts") {
    const std::vector<std::vector<bool>> t{{true, false}, {true, true}}, p{{true, true}, {false, true}};
    const auto tally = tally_multilabel(t, p);
    CHECK(tally.tp == std::vector<std::size_t>{1, 1});
    CHECK(tally.fp == std::vector<std::size_t>{0, 1});
    CHECK(tally.fn == std::vector<std::size_t>{1, 0});
    CHECK(micro_f1(tally) == doctest::Approx(2.0 / 3.0));
  }

  TEST_CASE("literal formulas are distinct from F1") {
    const auto t = tally(Labels{0, 1, 2, 1}, Labels{0, 1, 1, 1});
    CHECK(literal_micro_f1(t) != doctest::Approx(micro_f1(t)));
    CHECK(literal_micro_f1(t) >= 0.0);
  }

  TEST_CASE("rand_index examples") {
    CHECK(rand_index(Labels{0, 0, 1}, Labels{3, 3, 4}) == 1.0);
    CHECK(rand_index(Labels{0, 0, 1, 1}, Labels{0, 1, 0, 1}) == doctest::Approx(1.0 / 3.0));
    CHECK(rand_index(Labels{0, 0}, Labels{0, 1}) == 0.0);
  }

  TEST_CASE("adjusted_rand_index examples and degenerate cases") {
    CHECK(adjusted_rand_index(Labels{0, 0, 1, 2}, Labels{5, 5, 1, 0}) == doctest::Approx(1.0));
    CHECK(adjusted_rand_index(Labels{0, 0, 0}, Labels{1, 1, 1}) == 1.0);
    CHECK(adjusted_rand_index(Labels{0, 0, 0}, Labels{0, 1, 2}) == 0.0);
    CHECK(adjusted_rand_index(Labels{0, 1, 2}, Labels{2, 0, 1}) == 1.0);
    CHECK_THROWS_AS(adjusted_rand_index(Labels{0}, Labels{0}), ContractError);
  }

  TEST_CASE("nmi examples") {
    CHECK(nmi(Labels{0, 0, 1, 1}, Labels{1, 1, 0, 0}) == doctest::Approx(1.0));
    CHECK(nmi(Labels{0, 1, 2, 0}, Labels{0, 1, 2, 0}) == doctest::Approx(1.0));
    CHECK(nmi(Labels{2, 2, 2}, Labels{7, 7, 7}) == 1.0);
    CHECK(nmi(Labels{0, 0, 1, 1}, Labels{0, 1, 0, 1}) == doctest::Approx(0.0));
  }

  TEST_CASE("property: agreement with brute-force oracles") {
    std::mt19937_64 rng(2024);
    std::size_t checked = 0;
    for (int trial = 0; trial < 200; ++trial) {
      const std::size_t n = std::uniform_int_distribution<std::size_t>(2, 50)(rng);
      const std::size_t k = std::uniform_int_distribution<std::size_t>(1, 6)(rng);
      const auto t = random_labels(rng, n, k), p = random_labels(rng, n, k);
      const auto tl = tally(t, p, k);
      CHECK(std::abs(micro_f1(tl) - testsupport::oracle_micro_f1(t, p, k)) <= 1e-9);
      CHECK(std::abs(macro_f1(tl) - testsupport::oracle_macro_f1(t, p, k)) <= 1e-9);
      CHECK(std::abs(rand_index(t, p) - testsupport::oracle_rand_index(t, p)) <= 1e-9);
      CHECK(std::abs(nmi(t, p) - testsupport::oracle_nmi(t, p)) <= 1e-9);
      const double ref = testsupport::oracle_ari(t, p);
      if (std::isfinite(ref)) {
        CHECK(std::abs(adjusted_rand_index(t, p) - ref) <= 1e-9);
        ++checked;
      }
    }
    CHECK(checked > 150);
  }

  TEST_CASE("property: relabel invariance and identity") {
    std::mt19937_64 rng(99);
    for (int trial = 0; trial < 50; ++trial) {
      const auto t = random_labels(rng, 40, 5), p = random_labels(rng, 40, 5);
      std::vector<std::size_t> perm(5);
      std::iota(perm.begin(), perm.end(), 0);
      std::shuffle(perm.begin(), perm.end(), rng);
      const auto q = permute(p, perm);
      CHECK(adjusted_rand_index(t, q) == doctest::Approx(adjusted_rand_index(t, p)).epsilon(1e-12));
      CHECK(nmi(t, q) == doctest::Approx(nmi(t, p)).epsilon(1e-12));
      CHECK(rand_index(t, q) == doctest::Approx(rand_index(t, p)).epsilon(1e-12));
      CHECK(adjusted_rand_index(t, t) == doctest::Approx(1.0));
      CHECK(nmi(t, permute(t, perm)) == doctest::Approx(1.0));
    }
  }

  TEST_CASE("property: independent partitions score near zero") {
    std::mt19937_64 rng(7);
    double total = 0;
    for (int trial = 0; trial < 100; ++trial) {
      total += adjusted_rand_index(random_labels(rng, 200, 4), random_labels(rng, 200, 4));
    }
    CHECK(std::abs(total / 100) < 0.05);
    CHECK(nmi(random_labels(rng, 1000, 3), random_labels(rng, 1000, 3)) <= 0.05);
  }

  TEST_CASE("report serializes NaN as null") {
    MetricsReport r{0.5, 0.4, std::nan(""), 0.2, 10};
    const auto j = r.to_json();
    CHECK(j.at("ari").is_null());
    CHECK(j.at("n_samples") == 10);
  }
}
