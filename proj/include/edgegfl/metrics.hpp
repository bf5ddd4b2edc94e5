#pragma once

// Classification (micro/macro F1) and partition-agreement (RI, ARI, NMI)
// metrics.

#include <cstddef>
#include <span>
#include <vector>

#include <json.hpp>

namespace edgegfl::metrics {

/// Per-class true-positive / false-positive / false-negative counts.
struct ConfusionTally {
  std::vector<std::size_t> tp, fp, fn;
  std::size_t n_samples = 0;
  std::size_t k() const { return tp.size(); }
};

/// Single-label tally. `k` = 0 infers the class count from the data.
ConfusionTally tally(std::span<const std::size_t> truth, std::span<const std::size_t> pred, std::size_t k = 0);
/// Multi-label tally: per-class binary counts over the full indicator matrix.
ConfusionTally tally_multilabel(const std::vector<std::vector<bool>>& truth, const std::vector<std::vector<bool>>& pred);

/// 2·P·R/(P+R) over globally pooled counts.
double micro_f1(const ConfusionTally& t);
/// Unweighted mean of per-class F1; a class with no support and no
/// predictions contributes 0.
double macro_f1(const ConfusionTally& t);

double micro_f1(std::span<const std::size_t> truth, std::span<const std::size_t> pred);
double macro_f1(std::span<const std::size_t> truth, std::span<const std::size_t> pred);

/// The formulas as printed in the source material, k·P·R/(k²·P + R) with
/// summed (micro) or averaged (macro) per-class precision and recall. They do
/// not reduce to the harmonic mean; kept for inspection only.
double literal_micro_f1(const ConfusionTally& t);
double literal_macro_f1(const ConfusionTally& t);

/// Fraction of sample pairs on which the two partitions agree.
double rand_index(std::span<const std::size_t> truth, std::span<const std::size_t> pred);
/// Chance-corrected Rand index (hypergeometric expectation). When the
/// expectation equals the maximum the result is 1 for identical partitions and
/// an EvaluationError otherwise.
double adjusted_rand_index(std::span<const std::size_t> truth, std::span<const std::size_t> pred);

double entropy(std::span<const std::size_t> labels);
double mutual_information(std::span<const std::size_t> truth, std::span<const std::size_t> pred);
/// I / ((H_t + H_p)/2), natural log. Two constant partitions score 1.
double nmi(std::span<const std::size_t> truth, std::span<const std::size_t> pred);

/// Whether the partitions are equal up to relabeling.
bool same_partition(std::span<const std::size_t> a, std::span<const std::size_t> b);

struct MetricsReport {
  double micro_f1 = 0.0;
  double macro_f1 = 0.0;
  double ari = 0.0;
  double nmi = 0.0;
  std::size_t n_samples = 0;

  nlohmann::json to_json() const;
};

}  // namespace edgegfl::metrics
