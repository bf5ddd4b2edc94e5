#include "edgegfl/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <utility>

#include <fmt/format.h>

#include "edgegfl/errors.hpp"

namespace edgegfl::metrics {
namespace {

void require_pair(std::span<const std::size_t> a, std::span<const std::size_t> b, std::size_t min_n, const char* op) {
  if (a.size() != b.size()) throw ContractError(fmt::format("{}: {} vs {} samples", op, a.size(), b.size()));
  if (a.size() < min_n) throw ContractError(fmt::format("{}: need at least {} samples, got {}", op, min_n, a.size()));
}

double f1_from_counts(double tp, double fp, double fn) {
  const double denom = 2.0 * tp + fp + fn;
  return denom == 0.0 ? 0.0 : 2.0 * tp / denom;
}

double ratio(double num, double den) { return den == 0.0 ? 0.0 : num / den; }

double choose2(double x) { return x * (x - 1.0) / 2.0; }

/// Sparse contingency table between two labelings.
struct Contingency {
  std::map<std::pair<std::size_t, std::size_t>, double> cells;
  std::map<std::size_t, double> rows, cols;
  double n = 0.0;
};

Contingency contingency(std::span<const std::size_t> a, std::span<const std::size_t> b) {
  Contingency c;
  for (std::size_t i = 0; i < a.size(); ++i) {
    c.cells[{a[i], b[i]}] += 1.0;
    c.rows[a[i]] += 1.0;
    c.cols[b[i]] += 1.0;
  }
  c.n = static_cast<double>(a.size());
  return c;
}

struct PrecisionRecall {
  double precision_sum = 0.0, recall_sum = 0.0;
};

PrecisionRecall per_class_sums(const ConfusionTally& t) {
  PrecisionRecall pr;
  for (std::size_t c = 0; c < t.k(); ++c) {
    pr.precision_sum += ratio(static_cast<double>(t.tp[c]), static_cast<double>(t.tp[c] + t.fp[c]));
    pr.recall_sum += ratio(static_cast<double>(t.tp[c]), static_cast<double>(t.tp[c] + t.fn[c]));
  }
  return pr;
}

double literal_formula(double k, double p, double r) { return ratio(k * p * r, k * k * p + r); }

}  // namespace

ConfusionTally tally(std::span<const std::size_t> truth, std::span<const std::size_t> pred, std::size_t k) {
  require_pair(truth, pred, 1, "tally");
  if (k == 0) {
    k = 1 + std::max(*std::max_element(truth.begin(), truth.end()), *std::max_element(pred.begin(), pred.end()));
  }
  ConfusionTally t{std::vector<std::size_t>(k), std::vector<std::size_t>(k), std::vector<std::size_t>(k), truth.size()};
  for (std::size_t i = 0; i < truth.size(); ++i) {
    if (truth[i] >= k || pred[i] >= k) throw ContractError(fmt::format("tally: label beyond {} classes", k));
    if (truth[i] == pred[i]) {
      ++t.tp[truth[i]];
    } else {
      ++t.fp[pred[i]];
      ++t.fn[truth[i]];
    }
  }
  return t;
}

ConfusionTally tally_multilabel(const std::vector<std::vector<bool>>& truth, const std::vector<std::vector<bool>>& pred) {
  if (truth.empty() || truth.size() != pred.size()) {
    throw ContractError(fmt::format("tally_multilabel: {} vs {} samples", truth.size(), pred.size()));
  }
  const std::size_t k = truth.front().size();
  ConfusionTally t{std::vector<std::size_t>(k), std::vector<std::size_t>(k), std::vector<std::size_t>(k), truth.size()};
  for (std::size_t i = 0; i < truth.size(); ++i) {
    if (truth[i].size() != k || pred[i].size() != k) throw ContractError("tally_multilabel: ragged label matrix");
    for (std::size_t c = 0; c < k; ++c) {
      if (truth[i][c] && pred[i][c]) ++t.tp[c];
      else if (pred[i][c]) ++t.fp[c];
      else if (truth[i][c]) ++t.fn[c];
    }
  }
  return t;
}

double micro_f1(const ConfusionTally& t) {
  double tp = 0, fp = 0, fn = 0;
  for (std::size_t c = 0; c < t.k(); ++c) {
    tp += static_cast<double>(t.tp[c]);
    fp += static_cast<double>(t.fp[c]);
    fn += static_cast<double>(t.fn[c]);
  }
  return f1_from_counts(tp, fp, fn);
}

double macro_f1(const ConfusionTally& t) {
  if (t.k() == 0) return 0.0;
  double total = 0.0;
  for (std::size_t c = 0; c < t.k(); ++c) {
    total += f1_from_counts(static_cast<double>(t.tp[c]), static_cast<double>(t.fp[c]), static_cast<double>(t.fn[c]));
  }
  return total / static_cast<double>(t.k());
}

double micro_f1(std::span<const std::size_t> truth, std::span<const std::size_t> pred) {
  return micro_f1(tally(truth, pred));
}

double macro_f1(std::span<const std::size_t> truth, std::span<const std::size_t> pred) {
  return macro_f1(tally(truth, pred));
}

double literal_micro_f1(const ConfusionTally& t) {
  const auto pr = per_class_sums(t);
  return literal_formula(static_cast<double>(t.k()), pr.precision_sum, pr.recall_sum);
}

double literal_macro_f1(const ConfusionTally& t) {
  const auto pr = per_class_sums(t);
  const double k = static_cast<double>(t.k());
  return literal_formula(k, ratio(pr.precision_sum, k), ratio(pr.recall_sum, k));
}

double rand_index(std::span<const std::size_t> truth, std::span<const std::size_t> pred) {
  require_pair(truth, pred, 2, "rand_index");
  const auto c = contingency(truth, pred);
  double same_both = 0.0, same_truth = 0.0, same_pred = 0.0;
  for (const auto& [_, v] : c.cells) same_both += choose2(v);
  for (const auto& [_, v] : c.rows) same_truth += choose2(v);
  for (const auto& [_, v] : c.cols) same_pred += choose2(v);
  const double pairs = choose2(c.n);
  // agreements = together in both + apart in both
  const double apart_both = pairs - same_truth - same_pred + same_both;
  return (same_both + apart_both) / pairs;
}

double adjusted_rand_index(std::span<const std::size_t> truth, std::span<const std::size_t> pred) {
  require_pair(truth, pred, 2, "adjusted_rand_index");
  const auto c = contingency(truth, pred);
  double index = 0.0, a = 0.0, b = 0.0;
  for (const auto& [_, v] : c.cells) index += choose2(v);
  for (const auto& [_, v] : c.rows) a += choose2(v);
  for (const auto& [_, v] : c.cols) b += choose2(v);
  const double expected = a * b / choose2(c.n);
  const double maximum = 0.5 * (a + b);
  if (maximum == expected) {
    if (same_partition(truth, pred)) return 1.0;
    throw EvaluationError("adjusted_rand_index: undefined (expected index equals its maximum)");
  }
  return (index - expected) / (maximum - expected);
}

double entropy(std::span<const std::size_t> labels) {
  if (labels.empty()) throw ContractError("entropy: empty labeling");
  std::map<std::size_t, double> counts;
  for (std::size_t l : labels) counts[l] += 1.0;
  const double n = static_cast<double>(labels.size());
  double h = 0.0;
  for (const auto& [_, v] : counts) h -= (v / n) * std::log(v / n);
  return h;
}

double mutual_information(std::span<const std::size_t> truth, std::span<const std::size_t> pred) {
  require_pair(truth, pred, 1, "mutual_information");
  const auto c = contingency(truth, pred);
  double mi = 0.0;
  for (const auto& [key, v] : c.cells) {
    mi += (v / c.n) * std::log(c.n * v / (c.rows.at(key.first) * c.cols.at(key.second)));
  }
  return std::max(mi, 0.0);
}

double nmi(std::span<const std::size_t> truth, std::span<const std::size_t> pred) {
  require_pair(truth, pred, 1, "nmi");
  const double ht = entropy(truth), hp = entropy(pred);
  if (ht + hp == 0.0) return 1.0;
  return std::min(1.0, mutual_information(truth, pred) / (0.5 * (ht + hp)));
}

bool same_partition(std::span<const std::size_t> a, std::span<const std::size_t> b) {
  if (a.size() != b.size()) return false;
  std::map<std::size_t, std::size_t> forward, backward;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const auto f = forward.emplace(a[i], b[i]).first;
    const auto r = backward.emplace(b[i], a[i]).first;
    if (f->second != b[i] || r->second != a[i]) return false;
  }
  return true;
}

nlohmann::json MetricsReport::to_json() const {
  auto number = [](double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr); };
  return {{"micro_f1", number(micro_f1)},
          {"macro_f1", number(macro_f1)},
          {"ari", number(ari)},
          {"nmi", number(nmi)},
          {"n_samples", n_samples}};
}

}  // namespace edgegfl::metrics
