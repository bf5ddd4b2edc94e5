#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <vector>

#include "edgegfl/hetgraph.hpp"
#include "edgegfl/model.hpp"

namespace edgegfl {

struct TrainConfig {
  double lr = 5e-4;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  std::size_t max_epochs = 300;
  /// Epochs without a validation micro-F1 improvement before stopping.
  std::size_t patience = 30;
  /// One JSON record per epoch is appended here when set.
  std::optional<std::filesystem::path> history_log;

  void validate() const;
};

struct EpochRecord {
  std::size_t epoch = 0;  ///< 1-based
  double train_loss = 0.0;
  double val_loss = 0.0;
  double val_micro_f1 = 0.0;
  double val_macro_f1 = 0.0;
  double seconds = 0.0;
};

struct TrainHistory {
  std::vector<EpochRecord> epochs;
  std::size_t best_epoch = 0;  ///< index into epochs
};

/// First and second moment estimates, one buffer per trainable tensor.
struct AdamState {
  std::vector<std::vector<double>> m, v;
  std::size_t step = 0;
};

/// One bias-corrected Adam update of every tensor in `params` from its
/// accumulated gradient. Throws TrainingError naming the first tensor whose
/// gradient is not finite; nothing is updated in that case.
void adam_step(std::span<const NamedTensor> params, AdamState& state, const TrainConfig& config);

struct TrainResult {
  ModelParams params;  ///< snapshot from the best validation epoch
  TrainHistory history;
};

/// Full-batch training on `graph`'s train split with early stopping on the
/// validation micro-F1 (ties keep the earliest epoch).
TrainResult train(const HeteroGraph& graph, const ModelConfig& model_config, const TrainConfig& train_config);

/// Same, starting from given parameters (which are updated in place).
TrainResult train_from(const HeteroGraph& graph, ModelParams params, const ModelConfig& model_config,
                       const TrainConfig& train_config);

struct SplitScores {
  double micro_f1 = 0.0;
  double macro_f1 = 0.0;
  std::size_t n_samples = 0;
};

/// Micro/macro F1 of the predictions in `probs` over `nodes`.
SplitScores score_nodes(const HeteroGraph& graph, const ad::Tensor& probs, std::span<const std::size_t> nodes,
                        LossMode mode);

}  // namespace edgegfl
