#include "edgegfl/train.hpp"

#include <chrono>
#include <cmath>
#include <fstream>

#include <fmt/format.h>
#include <json.hpp>
#include <spdlog/spdlog.h>

#include "edgegfl/errors.hpp"
#include "edgegfl/metrics.hpp"

namespace edgegfl {

void TrainConfig::validate() const {
  if (!(lr >= 0.0)) throw ContractError(fmt::format("learning rate {} is negative", lr));
  if (!(adam_beta1 >= 0.0 && adam_beta1 < 1.0) || !(adam_beta2 >= 0.0 && adam_beta2 < 1.0)) {
    throw ContractError(fmt::format("Adam betas ({}, {}) outside [0, 1)", adam_beta1, adam_beta2));
  }
  if (!(adam_eps > 0.0)) throw ContractError("Adam epsilon must be positive");
  if (max_epochs == 0) throw ContractError("max_epochs must be at least 1");
  if (patience == 0) throw ContractError("patience must be at least 1");
}

void adam_step(std::span<const NamedTensor> params, AdamState& state, const TrainConfig& config) {
  for (const auto& p : params) {
    for (double g : p.tensor.grad()) {
      if (!std::isfinite(g)) throw TrainingError(fmt::format("non-finite gradient in parameter {}", p.name));
    }
  }
  if (state.m.empty()) {
    for (const auto& p : params) {
      state.m.emplace_back(p.tensor.size(), 0.0);
      state.v.emplace_back(p.tensor.size(), 0.0);
    }
  }
  if (state.m.size() != params.size()) throw ContractError("adam_step: optimizer state does not match parameters");
  ++state.step;
  const double b1 = config.adam_beta1, b2 = config.adam_beta2;
  const double correction1 = 1.0 - std::pow(b1, static_cast<double>(state.step));
  const double correction2 = 1.0 - std::pow(b2, static_cast<double>(state.step));
  for (std::size_t k = 0; k < params.size(); ++k) {
    ad::Tensor t = params[k].tensor;
    auto values = t.values();
    auto grad = t.grad();
    auto& m = state.m[k];
    auto& v = state.v[k];
    for (std::size_t i = 0; i < values.size(); ++i) {
      m[i] = b1 * m[i] + (1.0 - b1) * grad[i];
      v[i] = b2 * v[i] + (1.0 - b2) * grad[i] * grad[i];
      const double m_hat = m[i] / correction1;
      const double v_hat = v[i] / correction2;
      values[i] -= config.lr * m_hat / (std::sqrt(v_hat) + config.adam_eps);
    }
  }
}

SplitScores score_nodes(const HeteroGraph& graph, const ad::Tensor& probs, std::span<const std::size_t> nodes,
                        LossMode mode) {
  if (nodes.empty()) return {};
  metrics::ConfusionTally tally;
  if (mode == LossMode::SoftmaxCE) {
    const auto pred = predict_single(probs);
    std::vector<std::size_t> t, p;
    for (std::size_t i : nodes) {
      t.push_back(graph.labels(i).front());
      p.push_back(pred[i]);
    }
    tally = metrics::tally(t, p, graph.num_classes());
  } else {
    const auto pred = predict_multi(probs);
    std::vector<std::vector<bool>> t, p;
    for (std::size_t i : nodes) {
      std::vector<bool> row(graph.num_classes(), false);
      for (std::size_t c : graph.labels(i)) row[c] = true;
      t.push_back(std::move(row));
      p.push_back(pred[i]);
    }
    tally = metrics::tally_multilabel(t, p);
  }
  return {metrics::micro_f1(tally), metrics::macro_f1(tally), nodes.size()};
}

TrainResult train(const HeteroGraph& graph, const ModelConfig& model_config, const TrainConfig& train_config) {
  return train_from(graph, init_params(graph, model_config), model_config, train_config);
}

TrainResult train_from(const HeteroGraph& graph, ModelParams params, const ModelConfig& model_config,
                       const TrainConfig& train_config) {
  model_config.validate();
  train_config.validate();
  const auto train_nodes = graph.nodes_in(SplitRole::Train);
  const auto val_nodes = graph.nodes_in(SplitRole::Val);
  if (train_nodes.empty()) throw ContractError("train: the training split is empty");
  if (val_nodes.empty()) throw ContractError("train: the validation split is empty");

  std::ofstream log;
  if (train_config.history_log) {
    log.open(*train_config.history_log, std::ios::binary | std::ios::trunc);
    if (!log) throw DataError(fmt::format("cannot write history log {}", train_config.history_log->string()));
  }

  const auto labels = graph.label_matrix();
  auto trainable = params.trainable();
  AdamState adam;
  TrainResult result;
  double best_score = -1.0;
  std::size_t since_best = 0;

  for (std::size_t epoch = 1; epoch <= train_config.max_epochs; ++epoch) {
    const auto start = std::chrono::steady_clock::now();
    ad::Tape tape;
    auto fwd = forward(tape, graph, params, model_config);
    auto objective = loss(tape, fwd.probs, labels, graph.num_classes(), train_nodes, trainable, model_config);

    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_loss = objective.item();
    if (!std::isfinite(rec.train_loss)) {
      throw TrainingError(fmt::format("training diverged: loss is {} at epoch {}", rec.train_loss, epoch));
    }
    rec.val_loss = data_loss(fwd.probs, labels, val_nodes, model_config.loss);
    const auto val = score_nodes(graph, fwd.probs, val_nodes, model_config.loss);
    rec.val_micro_f1 = val.micro_f1;
    rec.val_macro_f1 = val.macro_f1;

    // the scores above belong to the parameters before this epoch's update
    if (rec.val_micro_f1 > best_score) {
      best_score = rec.val_micro_f1;
      result.params = params.clone();
      result.history.best_epoch = result.history.epochs.size();
      since_best = 0;
    } else {
      ++since_best;
    }

    for (auto& p : trainable) p.tensor.zero_grad();
    tape.backward(objective);
    adam_step(trainable, adam, train_config);

    rec.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    result.history.epochs.push_back(rec);
    spdlog::debug("epoch {:4d}  loss {:.6f}  val loss {:.6f}  val micro-F1 {:.4f}  macro-F1 {:.4f}", epoch,
                  rec.train_loss, rec.val_loss, rec.val_micro_f1, rec.val_macro_f1);
    if (log) {
      log << nlohmann::json{{"epoch", rec.epoch},
                            {"train_loss", rec.train_loss},
                            {"val_loss", rec.val_loss},
                            {"val_micro_f1", rec.val_micro_f1},
                            {"val_macro_f1", rec.val_macro_f1},
                            {"seconds", rec.seconds}}
                 .dump()
          << '\n';
    }
    if (since_best >= train_config.patience) break;
  }
  spdlog::info("training stopped after {} epochs; best epoch {} (val micro-F1 {:.4f})", result.history.epochs.size(),
               result.history.best_epoch + 1, best_score);
  return result;
}

}  // namespace edgegfl
