#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "edgegfl/autodiff.hpp"
#include "edgegfl/hetgraph.hpp"
#include "edgegfl/layers.hpp"

namespace edgegfl {

enum class LossMode { SoftmaxCE, SigmoidBCE };

struct Ablations {
  bool no_fgl = false;  ///< relation vectors replaced by all-ones
  bool no_l2 = false;   ///< output rows left unnormalized
  bool no_nle = false;  ///< input projection stays linear
  bool no_ei = false;   ///< edges encoded by frozen random vectors instead of their type
  friend bool operator==(const Ablations&, const Ablations&) = default;
};

/// All randomness derives from one master seed.
namespace seeds {
inline std::uint64_t split(std::uint64_t master) { return master + 1; }
inline std::uint64_t init(std::uint64_t master) { return master + 2; }
inline std::uint64_t kmeans(std::uint64_t master) { return master + 3; }
}  // namespace seeds

struct ModelConfig {
  /// d⁰..d^L; the layer count is dims.size() - 1.
  std::vector<std::size_t> dims{64, 64, 64};
  std::size_t edge_dim = 64;
  AggMode agg = AggMode::EdgeResidual;
  double beta = 0.05;
  double leaky_slope = 0.01;
  Activation activation = Activation::Elu;
  LossMode loss = LossMode::SoftmaxCE;
  Ablations ablate;
  double weight_decay = 0.0;
  /// Regularize with the plain L2 norm of Θ instead of its squared sum.
  bool unsquared_decay = false;
  std::uint64_t seed = 0;

  static ModelConfig uniform(std::size_t layers, std::size_t dim);
  std::size_t num_layers() const { return dims.empty() ? 0 : dims.size() - 1; }
  void validate() const;
};

struct NamedTensor {
  std::string name;
  ad::Tensor tensor;
};

struct ModelParams {
  ProjectionParams projection;
  EdgeTypeTable edges;
  std::vector<LayerParams> layers;
  ad::Tensor classifier;  ///< d^L × c

  /// Θ: every tensor the optimizer updates, in a fixed order.
  std::vector<NamedTensor> trainable() const;
  /// Every tensor, including frozen ones.
  std::vector<NamedTensor> all() const;
  std::size_t parameter_count() const;
  ModelParams clone() const;
};

ModelParams init_params(const HeteroGraph& graph, const ModelConfig& config);

struct ForwardResult {
  ad::Tensor hidden;  ///< H^L
  ad::Tensor output;  ///< O: row-normalized H^L (or H^L under no_l2)
  ad::Tensor probs;   ///< Z: n × c
  std::vector<ad::Tensor> alphas;
};

ForwardResult forward(ad::Tape& tape, const HeteroGraph& graph, const ModelParams& params, const ModelConfig& config);

/// Training objective over `nodes`:
///   softmax-ce   −Σ_i Σ_c Y_ic·log z_ic
///   sigmoid-bce  −Σ_i Σ_c [Y_ic·log z_ic + (1−Y_ic)·log(1−z_ic)]
/// plus λ·Σ_θ θ² over `regularized` (λ·‖Θ‖ with unsquared_decay). Logs are
/// clamped at 1e-12.
ad::Tensor loss(ad::Tape& tape, const ad::Tensor& probs, std::span<const double> labels, std::size_t n_classes,
                std::span<const std::size_t> nodes, std::span<const NamedTensor> regularized,
                const ModelConfig& config);

/// Data term of `loss` evaluated without a tape (no regularizer).
double data_loss(const ad::Tensor& probs, std::span<const double> labels, std::span<const std::size_t> nodes,
                 LossMode mode);

/// argmax per row.
std::vector<std::size_t> predict_single(const ad::Tensor& probs);
/// Per-class indicator, positive iff probability >= threshold.
std::vector<std::vector<bool>> predict_multi(const ad::Tensor& probs, double threshold = 0.5);

const char* to_string(AggMode mode);
const char* to_string(LossMode mode);
const char* to_string(Activation activation);
AggMode parse_agg_mode(const std::string& text);
LossMode parse_loss_mode(const std::string& text);
Activation parse_activation(const std::string& text);

}  // namespace edgegfl
