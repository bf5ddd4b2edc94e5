#pragma once

// One EdgeGFL layer, split into its stages: per-type feature projection,
// edge-type relation embedding, Hadamard-filtered propagation, attention and
// sum aggregation.

#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "edgegfl/autodiff.hpp"
#include "edgegfl/hetgraph.hpp"

namespace edgegfl {

using Rng = std::mt19937_64;

enum class AggMode { PlainSum, NodeResidual, EdgeResidual };
enum class Activation { Elu, LeakyRelu };

/// How arcs are keyed into the embedding table.
enum class EdgeEncoding {
  Typed,         ///< one trainable row per edge type
  RandomFrozen,  ///< one frozen random row per undirected edge, type ignored
};

/// Glorot-uniform rows × cols tensor.
ad::Tensor glorot_uniform(std::size_t rows, std::size_t cols, Rng& rng, bool requires_grad = true);

/// Dictionary from edge key to an embedding row.
struct EdgeTypeTable {
  ad::Tensor embeddings;  ///< keys × d_e
  EdgeEncoding encoding = EdgeEncoding::Typed;

  std::size_t num_rows() const { return embeddings.rows(); }
  std::size_t dim() const { return embeddings.cols(); }
  bool trainable() const { return encoding == EdgeEncoding::Typed; }
  /// Embedding row used by every arc of `graph`.
  std::vector<std::size_t> arc_rows(const HeteroGraph& graph) const;
};

/// `rows` is the edge-type count for Typed tables and the edge count for
/// RandomFrozen ones.
EdgeTypeTable edge_type_init(std::size_t rows, std::size_t d_e, Rng& rng, EdgeEncoding mode);

/// Per-node-type input projection (first layer only).
struct ProjectionParams {
  std::vector<ad::Tensor> weight;  ///< per node type: feature_dim × d0
  std::vector<ad::Tensor> bias;    ///< per node type: 1 × d0
};

struct LayerParams {
  ad::Tensor w_rel;   ///< d_e × d_in, shared by all edge types
  ad::Tensor weight;  ///< d_in × d_out
  ad::Tensor w_res;   ///< d_in × d_out; defined iff d_in != d_out
  ad::Tensor attn_dst, attn_src;  ///< d_out × 1
  ad::Tensor attn_edge;           ///< d_in × 1
  double beta = 0.0;

  std::size_t in_dim() const { return weight.rows(); }
  std::size_t out_dim() const { return weight.cols(); }
};

LayerParams init_layer(std::size_t d_e, std::size_t d_in, std::size_t d_out, double beta, Rng& rng);

struct LayerOptions {
  AggMode mode = AggMode::EdgeResidual;
  Activation activation = Activation::Elu;
  double slope = 0.01;
  /// false realizes the "without feature-preference filtering" ablation:
  /// every relation vector becomes all-ones.
  bool use_relations = true;
};

struct LayerOutput {
  ad::Tensor h;
  /// Per-arc attention (arcs × 1), normalized per target node. Undefined in
  /// PlainSum mode.
  ad::Tensor alpha;
};

/// H⁰ = LeakyReLU(W_t·F_t + b_t) per node type, rows in node order. With
/// `nonlinear` false the activation is dropped.
ad::Tensor feature_project(ad::Tape& tape, const HeteroGraph& graph, const ProjectionParams& params,
                           double slope, bool nonlinear = true);

/// r = LeakyReLU(r̂·w_rel) for every table row.
ad::Tensor edge_relation_map(ad::Tape& tape, const ad::Tensor& embeddings, const ad::Tensor& w_rel, double slope);

/// M_a = h_src(a) ⊙ r_a for every arc. `arc_relations` is arcs × d; an
/// undefined tensor stands for all-ones relations.
ad::Tensor propagate(ad::Tape& tape, const ad::Tensor& h, const ad::Tensor& arc_relations, const HeteroGraph& graph);

/// α̂ per arc: softmax over each target's in-arcs of
/// LeakyReLU(a_dstᵀWh_i + a_srcᵀWh_j + a_edgeᵀ(r̂·w_rel)).
ad::Tensor attention_scores(ad::Tape& tape, const ad::Tensor& h, const EdgeTypeTable& table,
                            std::span<const std::size_t> arc_rows, const LayerParams& params,
                            const HeteroGraph& graph, double slope);

/// (1-β)·α̂ + β·α_prev.
ad::Tensor blend_attention(ad::Tape& tape, const ad::Tensor& alpha_hat, const ad::Tensor& alpha_prev, double beta);

/// Sum aggregation of per-arc messages into target nodes.
///
///   PlainSum      h' = σ((Σ_j M_ij)·W)
///   NodeResidual  h' = σ((Σ_j α_ij·M_ij)·W + res(h_i)),  α = α̂
///   EdgeResidual  as NodeResidual with α = blend(α̂, α_prev, β); α = α̂ when
///                 α_prev is undefined (first layer)
///
/// res(h) is h·W_res when dimensions change and h otherwise. A node without
/// in-arcs receives the zero vector from the sum.
LayerOutput aggregate(ad::Tape& tape, const ad::Tensor& h, const ad::Tensor& messages, const LayerParams& params,
                      const HeteroGraph& graph, const LayerOptions& options, const ad::Tensor& alpha_hat,
                      const ad::Tensor& alpha_prev);

/// Full layer: relations, propagation, attention (if needed) and aggregation.
LayerOutput edgegfl_layer(ad::Tape& tape, const ad::Tensor& h, const HeteroGraph& graph, const EdgeTypeTable& table,
                          std::span<const std::size_t> arc_rows, const LayerParams& params,
                          const LayerOptions& options, const ad::Tensor& alpha_prev);

ad::Tensor activate(ad::Tape& tape, const ad::Tensor& x, Activation activation, double slope);

}  // namespace edgegfl
