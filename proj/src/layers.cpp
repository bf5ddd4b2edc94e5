#include "edgegfl/layers.hpp"

#include <cmath>

#include <fmt/format.h>

#include "edgegfl/errors.hpp"

namespace edgegfl {

ad::Tensor glorot_uniform(std::size_t rows, std::size_t cols, Rng& rng, bool requires_grad) {
  const double bound = std::sqrt(6.0 / static_cast<double>(rows + cols));
  std::uniform_real_distribution<double> dist(-bound, bound);
  std::vector<double> values(rows * cols);
  for (auto& v : values) v = dist(rng);
  return ad::Tensor::from(rows, cols, std::move(values), requires_grad);
}

std::vector<std::size_t> EdgeTypeTable::arc_rows(const HeteroGraph& graph) const {
  auto keys = encoding == EdgeEncoding::Typed ? graph.arc_type() : graph.arc_edge();
  for (std::size_t k : keys) {
    if (k >= num_rows()) {
      throw ContractError(fmt::format("edge key {} has no row in a table of {} rows", k, num_rows()));
    }
  }
  return {keys.begin(), keys.end()};
}

EdgeTypeTable edge_type_init(std::size_t rows, std::size_t d_e, Rng& rng, EdgeEncoding mode) {
  if (d_e == 0) throw ContractError("edge_type_init: embedding dimension must be positive");
  return EdgeTypeTable{glorot_uniform(rows, d_e, rng, mode == EdgeEncoding::Typed), mode};
}

LayerParams init_layer(std::size_t d_e, std::size_t d_in, std::size_t d_out, double beta, Rng& rng) {
  if (beta < 0.0 || beta > 1.0) throw ContractError(fmt::format("beta {} outside [0, 1]", beta));
  LayerParams p;
  p.w_rel = glorot_uniform(d_e, d_in, rng);
  p.weight = glorot_uniform(d_in, d_out, rng);
  if (d_in != d_out) p.w_res = glorot_uniform(d_in, d_out, rng);
  p.attn_dst = glorot_uniform(d_out, 1, rng);
  p.attn_src = glorot_uniform(d_out, 1, rng);
  p.attn_edge = glorot_uniform(d_in, 1, rng);
  p.beta = beta;
  return p;
}

ad::Tensor activate(ad::Tape& tape, const ad::Tensor& x, Activation activation, double slope) {
  return activation == Activation::Elu ? ad::elu(tape, x) : ad::leaky_relu(tape, x, slope);
}

ad::Tensor feature_project(ad::Tape& tape, const HeteroGraph& graph, const ProjectionParams& params, double slope,
                           bool nonlinear) {
  const std::size_t n_types = graph.num_node_types();
  if (params.weight.size() != n_types || params.bias.size() != n_types) {
    throw DimensionError(fmt::format("feature_project: {} projections for {} node types", params.weight.size(), n_types));
  }
  const std::size_t d0 = n_types == 0 ? 0 : params.weight.front().cols();
  ad::Tensor h;
  for (std::size_t t = 0; t < n_types; ++t) {
    const auto& w = params.weight[t];
    if (w.rows() != graph.feature_dim(t) || w.cols() != d0 || params.bias[t].cols() != d0 || params.bias[t].rows() != 1) {
      throw DimensionError(fmt::format("feature_project: node type {} has input dim {} but projection {} and bias {}", t,
                                       graph.feature_dim(t), w.shape_str(), params.bias[t].shape_str()));
    }
    const auto nodes = graph.nodes_of_type(t);
    if (nodes.empty()) continue;
    auto f = graph.feature_matrix(t);
    auto features = ad::Tensor::from(nodes.size(), graph.feature_dim(t), {f.begin(), f.end()});
    auto projected = ad::add(tape, ad::matmul(tape, features, w), params.bias[t]);
    auto placed = ad::scatter_add_rows(tape, projected, nodes, graph.num_nodes());
    h = h.defined() ? ad::add(tape, h, placed) : placed;
  }
  if (!h.defined()) h = ad::Tensor::zeros(graph.num_nodes(), d0);
  return nonlinear ? ad::leaky_relu(tape, h, slope) : h;
}

ad::Tensor edge_relation_map(ad::Tape& tape, const ad::Tensor& embeddings, const ad::Tensor& w_rel, double slope) {
  if (embeddings.cols() != w_rel.rows()) {
    throw DimensionError(fmt::format("edge_relation_map: embeddings {} do not fit relation map {}",
                                     embeddings.shape_str(), w_rel.shape_str()));
  }
  return ad::leaky_relu(tape, ad::matmul(tape, embeddings, w_rel), slope);
}

ad::Tensor propagate(ad::Tape& tape, const ad::Tensor& h, const ad::Tensor& arc_relations, const HeteroGraph& graph) {
  auto sent = ad::gather_rows(tape, h, graph.arc_src());
  if (!arc_relations.defined()) return sent;
  if (arc_relations.rows() != graph.num_arcs() || arc_relations.cols() != h.cols()) {
    throw DimensionError(fmt::format("propagate: relations {} for {} arcs of width {}", arc_relations.shape_str(),
                                     graph.num_arcs(), h.cols()));
  }
  return ad::hadamard(tape, sent, arc_relations);
}

ad::Tensor attention_scores(ad::Tape& tape, const ad::Tensor& h, const EdgeTypeTable& table,
                            std::span<const std::size_t> arc_rows, const LayerParams& params,
                            const HeteroGraph& graph, double slope) {
  auto hw = ad::matmul(tape, h, params.weight);
  auto dst_score = ad::matmul(tape, hw, params.attn_dst);
  auto src_score = ad::matmul(tape, hw, params.attn_src);
  auto edge_score = ad::matmul(tape, ad::matmul(tape, table.embeddings, params.w_rel), params.attn_edge);
  auto logits = ad::add(tape,
                        ad::add(tape, ad::gather_rows(tape, dst_score, graph.arc_dst()),
                                ad::gather_rows(tape, src_score, graph.arc_src())),
                        ad::gather_rows(tape, edge_score, arc_rows));
  return ad::segment_softmax(tape, ad::leaky_relu(tape, logits, slope), graph.arc_dst(), graph.num_nodes());
}

ad::Tensor blend_attention(ad::Tape& tape, const ad::Tensor& alpha_hat, const ad::Tensor& alpha_prev, double beta) {
  if (alpha_prev.rows() != alpha_hat.rows() || alpha_prev.cols() != alpha_hat.cols()) {
    throw ContractError(fmt::format("blend_attention: previous attention {} does not cover the arc set {}",
                                    alpha_prev.shape_str(), alpha_hat.shape_str()));
  }
  return ad::add(tape, ad::scale(tape, alpha_hat, 1.0 - beta), ad::scale(tape, alpha_prev, beta));
}

LayerOutput aggregate(ad::Tape& tape, const ad::Tensor& h, const ad::Tensor& messages, const LayerParams& params,
                      const HeteroGraph& graph, const LayerOptions& options, const ad::Tensor& alpha_hat,
                      const ad::Tensor& alpha_prev) {
  const std::size_t n = graph.num_nodes();
  if (options.mode == AggMode::PlainSum) {
    auto summed = ad::scatter_add_rows(tape, messages, graph.arc_dst(), n);
    return {activate(tape, ad::matmul(tape, summed, params.weight), options.activation, options.slope), {}};
  }

  if (!alpha_hat.defined()) throw ContractError("aggregate: residual modes need attention scores");
  ad::Tensor alpha = alpha_hat;
  if (options.mode == AggMode::EdgeResidual && alpha_prev.defined()) {
    alpha = blend_attention(tape, alpha_hat, alpha_prev, params.beta);
  }
  auto summed = ad::scatter_add_rows(tape, ad::scale_rows(tape, messages, alpha), graph.arc_dst(), n);
  ad::Tensor residual = h;
  if (params.in_dim() != params.out_dim()) {
    if (!params.w_res.defined()) {
      throw ContractError(fmt::format("aggregate: dimension changes {} -> {} without a residual projection",
                                      params.in_dim(), params.out_dim()));
    }
    residual = ad::matmul(tape, h, params.w_res);
  }
  auto pre = ad::add(tape, ad::matmul(tape, summed, params.weight), residual);
  return {activate(tape, pre, options.activation, options.slope), alpha};
}

LayerOutput edgegfl_layer(ad::Tape& tape, const ad::Tensor& h, const HeteroGraph& graph, const EdgeTypeTable& table,
                          std::span<const std::size_t> arc_rows, const LayerParams& params,
                          const LayerOptions& options, const ad::Tensor& alpha_prev) {
  if (h.cols() != params.in_dim()) {
    throw DimensionError(fmt::format("edgegfl_layer: input {} does not fit weight {}", h.shape_str(),
                                     params.weight.shape_str()));
  }
  ad::Tensor arc_relations;
  if (options.use_relations) {
    auto relations = edge_relation_map(tape, table.embeddings, params.w_rel, options.slope);
    arc_relations = ad::gather_rows(tape, relations, arc_rows);
  }
  auto messages = propagate(tape, h, arc_relations, graph);
  ad::Tensor alpha_hat;
  if (options.mode != AggMode::PlainSum) {
    alpha_hat = attention_scores(tape, h, table, arc_rows, params, graph, options.slope);
  }
  return aggregate(tape, h, messages, params, graph, options, alpha_hat, alpha_prev);
}

}  // namespace edgegfl
