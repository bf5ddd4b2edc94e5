#include "edgegfl/model.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

#include "edgegfl/errors.hpp"

namespace edgegfl {
namespace {

constexpr double kLogFloor = 1e-12;

}  // namespace

ModelConfig ModelConfig::uniform(std::size_t layers, std::size_t dim) {
  ModelConfig c;
  c.dims.assign(layers + 1, dim);
  return c;
}

void ModelConfig::validate() const {
  if (num_layers() < 1) throw ContractError("model needs at least one layer");
  for (std::size_t d : dims) {
    if (d == 0) throw ContractError("layer dimensions must be positive");
  }
  if (edge_dim == 0) throw ContractError("edge embedding dimension must be positive");
  if (beta < 0.0 || beta > 1.0) throw ContractError(fmt::format("beta {} outside [0, 1]", beta));
  if (!(leaky_slope > 0.0 && leaky_slope < 1.0)) throw ContractError(fmt::format("leaky slope {} outside (0, 1)", leaky_slope));
  if (!(weight_decay >= 0.0)) throw ContractError(fmt::format("weight decay {} is negative", weight_decay));
}

std::vector<NamedTensor> ModelParams::trainable() const {
  std::vector<NamedTensor> out;
  for (auto& t : all()) {
    if (t.tensor.requires_grad()) out.push_back(t);
  }
  return out;
}

std::vector<NamedTensor> ModelParams::all() const {
  std::vector<NamedTensor> out;
  for (std::size_t t = 0; t < projection.weight.size(); ++t) {
    out.push_back({fmt::format("projection.{}.weight", t), projection.weight[t]});
    out.push_back({fmt::format("projection.{}.bias", t), projection.bias[t]});
  }
  out.push_back({"edges.embeddings", edges.embeddings});
  for (std::size_t l = 0; l < layers.size(); ++l) {
    const auto& p = layers[l];
    out.push_back({fmt::format("layer.{}.w_rel", l), p.w_rel});
    out.push_back({fmt::format("layer.{}.weight", l), p.weight});
    if (p.w_res.defined()) out.push_back({fmt::format("layer.{}.w_res", l), p.w_res});
    out.push_back({fmt::format("layer.{}.attn_dst", l), p.attn_dst});
    out.push_back({fmt::format("layer.{}.attn_src", l), p.attn_src});
    out.push_back({fmt::format("layer.{}.attn_edge", l), p.attn_edge});
  }
  out.push_back({"classifier", classifier});
  return out;
}

std::size_t ModelParams::parameter_count() const {
  std::size_t total = 0;
  for (const auto& t : trainable()) total += t.tensor.size();
  return total;
}

ModelParams ModelParams::clone() const {
  ModelParams copy;
  for (const auto& w : projection.weight) copy.projection.weight.push_back(w.clone());
  for (const auto& b : projection.bias) copy.projection.bias.push_back(b.clone());
  copy.edges = EdgeTypeTable{edges.embeddings.clone(), edges.encoding};
  for (const auto& p : layers) {
    LayerParams q = p;
    q.w_rel = p.w_rel.clone();
    q.weight = p.weight.clone();
    q.w_res = p.w_res.clone();
    q.attn_dst = p.attn_dst.clone();
    q.attn_src = p.attn_src.clone();
    q.attn_edge = p.attn_edge.clone();
    copy.layers.push_back(std::move(q));
  }
  copy.classifier = classifier.clone();
  return copy;
}

ModelParams init_params(const HeteroGraph& graph, const ModelConfig& config) {
  config.validate();
  Rng rng(seeds::init(config.seed));
  ModelParams p;
  const std::size_t d0 = config.dims.front();
  for (std::size_t t = 0; t < graph.num_node_types(); ++t) {
    p.projection.weight.push_back(glorot_uniform(graph.feature_dim(t), d0, rng));
    p.projection.bias.push_back(ad::Tensor::zeros(1, d0, true));
  }
  if (config.ablate.no_ei) {
    p.edges = edge_type_init(graph.num_edges(), config.edge_dim, rng, EdgeEncoding::RandomFrozen);
  } else {
    p.edges = edge_type_init(graph.num_edge_types(), config.edge_dim, rng, EdgeEncoding::Typed);
  }
  for (std::size_t l = 0; l < config.num_layers(); ++l) {
    p.layers.push_back(init_layer(config.edge_dim, config.dims[l], config.dims[l + 1], config.beta, rng));
  }
  p.classifier = glorot_uniform(config.dims.back(), graph.num_classes(), rng);
  return p;
}

ForwardResult forward(ad::Tape& tape, const HeteroGraph& graph, const ModelParams& params, const ModelConfig& config) {
  if (params.layers.size() != config.num_layers()) {
    throw ContractError(fmt::format("forward: {} layer parameter sets for a {}-layer config", params.layers.size(),
                                    config.num_layers()));
  }
  ForwardResult out;
  auto h = feature_project(tape, graph, params.projection, config.leaky_slope, !config.ablate.no_nle);
  const auto arc_rows = params.edges.arc_rows(graph);
  LayerOptions options{config.agg, config.activation, config.leaky_slope, !config.ablate.no_fgl};
  ad::Tensor alpha;
  for (const auto& layer : params.layers) {
    auto next = edgegfl_layer(tape, h, graph, params.edges, arc_rows, layer, options, alpha);
    h = next.h;
    alpha = next.alpha;
    out.alphas.push_back(alpha);
  }
  out.hidden = h;
  out.output = config.ablate.no_l2 ? h : ad::l2_normalize_rows(tape, h);
  auto logits = ad::matmul(tape, out.output, params.classifier);
  out.probs = config.loss == LossMode::SoftmaxCE ? ad::softmax_rows(tape, logits) : ad::sigmoid(tape, logits);
  return out;
}

ad::Tensor loss(ad::Tape& tape, const ad::Tensor& probs, std::span<const double> labels, std::size_t n_classes,
                std::span<const std::size_t> nodes, std::span<const NamedTensor> regularized,
                const ModelConfig& config) {
  if (nodes.empty()) throw ContractError("loss: empty training mask");
  if (probs.cols() != n_classes || labels.size() != probs.rows() * n_classes) {
    throw DimensionError(fmt::format("loss: predictions {} against {} label entries for {} classes", probs.shape_str(),
                                     labels.size(), n_classes));
  }
  for (double z : probs.values()) {
    if (std::isnan(z)) throw EvaluationError("loss: predictions contain NaN");
  }
  std::vector<double> y;
  y.reserve(nodes.size() * n_classes);
  for (std::size_t i : nodes) y.insert(y.end(), labels.begin() + i * n_classes, labels.begin() + (i + 1) * n_classes);
  auto target = ad::Tensor::from(nodes.size(), n_classes, y);
  auto z = ad::gather_rows(tape, probs, nodes);

  auto total = ad::sum(tape, ad::hadamard(tape, ad::log_clamped(tape, z, kLogFloor), target));
  if (config.loss == LossMode::SigmoidBCE) {
    std::vector<double> neg(y.size());
    std::transform(y.begin(), y.end(), neg.begin(), [](double v) { return 1.0 - v; });
    auto one_minus_z = ad::add_scalar(tape, ad::scale(tape, z, -1.0), 1.0);
    auto negatives = ad::hadamard(tape, ad::log_clamped(tape, one_minus_z, kLogFloor),
                                  ad::Tensor::from(nodes.size(), n_classes, std::move(neg)));
    total = ad::add(tape, total, ad::sum(tape, negatives));
  }
  auto result = ad::scale(tape, total, -1.0);

  if (config.weight_decay > 0.0 && !regularized.empty()) {
    ad::Tensor squares;
    for (const auto& p : regularized) {
      auto s = ad::sum_squares(tape, p.tensor);
      squares = squares.defined() ? ad::add(tape, squares, s) : s;
    }
    auto penalty = config.unsquared_decay ? ad::sqrt(tape, squares) : squares;
    result = ad::add(tape, result, ad::scale(tape, penalty, config.weight_decay));
  }
  return result;
}

double data_loss(const ad::Tensor& probs, std::span<const double> labels, std::span<const std::size_t> nodes,
                 LossMode mode) {
  const std::size_t c = probs.cols();
  double total = 0.0;
  for (std::size_t i : nodes) {
    for (std::size_t k = 0; k < c; ++k) {
      const double z = probs.at(i, k);
      const double y = labels[i * c + k];
      total -= y * std::log(std::max(z, kLogFloor));
      if (mode == LossMode::SigmoidBCE) total -= (1.0 - y) * std::log(std::max(1.0 - z, kLogFloor));
    }
  }
  return total;
}

std::vector<std::size_t> predict_single(const ad::Tensor& probs) {
  std::vector<std::size_t> out(probs.rows());
  auto v = probs.values();
  const std::size_t c = probs.cols();
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = static_cast<std::size_t>(std::max_element(v.begin() + i * c, v.begin() + (i + 1) * c) - (v.begin() + i * c));
  }
  return out;
}

std::vector<std::vector<bool>> predict_multi(const ad::Tensor& probs, double threshold) {
  std::vector<std::vector<bool>> out(probs.rows(), std::vector<bool>(probs.cols()));
  for (std::size_t i = 0; i < probs.rows(); ++i) {
    for (std::size_t k = 0; k < probs.cols(); ++k) out[i][k] = probs.at(i, k) >= threshold;
  }
  return out;
}

const char* to_string(AggMode mode) {
  switch (mode) {
    case AggMode::PlainSum: return "plain-sum";
    case AggMode::NodeResidual: return "node-residual";
    case AggMode::EdgeResidual: return "edge-residual";
  }
  return "?";
}

const char* to_string(LossMode mode) { return mode == LossMode::SoftmaxCE ? "softmax-ce" : "sigmoid-bce"; }
const char* to_string(Activation activation) { return activation == Activation::Elu ? "elu" : "leaky-relu"; }

AggMode parse_agg_mode(const std::string& text) {
  for (auto m : {AggMode::PlainSum, AggMode::NodeResidual, AggMode::EdgeResidual}) {
    if (text == to_string(m)) return m;
  }
  throw ContractError(fmt::format("unknown aggregation mode '{}'", text));
}

LossMode parse_loss_mode(const std::string& text) {
  for (auto m : {LossMode::SoftmaxCE, LossMode::SigmoidBCE}) {
    if (text == to_string(m)) return m;
  }
  throw ContractError(fmt::format("unknown loss mode '{}'", text));
}

Activation parse_activation(const std::string& text) {
  for (auto a : {Activation::Elu, Activation::LeakyRelu}) {
    if (text == to_string(a)) return a;
  }
  throw ContractError(fmt::format("unknown activation '{}'", text));
}

}  // namespace edgegfl
