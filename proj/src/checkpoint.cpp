#include "edgegfl/checkpoint.hpp"

#include <fstream>

#include <fmt/format.h>
#include <fmt/ranges.h>

#include "edgegfl/errors.hpp"

namespace edgegfl {
namespace {

using nlohmann::json;

constexpr int kFormatVersion = 1;

json tensor_to_json(const ad::Tensor& t) {
  if (!t.defined()) return nullptr;
  return {{"shape", {t.rows(), t.cols()}},
          {"trainable", t.requires_grad()},
          {"values", std::vector<double>(t.values().begin(), t.values().end())}};
}

ad::Tensor tensor_from_json(const json& j) {
  if (j.is_null()) return {};
  const auto shape = j.at("shape").get<std::vector<std::size_t>>();
  if (shape.size() != 2) throw DataError("checkpoint tensor shape must have two entries");
  return ad::Tensor::from(shape[0], shape[1], j.at("values").get<std::vector<double>>(), j.at("trainable").get<bool>());
}

}  // namespace

json config_to_json(const ModelConfig& c) {
  return {{"dims", c.dims},
          {"edge_dim", c.edge_dim},
          {"agg", to_string(c.agg)},
          {"beta", c.beta},
          {"leaky_slope", c.leaky_slope},
          {"activation", to_string(c.activation)},
          {"loss", to_string(c.loss)},
          {"ablate",
           {{"no_fgl", c.ablate.no_fgl}, {"no_l2", c.ablate.no_l2}, {"no_nle", c.ablate.no_nle}, {"no_ei", c.ablate.no_ei}}},
          {"weight_decay", c.weight_decay},
          {"unsquared_decay", c.unsquared_decay},
          {"seed", c.seed}};
}

ModelConfig config_from_json(const json& j) {
  ModelConfig c;
  c.dims = j.at("dims").get<std::vector<std::size_t>>();
  c.edge_dim = j.at("edge_dim").get<std::size_t>();
  c.agg = parse_agg_mode(j.at("agg").get<std::string>());
  c.beta = j.at("beta").get<double>();
  c.leaky_slope = j.at("leaky_slope").get<double>();
  c.activation = parse_activation(j.at("activation").get<std::string>());
  c.loss = parse_loss_mode(j.at("loss").get<std::string>());
  const auto& a = j.at("ablate");
  c.ablate = {a.at("no_fgl").get<bool>(), a.at("no_l2").get<bool>(), a.at("no_nle").get<bool>(), a.at("no_ei").get<bool>()};
  c.weight_decay = j.at("weight_decay").get<double>();
  c.unsquared_decay = j.at("unsquared_decay").get<bool>();
  c.seed = j.at("seed").get<std::uint64_t>();
  c.validate();
  return c;
}

json checkpoint_to_json(const Checkpoint& cp) {
  const auto& p = cp.params;
  json projection = json::array();
  for (std::size_t t = 0; t < p.projection.weight.size(); ++t) {
    projection.push_back({{"weight", tensor_to_json(p.projection.weight[t])}, {"bias", tensor_to_json(p.projection.bias[t])}});
  }
  json layers = json::array();
  for (const auto& l : p.layers) {
    layers.push_back({{"w_rel", tensor_to_json(l.w_rel)},
                      {"weight", tensor_to_json(l.weight)},
                      {"w_res", tensor_to_json(l.w_res)},
                      {"attn_dst", tensor_to_json(l.attn_dst)},
                      {"attn_src", tensor_to_json(l.attn_src)},
                      {"attn_edge", tensor_to_json(l.attn_edge)},
                      {"beta", l.beta}});
  }
  return {{"format", "edgegfl-checkpoint"},
          {"version", kFormatVersion},
          {"config", config_to_json(cp.config)},
          {"run", cp.run},
          {"params",
           {{"projection", projection},
            {"edges",
             {{"encoding", p.edges.encoding == EdgeEncoding::Typed ? "typed" : "random-frozen"},
              {"embeddings", tensor_to_json(p.edges.embeddings)}}},
            {"layers", layers},
            {"classifier", tensor_to_json(p.classifier)}}}};
}

Checkpoint checkpoint_from_json(const json& j) {
  try {
    if (j.at("format") != "edgegfl-checkpoint" || j.at("version") != kFormatVersion) {
      throw DataError("not an edgegfl checkpoint (format/version mismatch)");
    }
    Checkpoint cp;
    cp.config = config_from_json(j.at("config"));
    cp.run = j.value("run", json::object());
    const auto& p = j.at("params");
    for (const auto& entry : p.at("projection")) {
      cp.params.projection.weight.push_back(tensor_from_json(entry.at("weight")));
      cp.params.projection.bias.push_back(tensor_from_json(entry.at("bias")));
    }
    const auto& e = p.at("edges");
    const auto encoding = e.at("encoding").get<std::string>();
    if (encoding != "typed" && encoding != "random-frozen") throw DataError("unknown edge encoding " + encoding);
    cp.params.edges = EdgeTypeTable{tensor_from_json(e.at("embeddings")),
                                    encoding == "typed" ? EdgeEncoding::Typed : EdgeEncoding::RandomFrozen};
    for (const auto& l : p.at("layers")) {
      LayerParams lp;
      lp.w_rel = tensor_from_json(l.at("w_rel"));
      lp.weight = tensor_from_json(l.at("weight"));
      lp.w_res = tensor_from_json(l.at("w_res"));
      lp.attn_dst = tensor_from_json(l.at("attn_dst"));
      lp.attn_src = tensor_from_json(l.at("attn_src"));
      lp.attn_edge = tensor_from_json(l.at("attn_edge"));
      lp.beta = l.at("beta").get<double>();
      cp.params.layers.push_back(std::move(lp));
    }
    cp.params.classifier = tensor_from_json(p.at("classifier"));
    if (!cp.params.classifier.defined() || !cp.params.edges.embeddings.defined()) {
      throw DataError("checkpoint is missing the classifier or edge table");
    }
    if (cp.params.layers.size() != cp.config.num_layers()) {
      throw DataError(fmt::format("checkpoint has {} layers but its config declares {}", cp.params.layers.size(),
                                  cp.config.num_layers()));
    }
    return cp;
  } catch (const json::exception& ex) {
    throw DataError(fmt::format("malformed checkpoint: {}", ex.what()));
  } catch (const DimensionError& ex) {
    throw DataError(fmt::format("malformed checkpoint: {}", ex.what()));
  } catch (const ContractError& ex) {
    throw DataError(fmt::format("malformed checkpoint: {}", ex.what()));
  }
}

void save_checkpoint(const Checkpoint& checkpoint, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError(fmt::format("cannot write checkpoint {}", path.string()));
  out << checkpoint_to_json(checkpoint).dump() << '\n';
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError(fmt::format("cannot open checkpoint {}", path.string()));
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& ex) {
    throw DataError(fmt::format("checkpoint {} is not valid JSON: {}", path.string(), ex.what()));
  }
  return checkpoint_from_json(j);
}

void check_compatible(const Checkpoint& cp, const HeteroGraph& graph) {
  std::vector<std::string> diffs;
  const auto& p = cp.params;
  if (p.projection.weight.size() != graph.num_node_types()) {
    diffs.push_back(fmt::format("node types: checkpoint {} vs dataset {}", p.projection.weight.size(), graph.num_node_types()));
  } else {
    for (std::size_t t = 0; t < graph.num_node_types(); ++t) {
      if (p.projection.weight[t].rows() != graph.feature_dim(t)) {
        diffs.push_back(fmt::format("input dim of node type {}: checkpoint {} vs dataset {}", t,
                                    p.projection.weight[t].rows(), graph.feature_dim(t)));
      }
    }
  }
  const std::size_t keys = p.edges.encoding == EdgeEncoding::Typed ? graph.num_edge_types() : graph.num_edges();
  if (p.edges.num_rows() != keys) {
    diffs.push_back(fmt::format("edge table rows: checkpoint {} vs dataset {}", p.edges.num_rows(), keys));
  }
  if (p.classifier.cols() != graph.num_classes()) {
    diffs.push_back(fmt::format("classes: checkpoint {} vs dataset {}", p.classifier.cols(), graph.num_classes()));
  }
  if (!diffs.empty()) {
    throw ContractError(fmt::format("checkpoint does not match dataset: {}", fmt::join(diffs, "; ")));
  }
}

}  // namespace edgegfl
