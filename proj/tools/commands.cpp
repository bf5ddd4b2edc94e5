#include "commands.hpp"

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <limits>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <spdlog/sinks/stdout_sinks.h>
#include <spdlog/spdlog.h>

#include "edgegfl/cluster.hpp"
#include "edgegfl/errors.hpp"
#include "edgegfl/metrics.hpp"

namespace edgegfl::cli {
namespace {

using nlohmann::json;

json split_to_json(const SplitSettings& s) {
  return {{"mode", s.mode},
          {"train_frac", s.spec.train_frac},
          {"val_frac", s.spec.val_frac},
          {"test_frac", s.spec.test_frac},
          {"seed", s.spec.seed}};
}

SplitSettings split_from_json(const json& j) {
  SplitSettings s;
  s.mode = j.at("mode").get<std::string>();
  s.spec.train_frac = j.at("train_frac").get<double>();
  s.spec.val_frac = j.at("val_frac").get<double>();
  s.spec.test_frac = j.at("test_frac").get<double>();
  s.spec.seed = j.at("seed").get<std::uint64_t>();
  return s;
}

json train_config_to_json(const TrainConfig& c) {
  return {{"lr", c.lr},
          {"adam_beta1", c.adam_beta1},
          {"adam_beta2", c.adam_beta2},
          {"adam_eps", c.adam_eps},
          {"max_epochs", c.max_epochs},
          {"patience", c.patience}};
}

TrainConfig train_config_from_json(const json& j) {
  TrainConfig c;
  c.lr = j.at("lr").get<double>();
  c.adam_beta1 = j.at("adam_beta1").get<double>();
  c.adam_beta2 = j.at("adam_beta2").get<double>();
  c.adam_eps = j.at("adam_eps").get<double>();
  c.max_epochs = j.at("max_epochs").get<std::size_t>();
  c.patience = j.at("patience").get<std::size_t>();
  return c;
}

void write_json(const std::filesystem::path& path, const json& j) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw DataError(fmt::format("cannot write {}", path.string()));
  f << j.dump(2) << '\n';
}

/// Classification report over `nodes`; ARI/NMI compare predicted classes to
/// the first label and are null for multi-label data.
json split_report(const HeteroGraph& graph, const ad::Tensor& probs, std::span<const std::size_t> nodes, LossMode mode,
                  bool literal) {
  const auto scores = score_nodes(graph, probs, nodes, mode);
  metrics::MetricsReport report{scores.micro_f1, scores.macro_f1, std::numeric_limits<double>::quiet_NaN(),
                                std::numeric_limits<double>::quiet_NaN(), scores.n_samples};
  json j;
  if (mode == LossMode::SoftmaxCE && nodes.size() >= 2) {
    const auto pred = predict_single(probs);
    std::vector<std::size_t> t, p;
    for (std::size_t i : nodes) {
      t.push_back(graph.labels(i).front());
      p.push_back(pred[i]);
    }
    try {
      report.ari = metrics::adjusted_rand_index(t, p);
    } catch (const EvaluationError&) {
      // undefined for this pair of partitions; reported as null
    }
    report.nmi = metrics::nmi(t, p);
    j = report.to_json();
    if (literal) {
      const auto tally = metrics::tally(t, p, graph.num_classes());
      j["literal_micro_f1"] = metrics::literal_micro_f1(tally);
      j["literal_macro_f1"] = metrics::literal_macro_f1(tally);
    }
  } else {
    j = report.to_json();
  }
  return j;
}

struct LoadedRun {
  Checkpoint checkpoint;
  HeteroGraph graph;
};

LoadedRun load_run(const std::filesystem::path& data, const std::filesystem::path& checkpoint_path) {
  auto checkpoint = load_checkpoint(checkpoint_path);
  auto graph = load_dataset(data);
  check_compatible(checkpoint, graph);
  auto settings = split_from_json(checkpoint.run.at("split"));
  auto split_graph = apply_split(graph, settings, checkpoint.config.seed);
  return {std::move(checkpoint), std::move(split_graph)};
}

ForwardResult run_forward(ad::Tape& tape, const LoadedRun& run) {
  return forward(tape, run.graph, run.checkpoint.params, run.checkpoint.config);
}

}  // namespace

HeteroGraph apply_split(const HeteroGraph& graph, SplitSettings& settings, std::uint64_t master_seed) {
  if (settings.mode == "file" || (settings.mode == "standard" && graph.has_split())) {
    if (!graph.has_split()) throw DataError("run expects the dataset's split.tsv, which is missing");
    settings.mode = "file";
    return graph;
  }
  if (settings.mode == "standard") {
    settings.spec = SplitSpec{0.24, 0.06, 0.70, seeds::split(master_seed)};
  } else if (settings.mode == "cluster") {
    settings.spec = SplitSpec{0.03, 0.06, 0.91, seeds::split(master_seed)};
  } else {
    throw ContractError(fmt::format("unknown split mode '{}'", settings.mode));
  }
  return graph.with_split(make_split(graph, settings.spec));
}

json cmd_train(TrainOptions options, std::ostream& out) {
  const auto graph_raw = load_dataset(options.data);
  const auto fingerprint = dataset_fingerprint(options.data);
  if (options.loss == "auto") {
    options.model.loss = graph_raw.is_multi_label() ? LossMode::SigmoidBCE : LossMode::SoftmaxCE;
  } else {
    options.model.loss = parse_loss_mode(options.loss);
  }
  options.model.validate();
  options.train.validate();
  const auto graph = apply_split(graph_raw, options.split, options.model.seed);

  std::filesystem::create_directories(options.out);
  const auto checkpoint_path = options.out / "checkpoint.json";
  const auto history_path = options.out / "history.jsonl";
  const auto metrics_path = options.out / "metrics.json";
  const auto manifest_path = options.out / "manifest.json";
  options.train.history_log = history_path;

  spdlog::info("training on {} ({} nodes, {} edges, {} classes), split {}", options.data.string(), graph.num_nodes(),
               graph.num_edges(), graph.num_classes(), options.split.mode);
  auto result = train(graph, options.model, options.train);

  ad::Tape tape;
  auto fwd = forward(tape, graph, result.params, options.model);
  const auto val_nodes = graph.nodes_in(SplitRole::Val);
  const auto test_nodes = graph.nodes_in(SplitRole::Test);
  json metrics_json = {{"val", split_report(graph, fwd.probs, val_nodes, options.model.loss, false)},
                       {"test", split_report(graph, fwd.probs, test_nodes, options.model.loss, false)}};

  Checkpoint checkpoint{options.model, result.params,
                        {{"split", split_to_json(options.split)}, {"dataset_fingerprint", fingerprint}}};
  save_checkpoint(checkpoint, checkpoint_path);
  write_json(metrics_path, metrics_json);
  json manifest = {{"command", "train"},
                   {"data", options.data.string()},
                   {"dataset_fingerprint", fingerprint},
                   {"seed", options.model.seed},
                   {"loss", options.loss},
                   {"config", config_to_json(options.model)},
                   {"train_config", train_config_to_json(options.train)},
                   {"split", split_to_json(options.split)},
                   {"epochs_run", result.history.epochs.size()},
                   {"best_epoch", result.history.best_epoch + 1},
                   {"artifacts",
                    {{"checkpoint", checkpoint_path.string()},
                     {"history", history_path.string()},
                     {"metrics", metrics_path.string()}}},
                   {"metrics", metrics_json}};
  write_json(manifest_path, manifest);

  out << metrics_json.dump(2) << '\n';
  return metrics_json;
}

json cmd_eval(const EvalOptions& options, std::ostream& out) {
  const auto run = load_run(options.data, options.checkpoint);
  ad::Tape tape;
  const auto fwd = run_forward(tape, run);
  json j = json::object();
  for (auto role : {SplitRole::Train, SplitRole::Val, SplitRole::Test}) {
    j[to_string(role)] =
        split_report(run.graph, fwd.probs, run.graph.nodes_in(role), run.checkpoint.config.loss, options.paper_literal_f1);
  }
  if (options.out) write_json(*options.out, j);
  out << j.dump(2) << '\n';
  return j;
}

json cmd_cluster(const ClusterOptions& options, std::ostream& out) {
  const auto run = load_run(options.data, options.checkpoint);
  ad::Tape tape;
  const auto fwd = run_forward(tape, run);
  const ad::Tensor& emb = options.pre_norm ? fwd.hidden : fwd.output;

  const auto nodes = run.graph.labeled_nodes();
  std::size_t k = run.graph.num_classes();
  if (options.k && *options.k != k) {
    spdlog::warn("--k {} overrides the dataset's class count {}", *options.k, k);
    k = *options.k;
  }
  const std::size_t d = emb.cols();
  std::vector<double> x;
  x.reserve(nodes.size() * d);
  std::vector<std::size_t> truth;
  for (std::size_t i : nodes) {
    for (std::size_t j = 0; j < d; ++j) x.push_back(emb.at(i, j));
    truth.push_back(run.graph.labels(i).front());
  }
  const std::uint64_t seed = options.kmeans_seed.value_or(seeds::kmeans(run.checkpoint.config.seed));
  const auto km = kmeans(x, nodes.size(), d, KMeansOptions{k, seed, 300, 1e-8});

  if (options.assignments) {
    std::ofstream f(*options.assignments, std::ios::binary);
    if (!f) throw DataError(fmt::format("cannot write {}", options.assignments->string()));
    for (std::size_t r = 0; r < nodes.size(); ++r) f << nodes[r] << '\t' << km.assignments[r] << '\n';
  }
  double ari = std::numeric_limits<double>::quiet_NaN();
  try {
    ari = metrics::adjusted_rand_index(truth, km.assignments);
  } catch (const EvaluationError&) {
  }
  json j = {{"ari", ari},
            {"nmi", metrics::nmi(truth, km.assignments)},
            {"n_samples", nodes.size()},
            {"k", k},
            {"kmeans_seed", seed},
            {"inertia", km.inertia},
            {"iterations", km.iterations},
            {"representation", options.pre_norm ? "pre-norm" : "normalized"}};
  if (options.out) write_json(*options.out, j);
  out << j.dump(2) << '\n';
  return j;
}

std::size_t cmd_export_embeddings(const ExportOptions& options) {
  const auto run = load_run(options.data, options.checkpoint);
  ad::Tape tape;
  const auto fwd = run_forward(tape, run);
  const ad::Tensor& emb = options.pre_norm ? fwd.hidden : fwd.output;
  std::ofstream f(options.out, std::ios::binary);
  if (!f) throw DataError(fmt::format("cannot write {}", options.out.string()));
  for (std::size_t i = 0; i < emb.rows(); ++i) {
    f << i;
    for (std::size_t j = 0; j < emb.cols(); ++j) f << '\t' << fmt::format("{:.9g}", emb.at(i, j));
    f << '\n';
  }
  if (!f) throw DataError(fmt::format("failed writing {}", options.out.string()));
  return emb.rows();
}

void configure_logging() {
  static bool configured = false;
  if (!configured) {
    spdlog::set_default_logger(spdlog::stderr_logger_mt("edgegfl"));
    configured = true;
  }
  const char* env = std::getenv("HETGFL_LOG");
  const std::string level = env ? env : "info";
  if (level == "error") spdlog::set_level(spdlog::level::err);
  else if (level == "debug") spdlog::set_level(spdlog::level::debug);
  else spdlog::set_level(spdlog::level::info);
}

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  configure_logging();
  CLI::App app{"EdgeGFL: edge-type feature-preference message passing for heterogeneous graphs"};
  app.require_subcommand(1);

  // train
  TrainOptions topt;
  std::size_t layers = 2, dim = 64;
  std::string agg = "edge-residual", activation = "elu", split_mode = "standard";
  std::vector<std::string> ablate;
  std::string from_manifest;
  auto* train_cmd = app.add_subcommand("train", "train a model and write checkpoint, history and manifest");
  train_cmd->add_option("--data", topt.data, "dataset directory");
  train_cmd->add_option("--out", topt.out, "output directory")->capture_default_str();
  train_cmd->add_option("--layers", layers, "number of layers L")->check(CLI::PositiveNumber)->capture_default_str();
  train_cmd->add_option("--dim", dim, "hidden dimension d")->check(CLI::PositiveNumber)->capture_default_str();
  train_cmd->add_option("--edge-dim", topt.model.edge_dim, "edge-type embedding dimension")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  train_cmd->add_option("--agg", agg, "aggregation")
      ->check(CLI::IsMember({"plain-sum", "node-residual", "edge-residual"}))
      ->capture_default_str();
  train_cmd->add_option("--beta", topt.model.beta, "edge-residual factor")->check(CLI::Range(0.0, 1.0))->capture_default_str();
  train_cmd->add_option("--loss", topt.loss, "loss")
      ->check(CLI::IsMember({"auto", "softmax-ce", "sigmoid-bce"}))
      ->capture_default_str();
  train_cmd->add_option("--activation", activation, "aggregation nonlinearity")
      ->check(CLI::IsMember({"elu", "leaky-relu"}))
      ->capture_default_str();
  train_cmd->add_option("--slope", topt.model.leaky_slope, "LeakyReLU slope")
      ->check(CLI::Range(0.0, 1.0))
      ->capture_default_str();
  train_cmd->add_option("--ablate", ablate, "ablation (repeatable)")
      ->check(CLI::IsMember({"no-fgl", "no-l2", "no-nle", "no-ei"}))
      ->take_all();
  train_cmd->add_option("--epochs", topt.train.max_epochs, "maximum epochs")->check(CLI::PositiveNumber)->capture_default_str();
  train_cmd->add_option("--patience", topt.train.patience, "early-stopping patience")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  train_cmd->add_option("--lr", topt.train.lr, "Adam learning rate")->check(CLI::NonNegativeNumber)->capture_default_str();
  train_cmd->add_option("--weight-decay", topt.model.weight_decay, "regularization weight")
      ->check(CLI::NonNegativeNumber)
      ->capture_default_str();
  train_cmd->add_flag("--unsquared-decay", topt.model.unsquared_decay, "regularize with the plain L2 norm");
  train_cmd->add_option("--seed", topt.model.seed, "master seed")->capture_default_str();
  train_cmd->add_option("--split-mode", split_mode, "split when no split.tsv: standard 24/6/70, cluster 3/6/91")
      ->check(CLI::IsMember({"standard", "cluster"}))
      ->capture_default_str();
  train_cmd->add_option("--from-manifest", from_manifest, "re-run the configuration recorded in a manifest");

  // eval
  EvalOptions eopt;
  std::string eval_out;
  auto* eval_cmd = app.add_subcommand("eval", "recompute micro/macro F1 per split");
  eval_cmd->add_option("--data", eopt.data, "dataset directory")->required();
  eval_cmd->add_option("--checkpoint", eopt.checkpoint, "checkpoint file")->required();
  eval_cmd->add_option("--out", eval_out, "also write the JSON here");
  eval_cmd->add_flag("--paper-literal-f1", eopt.paper_literal_f1, "add the literal printed F1 formulas");

  // cluster
  ClusterOptions copt;
  std::uint64_t kmeans_seed = 0;
  std::size_t k = 0;
  std::string assignments, cluster_out;
  auto* cluster_cmd = app.add_subcommand("cluster", "k-means over learned embeddings");
  cluster_cmd->add_option("--data", copt.data, "dataset directory")->required();
  cluster_cmd->add_option("--checkpoint", copt.checkpoint, "checkpoint file")->required();
  auto* seed_opt = cluster_cmd->add_option("--kmeans-seed", kmeans_seed, "k-means seed (default: master seed + 3)");
  auto* k_opt = cluster_cmd->add_option("--k", k, "cluster count (default: class count)")->check(CLI::PositiveNumber);
  cluster_cmd->add_flag("--pre-norm", copt.pre_norm, "cluster H^L instead of the normalized output");
  cluster_cmd->add_option("--assignments", assignments, "write node_id<TAB>cluster TSV");
  cluster_cmd->add_option("--out", cluster_out, "also write the JSON here");

  // export-embeddings
  ExportOptions xopt;
  auto* export_cmd = app.add_subcommand("export-embeddings", "write node_id<TAB>embedding rows");
  export_cmd->add_option("--data", xopt.data, "dataset directory")->required();
  export_cmd->add_option("--checkpoint", xopt.checkpoint, "checkpoint file")->required();
  export_cmd->add_option("--out", xopt.out, "output TSV")->required();
  export_cmd->add_flag("--pre-norm", xopt.pre_norm, "export H^L instead of the normalized output");

  // generate
  PlantedSpec gspec;
  std::string gen_out;
  bool gen_split = false;
  auto* gen_cmd = app.add_subcommand("generate", "write a planted-partition dataset");
  gen_cmd->add_option("--out", gen_out, "dataset directory")->required();
  gen_cmd->add_option("--nodes", gspec.n, "node count")->capture_default_str();
  gen_cmd->add_option("--node-types", gspec.n_node_types, "node types")->capture_default_str();
  gen_cmd->add_option("--edge-types", gspec.n_edge_types, "edge types")->capture_default_str();
  gen_cmd->add_option("--classes", gspec.n_classes, "classes")->capture_default_str();
  gen_cmd->add_option("--homophily", gspec.homophily, "fraction of edges within a class")->capture_default_str();
  gen_cmd->add_option("--avg-degree", gspec.avg_degree, "mean degree")->capture_default_str();
  gen_cmd->add_option("--seed", gspec.seed, "generator seed")->capture_default_str();
  gen_cmd->add_flag("--with-split", gen_split, "also write a 24/6/70 split.tsv");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n" << "run with --help for usage\n";
    return kUsage;
  }

  try {
    if (train_cmd->parsed()) {
      if (!from_manifest.empty()) {
        std::ifstream f(from_manifest);
        if (!f) throw DataError("cannot open manifest " + from_manifest);
        const auto m = json::parse(f);
        TrainOptions replay;
        replay.data = topt.data.empty() ? std::filesystem::path(m.at("data").get<std::string>()) : topt.data;
        replay.out = topt.out;
        replay.model = config_from_json(m.at("config"));
        replay.train = train_config_from_json(m.at("train_config"));
        replay.split = split_from_json(m.at("split"));
        if (replay.split.mode == "file") replay.split.mode = "standard";
        replay.loss = m.at("loss").get<std::string>();
        cmd_train(std::move(replay), out);
        return kOk;
      }
      if (topt.data.empty()) {
        err << "error: --data is required\nrun with --help for usage\n";
        return kUsage;
      }
      topt.model.dims.assign(layers + 1, dim);
      topt.model.agg = parse_agg_mode(agg);
      topt.model.activation = parse_activation(activation);
      for (const auto& a : ablate) {
        if (a == "no-fgl") topt.model.ablate.no_fgl = true;
        if (a == "no-l2") topt.model.ablate.no_l2 = true;
        if (a == "no-nle") topt.model.ablate.no_nle = true;
        if (a == "no-ei") topt.model.ablate.no_ei = true;
      }
      topt.split.mode = split_mode;
      cmd_train(std::move(topt), out);
    } else if (eval_cmd->parsed()) {
      if (!eval_out.empty()) eopt.out = eval_out;
      cmd_eval(eopt, out);
    } else if (cluster_cmd->parsed()) {
      if (seed_opt->count() > 0) copt.kmeans_seed = kmeans_seed;
      if (k_opt->count() > 0) copt.k = k;
      if (!assignments.empty()) copt.assignments = assignments;
      if (!cluster_out.empty()) copt.out = cluster_out;
      cmd_cluster(copt, out);
    } else if (export_cmd->parsed()) {
      const auto rows = cmd_export_embeddings(xopt);
      spdlog::info("wrote {} embedding rows to {}", rows, xopt.out.string());
    } else if (gen_cmd->parsed()) {
      auto graph = synth_planted(gspec);
      if (gen_split) graph = graph.with_split(make_split(graph, SplitSpec{0.24, 0.06, 0.70, seeds::split(gspec.seed)}));
      save_dataset(graph, gen_out);
      out << json{{"nodes", graph.num_nodes()},
                  {"node_types", graph.num_node_types()},
                  {"edges", graph.num_edges()},
                  {"edge_types", graph.num_edge_types()},
                  {"classes", graph.num_classes()}}
                 .dump()
          << '\n';
    }
  } catch (const ContractError& e) {
    err << "error: " << e.what() << '\n';
    return kRuntimeFailure;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kRuntimeFailure;
  }
  return kOk;
}

}  // namespace edgegfl::cli
