#include <doctest.h>

#include <cmath>
#include <fstream>
#include <random>
#include <sstream>

#include "commands.hpp"
#include "edgegfl/checkpoint.hpp"
#include "edgegfl/train.hpp"
#include "support.hpp"

using namespace edgegfl;
using nlohmann::json;

namespace {

struct Outcome {
  int code;
  std::string out, err;
};

Outcome run_cli(std::vector<std::string> args) {
  args.insert(args.begin(), "edgegfl");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

/// Planted dataset on disk, small enough for quick CLI runs.
std::filesystem::path small_planted(const std::string& tag) {
  const auto dir = testsupport::scratch_dir(tag);
  PlantedSpec spec;
  spec.n = 120;
  save_dataset(synth_planted(spec), dir / "data");
  return dir;
}

const std::vector<std::string> kQuick{"--layers", "1", "--dim", "8", "--edge-dim", "8", "--epochs", "20", "--lr", "0.01"};

std::vector<std::string> with(std::vector<std::string> head, const std::vector<std::string>& tail) {
  head.insert(head.end(), tail.begin(), tail.end());
  return head;
}

}  // namespace

TEST_SUITE("cli") {
  TEST_CASE("usage errors exit with 2, help with 0") {
    CHECK(run_cli({}).code == 2);
    CHECK(run_cli({"train"}).code == 2);
    CHECK(run_cli({"train", "--data", "x", "--agg", "mean"}).code == 2);
    CHECK(run_cli({"train", "--data", "x", "--ablate", "no-such"}).code == 2);
    CHECK(run_cli({"eval", "--data", "x"}).code == 2);
    const auto help = run_cli({"--help"});
    CHECK(help.code == 0);
    CHECK(help.out.find("train") != std::string::npos);
  }

  TEST_CASE("runtime failures exit with 1") {
    const auto dir = testsupport::scratch_dir("cli_missing");
    CHECK(run_cli({"train", "--data", (dir / "nope").string(), "--out", (dir / "run").string()}).code == 1);
    std::filesystem::remove_all(dir);
  }

  TEST_CASE("train writes artifacts; eval is repeatable; corrupted checkpoint fails") {
    const auto dir = small_planted("cli_train");
    const auto data = (dir / "data").string(), run = (dir / "run").string();
    const auto trained = run_cli(with({"train", "--data", data, "--out", run}, kQuick));
    REQUIRE(trained.code == 0);
    for (const char* f : {"checkpoint.json", "history.jsonl", "metrics.json", "manifest.json"})
      CHECK(std::filesystem::exists(dir / "run" / f));
    const auto metrics = json::parse(trained.out);
    CHECK(metrics.at("test").at("n_samples") == 85);
    const auto manifest = json::parse(slurp(dir / "run" / "manifest.json"));
    CHECK(manifest.at("seed") == 0);
    CHECK(manifest.at("dataset_fingerprint") == dataset_fingerprint(dir / "data"));

    const auto ck = (dir / "run" / "checkpoint.json").string();
    const auto e1 = run_cli({"eval", "--data", data, "--checkpoint", ck});
    const auto e2 = run_cli({"eval", "--data", data, "--checkpoint", ck});
    REQUIRE(e1.code == 0);
    CHECK(e1.out == e2.out);
    CHECK(json::parse(e1.out).at("test") == metrics.at("test"));

    const auto lit = json::parse(run_cli({"eval", "--data", data, "--checkpoint", ck, "--paper-literal-f1"}).out);
    CHECK(lit.at("val").contains("literal_micro_f1"));

    {
      std::ofstream f(dir / "broken.json");
      f << slurp(ck).substr(0, 200);
    }
    const auto broken = run_cli({"eval", "--data", data, "--checkpoint", (dir / "broken.json").string()});
    CHECK(broken.code == 1);
    CHECK_FALSE(broken.err.empty());
    std::filesystem::remove_all(dir);
  }

  TEST_CASE("checkpoint against a mismatched dataset exits 1 with the differences") {
    const auto dir = small_planted("cli_mismatch");
    const auto data = (dir / "data").string();
    REQUIRE(run_cli(with({"train", "--data", data, "--out", (dir / "run").string()}, kQuick)).code == 0);
    PlantedSpec other;
    other.n = 60;
    other.n_classes = 4;
    other.n_edge_types = 5;
    save_dataset(synth_planted(other), dir / "other");
    const auto r = run_cli({"eval", "--data", (dir / "other").string(), "--checkpoint",
                            (dir / "run" / "checkpoint.json").string()});
    CHECK(r.code == 1);
    CHECK(r.err.find("classes") != std::string::npos);
    std::filesystem::remove_all(dir);
  }

  TEST_CASE("from-manifest replays the run") {
    const auto dir = small_planted("cli_manifest");
    const auto data = (dir / "data").string();
    const auto first = run_cli(with({"train", "--data", data, "--out", (dir / "a").string(), "--seed", "4"}, kQuick));
    REQUIRE(first.code == 0);
    const auto replay = run_cli(
        {"train", "--from-manifest", (dir / "a" / "manifest.json").string(), "--out", (dir / "b").string()});
    REQUIRE(replay.code == 0);
    CHECK(replay.out == first.out);
    std::filesystem::remove_all(dir);
  }

  TEST_CASE("export writes unit rows that match the model") {
    const auto dir = small_planted("cli_export");
    const auto data = (dir / "data").string();
    REQUIRE(run_cli(with({"train", "--data", data, "--out", (dir / "run").string()}, kQuick)).code == 0);
    const auto ck = (dir / "run" / "checkpoint.json").string();
    REQUIRE(run_cli({"export-embeddings", "--data", data, "--checkpoint", ck, "--out", (dir / "e.tsv").string()})
                .code == 0);
    const auto loaded = load_checkpoint(ck);
    const auto graph = load_dataset(dir / "data");
    ad::Tape tape;
    const auto fwd = forward(tape, graph, loaded.params, loaded.config);
    std::ifstream f(dir / "e.tsv");
    std::size_t rows = 0;
    for (std::string line; std::getline(f, line); ++rows) {
      std::istringstream ss(line);
      std::size_t id;
      ss >> id;
      CHECK(id == rows);
      double norm = 0, v;
      std::size_t j = 0;
      while (ss >> v) {
        CHECK(std::abs(v - fwd.output.at(id, j)) <= 1e-8);
        norm += v * v;
        ++j;
      }
      CHECK(j == 8);
      CHECK(std::abs(std::sqrt(norm) - 1.0) <= 1e-6);
    }
    CHECK(rows == 120);
    std::filesystem::remove_all(dir);
  }

  TEST_CASE("cluster honours --k and --kmeans-seed and writes assignments") {
    const auto dir = small_planted("cli_cluster");
    const auto data = (dir / "data").string();
    REQUIRE(run_cli(with({"train", "--data", data, "--out", (dir / "run").string()}, kQuick)).code == 0);
    const auto ck = (dir / "run" / "checkpoint.json").string();
    const auto r = run_cli({"cluster", "--data", data, "--checkpoint", ck, "--k", "5", "--kmeans-seed", "11",
                            "--assignments", (dir / "a.tsv").string()});
    REQUIRE(r.code == 0);
    const auto j = json::parse(r.out);
    CHECK(j.at("k") == 5);
    CHECK(j.at("kmeans_seed") == 11);
    std::ifstream f(dir / "a.tsv");
    std::size_t rows = 0;
    for (std::string line; std::getline(f, line);) {
      std::istringstream ss(line);
      std::size_t node, cluster;
      ss >> node >> cluster;
      CHECK(cluster < 5);
      ++rows;
    }
    CHECK(rows == 120);
    const auto d = json::parse(run_cli({"cluster", "--data", data, "--checkpoint", ck}).out);
    CHECK(d.at("k") == 3);
    CHECK(d.at("kmeans_seed") == 3);
    std::filesystem::remove_all(dir);
  }

  TEST_CASE("eval on the train split of a memorized tiny fixture scores 1") {
    GraphData d;
    std::mt19937_64 rng(1);
    std::normal_distribution<double> gauss(0, 1);
    for (std::size_t i = 0; i < 10; ++i) {
      d.node_type.push_back(0);
      d.features.push_back({gauss(rng), gauss(rng), gauss(rng), gauss(rng)});
      d.labels.push_back({i % 3});
      d.edges.push_back({i, (i + 1) % 10, i % 2});
    }
    d.split.assign(10, SplitRole::Train);
    d.split[8] = SplitRole::Val;
    d.split[9] = SplitRole::Test;
    HeteroGraph g(d);
    const auto dir = testsupport::scratch_dir("cli_memorize");
    save_dataset(g, dir / "data");

    auto cfg = ModelConfig::uniform(2, 16);
    cfg.edge_dim = 4;
    auto params = init_params(g, cfg);
    auto trainable = params.trainable();
    const auto labels = g.label_matrix();
    const auto train_nodes = g.nodes_in(SplitRole::Train);
    TrainConfig tc;
    tc.lr = 0.02;
    AdamState adam;
    double last = 0;
    for (int step = 0; step < 400; ++step) {
      ad::Tape tape;
      auto fwd = forward(tape, g, params, cfg);
      auto l = loss(tape, fwd.probs, labels, g.num_classes(), train_nodes, trainable, cfg);
      last = l.item();
      for (auto& p : trainable) p.tensor.zero_grad();
      tape.backward(l);
      adam_step(trainable, adam, tc);
    }
    CHECK(last < 0.05);
    Checkpoint ck{cfg, params,
                  {{"split", {{"mode", "file"}, {"train_frac", 0.8}, {"val_frac", 0.1}, {"test_frac", 0.1}, {"seed", 0}}}}};
    save_checkpoint(ck, dir / "ck.json");
    const auto r = run_cli({"eval", "--data", (dir / "data").string(), "--checkpoint", (dir / "ck.json").string()});
    REQUIRE(r.code == 0);
    CHECK(json::parse(r.out).at("train").at("micro_f1") == 1.0);
    std::filesystem::remove_all(dir);
  }

  TEST_CASE("generate writes a loadable dataset") {
    const auto dir = testsupport::scratch_dir("cli_generate");
    const auto r = run_cli({"generate", "--out", (dir / "g").string(), "--nodes", "90", "--with-split"});
    REQUIRE(r.code == 0);
    const auto g = load_dataset(dir / "g");
    CHECK(g.num_nodes() == 90);
    CHECK(g.has_split());
    std::filesystem::remove_all(dir);
  }
}
