#include <doctest.h>

#include <cmath>
#include <fstream>
#include <limits>
#include <string>

#include "edgegfl/errors.hpp"
#include "edgegfl/train.hpp"
#include "support.hpp"

using namespace edgegfl;

namespace {

HeteroGraph planted_with_split(std::uint64_t seed = 1) {
  const auto g = synth_planted(PlantedSpec{});
  return g.with_split(make_split(g, SplitSpec{0.24, 0.06, 0.70, seed}));
}

}  // namespace

TEST_SUITE("train") {
  TEST_CASE("adam: zero gradient leaves parameters unchanged") {
    auto w = ad::Tensor::from(1, 3, {0.5, -1, 2}, true);
    std::vector<NamedTensor> params{{"w", w}};
    AdamState state;
    TrainConfig cfg;
    adam_step(params, state, cfg);
    CHECK(std::vector<double>(w.values().begin(), w.values().end()) == std::vector<double>{0.5, -1, 2});
  }

  TEST_CASE("adam: constant gradient gives steps of size lr") {
    auto w = ad::Tensor::from(1, 2, {0, 0}, true);
    std::vector<NamedTensor> params{{"w", w}};
    AdamState state;
    TrainConfig cfg;
    cfg.lr = 0.01;
    double last = 0;
    for (int step = 0; step < 200; ++step) {
      w.grad()[0] = 3.0;
      w.grad()[1] = -0.02;
      const double before = w.values()[0];
      adam_step(params, state, cfg);
      last = before - w.values()[0];
    }
    CHECK(std::abs(last - cfg.lr) <= 1e-3 * cfg.lr);
    CHECK(w.values()[1] > 0);
  }

  TEST_CASE("adam: non-finite gradient names the parameter and updates nothing") {
    auto a = ad::Tensor::from(1, 1, {1}, true), b = ad::Tensor::from(1, 1, {1}, true);
    std::vector<NamedTensor> params{{"layer.0.weight", a}, {"classifier", b}};
    a.grad()[0] = 1.0;
    b.grad()[0] = std::numeric_limits<double>::quiet_NaN();
    AdamState state;
    try {
      adam_step(params, state, TrainConfig{});
      FAIL("expected TrainingError");
    } catch (const TrainingError& e) {
      CHECK(std::string(e.what()).find("classifier") != std::string::npos);
    }
    CHECK(a.values()[0] == 1.0);
  }

  TEST_CASE("patience 1 with zero learning rate stops after two epochs") {
    const auto g = planted_with_split();
    auto mc = ModelConfig::uniform(1, 8);
    mc.edge_dim = 8;
    TrainConfig tc;
    tc.lr = 0.0;
    tc.patience = 1;
    const auto r = train(g, mc, tc);
    CHECK(r.history.epochs.size() == 2);
    CHECK(r.history.best_epoch == 0);
  }

  TEST_CASE("training loss strictly decreases over the first ten epochs") {
    const auto g = planted_with_split();
    auto mc = ModelConfig::uniform(2, 16);
    mc.edge_dim = 16;
    TrainConfig tc;
    tc.max_epochs = 10;
    tc.patience = 10;
    const auto r = train(g, mc, tc);
    REQUIRE(r.history.epochs.size() == 10);
    for (std::size_t e = 1; e < 10; ++e) CHECK(r.history.epochs[e].train_loss < r.history.epochs[e - 1].train_loss);
  }

  TEST_CASE("identical runs give identical trajectories and a history log") {
    const auto g = planted_with_split();
    auto mc = ModelConfig::uniform(2, 8);
    mc.edge_dim = 8;
    mc.seed = 3;
    TrainConfig tc;
    tc.lr = 0.01;
    tc.max_epochs = 15;
    const auto dir = testsupport::scratch_dir("history");
    tc.history_log = dir / "h.jsonl";
    const auto a = train(g, mc, tc);
    tc.history_log.reset();
    const auto b = train(g, mc, tc);
    REQUIRE(a.history.epochs.size() == b.history.epochs.size());
    for (std::size_t e = 0; e < a.history.epochs.size(); ++e)
      CHECK(a.history.epochs[e].train_loss == b.history.epochs[e].train_loss);
    const auto pa = a.params.all(), pb = b.params.all();
    for (std::size_t i = 0; i < pa.size(); ++i) {
      CHECK(std::vector<double>(pa[i].tensor.values().begin(), pa[i].tensor.values().end()) ==
            std::vector<double>(pb[i].tensor.values().begin(), pb[i].tensor.values().end()));
    }
    std::ifstream log(dir / "h.jsonl");
    std::size_t lines = 0;
    for (std::string line; std::getline(log, line);) ++lines;
    CHECK(lines == a.history.epochs.size());
    std::filesystem::remove_all(dir);
  }

  TEST_CASE("best snapshot reproduces the recorded validation score") {
    const auto g = planted_with_split();
    auto mc = ModelConfig::uniform(2, 8);
    mc.edge_dim = 8;
    TrainConfig tc;
    tc.lr = 0.01;
    tc.max_epochs = 40;
    const auto r = train(g, mc, tc);
    ad::Tape tape;
    const auto fwd = forward(tape, g, r.params, mc);
    const auto val = score_nodes(g, fwd.probs, g.nodes_in(SplitRole::Val), mc.loss);
    CHECK(val.micro_f1 == r.history.epochs[r.history.best_epoch].val_micro_f1);
    for (const auto& e : r.history.epochs) CHECK(e.val_micro_f1 <= val.micro_f1);
  }

  TEST_CASE("training requires train and validation nodes") {
    HeteroGraph g(testsupport::tiny_data());
    CHECK_THROWS_AS(train(g, ModelConfig::uniform(1, 4), TrainConfig{}), ContractError);
  }

  TEST_CASE("config validation") {
    TrainConfig tc;
    tc.lr = -1;
    CHECK_THROWS_AS(tc.validate(), ContractError);
    tc = TrainConfig{};
    tc.patience = 0;
    CHECK_THROWS_AS(tc.validate(), ContractError);
  }
}
