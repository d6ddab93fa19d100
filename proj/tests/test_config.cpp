#include <fstream>
#include <string>

#include "doctest.h"
#include "test_util.hpp"
#include "uflst/config.hpp"

using namespace uflst;

TEST_CASE("defaults follow the hard-triplet preset") {
  const TrainConfig cfg;
  CHECK(cfg.rounds == 20);
  CHECK(cfg.epochs_per_round == 50);
  CHECK(cfg.loss.kind == LossKind::kHardTriplet);
  CHECK(cfg.loss.margin == 0.5);
  CHECK(cfg.episodes.batch_size() == 128);
  CHECK(cfg.optimizer.learning_rate == 0.005);
  CHECK(cfg.dbscan.min_points == 4);
  CHECK(cfg.metric_k == 20);
  CHECK_NOTHROW(cfg.validate());
  CHECK(cfg.model.layer_dims(32) == std::vector<std::size_t>{32, 64, 64, 16});
}

TEST_CASE("json text round trip") {
  TrainConfig cfg;
  cfg.rounds = 3;
  cfg.episodes_per_round = 17;
  cfg.dbscan.epsilon_override = 0.25;
  cfg.data.synthetic.stretch = 2.5;
  cfg.use_loss(LossKind::kPrototype);
  const TrainConfig back = config_from_json_text(to_json_text(cfg));
  CHECK(to_json_text(back) == to_json_text(cfg));
  CHECK(back.rounds == 3);
  CHECK(*back.episodes_per_round == 17);
  CHECK(*back.dbscan.epsilon_override == 0.25);
  CHECK(back.episodes.mode == EpisodeMode::kPrototype);
  CHECK(back.episodes.way_train == 60);
}

TEST_CASE("partial documents keep defaults") {
  const TrainConfig cfg = config_from_json_text(R"({"rounds": 4, "loss": {"margin": 0.3}})");
  CHECK(cfg.rounds == 4);
  CHECK(cfg.loss.margin == 0.3);
  CHECK(cfg.epochs_per_round == 50);
}

TEST_CASE("unknown keys and bad values are config errors") {
  CHECK(testutil::error_kind([] { config_from_json_text(R"({"roundz": 4})"); }) == ErrorKind::kConfig);
  CHECK(testutil::error_kind([] { config_from_json_text(R"({"loss": {"kind": "triplet", "extra": 1}})"); }) ==
        ErrorKind::kConfig);
  CHECK(testutil::error_kind([] { config_from_json_text(R"({"rounds": "many"})"); }) == ErrorKind::kConfig);
  CHECK(testutil::error_kind([] { config_from_json_text("{not json"); }) == ErrorKind::kConfig);
  CHECK(testutil::error_kind([] { config_from_json_text(R"({"loss": {"kind": "prototype"}})"); }) ==
        ErrorKind::kConfig);
}

TEST_CASE("dotted overrides") {
  TrainConfig cfg;
  apply_overrides(cfg, {"rounds=7", "dbscan.P_fraction=0.01", "loss.kind=triplet", "data.train.source=none",
                        "model.hidden=[8,8,8]"});
  CHECK(cfg.rounds == 7);
  CHECK(cfg.dbscan.smallest_fraction == 0.01);
  CHECK(cfg.loss.kind == LossKind::kTriplet);
  CHECK(cfg.data.train.source == "none");
  CHECK(cfg.model.hidden == std::vector<std::size_t>{8, 8, 8});
  CHECK(testutil::error_kind([&] { apply_override(cfg, "dbscan.nope=1"); }) == ErrorKind::kConfig);
  CHECK(testutil::error_kind([&] { apply_override(cfg, "rounds"); }) == ErrorKind::kConfig);
}

TEST_CASE("overrides are validated together") {
  TrainConfig cfg;
  // Each assignment alone breaks the loss/episode coupling; together they are consistent.
  apply_overrides(cfg, {"loss.kind=prototype", "episodes.mode=prototype", "episodes.way_train=60",
                        "episodes.examples_per_class=4", "episodes.support_shots=1", "episodes.query_shots=3"});
  CHECK(cfg.loss.kind == LossKind::kPrototype);
  TrainConfig other;
  CHECK(testutil::error_kind([&] { apply_overrides(other, {"loss.kind=prototype"}); }) == ErrorKind::kConfig);
}

TEST_CASE("missing config file names the path") {
  try {
    load_config("/nonexistent/uflst.json");
    FAIL("no error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::kConfig);
    CHECK(std::string(e.what()).find("/nonexistent/uflst.json") != std::string::npos);
  }
  const std::string dir = testutil::scratch_dir("cfg");
  std::ofstream(dir + "/c.json") << R"({"seed": 9})";
  CHECK(load_config(dir + "/c.json").seed == 9);
}

TEST_CASE("validation of coupled fields") {
  TrainConfig cfg;
  cfg.eval.protocol.way = 10;
  CHECK(testutil::error_kind([&] { cfg.validate(); }) == ErrorKind::kConfig);
  cfg = TrainConfig{};
  cfg.rounds = 0;
  CHECK(testutil::error_kind([&] { cfg.validate(); }) == ErrorKind::kConfig);
  cfg = TrainConfig{};
  cfg.data.train_fraction = 0.0;
  CHECK(testutil::error_kind([&] { cfg.validate(); }) == ErrorKind::kConfig);
}
