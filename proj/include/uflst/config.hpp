#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "uflst/clustering.hpp"
#include "uflst/data_io.hpp"
#include "uflst/episodes.hpp"
#include "uflst/evaluation.hpp"
#include "uflst/losses.hpp"
#include "uflst/network.hpp"
#include "uflst/optimizer.hpp"

namespace uflst {

struct ModelConfig {
  std::vector<std::size_t> hidden{64, 64};
  std::size_t output_dim = 16;
  Activation activation = Activation::kRelu;

  std::vector<std::size_t> layer_dims(std::size_t input_dim) const;
};

struct DataSource {
  std::string source = "synthetic";  // synthetic | raw64 | dsv | idx
  std::string path;
  std::string labels_path;
  std::string delimiter = ",";
  bool label_column = false;
};

struct DataConfig {
  DataSource train;
  DataSource test;
  SyntheticSpec synthetic;
  double train_fraction = 1.0;  // uniform row subsample of the training set
};

struct EvalConfig {
  FewShotProtocol protocol;
  bool every_round = true;
};

struct TrainConfig {
  std::size_t rounds = 20;
  std::size_t epochs_per_round = 50;
  std::optional<std::size_t> episodes_per_round;
  std::uint64_t seed = 0;
  std::size_t metric_k = 20;
  bool reset_optimizer = false;
  ModelConfig model;
  OptimizerConfig optimizer;
  DbscanConfig dbscan;
  EpisodeConfig episodes = EpisodeConfig::triplet_preset();
  LossConfig loss;
  EvalConfig eval;
  DataConfig data;

  void validate() const;

  // Switches loss and episode layout together: prototype loss gets the
  // 60-way split preset, the triplet losses the 32 x 4 preset.
  void use_loss(LossKind kind);
};

// Key-value text (JSON) with nested sections. Unknown keys are rejected.
std::string to_json_text(const TrainConfig& cfg);
TrainConfig config_from_json_text(const std::string& text, const std::string& origin = "config");
TrainConfig load_config(const std::string& path);

// `dotted.key=value`; the value is read as JSON, falling back to a string.
void apply_override(TrainConfig& cfg, const std::string& assignment);
void apply_overrides(TrainConfig& cfg, const std::vector<std::string>& assignments);

}  // namespace uflst
