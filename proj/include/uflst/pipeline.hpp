#pragma once

#include <cstddef>
#include <cstdint>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include "uflst/clustering.hpp"
#include "uflst/config.hpp"
#include "uflst/data_io.hpp"
#include "uflst/evaluation.hpp"
#include "uflst/network.hpp"

namespace uflst {

// Stream tags for derive_seed(seed, round, tag).
enum SeedPurpose : std::uint64_t {
  kSeedInit = 1,
  kSeedEpisodes = 2,
  kSeedEval = 3,
  kSeedSubsample = 4,
};

// Timestamped run log; also echoes to stderr unless quiet.
class RunLog {
 public:
  RunLog() = default;
  explicit RunLog(const std::string& path, bool echo = false);
  void info(const std::string& msg);
  void warn(const std::string& msg);
  const std::vector<std::string>& warnings() const noexcept { return warnings_; }

 private:
  void write(const char* level, const std::string& msg);
  std::ofstream file_;
  bool echo_ = false;
  std::vector<std::string> warnings_;
};

struct ClusteringOutcome {
  PseudoLabeledSet pl;
  double epsilon = 0.0;
  std::size_t min_points = 0;
  int fallback_rung = 0;  // 0 none, 1 widened epsilon, 2 lowered ms
  bool degenerate = false;
};

// Embeds every point with `params`, builds KRJD, picks epsilon and runs
// DBSCAN. Empty results walk the fallback ladder: epsilon x1.5 up to three
// times, then ms halved down to 2; past that a kRoundFailed error.
ClusteringOutcome run_clustering_phase(const ModelParams& params, const Matrix& features,
                                       const TrainConfig& cfg, RunLog* log = nullptr);

struct EpisodicOutcome {
  std::optional<double> mean_loss;
  std::size_t way = 0;       // 0 when the round was not trained
  std::size_t episodes = 0;  // S actually run
};

// S episodes of forward / loss / backward / Adam on the kept points.
EpisodicOutcome run_episodic_phase(ModelParams& params, const Matrix& features,
                                   const PseudoLabeledSet& pl, const TrainConfig& cfg, int round,
                                   RunLog* log = nullptr);

// Read-only access to ground truth and heldout data for reporting. Nothing
// here flows back into training.
class Evaluator {
 public:
  Evaluator(std::vector<int> train_truth, std::optional<Dataset> test, FewShotProtocol protocol,
            std::uint64_t seed);
  void observe_clustering(const PseudoLabeledSet& pl, RoundMetrics& m) const;
  // Same episodes for every call.
  std::optional<AccuracyResult> accuracy(const ModelParams& params) const;

 private:
  std::vector<int> train_truth_;
  std::optional<Dataset> test_;
  FewShotProtocol protocol_;
  std::uint64_t seed_;
};

struct RunOptions {
  std::string run_dir;          // empty: nothing written
  std::string resume_from;      // checkpoint path
  bool echo_log = false;
};

struct RunResult {
  ModelParams params;
  std::vector<RoundMetrics> history;
  std::optional<AccuracyResult> untrained_accuracy;
  std::vector<std::string> warnings;
};

// T rounds of clustering + episodic training. Writes config.json,
// run_meta.json, metrics.csv, checkpoints/, pseudo_labels/, final_model.ckpt
// and run.log under run_dir.
RunResult run_training(const TrainConfig& cfg, const Matrix& features, const Evaluator* evaluator,
                       const RunOptions& options);

struct LoadedData {
  Dataset train;
  std::optional<Dataset> test;
};

// Synthetic generation or file loading, then the optional train subsample.
LoadedData load_data(const TrainConfig& cfg);

// Everything the `train` command does: load data, build the evaluator, run.
RunResult train_from_config(const TrainConfig& cfg, const RunOptions& options);

}  // namespace uflst
