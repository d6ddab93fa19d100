#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "uflst/clustering.hpp"
#include "uflst/matrix.hpp"
#include "uflst/network.hpp"
#include "uflst/rng.hpp"

namespace uflst {

// I(a,b) / sqrt(H(a) H(b)) with natural logs. When an entropy is zero the
// result is 1 for identical partitions and 0 otherwise.
double nmi(std::span<const int> a, std::span<const int> b);

struct FewShotProtocol {
  std::size_t way = 5;
  std::size_t shots = 1;
  std::size_t queries = 15;  // per class
  std::size_t episodes = 600;

  void validate() const;
};

struct AccuracyResult {
  double mean = 0.0;
  double std = 0.0;  // population std over episodes
  std::size_t episodes = 0;
};

// Episode k draws `way` classes and shots+queries members per class from the
// test labels; each query goes to the nearest prototype.
struct EvalEpisode {
  std::vector<std::vector<std::size_t>> support;  // per class
  std::vector<std::vector<std::size_t>> query;
};

std::vector<EvalEpisode> sample_eval_episodes(std::span<const int> labels,
                                              const FewShotProtocol& protocol, Rng& rng);

// Fraction of queries whose nearest prototype is their own class.
double episode_accuracy(const Matrix& embeddings, const EvalEpisode& episode);

AccuracyResult few_shot_accuracy(const ModelParams& model, const Matrix& features,
                                 std::span<const int> labels, const FewShotProtocol& protocol,
                                 Rng& rng);

struct RoundMetrics {
  int round = 0;
  std::optional<double> nmi;
  std::size_t num_clusters = 0;
  std::size_t num_outliers = 0;
  double mean_cluster_size = 0.0;
  std::optional<double> accuracy;
  std::optional<double> accuracy_std;
  std::optional<double> mean_loss;
  double epsilon = 0.0;
  std::size_t min_points = 0;
  int fallback_rung = 0;  // 0 none, 1 widened epsilon, 2 lowered ms
  std::size_t way = 0;    // training way used, 0 when training was skipped
  std::size_t episodes = 0;

  friend bool operator==(const RoundMetrics&, const RoundMetrics&) = default;
};

// Cluster counts and NMI over kept indices. `truth` is indexed by dataset
// index; nmi stays empty when nothing was kept.
RoundMetrics cluster_stats(const PseudoLabeledSet& pl, std::span<const int> truth);

inline constexpr int kMetricsVersion = 1;

std::string metrics_header();
std::string metrics_row(const RoundMetrics& m);
void write_metrics(const std::vector<RoundMetrics>& history, const std::string& path);
std::vector<RoundMetrics> read_metrics(const std::string& path);

// Pearson correlation; empty when either side is constant or sizes < 2.
std::optional<double> pearson(std::span<const double> x, std::span<const double> y);

}  // namespace uflst
