#include "uflst/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <iostream>

#include "json.hpp"
#include "uflst/binary_io.hpp"
#include "uflst/checkpoint.hpp"
#include "uflst/episodes.hpp"
#include "uflst/error.hpp"
#include "uflst/kernels.hpp"
#include "uflst/losses.hpp"
#include "uflst/metric_space.hpp"
#include "uflst/optimizer.hpp"
#include "uflst/parallel.hpp"
#include "uflst/rng.hpp"

namespace uflst {

namespace fs = std::filesystem;

namespace {

std::string round_file(const std::string& dir, const char* sub, int round, const char* ext) {
  char name[32];
  std::snprintf(name, sizeof name, "round_%04d.%s", round, ext);
  return (fs::path(dir) / sub / name).string();
}

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

void log_info(RunLog* log, const std::string& msg) {
  if (log) log->info(msg);
}

void log_warn(RunLog* log, const std::string& msg) {
  if (log) log->warn(msg);
}

bool has_cluster(const std::vector<int>& raw) {
  return std::any_of(raw.begin(), raw.end(), [](int l) { return l != kNoise; });
}

}  // namespace

RunLog::RunLog(const std::string& path, bool echo) : file_(path, std::ios::app), echo_(echo) {
  require(static_cast<bool>(file_), ErrorKind::kIo, "cannot open log file " + path);
}

void RunLog::info(const std::string& msg) { write("info", msg); }

void RunLog::warn(const std::string& msg) {
  warnings_.push_back(msg);
  write("warning", msg);
}

void RunLog::write(const char* level, const std::string& msg) {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  char stamp[32];
  std::strftime(stamp, sizeof stamp, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&now));
  if (file_.is_open()) file_ << stamp << ' ' << level << ' ' << msg << '\n' << std::flush;
  if (echo_) std::cerr << level << ": " << msg << '\n';
}

ClusteringOutcome run_clustering_phase(const ModelParams& params, const Matrix& features,
                                       const TrainConfig& cfg, RunLog* log) {
  require(features.rows() >= 2, ErrorKind::kInput, "clustering needs at least two points");
  const Matrix emb = embed(params, features);
  const Matrix dist = pairwise_sq_euclidean(emb);
  if (*std::max_element(dist.values().begin(), dist.values().end()) == 0.0) {
    log_warn(log, "degenerate geometry: all embeddings coincide");
  }
  const NeighborSets nn = knn_sets(dist, cfg.metric_k);
  if (nn.clamped) {
    log_warn(log, "metric k=" + std::to_string(nn.k_requested) + " clamped to " + std::to_string(nn.k));
  }
  const JaccardMatrix j = jaccard_matrix(k_reciprocal_sets(nn), nn.k);

  ClusteringOutcome out;
  if (cfg.dbscan.epsilon_override) {
    out.epsilon = *cfg.dbscan.epsilon_override;
    log_info(log, "epsilon override " + fmt(out.epsilon));
  } else {
    const EpsilonChoice choice =
        select_epsilon(j, cfg.dbscan.resolve_p(features.rows()), cfg.dbscan.epsilon_rule);
    out.epsilon = choice.epsilon;
    out.degenerate = choice.degenerate;
    if (choice.degenerate) log_warn(log, "degenerate geometry: selected epsilon is 0");
  }
  out.min_points = cfg.dbscan.min_points;

  std::vector<int> raw = dbscan_fit(j.values, out.epsilon, out.min_points);
  for (int widen = 0; widen < 3 && !has_cluster(raw); ++widen) {
    out.epsilon *= 1.5;
    out.fallback_rung = 1;
    log_warn(log, "no cluster found, epsilon widened to " + fmt(out.epsilon));
    raw = dbscan_fit(j.values, out.epsilon, out.min_points);
  }
  while (!has_cluster(raw) && out.min_points > 2) {
    out.min_points = std::max<std::size_t>(2, out.min_points / 2);
    out.fallback_rung = 2;
    log_warn(log, "no cluster found, ms lowered to " + std::to_string(out.min_points));
    raw = dbscan_fit(j.values, out.epsilon, out.min_points);
  }
  if (!has_cluster(raw)) {
    fail(ErrorKind::kRoundFailed, "fallback ladder exhausted at epsilon " + fmt(out.epsilon) +
                                      ", ms " + std::to_string(out.min_points));
  }
  out.pl = build_pseudo_labeled_set(raw);
  return out;
}

EpisodicOutcome run_episodic_phase(ModelParams& params, const Matrix& features,
                                   const PseudoLabeledSet& pl, const TrainConfig& cfg, int round,
                                   RunLog* log) {
  const EpisodeConfig& ec = cfg.episodes;
  const std::size_t eligible = check_feasibility(pl, ec).eligible_labels.size();
  EpisodicOutcome out;
  if (eligible >= ec.way_train) {
    out.way = ec.way_train;
  } else if (eligible >= std::max<std::size_t>(ec.way_test, 2)) {
    out.way = eligible;
    log_info(log, "round " + std::to_string(round) + ": way reduced to " + std::to_string(eligible));
  } else {
    log_warn(log, "round " + std::to_string(round) + ": only " + std::to_string(eligible) +
                      " eligible clusters, training skipped");
    return out;
  }
  const std::size_t batch = out.way * ec.examples_per_class;
  const std::size_t per_epoch = std::max<std::size_t>(1, (pl.kept_indices.size() + batch - 1) / batch);
  const std::size_t total = cfg.episodes_per_round ? *cfg.episodes_per_round : cfg.epochs_per_round * per_epoch;

  Rng rng(derive_seed(cfg.seed, static_cast<std::uint64_t>(round), kSeedEpisodes));
  double loss_sum = 0.0;
  for (std::size_t s = 0; s < total; ++s) {
    const int epoch = static_cast<int>(s / per_epoch) + 1;
    EpisodicTask task = sample_episode(pl, ec, rng, out.way);
    if (ec.mode == EpisodeMode::kPrototype) task = split_support_query(std::move(task), ec);
    const std::vector<std::size_t> rows = task.flat_indices();
    const ForwardResult fr = forward(params, features.gather_rows(rows));
    const LossEvaluation ev = episode_loss(task, fr.output, cfg.loss);
    adam_step(params, backward(params, fr.cache, ev.grad), cfg.optimizer, epoch);
    loss_sum += ev.value;
  }
  out.episodes = total;
  if (total > 0) out.mean_loss = loss_sum / static_cast<double>(total);
  return out;
}

Evaluator::Evaluator(std::vector<int> train_truth, std::optional<Dataset> test,
                     FewShotProtocol protocol, std::uint64_t seed)
    : train_truth_(std::move(train_truth)),
      test_(std::move(test)),
      protocol_(protocol),
      seed_(seed) {}

void Evaluator::observe_clustering(const PseudoLabeledSet& pl, RoundMetrics& m) const {
  const RoundMetrics stats = cluster_stats(pl, train_truth_);
  m.nmi = stats.nmi;
  m.num_clusters = stats.num_clusters;
  m.num_outliers = stats.num_outliers;
  m.mean_cluster_size = stats.mean_cluster_size;
}

std::optional<AccuracyResult> Evaluator::accuracy(const ModelParams& params) const {
  if (!test_ || !test_->labels) return std::nullopt;
  Rng rng(derive_seed(seed_, 0, kSeedEval));
  return few_shot_accuracy(params, test_->features, *test_->labels, protocol_, rng);
}

RunResult run_training(const TrainConfig& cfg, const Matrix& features, const Evaluator* evaluator,
                       const RunOptions& options) {
  cfg.validate();
  require(features.rows() >= 2 && features.cols() >= 1, ErrorKind::kInput,
          "training needs at least two points");
  require(features.all_finite(), ErrorKind::kInput, "training features contain non-finite values");

  const bool persist = !options.run_dir.empty();
  const fs::path dir(options.run_dir);
  if (persist) {
    fs::create_directories(dir / "checkpoints");
    fs::create_directories(dir / "pseudo_labels");
    binary::write_atomically((dir / "config.json").string(), to_json_text(cfg));
  }
  RunLog log = persist ? RunLog((dir / "run.log").string(), options.echo_log) : RunLog();

  RunResult result;
  const std::vector<std::size_t> dims = cfg.model.layer_dims(features.cols());
  const ModelParams fresh = init_params(dims, derive_seed(cfg.seed, 0, kSeedInit), cfg.model.activation);
  std::uint64_t start = 0;
  if (options.resume_from.empty()) {
    result.params = fresh;
  } else {
    Checkpoint ckpt = load_checkpoint(options.resume_from);
    require(ckpt.params.layer_dims() == dims, ErrorKind::kConfig,
            "checkpoint architecture does not match the configuration");
    result.params = std::move(ckpt.params);
    start = ckpt.rounds_completed;
    if (start > 0) {
      require(persist, ErrorKind::kConfig, "resuming needs the original run directory");
      for (const RoundMetrics& m : read_metrics((dir / "metrics.csv").string()))
        if (m.round >= 1 && static_cast<std::uint64_t>(m.round) <= start) result.history.push_back(m);
      require(result.history.size() == start, ErrorKind::kFormat,
              "metrics.csv does not cover the " + std::to_string(start) + " completed rounds");
    }
    log.info("resumed from " + options.resume_from + " after round " + std::to_string(start));
  }
  if (evaluator) result.untrained_accuracy = evaluator->accuracy(fresh);

  if (persist && start == 0) {
    nlohmann::json meta;
    meta["format_version"] = 1;
    meta["kernel"] = kernels::active().name;
    meta["threads"] = thread_count();
    meta["adam_state"] = cfg.reset_optimizer ? "reset each round" : "preserved across rounds";
    meta["train_points"] = features.rows();
    meta["input_dim"] = features.cols();
    meta["parameters"] = result.params.parameter_count();
    if (result.untrained_accuracy) {
      meta["untrained_accuracy"] = result.untrained_accuracy->mean;
      meta["untrained_accuracy_std"] = result.untrained_accuracy->std;
    }
    binary::write_atomically((dir / "run_meta.json").string(), meta.dump(2) + "\n");
  }

  for (std::uint64_t t = start + 1; t <= cfg.rounds; ++t) {
    const int round = static_cast<int>(t);
    RoundMetrics m;
    m.round = round;
    ClusteringOutcome cl;
    try {
      cl = run_clustering_phase(result.params, features, cfg, &log);
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::kRoundFailed) throw;
      log.warn("round " + std::to_string(round) + " failed: " + e.what());
      if (persist) {
        save_checkpoint(round_file(options.run_dir, "checkpoints", round - 1, "ckpt"),
                        {result.params, t - 1});
        write_metrics(result.history, (dir / "metrics.csv").string());
      }
      throw;
    }
    m.epsilon = cl.epsilon;
    m.min_points = cl.min_points;
    m.fallback_rung = cl.fallback_rung;
    m.num_clusters = cl.pl.num_clusters;
    m.num_outliers = cl.pl.outlier_indices.size();
    m.mean_cluster_size = static_cast<double>(cl.pl.kept_indices.size()) /
                          static_cast<double>(cl.pl.num_clusters);
    if (evaluator) evaluator->observe_clustering(cl.pl, m);
    if (persist) write_pseudo_labels_csv(round_file(options.run_dir, "pseudo_labels", round, "csv"), cl.pl, round);

    if (cfg.reset_optimizer) reset_optimizer_state(result.params);
    const EpisodicOutcome ep = run_episodic_phase(result.params, features, cl.pl, cfg, round, &log);
    m.mean_loss = ep.mean_loss;
    m.way = ep.way;
    m.episodes = ep.episodes;
    if (evaluator && (cfg.eval.every_round || t == cfg.rounds)) {
      if (auto acc = evaluator->accuracy(result.params)) {
        m.accuracy = acc->mean;
        m.accuracy_std = acc->std;
      }
    }
    result.history.push_back(m);

    std::string line = "round " + std::to_string(round) + ": clusters " +
                       std::to_string(m.num_clusters) + ", outliers " + std::to_string(m.num_outliers) +
                       ", epsilon " + fmt(m.epsilon);
    if (m.nmi) line += ", nmi " + fmt(*m.nmi);
    if (m.mean_loss) line += ", loss " + fmt(*m.mean_loss);
    if (m.accuracy) line += ", accuracy " + fmt(*m.accuracy);
    log.info(line);

    if (persist) {
      write_metrics(result.history, (dir / "metrics.csv").string());
      save_checkpoint(round_file(options.run_dir, "checkpoints", round, "ckpt"), {result.params, t});
    }
  }
  if (persist) save_checkpoint((dir / "final_model.ckpt").string(), {result.params, cfg.rounds});
  result.warnings = log.warnings();
  return result;
}

LoadedData load_data(const TrainConfig& cfg) {
  LoadedData out;
  const DataConfig& d = cfg.data;
  std::optional<std::pair<Dataset, Dataset>> synth;
  auto synthetic = [&]() -> std::pair<Dataset, Dataset>& {
    if (!synth) synth = generate_synthetic(d.synthetic);
    return *synth;
  };
  auto load = [&](const DataSource& src, Split split) -> std::optional<Dataset> {
    if (src.source == "none") return std::nullopt;
    if (src.source == "synthetic") return split == Split::kTrain ? synthetic().first : synthetic().second;
    LoadOptions opt;
    require(src.delimiter.size() == 1, ErrorKind::kConfig, "dsv delimiter must be one character");
    opt.delimiter = src.delimiter[0];
    opt.label_column = src.label_column;
    opt.labels_path = src.labels_path;
    require(!src.path.empty(), ErrorKind::kConfig, "data path missing for source " + src.source);
    Dataset ds = load_matrix_dataset(src.path, matrix_format_from_string(src.source), opt);
    ds.split = split;
    return ds;
  };
  auto train = load(d.train, Split::kTrain);
  require(train.has_value(), ErrorKind::kConfig, "a training source is required");
  out.train = std::move(*train);
  out.test = load(d.test, Split::kTest);

  if (d.train_fraction < 1.0) {
    const std::size_t n = out.train.size();
    const auto keep = std::max<std::size_t>(
        2, static_cast<std::size_t>(std::llround(d.train_fraction * static_cast<double>(n))));
    Rng rng(derive_seed(cfg.seed, 0, kSeedSubsample));
    std::vector<std::size_t> rows = rng.sample_without_replacement(n, std::min(keep, n));
    std::sort(rows.begin(), rows.end());
    Dataset sub;
    sub.split = Split::kTrain;
    sub.features = out.train.features.gather_rows(rows);
    if (out.train.labels) {
      sub.labels.emplace();
      for (std::size_t r : rows) sub.labels->push_back((*out.train.labels)[r]);
    }
    out.train = std::move(sub);
  }
  if (out.test) {
    require(out.test->dim() == out.train.dim(), ErrorKind::kInput,
            "test features differ in width from the training features");
  }
  return out;
}

RunResult train_from_config(const TrainConfig& cfg, const RunOptions& options) {
  cfg.validate();
  LoadedData data = load_data(cfg);
  std::vector<int> truth = data.train.labels ? *data.train.labels : std::vector<int>{};
  const Evaluator evaluator(std::move(truth), std::move(data.test), cfg.eval.protocol, cfg.seed);
  return run_training(cfg, data.train.features, &evaluator, options);
}

}  // namespace uflst
