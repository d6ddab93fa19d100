#include "uflst/cli.hpp"

#include <cstdio>
#include <filesystem>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "uflst/checkpoint.hpp"
#include "uflst/config.hpp"
#include "uflst/error.hpp"
#include "uflst/gradient_suite.hpp"
#include "uflst/metric_space.hpp"
#include "uflst/pipeline.hpp"

namespace uflst {

namespace {

struct ConfigFlags {
  std::string path;
  std::vector<std::string> sets;
  std::string preset;

  void attach(CLI::App* cmd) {
    cmd->add_option("-c,--config", path, "JSON config file");
    cmd->add_option("-s,--set", sets, "override as dotted.key=value")->take_all();
    cmd->add_option("--preset", preset,
                    "loss preset: hard_triplet | triplet | soft_margin_triplet | prototype");
  }

  TrainConfig resolve() const {
    TrainConfig cfg;
    if (!path.empty()) {
      require(std::filesystem::exists(path), ErrorKind::kConfig, "config file not found: " + path);
      cfg = load_config(path);
    }
    if (!preset.empty()) cfg.use_loss(loss_kind_from_string(preset));
    apply_overrides(cfg, sets);
    return cfg;
  }
};

std::string num(double v, const char* f = "%.6f") {
  char buf[40];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

int cmd_train(const ConfigFlags& flags, const std::string& run_dir, const std::string& resume,
              bool quiet, std::ostream& out) {
  const TrainConfig cfg = flags.resolve();
  RunOptions opt;
  opt.run_dir = run_dir;
  opt.resume_from = resume;
  opt.echo_log = !quiet;
  const RunResult r = train_from_config(cfg, opt);
  if (r.untrained_accuracy) out << "untrained accuracy " << num(r.untrained_accuracy->mean) << "\n";
  if (!r.history.empty()) {
    const RoundMetrics& m = r.history.back();
    out << "round " << m.round << " clusters " << m.num_clusters << " outliers " << m.num_outliers;
    if (m.nmi) out << " nmi " << num(*m.nmi);
    if (m.accuracy) out << " accuracy " << num(*m.accuracy);
    out << "\n";
  }
  for (const std::string& w : r.warnings) out << "warning: " << w << "\n";
  out << "run directory " << run_dir << "\n";
  return 0;
}

int cmd_cluster(const ConfigFlags& flags, const std::string& checkpoint, const std::string& csv,
                const std::string& dump, int round, std::ostream& out) {
  const TrainConfig cfg = flags.resolve();
  const Checkpoint ckpt = load_checkpoint(checkpoint);
  LoadedData data = load_data(cfg);
  const ClusteringOutcome cl = run_clustering_phase(ckpt.params, data.train.features, cfg);
  write_pseudo_labels_csv(csv, cl.pl, round);
  if (!dump.empty()) {
    const Matrix emb = embed(ckpt.params, data.train.features);
    write_jaccard_dump(dump, krjd(emb, cfg.metric_k));
  }
  out << "clusters " << cl.pl.num_clusters << " outliers " << cl.pl.outlier_indices.size()
      << " epsilon " << num(cl.epsilon, "%.6g") << " ms " << cl.min_points;
  if (cl.fallback_rung > 0) out << " fallback_rung " << cl.fallback_rung;
  if (data.train.labels) {
    const RoundMetrics m = cluster_stats(cl.pl, *data.train.labels);
    if (m.nmi) out << " nmi " << num(*m.nmi);
  }
  out << "\n";
  return 0;
}

int cmd_eval(const ConfigFlags& flags, const std::string& checkpoint, std::ostream& out) {
  const TrainConfig cfg = flags.resolve();
  const Checkpoint ckpt = load_checkpoint(checkpoint);
  LoadedData data = load_data(cfg);
  require(data.test && data.test->labels, ErrorKind::kConfig, "eval needs a labeled test source");
  const Evaluator evaluator({}, std::move(data.test), cfg.eval.protocol, cfg.seed);
  const AccuracyResult acc = *evaluator.accuracy(ckpt.params);
  const FewShotProtocol& p = cfg.eval.protocol;
  out << "accuracy " << num(acc.mean) << " +- " << num(acc.std) << " (" << p.way << "-way "
      << p.shots << "-shot, " << acc.episodes << " episodes)\n";
  return 0;
}

int cmd_gradcheck(std::size_t batches, std::uint64_t seed, std::ostream& out) {
  bool ok = true;
  for (const SuiteEntry& e : run_gradient_suite(batches, seed)) {
    out << to_string(e.kind) << " max_rel_error " << num(e.max_relative_error, "%.3e")
        << " raw " << num(e.max_relative_error_raw, "%.3e") << " batches " << e.batches
        << " checked " << e.checked << " below_resolution " << e.below_resolution << " skipped "
        << e.skipped_at_kinks << "\n";
    ok = ok && e.max_relative_error < 1e-4;
  }
  return ok ? 0 : 1;
}

int cmd_synth(const ConfigFlags& flags, const std::string& dir, std::ostream& out) {
  const TrainConfig cfg = flags.resolve();
  auto [train, test] = generate_synthetic(cfg.data.synthetic);
  const std::filesystem::path base(dir);
  write_raw64((base / "train.raw64").string(), train.features);
  write_labels((base / "train.labels").string(), *train.labels);
  write_raw64((base / "test.raw64").string(), test.features);
  write_labels((base / "test.labels").string(), *test.labels);
  out << "train " << train.size() << "x" << train.dim() << ", test " << test.size() << "x"
      << test.dim() << " written to " << dir << "\n";
  return 0;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"uflst: unsupervised few-shot training by alternating clustering and episodes"};
  app.require_subcommand(1);

  ConfigFlags train_flags, cluster_flags, eval_flags, synth_flags;
  std::string run_dir, resume, checkpoint, csv, dump, synth_dir;
  bool quiet = false;
  int round = 0;
  std::size_t batches = 20;
  std::uint64_t seed = 0;

  CLI::App* train = app.add_subcommand("train", "run the alternating training loop");
  train_flags.attach(train);
  train->add_option("-o,--run-dir", run_dir, "output directory")->required();
  train->add_option("--resume", resume, "checkpoint to continue from");
  train->add_flag("-q,--quiet", quiet, "do not echo the run log");

  CLI::App* cluster = app.add_subcommand("cluster", "one clustering phase with a checkpoint");
  cluster_flags.attach(cluster);
  cluster->add_option("--checkpoint", checkpoint, "model checkpoint")->required();
  cluster->add_option("--out", csv, "pseudo-label CSV")->required();
  cluster->add_option("--jaccard-dump", dump, "also write the KRJD matrix");
  cluster->add_option("--round", round, "round number stored in the CSV");

  CLI::App* eval = app.add_subcommand("eval", "few-shot accuracy of a checkpoint");
  eval_flags.attach(eval);
  eval->add_option("--checkpoint", checkpoint, "model checkpoint")->required();

  CLI::App* grad = app.add_subcommand("gradcheck", "finite-difference gradient suite");
  grad->add_option("--batches", batches, "random batches per loss")->check(CLI::PositiveNumber);
  grad->add_option("--seed", seed, "suite seed");

  CLI::App* synth = app.add_subcommand("synth", "write the synthetic dataset as raw64 files");
  synth_flags.attach(synth);
  synth->add_option("-o,--out", synth_dir, "output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n" << app.help();
    return 2;
  }

  try {
    if (*train) return cmd_train(train_flags, run_dir, resume, quiet, out);
    if (*cluster) return cmd_cluster(cluster_flags, checkpoint, csv, dump, round, out);
    if (*eval) return cmd_eval(eval_flags, checkpoint, out);
    if (*grad) return cmd_gradcheck(batches, seed, out);
    if (*synth) return cmd_synth(synth_flags, synth_dir, out);
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return e.kind() == ErrorKind::kConfig ? 2 : 1;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}

}  // namespace uflst
