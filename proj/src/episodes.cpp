#include "uflst/episodes.hpp"

#include "uflst/error.hpp"

namespace uflst {

EpisodeMode episode_mode_from_string(const std::string& name) {
  if (name == "prototype") return EpisodeMode::kPrototype;
  if (name == "triplet") return EpisodeMode::kTriplet;
  fail(ErrorKind::kConfig, "unknown episode mode '" + name + "'");
}

const char* to_string(EpisodeMode m) noexcept {
  return m == EpisodeMode::kPrototype ? "prototype" : "triplet";
}

void EpisodeConfig::validate() const {
  require(way_train >= 2 && way_test >= 2, ErrorKind::kConfig, "episode way must be >= 2");
  if (mode == EpisodeMode::kPrototype) {
    require(support_shots >= 1 && query_shots >= 1, ErrorKind::kConfig,
            "prototype episodes need n_s >= 1 and n_q >= 1");
    require(examples_per_class == support_shots + query_shots, ErrorKind::kConfig,
            "prototype episodes need n_e = n_s + n_q");
  } else {
    require(examples_per_class >= 2, ErrorKind::kConfig, "triplet episodes need n_e >= 2");
  }
}

EpisodeConfig EpisodeConfig::triplet_preset() {
  EpisodeConfig c;
  c.way_train = 32;
  c.way_test = 5;
  c.examples_per_class = 4;
  c.mode = EpisodeMode::kTriplet;
  return c;
}

EpisodeConfig EpisodeConfig::prototype_preset(std::size_t test_shots, std::size_t test_way) {
  EpisodeConfig c;
  c.way_train = 60;
  c.way_test = test_way;
  c.support_shots = test_shots;
  c.query_shots = 3;
  c.examples_per_class = c.support_shots + c.query_shots;
  c.mode = EpisodeMode::kPrototype;
  return c;
}

FeasibilityReport check_feasibility(const PseudoLabeledSet& pl, const EpisodeConfig& cfg) {
  FeasibilityReport r;
  r.required = cfg.way_train;
  std::vector<std::size_t> counts(pl.num_clusters, 0);
  for (int l : pl.labels) ++counts[static_cast<std::size_t>(l)];
  for (std::size_t c = 0; c < counts.size(); ++c)
    if (counts[c] >= cfg.examples_per_class) r.eligible_labels.push_back(static_cast<int>(c));
  r.feasible = r.eligible_labels.size() >= r.required;
  return r;
}

std::vector<std::size_t> EpisodicTask::flat_indices() const {
  std::vector<std::size_t> out;
  for (const auto& m : members) out.insert(out.end(), m.begin(), m.end());
  return out;
}

std::vector<int> EpisodicTask::flat_classes() const {
  std::vector<int> out;
  for (std::size_t c = 0; c < members.size(); ++c) out.insert(out.end(), members[c].size(), static_cast<int>(c));
  return out;
}

std::vector<std::size_t> EpisodicTask::support(std::size_t c) const {
  require(split, ErrorKind::kContractViolation, "task has no support/query split");
  return {members[c].begin(), members[c].begin() + static_cast<std::ptrdiff_t>(support_shots)};
}

std::vector<std::size_t> EpisodicTask::query(std::size_t c) const {
  require(split, ErrorKind::kContractViolation, "task has no support/query split");
  return {members[c].begin() + static_cast<std::ptrdiff_t>(support_shots), members[c].end()};
}

EpisodicTask sample_episode(const PseudoLabeledSet& pl, const EpisodeConfig& cfg, Rng& rng,
                            std::size_t way) {
  if (way == 0) way = cfg.way_train;
  EpisodeConfig effective = cfg;
  effective.way_train = way;
  const FeasibilityReport feas = check_feasibility(pl, effective);
  require(feas.feasible, ErrorKind::kEpisodeInfeasible,
          std::to_string(feas.eligible_labels.size()) + " classes have at least " +
              std::to_string(cfg.examples_per_class) + " members, " + std::to_string(way) +
              " required");
  const auto by_label = pl.members_by_label();
  EpisodicTask task;
  for (std::size_t pick : rng.sample_without_replacement(feas.eligible_labels.size(), way)) {
    const int label = feas.eligible_labels[pick];
    const auto& pool = by_label[static_cast<std::size_t>(label)];
    std::vector<std::size_t> chosen;
    for (std::size_t k : rng.sample_without_replacement(pool.size(), cfg.examples_per_class)) {
      chosen.push_back(pool[k]);
    }
    task.class_ids.push_back(label);
    task.members.push_back(std::move(chosen));
  }
  return task;
}

EpisodicTask split_support_query(EpisodicTask task, const EpisodeConfig& cfg) {
  require(cfg.mode == EpisodeMode::kPrototype, ErrorKind::kContractViolation,
          "support/query split only applies to prototype episodes");
  require(cfg.support_shots >= 1 && cfg.query_shots >= 1 &&
              cfg.support_shots + cfg.query_shots == cfg.examples_per_class,
          ErrorKind::kContractViolation, "split needs n_s >= 1, n_q >= 1 and n_s + n_q = n_e");
  for (const auto& m : task.members) {
    require(m.size() == cfg.examples_per_class, ErrorKind::kContractViolation,
            "class member count differs from n_e");
  }
  task.split = true;
  task.support_shots = cfg.support_shots;
  return task;
}

}  // namespace uflst
