#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "uflst/clustering.hpp"
#include "uflst/rng.hpp"

namespace uflst {

enum class EpisodeMode { kPrototype, kTriplet };

EpisodeMode episode_mode_from_string(const std::string& name);
const char* to_string(EpisodeMode m) noexcept;

struct EpisodeConfig {
  std::size_t way_train = 32;  // N_C during training
  std::size_t way_test = 5;    // N_C of the evaluation protocol
  std::size_t examples_per_class = 4;  // N_E
  std::size_t support_shots = 1;       // N_S (prototype mode)
  std::size_t query_shots = 3;         // N_Q (prototype mode)
  EpisodeMode mode = EpisodeMode::kTriplet;

  void validate() const;
  std::size_t batch_size() const noexcept { return way_train * examples_per_class; }

  // 32 classes x 4 examples, no split.
  static EpisodeConfig triplet_preset();
  // 60-way training with the evaluation shot count kept for the support set.
  static EpisodeConfig prototype_preset(std::size_t test_shots = 1, std::size_t test_way = 5);
};

struct FeasibilityReport {
  std::vector<int> eligible_labels;  // labels with >= N_E members
  std::size_t required = 0;
  bool feasible = false;
};

FeasibilityReport check_feasibility(const PseudoLabeledSet& pl, const EpisodeConfig& cfg);

// One episodic task. members[c] lists dataset indices for class_ids[c]; in
// prototype mode the first `support_shots` entries form the support set.
struct EpisodicTask {
  std::vector<int> class_ids;
  std::vector<std::vector<std::size_t>> members;
  bool split = false;
  std::size_t support_shots = 0;

  std::size_t way() const noexcept { return class_ids.size(); }
  // Class-major flattening; row r of the episode batch is flat_indices()[r].
  std::vector<std::size_t> flat_indices() const;
  // Class position (0..way-1) of each flat row.
  std::vector<int> flat_classes() const;
  std::vector<std::size_t> support(std::size_t c) const;
  std::vector<std::size_t> query(std::size_t c) const;
};

// Samples `way` eligible classes uniformly without replacement, then N_E
// members of each. `way == 0` means cfg.way_train.
EpisodicTask sample_episode(const PseudoLabeledSet& pl, const EpisodeConfig& cfg, Rng& rng,
                            std::size_t way = 0);

// Marks the first N_S sampled members of each class as support, the rest as
// query. Prototype mode only.
EpisodicTask split_support_query(EpisodicTask task, const EpisodeConfig& cfg);

}  // namespace uflst
