#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "uflst/metric_space.hpp"

namespace uflst {

enum class EpsilonRule {
  kGlobalSmallest,    // mean of the P smallest upper-triangle entries
  kPerPointMinimum,   // mean of the P smallest per-point nearest distances
};

EpsilonRule epsilon_rule_from_string(const std::string& name);
const char* to_string(EpsilonRule r) noexcept;

struct DbscanConfig {
  std::size_t min_points = 4;  // ms, self included
  // P as an absolute count; when 0, `smallest_fraction` of the N(N-1)/2
  // upper-triangle entries is used instead.
  std::size_t smallest_count = 0;
  double smallest_fraction = 0.02;
  std::optional<double> epsilon_override;
  EpsilonRule epsilon_rule = EpsilonRule::kGlobalSmallest;

  void validate() const;
  // Resolved P for a problem of n points (at least 1, at most the pair count).
  std::size_t resolve_p(std::size_t n) const;
};

struct EpsilonChoice {
  double epsilon = 0.0;
  bool degenerate = false;  // every averaged distance was 0
};

EpsilonChoice select_epsilon(const JaccardMatrix& j, std::size_t p,
                             EpsilonRule rule = EpsilonRule::kGlobalSmallest);

inline constexpr int kNoise = -1;

// DBSCAN over a precomputed distance matrix. A point is core when at least
// `min_points` points (itself included) lie within distance <= epsilon.
// Clusters are seeded in ascending index order and fully expanded before the
// next seed, so a border point joins the first cluster that reaches it.
std::vector<int> dbscan_fit(const Matrix& distances, double epsilon, std::size_t min_points);

struct PseudoLabeledSet {
  std::vector<std::size_t> kept_indices;
  std::vector<int> labels;  // parallel to kept_indices, 0..num_clusters-1
  std::size_t num_clusters = 0;
  std::vector<std::size_t> outlier_indices;

  std::size_t total() const noexcept { return kept_indices.size() + outlier_indices.size(); }
  // Original dataset indices for every label, in ascending index order.
  std::vector<std::vector<std::size_t>> members_by_label() const;
  // Label per original index, kNoise for outliers.
  std::vector<int> dense_labels() const;
};

// Drops noise points and relabels clusters 0..C-1 by first appearance.
// Throws kEmptyClustering when no cluster survives.
PseudoLabeledSet build_pseudo_labeled_set(const std::vector<int>& raw_labels);

// CSV with header `index,pseudo_label,round`; outliers carry -1.
void write_pseudo_labels_csv(const std::string& path, const PseudoLabeledSet& pl, int round);

}  // namespace uflst
