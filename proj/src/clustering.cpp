#include "uflst/clustering.hpp"

#include <algorithm>
#include <deque>
#include <sstream>
#include <unordered_map>

#include "uflst/binary_io.hpp"
#include "uflst/error.hpp"

namespace uflst {

EpsilonRule epsilon_rule_from_string(const std::string& name) {
  if (name == "global") return EpsilonRule::kGlobalSmallest;
  if (name == "per_point") return EpsilonRule::kPerPointMinimum;
  fail(ErrorKind::kConfig, "unknown epsilon rule '" + name + "'");
}

const char* to_string(EpsilonRule r) noexcept {
  return r == EpsilonRule::kGlobalSmallest ? "global" : "per_point";
}

void DbscanConfig::validate() const {
  require(min_points >= 1, ErrorKind::kConfig, "dbscan.ms must be >= 1");
  require(smallest_count >= 1 || (smallest_fraction > 0.0 && smallest_fraction <= 1.0),
          ErrorKind::kConfig, "dbscan P must be a positive count or a fraction in (0, 1]");
  if (epsilon_override) {
    require(*epsilon_override >= 0.0, ErrorKind::kConfig, "epsilon override must be >= 0");
  }
}

std::size_t DbscanConfig::resolve_p(std::size_t n) const {
  const std::size_t pairs = n < 2 ? 0 : n * (n - 1) / 2;
  std::size_t p = smallest_count;
  if (p == 0) p = static_cast<std::size_t>(smallest_fraction * static_cast<double>(pairs));
  return std::clamp<std::size_t>(p, 1, std::max<std::size_t>(pairs, 1));
}

EpsilonChoice select_epsilon(const JaccardMatrix& j, std::size_t p, EpsilonRule rule) {
  const std::size_t n = j.values.rows();
  require(n >= 2, ErrorKind::kContractViolation, "epsilon selection needs at least two points");
  require(p >= 1, ErrorKind::kContractViolation, "P must be positive");
  std::vector<double> pool;
  if (rule == EpsilonRule::kGlobalSmallest) {
    require(p <= n * (n - 1) / 2, ErrorKind::kContractViolation,
            "P exceeds the number of point pairs");
    pool.reserve(n * (n - 1) / 2);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t k = i + 1; k < n; ++k) pool.push_back(j.values(i, k));
  } else {
    require(p <= n, ErrorKind::kContractViolation, "P exceeds the number of points");
    pool.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
      double best = 1.0;
      for (std::size_t k = 0; k < n; ++k)
        if (k != i) best = std::min(best, j.values(i, k));
      pool.push_back(best);
    }
  }
  std::partial_sort(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(p), pool.end());
  double sum = 0.0;
  for (std::size_t i = 0; i < p; ++i) sum += pool[i];
  EpsilonChoice out;
  out.epsilon = sum / static_cast<double>(p);
  out.degenerate = pool[p - 1] == 0.0;
  return out;
}

std::vector<int> dbscan_fit(const Matrix& distances, double epsilon, std::size_t min_points) {
  const std::size_t n = distances.rows();
  require(distances.cols() == n, ErrorKind::kContractViolation, "distance matrix must be square");
  require(epsilon >= 0.0, ErrorKind::kContractViolation, "epsilon must be >= 0");

  std::vector<std::vector<std::size_t>> region(n);
  for (std::size_t i = 0; i < n; ++i) {
    auto row = distances.row(i);
    for (std::size_t k = 0; k < n; ++k)
      if (row[k] <= epsilon || k == i) region[i].push_back(k);
  }
  auto is_core = [&](std::size_t i) { return region[i].size() >= min_points; };

  constexpr int kUnvisited = -2;
  std::vector<int> labels(n, kUnvisited);
  int next_cluster = 0;
  for (std::size_t seed = 0; seed < n; ++seed) {
    if (labels[seed] != kUnvisited) continue;
    if (!is_core(seed)) {
      labels[seed] = kNoise;  // may later become a border point
      continue;
    }
    const int c = next_cluster++;
    labels[seed] = c;
    std::deque<std::size_t> frontier(region[seed].begin(), region[seed].end());
    while (!frontier.empty()) {
      const std::size_t q = frontier.front();
      frontier.pop_front();
      if (labels[q] == kNoise) labels[q] = c;
      if (labels[q] != kUnvisited) continue;
      labels[q] = c;
      if (is_core(q)) frontier.insert(frontier.end(), region[q].begin(), region[q].end());
    }
  }
  return labels;
}

std::vector<std::vector<std::size_t>> PseudoLabeledSet::members_by_label() const {
  std::vector<std::vector<std::size_t>> out(num_clusters);
  for (std::size_t i = 0; i < kept_indices.size(); ++i) {
    out[static_cast<std::size_t>(labels[i])].push_back(kept_indices[i]);
  }
  for (auto& m : out) std::sort(m.begin(), m.end());
  return out;
}

std::vector<int> PseudoLabeledSet::dense_labels() const {
  std::vector<int> out(total(), kNoise);
  for (std::size_t i = 0; i < kept_indices.size(); ++i) out[kept_indices[i]] = labels[i];
  return out;
}

PseudoLabeledSet build_pseudo_labeled_set(const std::vector<int>& raw_labels) {
  PseudoLabeledSet pl;
  std::unordered_map<int, int> remap;
  for (std::size_t i = 0; i < raw_labels.size(); ++i) {
    const int raw = raw_labels[i];
    if (raw < 0) {
      pl.outlier_indices.push_back(i);
      continue;
    }
    auto [it, inserted] = remap.try_emplace(raw, static_cast<int>(remap.size()));
    pl.kept_indices.push_back(i);
    pl.labels.push_back(it->second);
  }
  pl.num_clusters = remap.size();
  require(pl.num_clusters > 0, ErrorKind::kEmptyClustering, "every point was marked as noise");
  return pl;
}

void write_pseudo_labels_csv(const std::string& path, const PseudoLabeledSet& pl, int round) {
  std::ostringstream out;
  out << "index,pseudo_label,round\n";
  const std::vector<int> dense = pl.dense_labels();
  for (std::size_t i = 0; i < dense.size(); ++i) out << i << ',' << dense[i] << ',' << round << '\n';
  binary::write_atomically(path, out.str());
}

}  // namespace uflst
