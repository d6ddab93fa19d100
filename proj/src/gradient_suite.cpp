#include "uflst/gradient_suite.hpp"

#include <algorithm>
#include <array>

#include "uflst/episodes.hpp"
#include "uflst/network.hpp"
#include "uflst/rng.hpp"

namespace uflst {

namespace {

// way x per_class episode over consecutive rows.
EpisodicTask synthetic_task(std::size_t way, std::size_t per_class, std::size_t shots) {
  EpisodicTask task;
  std::size_t row = 0;
  for (std::size_t c = 0; c < way; ++c) {
    task.class_ids.push_back(static_cast<int>(c));
    std::vector<std::size_t> m;
    for (std::size_t i = 0; i < per_class; ++i) m.push_back(row++);
    task.members.push_back(std::move(m));
  }
  if (shots > 0) {
    task.split = true;
    task.support_shots = shots;
  }
  return task;
}

}  // namespace

std::vector<SuiteEntry> run_gradient_suite(std::size_t batches, std::uint64_t seed) {
  const std::array<LossKind, 3> kinds{LossKind::kPrototype, LossKind::kTriplet,
                                      LossKind::kSoftMarginTriplet};
  const std::array<std::size_t, 4> dims{6, 10, 10, 4};
  std::vector<SuiteEntry> out;
  for (std::size_t k = 0; k < kinds.size(); ++k) {
    SuiteEntry entry{kinds[k]};
    for (std::size_t b = 0; b < batches; ++b) {
      const std::uint64_t s = derive_seed(seed, k + 1, b);
      const ModelParams params = init_params(dims, s);
      const bool proto = kinds[k] == LossKind::kPrototype;
      // prototype: 3-way 2-shot with 2 queries; triplets: 3 classes x 3
      const std::size_t per_class = proto ? 4 : 3;
      EpisodicTask task = synthetic_task(3, per_class, proto ? 2 : 0);
      Rng rng(s ^ 0x5eedULL);
      Matrix batch(3 * per_class, dims.front());
      for (double& v : batch.values()) v = rng.normal();
      LossConfig cfg;
      cfg.kind = kinds[k];
      const GradientCheckReport r = gradient_check(make_episode_loss(std::move(task), cfg), params, batch);
      entry.max_relative_error = std::max(entry.max_relative_error, r.max_relative_error);
      entry.max_relative_error_raw = std::max(entry.max_relative_error_raw, r.max_relative_error_raw);
      entry.below_resolution += r.below_resolution;
      entry.checked += r.checked;
      entry.skipped_at_kinks += r.skipped_at_kinks;
      ++entry.batches;
    }
    out.push_back(entry);
  }
  return out;
}

}  // namespace uflst
