#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "uflst/gradcheck.hpp"
#include "uflst/losses.hpp"

namespace uflst {

struct SuiteEntry {
  LossKind kind;
  double max_relative_error = 0.0;
  double max_relative_error_raw = 0.0;
  std::size_t below_resolution = 0;
  std::size_t batches = 0;
  std::size_t checked = 0;
  std::size_t skipped_at_kinks = 0;
};

// Randomized batches through a 2-hidden-layer ReLU encoder for the
// prototype, hinge triplet and soft-margin triplet losses.
std::vector<SuiteEntry> run_gradient_suite(std::size_t batches, std::uint64_t seed);

}  // namespace uflst
