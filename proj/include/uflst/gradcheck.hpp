#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>

#include "uflst/matrix.hpp"
#include "uflst/network.hpp"

namespace uflst {

// A scalar loss over a batch of embeddings together with its gradient.
// `branch_signature` identifies the piecewise branch the loss is on (active
// hinges, mined indices); finite differences that cross a branch are skipped.
struct LossEvaluation {
  double value = 0.0;
  Matrix grad;
  std::uint64_t branch_signature = 0;
};

using EmbeddingLoss = std::function<LossEvaluation(const Matrix& embeddings)>;

struct GradientCheckReport {
  // Coordinates whose |analytic - numeric| is within the roundoff resolution
  // of the central difference count as exact agreement here.
  double max_relative_error = 0.0;
  // Same maximum without the resolution rule.
  double max_relative_error_raw = 0.0;
  std::size_t checked = 0;
  std::size_t below_resolution = 0;
  std::size_t skipped_at_kinks = 0;
};

// Roundoff bound of (f(x+h) - f(x-h)) / 2h: 16 ulps of the larger value.
double finite_difference_resolution(double f_plus, double f_minus, double step) noexcept;

// Compares backprop through `params` against central differences of
// loss(embed(params, batch)) for every weight and bias. Relative error is
// |a - n| / max(|a|, |n|, 1e-8). Throws kInfeasibleCheck if the loss is not
// defined on the batch or every coordinate sits on a kink.
GradientCheckReport gradient_check(const EmbeddingLoss& loss, const ModelParams& params,
                                   const Matrix& batch, double step = 1e-4);

}  // namespace uflst
