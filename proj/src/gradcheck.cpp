#include "uflst/gradcheck.hpp"

#include <algorithm>
#include <cfloat>
#include <cmath>

#include "uflst/error.hpp"

namespace uflst {

namespace {

struct Probe {
  double value;
  std::uint64_t signature;
};

Probe probe(const EmbeddingLoss& loss, const ModelParams& params, const Matrix& batch) {
  ForwardResult fr = forward(params, batch);
  LossEvaluation ev = loss(fr.output);
  return {ev.value, activation_signature(params, fr.cache) ^ (ev.branch_signature * 31)};
}

}  // namespace

double finite_difference_resolution(double f_plus, double f_minus, double step) noexcept {
  return 16.0 * DBL_EPSILON * std::max(std::abs(f_plus), std::abs(f_minus)) / (2.0 * step);
}

GradientCheckReport gradient_check(const EmbeddingLoss& loss, const ModelParams& params,
                                   const Matrix& batch, double step) {
  ForwardResult fr = forward(params, batch);
  LossEvaluation base;
  try {
    base = loss(fr.output);
  } catch (const Error& e) {
    fail(ErrorKind::kInfeasibleCheck, std::string("loss undefined on batch: ") + e.what());
  }
  const std::uint64_t base_sig =
      activation_signature(params, fr.cache) ^ (base.branch_signature * 31);
  const Gradients analytic = backward(params, fr.cache, base.grad);

  GradientCheckReport report;
  ModelParams work = params;
  auto check = [&](double& slot, double a) {
    const double saved = slot;
    slot = saved + step;
    const Probe plus = probe(loss, work, batch);
    slot = saved - step;
    const Probe minus = probe(loss, work, batch);
    slot = saved;
    if (plus.signature != base_sig || minus.signature != base_sig) {
      ++report.skipped_at_kinks;
      return;
    }
    const double numeric = (plus.value - minus.value) / (2.0 * step);
    const double denom = std::max({std::abs(a), std::abs(numeric), 1e-8});
    const double rel = std::abs(a - numeric) / denom;
    report.max_relative_error_raw = std::max(report.max_relative_error_raw, rel);
    if (std::abs(a - numeric) <= finite_difference_resolution(plus.value, minus.value, step)) {
      ++report.below_resolution;
    } else {
      report.max_relative_error = std::max(report.max_relative_error, rel);
    }
    ++report.checked;
  };

  for (std::size_t l = 0; l < work.layers.size(); ++l) {
    auto w = work.layers[l].weight.values();
    auto gw = analytic[l].weight.values();
    for (std::size_t i = 0; i < w.size(); ++i) check(w[i], gw[i]);
    auto& b = work.layers[l].bias;
    for (std::size_t i = 0; i < b.size(); ++i) check(b[i], analytic[l].bias[i]);
  }
  require(report.checked > 0, ErrorKind::kInfeasibleCheck,
          "every coordinate crosses a non-differentiable point");
  return report;
}

}  // namespace uflst
