#pragma once

#include <string>

#include "uflst/network.hpp"

namespace uflst {

enum class DecayMode {
  kStep,       // lr * decay_factor once epoch > decay_after_epoch
  kGeometric,  // lr * decay_factor^(epoch - decay_after_epoch) after that point
};

DecayMode decay_mode_from_string(const std::string& name);
const char* to_string(DecayMode m) noexcept;

struct OptimizerConfig {
  double learning_rate = 0.005;
  double decay_factor = 0.1;
  int decay_after_epoch = 25;
  DecayMode decay_mode = DecayMode::kStep;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;

  void validate() const;
};

// Epochs are 1-based.
double effective_learning_rate(const OptimizerConfig& config, int epoch);

// One bias-corrected Adam update in place; increments the step counter.
void adam_step(ModelParams& params, const Gradients& grads, const OptimizerConfig& config,
               int epoch);

void reset_optimizer_state(ModelParams& params);

}  // namespace uflst
