#include "uflst/optimizer.hpp"

#include <cmath>

#include "uflst/error.hpp"

namespace uflst {

DecayMode decay_mode_from_string(const std::string& name) {
  if (name == "step") return DecayMode::kStep;
  if (name == "geometric") return DecayMode::kGeometric;
  fail(ErrorKind::kConfig, "unknown decay mode '" + name + "'");
}

const char* to_string(DecayMode m) noexcept {
  return m == DecayMode::kStep ? "step" : "geometric";
}

void OptimizerConfig::validate() const {
  require(learning_rate >= 0.0 && std::isfinite(learning_rate), ErrorKind::kConfig,
          "learning_rate must be >= 0");
  require(decay_factor > 0.0 && decay_factor <= 1.0, ErrorKind::kConfig,
          "decay_factor must lie in (0, 1]");
  require(decay_after_epoch >= 1, ErrorKind::kConfig, "decay_after_epoch must be positive");
  require(beta1 >= 0.0 && beta1 < 1.0 && beta2 >= 0.0 && beta2 < 1.0, ErrorKind::kConfig,
          "Adam betas must lie in [0, 1)");
  require(epsilon > 0.0, ErrorKind::kConfig, "Adam epsilon must be positive");
}

double effective_learning_rate(const OptimizerConfig& config, int epoch) {
  if (epoch <= config.decay_after_epoch) return config.learning_rate;
  if (config.decay_mode == DecayMode::kStep) return config.learning_rate * config.decay_factor;
  return config.learning_rate * std::pow(config.decay_factor, epoch - config.decay_after_epoch);
}

void adam_step(ModelParams& params, const Gradients& grads, const OptimizerConfig& config,
               int epoch) {
  require(grads.size() == params.layers.size(), ErrorKind::kContractViolation,
          "gradient layer count differs from the model");
  AdamState& st = params.adam;
  st.step += 1;
  const double lr = effective_learning_rate(config, epoch);
  const double t = static_cast<double>(st.step);
  const double c1 = 1.0 - std::pow(config.beta1, t);
  const double c2 = 1.0 - std::pow(config.beta2, t);

  auto update = [&](std::span<double> theta, std::span<const double> g, std::span<double> m,
                    std::span<double> v) {
    require(g.size() == theta.size(), ErrorKind::kContractViolation,
            "gradient shape differs from parameter shape");
    for (std::size_t i = 0; i < theta.size(); ++i) {
      require(std::isfinite(g[i]), ErrorKind::kInput, "non-finite gradient");
      m[i] = config.beta1 * m[i] + (1.0 - config.beta1) * g[i];
      v[i] = config.beta2 * v[i] + (1.0 - config.beta2) * g[i] * g[i];
      const double m_hat = m[i] / c1;
      const double v_hat = v[i] / c2;
      theta[i] -= lr * m_hat / (std::sqrt(v_hat) + config.epsilon);
    }
  };

  for (std::size_t l = 0; l < params.layers.size(); ++l) {
    DenseLayer& layer = params.layers[l];
    require(grads[l].bias.size() == layer.bias.size(), ErrorKind::kContractViolation,
            "gradient shape differs from parameter shape");
    update(layer.weight.values(), grads[l].weight.values(), st.first_moment[l].weight.values(),
           st.second_moment[l].weight.values());
    update(layer.bias, grads[l].bias, st.first_moment[l].bias, st.second_moment[l].bias);
  }
}

void reset_optimizer_state(ModelParams& params) {
  params.adam.first_moment = zero_like(params.layers);
  params.adam.second_moment = zero_like(params.layers);
  params.adam.step = 0;
}

}  // namespace uflst
