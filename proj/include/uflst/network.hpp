#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "uflst/matrix.hpp"

namespace uflst {

enum class Activation : std::uint32_t { kLinear = 0, kRelu = 1, kTanh = 2 };

Activation activation_from_string(const std::string& name);
const char* to_string(Activation a) noexcept;

// weight is out_dim x in_dim.
struct DenseLayer {
  Matrix weight;
  std::vector<double> bias;

  std::size_t in_dim() const noexcept { return weight.cols(); }
  std::size_t out_dim() const noexcept { return weight.rows(); }

  friend bool operator==(const DenseLayer&, const DenseLayer&) = default;
};

// Same layout as the parameters they belong to.
using Gradients = std::vector<DenseLayer>;

struct AdamState {
  std::vector<DenseLayer> first_moment;
  std::vector<DenseLayer> second_moment;
  std::uint64_t step = 0;

  friend bool operator==(const AdamState&, const AdamState&) = default;
};

// Multilayer perceptron f_theta. `hidden_activations[l]` follows layer l;
// the final layer is always linear.
struct ModelParams {
  std::vector<DenseLayer> layers;
  std::vector<Activation> hidden_activations;
  AdamState adam;

  std::size_t input_dim() const noexcept { return layers.empty() ? 0 : layers.front().in_dim(); }
  std::size_t output_dim() const noexcept { return layers.empty() ? 0 : layers.back().out_dim(); }
  std::vector<std::size_t> layer_dims() const;
  std::size_t parameter_count() const noexcept;

  // Throws kContractViolation when shapes do not chain, moments do not mirror
  // the parameters, or any entry is non-finite.
  void validate() const;

  friend bool operator==(const ModelParams&, const ModelParams&) = default;
};

Gradients zero_like(const std::vector<DenseLayer>& layers);

// He-style uniform init: W ~ U(-sqrt(6 / fan_in), sqrt(6 / fan_in)), zero bias,
// zeroed Adam state.
ModelParams init_params(std::span<const std::size_t> layer_dims, std::uint64_t seed,
                        Activation hidden = Activation::kRelu);

struct ForwardCache {
  std::vector<Matrix> layer_inputs;     // input seen by layer l
  std::vector<Matrix> pre_activations;  // affine output of layer l
};

struct ForwardResult {
  Matrix output;
  ForwardCache cache;
};

ForwardResult forward(const ModelParams& params, const Matrix& batch);

// forward() without retaining the cache.
Matrix embed(const ModelParams& params, const Matrix& batch);

Gradients backward(const ModelParams& params, const ForwardCache& cache,
                   const Matrix& output_grad);

// Hash of which hidden units sit on the flat side of their nonlinearity.
// Changes whenever a perturbation crosses a ReLU kink.
std::uint64_t activation_signature(const ModelParams& params, const ForwardCache& cache);

}  // namespace uflst
