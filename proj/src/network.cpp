#include "uflst/network.hpp"

#include <algorithm>
#include <cmath>

#include "uflst/error.hpp"
#include "uflst/kernels.hpp"
#include "uflst/rng.hpp"

namespace uflst {

namespace {

double activate(Activation a, double x) {
  switch (a) {
    case Activation::kRelu: return x > 0.0 ? x : 0.0;
    case Activation::kTanh: return std::tanh(x);
    case Activation::kLinear: break;
  }
  return x;
}

// Derivative expressed through the pre-activation; ReLU uses 0 at the kink.
double activate_grad(Activation a, double pre) {
  switch (a) {
    case Activation::kRelu: return pre > 0.0 ? 1.0 : 0.0;
    case Activation::kTanh: {
      const double t = std::tanh(pre);
      return 1.0 - t * t;
    }
    case Activation::kLinear: break;
  }
  return 1.0;
}

void affine(const DenseLayer& layer, const Matrix& in, Matrix& out) {
  out = Matrix(in.rows(), layer.out_dim());
  for (std::size_t b = 0; b < in.rows(); ++b) {
    auto x = in.row(b);
    auto y = out.row(b);
    for (std::size_t o = 0; o < layer.out_dim(); ++o) {
      y[o] = kernels::dot(x, layer.weight.row(o)) + layer.bias[o];
    }
  }
}

}  // namespace

Activation activation_from_string(const std::string& name) {
  if (name == "relu") return Activation::kRelu;
  if (name == "tanh") return Activation::kTanh;
  if (name == "linear") return Activation::kLinear;
  fail(ErrorKind::kConfig, "unknown activation '" + name + "'");
}

const char* to_string(Activation a) noexcept {
  switch (a) {
    case Activation::kRelu: return "relu";
    case Activation::kTanh: return "tanh";
    case Activation::kLinear: return "linear";
  }
  return "unknown";
}

std::vector<std::size_t> ModelParams::layer_dims() const {
  std::vector<std::size_t> dims;
  if (layers.empty()) return dims;
  dims.push_back(layers.front().in_dim());
  for (const auto& l : layers) dims.push_back(l.out_dim());
  return dims;
}

std::size_t ModelParams::parameter_count() const noexcept {
  std::size_t n = 0;
  for (const auto& l : layers) n += l.weight.size() + l.bias.size();
  return n;
}

void ModelParams::validate() const {
  require(!layers.empty(), ErrorKind::kContractViolation, "model has no layers");
  require(hidden_activations.size() + 1 == layers.size(), ErrorKind::kContractViolation,
          "one activation tag per hidden layer expected");
  for (std::size_t l = 0; l < layers.size(); ++l) {
    const auto& layer = layers[l];
    require(layer.bias.size() == layer.out_dim(), ErrorKind::kContractViolation,
            "bias length differs from layer output width");
    if (l + 1 < layers.size()) {
      require(layer.out_dim() == layers[l + 1].in_dim(), ErrorKind::kContractViolation,
              "layer dimensions do not chain");
    }
    require(layer.weight.all_finite() &&
                std::all_of(layer.bias.begin(), layer.bias.end(),
                            [](double v) { return std::isfinite(v); }),
            ErrorKind::kContractViolation, "non-finite parameter");
  }
  for (const auto* moments : {&adam.first_moment, &adam.second_moment}) {
    require(moments->size() == layers.size(), ErrorKind::kContractViolation,
            "optimizer state does not mirror parameters");
    for (std::size_t l = 0; l < layers.size(); ++l) {
      require((*moments)[l].weight.rows() == layers[l].weight.rows() &&
                  (*moments)[l].weight.cols() == layers[l].weight.cols() &&
                  (*moments)[l].bias.size() == layers[l].bias.size(),
              ErrorKind::kContractViolation, "optimizer state does not mirror parameters");
    }
  }
}

Gradients zero_like(const std::vector<DenseLayer>& layers) {
  Gradients g;
  g.reserve(layers.size());
  for (const auto& l : layers) {
    g.push_back({Matrix(l.out_dim(), l.in_dim()), std::vector<double>(l.out_dim(), 0.0)});
  }
  return g;
}

ModelParams init_params(std::span<const std::size_t> layer_dims, std::uint64_t seed,
                        Activation hidden) {
  require(layer_dims.size() >= 2, ErrorKind::kInvalidArchitecture,
          "need at least an input and an output dimension");
  require(std::none_of(layer_dims.begin(), layer_dims.end(), [](std::size_t d) { return d == 0; }),
          ErrorKind::kInvalidArchitecture, "layer dimension 0");
  Rng rng(seed);
  ModelParams p;
  for (std::size_t l = 0; l + 1 < layer_dims.size(); ++l) {
    const std::size_t in = layer_dims[l];
    const std::size_t out = layer_dims[l + 1];
    const double bound = std::sqrt(6.0 / static_cast<double>(in));
    DenseLayer layer{Matrix(out, in), std::vector<double>(out, 0.0)};
    for (double& w : layer.weight.values()) w = rng.uniform(-bound, bound);
    p.layers.push_back(std::move(layer));
    if (l + 2 < layer_dims.size()) p.hidden_activations.push_back(hidden);
  }
  p.adam.first_moment = zero_like(p.layers);
  p.adam.second_moment = zero_like(p.layers);
  return p;
}

ForwardResult forward(const ModelParams& params, const Matrix& batch) {
  require(!params.layers.empty(), ErrorKind::kContractViolation, "model has no layers");
  require(batch.cols() == params.input_dim(), ErrorKind::kContractViolation,
          "batch width does not match the model input dimension");
  require(batch.all_finite(), ErrorKind::kInput, "non-finite input to forward");
  ForwardResult r;
  Matrix current = batch;
  for (std::size_t l = 0; l < params.layers.size(); ++l) {
    Matrix pre;
    affine(params.layers[l], current, pre);
    r.cache.layer_inputs.push_back(std::move(current));
    if (l + 1 < params.layers.size()) {
      const Activation a = params.hidden_activations[l];
      current = pre;
      for (double& v : current.values()) v = activate(a, v);
    } else {
      current = pre;
    }
    r.cache.pre_activations.push_back(std::move(pre));
  }
  r.output = std::move(current);
  return r;
}

Matrix embed(const ModelParams& params, const Matrix& batch) {
  return forward(params, batch).output;
}

Gradients backward(const ModelParams& params, const ForwardCache& cache,
                   const Matrix& output_grad) {
  const std::size_t depth = params.layers.size();
  require(cache.layer_inputs.size() == depth && cache.pre_activations.size() == depth,
          ErrorKind::kContractViolation, "cache does not match the model depth");
  const std::size_t batch = cache.layer_inputs.front().rows();
  require(output_grad.rows() == batch && output_grad.cols() == params.output_dim(),
          ErrorKind::kContractViolation, "output gradient shape does not match the cache");

  Gradients grads = zero_like(params.layers);
  Matrix delta = output_grad;  // d loss / d pre-activation of the current layer
  for (std::size_t l = depth; l-- > 0;) {
    const DenseLayer& layer = params.layers[l];
    const Matrix& input = cache.layer_inputs[l];
    require(input.rows() == batch && input.cols() == layer.in_dim(),
            ErrorKind::kContractViolation, "cache shape does not match layer");
    DenseLayer& g = grads[l];
    for (std::size_t b = 0; b < batch; ++b) {
      auto d = delta.row(b);
      auto x = input.row(b);
      for (std::size_t o = 0; o < layer.out_dim(); ++o) {
        if (d[o] == 0.0) continue;
        kernels::axpy(d[o], x, g.weight.row(o));
        g.bias[o] += d[o];
      }
    }
    if (l == 0) break;
    Matrix upstream(batch, layer.in_dim());
    for (std::size_t b = 0; b < batch; ++b) {
      auto d = delta.row(b);
      auto u = upstream.row(b);
      for (std::size_t o = 0; o < layer.out_dim(); ++o) {
        if (d[o] != 0.0) kernels::axpy(d[o], layer.weight.row(o), u);
      }
    }
    const Activation a = params.hidden_activations[l - 1];
    const Matrix& pre = cache.pre_activations[l - 1];
    for (std::size_t i = 0; i < upstream.size(); ++i) {
      upstream.values()[i] *= activate_grad(a, pre.values()[i]);
    }
    delta = std::move(upstream);
  }
  return grads;
}

std::uint64_t activation_signature(const ModelParams& params, const ForwardCache& cache) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (std::size_t l = 0; l + 1 < params.layers.size() && l < cache.pre_activations.size(); ++l) {
    if (params.hidden_activations[l] != Activation::kRelu) continue;
    for (double v : cache.pre_activations[l].values()) {
      h ^= v > 0.0 ? 1u : 0u;
      h *= 0x100000001b3ULL;
    }
  }
  return h;
}

}  // namespace uflst
