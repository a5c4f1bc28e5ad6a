#pragma once

// Fully connected networks with hand-written reverse mode.

#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <string_view>
#include <vector>

#include "reachbound/tensor.hpp"

namespace reachbound::nn {

enum class Activation : std::uint32_t { identity = 0, relu = 1, tanh = 2 };

std::string_view activation_name(Activation a);
Activation parse_activation(std::string_view name);

/// y = act(x * weight + bias); weight is [in x out].
template <class T>
struct DenseLayer {
  Tensor2<T> weight;
  std::vector<T> bias;
  Activation activation = Activation::identity;

  std::size_t in_dim() const { return weight.rows(); }
  std::size_t out_dim() const { return weight.cols(); }
  bool operator==(const DenseLayer&) const = default;
};

template <class T>
struct Mlp {
  std::vector<DenseLayer<T>> layers;

  /// dims = {in, hidden..., out}; hidden layers use `hidden`, the last layer `output`.
  static Mlp zeros(std::span<const std::size_t> dims, Activation hidden = Activation::relu,
                   Activation output = Activation::identity);
  /// He-uniform weights, zero biases.
  static Mlp he_uniform(std::span<const std::size_t> dims, std::mt19937_64& rng,
                        Activation hidden = Activation::relu,
                        Activation output = Activation::identity);
  /// Zero-initialised network of the same shape (gradient accumulator).
  Mlp zeros_like() const;

  std::size_t input_dim() const { return layers.empty() ? 0 : layers.front().in_dim(); }
  std::size_t output_dim() const { return layers.empty() ? 0 : layers.back().out_dim(); }
  std::size_t parameter_count() const;
  void set_zero();

  /// Every parameter buffer in a fixed order: (weight, bias) per layer.
  std::vector<std::span<T>> buffers();
  std::vector<std::span<const T>> buffers() const;

  bool operator==(const Mlp&) const = default;
};

/// Activations retained by mlp_forward for the backward pass.
template <class T>
struct MlpCache {
  std::size_t first = 0;
  std::vector<Tensor2<T>> inputs;  // input to each evaluated layer
  std::vector<Tensor2<T>> pre;     // pre-activation of each evaluated layer
};

/// Half-open layer range [first, last); last == npos means through the output.
struct LayerRange {
  std::size_t first = 0;
  std::size_t last = static_cast<std::size_t>(-1);
};

template <class T>
Tensor2<T> mlp_forward(const Mlp<T>& net, const Tensor2<T>& x, MlpCache<T>* cache = nullptr,
                       LayerRange range = {});

/// Accumulates parameter gradients into `grads` and returns d(loss)/d(input).
/// Throws std::invalid_argument on shape mismatch.
template <class T>
Tensor2<T> mlp_backward(const Mlp<T>& net, const MlpCache<T>& cache, Tensor2<T> output_grad,
                        Mlp<T>& grads);

template <class T>
struct MlpGradients {
  Mlp<T> params;
  Tensor2<T> input;
};

template <class T>
MlpGradients<T> mlp_backward(const Mlp<T>& net, const MlpCache<T>& cache,
                             const Tensor2<T>& output_grad);

template <class To, class From>
Mlp<To> mlp_cast(const Mlp<From>& net);

}  // namespace reachbound::nn
