#include "reachbound/mlp.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "reachbound/kernels.hpp"

namespace reachbound::nn {

std::string_view activation_name(Activation a) {
  switch (a) {
    case Activation::identity: return "identity";
    case Activation::relu: return "relu";
    case Activation::tanh: return "tanh";
  }
  return "?";
}

Activation parse_activation(std::string_view name) {
  if (name == "identity" || name == "linear") return Activation::identity;
  if (name == "relu") return Activation::relu;
  if (name == "tanh") return Activation::tanh;
  throw std::invalid_argument("unknown activation: " + std::string(name));
}

template <class T>
Mlp<T> Mlp<T>::zeros(std::span<const std::size_t> dims, Activation hidden, Activation output) {
  if (dims.size() < 2) throw std::invalid_argument("Mlp needs at least input and output dims");
  Mlp net;
  for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
    DenseLayer<T> layer;
    layer.weight = Tensor2<T>(dims[l], dims[l + 1]);
    layer.bias.assign(dims[l + 1], T(0));
    layer.activation = (l + 2 == dims.size()) ? output : hidden;
    net.layers.push_back(std::move(layer));
  }
  return net;
}

template <class T>
Mlp<T> Mlp<T>::he_uniform(std::span<const std::size_t> dims, std::mt19937_64& rng,
                          Activation hidden, Activation output) {
  Mlp net = zeros(dims, hidden, output);
  for (auto& layer : net.layers) {
    const double limit = std::sqrt(6.0 / double(layer.in_dim()));
    std::uniform_real_distribution<double> dist(-limit, limit);
    for (auto& w : layer.weight.storage()) w = static_cast<T>(dist(rng));
  }
  return net;
}

template <class T>
Mlp<T> Mlp<T>::zeros_like() const {
  Mlp out = *this;
  out.set_zero();
  return out;
}

template <class T>
std::size_t Mlp<T>::parameter_count() const {
  std::size_t n = 0;
  for (const auto& l : layers) n += l.weight.size() + l.bias.size();
  return n;
}

template <class T>
void Mlp<T>::set_zero() {
  for (auto& l : layers) {
    l.weight.fill(T(0));
    std::fill(l.bias.begin(), l.bias.end(), T(0));
  }
}

template <class T>
std::vector<std::span<T>> Mlp<T>::buffers() {
  std::vector<std::span<T>> out;
  for (auto& l : layers) {
    out.emplace_back(l.weight.flat());
    out.emplace_back(l.bias);
  }
  return out;
}

template <class T>
std::vector<std::span<const T>> Mlp<T>::buffers() const {
  std::vector<std::span<const T>> out;
  for (const auto& l : layers) {
    out.emplace_back(l.weight.flat());
    out.emplace_back(l.bias);
  }
  return out;
}

namespace {

template <class T>
void apply_activation(Activation act, Tensor2<T>& x) {
  if (act == Activation::tanh)
    for (auto& v : x.storage()) v = std::tanh(v);
  else if (act == Activation::relu)
    for (auto& v : x.storage()) v = std::max(v, T(0));
}

LayerRange resolve(LayerRange r, std::size_t n_layers) {
  if (r.last == static_cast<std::size_t>(-1)) r.last = n_layers;
  if (r.first > r.last || r.last > n_layers) throw std::invalid_argument("invalid layer range");
  return r;
}

}  // namespace

template <class T>
Tensor2<T> mlp_forward(const Mlp<T>& net, const Tensor2<T>& x, MlpCache<T>* cache,
                       LayerRange range) {
  range = resolve(range, net.layers.size());
  if (cache) {
    cache->first = range.first;
    cache->inputs.clear();
    cache->pre.clear();
  }
  Tensor2<T> cur = x;
  for (std::size_t l = range.first; l < range.last; ++l) {
    const auto& layer = net.layers[l];
    if (cur.cols() != layer.in_dim())
      throw std::invalid_argument("mlp_forward: input width " + std::to_string(cur.cols()) +
                                  " != layer " + std::to_string(l) + " fan-in " +
                                  std::to_string(layer.in_dim()));
    Tensor2<T> z(cur.rows(), layer.out_dim());
    kernels::gemm(cur.rows(), layer.out_dim(), layer.in_dim(), cur.data(), layer.weight.data(),
                  z.data(), false);
    kernels::bias_act(z.rows(), z.cols(), z.data(), layer.bias.data(), false);
    if (cache) {
      cache->inputs.push_back(std::move(cur));
      cache->pre.push_back(z);
    }
    apply_activation(layer.activation, z);
    cur = std::move(z);
  }
  return cur;
}

template <class T>
Tensor2<T> mlp_backward(const Mlp<T>& net, const MlpCache<T>& cache, Tensor2<T> dy,
                        Mlp<T>& grads) {
  if (grads.layers.size() != net.layers.size())
    throw std::invalid_argument("mlp_backward: gradient accumulator shape mismatch");
  const std::size_t first = cache.first;
  const std::size_t count = cache.pre.size();
  if (count == 0) return dy;
  for (std::size_t idx = count; idx-- > 0;) {
    const std::size_t l = first + idx;
    const auto& layer = net.layers[l];
    const Tensor2<T>& pre = cache.pre[idx];
    const Tensor2<T>& in = cache.inputs[idx];
    if (dy.rows() != pre.rows() || dy.cols() != pre.cols())
      throw std::invalid_argument("mlp_backward: output gradient shape mismatch at layer " +
                                  std::to_string(l));
    switch (layer.activation) {
      case Activation::identity: break;
      case Activation::relu: kernels::relu_backward(dy.size(), pre.data(), dy.data()); break;
      case Activation::tanh:
        for (std::size_t i = 0; i < dy.size(); ++i) {
          const T t = std::tanh(pre.data()[i]);
          dy.data()[i] *= T(1) - t * t;
        }
        break;
    }
    auto& g = grads.layers[l];
    // dW += x^T dz ; db += colsum dz ; dx = dz W^T
    Tensor2<T> in_t = transpose(in);
    kernels::gemm(layer.in_dim(), layer.out_dim(), in.rows(), in_t.data(), dy.data(),
                  g.weight.data(), true);
    kernels::col_sum(dy.rows(), dy.cols(), dy.data(), g.bias.data(), true);
    Tensor2<T> w_t = transpose(layer.weight);
    Tensor2<T> dx(dy.rows(), layer.in_dim());
    kernels::gemm(dy.rows(), layer.in_dim(), layer.out_dim(), dy.data(), w_t.data(), dx.data(),
                  false);
    dy = std::move(dx);
  }
  return dy;
}

template <class T>
MlpGradients<T> mlp_backward(const Mlp<T>& net, const MlpCache<T>& cache,
                             const Tensor2<T>& output_grad) {
  MlpGradients<T> out{net.zeros_like(), {}};
  out.input = mlp_backward(net, cache, output_grad, out.params);
  return out;
}

template <class To, class From>
Mlp<To> mlp_cast(const Mlp<From>& net) {
  Mlp<To> out;
  for (const auto& l : net.layers) {
    DenseLayer<To> d;
    d.weight = tensor_cast<To>(l.weight);
    d.bias.assign(l.bias.begin(), l.bias.end());
    d.activation = l.activation;
    out.layers.push_back(std::move(d));
  }
  return out;
}

template struct Mlp<float>;
template struct Mlp<double>;
template Tensor2<float> mlp_forward(const Mlp<float>&, const Tensor2<float>&, MlpCache<float>*, LayerRange);
template Tensor2<double> mlp_forward(const Mlp<double>&, const Tensor2<double>&, MlpCache<double>*, LayerRange);
template Tensor2<float> mlp_backward(const Mlp<float>&, const MlpCache<float>&, Tensor2<float>, Mlp<float>&);
template Tensor2<double> mlp_backward(const Mlp<double>&, const MlpCache<double>&, Tensor2<double>, Mlp<double>&);
template MlpGradients<float> mlp_backward(const Mlp<float>&, const MlpCache<float>&, const Tensor2<float>&);
template MlpGradients<double> mlp_backward(const Mlp<double>&, const MlpCache<double>&, const Tensor2<double>&);
template Mlp<float> mlp_cast(const Mlp<double>&);
template Mlp<double> mlp_cast(const Mlp<float>&);
template Mlp<float> mlp_cast(const Mlp<float>&);
template Mlp<double> mlp_cast(const Mlp<double>&);

}  // namespace reachbound::nn
