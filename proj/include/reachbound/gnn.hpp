#pragma once

// Encoder-processor-decoder surrogate with a shared-weight processor.
//
//   xi^0   = encoder([u_norm | node_type_onehot])
//   m_ij   = message(xi_i, xi_j)                       for j in N(i)
//   xi^h+1 = xi^h + update(xi^h, sum_j m_ij)           (latent_residual = true)
//   out    = decoder(xi^M)
//
// The message MLP's first layer is split into the halves acting on xi_i and
// xi_j so it runs per node, and its linear output layer is applied after the
// neighbour sum. Both rewrites are exact; per-edge work is only the hidden
// layers in between. Residual mode predicts the normalised increment and
// integrates u_{n+1} = u_n + du_n with du fixed to zero on boundary nodes;
// direct mode predicts the normalised field itself.

#include <cstddef>
#include <cstdint>
#include <string_view>
#include <vector>

#include "reachbound/datasets.hpp"
#include "reachbound/grid.hpp"
#include "reachbound/mlp.hpp"
#include "reachbound/pde_solvers.hpp"
#include "reachbound/tensor.hpp"

namespace reachbound::gnn {

enum class PredictionMode { residual, direct };

std::string_view mode_name(PredictionMode m);
PredictionMode parse_mode(std::string_view name);

struct GnnConfig {
  std::size_t latent_dim = 256;    // D
  std::size_t mpi = 4;             // M, message-passing iterations
  std::size_t n_dof = 1;           // field channels per node
  std::size_t hidden_dim = 0;      // 0 means latent_dim
  std::size_t hidden_layers = 2;   // per MLP
  PredictionMode mode = PredictionMode::residual;
  bool latent_residual = true;
  // multiplies the update MLP's output weights at init; keeps deep residual stacks near identity
  double update_init_scale = 0.01;

  static constexpr std::size_t node_types = grid::NodeMask::type_count;

  /// Throws std::invalid_argument unless D > n_dof and sizes are positive.
  void validate() const;
  std::size_t hidden() const { return hidden_dim ? hidden_dim : latent_dim; }
  std::size_t input_dim() const { return n_dof + node_types; }

  bool operator==(const GnnConfig&) const = default;
};

template <class T>
struct GnnParams {
  nn::Mlp<T> encoder;  // n_dof + node_types -> D
  nn::Mlp<T> message;  // 2D -> D
  nn::Mlp<T> update;   // 2D -> D
  nn::Mlp<T> decoder;  // D -> n_dof

  std::size_t parameter_count() const;
  GnnParams zeros_like() const;
  void set_zero();
  std::vector<std::span<T>> buffers();
  std::vector<std::span<const T>> buffers() const;
  bool operator==(const GnnParams&) const = default;
};

/// He-uniform init. Each MLP draws from its own stream derived from `seed`,
/// so the draw does not depend on M.
template <class T>
GnnParams<T> init_params(const GnnConfig& cfg, std::uint64_t seed);

/// All weights and biases zero; with latent_residual the processor is pass-through.
template <class T>
GnnParams<T> zero_params(const GnnConfig& cfg);

template <class To, class From>
GnnParams<To> params_cast(const GnnParams<From>& p);

/// Per-node latent vectors at iteration h.
template <class T>
struct LatentState {
  Tensor2<T> xi;  // [nodes x D]
  std::size_t h = 0;
};

template <class T>
struct StepCache {
  Tensor2<T> xi;     // input latent
  Tensor2<T> pq;     // [P | Q] from the split first message layer
  Tensor2<T> edge_in;  // per-edge first hidden activation (deep message MLPs only)
  nn::MlpCache<T> edge;
  Tensor2<T> s;      // neighbour sum of the last hidden message activation
  nn::MlpCache<T> upd;
};

template <class T>
struct ForwardCache {
  nn::MlpCache<T> enc;
  std::vector<StepCache<T>> steps;
  nn::MlpCache<T> dec;
};

/// Node features [u_norm | one-hot type], one row per node.
template <class T>
Tensor2<T> node_features(std::span<const double> u_norm, std::size_t n_dof,
                         const grid::NodeMask& mask);

template <class T>
LatentState<T> encode(const GnnParams<T>& p, const Tensor2<T>& features,
                      nn::MlpCache<T>* cache = nullptr);

template <class T>
LatentState<T> message_pass_step(const LatentState<T>& state, const grid::GraphTopology& topo,
                                 const GnnParams<T>& p, const GnnConfig& cfg,
                                 StepCache<T>* cache = nullptr);

/// Decoder output in normalised units, no boundary handling.
template <class T>
Tensor2<T> forward_raw(const GnnParams<T>& p, const GnnConfig& cfg,
                       const grid::GraphTopology& topo, const Tensor2<T>& features,
                       ForwardCache<T>* cache = nullptr);

/// Reverse pass through forward_raw; accumulates into grads, returns d/d(features).
template <class T>
Tensor2<T> backward(const GnnParams<T>& p, const GnnConfig& cfg, const grid::GraphTopology& topo,
                    const ForwardCache<T>& cache, const Tensor2<T>& output_grad,
                    GnnParams<T>& grads);

/// A trained model bundled with the statistics of the data it was trained on.
struct Surrogate {
  GnnConfig config;
  GnnParams<double> params;
  data::NormalizationStats stats;
};

/// One model application on physical fields: the next state in residual mode,
/// the predicted field in direct mode.
pde::FieldSnapshot forward(const pde::FieldSnapshot& u, const grid::GridSpec& g,
                           const grid::GraphTopology& topo, const Surrogate& model);

/// n_steps autoregressive applications; returns n_steps + 1 snapshots starting at u0.
pde::Trajectory rollout(const pde::FieldSnapshot& u0, std::size_t n_steps, double dt,
                        const grid::GridSpec& g, const grid::GraphTopology& topo,
                        const Surrogate& model);

/// U[m][i] = |xi_i^m| / (|xi_i^0| + 1e-12) for m = 0..M.
std::vector<std::vector<double>> latent_norm_map(const pde::FieldSnapshot& u,
                                                 const grid::GridSpec& g,
                                                 const grid::GraphTopology& topo,
                                                 const Surrogate& model);

}  // namespace reachbound::gnn
