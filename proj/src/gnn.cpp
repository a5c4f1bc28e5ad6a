#include "reachbound/gnn.hpp"

#include <cmath>
#include <random>
#include <stdexcept>
#include <string>

#include "reachbound/kernels.hpp"

namespace reachbound::gnn {

std::string_view mode_name(PredictionMode m) {
  return m == PredictionMode::residual ? "residual" : "direct";
}

PredictionMode parse_mode(std::string_view name) {
  if (name == "residual") return PredictionMode::residual;
  if (name == "direct") return PredictionMode::direct;
  throw std::invalid_argument("unknown prediction mode: " + std::string(name));
}

void GnnConfig::validate() const {
  if (n_dof == 0) throw std::invalid_argument("gnn config: n_dof must be positive");
  if (latent_dim <= n_dof) throw std::invalid_argument("gnn config: latent_dim must exceed n_dof");
  if (hidden_layers == 0) throw std::invalid_argument("gnn config: hidden_layers must be >= 1");
  if (!(update_init_scale >= 0.0) || !std::isfinite(update_init_scale))
    throw std::invalid_argument("gnn config: update_init_scale must be finite and non-negative");
}

template <class T>
std::size_t GnnParams<T>::parameter_count() const {
  return encoder.parameter_count() + message.parameter_count() + update.parameter_count() +
         decoder.parameter_count();
}

template <class T>
GnnParams<T> GnnParams<T>::zeros_like() const {
  return {encoder.zeros_like(), message.zeros_like(), update.zeros_like(), decoder.zeros_like()};
}

template <class T>
void GnnParams<T>::set_zero() {
  encoder.set_zero();
  message.set_zero();
  update.set_zero();
  decoder.set_zero();
}

template <class T>
std::vector<std::span<T>> GnnParams<T>::buffers() {
  std::vector<std::span<T>> out;
  for (auto* net : {&encoder, &message, &update, &decoder}) {
    auto b = net->buffers();
    out.insert(out.end(), b.begin(), b.end());
  }
  return out;
}

template <class T>
std::vector<std::span<const T>> GnnParams<T>::buffers() const {
  std::vector<std::span<const T>> out;
  for (const auto* net : {&encoder, &message, &update, &decoder}) {
    auto b = net->buffers();
    out.insert(out.end(), b.begin(), b.end());
  }
  return out;
}

namespace {

struct Dims {
  std::vector<std::size_t> encoder, message, update, decoder;
};

Dims dims_of(const GnnConfig& cfg) {
  cfg.validate();
  const auto D = cfg.latent_dim, H = cfg.hidden();
  auto make = [&](std::size_t in, std::size_t out) {
    std::vector<std::size_t> d{in};
    d.insert(d.end(), cfg.hidden_layers, H);
    d.push_back(out);
    return d;
  };
  return {make(cfg.input_dim(), D), make(2 * D, D), make(2 * D, D), make(D, cfg.n_dof)};
}

template <class T>
void check_finite(const Tensor2<T>& x, const char* where) {
  if (!all_finite(x)) throw std::runtime_error(std::string("non-finite values in ") + where);
}

}  // namespace

template <class T>
GnnParams<T> init_params(const GnnConfig& cfg, std::uint64_t seed) {
  const auto d = dims_of(cfg);
  auto stream = [&](std::uint64_t which) {
    std::seed_seq seq{seed, which, std::uint64_t(0x9a11)};
    return std::mt19937_64(seq);
  };
  auto r0 = stream(0), r1 = stream(1), r2 = stream(2), r3 = stream(3);
  GnnParams<T> p{nn::Mlp<T>::he_uniform(d.encoder, r0), nn::Mlp<T>::he_uniform(d.message, r1),
                 nn::Mlp<T>::he_uniform(d.update, r2), nn::Mlp<T>::he_uniform(d.decoder, r3)};
  for (auto& w : p.update.layers.back().weight.storage()) w *= static_cast<T>(cfg.update_init_scale);
  return p;
}

template <class T>
GnnParams<T> zero_params(const GnnConfig& cfg) {
  const auto d = dims_of(cfg);
  return {nn::Mlp<T>::zeros(d.encoder), nn::Mlp<T>::zeros(d.message), nn::Mlp<T>::zeros(d.update),
          nn::Mlp<T>::zeros(d.decoder)};
}

template <class To, class From>
GnnParams<To> params_cast(const GnnParams<From>& p) {
  return {nn::mlp_cast<To>(p.encoder), nn::mlp_cast<To>(p.message), nn::mlp_cast<To>(p.update),
          nn::mlp_cast<To>(p.decoder)};
}

template <class T>
Tensor2<T> node_features(std::span<const double> u_norm, std::size_t n_dof,
                         const grid::NodeMask& mask) {
  const std::size_t n = mask.node_type.size();
  if (u_norm.size() != n * n_dof) throw std::invalid_argument("node_features: field/mask size mismatch");
  const std::size_t w = n_dof + grid::NodeMask::type_count;
  Tensor2<T> f(n, w);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t c = 0; c < n_dof; ++c) f(i, c) = static_cast<T>(u_norm[i * n_dof + c]);
    f(i, n_dof + mask.node_type[i]) = T(1);
  }
  return f;
}

template <class T>
LatentState<T> encode(const GnnParams<T>& p, const Tensor2<T>& features, nn::MlpCache<T>* cache) {
  return {nn::mlp_forward(p.encoder, features, cache), 0};
}

namespace {

// [D x 2H] weight acting on xi: columns [0, H) from the xi_i half of the first
// message layer, [H, 2H) from the xi_j half.
template <class T>
Tensor2<T> split_first_layer(const nn::Mlp<T>& message, std::size_t D) {
  const auto& w = message.layers.front().weight;  // [2D x H]
  const std::size_t H = w.cols();
  Tensor2<T> out(D, 2 * H);
  for (std::size_t d = 0; d < D; ++d)
    for (std::size_t c = 0; c < H; ++c) {
      out(d, c) = w(d, c);
      out(d, H + c) = w(D + d, c);
    }
  return out;
}

template <class T>
void merge_first_layer_grad(const Tensor2<T>& dsplit, std::size_t D, Tensor2<T>& dw) {
  const std::size_t H = dw.cols();
  for (std::size_t d = 0; d < D; ++d)
    for (std::size_t c = 0; c < H; ++c) {
      dw(d, c) += dsplit(d, c);
      dw(D + d, c) += dsplit(d, H + c);
    }
}

template <class T>
void add_degree_bias(const grid::GraphTopology& topo, const std::vector<T>& bias, Tensor2<T>& agg) {
  const std::size_t D = agg.cols();
  for (std::size_t i = 0; i < agg.rows(); ++i) {
    const T deg = static_cast<T>(topo.degree(i));
    T* row = agg.data() + i * D;
    for (std::size_t c = 0; c < D; ++c) row[c] += deg * bias[c];
  }
}

}  // namespace

template <class T>
LatentState<T> message_pass_step(const LatentState<T>& state, const grid::GraphTopology& topo,
                                 const GnnParams<T>& p, const GnnConfig& cfg, StepCache<T>* cache) {
  const auto& xi = state.xi;
  const std::size_t N = xi.rows(), D = cfg.latent_dim, H = cfg.hidden();
  if (N != topo.node_count() || xi.cols() != D)
    throw std::invalid_argument("message_pass_step: latent state does not match graph/config");
  const auto csr = topo.csr();
  const auto& msg = p.message;
  const std::size_t last = msg.layers.size() - 1;

  const Tensor2<T> wsplit = split_first_layer(msg, D);
  Tensor2<T> pq(N, 2 * H);
  kernels::gemm(N, 2 * H, D, xi.data(), wsplit.data(), pq.data(), false);

  Tensor2<T> s(N, H);
  Tensor2<T> edge_in;
  nn::MlpCache<T> edge_cache;
  if (last == 1) {
    kernels::edge_relu_sum(csr, H, pq.data(), msg.layers[0].bias.data(), s.data());
  } else {
    edge_in = Tensor2<T>(topo.edge_count(), H);
    kernels::edge_relu_rows(csr, H, pq.data(), msg.layers[0].bias.data(), edge_in.data());
    Tensor2<T> edge_out = nn::mlp_forward(msg, edge_in, cache ? &edge_cache : nullptr, {1, last});
    kernels::segment_sum(csr, H, edge_out.data(), s.data());
  }

  Tensor2<T> agg(N, D);
  kernels::gemm(N, D, H, s.data(), msg.layers[last].weight.data(), agg.data(), false);
  add_degree_bias(topo, msg.layers[last].bias, agg);

  Tensor2<T> z(N, 2 * D);
  for (std::size_t i = 0; i < N; ++i)
    for (std::size_t c = 0; c < D; ++c) {
      z(i, c) = xi(i, c);
      z(i, D + c) = agg(i, c);
    }
  nn::MlpCache<T> upd_cache;
  Tensor2<T> next = nn::mlp_forward(p.update, z, cache ? &upd_cache : nullptr);
  if (cfg.latent_residual) kernels::axpy(next.size(), T(1), xi.data(), next.data());

  if (cache) {
    cache->xi = xi;
    cache->pq = std::move(pq);
    cache->edge_in = std::move(edge_in);
    cache->edge = std::move(edge_cache);
    cache->s = std::move(s);
    cache->upd = std::move(upd_cache);
  }
  return {std::move(next), state.h + 1};
}

template <class T>
Tensor2<T> forward_raw(const GnnParams<T>& p, const GnnConfig& cfg, const grid::GraphTopology& topo,
                       const Tensor2<T>& features, ForwardCache<T>* cache) {
  if (features.rows() != topo.node_count() || features.cols() != cfg.input_dim())
    throw std::invalid_argument("forward_raw: features do not match graph/config");
  LatentState<T> state = encode(p, features, cache ? &cache->enc : nullptr);
  if (cache) cache->steps.assign(cfg.mpi, {});
  for (std::size_t h = 0; h < cfg.mpi; ++h)
    state = message_pass_step(state, topo, p, cfg, cache ? &cache->steps[h] : nullptr);
  return nn::mlp_forward(p.decoder, state.xi, cache ? &cache->dec : nullptr);
}

template <class T>
Tensor2<T> backward(const GnnParams<T>& p, const GnnConfig& cfg, const grid::GraphTopology& topo,
                    const ForwardCache<T>& cache, const Tensor2<T>& output_grad, GnnParams<T>& grads) {
  const std::size_t N = topo.node_count(), D = cfg.latent_dim, H = cfg.hidden();
  const auto csr = topo.csr();
  const auto& msg = p.message;
  const std::size_t last = msg.layers.size() - 1;
  if (cache.steps.size() != cfg.mpi) throw std::invalid_argument("backward: cache/config mismatch");

  Tensor2<T> dxi = nn::mlp_backward(p.decoder, cache.dec, output_grad, grads.decoder);
  const Tensor2<T> wsplit = split_first_layer(msg, D);
  const Tensor2<T> wsplit_t = transpose(wsplit);
  const Tensor2<T> wlast_t = transpose(msg.layers[last].weight);

  for (std::size_t h = cfg.mpi; h-- > 0;) {
    const auto& sc = cache.steps[h];
    Tensor2<T> dz = nn::mlp_backward(p.update, sc.upd, dxi, grads.update);  // [N x 2D]
    Tensor2<T> dprev(N, D);
    if (cfg.latent_residual) dprev = dxi;
    Tensor2<T> dagg(N, D);
    for (std::size_t i = 0; i < N; ++i)
      for (std::size_t c = 0; c < D; ++c) {
        dprev(i, c) += dz(i, c);
        dagg(i, c) = dz(i, D + c);
      }

    // agg = s W_last + deg * b_last
    auto& glast = grads.message.layers[last];
    {
      const Tensor2<T> s_t = transpose(sc.s);
      kernels::gemm(H, D, N, s_t.data(), dagg.data(), glast.weight.data(), true);
      for (std::size_t i = 0; i < N; ++i)
        kernels::axpy(D, static_cast<T>(topo.degree(i)), dagg.data() + i * D, glast.bias.data());
    }
    Tensor2<T> ds(N, H);
    kernels::gemm(N, H, D, dagg.data(), wlast_t.data(), ds.data(), false);

    Tensor2<T> dpq(N, 2 * H);
    auto& gfirst = grads.message.layers[0];
    if (last == 1) {
      kernels::edge_relu_sum_backward(csr, H, sc.pq.data(), msg.layers[0].bias.data(), ds.data(),
                                      dpq.data(), gfirst.bias.data());
    } else {
      Tensor2<T> dedge(topo.edge_count(), H);
      for (std::size_t i = 0; i < N; ++i)
        for (auto e = csr.offsets[i]; e < csr.offsets[i + 1]; ++e)
          std::copy(ds.data() + i * H, ds.data() + (i + 1) * H, dedge.data() + std::size_t(e) * H);
      Tensor2<T> dedge_in = nn::mlp_backward(msg, sc.edge, std::move(dedge), grads.message);
      kernels::edge_relu_rows_backward(csr, H, sc.pq.data(), msg.layers[0].bias.data(),
                                       dedge_in.data(), dpq.data(), gfirst.bias.data());
    }

    // pq = xi wsplit
    {
      const Tensor2<T> xi_t = transpose(sc.xi);
      Tensor2<T> dwsplit(D, 2 * H);
      kernels::gemm(D, 2 * H, N, xi_t.data(), dpq.data(), dwsplit.data(), false);
      merge_first_layer_grad(dwsplit, D, gfirst.weight);
    }
    kernels::gemm(N, D, 2 * H, dpq.data(), wsplit_t.data(), dprev.data(), true);
    dxi = std::move(dprev);
  }
  return nn::mlp_backward(p.encoder, cache.enc, dxi, grads.encoder);
}

namespace {

Tensor2<double> features_for(const pde::FieldSnapshot& u, const grid::GridSpec& g,
                             const Surrogate& model) {
  if (u.n_dof != model.config.n_dof || u.values.size() != g.node_count() * u.n_dof)
    throw std::invalid_argument("surrogate input does not match grid/config channels");
  const auto mask = grid::build_node_mask(g);
  const auto un = data::normalize(u.values, model.stats.input);
  return node_features<double>(un, u.n_dof, mask);
}

}  // namespace

pde::FieldSnapshot forward(const pde::FieldSnapshot& u, const grid::GridSpec& g,
                           const grid::GraphTopology& topo, const Surrogate& model) {
  const auto feats = features_for(u, g, model);
  const auto raw = forward_raw(model.params, model.config, topo, feats);
  const auto phys = data::denormalize(raw.flat(), model.stats.target);
  pde::FieldSnapshot out;
  out.n_dof = model.config.n_dof;
  out.time = u.time;
  if (model.config.mode == PredictionMode::direct) {
    out.values = phys;
    return out;
  }
  out.values = u.values;
  const auto n_dof = out.n_dof;
  for (std::size_t i = 0; i < g.node_count(); ++i) {
    if (g.is_boundary(i)) continue;
    for (std::size_t c = 0; c < n_dof; ++c) out.values[i * n_dof + c] += phys[i * n_dof + c];
  }
  return out;
}

pde::Trajectory rollout(const pde::FieldSnapshot& u0, std::size_t n_steps, double dt,
                        const grid::GridSpec& g, const grid::GraphTopology& topo,
                        const Surrogate& model) {
  pde::Trajectory t;
  t.grid = g;
  t.meta.scheme = "gnn-rollout";
  t.meta.dt = dt;
  t.snapshots.push_back(u0);
  for (std::size_t k = 0; k < n_steps; ++k) {
    auto next = forward(t.snapshots.back(), g, topo, model);
    next.time = u0.time + double(k + 1) * dt;
    t.snapshots.push_back(std::move(next));
  }
  return t;
}

std::vector<std::vector<double>> latent_norm_map(const pde::FieldSnapshot& u,
                                                 const grid::GridSpec& g,
                                                 const grid::GraphTopology& topo,
                                                 const Surrogate& model) {
  const auto feats = features_for(u, g, model);
  auto state = encode(model.params, feats);
  const std::size_t N = g.node_count(), D = model.config.latent_dim;
  auto norms = [&](const Tensor2<double>& xi) {
    std::vector<double> r(N);
    for (std::size_t i = 0; i < N; ++i) r[i] = std::sqrt(kernels::dot(D, xi.data() + i * D, xi.data() + i * D));
    return r;
  };
  const auto base = norms(state.xi);
  std::vector<std::vector<double>> out;
  auto push = [&](const Tensor2<double>& xi) {
    auto n = norms(xi);
    for (std::size_t i = 0; i < N; ++i) n[i] /= base[i] + 1e-12;
    out.push_back(std::move(n));
  };
  push(state.xi);
  for (std::size_t h = 0; h < model.config.mpi; ++h) {
    state = message_pass_step(state, topo, model.params, model.config);
    check_finite(state.xi, "latent state");
    push(state.xi);
  }
  return out;
}

#define REACHBOUND_GNN_INSTANTIATE(T)                                                              \
  template struct GnnParams<T>;                                                                    \
  template GnnParams<T> init_params<T>(const GnnConfig&, std::uint64_t);                           \
  template GnnParams<T> zero_params<T>(const GnnConfig&);                                          \
  template Tensor2<T> node_features<T>(std::span<const double>, std::size_t, const grid::NodeMask&); \
  template LatentState<T> encode(const GnnParams<T>&, const Tensor2<T>&, nn::MlpCache<T>*);        \
  template LatentState<T> message_pass_step(const LatentState<T>&, const grid::GraphTopology&,     \
                                            const GnnParams<T>&, const GnnConfig&, StepCache<T>*); \
  template Tensor2<T> forward_raw(const GnnParams<T>&, const GnnConfig&,                           \
                                  const grid::GraphTopology&, const Tensor2<T>&, ForwardCache<T>*); \
  template Tensor2<T> backward(const GnnParams<T>&, const GnnConfig&, const grid::GraphTopology&,  \
                               const ForwardCache<T>&, const Tensor2<T>&, GnnParams<T>&);

REACHBOUND_GNN_INSTANTIATE(float)
REACHBOUND_GNN_INSTANTIATE(double)

template GnnParams<float> params_cast(const GnnParams<double>&);
template GnnParams<double> params_cast(const GnnParams<float>&);
template GnnParams<double> params_cast(const GnnParams<double>&);
template GnnParams<float> params_cast(const GnnParams<float>&);

}  // namespace reachbound::gnn
