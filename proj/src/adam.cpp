#include "reachbound/adam.hpp"

#include <cmath>
#include <stdexcept>

#include "reachbound/kernels.hpp"

namespace reachbound::nn {

template <class T>
AdamState<T>::AdamState(AdamHyper hyper, std::span<const std::span<T>> params) : hyper_(hyper) {
  for (const auto& p : params) {
    m_.emplace_back(p.size(), T(0));
    v_.emplace_back(p.size(), T(0));
  }
}

template <class T>
void AdamState<T>::step(std::span<const std::span<T>> params,
                        std::span<const std::span<const T>> grads, double lr) {
  if (params.size() != m_.size() || grads.size() != m_.size())
    throw std::invalid_argument("AdamState::step: buffer count mismatch");
  ++t_;
  const double c1 = 1.0 - std::pow(hyper_.beta1, double(t_));
  const double c2 = 1.0 - std::pow(hyper_.beta2, double(t_));
  const T step_size = static_cast<T>(lr / c1);
  const T v_corr = static_cast<T>(1.0 / c2);
  for (std::size_t b = 0; b < params.size(); ++b) {
    if (params[b].size() != m_[b].size() || grads[b].size() != m_[b].size())
      throw std::invalid_argument("AdamState::step: buffer shape mismatch");
    kernels::adam_update(params[b].size(), params[b].data(), grads[b].data(), m_[b].data(),
                         v_[b].data(), static_cast<T>(hyper_.beta1), static_cast<T>(hyper_.beta2),
                         step_size, static_cast<T>(hyper_.eps), v_corr);
  }
}

template class AdamState<float>;
template class AdamState<double>;

}  // namespace reachbound::nn
