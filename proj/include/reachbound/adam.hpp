#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace reachbound::nn {

struct AdamHyper {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// Moment accumulators mirror the parameter buffers they were built for.
template <class T>
class AdamState {
 public:
  AdamState() = default;
  AdamState(AdamHyper hyper, std::span<const std::span<T>> params);

  /// One bias-corrected update at learning rate `lr`.
  void step(std::span<const std::span<T>> params, std::span<const std::span<const T>> grads,
            double lr);
  void step(std::span<const std::span<T>> params, std::span<const std::span<const T>> grads) {
    step(params, grads, hyper_.lr);
  }

  std::uint64_t steps() const { return t_; }
  const AdamHyper& hyper() const { return hyper_; }
  const std::vector<std::vector<T>>& first_moments() const { return m_; }
  const std::vector<std::vector<T>>& second_moments() const { return v_; }

 private:
  AdamHyper hyper_;
  std::uint64_t t_ = 0;
  std::vector<std::vector<T>> m_, v_;
};

}  // namespace reachbound::nn
