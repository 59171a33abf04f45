#pragma once

#include <cstdint>
#include <vector>

#include "segsemi/parameter.hpp"

namespace segsemi {

struct AdamConfig {
  double lr = 0.0005;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

// Adam with bias correction. Moments are kept per parameter, in store order.
template <class S>
class Adam {
 public:
  Adam() = default;
  Adam(AdamConfig config, const ParameterStore<S>& params);

  // Applies one update from the gradients currently in `params`. Throws
  // NumericError naming the first parameter with a non-finite gradient; in
  // that case nothing is modified.
  void step(ParameterStore<S>& params);

  const AdamConfig& config() const noexcept { return config_; }
  std::int64_t steps() const noexcept { return steps_; }

  // Checkpoint access.
  std::vector<Tensor<S>>& first_moments() noexcept { return m_; }
  std::vector<Tensor<S>>& second_moments() noexcept { return v_; }
  const std::vector<Tensor<S>>& first_moments() const noexcept { return m_; }
  const std::vector<Tensor<S>>& second_moments() const noexcept { return v_; }
  void set_steps(std::int64_t steps) noexcept { steps_ = steps; }

 private:
  AdamConfig config_;
  std::vector<Tensor<S>> m_;
  std::vector<Tensor<S>> v_;
  std::int64_t steps_ = 0;
};

extern template class Adam<float>;
extern template class Adam<double>;

}  // namespace segsemi
