#include "segsemi/adam.hpp"

#include <cmath>
#include <string>

#include "segsemi/error.hpp"

namespace segsemi {

template <class S>
Adam<S>::Adam(AdamConfig config, const ParameterStore<S>& params) : config_(config) {
  m_.reserve(params.size());
  v_.reserve(params.size());
  for (const auto& p : params) {
    m_.emplace_back(p.value.shape());
    v_.emplace_back(p.value.shape());
  }
}

template <class S>
void Adam<S>::step(ParameterStore<S>& params) {
  if (params.size() != m_.size()) {
    throw InvalidArgument("adam: optimizer tracks " + std::to_string(m_.size()) + " parameters, store has " +
                          std::to_string(params.size()));
  }
  for (const auto& p : params) {
    for (std::size_t i = 0; i < p.grad.size(); ++i) {
      if (!std::isfinite(static_cast<double>(p.grad[i]))) {
        throw NumericError("adam: non-finite gradient in parameter '" + p.name + "' at index " + std::to_string(i) +
                           " (value " + std::to_string(static_cast<double>(p.grad[i])) + ") at step " +
                           std::to_string(steps_ + 1));
      }
    }
  }
  ++steps_;
  const double b1 = config_.beta1, b2 = config_.beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(steps_));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(steps_));
  std::size_t k = 0;
  for (auto& p : params) {
    auto& m = m_[k];
    auto& v = v_[k];
    ++k;
    for (std::size_t i = 0; i < p.value.size(); ++i) {
      const double g = static_cast<double>(p.grad[i]);
      const double mi = b1 * static_cast<double>(m[i]) + (1.0 - b1) * g;
      const double vi = b2 * static_cast<double>(v[i]) + (1.0 - b2) * g * g;
      m[i] = static_cast<S>(mi);
      v[i] = static_cast<S>(vi);
      const double update = config_.lr * (mi / c1) / (std::sqrt(vi / c2) + config_.epsilon);
      p.value[i] = static_cast<S>(static_cast<double>(p.value[i]) - update);
    }
  }
}

template class Adam<float>;
template class Adam<double>;

}  // namespace segsemi
