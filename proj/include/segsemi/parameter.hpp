#pragma once

#include <cstddef>
#include <deque>
#include <optional>
#include <string>

#include "segsemi/tensor.hpp"

namespace segsemi {

template <class S>
struct Parameter {
  std::string name;
  Tensor<S> value;
  Tensor<S> grad;
};

// Owns every trainable tensor of a model. Models refer to entries by index;
// references stay valid as entries are added.
template <class S>
class ParameterStore {
 public:
  std::size_t add(std::string name, Tensor<S> init) {
    Tensor<S> grad(init.shape());
    params_.push_back({std::move(name), std::move(init), std::move(grad)});
    return params_.size() - 1;
  }

  Parameter<S>& operator[](std::size_t i) { return params_[i]; }
  const Parameter<S>& operator[](std::size_t i) const { return params_[i]; }
  std::size_t size() const noexcept { return params_.size(); }

  auto begin() { return params_.begin(); }
  auto end() { return params_.end(); }
  auto begin() const { return params_.begin(); }
  auto end() const { return params_.end(); }

  void zero_grad() {
    for (auto& p : params_) p.grad.fill(S{0});
  }

  std::optional<std::size_t> find(const std::string& name) const {
    for (std::size_t i = 0; i < params_.size(); ++i) {
      if (params_[i].name == name) return i;
    }
    return std::nullopt;
  }

  std::size_t scalar_count() const {
    std::size_t n = 0;
    for (const auto& p : params_) n += p.value.size();
    return n;
  }

 private:
  std::deque<Parameter<S>> params_;
};

}  // namespace segsemi
