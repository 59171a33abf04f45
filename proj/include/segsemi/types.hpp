#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <vector>

#include "segsemi/tensor.hpp"

namespace segsemi {

using Label = std::uint32_t;
// One class id per frame.
using FrameLabels = std::vector<Label>;

// Per-frame embeddings, [T, D] time-major.
struct FeatureSequence {
  Tensor<float> data;

  std::size_t frames() const { return data.empty() ? 0 : data.rows(); }
  std::size_t dim() const { return data.empty() ? 0 : data.cols(); }
  bool operator==(const FeatureSequence&) const = default;
};

// Per-frame class log-probabilities, [T, C].
struct FrameProbs {
  Tensor<double> logp;

  std::size_t frames() const { return logp.rows(); }
  std::size_t classes() const { return logp.cols(); }

  Tensor<double> probs() const {
    Tensor<double> p = logp;
    for (auto& v : p.values()) v = std::exp(v);
    return p;
  }

  // First maximum wins on ties.
  FrameLabels argmax() const {
    FrameLabels out(frames());
    for (std::size_t t = 0; t < frames(); ++t) {
      Label best = 0;
      for (std::size_t c = 1; c < classes(); ++c) {
        if (logp(t, c) > logp(t, best)) best = static_cast<Label>(c);
      }
      out[t] = best;
    }
    return out;
  }
};

// Ordered action list without timings; never stores EOS.
struct Transcript {
  std::vector<Label> steps;

  std::size_t size() const noexcept { return steps.size(); }
  bool operator==(const Transcript&) const = default;
  auto operator<=>(const Transcript&) const = default;
};

// Run-length collapse of frame labels, preserving order.
Transcript labels_to_transcript(const FrameLabels& labels);

}  // namespace segsemi
