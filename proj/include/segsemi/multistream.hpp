#pragma once

#include <cstddef>
#include <random>
#include <span>
#include <vector>

#include "segsemi/backbone.hpp"

namespace segsemi {

struct MultiStreamConfig {
  StreamConfig stream;  // input_dim is the raw feature width
  std::size_t streams = 4;
};

// Graph handles for one forward pass plus the collected prediction.
struct StreamOutputs {
  // stages[l][s]: log-probs of stage s of stream l.
  std::vector<std::vector<Var>> stages;
  FrameProbs collected;

  std::size_t streams() const noexcept { return stages.size(); }
  Var first_stage(std::size_t l) const { return stages.at(l).front(); }
  Var final_stage(std::size_t l) const { return stages.at(l).back(); }
};

// L chained streams. Stream 1 reads the raw features; stream l > 1 reads the
// raw features concatenated with the detached final probabilities of stream
// l-1, so nothing downstream sends gradient into an earlier stream.
template <class S>
class MultiStream {
 public:
  MultiStream() = default;
  MultiStream(const MultiStreamConfig& config, ParameterStore<S>& store, std::mt19937_64& init_rng);

  StreamOutputs forward(Graph<S>& g, ParameterStore<S>& store, const Tensor<S>& features,
                        const ForwardContext& ctx) const;

  const MultiStreamConfig& config() const noexcept { return config_; }
  std::size_t streams() const noexcept { return streams_.size(); }
  const Stream<S>& stream(std::size_t l) const { return streams_.at(l); }

 private:
  MultiStreamConfig config_;
  std::vector<Stream<S>> streams_;
};

// Geometric-mean combination: average log-probs over streams, then
// renormalize each row.
FrameProbs collect(std::span<const FrameProbs> finals);

// Sum over l >= 2 of the truncated L1 distance between stream l's first stage
// and stream l-1's final stage (detached). Zero when there is one stream.
template <class S>
Var distill_loss(Graph<S>& g, const StreamOutputs& outputs, S tau);

// Final stage of the last stream.
template <class S>
FrameProbs final_stream_prediction(const Graph<S>& g, const StreamOutputs& outputs);

template <class S>
FrameProbs to_frame_probs(const Graph<S>& g, Var logp);

extern template class MultiStream<float>;
extern template class MultiStream<double>;

}  // namespace segsemi
