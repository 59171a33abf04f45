#include "segsemi/multistream.hpp"

#include <algorithm>
#include <cmath>

#include "segsemi/error.hpp"

namespace segsemi {

template <class S>
MultiStream<S>::MultiStream(const MultiStreamConfig& config, ParameterStore<S>& store, std::mt19937_64& init_rng)
    : config_(config) {
  if (config.streams == 0) throw InvalidArgument("multistream: at least one stream is required");
  for (std::size_t l = 0; l < config.streams; ++l) {
    StreamConfig sc = config.stream;
    if (l > 0) sc.input_dim = config.stream.input_dim + config.stream.num_classes;
    streams_.emplace_back(sc, store, "stream" + std::to_string(l) + ".", init_rng);
  }
}

template <class S>
FrameProbs to_frame_probs(const Graph<S>& g, Var logp) {
  return FrameProbs{g.value(logp).template cast<double>()};
}

template <class S>
StreamOutputs MultiStream<S>::forward(Graph<S>& g, ParameterStore<S>& store, const Tensor<S>& features,
                                      const ForwardContext& ctx) const {
  if (features.ndim() != 2 || features.cols() != config_.stream.input_dim || features.rows() == 0) {
    throw ShapeError("multistream: expected features [T >= 1, " + std::to_string(config_.stream.input_dim) +
                     "], got " + shape_string(features.shape()));
  }
  StreamOutputs out;
  Var raw = g.constant(features);
  std::vector<FrameProbs> finals;
  for (std::size_t l = 0; l < streams_.size(); ++l) {
    Var input = raw;
    if (l > 0) {
      Tensor<S> prev = g.value(out.stages.back().back());
      for (auto& v : prev.values()) v = std::exp(v);
      input = g.concat_cols(raw, g.constant(std::move(prev)));
    }
    out.stages.push_back(streams_[l].forward(g, store, input, ctx));
    finals.push_back(to_frame_probs(g, out.stages.back().back()));
  }
  out.collected = collect(finals);
  return out;
}

FrameProbs collect(std::span<const FrameProbs> finals) {
  if (finals.empty()) throw InvalidArgument("collect: no stream outputs");
  const std::size_t t_n = finals[0].frames(), c_n = finals[0].classes();
  for (const auto& f : finals) {
    if (f.frames() != t_n || f.classes() != c_n) {
      throw ShapeError("collect: stream outputs disagree on shape " + shape_string(f.logp.shape()) + " vs " +
                       shape_string(finals[0].logp.shape()));
    }
  }
  if (finals.size() == 1) return finals[0];
  FrameProbs out{Tensor<double>::matrix(t_n, c_n)};
  const double inv = 1.0 / static_cast<double>(finals.size());
  for (std::size_t t = 0; t < t_n; ++t) {
    auto row = out.logp.row(t);
    for (const auto& f : finals) {
      for (std::size_t c = 0; c < c_n; ++c) row[c] += f.logp(t, c);
    }
    for (auto& v : row) v *= inv;
    const double mx = *std::max_element(row.begin(), row.end());
    double z = 0.0;
    for (double v : row) z += std::exp(v - mx);
    const double lse = mx + std::log(z);
    for (auto& v : row) v -= lse;
  }
  return out;
}

template <class S>
Var distill_loss(Graph<S>& g, const StreamOutputs& outputs, S tau) {
  Var total = g.constant(Tensor<S>({1}));
  for (std::size_t l = 1; l < outputs.streams(); ++l) {
    Var teacher = g.detach(outputs.final_stage(l - 1));
    total = g.add(total, g.truncated_l1(outputs.first_stage(l), teacher, tau));
  }
  return total;
}

template <class S>
FrameProbs final_stream_prediction(const Graph<S>& g, const StreamOutputs& outputs) {
  if (outputs.streams() == 0) throw InvalidArgument("final_stream_prediction: no streams");
  return to_frame_probs(g, outputs.final_stage(outputs.streams() - 1));
}

template class MultiStream<float>;
template class MultiStream<double>;
template Var distill_loss<float>(Graph<float>&, const StreamOutputs&, float);
template Var distill_loss<double>(Graph<double>&, const StreamOutputs&, double);
template FrameProbs final_stream_prediction<float>(const Graph<float>&, const StreamOutputs&);
template FrameProbs final_stream_prediction<double>(const Graph<double>&, const StreamOutputs&);
template FrameProbs to_frame_probs<float>(const Graph<float>&, Var);
template FrameProbs to_frame_probs<double>(const Graph<double>&, Var);

}  // namespace segsemi
