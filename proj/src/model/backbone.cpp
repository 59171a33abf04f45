#include "segsemi/backbone.hpp"

#include <cmath>

#include "segsemi/error.hpp"

namespace segsemi {

Transcript labels_to_transcript(const FrameLabels& labels) {
  Transcript out;
  for (std::size_t t = 0; t < labels.size(); ++t) {
    if (t == 0 || labels[t] != labels[t - 1]) out.steps.push_back(labels[t]);
  }
  return out;
}

namespace {

// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) for both weight and bias, the
// usual default for convolutions.
template <class S>
std::pair<Tensor<S>, Tensor<S>> init_conv(std::size_t taps, std::size_t in, std::size_t out, std::mt19937_64& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(taps * in));
  std::uniform_real_distribution<double> u(-bound, bound);
  Tensor<S> w({taps, in, out});
  for (auto& v : w.values()) v = static_cast<S>(u(rng));
  Tensor<S> b({out});
  for (auto& v : b.values()) v = static_cast<S>(u(rng));
  return {std::move(w), std::move(b)};
}

}  // namespace

template <class S>
Stream<S>::Stream(const StreamConfig& config, ParameterStore<S>& store, const std::string& prefix,
                  std::mt19937_64& init_rng)
    : config_(config) {
  if (config.input_dim == 0 || config.num_classes == 0 || config.channels == 0) {
    throw InvalidArgument("stream: input_dim, num_classes and channels must be positive");
  }
  const std::size_t f = config.channels;
  auto make = [&](const std::string& name, std::size_t taps, std::size_t in, std::size_t out) {
    auto [w, b] = init_conv<S>(taps, in, out, init_rng);
    Conv c;
    c.weight = store.add(prefix + name + ".weight", std::move(w));
    c.bias = store.add(prefix + name + ".bias", std::move(b));
    return c;
  };
  gen_in_ = make("gen.in", 1, config.input_dim, f);
  for (std::size_t i = 0; i < config.gen_layers; ++i) {
    const std::string p = "gen.layer" + std::to_string(i);
    DualLayer layer;
    layer.wide = make(p + ".wide", 3, f, f);
    layer.narrow = make(p + ".narrow", 3, f, f);
    layer.fuse = make(p + ".fuse", 1, 2 * f, f);
    gen_layers_.push_back(layer);
  }
  gen_out_ = make("gen.out", 1, f, config.num_classes);
  for (std::size_t s = 0; s < config.refine_stages; ++s) {
    const std::string p = "refine" + std::to_string(s);
    Refinement r;
    r.in = make(p + ".in", 1, config.num_classes, f);
    for (std::size_t i = 0; i < config.refine_layers; ++i) {
      const std::string q = p + ".layer" + std::to_string(i);
      r.layers.push_back({make(q + ".dilated", 3, f, f), make(q + ".pointwise", 1, f, f)});
    }
    r.out = make(p + ".out", 1, f, config.num_classes);
    refinements_.push_back(std::move(r));
  }
}

template <class S>
Var Stream<S>::apply(Graph<S>& g, ParameterStore<S>& store, const Conv& c, Var x, std::size_t dilation) const {
  return g.conv1d(x, g.parameter(store[c.weight]), g.parameter(store[c.bias]), dilation);
}

template <class S>
std::vector<Var> Stream<S>::forward(Graph<S>& g, ParameterStore<S>& store, Var input,
                                    const ForwardContext& ctx) const {
  const auto& in = g.value(input);
  if (in.ndim() != 2 || in.cols() != config_.input_dim) {
    throw ShapeError("stream: expected input [T, " + std::to_string(config_.input_dim) + "], got " +
                     shape_string(in.shape()));
  }
  const S rate = ctx.dropout_rng ? static_cast<S>(config_.dropout) : S{0};
  auto drop = [&](Var x) { return rate > S{0} ? g.dropout(x, rate, *ctx.dropout_rng) : x; };

  std::vector<Var> stages;
  const std::size_t n = gen_layers_.size();
  Var f = apply(g, store, gen_in_, input, 1);
  for (std::size_t i = 0; i < n; ++i) {
    const auto& layer = gen_layers_[i];
    Var wide = apply(g, store, layer.wide, f, std::size_t{1} << (n - 1 - i));
    Var narrow = apply(g, store, layer.narrow, f, std::size_t{1} << i);
    Var fused = g.relu(apply(g, store, layer.fuse, g.concat_cols(wide, narrow), 1));
    f = g.add(f, drop(fused));
  }
  Var logits = apply(g, store, gen_out_, f, 1);
  stages.push_back(g.log_softmax(logits));

  for (const auto& r : refinements_) {
    Var h = apply(g, store, r.in, g.softmax(logits), 1);
    for (std::size_t i = 0; i < r.layers.size(); ++i) {
      Var o = g.relu(apply(g, store, r.layers[i].dilated, h, std::size_t{1} << i));
      o = apply(g, store, r.layers[i].pointwise, o, 1);
      h = g.add(h, drop(o));
    }
    logits = apply(g, store, r.out, h, 1);
    stages.push_back(g.log_softmax(logits));
  }
  return stages;
}

template <class S>
Var smoothing_term(Graph<S>& g, Var logp, S tau) {
  return g.truncated_smoothing(logp, tau);
}

namespace {

template <class S>
std::vector<std::size_t> checked_targets(const Tensor<S>& logp, const FrameLabels& labels) {
  if (labels.size() != logp.rows()) {
    throw ShapeError("frame loss: " + std::to_string(labels.size()) + " labels for " + std::to_string(logp.rows()) +
                     " frames");
  }
  std::vector<std::size_t> out(labels.begin(), labels.end());
  for (std::size_t t = 0; t < out.size(); ++t) {
    if (out[t] >= logp.cols()) {
      throw InvalidArgument("frame loss: label " + std::to_string(out[t]) + " at frame " + std::to_string(t) +
                            " is outside [0, " + std::to_string(logp.cols()) + ")");
    }
  }
  return out;
}

}  // namespace

template <class S>
Var frame_loss_supervised(Graph<S>& g, Var logp, const FrameLabels& labels, S beta, S tau) {
  Var ce = g.nll(logp, checked_targets(g.value(logp), labels));
  return g.add(ce, g.scale(g.truncated_smoothing(logp, tau), beta));
}

template <class S>
Var frame_loss_unsupervised(Graph<S>& g, Var logp, const FrameLabels& pseudo_labels, S alpha, S beta, S tau) {
  Var ce = g.nll(logp, checked_targets(g.value(logp), pseudo_labels));
  return g.add(g.scale(ce, alpha), g.scale(g.truncated_smoothing(logp, tau), beta));
}

double smoothing_term(const FrameProbs& probs, double tau) {
  Graph<double> g(false);
  return g.value(g.truncated_smoothing(g.constant(probs.logp), tau))[0];
}

double frame_loss_supervised(const FrameProbs& probs, const FrameLabels& labels, double beta, double tau) {
  Graph<double> g(false);
  return g.value(frame_loss_supervised(g, g.constant(probs.logp), labels, beta, tau))[0];
}

double frame_loss_unsupervised(const FrameProbs& probs, const FrameLabels& labels, double alpha, double beta,
                               double tau) {
  Graph<double> g(false);
  return g.value(frame_loss_unsupervised(g, g.constant(probs.logp), labels, alpha, beta, tau))[0];
}

template class Stream<float>;
template class Stream<double>;
template Var smoothing_term<float>(Graph<float>&, Var, float);
template Var smoothing_term<double>(Graph<double>&, Var, double);
template Var frame_loss_supervised<float>(Graph<float>&, Var, const FrameLabels&, float, float);
template Var frame_loss_supervised<double>(Graph<double>&, Var, const FrameLabels&, double, double);
template Var frame_loss_unsupervised<float>(Graph<float>&, Var, const FrameLabels&, float, float, float);
template Var frame_loss_unsupervised<double>(Graph<double>&, Var, const FrameLabels&, double, double, double);

}  // namespace segsemi
