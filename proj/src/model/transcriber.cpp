#include "segsemi/transcriber.hpp"

#include <algorithm>
#include <cmath>

#include "segsemi/error.hpp"

namespace segsemi {

std::vector<RowRange> pool_segments(std::size_t frames, std::size_t k) {
  if (frames == 0 || k == 0) throw InvalidArgument("pool_segments: frames and k must be >= 1");
  const std::size_t n = std::min(frames, k);
  const std::size_t base = frames / n, extra = frames % n;
  std::vector<RowRange> out;
  out.reserve(n);
  std::size_t at = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t len = base + (i < extra ? 1 : 0);
    out.push_back({at, at + len});
    at += len;
  }
  return out;
}

Tensor<double> segment_pool(const Tensor<double>& probs, std::size_t k) {
  Graph<double> g(false);
  return g.value(g.segment_max_pool(g.constant(probs), pool_segments(probs.rows(), k)));
}

template <class S>
Var transcript_loss(Graph<S>& g, Var decoder_logprobs, const Transcript& target, S alpha, bool is_pseudo) {
  if (target.size() == 0) throw InvalidArgument("transcript_loss: empty target transcript");
  const auto& lp = g.value(decoder_logprobs);
  if (lp.ndim() != 2 || lp.rows() != target.size() + 1) {
    throw ShapeError("transcript_loss: expected " + std::to_string(target.size() + 1) + " decode rows, got " +
                     shape_string(lp.shape()));
  }
  std::vector<std::size_t> targets(target.steps.begin(), target.steps.end());
  targets.push_back(lp.cols() - 1);  // EOS
  Var loss = g.nll(decoder_logprobs, std::move(targets));
  return is_pseudo ? g.scale(loss, alpha) : loss;
}

namespace {

template <class S>
Tensor<S> uniform_init(Shape shape, double bound, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-bound, bound);
  Tensor<S> t(std::move(shape));
  for (auto& v : t.values()) v = static_cast<S>(u(rng));
  return t;
}

}  // namespace

template <class S>
Transcriber<S>::Transcriber(const TranscriberConfig& config, ParameterStore<S>& store, std::mt19937_64& init_rng)
    : config_(config) {
  if (config.num_classes == 0 || config.pool_k == 0 || config.enc_hidden == 0 || config.dec_hidden == 0 ||
      config.attn_hidden == 0 || config.embed_dim == 0 || config.max_decode_len == 0) {
    throw InvalidArgument("transcriber: every size must be positive");
  }
  const std::size_t c = config.num_classes, he = config.enc_hidden, hd = config.dec_hidden;
  const std::size_t a = config.attn_hidden, e = config.embed_dim;
  auto lstm = [&](const std::string& name, std::size_t in, std::size_t hidden) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(hidden));
    Lstm l;
    l.wx = store.add("transcriber." + name + ".wx", uniform_init<S>({in, 4 * hidden}, bound, init_rng));
    l.wh = store.add("transcriber." + name + ".wh", uniform_init<S>({hidden, 4 * hidden}, bound, init_rng));
    l.b = store.add("transcriber." + name + ".b", uniform_init<S>({1, 4 * hidden}, bound, init_rng));
    return l;
  };
  auto linear = [&](const std::string& name, std::size_t in, std::size_t out) {
    return store.add("transcriber." + name, uniform_init<S>({in, out}, 1.0 / std::sqrt(static_cast<double>(in)), init_rng));
  };
  enc_fwd_ = lstm("enc_fwd", c, he);
  enc_bwd_ = lstm("enc_bwd", c, he);
  bridge_w_ = linear("bridge.w", 2 * he, hd);
  bridge_b_ = linear("bridge.b", 1, hd);
  embed_ = store.add("transcriber.embed", uniform_init<S>({c + 2, e}, 1.0, init_rng));
  dec_ = lstm("dec", e + 2 * he, hd);
  attn_key_ = linear("attn.key", 2 * he, a);
  attn_query_ = linear("attn.query", hd, a);
  attn_v_ = linear("attn.v", a, 1);
  out_w_ = linear("out.w", hd + 2 * he, c + 1);
  out_b_ = linear("out.b", 1, c + 1);
}

template <class S>
std::pair<Var, Var> Transcriber<S>::lstm_cell(Graph<S>& g, ParameterStore<S>& store, const Lstm& cell, Var x_proj,
                                              Var h, Var c, std::size_t hidden) const {
  Var gates = g.add(x_proj, g.matmul(h, g.parameter(store[cell.wh])));
  Var i = g.sigmoid(g.slice_cols(gates, 0, hidden));
  Var f = g.sigmoid(g.slice_cols(gates, hidden, 2 * hidden));
  Var u = g.tanh(g.slice_cols(gates, 2 * hidden, 3 * hidden));
  Var o = g.sigmoid(g.slice_cols(gates, 3 * hidden, 4 * hidden));
  Var c_next = g.add(g.mul(f, c), g.mul(i, u));
  Var h_next = g.mul(o, g.tanh(c_next));
  return {h_next, c_next};
}

template <class S>
typename Transcriber<S>::Encoded Transcriber<S>::encode(Graph<S>& g, ParameterStore<S>& store, Var probs) const {
  const auto& pv = g.value(probs);
  if (pv.ndim() != 2 || pv.cols() != config_.num_classes || pv.rows() == 0) {
    throw ShapeError("transcriber: expected probabilities [T >= 1, " + std::to_string(config_.num_classes) +
                     "], got " + shape_string(pv.shape()));
  }
  Var pooled = g.segment_max_pool(probs, pool_segments(pv.rows(), config_.pool_k));
  const std::size_t k = g.value(pooled).rows(), he = config_.enc_hidden;

  auto run = [&](const Lstm& cell, bool reverse) {
    Var proj = g.add_row(g.matmul(pooled, g.parameter(store[cell.wx])), g.parameter(store[cell.b]));
    Var h = g.constant(Tensor<S>::matrix(1, he));
    Var c = h;
    std::vector<Var> states(k);
    for (std::size_t n = 0; n < k; ++n) {
      const std::size_t t = reverse ? k - 1 - n : n;
      std::tie(h, c) = lstm_cell(g, store, cell, g.gather_rows(proj, {t}), h, c, he);
      states[t] = h;
    }
    return states;
  };
  const auto fwd = run(enc_fwd_, false);
  const auto bwd = run(enc_bwd_, true);
  std::vector<Var> rows(k);
  for (std::size_t t = 0; t < k; ++t) rows[t] = g.concat_cols(fwd[t], bwd[t]);

  Encoded enc;
  enc.states = g.concat_rows(rows);
  enc.keys = g.matmul(enc.states, g.parameter(store[attn_key_]));
  Var summary = g.concat_cols(fwd.back(), bwd.front());
  enc.init_h = g.tanh(g.add_row(g.matmul(summary, g.parameter(store[bridge_w_])), g.parameter(store[bridge_b_])));
  return enc;
}

template <class S>
typename Transcriber<S>::DecoderState Transcriber<S>::initial_state(Graph<S>& g, const Encoded& enc) const {
  return {enc.init_h, g.constant(Tensor<S>::matrix(1, config_.dec_hidden)),
          g.constant(Tensor<S>::matrix(1, 2 * config_.enc_hidden))};
}

template <class S>
std::pair<typename Transcriber<S>::DecoderState, Var> Transcriber<S>::step(Graph<S>& g, ParameterStore<S>& store,
                                                                           const Encoded& enc,
                                                                           const DecoderState& state,
                                                                           Label token) const {
  if (token > config_.sos()) throw InvalidArgument("transcriber: token " + std::to_string(token) + " out of range");
  Var emb = g.gather_rows(g.parameter(store[embed_]), {token});
  Var input = g.concat_cols(emb, state.context);
  Var proj = g.add_row(g.matmul(input, g.parameter(store[dec_.wx])), g.parameter(store[dec_.b]));
  auto [h, c] = lstm_cell(g, store, dec_, proj, state.h, state.c, config_.dec_hidden);

  Var query = g.matmul(h, g.parameter(store[attn_query_]));
  Var energy = g.tanh(g.add_row(enc.keys, query));
  Var scores = g.transpose(g.matmul(energy, g.parameter(store[attn_v_])));
  Var weights = g.softmax(scores);
  Var context = g.matmul(weights, enc.states);

  Var logits = g.add_row(g.matmul(g.concat_cols(h, context), g.parameter(store[out_w_])), g.parameter(store[out_b_]));
  return {{h, c, context}, g.log_softmax(logits)};
}

template <class S>
Var Transcriber<S>::teacher_forced(Graph<S>& g, ParameterStore<S>& store, const Encoded& enc,
                                   const Transcript& target) const {
  if (target.size() == 0) throw InvalidArgument("transcriber: empty target transcript");
  if (target.size() > config_.max_decode_len) {
    throw InvalidArgument("transcriber: target of " + std::to_string(target.size()) +
                          " steps exceeds max decode length " + std::to_string(config_.max_decode_len));
  }
  for (Label s : target.steps) {
    if (s >= config_.num_classes) throw InvalidArgument("transcriber: target action " + std::to_string(s) + " out of range");
  }
  DecoderState state = initial_state(g, enc);
  std::vector<Var> rows;
  Label prev = config_.sos();
  for (std::size_t n = 0; n <= target.size(); ++n) {
    auto [next, logp] = step(g, store, enc, state, prev);
    rows.push_back(logp);
    state = next;
    if (n < target.size()) prev = target.steps[n];
  }
  return g.concat_rows(rows);
}

template <class S>
BeamOptions Transcriber<S>::beam_options(std::size_t width, const std::set<Label>* allowed) const {
  BeamOptions opt;
  opt.width = width;
  opt.max_len = config_.max_decode_len;
  opt.num_classes = config_.num_classes;
  opt.allowed = allowed;
  return opt;
}

template <class S>
CandidateSet Transcriber<S>::beam_decode(ParameterStore<S>& store, const FrameProbs& probs, std::size_t width,
                                         const std::set<Label>* allowed) const {
  Graph<S> g(false);
  const Encoded enc = encode(g, store, g.constant(probs.probs().template cast<S>()));
  auto stepper = [&](const DecoderState& st, Label token) {
    auto [next, logp] = step(g, store, enc, st, token);
    const auto& v = g.value(logp);
    return std::make_pair(next, std::vector<double>(v.values().begin(), v.values().end()));
  };
  return beam_search(initial_state(g, enc), config_.sos(), stepper, beam_options(width, allowed));
}

template <class S>
Candidate Transcriber<S>::greedy_decode(ParameterStore<S>& store, const FrameProbs& probs,
                                        const std::set<Label>* allowed) const {
  Graph<S> g(false);
  const Encoded enc = encode(g, store, g.constant(probs.probs().template cast<S>()));
  auto stepper = [&](const DecoderState& st, Label token) {
    auto [next, logp] = step(g, store, enc, st, token);
    const auto& v = g.value(logp);
    return std::make_pair(next, std::vector<double>(v.values().begin(), v.values().end()));
  };
  return segsemi::greedy_decode(initial_state(g, enc), config_.sos(), stepper, beam_options(1, allowed));
}

template class Transcriber<float>;
template class Transcriber<double>;
template Var transcript_loss<float>(Graph<float>&, Var, const Transcript&, float, bool);
template Var transcript_loss<double>(Graph<double>&, Var, const Transcript&, double, bool);

}  // namespace segsemi
