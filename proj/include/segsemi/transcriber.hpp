#pragma once

#include <cstddef>
#include <random>
#include <set>
#include <vector>

#include "segsemi/beam.hpp"
#include "segsemi/graph.hpp"
#include "segsemi/parameter.hpp"
#include "segsemi/types.hpp"

namespace segsemi {

struct TranscriberConfig {
  std::size_t num_classes = 0;
  std::size_t pool_k = 32;
  std::size_t enc_hidden = 64;  // per direction
  std::size_t dec_hidden = 64;
  std::size_t attn_hidden = 64;
  std::size_t embed_dim = 32;
  std::size_t max_decode_len = 24;

  // Decoder outputs are classes 0..C-1 then EOS; SOS is input-only.
  Label eos() const { return static_cast<Label>(num_classes); }
  Label sos() const { return static_cast<Label>(num_classes + 1); }
};

// Splits [0, frames) into min(k, frames) contiguous near-equal ranges; the
// first frames % k ranges get one extra frame.
std::vector<RowRange> pool_segments(std::size_t frames, std::size_t k);

// Per-segment, per-class max of a [T, C] probability matrix.
Tensor<double> segment_pool(const Tensor<double>& probs, std::size_t k);

// Mean NLL over the N + 1 decode positions (targets then EOS); multiplied by
// alpha when the target is a pseudo transcript. `decoder_logprobs` is
// [N + 1, C + 1].
template <class S>
Var transcript_loss(Graph<S>& g, Var decoder_logprobs, const Transcript& target, S alpha, bool is_pseudo);

// Sequence-to-sequence transcript generator: K-segment max-pooled class
// probabilities, a bidirectional LSTM encoder, and an LSTM decoder with
// additive attention.
template <class S>
class Transcriber {
 public:
  struct Encoded {
    Var states;  // [K, 2 * enc_hidden]
    Var keys;    // [K, attn_hidden]
    Var init_h;  // [1, dec_hidden]
  };
  struct DecoderState {
    Var h;
    Var c;
    Var context;  // [1, 2 * enc_hidden]
  };

  Transcriber() = default;
  Transcriber(const TranscriberConfig& config, ParameterStore<S>& store, std::mt19937_64& init_rng);

  const TranscriberConfig& config() const noexcept { return config_; }

  // `probs` is a [T, C] probability matrix (not log).
  Encoded encode(Graph<S>& g, ParameterStore<S>& store, Var probs) const;
  DecoderState initial_state(Graph<S>& g, const Encoded& enc) const;
  // Feeds `token`; returns the next state and [1, C + 1] log-probs.
  std::pair<DecoderState, Var> step(Graph<S>& g, ParameterStore<S>& store, const Encoded& enc,
                                    const DecoderState& state, Label token) const;

  // [N + 1, C + 1] log-probs under teacher forcing (SOS, s_0, ..., s_{N-1}).
  Var teacher_forced(Graph<S>& g, ParameterStore<S>& store, const Encoded& enc, const Transcript& target) const;

  CandidateSet beam_decode(ParameterStore<S>& store, const FrameProbs& probs, std::size_t width,
                           const std::set<Label>* allowed) const;
  Candidate greedy_decode(ParameterStore<S>& store, const FrameProbs& probs, const std::set<Label>* allowed) const;

 private:
  struct Lstm {
    std::size_t wx = 0, wh = 0, b = 0;
  };
  std::pair<Var, Var> lstm_cell(Graph<S>& g, ParameterStore<S>& store, const Lstm& cell, Var x_proj, Var h,
                                Var c, std::size_t hidden) const;
  BeamOptions beam_options(std::size_t width, const std::set<Label>* allowed) const;

  TranscriberConfig config_;
  Lstm enc_fwd_, enc_bwd_, dec_;
  std::size_t bridge_w_ = 0, bridge_b_ = 0;
  std::size_t embed_ = 0;
  std::size_t attn_key_ = 0, attn_query_ = 0, attn_v_ = 0;
  std::size_t out_w_ = 0, out_b_ = 0;
};

extern template class Transcriber<float>;
extern template class Transcriber<double>;

}  // namespace segsemi
