#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <set>
#include <utility>
#include <vector>

#include "segsemi/error.hpp"
#include "segsemi/types.hpp"

namespace segsemi {

struct Candidate {
  Transcript transcript;
  double log_prob = 0.0;  // sum of decoder log-probs, EOS included when emitted
  double score = 0.0;     // log_prob / emitted tokens
  bool ended_with_eos = false;
};

// At most `width` candidates, best first.
using CandidateSet = std::vector<Candidate>;

struct BeamOptions {
  std::size_t width = 5;
  std::size_t max_len = 24;     // most action steps a candidate may hold
  std::size_t num_classes = 0;  // decoder emits classes 0..C-1 and EOS = C
  const std::set<Label>* allowed = nullptr;  // null: every class allowed
};

namespace detail {

inline bool class_allowed(const BeamOptions& opt, Label c) {
  return opt.allowed == nullptr || opt.allowed->count(c) != 0;
}

inline void check_options(const BeamOptions& opt) {
  if (opt.width == 0) throw InvalidArgument("beam: width must be >= 1");
  if (opt.max_len == 0) throw InvalidArgument("beam: max_len must be >= 1");
  if (opt.num_classes == 0) throw InvalidArgument("beam: num_classes must be >= 1");
  bool any = false;
  for (Label c = 0; c < opt.num_classes && !any; ++c) any = class_allowed(opt, c);
  if (!any) throw EmptyBeam("beam: every action is masked, nothing to decode");
}

// Best normalized score first; ties go to the earlier EOS, then to the
// lexicographically smaller action sequence.
inline bool candidate_before(const Candidate& a, const Candidate& b) {
  if (a.score != b.score) return a.score > b.score;
  if (a.transcript.size() != b.transcript.size()) return a.transcript.size() < b.transcript.size();
  return a.transcript.steps < b.transcript.steps;
}

}  // namespace detail

// Length-normalized beam search.
//
// `step(state, token)` feeds `token` to the decoder and returns the next
// state together with log-probabilities over C + 1 outputs (EOS last).
// Decoding starts by feeding `start_token`. EOS is not allowed before the
// first action. A hypothesis that reaches max_len actions finishes without
// EOS. Each round keeps the `width` best expansions by raw log-probability.
template <class State, class Step>
CandidateSet beam_search(const State& init, Label start_token, Step&& step, const BeamOptions& opt) {
  detail::check_options(opt);
  const Label eos = static_cast<Label>(opt.num_classes);

  struct Hyp {
    std::vector<Label> tokens;
    double log_prob;
    State state;
    std::vector<double> next;
  };
  struct Expansion {
    std::size_t parent;
    Label token;
    double log_prob;
  };

  std::vector<Hyp> active;
  {
    auto [st, next] = step(init, start_token);
    active.push_back({{}, 0.0, std::move(st), std::move(next)});
  }
  CandidateSet finished;

  for (std::size_t pos = 0; pos < opt.max_len && !active.empty(); ++pos) {
    std::vector<Expansion> exp;
    for (std::size_t h = 0; h < active.size(); ++h) {
      const auto& hyp = active[h];
      if (hyp.next.size() != opt.num_classes + 1) {
        throw ShapeError("beam: decoder returned " + std::to_string(hyp.next.size()) + " scores, expected " +
                         std::to_string(opt.num_classes + 1));
      }
      for (Label c = 0; c <= eos; ++c) {
        if (c == eos ? pos == 0 : !detail::class_allowed(opt, c)) continue;
        const double lp = hyp.log_prob + hyp.next[c];
        if (std::isnan(lp) || lp == -std::numeric_limits<double>::infinity()) continue;
        exp.push_back({h, c, lp});
      }
    }
    if (exp.empty()) break;
    auto before = [&](const Expansion& a, const Expansion& b) {
      if (a.log_prob != b.log_prob) return a.log_prob > b.log_prob;
      if ((a.token == eos) != (b.token == eos)) return a.token == eos;
      const auto& pa = active[a.parent].tokens;
      const auto& pb = active[b.parent].tokens;
      if (pa != pb) return pa < pb;
      return a.token < b.token;
    };
    const std::size_t keep = std::min(opt.width, exp.size());
    std::partial_sort(exp.begin(), exp.begin() + static_cast<std::ptrdiff_t>(keep), exp.end(), before);

    std::vector<Hyp> next_active;
    for (std::size_t i = 0; i < keep; ++i) {
      const auto& e = exp[i];
      const auto& parent = active[e.parent];
      if (e.token == eos) {
        Candidate c{{parent.tokens}, e.log_prob, 0.0, true};
        c.score = e.log_prob / static_cast<double>(parent.tokens.size() + 1);
        finished.push_back(std::move(c));
        continue;
      }
      std::vector<Label> tokens = parent.tokens;
      tokens.push_back(e.token);
      if (tokens.size() == opt.max_len) {
        Candidate c{{tokens}, e.log_prob, e.log_prob / static_cast<double>(tokens.size()), false};
        finished.push_back(std::move(c));
        continue;
      }
      auto [st, next] = step(parent.state, e.token);
      next_active.push_back({std::move(tokens), e.log_prob, std::move(st), std::move(next)});
    }
    active = std::move(next_active);
  }

  if (finished.empty()) throw EmptyBeam("beam: no candidate could be completed");
  std::sort(finished.begin(), finished.end(), detail::candidate_before);
  CandidateSet out;
  for (auto& c : finished) {
    const bool dup = std::any_of(out.begin(), out.end(), [&](const Candidate& o) { return o.transcript == c.transcript; });
    if (!dup) out.push_back(std::move(c));
    if (out.size() == opt.width) break;
  }
  return out;
}

// Picks the most likely allowed token at each step until EOS or max_len.
template <class State, class Step>
Candidate greedy_decode(const State& init, Label start_token, Step&& step, const BeamOptions& opt) {
  detail::check_options(opt);
  const Label eos = static_cast<Label>(opt.num_classes);
  auto [state, next] = step(init, start_token);
  Candidate out;
  for (std::size_t pos = 0; pos < opt.max_len; ++pos) {
    Label best = eos;
    double best_lp = -std::numeric_limits<double>::infinity();
    bool found = false;
    for (Label c = 0; c <= eos; ++c) {
      if (c == eos ? pos == 0 : !detail::class_allowed(opt, c)) continue;
      // Strict comparison keeps the lower id on ties; EOS wins ties against
      // classes because it is preferred when raw scores are equal.
      if (!found || next[c] > best_lp || (next[c] == best_lp && c == eos)) {
        best = c;
        best_lp = next[c];
        found = true;
      }
    }
    out.log_prob += best_lp;
    if (best == eos) {
      out.ended_with_eos = true;
      break;
    }
    out.transcript.steps.push_back(best);
    if (out.transcript.size() == opt.max_len) break;
    auto [st, nx] = step(state, best);
    state = std::move(st);
    next = std::move(nx);
  }
  const double len = static_cast<double>(out.transcript.size() + (out.ended_with_eos ? 1 : 0));
  out.score = out.log_prob / len;
  return out;
}

}  // namespace segsemi
