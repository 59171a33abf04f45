#include "segsemi/matcher.hpp"

#include <cmath>
#include <limits>

#include "segsemi/error.hpp"

namespace segsemi {

CostMatrix build_cost(const FrameProbs& probs, const Transcript& transcript) {
  if (transcript.size() == 0) throw InvalidArgument("build_cost: empty transcript");
  const std::size_t t_n = probs.frames(), n_n = transcript.size();
  CostMatrix out{Tensor<double>::matrix(t_n, n_n)};
  for (std::size_t n = 0; n < n_n; ++n) {
    if (transcript.steps[n] >= probs.classes()) {
      throw InvalidArgument("build_cost: action " + std::to_string(transcript.steps[n]) + " outside " +
                            std::to_string(probs.classes()) + " classes");
    }
  }
  for (std::size_t t = 0; t < t_n; ++t) {
    for (std::size_t n = 0; n < n_n; ++n) out.cost(t, n) = 1.0 - std::exp(probs.logp(t, transcript.steps[n]));
  }
  return out;
}

Alignment dtw_align(const CostMatrix& cm) {
  const std::size_t t_n = cm.frames(), n_n = cm.steps();
  if (n_n == 0) throw InvalidArgument("dtw_align: transcript has no steps");
  if (t_n < n_n) {
    throw NoValidAlignment("dtw_align: " + std::to_string(t_n) + " frames cannot cover " + std::to_string(n_n) +
                           " transcript steps");
  }
  constexpr double inf = std::numeric_limits<double>::infinity();
  // acc(t, n): cheapest cost of frames 0..t with frame t on step n.
  Tensor<double> acc = Tensor<double>::matrix(t_n, n_n, inf);
  acc(0, 0) = cm.cost(0, 0);
  for (std::size_t t = 1; t < t_n; ++t) {
    // Step n is reachable at frame t only if n <= t and the remaining
    // T-1-t frames can still cover steps n+1..N-1.
    const std::size_t lo = (t + n_n > t_n) ? t + n_n - t_n : 0;
    const std::size_t hi = std::min(t, n_n - 1);
    for (std::size_t n = lo; n <= hi; ++n) {
      const double stay = acc(t - 1, n);
      const double advance = n > 0 ? acc(t - 1, n - 1) : inf;
      acc(t, n) = std::min(stay, advance) + cm.cost(t, n);
    }
  }

  Alignment out;
  out.step_index.assign(t_n, 0);
  std::size_t n = n_n - 1;
  out.step_index[t_n - 1] = n;
  for (std::size_t t = t_n - 1; t > 0; --t) {
    // Going back, taking the advance on ties puts each transition as late
    // as possible.
    if (n > 0 && acc(t - 1, n - 1) <= acc(t - 1, n)) --n;
    out.step_index[t - 1] = n;
  }
  double total = 0.0;
  for (std::size_t t = 0; t < t_n; ++t) total += cm.cost(t, out.step_index[t]);
  out.total_cost = total;
  return out;
}

bool is_valid_alignment(const std::vector<std::size_t>& step_index, std::size_t steps) {
  if (step_index.empty() || steps == 0) return false;
  if (step_index.front() != 0 || step_index.back() != steps - 1) return false;
  for (std::size_t t = 1; t < step_index.size(); ++t) {
    if (step_index[t] < step_index[t - 1] || step_index[t] > step_index[t - 1] + 1) return false;
  }
  return true;
}

PseudoLabelRecord best_match(const FrameProbs& probs, const CandidateSet& candidates) {
  const std::size_t t_n = probs.frames();
  bool found = false;
  PseudoLabelRecord best;
  double best_score = 0.0;
  for (const auto& cand : candidates) {
    // Adjacent repeats would align to one run of frames anyway.
    Transcript merged;
    for (Label s : cand.transcript.steps) {
      if (merged.steps.empty() || merged.steps.back() != s) merged.steps.push_back(s);
    }
    if (merged.size() == 0 || merged.size() > t_n) continue;
    const Alignment al = dtw_align(build_cost(probs, merged));
    const bool better = !found || al.total_cost < best.cost ||
                        (al.total_cost == best.cost &&
                         (cand.score > best_score ||
                          (cand.score == best_score && merged.size() < best.transcript.size())));
    if (!better) continue;
    found = true;
    best_score = cand.score;
    best.cost = al.total_cost;
    best.transcript = merged;
    best.labels.resize(t_n);
    for (std::size_t t = 0; t < t_n; ++t) best.labels[t] = merged.steps[al.step_index[t]];
  }
  if (!found) {
    throw NoFeasibleCandidate("best_match: none of " + std::to_string(candidates.size()) +
                              " candidates fits in " + std::to_string(t_n) + " frames");
  }
  return best;
}

}  // namespace segsemi
