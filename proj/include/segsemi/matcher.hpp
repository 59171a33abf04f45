#pragma once

#include <cstddef>
#include <vector>

#include "segsemi/beam.hpp"
#include "segsemi/tensor.hpp"
#include "segsemi/types.hpp"

namespace segsemi {

// [T, N] with entry (t, n) = 1 - p(t, s_n).
struct CostMatrix {
  Tensor<double> cost;

  std::size_t frames() const { return cost.rows(); }
  std::size_t steps() const { return cost.cols(); }
};

// step_index[t] is the transcript step frame t is assigned to.
struct Alignment {
  std::vector<std::size_t> step_index;
  double total_cost = 0.0;
};

struct PseudoLabelRecord {
  FrameLabels labels;
  Transcript transcript;
  double cost = 0.0;
};

CostMatrix build_cost(const FrameProbs& probs, const Transcript& transcript);

// Minimum-cost monotone alignment where every step covers at least one
// contiguous run of frames, steps in order, none skipped. Among equal-cost
// alignments the one with the latest transitions wins. Throws
// NoValidAlignment when T < N.
Alignment dtw_align(const CostMatrix& cost);

// True when `a` starts at step 0, ends at step steps-1 and advances by at
// most one step per frame.
bool is_valid_alignment(const std::vector<std::size_t>& step_index, std::size_t steps);

// Aligns every feasible candidate (adjacent repeats merged first, N <= T) and
// keeps the cheapest; ties go to the higher decoder score, then the shorter
// transcript. Throws NoFeasibleCandidate when none qualifies.
PseudoLabelRecord best_match(const FrameProbs& probs, const CandidateSet& candidates);

}  // namespace segsemi
