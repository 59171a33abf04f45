#include <doctest.h>

#include <cmath>

#include "../support/oracles.hpp"
#include "segsemi/error.hpp"
#include "segsemi/matcher.hpp"

using namespace segsemi;

namespace {

Transcript random_transcript(std::size_t n, std::size_t classes, std::mt19937_64& rng) {
  std::uniform_int_distribution<Label> c(0, static_cast<Label>(classes - 1));
  Transcript tr;
  while (tr.size() < n) {
    const Label l = c(rng);
    if (tr.steps.empty() || tr.steps.back() != l) tr.steps.push_back(l);
  }
  return tr;
}

}  // namespace

TEST_CASE("dtw cost equals exhaustive enumeration") {
  std::mt19937_64 rng(1);
  std::size_t instances = 0;
  for (std::size_t t_n = 1; t_n <= 12; ++t_n) {
    for (std::size_t n_n = 1; n_n <= std::min<std::size_t>(4, t_n); ++n_n) {
      for (int rep = 0; rep < 6; ++rep) {
        const CostMatrix cm{oracle::random_tensor({t_n, n_n}, rng, 0.0, 1.0)};
        const auto al = dtw_align(cm);
        const auto brute = oracle::brute_dtw(cm.cost);
        CHECK(al.total_cost == brute.cost);
        CHECK(is_valid_alignment(al.step_index, n_n));
        CHECK(al.step_index.size() == t_n);
        double sum = 0.0;
        for (std::size_t t = 0; t < t_n; ++t) sum += cm.cost(t, al.step_index[t]);
        CHECK(sum == al.total_cost);
        ++instances;
      }
    }
  }
  CHECK(instances >= 200);
}

TEST_CASE("dtw edge cases") {
  std::mt19937_64 rng(2);
  // T == N forces the diagonal.
  const auto diag = dtw_align({oracle::random_tensor({4, 4}, rng, 0.0, 1.0)});
  CHECK(diag.step_index == std::vector<std::size_t>{0, 1, 2, 3});
  // One step covers every frame.
  const auto one = dtw_align({oracle::random_tensor({5, 1}, rng, 0.0, 1.0)});
  CHECK(one.step_index == std::vector<std::size_t>(5, 0));
  CHECK_THROWS_AS(dtw_align({oracle::random_tensor({2, 3}, rng)}), NoValidAlignment);
  CHECK_THROWS_AS(dtw_align({Tensor<double>::matrix(3, 0)}), InvalidArgument);

  // A cost matrix that is zero on an obvious path.
  Tensor<double> c = Tensor<double>::matrix(6, 3, 1.0);
  for (std::size_t t = 0; t < 6; ++t) c(t, t / 2) = 0.0;
  const auto al = dtw_align({c});
  CHECK(al.total_cost == 0.0);
  CHECK(al.step_index == std::vector<std::size_t>{0, 0, 1, 1, 2, 2});
}

TEST_CASE("alignment validity checks") {
  CHECK(is_valid_alignment({0, 0, 1, 2}, 3));
  CHECK_FALSE(is_valid_alignment({0, 2, 2}, 3));
  CHECK_FALSE(is_valid_alignment({1, 1, 2}, 3));
  CHECK_FALSE(is_valid_alignment({0, 1, 1}, 3));
  CHECK_FALSE(is_valid_alignment({0, 1, 0, 1}, 2));
  CHECK_FALSE(is_valid_alignment({}, 1));
}

TEST_CASE("build cost is one minus the step probability") {
  std::mt19937_64 rng(3);
  const FrameProbs p{oracle::random_logp(5, 4, rng)};
  const auto cm = build_cost(p, {{2, 0, 3}});
  CHECK(cm.frames() == 5);
  CHECK(cm.steps() == 3);
  for (std::size_t t = 0; t < 5; ++t) CHECK(cm.cost(t, 2) == doctest::Approx(1.0 - std::exp(p.logp(t, 3))));
  CHECK_THROWS_AS(build_cost(p, {{4}}), InvalidArgument);
  CHECK_THROWS_AS(build_cost(p, {}), InvalidArgument);
}

TEST_CASE("pseudo labels reproduce the chosen transcript") {
  std::mt19937_64 rng(4);
  for (int rep = 0; rep < 200; ++rep) {
    const std::size_t t_n = 6 + rep % 20;
    const FrameProbs p{oracle::random_logp(t_n, 5, rng, 3.0)};
    CandidateSet cands;
    for (int k = 0; k < 4; ++k) {
      Candidate c;
      c.transcript = random_transcript(1 + rng() % 5, 5, rng);
      c.score = -static_cast<double>(rng() % 100) / 10.0;
      cands.push_back(c);
    }
    const auto rec = best_match(p, cands);
    CHECK(labels_to_transcript(rec.labels) == rec.transcript);
    CHECK(rec.labels.size() == t_n);
    double best = 1e300;
    for (const auto& c : cands) best = std::min(best, dtw_align(build_cost(p, c.transcript)).total_cost);
    CHECK(rec.cost == best);
  }
}

TEST_CASE("best match ties, repeats and infeasible candidates") {
  // Uniform probabilities: every transcript of the same length costs the same.
  const FrameProbs flat{Tensor<double>::matrix(6, 3, std::log(1.0 / 3.0))};
  Candidate a{{{0, 1}}, 0.0, -2.0, true}, b{{{2, 1}}, 0.0, -1.0, true};
  CHECK(best_match(flat, {a, b}).transcript == b.transcript);
  b.score = -2.0;
  CHECK(best_match(flat, {a, b}).transcript == a.transcript);

  // Adjacent repeats collapse before alignment.
  Candidate rep{{{1, 1, 2}}, 0.0, 0.0, true};
  CHECK(best_match(flat, {rep}).transcript.steps == std::vector<Label>{1, 2});

  Candidate long_one{{{0, 1, 2, 0, 1, 2, 0}}, 0.0, 0.0, true};
  CHECK(best_match(flat, {long_one, a}).transcript == a.transcript);
  CHECK_THROWS_AS(best_match(flat, {long_one}), NoFeasibleCandidate);
  CHECK_THROWS_AS(best_match(flat, {}), NoFeasibleCandidate);
}
