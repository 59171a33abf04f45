#include <doctest.h>

#include <cmath>
#include <functional>

#include "../support/oracles.hpp"
#include "segsemi/error.hpp"
#include "segsemi/transcriber.hpp"

using namespace segsemi;

namespace {

// Deterministic toy decoder: the next-token distribution depends on the whole
// prefix through a hash.
struct ToyDecoder {
  std::size_t classes;
  std::uint64_t salt;
  double spread;

  std::vector<double> dist(const std::vector<Label>& prefix) const {
    std::uint64_t h = salt;
    for (Label l : prefix) h = (h ^ (l + 0x9e37u)) * 0x100000001b3ull;
    std::mt19937_64 rng(h);
    std::uniform_real_distribution<double> u(-spread, spread);
    std::vector<double> v(classes + 1);
    double z = 0.0;
    for (auto& x : v) z += std::exp(x = u(rng));
    for (auto& x : v) x -= std::log(z);
    return v;
  }
  auto step() const {
    return [this](const std::vector<Label>& prefix, Label tok) {
      std::vector<Label> next = prefix;
      if (tok != static_cast<Label>(classes + 1)) next.push_back(tok);
      return std::pair{next, dist(next)};
    };
  }
};

// Every finished hypothesis of length <= max_len, ranked as the beam ranks
// its output.
CandidateSet exhaustive(const ToyDecoder& d, std::size_t max_len, const std::set<Label>* allowed) {
  CandidateSet all;
  const Label eos = static_cast<Label>(d.classes);
  std::function<void(std::vector<Label>&, double)> rec = [&](std::vector<Label>& pre, double lp) {
    const auto next = d.dist(pre);
    if (!pre.empty()) {
      const double f = lp + next[eos];
      all.push_back({{pre}, f, f / static_cast<double>(pre.size() + 1), true});
    }
    for (Label c = 0; c < eos; ++c) {
      if (allowed && !allowed->count(c)) continue;
      pre.push_back(c);
      if (pre.size() == max_len) {
        const double f = lp + next[c];
        all.push_back({{pre}, f, f / static_cast<double>(pre.size()), false});
      } else {
        rec(pre, lp + next[c]);
      }
      pre.pop_back();
    }
  };
  std::vector<Label> pre;
  rec(pre, 0.0);
  std::sort(all.begin(), all.end(), detail::candidate_before);
  return all;
}

CandidateSet run_beam(const ToyDecoder& d, std::size_t width, std::size_t max_len,
                      const std::set<Label>* allowed = nullptr) {
  BeamOptions opt{width, max_len, d.classes, allowed};
  return beam_search(std::vector<Label>{}, static_cast<Label>(d.classes + 1), d.step(), opt);
}

template <class S>
struct Model {
  ParameterStore<S> store;
  Transcriber<S> tr;
  Model(std::size_t classes, std::uint64_t seed, std::size_t max_len = 6) {
    TranscriberConfig c;
    c.num_classes = classes;
    c.pool_k = 4;
    c.enc_hidden = 5;
    c.dec_hidden = 6;
    c.attn_hidden = 4;
    c.embed_dim = 3;
    c.max_decode_len = max_len;
    std::mt19937_64 rng(seed);
    tr = Transcriber<S>(c, store, rng);
  }
};

}  // namespace

TEST_CASE("pool segments split frames into near-equal contiguous runs") {
  const auto r = pool_segments(5, 2);
  REQUIRE(r.size() == 2);
  CHECK(r[0].begin == 0);
  CHECK(r[0].end == 3);
  CHECK(r[1].begin == 3);
  CHECK(r[1].end == 5);
  CHECK(pool_segments(3, 8).size() == 3);
  CHECK_THROWS_AS(pool_segments(0, 2), InvalidArgument);

  std::mt19937_64 rng(1);
  const auto probs = oracle::random_tensor({7, 3}, rng, 0.0, 1.0);
  CHECK(segment_pool(probs, 7) == probs);
  const auto one = segment_pool(probs, 1);
  for (std::size_t c = 0; c < 3; ++c) {
    double m = 0.0;
    for (std::size_t t = 0; t < 7; ++t) m = std::max(m, probs(t, c));
    CHECK(one(0, c) == m);
  }
  for (std::size_t t = 1; t < 40; ++t) {
    for (std::size_t k = 1; k < 12; ++k) {
      const auto s = pool_segments(t, k);
      CHECK(s.front().begin == 0);
      CHECK(s.back().end == t);
      std::size_t lo = t, hi = 0;
      for (std::size_t i = 0; i < s.size(); ++i) {
        if (i > 0) CHECK(s[i].begin == s[i - 1].end);
        lo = std::min(lo, s[i].end - s[i].begin);
        hi = std::max(hi, s[i].end - s[i].begin);
      }
      CHECK(hi - lo <= 1);
    }
  }
}

TEST_CASE("labels to transcript collapses runs") {
  CHECK(labels_to_transcript({0, 0, 2, 2, 2, 1, 0}).steps == std::vector<Label>{0, 2, 1, 0});
  CHECK(labels_to_transcript({}).size() == 0);
  std::mt19937_64 rng(2);
  for (int rep = 0; rep < 100; ++rep) {
    const auto y = oracle::random_runs(30, 4, 5, rng);
    std::vector<Label> naive;
    for (const auto& s : oracle::runs(y)) naive.push_back(s.label);
    CHECK(labels_to_transcript(y).steps == naive);
  }
}

TEST_CASE("transcript loss examples") {
  const std::size_t c = 3;
  Graph<double> g(false);
  Var uni = g.constant(Tensor<double>::matrix(3, c + 1, std::log(1.0 / (c + 1))));
  CHECK(g.value(transcript_loss(g, uni, {{1, 2}}, 0.3, false))[0] == doctest::Approx(std::log(4.0)));
  CHECK(g.value(transcript_loss(g, uni, {{1, 2}}, 0.3, true))[0] == doctest::Approx(0.3 * std::log(4.0)));

  Tensor<double> sharp = Tensor<double>::matrix(2, c + 1, -1e300);
  sharp(0, 2) = 0.0;
  sharp(1, c) = 0.0;
  CHECK(g.value(transcript_loss(g, g.constant(sharp), {{2}}, 0.3, false))[0] == 0.0);

  std::mt19937_64 rng(3);
  const auto lp = oracle::random_logp(3, c + 1, rng);
  const double expect = -(lp(0, 0) + lp(1, 1) + lp(2, c)) / 3.0;
  CHECK(g.value(transcript_loss(g, g.constant(lp), {{0, 1}}, 0.3, false))[0] == doctest::Approx(expect));

  CHECK_THROWS_AS(transcript_loss(g, uni, {{1}}, 0.3, false), ShapeError);
  CHECK_THROWS_AS(transcript_loss(g, uni, {}, 0.3, false), InvalidArgument);
}

TEST_CASE("beam search with a wide beam equals exhaustive enumeration") {
  for (std::uint64_t salt = 0; salt < 30; ++salt) {
    const ToyDecoder d{2, salt, 2.0};
    const auto all = exhaustive(d, 3, nullptr);
    REQUIRE(all.size() == 14);
    const auto beam = run_beam(d, 14, 3);
    REQUIRE(beam.size() == all.size());
    for (std::size_t i = 0; i < all.size(); ++i) {
      CHECK(beam[i].transcript == all[i].transcript);
      CHECK(beam[i].score == doctest::Approx(all[i].score).epsilon(1e-12));
      CHECK(beam[i].ended_with_eos == all[i].ended_with_eos);
    }
  }
}

TEST_CASE("beam candidates are sorted, distinct and scored consistently") {
  std::mt19937_64 rng(4);
  for (std::uint64_t salt = 0; salt < 50; ++salt) {
    const ToyDecoder d{4, salt, 3.0};
    const auto beam = run_beam(d, 5, 6);
    CHECK(beam.size() <= 5);
    for (std::size_t i = 0; i < beam.size(); ++i) {
      const auto& c = beam[i];
      CHECK(c.transcript.size() >= 1);
      CHECK(c.transcript.size() <= 6);
      // Re-score the candidate through the decoder.
      double lp = 0.0;
      std::vector<Label> pre;
      for (Label l : c.transcript.steps) {
        lp += d.dist(pre)[l];
        pre.push_back(l);
      }
      if (c.ended_with_eos) lp += d.dist(pre)[4];
      CHECK(c.log_prob == doctest::Approx(lp).epsilon(1e-12));
      const double len = static_cast<double>(c.transcript.size() + (c.ended_with_eos ? 1 : 0));
      CHECK(c.score == doctest::Approx(lp / len).epsilon(1e-12));
      if (i > 0) {
        CHECK_FALSE(detail::candidate_before(c, beam[i - 1]));
        for (std::size_t j = 0; j < i; ++j) CHECK_FALSE(beam[j].transcript == c.transcript);
      }
    }
  }
}

TEST_CASE("beam mask and empty beam") {
  const ToyDecoder d{4, 7, 2.0};
  const std::set<Label> allowed{1, 3};
  for (const auto& c : run_beam(d, 5, 5, &allowed)) {
    for (Label l : c.transcript.steps) CHECK(allowed.count(l) == 1);
  }
  const auto all = exhaustive(d, 3, &allowed);
  const auto beam = run_beam(d, 64, 3, &allowed);
  REQUIRE(beam.size() == all.size());
  for (std::size_t i = 0; i < all.size(); ++i) CHECK(beam[i].transcript == all[i].transcript);

  const std::set<Label> none;
  CHECK_THROWS_AS(run_beam(d, 5, 5, &none), EmptyBeam);
  const std::set<Label> foreign{9};
  CHECK_THROWS_AS(run_beam(d, 5, 5, &foreign), EmptyBeam);
}

TEST_CASE("EOS is never emitted first") {
  // EOS carries nearly all of the mass at every position.
  BeamOptions opt{3, 4, 2, nullptr};
  auto step = [](int, Label) { return std::pair{0, std::vector<double>{-20.0, -21.0, -1e-9}}; };
  const auto beam = beam_search(0, Label{3}, step, opt);
  for (const auto& c : beam) CHECK(c.transcript.size() >= 1);
  CHECK(beam.front().transcript.steps == std::vector<Label>{0});
}

TEST_CASE("beam width 1 equals greedy decoding on the model") {
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    Model<double> m(5, seed);
    std::mt19937_64 rng(seed + 1000);
    const FrameProbs probs{oracle::random_logp(11, 5, rng, 3.0)};
    const auto beam = m.tr.beam_decode(m.store, probs, 1, nullptr);
    const auto greedy = m.tr.greedy_decode(m.store, probs, nullptr);
    REQUIRE(beam.size() == 1);
    CHECK(beam[0].transcript == greedy.transcript);
    CHECK(beam[0].log_prob == doctest::Approx(greedy.log_prob).epsilon(1e-12));
  }
}

TEST_CASE("transcriber model shapes, mask and teacher forcing") {
  Model<double> m(4, 11);
  std::mt19937_64 rng(12);
  const FrameProbs probs{oracle::random_logp(9, 4, rng)};
  Graph<double> g(false);
  const auto enc = m.tr.encode(g, m.store, g.constant(probs.probs()));
  CHECK(g.value(enc.states).rows() == 4);
  CHECK(g.value(enc.states).cols() == 10);
  const auto tf = g.value(m.tr.teacher_forced(g, m.store, enc, {{2, 0, 3}}));
  CHECK(tf.rows() == 4);
  CHECK(tf.cols() == 5);
  for (std::size_t r = 0; r < 4; ++r) {
    double z = 0.0;
    for (double v : tf.row(r)) z += std::exp(v);
    CHECK(z == doctest::Approx(1.0).epsilon(1e-12));
  }
  const std::set<Label> allowed{0, 2};
  for (const auto& c : m.tr.beam_decode(m.store, probs, 5, &allowed)) {
    CHECK(c.transcript.size() <= 6);
    for (Label l : c.transcript.steps) CHECK(allowed.count(l) == 1);
  }
  const std::set<Label> none;
  CHECK_THROWS_AS(m.tr.beam_decode(m.store, probs, 5, &none), EmptyBeam);

  // Single and double precision agree on the decoded candidate.
  Model<float> mf(4, 11);
  const auto a = m.tr.greedy_decode(m.store, probs, nullptr);
  const auto b = mf.tr.greedy_decode(mf.store, probs, nullptr);
  CHECK(a.transcript == b.transcript);
}
