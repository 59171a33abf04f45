#pragma once

// Independent reference implementations used by the unit tests and the
// acceptance binary. Written for clarity, not speed.

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "segsemi/graph.hpp"
#include "segsemi/parameter.hpp"
#include "segsemi/types.hpp"

namespace oracle {

using segsemi::FrameLabels;
using segsemi::Graph;
using segsemi::Label;
using segsemi::ParameterStore;
using segsemi::Tensor;
using segsemi::Var;

inline Tensor<double> random_tensor(const segsemi::Shape& shape, std::mt19937_64& rng, double lo = -1.0,
                                    double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  Tensor<double> t(shape);
  for (auto& v : t.values()) v = u(rng);
  return t;
}

// Random log-probability matrix [rows, cols].
inline Tensor<double> random_logp(std::size_t rows, std::size_t cols, std::mt19937_64& rng, double spread = 2.0) {
  Tensor<double> t = random_tensor({rows, cols}, rng, -spread, spread);
  for (std::size_t r = 0; r < rows; ++r) {
    auto row = t.row(r);
    double z = 0.0;
    for (double v : row) z += std::exp(v);
    for (auto& v : row) v -= std::log(z);
  }
  return t;
}

// ---- finite differences ------------------------------------------------------

struct GradReport {
  double max_rel = 0.0;
  std::size_t checked = 0;
  std::string worst;
};

// |analytic - numeric| / max(|analytic|, |numeric|, floor)
inline double rel_error(double a, double n, double floor = 1e-5) {
  return std::abs(a - n) / std::max({std::abs(a), std::abs(n), floor});
}

struct GradOptions {
  double h = 1e-5;
  std::size_t per_param = 0;  // 0: every entry
  std::uint64_t pick_seed = 0;
  // Parameters upstream of a stop-gradient see their numeric derivative leak
  // through the detached path; the filter leaves them out.
  std::function<bool(const std::string&)> include;
};

// Fourth-order central differences of the scalar built by `build` with
// respect to every parameter entry of `store` (or `per_param` randomly chosen
// entries of each). `build` must be deterministic.
inline GradReport gradcheck(ParameterStore<double>& store,
                            const std::function<Var(Graph<double>&, ParameterStore<double>&)>& build,
                            const GradOptions& opt = {}) {
  const double h = opt.h;
  store.zero_grad();
  {
    Graph<double> g;
    g.backward(build(g, store));
  }
  auto eval = [&] {
    Graph<double> g(false);
    return g.value(build(g, store))[0];
  };
  GradReport rep;
  std::mt19937_64 pick(opt.pick_seed);
  for (auto& p : store) {
    if (opt.include && !opt.include(p.name)) continue;
    std::vector<std::size_t> idx(p.value.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    if (opt.per_param != 0 && idx.size() > opt.per_param) {
      std::shuffle(idx.begin(), idx.end(), pick);
      idx.resize(opt.per_param);
    }
    for (std::size_t i : idx) {
      const double orig = p.value[i];
      auto at = [&](double dx) {
        p.value[i] = orig + dx;
        return eval();
      };
      const double numeric = (8.0 * (at(h) - at(-h)) - (at(2.0 * h) - at(-2.0 * h))) / (12.0 * h);
      p.value[i] = orig;
      const double err = rel_error(p.grad[i], numeric);
      ++rep.checked;
      if (err > rep.max_rel) {
        rep.max_rel = err;
        rep.worst = p.name + "[" + std::to_string(i) + "] analytic=" + std::to_string(p.grad[i]) +
                    " numeric=" + std::to_string(numeric);
      }
    }
  }
  return rep;
}

// ---- alignment ---------------------------------------------------------------

struct BruteAlignment {
  double cost = std::numeric_limits<double>::infinity();
  std::size_t count = 0;  // alignments enumerated
};

// Enumerates every monotone surjective alignment by choosing the N - 1
// frames at which the step advances.
inline BruteAlignment brute_dtw(const Tensor<double>& cost) {
  const std::size_t t_n = cost.rows(), n_n = cost.cols();
  BruteAlignment best;
  if (n_n == 0 || t_n < n_n) return best;
  std::vector<int> choose(t_n - 1, 0);
  std::fill(choose.begin(), choose.begin() + static_cast<std::ptrdiff_t>(n_n - 1), 1);
  std::sort(choose.begin(), choose.end());
  do {
    double total = 0.0;
    std::size_t step = 0;
    for (std::size_t t = 0; t < t_n; ++t) {
      if (t > 0 && choose[t - 1]) ++step;
      total += cost(t, step);
    }
    ++best.count;
    best.cost = std::min(best.cost, total);
  } while (std::next_permutation(choose.begin(), choose.end()));
  return best;
}

// ---- metrics -----------------------------------------------------------------

struct Seg {
  Label label;
  std::size_t start, end;  // inclusive
};

inline std::vector<Seg> runs(const FrameLabels& y) {
  std::vector<Seg> out;
  for (std::size_t t = 0; t < y.size(); ++t) {
    if (t == 0 || y[t] != y[t - 1]) out.push_back({y[t], t, t});
    out.back().end = t;
  }
  return out;
}

inline std::size_t levenshtein(const std::vector<Label>& a, const std::vector<Label>& b) {
  std::vector<std::vector<std::size_t>> d(a.size() + 1, std::vector<std::size_t>(b.size() + 1));
  for (std::size_t i = 0; i <= a.size(); ++i) d[i][0] = i;
  for (std::size_t j = 0; j <= b.size(); ++j) d[0][j] = j;
  for (std::size_t i = 1; i <= a.size(); ++i) {
    for (std::size_t j = 1; j <= b.size(); ++j) {
      d[i][j] = std::min({d[i - 1][j] + 1, d[i][j - 1] + 1, d[i - 1][j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1)});
    }
  }
  return d[a.size()][b.size()];
}

inline double edit_score(const FrameLabels& pred, const FrameLabels& truth) {
  std::vector<Label> p, t;
  for (const auto& s : runs(pred)) p.push_back(s.label);
  for (const auto& s : runs(truth)) t.push_back(s.label);
  const std::size_t m = std::max(p.size(), t.size());
  if (m == 0) return 100.0;
  return 100.0 * (1.0 - static_cast<double>(levenshtein(p, t)) / static_cast<double>(m));
}

// IoU by counting frames.
inline double iou_frames(const Seg& a, const Seg& b) {
  std::size_t inter = 0, uni = 0;
  const std::size_t lo = std::min(a.start, b.start), hi = std::max(a.end, b.end);
  for (std::size_t t = lo; t <= hi; ++t) {
    const bool in_a = t >= a.start && t <= a.end, in_b = t >= b.start && t <= b.end;
    inter += in_a && in_b;
    uni += in_a || in_b;
  }
  return static_cast<double>(inter) / static_cast<double>(uni);
}

struct Counts {
  std::size_t tp = 0, fp = 0, fn = 0;
};

// Quadratic greedy matcher over predicted segments in temporal order.
inline Counts f1_counts(const FrameLabels& pred, const FrameLabels& truth, double thr,
                        std::optional<Label> bg = std::nullopt) {
  std::vector<Seg> p, t;
  for (const auto& s : runs(pred)) {
    if (!bg || s.label != *bg) p.push_back(s);
  }
  for (const auto& s : runs(truth)) {
    if (!bg || s.label != *bg) t.push_back(s);
  }
  std::vector<bool> used(t.size(), false);
  Counts c;
  for (const auto& ps : p) {
    double best = -1.0;
    std::size_t arg = 0;
    for (std::size_t j = 0; j < t.size(); ++j) {
      if (used[j] || t[j].label != ps.label) continue;
      const double v = iou_frames(ps, t[j]);
      if (v > best) {
        best = v;
        arg = j;
      }
    }
    if (best >= thr) {
      used[arg] = true;
      ++c.tp;
    } else {
      ++c.fp;
    }
  }
  c.fn = t.size() - c.tp;
  return c;
}

inline double f1(const Counts& c) {
  if (c.tp + c.fp + c.fn == 0) return 100.0;
  return 100.0 * 2.0 * static_cast<double>(c.tp) / static_cast<double>(2 * c.tp + c.fp + c.fn);
}

// Per truth segment: the detection is every frame of each same-class
// predicted run that touches the segment.
inline double iod(const FrameLabels& pred, const FrameLabels& truth, std::optional<Label> bg = std::nullopt) {
  const auto pr = runs(pred);
  double sum = 0.0;
  std::size_t n = 0;
  for (const auto& ts : runs(truth)) {
    if (bg && ts.label == *bg) continue;
    ++n;
    std::vector<bool> det(pred.size(), false);
    for (const auto& ps : pr) {
      if (ps.label != ts.label || ps.end < ts.start || ps.start > ts.end) continue;
      for (std::size_t t = ps.start; t <= ps.end; ++t) det[t] = true;
    }
    std::size_t inter = 0, span = 0;
    for (std::size_t t = 0; t < pred.size(); ++t) {
      span += det[t];
      inter += det[t] && t >= ts.start && t <= ts.end;
    }
    sum += span == 0 ? 0.0 : static_cast<double>(inter) / static_cast<double>(span);
  }
  if (n == 0) {
    // Nothing to detect: perfect unless something was predicted anyway.
    const bool any = std::any_of(pred.begin(), pred.end(), [&](Label l) { return !bg || l != *bg; });
    return any ? 0.0 : 100.0;
  }
  return 100.0 * sum / static_cast<double>(n);
}

// Random piecewise-constant labelling with `classes` ids.
inline FrameLabels random_runs(std::size_t frames, std::size_t classes, std::size_t max_run, std::mt19937_64& rng) {
  std::uniform_int_distribution<std::size_t> len(1, max_run);
  std::uniform_int_distribution<Label> cls(0, static_cast<Label>(classes - 1));
  FrameLabels y;
  while (y.size() < frames) {
    const Label c = cls(rng);
    const std::size_t n = std::min(len(rng), frames - y.size());
    y.insert(y.end(), n, c);
  }
  return y;
}

}  // namespace oracle
