#include "segsemi/metrics.hpp"

#include <algorithm>
#include <cstdio>

#include "segsemi/error.hpp"

namespace segsemi {

std::vector<Segment> to_segments(const FrameLabels& labels) {
  std::vector<Segment> out;
  for (std::size_t t = 0; t < labels.size(); ++t) {
    if (t == 0 || labels[t] != labels[t - 1]) {
      out.push_back({labels[t], t, t});
    } else {
      out.back().end = t;
    }
  }
  return out;
}

double mof(const FrameLabels& pred, const FrameLabels& truth, std::optional<Label> background) {
  if (pred.size() != truth.size()) {
    throw ShapeError("mof: prediction has " + std::to_string(pred.size()) + " frames, truth has " +
                     std::to_string(truth.size()));
  }
  std::size_t hit = 0, total = 0;
  for (std::size_t t = 0; t < truth.size(); ++t) {
    if (background && truth[t] == *background) continue;
    ++total;
    hit += pred[t] == truth[t] ? 1 : 0;
  }
  return total == 0 ? 0.0 : 100.0 * static_cast<double>(hit) / static_cast<double>(total);
}

double edit_score(const std::vector<Segment>& pred, const std::vector<Segment>& truth) {
  const std::size_t m = pred.size(), n = truth.size();
  if (m == 0 && n == 0) return 100.0;
  std::vector<std::size_t> prev(n + 1), cur(n + 1);
  for (std::size_t j = 0; j <= n; ++j) prev[j] = j;
  for (std::size_t i = 1; i <= m; ++i) {
    cur[0] = i;
    for (std::size_t j = 1; j <= n; ++j) {
      const std::size_t sub = prev[j - 1] + (pred[i - 1].label == truth[j - 1].label ? 0 : 1);
      cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, sub});
    }
    std::swap(prev, cur);
  }
  return 100.0 * (1.0 - static_cast<double>(prev[n]) / static_cast<double>(std::max(m, n)));
}

double F1Counts::f1() const {
  const std::size_t denom = 2 * tp + fp + fn;
  if (denom == 0) return 100.0;
  return 100.0 * 2.0 * static_cast<double>(tp) / static_cast<double>(denom);
}

namespace {

double interval_iou(const Segment& a, const Segment& b) {
  const std::size_t lo = std::max(a.start, b.start), hi = std::min(a.end, b.end);
  if (lo > hi) return 0.0;
  const double inter = static_cast<double>(hi - lo + 1);
  const double uni = static_cast<double>(a.length() + b.length()) - inter;
  return inter / uni;
}

}  // namespace

F1Counts f1_counts(const std::vector<Segment>& pred, const std::vector<Segment>& truth, double threshold,
                   std::optional<Label> background) {
  if (!(threshold > 0.0 && threshold < 1.0)) throw InvalidArgument("f1_at: threshold must lie in (0, 1)");
  auto keep = [&](const Segment& s) { return !background || s.label != *background; };
  std::vector<Segment> p, g;
  std::copy_if(pred.begin(), pred.end(), std::back_inserter(p), keep);
  std::copy_if(truth.begin(), truth.end(), std::back_inserter(g), keep);

  std::vector<bool> used(g.size(), false);
  F1Counts c;
  for (const auto& s : p) {
    double best = 0.0;
    std::size_t best_j = g.size();
    for (std::size_t j = 0; j < g.size(); ++j) {
      if (used[j] || g[j].label != s.label) continue;
      const double iou = interval_iou(s, g[j]);
      if (best_j == g.size() || iou > best) {
        best = iou;
        best_j = j;
      }
    }
    if (best_j < g.size() && best >= threshold) {
      used[best_j] = true;
      ++c.tp;
    } else {
      ++c.fp;
    }
  }
  c.fn = g.size() - c.tp;
  return c;
}

double f1_at(const std::vector<Segment>& pred, const std::vector<Segment>& truth, double threshold,
             std::optional<Label> background) {
  return f1_counts(pred, truth, threshold, background).f1();
}

double iod(const FrameLabels& pred, const FrameLabels& truth, std::optional<Label> background) {
  if (pred.size() != truth.size()) {
    throw ShapeError("iod: prediction has " + std::to_string(pred.size()) + " frames, truth has " +
                     std::to_string(truth.size()));
  }
  const auto ps = to_segments(pred);
  const auto ts = to_segments(truth);
  double total = 0.0;
  std::size_t count = 0;
  bool any_pred = false;
  for (const auto& s : ps) any_pred = any_pred || !background || s.label != *background;
  for (const auto& g : ts) {
    if (background && g.label == *background) continue;
    ++count;
    std::size_t span = 0, inter = 0;
    for (const auto& p : ps) {
      if (p.label != g.label || p.end < g.start || p.start > g.end) continue;
      span += p.length();
      inter += std::min(p.end, g.end) - std::max(p.start, g.start) + 1;
    }
    if (span > 0) total += static_cast<double>(inter) / static_cast<double>(span);
  }
  if (count == 0) return any_pred ? 0.0 : 100.0;
  return 100.0 * total / static_cast<double>(count);
}

MetricReport evaluate_labels(const std::vector<FrameLabels>& preds, const std::vector<FrameLabels>& truths,
                             std::optional<Label> background) {
  if (preds.size() != truths.size()) {
    throw ShapeError("evaluate: " + std::to_string(preds.size()) + " predictions for " +
                     std::to_string(truths.size()) + " videos");
  }
  MetricReport r;
  r.videos = preds.size();
  if (preds.empty()) return r;
  std::size_t hit = 0, frames = 0, hit_bg = 0, frames_bg = 0;
  std::array<F1Counts, 3> f1{};
  double edit = 0.0, iod_sum = 0.0;
  for (std::size_t v = 0; v < preds.size(); ++v) {
    const auto& p = preds[v];
    const auto& t = truths[v];
    if (p.size() != t.size()) {
      throw ShapeError("evaluate: video " + std::to_string(v) + " has " + std::to_string(p.size()) +
                       " predicted frames and " + std::to_string(t.size()) + " truth frames");
    }
    for (std::size_t i = 0; i < t.size(); ++i) {
      const bool ok = p[i] == t[i];
      hit += ok;
      ++frames;
      if (!background || t[i] != *background) {
        hit_bg += ok;
        ++frames_bg;
      }
    }
    const auto ps = to_segments(p), ts = to_segments(t);
    edit += edit_score(ps, ts);
    for (std::size_t k = 0; k < kF1Thresholds.size(); ++k) {
      const auto c = f1_counts(ps, ts, kF1Thresholds[k], background);
      f1[k].tp += c.tp;
      f1[k].fp += c.fp;
      f1[k].fn += c.fn;
    }
    iod_sum += iod(p, t, background);
  }
  const double n = static_cast<double>(preds.size());
  r.mof = frames ? 100.0 * static_cast<double>(hit) / static_cast<double>(frames) : 0.0;
  r.mof_bg = frames_bg ? 100.0 * static_cast<double>(hit_bg) / static_cast<double>(frames_bg) : 0.0;
  r.edit = edit / n;
  for (std::size_t k = 0; k < f1.size(); ++k) r.f1[k] = f1[k].f1();
  r.iod = iod_sum / n;
  return r;
}

std::string report_csv_header() { return "name,videos,mof,mof_bg,edit,f1_10,f1_25,f1_50,iod"; }

std::string report_csv_row(const std::string& name, const MetricReport& r) {
  char buf[256];
  std::snprintf(buf, sizeof buf, "%s,%zu,%.4f,%.4f,%.4f,%.4f,%.4f,%.4f,%.4f", name.c_str(), r.videos, r.mof, r.mof_bg,
                r.edit, r.f1[0], r.f1[1], r.f1[2], r.iod);
  return buf;
}

std::string report_text(const std::string& title, const MetricReport& r) {
  char buf[512];
  std::snprintf(buf, sizeof buf,
                "[%s]\n"
                "  videos   %zu\n"
                "  MoF      %.2f\n"
                "  MoF-BG   %.2f\n"
                "  Edit     %.2f\n"
                "  F1@10    %.2f\n"
                "  F1@25    %.2f\n"
                "  F1@50    %.2f\n"
                "  IoD      %.2f\n",
                title.c_str(), r.videos, r.mof, r.mof_bg, r.edit, r.f1[0], r.f1[1], r.f1[2], r.iod);
  return buf;
}

}  // namespace segsemi
