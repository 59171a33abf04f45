#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "segsemi/types.hpp"

namespace segsemi {

// Inclusive frame interval with one class.
struct Segment {
  Label label = 0;
  std::size_t start = 0;
  std::size_t end = 0;
  std::size_t length() const { return end - start + 1; }
  bool operator==(const Segment&) const = default;
};

std::vector<Segment> to_segments(const FrameLabels& labels);

// Percent of frames with pred == truth. With a background id, frames whose
// truth is background are left out (MoF-BG); 0 if nothing is left.
double mof(const FrameLabels& pred, const FrameLabels& truth, std::optional<Label> background = std::nullopt);

// 100 * (1 - Levenshtein(pred classes, truth classes) / max lengths).
double edit_score(const std::vector<Segment>& pred, const std::vector<Segment>& truth);

struct F1Counts {
  std::size_t tp = 0, fp = 0, fn = 0;
  double f1() const;
};

// One-to-one greedy matching: each predicted segment, in order, takes the
// unmatched same-class truth segment with the highest IoU and counts as a
// true positive when that IoU reaches `threshold`.
F1Counts f1_counts(const std::vector<Segment>& pred, const std::vector<Segment>& truth, double threshold,
                   std::optional<Label> background = std::nullopt);
double f1_at(const std::vector<Segment>& pred, const std::vector<Segment>& truth, double threshold,
             std::optional<Label> background = std::nullopt);

// Mean over non-background truth segments of |truth ∩ span| / |span|, where
// span is the union of same-class predicted segments overlapping the truth
// segment; 0 for a truth segment nothing detects.
double iod(const FrameLabels& pred, const FrameLabels& truth, std::optional<Label> background = std::nullopt);

inline constexpr std::array<double, 3> kF1Thresholds{0.10, 0.25, 0.50};

struct MetricReport {
  std::size_t videos = 0;
  double mof = 0.0;     // over all frames of all videos
  double mof_bg = 0.0;  // same, background-truth frames excluded
  double edit = 0.0;    // mean over videos
  std::array<double, 3> f1{};  // from TP/FP/FN pooled over videos
  double iod = 0.0;     // per-video mean, then mean over videos
};

// Aggregates over videos. `preds` and `truths` must be parallel.
MetricReport evaluate_labels(const std::vector<FrameLabels>& preds, const std::vector<FrameLabels>& truths,
                             std::optional<Label> background = std::nullopt);

std::string report_csv_header();
std::string report_csv_row(const std::string& name, const MetricReport& r);
std::string report_text(const std::string& title, const MetricReport& r);

}  // namespace segsemi
