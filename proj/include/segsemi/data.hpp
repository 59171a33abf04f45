#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "segsemi/types.hpp"

namespace segsemi {

struct VideoRecord {
  std::string id;
  FeatureSequence features;
  std::optional<FrameLabels> labels;
  std::optional<std::set<Label>> allowed_actions;
  std::string activity;
  // Ground truth withheld from the trainer; only verification code reads it.
  std::optional<FrameLabels> hidden_labels;

  bool operator==(const VideoRecord&) const = default;
};

struct Dataset {
  std::vector<std::string> classes;
  std::optional<Label> background;
  std::size_t feature_dim = 0;
  std::vector<VideoRecord> train_annotated;
  std::vector<VideoRecord> train_unannotated;
  std::vector<VideoRecord> test;

  std::size_t num_classes() const { return classes.size(); }
  bool operator==(const Dataset&) const = default;
};

// ---- binary files -------------------------------------------------------
//
// Features: "SEGF", u32 version (1), u32 T, u32 D, T*D float32, row-major.
// Labels:   "SEGL", u32 T, T u32 class ids.
// All integers and floats little-endian.

inline constexpr std::uint32_t kFeatureFormatVersion = 1;

std::string encode_features(const FeatureSequence& f);
FeatureSequence decode_features(const std::string& bytes, const std::string& source = "<memory>");
std::string encode_labels(const FrameLabels& labels);
FrameLabels decode_labels(const std::string& bytes, const std::string& source = "<memory>");

void write_features(const std::filesystem::path& path, const FeatureSequence& f);
FeatureSequence read_features(const std::filesystem::path& path);
void write_labels(const std::filesystem::path& path, const FrameLabels& labels);
FrameLabels read_labels(const std::filesystem::path& path);

// ---- dataset directory --------------------------------------------------
//
// <dir>/manifest.json indexes the vocabulary and every video:
//   {"format": "segsemi-dataset", "version": 1, "classes": [...],
//    "background": null | id, "feature_dim": D,
//    "videos": [{"id", "split": "train_annotated" | "train_unannotated" | "test",
//                "activity", "features": "features/<id>.segf",
//                "labels"?: "labels/<id>.segl",
//                "hidden_labels"?: "hidden/<id>.segl",
//                "allowed_actions"?: [ids]}]}

inline constexpr const char* kManifestName = "manifest.json";

struct LoadOptions {
  // The trainer leaves this off; hidden labels are never read for it.
  bool read_hidden_labels = false;
};

void save_dataset(const Dataset& d, const std::filesystem::path& dir);
Dataset load_dataset(const std::filesystem::path& dir, const LoadOptions& options = {});

// ---- synthetic activity grammar ------------------------------------------

struct GrammarStep {
  Label action = 0;
  double keep_prob = 1.0;  // < 1 marks an optional step
};

struct ActivityGrammar {
  std::string name;
  std::vector<GrammarStep> steps;  // fixed order; optional steps may drop out
};

struct GrammarConfig {
  std::size_t num_classes = 8;
  std::size_t feature_dim = 16;
  std::vector<ActivityGrammar> activities;
  // Per-action segment length in frames: normal(mean, sd), at least min_segment.
  std::vector<double> duration_mean;
  std::vector<double> duration_sd;
  std::size_t min_segment = 8;
  std::size_t min_frames = 200;
  std::size_t max_frames = 500;
  std::size_t max_resample = 1000;
  // Feature model: class prototype + per-video offset + per-frame noise,
  // then a centered moving average.
  double prototype_scale = 1.0;
  double video_shift = 0.0;
  double noise = 1.0;
  std::size_t smooth_window = 5;

  static GrammarConfig defaults();
  void validate() const;
};

struct SyntheticCounts {
  std::size_t train = 90;
  std::size_t test = 30;
};

// All train videos land in train_annotated with labels; use split() to
// withhold labels. Deterministic in `seed`.
Dataset generate_synthetic(const GrammarConfig& grammar, const SyntheticCounts& counts, std::uint64_t seed);

// Pools every train record, shuffles deterministically (by id, then seed),
// and annotates the first round(fraction * n). The rest keep their labels
// only as hidden labels.
Dataset split(const Dataset& d, double annotated_fraction, std::uint64_t seed);

GrammarConfig grammar_from_json(const std::string& text, const std::string& source = "<grammar>");
std::string grammar_to_json(const GrammarConfig& g);

}  // namespace segsemi
