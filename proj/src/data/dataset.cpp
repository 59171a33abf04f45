#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>
#include <sstream>

#include <json.hpp>

#include "segsemi/data.hpp"
#include "segsemi/error.hpp"

namespace segsemi {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

const char* split_name(int which) {
  switch (which) {
    case 0: return "train_annotated";
    case 1: return "train_unannotated";
    default: return "test";
  }
}

json video_entry(const VideoRecord& v, int which) {
  json e;
  e["id"] = v.id;
  e["split"] = split_name(which);
  e["activity"] = v.activity;
  e["features"] = "features/" + v.id + ".segf";
  if (v.labels) e["labels"] = "labels/" + v.id + ".segl";
  if (v.hidden_labels) e["hidden_labels"] = "hidden/" + v.id + ".segl";
  if (v.allowed_actions) e["allowed_actions"] = std::vector<Label>(v.allowed_actions->begin(), v.allowed_actions->end());
  return e;
}

[[noreturn]] void manifest_fail(const fs::path& file, std::size_t video, const std::string& what) {
  throw ParseError(file.string(), "video", video, what);
}

}  // namespace

void save_dataset(const Dataset& d, const fs::path& dir) {
  fs::create_directories(dir);
  json m;
  m["format"] = "segsemi-dataset";
  m["version"] = 1;
  m["classes"] = d.classes;
  m["background"] = d.background ? json(*d.background) : json(nullptr);
  m["feature_dim"] = d.feature_dim;
  json videos = json::array();
  const std::vector<VideoRecord>* parts[3] = {&d.train_annotated, &d.train_unannotated, &d.test};
  for (int which = 0; which < 3; ++which) {
    for (const auto& v : *parts[which]) {
      write_features(dir / "features" / (v.id + ".segf"), v.features);
      if (v.labels) write_labels(dir / "labels" / (v.id + ".segl"), *v.labels);
      if (v.hidden_labels) write_labels(dir / "hidden" / (v.id + ".segl"), *v.hidden_labels);
      videos.push_back(video_entry(v, which));
    }
  }
  m["videos"] = std::move(videos);
  std::ofstream out(dir / kManifestName, std::ios::trunc);
  if (!out) throw Error("cannot write " + (dir / kManifestName).string());
  out << m.dump(1) << '\n';
}

Dataset load_dataset(const fs::path& dir, const LoadOptions& options) {
  const fs::path file = dir / kManifestName;
  std::ifstream in(file);
  if (!in) throw ParseError(file.string(), "byte", 0, "cannot open manifest");
  json m;
  try {
    m = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ParseError(file.string(), "byte", e.byte, e.what());
  }
  Dataset d;
  try {
    if (m.at("format").get<std::string>() != "segsemi-dataset") {
      throw ParseError(file.string(), "byte", 0, "not a segsemi dataset manifest");
    }
    d.classes = m.at("classes").get<std::vector<std::string>>();
    if (m.contains("background") && !m["background"].is_null()) d.background = m["background"].get<Label>();
    d.feature_dim = m.at("feature_dim").get<std::size_t>();
  } catch (const json::exception& e) {
    throw ParseError(file.string(), "byte", 0, std::string("manifest header: ") + e.what());
  }
  if (d.classes.empty()) throw ParseError(file.string(), "byte", 0, "empty class vocabulary");

  const auto& videos = m.contains("videos") ? m["videos"] : json::array();
  std::set<std::string> seen;
  for (std::size_t i = 0; i < videos.size(); ++i) {
    const auto& e = videos[i];
    VideoRecord v;
    std::string which;
    try {
      v.id = e.at("id").get<std::string>();
      which = e.at("split").get<std::string>();
      v.activity = e.value("activity", std::string{});
      v.features = read_features(dir / e.at("features").get<std::string>());
      if (e.contains("labels")) v.labels = read_labels(dir / e["labels"].get<std::string>());
      if (options.read_hidden_labels && e.contains("hidden_labels")) {
        v.hidden_labels = read_labels(dir / e["hidden_labels"].get<std::string>());
      }
      if (e.contains("allowed_actions")) {
        const auto ids = e["allowed_actions"].get<std::vector<Label>>();
        v.allowed_actions = std::set<Label>(ids.begin(), ids.end());
      }
    } catch (const json::exception& ex) {
      manifest_fail(file, i, ex.what());
    }
    if (!seen.insert(v.id).second) manifest_fail(file, i, "duplicate id '" + v.id + "'");
    if (v.features.dim() != d.feature_dim) {
      manifest_fail(file, i, "feature dim " + std::to_string(v.features.dim()) + " differs from manifest " +
                                 std::to_string(d.feature_dim));
    }
    for (const auto* lab : {&v.labels, &v.hidden_labels}) {
      if (!*lab) continue;
      if ((*lab)->size() != v.features.frames()) {
        manifest_fail(file, i, "labels cover " + std::to_string((*lab)->size()) + " frames, features have " +
                                   std::to_string(v.features.frames()));
      }
      for (Label l : **lab) {
        if (l >= d.classes.size()) manifest_fail(file, i, "label " + std::to_string(l) + " outside vocabulary");
      }
    }
    if (which == "train_annotated") {
      if (!v.labels) manifest_fail(file, i, "annotated video '" + v.id + "' has no labels");
      d.train_annotated.push_back(std::move(v));
    } else if (which == "train_unannotated") {
      v.labels.reset();
      d.train_unannotated.push_back(std::move(v));
    } else if (which == "test") {
      d.test.push_back(std::move(v));
    } else {
      manifest_fail(file, i, "unknown split '" + which + "'");
    }
  }
  return d;
}

// ---- grammar --------------------------------------------------------------

GrammarConfig GrammarConfig::defaults() {
  GrammarConfig g;
  g.num_classes = 8;
  g.feature_dim = 16;
  // 0 take_cup, 1 pour_coffee, 2 add_milk, 3 stir, 4 crack_egg, 5 fry,
  // 6 pour_oil, 7 serve
  g.activities = {
      {"coffee", {{0}, {1}, {2, 0.5}, {3}, {7, 0.5}}},
      {"omelet", {{6}, {4}, {3, 0.5}, {5}, {7}}},
      {"pancake", {{4}, {2}, {3}, {6, 0.5}, {5}, {7}}},
  };
  g.duration_mean = {50, 80, 40, 45, 60, 90, 35, 50};
  g.duration_sd = {15, 20, 12, 12, 18, 25, 10, 15};
  // Per-video shifts comparable to the prototype spread make thirty
  // annotated videos too few to cover the variation.
  g.video_shift = 2.0;
  return g;
}

void GrammarConfig::validate() const {
  auto fail = [](const std::string& m) { throw InvalidArgument("grammar: " + m); };
  if (num_classes == 0) fail("num_classes must be positive");
  if (feature_dim == 0) fail("feature_dim must be positive");
  if (activities.empty()) fail("at least one activity is required");
  if (duration_mean.size() != num_classes || duration_sd.size() != num_classes) {
    fail("duration_mean and duration_sd need one entry per class");
  }
  for (const auto& a : activities) {
    if (a.steps.empty()) fail("activity '" + a.name + "' has no steps");
    bool required = false;
    for (const auto& s : a.steps) {
      if (s.action >= num_classes) fail("activity '" + a.name + "' uses unknown action " + std::to_string(s.action));
      if (s.keep_prob <= 0.0 || s.keep_prob > 1.0) fail("keep_prob must lie in (0, 1]");
      required = required || s.keep_prob >= 1.0;
    }
    if (!required) fail("activity '" + a.name + "' needs at least one required step");
  }
  if (min_frames == 0 || min_frames > max_frames) fail("frame range is empty");
  if (min_segment == 0) fail("min_segment must be positive");
  if (smooth_window == 0) fail("smooth_window must be >= 1");
  if (noise < 0 || video_shift < 0 || prototype_scale <= 0) fail("feature scales must be non-negative");
}

namespace {

struct SampledVideo {
  std::string activity;
  FrameLabels labels;
};

SampledVideo sample_video(const GrammarConfig& g, const ActivityGrammar& act, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (std::size_t attempt = 0; attempt < g.max_resample; ++attempt) {
    std::vector<Label> steps;
    for (const auto& s : act.steps) {
      if (s.keep_prob >= 1.0 || unit(rng) < s.keep_prob) {
        // Skipped optional steps could leave equal neighbours; merge them.
        if (steps.empty() || steps.back() != s.action) steps.push_back(s.action);
      }
    }
    FrameLabels labels;
    for (Label a : steps) {
      std::normal_distribution<double> len(g.duration_mean[a], g.duration_sd[a]);
      const double v = std::round(len(rng));
      const auto n = static_cast<std::size_t>(std::max(v, static_cast<double>(g.min_segment)));
      labels.insert(labels.end(), n, a);
    }
    if (labels.size() >= g.min_frames && labels.size() <= g.max_frames) return {act.name, std::move(labels)};
  }
  throw InvalidArgument("grammar: could not fit activity '" + act.name + "' into [" + std::to_string(g.min_frames) +
                        ", " + std::to_string(g.max_frames) + "] frames after " + std::to_string(g.max_resample) +
                        " attempts");
}

FeatureSequence render_features(const GrammarConfig& g, const FrameLabels& labels, const Tensor<double>& protos,
                                std::mt19937_64& rng) {
  std::normal_distribution<double> std_normal(0.0, 1.0);
  const std::size_t t_n = labels.size(), d = g.feature_dim;
  std::vector<double> shift(d);
  for (auto& s : shift) s = g.video_shift * std_normal(rng);
  Tensor<double> raw = Tensor<double>::matrix(t_n, d);
  for (std::size_t t = 0; t < t_n; ++t) {
    for (std::size_t k = 0; k < d; ++k) raw(t, k) = protos(labels[t], k) + shift[k] + g.noise * std_normal(rng);
  }
  FeatureSequence out{Tensor<float>::matrix(t_n, d)};
  const std::size_t r = g.smooth_window / 2;
  for (std::size_t t = 0; t < t_n; ++t) {
    const std::size_t lo = t >= r ? t - r : 0, hi = std::min(t_n - 1, t + r);
    for (std::size_t k = 0; k < d; ++k) {
      double acc = 0.0;
      for (std::size_t s = lo; s <= hi; ++s) acc += raw(s, k);
      out.data(t, k) = static_cast<float>(acc / static_cast<double>(hi - lo + 1));
    }
  }
  return out;
}

}  // namespace

Dataset generate_synthetic(const GrammarConfig& g, const SyntheticCounts& counts, std::uint64_t seed) {
  g.validate();
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> std_normal(0.0, 1.0);
  Tensor<double> protos = Tensor<double>::matrix(g.num_classes, g.feature_dim);
  for (auto& v : protos.values()) v = g.prototype_scale * std_normal(rng);

  Dataset d;
  for (std::size_t c = 0; c < g.num_classes; ++c) d.classes.push_back("action" + std::to_string(c));
  d.feature_dim = g.feature_dim;
  std::uniform_int_distribution<std::size_t> pick(0, g.activities.size() - 1);
  auto make = [&](const std::string& id) {
    const auto& act = g.activities[pick(rng)];
    auto sampled = sample_video(g, act, rng);
    VideoRecord v;
    v.id = id;
    v.activity = sampled.activity;
    v.features = render_features(g, sampled.labels, protos, rng);
    v.labels = std::move(sampled.labels);
    std::set<Label> allowed;
    for (const auto& s : act.steps) allowed.insert(s.action);
    v.allowed_actions = std::move(allowed);
    return v;
  };
  char buf[32];
  for (std::size_t i = 0; i < counts.train; ++i) {
    std::snprintf(buf, sizeof buf, "train%04zu", i);
    d.train_annotated.push_back(make(buf));
  }
  for (std::size_t i = 0; i < counts.test; ++i) {
    std::snprintf(buf, sizeof buf, "test%04zu", i);
    d.test.push_back(make(buf));
  }
  return d;
}

Dataset split(const Dataset& d, double annotated_fraction, std::uint64_t seed) {
  if (!(annotated_fraction > 0.0 && annotated_fraction <= 1.0)) {
    throw InvalidArgument("split: annotated fraction must lie in (0, 1]");
  }
  std::vector<VideoRecord> pool;
  for (const auto* part : {&d.train_annotated, &d.train_unannotated}) {
    for (const auto& v : *part) {
      VideoRecord r = v;
      if (!r.labels) r.labels = r.hidden_labels;
      if (!r.labels) throw InvalidArgument("split: train video '" + r.id + "' has no labels to redistribute");
      r.hidden_labels.reset();
      pool.push_back(std::move(r));
    }
  }
  std::sort(pool.begin(), pool.end(), [](const VideoRecord& a, const VideoRecord& b) { return a.id < b.id; });
  std::mt19937_64 rng(seed);
  std::shuffle(pool.begin(), pool.end(), rng);
  const auto n_annotated = static_cast<std::size_t>(std::llround(annotated_fraction * static_cast<double>(pool.size())));
  if (n_annotated == 0) throw InvalidArgument("split: annotated set would be empty");

  Dataset out;
  out.classes = d.classes;
  out.background = d.background;
  out.feature_dim = d.feature_dim;
  out.test = d.test;
  for (std::size_t i = 0; i < pool.size(); ++i) {
    if (i < n_annotated) {
      out.train_annotated.push_back(std::move(pool[i]));
    } else {
      pool[i].hidden_labels = std::move(pool[i].labels);
      pool[i].labels.reset();
      out.train_unannotated.push_back(std::move(pool[i]));
    }
  }
  return out;
}

GrammarConfig grammar_from_json(const std::string& text, const std::string& source) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(source, "byte", e.byte, e.what());
  }
  GrammarConfig g = GrammarConfig::defaults();
  try {
    g.num_classes = j.value("num_classes", g.num_classes);
    g.feature_dim = j.value("feature_dim", g.feature_dim);
    if (j.contains("activities")) {
      g.activities.clear();
      for (const auto& a : j["activities"]) {
        ActivityGrammar act;
        act.name = a.at("name").get<std::string>();
        for (const auto& s : a.at("steps")) {
          if (s.is_number()) {
            act.steps.push_back({s.get<Label>(), 1.0});
          } else {
            act.steps.push_back({s.at("action").get<Label>(), s.value("keep_prob", 1.0)});
          }
        }
        g.activities.push_back(std::move(act));
      }
    }
    g.duration_mean = j.value("duration_mean", g.duration_mean);
    g.duration_sd = j.value("duration_sd", g.duration_sd);
    g.min_segment = j.value("min_segment", g.min_segment);
    g.min_frames = j.value("min_frames", g.min_frames);
    g.max_frames = j.value("max_frames", g.max_frames);
    g.max_resample = j.value("max_resample", g.max_resample);
    g.prototype_scale = j.value("prototype_scale", g.prototype_scale);
    g.video_shift = j.value("video_shift", g.video_shift);
    g.noise = j.value("noise", g.noise);
    g.smooth_window = j.value("smooth_window", g.smooth_window);
  } catch (const json::exception& e) {
    throw ParseError(source, "byte", 0, e.what());
  }
  g.validate();
  return g;
}

std::string grammar_to_json(const GrammarConfig& g) {
  json j;
  j["num_classes"] = g.num_classes;
  j["feature_dim"] = g.feature_dim;
  json acts = json::array();
  for (const auto& a : g.activities) {
    json steps = json::array();
    for (const auto& s : a.steps) steps.push_back({{"action", s.action}, {"keep_prob", s.keep_prob}});
    acts.push_back({{"name", a.name}, {"steps", steps}});
  }
  j["activities"] = acts;
  j["duration_mean"] = g.duration_mean;
  j["duration_sd"] = g.duration_sd;
  j["min_segment"] = g.min_segment;
  j["min_frames"] = g.min_frames;
  j["max_frames"] = g.max_frames;
  j["max_resample"] = g.max_resample;
  j["prototype_scale"] = g.prototype_scale;
  j["video_shift"] = g.video_shift;
  j["noise"] = g.noise;
  j["smooth_window"] = g.smooth_window;
  return j.dump(2);
}

}  // namespace segsemi
