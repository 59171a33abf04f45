#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "segsemi/data.hpp"
#include "segsemi/metrics.hpp"
#include "segsemi/types.hpp"

namespace segsemi {

// Every field maps 1:1 to a JSON config key and a CLI flag of the same name
// (underscores become dashes on the command line).
struct Hyperparams {
  double alpha = 0.3;
  double beta_smooth = 0.15;
  double beta_distill = 0.15;
  double tau = 4.0;
  std::size_t streams = 4;
  std::size_t beam_width = 5;
  std::size_t pool_k = 32;
  double lr = 0.0005;
  std::size_t batch = 3;
  std::size_t total_steps = 12000;
  std::size_t warmup_steps = 2000;
  // A pseudo label computed at step s is reused until step s + interval - 1.
  std::size_t pseudo_refresh_interval = 1;
  std::uint64_t seed = 0;

  std::size_t channels = 64;
  std::size_t gen_layers = 11;
  std::size_t refine_stages = 3;
  std::size_t refine_layers = 10;
  double dropout = 0.5;
  std::size_t enc_hidden = 64;
  std::size_t dec_hidden = 64;
  std::size_t attn_hidden = 64;
  std::size_t embed_dim = 32;
  std::size_t max_decode_len = 24;

  std::string precision = "float";  // "float" or "double"
  // Train and predict on every frame_stride-th frame; predictions are
  // repeated back to full length for evaluation.
  std::size_t frame_stride = 1;
  std::size_t eval_interval = 500;
  std::size_t checkpoint_interval = 0;  // 0: final checkpoint only
  bool use_heuristics = true;
  // Ignore the unannotated set entirely.
  bool baseline = false;
  // Harness only: hidden ground-truth transcripts replace beam candidates.
  bool mixed_supervision = false;

  void validate() const;
  std::string to_json() const;
  // Missing keys keep their current value; unknown keys are an error.
  void merge_json(const std::string& text, const std::string& source = "<config>");

  // Reduced model and schedule for single-machine benchmark runs.
  static Hyperparams desk_profile();
};

// Applies f(key, field) to every Hyperparams field, in declaration order.
template <class H, class F>
void visit_fields(H& h, F&& f) {
  f("alpha", h.alpha);
  f("beta_smooth", h.beta_smooth);
  f("beta_distill", h.beta_distill);
  f("tau", h.tau);
  f("streams", h.streams);
  f("beam_width", h.beam_width);
  f("pool_k", h.pool_k);
  f("lr", h.lr);
  f("batch", h.batch);
  f("total_steps", h.total_steps);
  f("warmup_steps", h.warmup_steps);
  f("pseudo_refresh_interval", h.pseudo_refresh_interval);
  f("seed", h.seed);
  f("channels", h.channels);
  f("gen_layers", h.gen_layers);
  f("refine_stages", h.refine_stages);
  f("refine_layers", h.refine_layers);
  f("dropout", h.dropout);
  f("enc_hidden", h.enc_hidden);
  f("dec_hidden", h.dec_hidden);
  f("attn_hidden", h.attn_hidden);
  f("embed_dim", h.embed_dim);
  f("max_decode_len", h.max_decode_len);
  f("precision", h.precision);
  f("frame_stride", h.frame_stride);
  f("eval_interval", h.eval_interval);
  f("checkpoint_interval", h.checkpoint_interval);
  f("use_heuristics", h.use_heuristics);
  f("baseline", h.baseline);
  f("mixed_supervision", h.mixed_supervision);
}

// Per-step batch means of every loss term.
struct StepLosses {
  double ls_f = 0.0;  // supervised frame loss, summed over streams and stages
  double lu_f = 0.0;  // unsupervised frame loss, streams 2..L
  double ls_g = 0.0;  // supervised transcript loss
  double lu_g = 0.0;  // pseudo transcript loss
  double ld = 0.0;    // distillation
  double total = 0.0;
};

// L = (L_s^f + L_s^g) + (L_u^f + L_u^g) + beta_distill * L_d.
double total_loss(const StepLosses& terms, double beta_distill);

struct MetricsRow {
  std::size_t step = 0;
  StepLosses losses;  // mean over the steps since the previous row; row 0 holds step 1
  bool evaluated = false;
  MetricReport eval;  // collected mode on the test split
};

std::string metrics_csv_header();
std::string metrics_csv_row(const MetricsRow& row);

enum class EvalMode { collected, final_stream };

struct Prediction {
  FrameProbs collected;
  FrameProbs final_stream;
};

struct EvalResult {
  MetricReport collected;
  MetricReport final_stream;
  std::vector<FrameLabels> pred_collected;
  std::vector<FrameLabels> pred_final_stream;
};

struct TrainHooks {
  // Called after every optimizer update.
  std::function<void(std::size_t step, const StepLosses&)> on_step;
  // Ground-truth transcripts by video id, used as the sole candidate when
  // mixed_supervision is on. Only the harness fills this.
  const std::map<std::string, Transcript>* injected_transcripts = nullptr;
  // Where periodic and final checkpoints go; empty disables them.
  std::filesystem::path checkpoint_dir;
  // Stop (after checkpointing) once this step is reached; 0 runs to the end.
  std::size_t stop_at_step = 0;
  // Skip the evaluation rows (losses only); speeds up harness runs.
  bool skip_eval = false;
};

struct TrainSummary {
  std::vector<MetricsRow> history;
  std::size_t infeasible_pseudo_labels = 0;
  std::size_t steps_done = 0;
};

// Model + optimizer + schedule state. Built for one vocabulary and feature
// width; precision is fixed at construction.
class Session {
 public:
  virtual ~Session() = default;

  static std::unique_ptr<Session> create(const Hyperparams& hyper, std::vector<std::string> classes,
                                         std::size_t feature_dim);
  // Restores everything needed to continue training bit-for-bit.
  static std::unique_ptr<Session> load(const std::filesystem::path& checkpoint);

  virtual const Hyperparams& hyper() const = 0;
  virtual const std::vector<std::string>& classes() const = 0;
  virtual std::size_t feature_dim() const = 0;
  virtual std::size_t step() const = 0;
  virtual std::size_t parameter_count() const = 0;

  // Runs from the current step to total_steps (or hooks.stop_at_step).
  // Unlabelled test videos are skipped when evaluating.
  virtual TrainSummary train(const Dataset& data, const TrainHooks& hooks = {}) = 0;

  virtual Prediction predict(const FeatureSequence& features) const = 0;
  virtual EvalResult evaluate(const std::vector<VideoRecord>& videos, std::optional<Label> background) const = 0;

  virtual void save(const std::filesystem::path& checkpoint) const = 0;
};

// Writes <path> (binary) and <path>.json (config sidecar).
inline std::filesystem::path checkpoint_sidecar(const std::filesystem::path& checkpoint) {
  return std::filesystem::path(checkpoint.string() + ".json");
}

}  // namespace segsemi
