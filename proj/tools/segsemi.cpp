// segsemi: generate synthetic data, train, evaluate and predict.
//
// Exit codes: 0 success, 1 runtime failure (including non-finite losses),
// 2 bad input (arguments, configs, malformed or mismatched files).

#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <type_traits>

#include <CLI11.hpp>
#include <json.hpp>

#include "segsemi/data.hpp"
#include "segsemi/error.hpp"
#include "segsemi/kernels.hpp"
#include "segsemi/metrics.hpp"
#include "segsemi/trainer.hpp"

namespace fs = std::filesystem;
using namespace segsemi;
using nlohmann::json;

namespace {

constexpr int kExitRuntime = 1;
constexpr int kExitBadInput = 2;

std::string read_text(const fs::path& p) {
  std::ifstream in(p);
  if (!in) throw InvalidArgument("cannot read " + p.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const fs::path& p, const std::string& text) {
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  std::ofstream out(p, std::ios::trunc);
  if (!out) throw Error("cannot write " + p.string());
  out << text;
  if (!out) throw Error("write failed for " + p.string());
}

// Every Hyperparams field becomes an optional flag; given flags override the
// config file.
class HyperFlags {
 public:
  void attach(CLI::App& app) {
    Hyperparams defaults;
    visit_fields(defaults, [&](const char* key, auto& field) {
      using T = std::decay_t<decltype(field)>;
      std::string flag = std::string("--") + key;
      for (auto& c : flag) c = c == '_' ? '-' : c;
      if constexpr (std::is_same_v<T, bool>) {
        const std::string names = flag + ",!--no-" + flag.substr(2);
        flags_[key] = app.add_flag(names, bools_[key], "override '" + std::string(key) + "'");
      } else {
        flags_[key] = app.add_option(flag, strings_[key], "override '" + std::string(key) + "'");
      }
    });
  }

  // Precedence: profile, then config file, then flags.
  Hyperparams resolve(const std::string& profile, const std::string& config_path) const {
    Hyperparams h;
    if (profile == "desk") {
      h = Hyperparams::desk_profile();
    } else if (profile != "default") {
      throw InvalidArgument("--profile must be default or desk");
    }
    if (!config_path.empty()) h.merge_json(read_text(config_path), config_path);
    json overrides = json::object();
    visit_fields(h, [&](const char* key, auto& field) {
      using T = std::decay_t<decltype(field)>;
      if (flags_.at(key)->count() == 0) return;
      if constexpr (std::is_same_v<T, bool>) {
        overrides[key] = bools_.at(key);
      } else if constexpr (std::is_same_v<T, std::string>) {
        overrides[key] = strings_.at(key);
      } else {
        try {
          overrides[key] = json::parse(strings_.at(key));
        } catch (const json::exception&) {
          throw InvalidArgument("--" + std::string(key) + ": not a number: " + strings_.at(key));
        }
      }
    });
    h.merge_json(overrides.dump(), "command line");
    h.validate();
    return h;
  }

 private:
  std::map<std::string, CLI::Option*> flags_;
  std::map<std::string, std::string> strings_;
  std::map<std::string, bool> bools_;
};

const std::vector<VideoRecord>& pick_split(const Dataset& d, const std::string& name) {
  if (name == "test") return d.test;
  if (name == "train_annotated") return d.train_annotated;
  if (name == "train_unannotated") return d.train_unannotated;
  throw InvalidArgument("unknown split '" + name + "'");
}

// ---- gen-data ----------------------------------------------------------------

struct GenArgs {
  std::string out, grammar;
  std::uint64_t seed = 0;
  std::size_t train = 90, test = 30;
  double fraction = 1.0 / 3.0;
};

int cmd_gen_data(const GenArgs& a) {
  GrammarConfig g = a.grammar.empty() ? GrammarConfig::defaults() : grammar_from_json(read_text(a.grammar), a.grammar);
  Dataset d = split(generate_synthetic(g, {a.train, a.test}, a.seed), a.fraction, a.seed);
  save_dataset(d, a.out);
  write_text(fs::path(a.out) / "grammar.json", grammar_to_json(g) + "\n");
  std::printf("wrote %s: %zu annotated, %zu unannotated, %zu test videos, %zu classes, D=%zu\n", a.out.c_str(),
              d.train_annotated.size(), d.train_unannotated.size(), d.test.size(), d.classes.size(), d.feature_dim);
  return 0;
}

// ---- train -------------------------------------------------------------------

struct TrainArgs {
  std::string data, config, out, resume, profile = "default";
  std::size_t stop_at = 0;
};

int cmd_train(const TrainArgs& a, const HyperFlags& flags) {
  std::unique_ptr<Session> session;
  const Hyperparams requested = flags.resolve(a.profile, a.config);
  if (!a.resume.empty()) {
    session = Session::load(a.resume);
    if (session->hyper().to_json() != requested.to_json()) {
      std::fprintf(stderr, "note: resuming with the checkpoint's hyperparameters; --profile, --config and overrides "
                           "are ignored\n");
    }
  }
  const Hyperparams h = session ? session->hyper() : requested;
  LoadOptions opts;
  opts.read_hidden_labels = h.mixed_supervision;
  const Dataset d = load_dataset(a.data, opts);
  if (d.train_annotated.empty()) throw InvalidArgument(a.data + ": dataset has no annotated training videos");

  std::map<std::string, Transcript> injected;
  if (h.mixed_supervision) {
    for (const auto& v : d.train_unannotated) {
      if (v.hidden_labels) injected[v.id] = labels_to_transcript(*v.hidden_labels);
    }
  }
  if (!session) session = Session::create(h, d.classes, d.feature_dim);
  if (session->classes() != d.classes) throw InvalidArgument("checkpoint vocabulary differs from the dataset");

  const fs::path out(a.out);
  fs::create_directories(out);
  write_text(out / "config.json", session->hyper().to_json() + "\n");
  TrainHooks hooks;
  hooks.checkpoint_dir = out;
  hooks.stop_at_step = a.stop_at;
  if (h.mixed_supervision) hooks.injected_transcripts = &injected;
  hooks.on_step = [&](std::size_t s, const StepLosses& l) {
    if (s % session->hyper().eval_interval == 0) {
      std::fprintf(stderr, "step %zu total %.4f (ls_f %.4f lu_f %.4f ls_g %.4f lu_g %.4f ld %.4f)\n", s, l.total,
                   l.ls_f, l.lu_f, l.ls_g, l.lu_g, l.ld);
    }
  };
  std::printf("training %zu parameters (%s precision) for %zu steps\n", session->parameter_count(),
              session->hyper().precision.c_str(), session->hyper().total_steps);
  const TrainSummary sum = session->train(d, hooks);

  std::string csv = metrics_csv_header() + "\n";
  for (const auto& row : sum.history) csv += metrics_csv_row(row) + "\n";
  write_text(out / "metrics.csv", csv);
  if (sum.infeasible_pseudo_labels > 0) {
    std::printf("skipped %zu pseudo labels with no feasible candidate\n", sum.infeasible_pseudo_labels);
  }
  if (!sum.history.empty() && sum.history.back().evaluated) {
    std::printf("%s", report_text("test (collected)", sum.history.back().eval).c_str());
  }
  std::printf("step %zu reached; outputs in %s\n", session->step(), a.out.c_str());
  return 0;
}

// ---- eval --------------------------------------------------------------------

struct EvalArgs {
  std::string checkpoint, data, out, split = "test", predictions, name = "run";
  bool dump = false;
};

std::string ablation_header() {
  return "name,mode,streams,alpha,beam_width,use_heuristics,baseline,mixed_supervision,videos,mof,mof_bg,edit,"
         "f1_10,f1_25,f1_50,iod";
}

std::string ablation_row(const std::string& name, const std::string& mode, const Hyperparams* h,
                         const MetricReport& r) {
  char buf[512];
  if (h) {
    std::snprintf(buf, sizeof buf, "%s,%s,%zu,%g,%zu,%d,%d,%d", name.c_str(), mode.c_str(), h->streams, h->alpha,
                  h->beam_width, h->use_heuristics ? 1 : 0, h->baseline ? 1 : 0, h->mixed_supervision ? 1 : 0);
  } else {
    std::snprintf(buf, sizeof buf, "%s,%s,,,,,,", name.c_str(), mode.c_str());
  }
  const std::string row = report_csv_row("", r);
  return std::string(buf) + row.substr(row.find(','));
}

int cmd_eval(const EvalArgs& a) {
  const Dataset d = load_dataset(a.data);
  const auto& videos = pick_split(d, a.split);
  const fs::path out(a.out);
  fs::create_directories(out);

  if (!a.predictions.empty()) {
    std::vector<FrameLabels> preds, truths;
    for (const auto& v : videos) {
      if (!v.labels) continue;
      FrameLabels p = read_labels(fs::path(a.predictions) / (v.id + ".segl"));
      if (p.size() != v.labels->size()) {
        throw InvalidArgument(v.id + ": prediction covers " + std::to_string(p.size()) + " frames, truth " +
                              std::to_string(v.labels->size()));
      }
      preds.push_back(std::move(p));
      truths.push_back(*v.labels);
    }
    const MetricReport r = evaluate_labels(preds, truths, d.background);
    write_text(out / "report.csv", report_csv_header() + "\n" + report_csv_row("predictions", r) + "\n");
    write_text(out / "report.txt", report_text("predictions (" + a.split + ")", r));
    std::printf("%s", report_text("predictions (" + a.split + ")", r).c_str());
    return 0;
  }

  if (a.checkpoint.empty()) throw InvalidArgument("eval needs --checkpoint or --predictions");
  const auto session = Session::load(a.checkpoint);
  if (session->classes() != d.classes) throw InvalidArgument("checkpoint vocabulary differs from the dataset");
  if (session->feature_dim() != d.feature_dim) throw InvalidArgument("checkpoint feature_dim differs from the dataset");
  const EvalResult r = session->evaluate(videos, d.background);

  const std::string text = report_text("collected (" + a.split + ")", r.collected) +
                           report_text("final_stream (" + a.split + ")", r.final_stream);
  write_text(out / "report.txt", text);
  write_text(out / "report.csv", report_csv_header() + "\n" + report_csv_row("collected", r.collected) + "\n" +
                                     report_csv_row("final_stream", r.final_stream) + "\n");
  const Hyperparams& h = session->hyper();
  write_text(out / "ablation.csv", ablation_header() + "\n" + ablation_row(a.name, "collected", &h, r.collected) +
                                       "\n" + ablation_row(a.name, "final_stream", &h, r.final_stream) + "\n");
  if (a.dump) {
    for (std::size_t i = 0; i < videos.size(); ++i) {
      write_labels(out / "predictions" / (videos[i].id + ".segl"), r.pred_collected[i]);
      write_labels(out / "predictions_final_stream" / (videos[i].id + ".segl"), r.pred_final_stream[i]);
    }
  }
  std::printf("%s", text.c_str());
  return 0;
}

// ---- predict -----------------------------------------------------------------

struct PredictArgs {
  std::string checkpoint, features, out, mode = "collected";
};

int cmd_predict(const PredictArgs& a) {
  if (a.mode != "collected" && a.mode != "final_stream") throw InvalidArgument("--mode must be collected or final_stream");
  const auto session = Session::load(a.checkpoint);
  const FeatureSequence f = read_features(a.features);
  const Prediction p = session->predict(f);
  const FrameLabels labels = (a.mode == "collected" ? p.collected : p.final_stream).argmax();
  write_labels(a.out, labels);
  std::printf("%s: %zu frames, %zu segments\n", a.out.c_str(), labels.size(), labels_to_transcript(labels).size());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Semi-supervised temporal action segmentation"};
  app.require_subcommand(1);

  GenArgs gen;
  auto* g = app.add_subcommand("gen-data", "Generate a synthetic activity dataset");
  g->add_option("--out", gen.out, "Output directory")->required();
  g->add_option("--grammar", gen.grammar, "Grammar JSON (defaults built in)");
  g->add_option("--seed", gen.seed, "Generator and split seed");
  g->add_option("--train", gen.train, "Training videos");
  g->add_option("--test", gen.test, "Test videos");
  g->add_option("--annotated-fraction", gen.fraction, "Fraction of training videos keeping labels");

  TrainArgs tr;
  HyperFlags flags;
  auto* t = app.add_subcommand("train", "Train a model");
  t->add_option("--data", tr.data, "Dataset directory")->required();
  t->add_option("--profile", tr.profile, "Starting hyperparameters: default | desk (small, fast)");
  t->add_option("--config", tr.config, "Hyperparameter JSON, applied over the profile");
  t->add_option("--out", tr.out, "Run directory (metrics.csv, checkpoints)")->required();
  t->add_option("--resume", tr.resume, "Continue from a checkpoint");
  t->add_option("--stop-at", tr.stop_at, "Stop after this step (checkpoint boundaries resume exactly)");
  flags.attach(*t);

  EvalArgs ev;
  auto* e = app.add_subcommand("eval", "Score a checkpoint or a prediction dump");
  e->add_option("--checkpoint", ev.checkpoint, "Checkpoint file");
  e->add_option("--data", ev.data, "Dataset directory")->required();
  e->add_option("--out", ev.out, "Report directory")->required();
  e->add_option("--split", ev.split, "test | train_annotated | train_unannotated");
  e->add_option("--predictions", ev.predictions, "Score <id>.segl files from this directory instead");
  e->add_option("--name", ev.name, "Row name in ablation.csv");
  e->add_flag("--dump-predictions", ev.dump, "Write per-video SEGL predictions");

  PredictArgs pr;
  auto* p = app.add_subcommand("predict", "Label one feature file");
  p->add_option("--checkpoint", pr.checkpoint, "Checkpoint file")->required();
  p->add_option("--features", pr.features, "SEGF input")->required();
  p->add_option("--out", pr.out, "SEGL output")->required();
  p->add_option("--mode", pr.mode, "collected | final_stream");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& err) {
    const int code = app.exit(err);
    return code == 0 ? 0 : kExitBadInput;
  }

  try {
    kernels::configure_threads_from_env();
    if (*g) return cmd_gen_data(gen);
    if (*t) return cmd_train(tr, flags);
    if (*e) return cmd_eval(ev);
    if (*p) return cmd_predict(pr);
  } catch (const ParseError& err) {
    std::fprintf(stderr, "error: %s\n", err.what());
    return kExitBadInput;
  } catch (const InvalidArgument& err) {
    std::fprintf(stderr, "error: %s\n", err.what());
    return kExitBadInput;
  } catch (const ShapeError& err) {
    std::fprintf(stderr, "error: %s\n", err.what());
    return kExitBadInput;
  } catch (const std::exception& err) {
    std::fprintf(stderr, "error: %s\n", err.what());
    return kExitRuntime;
  }
  return 0;
}
