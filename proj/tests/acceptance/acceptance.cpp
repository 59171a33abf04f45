// Acceptance suite. Prints one PASS/FAIL line per criterion and exits
// non-zero if any criterion fails.
//
//   acceptance                      all criteria, 5 seeds
//   acceptance --only 1,2,3         a subset
//   acceptance --runs runs.csv      also write one row per training run

#include <CLI11.hpp>

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include <omp.h>

#include "gradient_cases.hpp"
#include "oracles.hpp"
#include "segsemi/data.hpp"
#include "segsemi/kernels.hpp"
#include "segsemi/matcher.hpp"
#include "segsemi/metrics.hpp"
#include "segsemi/trainer.hpp"

using namespace segsemi;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

struct Outcome {
  bool pass = true;
  std::string detail;
};

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

std::string fmt(const char* f, double a) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

// ---- 1: gradients ------------------------------------------------------------

Outcome gradients() {
  const auto t0 = Clock::now();
  double worst = 0.0;
  std::string where;
  std::size_t checked = 0;
  for (const auto& c : gradcases::all_cases()) {
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
      const auto rep = c.run(seed);
      checked += rep.checked;
      if (rep.checked == 0) return {false, c.name + " checked nothing"};
      if (rep.max_rel > worst) {
        worst = rep.max_rel;
        where = c.name + " seed " + std::to_string(seed) + " " + rep.worst;
      }
    }
  }
  const double secs = seconds_since(t0);
  Outcome o{worst <= 1e-4 && secs < 60.0, ""};
  o.detail = std::to_string(gradcases::all_cases().size()) + " cases x 20 seeds, " + std::to_string(checked) +
             " entries, max rel err " + fmt("%.2e", worst) + ", " + fmt("%.1f s", secs);
  if (!o.pass) o.detail += " worst at " + where;
  return o;
}

// ---- 2: alignment ------------------------------------------------------------

Outcome alignment() {
  const auto t0 = Clock::now();
  std::mt19937_64 rng(2024);
  std::size_t n = 0, bad = 0;
  for (std::size_t t_n = 1; t_n <= 12; ++t_n) {
    for (std::size_t n_n = 1; n_n <= std::min<std::size_t>(4, t_n); ++n_n) {
      for (int rep = 0; rep < 8; ++rep) {
        const CostMatrix cm{oracle::random_tensor({t_n, n_n}, rng, 0.0, 1.0)};
        const Alignment al = dtw_align(cm);
        const auto brute = oracle::brute_dtw(cm.cost);
        bool ok = al.total_cost == brute.cost && is_valid_alignment(al.step_index, n_n) &&
                  al.step_index.size() == t_n;
        for (std::size_t t = 1; ok && t < t_n; ++t) ok = al.step_index[t] >= al.step_index[t - 1];
        bad += !ok;
        ++n;
      }
    }
  }
  const double secs = seconds_since(t0);
  return {bad == 0 && n >= 200 && secs < 10.0,
          std::to_string(n) + " instances, " + std::to_string(bad) + " mismatches, " + fmt("%.2f s", secs)};
}

// ---- 3: metrics --------------------------------------------------------------

Outcome metric_oracles() {
  std::mt19937_64 rng(77);
  std::size_t n = 0, bad = 0;
  for (int rep = 0; rep < 100; ++rep) {
    const std::size_t t_n = 1 + rng() % 80, classes = 2 + rng() % 5;
    const auto truth = oracle::random_runs(t_n, classes, 1 + rng() % 15, rng);
    const auto pred = oracle::random_runs(t_n, classes, 1 + rng() % 15, rng);
    const auto ps = to_segments(pred), ts = to_segments(truth);
    const std::optional<Label> bg = rep % 2 ? std::optional<Label>{0} : std::nullopt;
    bool ok = edit_score(ps, ts) == oracle::edit_score(pred, truth);
    for (double thr : kF1Thresholds) ok = ok && f1_at(ps, ts, thr, bg) == oracle::f1(oracle::f1_counts(pred, truth, thr, bg));
    ok = ok && iod(pred, truth, bg) == oracle::iod(pred, truth, bg);
    bad += !ok;
    ++n;
  }
  return {bad == 0 && n >= 50, std::to_string(n) + " instances, " + std::to_string(bad) + " mismatches"};
}

// ---- 4-8: training runs ------------------------------------------------------

struct RunResult {
  double mof = 0.0;
  double mof_final_stream = 0.0;
  double seconds = 0.0;
};

struct Condition {
  std::string name;
  std::function<void(Hyperparams&)> edit;
  bool full_supervision = false;
  bool inject_transcripts = false;
};

const std::vector<Condition>& conditions() {
  static const std::vector<Condition> c{
      {"baseline", [](Hyperparams& h) { h.baseline = true; h.streams = 1; }},
      {"semi", [](Hyperparams&) {}},
      {"full", [](Hyperparams&) {}, true},
      {"semi_L1", [](Hyperparams& h) { h.streams = 1; }},
      {"semi_L2", [](Hyperparams& h) { h.streams = 2; }},
      {"alpha_1", [](Hyperparams& h) { h.alpha = 1.0; }},
      {"no_heuristics", [](Hyperparams& h) { h.use_heuristics = false; }},
      {"mixed", [](Hyperparams& h) { h.use_heuristics = false; h.mixed_supervision = true; }, false, true},
  };
  return c;
}

class Benchmark {
 public:
  Benchmark(std::size_t seeds, std::size_t steps, std::string runs_csv)
      : seeds_(seeds), steps_(steps), runs_csv_(std::move(runs_csv)) {
    if (!runs_csv_.empty()) std::ofstream(runs_csv_, std::ios::trunc) << "condition,seed,mof,mof_final_stream,seconds\n";
  }

  const std::vector<RunResult>& results(const std::string& name) {
    auto it = cache_.find(name);
    if (it != cache_.end()) return it->second;
    const auto& cond = *std::find_if(conditions().begin(), conditions().end(),
                                     [&](const Condition& c) { return c.name == name; });
    std::vector<RunResult> out;
    for (std::size_t seed = 1; seed <= seeds_; ++seed) out.push_back(run(cond, seed));
    return cache_[name] = std::move(out);
  }

  std::vector<double> mof(const std::string& name) {
    std::vector<double> v;
    for (const auto& r : results(name)) v.push_back(r.mof);
    return v;
  }
  std::vector<double> mof_final_stream(const std::string& name) {
    std::vector<double> v;
    for (const auto& r : results(name)) v.push_back(r.mof_final_stream);
    return v;
  }

 private:
  const Dataset& data(std::size_t seed, bool full) {
    const auto key = std::make_pair(seed, full);
    auto it = data_.find(key);
    if (it != data_.end()) return it->second;
    const Dataset raw = generate_synthetic(GrammarConfig::defaults(), {}, seed);
    return data_[key] = split(raw, full ? 1.0 : 1.0 / 3.0, seed);
  }

  RunResult run(const Condition& cond, std::size_t seed) {
    const auto t0 = Clock::now();
    Hyperparams h = Hyperparams::desk_profile();
    h.seed = seed;
    if (steps_ != 0) {
      h.warmup_steps = h.warmup_steps * steps_ / h.total_steps;
      h.total_steps = steps_;
      h.eval_interval = steps_;
    }
    cond.edit(h);
    h.validate();
    const Dataset& d = data(seed, cond.full_supervision);
    std::map<std::string, Transcript> injected;
    TrainHooks hooks;
    hooks.skip_eval = true;
    if (cond.inject_transcripts) {
      for (const auto& v : d.train_unannotated) injected[v.id] = labels_to_transcript(*v.hidden_labels);
      hooks.injected_transcripts = &injected;
    }
    auto session = Session::create(h, d.classes, d.feature_dim);
    session->train(d, hooks);
    const EvalResult ev = session->evaluate(d.test, d.background);
    RunResult r{ev.collected.mof, ev.final_stream.mof, seconds_since(t0)};
    std::fprintf(stderr, "  run %-14s seed %zu  MoF %6.2f  final-stream %6.2f  %5.1f s\n", cond.name.c_str(), seed,
                 r.mof, r.mof_final_stream, r.seconds);
    if (!runs_csv_.empty()) {
      std::ofstream(runs_csv_, std::ios::app) << cond.name << "," << seed << "," << fmt("%.4f", r.mof) << ","
                                              << fmt("%.4f", r.mof_final_stream) << "," << fmt("%.1f", r.seconds)
                                              << "\n";
    }
    return r;
  }

  std::size_t seeds_, steps_;
  std::string runs_csv_;
  std::map<std::string, std::vector<RunResult>> cache_;
  std::map<std::pair<std::size_t, bool>, Dataset> data_;
};

Outcome semi_vs_baseline(Benchmark& b) {
  const double base = median(b.mof("baseline")), semi = median(b.mof("semi")), full = median(b.mof("full"));
  return {semi >= base + 3.0 && full >= semi,
          "median MoF baseline " + fmt("%.2f", base) + ", semi " + fmt("%.2f", semi) + ", full " + fmt("%.2f", full) +
              " (need semi >= baseline + 3, full >= semi)"};
}

Outcome streams_monotone(Benchmark& b) {
  const double l1 = median(b.mof("semi_L1")), l2 = median(b.mof("semi_L2")), l4 = median(b.mof("semi"));
  return {l1 <= l2 && l2 <= l4,
          "median MoF L=1 " + fmt("%.2f", l1) + ", L=2 " + fmt("%.2f", l2) + ", L=4 " + fmt("%.2f", l4)};
}

Outcome collected_vs_final(Benchmark& b) {
  const double col = median(b.mof("semi")), fin = median(b.mof_final_stream("semi"));
  const double base = median(b.mof("baseline"));
  return {col >= fin && fin >= base, "median MoF collected " + fmt("%.2f", col) + ", final stream " +
                                         fmt("%.2f", fin) + ", baseline " + fmt("%.2f", base)};
}

Outcome pseudo_weight(Benchmark& b) {
  const double a03 = median(b.mof("semi")), a1 = median(b.mof("alpha_1"));
  return {a03 >= a1, "median MoF alpha=0.3 " + fmt("%.2f", a03) + ", alpha=1.0 " + fmt("%.2f", a1)};
}

Outcome injected_transcripts(Benchmark& b) {
  const double m = median(b.mof("mixed")), nh = median(b.mof("no_heuristics"));
  return {m >= nh, "median MoF ground-truth transcripts " + fmt("%.2f", m) + ", no heuristics " + fmt("%.2f", nh)};
}

// ---- 9: reductions -----------------------------------------------------------

Hyperparams small_profile(std::uint64_t seed) {
  Hyperparams h = Hyperparams::desk_profile();
  h.total_steps = 60;
  h.warmup_steps = 20;
  h.eval_interval = 20;
  h.seed = seed;
  return h;
}

std::string history_csv(const std::vector<MetricsRow>& rows) {
  std::string out = metrics_csv_header() + "\n";
  for (const auto& r : rows) out += metrics_csv_row(r) + "\n";
  return out;
}

std::string train_csv(const Hyperparams& h, const Dataset& d, const TrainHooks& hooks = {}) {
  auto s = Session::create(h, d.classes, d.feature_dim);
  return history_csv(s->train(d, hooks).history);
}

Outcome reductions() {
  std::vector<std::string> failed;
  const Dataset d = split(generate_synthetic(GrammarConfig::defaults(), {18, 6}, 9), 1.0 / 3.0, 9);

  // Empty unannotated set against the annotated-only baseline.
  {
    Dataset only = d;
    only.train_unannotated.clear();
    Hyperparams h = small_profile(1);
    const auto semi = train_csv(h, only);
    h.baseline = true;
    if (semi != train_csv(h, d)) failed.push_back("empty unannotated set");
  }
  // One stream: distillation has nothing to act on.
  {
    Hyperparams h = small_profile(2);
    h.streams = 1;
    const auto a = train_csv(h, d);
    h.beta_distill = 5.0;
    if (a != train_csv(h, d)) failed.push_back("L=1 distillation weight");

    ParameterStore<double> ms_store, st_store;
    MultiStreamConfig mc;
    mc.stream = {d.feature_dim, d.num_classes(), 8, 3, 1, 3, 0.5};
    mc.streams = 1;
    std::mt19937_64 r1(5), r2(5);
    MultiStream<double> ms(mc, ms_store, r1);
    StreamConfig sc = mc.stream;
    Stream<double> single(sc, st_store, "stream0.", r2);
    Tensor<double> x({d.test[0].features.frames(), d.feature_dim});
    for (std::size_t i = 0; i < x.size(); ++i) x[i] = d.test[0].features.data[i];
    Graph<double> g(false);
    const auto out = ms.forward(g, ms_store, x, {});
    const auto ref = single.forward(g, st_store, g.constant(x), {});
    bool same = out.stages.size() == 1 && out.stages[0].size() == ref.size();
    for (std::size_t k = 0; same && k < ref.size(); ++k) {
      same = g.value(out.stages[0][k]) == g.value(ref[k]);
      const FrameLabels y = *d.test[0].labels;
      same = same && g.value(frame_loss_supervised(g, out.stages[0][k], y, 0.15, 4.0)) ==
                         g.value(frame_loss_supervised(g, ref[k], y, 0.15, 4.0));
    }
    same = same && out.collected.logp == final_stream_prediction(g, out).logp &&
           g.value(distill_loss(g, out, 4.0))[0] == 0.0;
    if (!same) failed.push_back("L=1 forward and losses");
  }
  // Beam width 1 against greedy decoding.
  {
    std::size_t mismatches = 0;
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
      TranscriberConfig tc;
      tc.num_classes = 6;
      tc.pool_k = 8;
      tc.enc_hidden = 8;
      tc.dec_hidden = 8;
      tc.attn_hidden = 8;
      tc.embed_dim = 4;
      tc.max_decode_len = 10;
      ParameterStore<double> st;
      std::mt19937_64 rng(seed);
      Transcriber<double> tr(tc, st, rng);
      const FrameProbs probs{oracle::random_logp(20 + seed % 30, 6, rng, 3.0)};
      const auto beam = tr.beam_decode(st, probs, 1, nullptr);
      const auto greedy = tr.greedy_decode(st, probs, nullptr);
      mismatches += beam.size() != 1 || beam[0].transcript != greedy.transcript || beam[0].log_prob != greedy.log_prob;
    }
    if (mismatches) failed.push_back("M=1 beam vs greedy (" + std::to_string(mismatches) + " of 100)");
  }
  std::string detail = "empty unannotated set, L=1 distillation, M=1 beam on 100 decoder states";
  for (const auto& f : failed) detail += "; FAILED " + f;
  return {failed.empty(), detail};
}

// ---- 10: determinism ---------------------------------------------------------

Outcome determinism() {
  const int threads = omp_get_max_threads();
  omp_set_num_threads(1);
  const Dataset d = split(generate_synthetic(GrammarConfig::defaults(), {18, 6}, 4), 1.0 / 3.0, 4);
  const Hyperparams h = small_profile(8);
  const fs::path dir = fs::temp_directory_path() / "segsemi_acceptance_determinism";
  fs::create_directories(dir);
  for (const char* name : {"a.csv", "b.csv"}) std::ofstream(dir / name, std::ios::trunc) << train_csv(h, d);
  omp_set_num_threads(threads);
  auto slurp = [](const fs::path& p) {
    std::ostringstream s;
    s << std::ifstream(p).rdbuf();
    return s.str();
  };
  const auto a = slurp(dir / "a.csv"), b = slurp(dir / "b.csv");
  fs::remove_all(dir);
  const auto rows = std::count(a.begin(), a.end(), '\n');
  return {a == b && rows == 5, "two single-threaded runs, " + std::to_string(rows) + " csv lines, " +
                                   (a == b ? "identical" : "different")};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance criteria"};
  std::vector<int> only;
  std::size_t seeds = 5, steps = 0;
  std::string runs_csv;
  app.add_option("--only", only, "criteria to run (default all)")->delimiter(',')->check(CLI::Range(1, 10));
  app.add_option("--seeds", seeds, "seeds per training condition")->check(CLI::PositiveNumber);
  app.add_option("--steps", steps, "override the training length of criteria 4-8");
  app.add_option("--runs", runs_csv, "write per-run results to this csv");
  CLI11_PARSE(app, argc, argv);
  kernels::configure_threads_from_env();

  Benchmark bench(seeds, steps, runs_csv);
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"gradient integrity", gradients},
      {"alignment oracle", alignment},
      {"metric oracles", metric_oracles},
      {"semi-supervised vs baseline vs full", [&] { return semi_vs_baseline(bench); }},
      {"MoF non-decreasing in streams", [&] { return streams_monotone(bench); }},
      {"collected vs final stream", [&] { return collected_vs_final(bench); }},
      {"pseudo-label weight", [&] { return pseudo_weight(bench); }},
      {"ground-truth transcripts vs no heuristics", [&] { return injected_transcripts(bench); }},
      {"reduction identities", reductions},
      {"determinism", determinism},
  };
  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int id = static_cast<int>(i + 1);
    if (!only.empty() && std::find(only.begin(), only.end(), id) == only.end()) continue;
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("threw: ") + e.what()};
    }
    failures += !o.pass;
    std::printf("criterion %2d %s  %s: %s\n", id, o.pass ? "PASS" : "FAIL", criteria[i].first.c_str(),
                o.detail.c_str());
    std::fflush(stdout);
  }
  return failures == 0 ? 0 : 1;
}
