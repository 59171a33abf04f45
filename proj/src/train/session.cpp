#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <random>
#include <sstream>
#include <unordered_map>

#include <json.hpp>

#include "segsemi/adam.hpp"
#include "segsemi/backbone.hpp"
#include "segsemi/error.hpp"
#include "segsemi/matcher.hpp"
#include "segsemi/multistream.hpp"
#include "segsemi/trainer.hpp"
#include "segsemi/transcriber.hpp"

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

namespace segsemi {

namespace {

using nlohmann::json;

constexpr char kCheckpointMagic[4] = {'S', 'E', 'G', 'C'};
constexpr std::uint32_t kCheckpointVersion = 1;

// ---- strided views ---------------------------------------------------------

template <class S>
Tensor<S> strided_features(const FeatureSequence& f, std::size_t stride) {
  const std::size_t t_n = (f.frames() + stride - 1) / stride, d = f.dim();
  Tensor<S> out = Tensor<S>::matrix(t_n, d);
  for (std::size_t t = 0; t < t_n; ++t) {
    for (std::size_t k = 0; k < d; ++k) out(t, k) = static_cast<S>(f.data(t * stride, k));
  }
  return out;
}

FrameLabels strided_labels(const FrameLabels& labels, std::size_t stride) {
  FrameLabels out;
  for (std::size_t t = 0; t < labels.size(); t += stride) out.push_back(labels[t]);
  return out;
}

FrameProbs upsample(const FrameProbs& p, std::size_t frames, std::size_t stride) {
  if (stride == 1) return p;
  FrameProbs out{Tensor<double>::matrix(frames, p.classes())};
  for (std::size_t t = 0; t < frames; ++t) {
    const auto src = p.logp.row(std::min(t / stride, p.frames() - 1));
    std::copy(src.begin(), src.end(), out.logp.row(t).begin());
  }
  return out;
}

// ---- binary helpers --------------------------------------------------------

class Out {
 public:
  template <class T>
  void pod(T v) {
    char b[sizeof(T)];
    std::memcpy(b, &v, sizeof(T));
    buf_.append(b, sizeof(T));
  }
  void str(const std::string& s) {
    pod<std::uint64_t>(s.size());
    buf_ += s;
  }
  template <class S>
  void tensor(const Tensor<S>& t) {
    pod<std::uint32_t>(static_cast<std::uint32_t>(t.ndim()));
    for (auto d : t.shape()) pod<std::uint64_t>(d);
    const auto v = t.values();
    buf_.append(reinterpret_cast<const char*>(v.data()), v.size() * sizeof(S));
  }
  void raw(const char* p, std::size_t n) { buf_.append(p, n); }
  const std::string& bytes() const { return buf_; }

 private:
  std::string buf_;
};

class In {
 public:
  In(std::string bytes, std::string source) : buf_(std::move(bytes)), source_(std::move(source)) {}
  template <class T>
  T pod() {
    need(sizeof(T));
    T v;
    std::memcpy(&v, buf_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return v;
  }
  std::string str() {
    const auto n = pod<std::uint64_t>();
    need(n);
    std::string s = buf_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  template <class S>
  Tensor<S> tensor() {
    const auto nd = pod<std::uint32_t>();
    if (nd > 8) fail("tensor rank " + std::to_string(nd));
    Shape shape;
    for (std::uint32_t i = 0; i < nd; ++i) shape.push_back(pod<std::uint64_t>());
    Tensor<S> t(shape);
    const std::size_t bytes = t.size() * sizeof(S);
    need(bytes);
    std::memcpy(t.data(), buf_.data() + pos_, bytes);
    pos_ += bytes;
    return t;
  }
  void expect(const char* magic, std::size_t n) {
    need(n);
    if (std::memcmp(buf_.data() + pos_, magic, n) != 0) fail("bad magic");
    pos_ += n;
  }
  bool done() const { return pos_ == buf_.size(); }
  [[noreturn]] void fail(const std::string& what) const { throw ParseError(source_, "offset", pos_, what); }

 private:
  void need(std::size_t n) const {
    if (buf_.size() - pos_ < n) fail("truncated checkpoint");
  }
  std::string buf_;
  std::string source_;
  std::size_t pos_ = 0;
};

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw Error("cannot open " + p.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void spill(const std::filesystem::path& p, const std::string& bytes) {
  if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write " + p.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error("write failed for " + p.string());
}

std::vector<double> row_to_vector(const MetricsRow& r) {
  const auto& l = r.losses;
  const auto& e = r.eval;
  return {static_cast<double>(r.step), l.ls_f, l.lu_f, l.ls_g, l.lu_g, l.ld, l.total, r.evaluated ? 1.0 : 0.0,
          static_cast<double>(e.videos), e.mof, e.mof_bg, e.edit, e.f1[0], e.f1[1], e.f1[2], e.iod};
}

MetricsRow row_from_vector(const std::vector<double>& v) {
  if (v.size() != 16) throw Error("checkpoint: malformed history row");
  MetricsRow r;
  r.step = static_cast<std::size_t>(v[0]);
  r.losses = {v[1], v[2], v[3], v[4], v[5], v[6]};
  r.evaluated = v[7] != 0.0;
  r.eval.videos = static_cast<std::size_t>(v[8]);
  r.eval.mof = v[9];
  r.eval.mof_bg = v[10];
  r.eval.edit = v[11];
  r.eval.f1 = {v[12], v[13], v[14]};
  r.eval.iod = v[15];
  return r;
}

StepLosses& operator+=(StepLosses& a, const StepLosses& b) {
  a.ls_f += b.ls_f;
  a.lu_f += b.lu_f;
  a.ls_g += b.ls_g;
  a.lu_g += b.lu_g;
  a.ld += b.ld;
  a.total += b.total;
  return a;
}

StepLosses scaled(StepLosses a, double f) {
  a.ls_f *= f;
  a.lu_f *= f;
  a.ls_g *= f;
  a.lu_g *= f;
  a.ld *= f;
  a.total *= f;
  return a;
}

bool finite(const StepLosses& l) {
  return std::isfinite(l.ls_f) && std::isfinite(l.lu_f) && std::isfinite(l.ls_g) && std::isfinite(l.lu_g) &&
         std::isfinite(l.ld) && std::isfinite(l.total);
}

// ---- session ---------------------------------------------------------------

template <class S>
class SessionImpl final : public Session {
 public:
  SessionImpl(const Hyperparams& hyper, std::vector<std::string> classes, std::size_t feature_dim)
      : hyper_(hyper), classes_(std::move(classes)), feature_dim_(feature_dim) {
    hyper_.validate();
    if (classes_.empty()) throw InvalidArgument("session: empty class vocabulary");
    if (feature_dim_ == 0) throw InvalidArgument("session: feature_dim must be positive");
    std::mt19937_64 init_rng(hyper_.seed);
    MultiStreamConfig mc;
    mc.streams = hyper_.streams;
    mc.stream.input_dim = feature_dim_;
    mc.stream.num_classes = classes_.size();
    mc.stream.channels = hyper_.channels;
    mc.stream.gen_layers = hyper_.gen_layers;
    mc.stream.refine_stages = hyper_.refine_stages;
    mc.stream.refine_layers = hyper_.refine_layers;
    mc.stream.dropout = hyper_.dropout;
    model_ = MultiStream<S>(mc, store_, init_rng);
    TranscriberConfig tc;
    tc.num_classes = classes_.size();
    tc.pool_k = hyper_.pool_k;
    tc.enc_hidden = hyper_.enc_hidden;
    tc.dec_hidden = hyper_.dec_hidden;
    tc.attn_hidden = hyper_.attn_hidden;
    tc.embed_dim = hyper_.embed_dim;
    tc.max_decode_len = hyper_.max_decode_len;
    transcriber_ = Transcriber<S>(tc, store_, init_rng);
    AdamConfig ac;
    ac.lr = hyper_.lr;
    adam_ = Adam<S>(ac, store_);
    sample_rng_.seed(hyper_.seed ^ 0x5bd1e9955bd1e995ull);
    dropout_rng_.seed(hyper_.seed ^ 0x27d4eb2f165667c5ull);
  }

  const Hyperparams& hyper() const override { return hyper_; }
  const std::vector<std::string>& classes() const override { return classes_; }
  std::size_t feature_dim() const override { return feature_dim_; }
  std::size_t step() const override { return step_; }
  std::size_t parameter_count() const override { return store_.scalar_count(); }

  TrainSummary train(const Dataset& data, const TrainHooks& hooks) override;
  Prediction predict(const FeatureSequence& features) const override;
  EvalResult evaluate(const std::vector<VideoRecord>& videos, std::optional<Label> background) const override;
  void save(const std::filesystem::path& checkpoint) const override;
  void restore(In& in);

 private:
  struct Entry {
    const VideoRecord* video = nullptr;
    Tensor<S> features;
    bool annotated = false;
    FrameLabels labels;     // strided, annotated only
    Transcript transcript;  // ground truth for annotated videos
    const std::set<Label>* allowed = nullptr;
    std::optional<Transcript> injected;
  };
  struct CachedPseudo {
    std::size_t step = 0;
    PseudoLabelRecord record;
  };

  void check_dataset(const Dataset& data) const;
  std::vector<Entry> build_entries(const Dataset& data, const TrainHooks& hooks) const;
  StepLosses train_step(std::size_t s, std::vector<Entry>& entries);
  std::optional<PseudoLabelRecord> pseudo_label(std::size_t s, std::size_t index, const Entry& e,
                                                const FrameProbs& collected);
  MetricsRow eval_row(std::size_t s, const Dataset& data, bool skip) const;

  Hyperparams hyper_;
  std::vector<std::string> classes_;
  std::size_t feature_dim_ = 0;
  ParameterStore<S> store_;
  MultiStream<S> model_;
  Transcriber<S> transcriber_;
  Adam<S> adam_;
  std::mt19937_64 sample_rng_;
  std::mt19937_64 dropout_rng_;
  std::size_t step_ = 0;
  std::size_t infeasible_ = 0;
  std::vector<MetricsRow> history_;
  StepLosses window_;
  std::size_t window_count_ = 0;
  std::unordered_map<std::size_t, CachedPseudo> pseudo_cache_;
};

template <class S>
void SessionImpl<S>::check_dataset(const Dataset& data) const {
  if (data.classes != classes_) throw InvalidArgument("session: dataset vocabulary differs from the model's");
  if (data.feature_dim != feature_dim_) {
    throw InvalidArgument("session: dataset feature_dim " + std::to_string(data.feature_dim) + " differs from " +
                          std::to_string(feature_dim_));
  }
}

template <class S>
auto SessionImpl<S>::build_entries(const Dataset& data, const TrainHooks& hooks) const -> std::vector<Entry> {
  std::vector<Entry> out;
  const std::size_t stride = hyper_.frame_stride;
  for (const auto& v : data.train_annotated) {
    if (!v.labels) throw InvalidArgument("train: annotated video '" + v.id + "' has no labels");
    Entry e;
    e.video = &v;
    e.features = strided_features<S>(v.features, stride);
    e.annotated = true;
    e.labels = strided_labels(*v.labels, stride);
    e.transcript = labels_to_transcript(e.labels);
    out.push_back(std::move(e));
  }
  if (hyper_.baseline) return out;
  for (const auto& v : data.train_unannotated) {
    Entry e;
    e.video = &v;
    e.features = strided_features<S>(v.features, stride);
    if (hyper_.use_heuristics && v.allowed_actions) e.allowed = &*v.allowed_actions;
    if (hyper_.mixed_supervision && hooks.injected_transcripts) {
      const auto it = hooks.injected_transcripts->find(v.id);
      if (it != hooks.injected_transcripts->end()) e.injected = it->second;
    }
    out.push_back(std::move(e));
  }
  return out;
}

template <class S>
std::optional<PseudoLabelRecord> SessionImpl<S>::pseudo_label(std::size_t s, std::size_t index, const Entry& e,
                                                              const FrameProbs& collected) {
  const auto hit = pseudo_cache_.find(index);
  if (hit != pseudo_cache_.end() && s - hit->second.step < hyper_.pseudo_refresh_interval) {
    return hit->second.record;
  }
  CandidateSet candidates;
  try {
    if (e.injected) {
      candidates.push_back(Candidate{*e.injected, 0.0, 0.0, true});
    } else {
      candidates = transcriber_.beam_decode(store_, collected, hyper_.beam_width, e.allowed);
    }
    PseudoLabelRecord rec = best_match(collected, candidates);
    pseudo_cache_[index] = CachedPseudo{s, rec};
    return rec;
  } catch (const NoFeasibleCandidate&) {
  } catch (const EmptyBeam&) {
  }
  ++infeasible_;
  pseudo_cache_.erase(index);
  return std::nullopt;
}

template <class S>
StepLosses SessionImpl<S>::train_step(std::size_t s, std::vector<Entry>& entries) {
  store_.zero_grad();
  std::uniform_int_distribution<std::size_t> pick(0, entries.size() - 1);
  std::vector<std::size_t> batch(hyper_.batch);
  for (auto& b : batch) b = pick(sample_rng_);

  const S alpha = static_cast<S>(hyper_.alpha), beta = static_cast<S>(hyper_.beta_smooth);
  const S tau = static_cast<S>(hyper_.tau);
  const S inv_batch = S(1) / static_cast<S>(batch.size());
  const bool unsup_active = s > hyper_.warmup_steps;
  StepLosses mean;
  for (std::size_t index : batch) {
    const Entry& e = entries[index];
    Graph<S> g;
    ForwardContext ctx{hyper_.dropout > 0.0 ? &dropout_rng_ : nullptr};
    const StreamOutputs out = model_.forward(g, store_, e.features, ctx);
    const Var zero = g.constant(Tensor<S>({1}));
    Var ls_f = zero, lu_f = zero, ls_g = zero, lu_g = zero;
    if (e.annotated) {
      for (const auto& stream : out.stages) {
        for (Var stage : stream) ls_f = g.add(ls_f, frame_loss_supervised(g, stage, e.labels, beta, tau));
      }
      const auto enc = transcriber_.encode(g, store_, g.constant(out.collected.probs().template cast<S>()));
      ls_g = transcript_loss(g, transcriber_.teacher_forced(g, store_, enc, e.transcript), e.transcript, alpha, false);
    } else if (unsup_active) {
      if (auto rec = pseudo_label(s, index, e, out.collected)) {
        // Stream 1 is trained on ground truth only.
        for (std::size_t l = 1; l < out.streams(); ++l) {
          for (Var stage : out.stages[l]) {
            lu_f = g.add(lu_f, frame_loss_unsupervised(g, stage, rec->labels, alpha, beta, tau));
          }
        }
        const auto enc = transcriber_.encode(g, store_, g.constant(out.collected.probs().template cast<S>()));
        lu_g = transcript_loss(g, transcriber_.teacher_forced(g, store_, enc, rec->transcript), rec->transcript,
                               alpha, true);
      }
    }
    const Var ld = distill_loss(g, out, tau);
    Var total = g.add(g.add(ls_f, ls_g), g.add(lu_f, lu_g));
    total = g.add(total, g.scale(ld, static_cast<S>(hyper_.beta_distill)));
    g.backward(g.scale(total, inv_batch));

    StepLosses v;
    v.ls_f = static_cast<double>(g.value(ls_f)[0]);
    v.lu_f = static_cast<double>(g.value(lu_f)[0]);
    v.ls_g = static_cast<double>(g.value(ls_g)[0]);
    v.lu_g = static_cast<double>(g.value(lu_g)[0]);
    v.ld = static_cast<double>(g.value(ld)[0]);
    v.total = static_cast<double>(g.value(total)[0]);
    mean += scaled(v, 1.0 / static_cast<double>(batch.size()));
  }
  if (!finite(mean)) throw NumericError("train: non-finite loss at step " + std::to_string(s));
  adam_.step(store_);
  return mean;
}

template <class S>
MetricsRow SessionImpl<S>::eval_row(std::size_t s, const Dataset& data, bool skip) const {
  MetricsRow row;
  row.step = s;
  if (!skip && !data.test.empty()) {
    row.eval = evaluate(data.test, data.background).collected;
    row.evaluated = true;
  }
  return row;
}

template <class S>
TrainSummary SessionImpl<S>::train(const Dataset& data, const TrainHooks& hooks) {
  check_dataset(data);
  if (data.train_annotated.empty()) throw InvalidArgument("train: at least one annotated video is required");
  std::vector<Entry> entries = build_entries(data, hooks);
  const std::size_t infeasible_before = infeasible_;
  const std::size_t start = step_;
  auto checkpoint = [&](const std::string& name) {
    if (!hooks.checkpoint_dir.empty()) save(hooks.checkpoint_dir / name);
  };

  if (step_ == 0) {
    history_.clear();
    history_.push_back(eval_row(0, data, hooks.skip_eval));
    window_ = {};
    window_count_ = 0;
  }
  for (std::size_t s = step_ + 1; s <= hyper_.total_steps; ++s) {
    const StepLosses losses = train_step(s, entries);
    step_ = s;
    if (s == 1) history_.front().losses = losses;
    window_ += losses;
    ++window_count_;
    if (hooks.on_step) hooks.on_step(s, losses);
    if (s % hyper_.eval_interval == 0) {
      MetricsRow row = eval_row(s, data, hooks.skip_eval);
      row.losses = scaled(window_, 1.0 / static_cast<double>(window_count_));
      history_.push_back(row);
      window_ = {};
      window_count_ = 0;
      if (hyper_.checkpoint_interval > 0 && s % hyper_.checkpoint_interval == 0) {
        char name[64];
        std::snprintf(name, sizeof name, "step_%06zu.ckpt", s);
        checkpoint(name);
      }
    }
    if (hooks.stop_at_step != 0 && s >= hooks.stop_at_step) break;
  }
  if (step_ == hyper_.total_steps) checkpoint("final.ckpt");
  TrainSummary out;
  out.history = history_;
  out.infeasible_pseudo_labels = infeasible_ - infeasible_before;
  out.steps_done = step_ - start;
  return out;
}

template <class S>
Prediction SessionImpl<S>::predict(const FeatureSequence& features) const {
  if (features.dim() != feature_dim_) {
    throw ShapeError("predict: features have dim " + std::to_string(features.dim()) + ", model expects " +
                     std::to_string(feature_dim_));
  }
  if (features.frames() == 0) throw ShapeError("predict: empty feature sequence");
  Graph<S> g(false);
  auto& store = const_cast<ParameterStore<S>&>(store_);
  const StreamOutputs out = model_.forward(g, store, strided_features<S>(features, hyper_.frame_stride), {});
  return Prediction{upsample(out.collected, features.frames(), hyper_.frame_stride),
                    upsample(final_stream_prediction(g, out), features.frames(), hyper_.frame_stride)};
}

template <class S>
EvalResult SessionImpl<S>::evaluate(const std::vector<VideoRecord>& videos, std::optional<Label> background) const {
  EvalResult r;
  r.pred_collected.resize(videos.size());
  r.pred_final_stream.resize(videos.size());
  const auto n = static_cast<std::ptrdiff_t>(videos.size());
#pragma omp parallel for schedule(dynamic)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    const Prediction p = predict(videos[static_cast<std::size_t>(i)].features);
    r.pred_collected[static_cast<std::size_t>(i)] = p.collected.argmax();
    r.pred_final_stream[static_cast<std::size_t>(i)] = p.final_stream.argmax();
  }
  std::vector<FrameLabels> pc, pf, truth;
  for (std::size_t i = 0; i < videos.size(); ++i) {
    if (!videos[i].labels) continue;
    pc.push_back(r.pred_collected[i]);
    pf.push_back(r.pred_final_stream[i]);
    truth.push_back(*videos[i].labels);
  }
  r.collected = evaluate_labels(pc, truth, background);
  r.final_stream = evaluate_labels(pf, truth, background);
  return r;
}

template <class S>
void SessionImpl<S>::save(const std::filesystem::path& checkpoint) const {
  Out o;
  o.raw(kCheckpointMagic, 4);
  o.pod<std::uint32_t>(kCheckpointVersion);
  o.pod<std::uint32_t>(sizeof(S));
  o.pod<std::uint64_t>(step_);
  o.pod<std::uint64_t>(infeasible_);
  o.pod<std::int64_t>(adam_.steps());
  std::ostringstream rs, rd;
  rs << sample_rng_;
  rd << dropout_rng_;
  o.str(rs.str());
  o.str(rd.str());
  o.pod<std::uint32_t>(static_cast<std::uint32_t>(store_.size()));
  for (std::size_t i = 0; i < store_.size(); ++i) {
    o.str(store_[i].name);
    o.tensor(store_[i].value);
    o.tensor(adam_.first_moments()[i]);
    o.tensor(adam_.second_moments()[i]);
  }
  json hist = json::array();
  for (const auto& row : history_) hist.push_back(row_to_vector(row));
  o.str(hist.dump());
  o.str(json(row_to_vector(MetricsRow{0, window_, false, {}})).dump());
  o.pod<std::uint64_t>(window_count_);
  spill(checkpoint, o.bytes());

  json side;
  side["format"] = "segsemi-checkpoint";
  side["version"] = kCheckpointVersion;
  side["hyperparams"] = json::parse(hyper_.to_json());
  side["classes"] = classes_;
  side["feature_dim"] = feature_dim_;
  side["step"] = step_;
  side["parameters"] = store_.scalar_count();
  spill(checkpoint_sidecar(checkpoint), side.dump(2) + "\n");
}

template <class S>
void SessionImpl<S>::restore(In& in) {
  in.expect(kCheckpointMagic, 4);
  if (in.pod<std::uint32_t>() != kCheckpointVersion) in.fail("unsupported checkpoint version");
  if (in.pod<std::uint32_t>() != sizeof(S)) in.fail("checkpoint precision differs from its sidecar");
  step_ = in.pod<std::uint64_t>();
  infeasible_ = in.pod<std::uint64_t>();
  adam_.set_steps(in.pod<std::int64_t>());
  std::istringstream(in.str()) >> sample_rng_;
  std::istringstream(in.str()) >> dropout_rng_;
  if (in.pod<std::uint32_t>() != store_.size()) in.fail("parameter count differs from the configured model");
  for (std::size_t i = 0; i < store_.size(); ++i) {
    if (in.str() != store_[i].name) in.fail("parameter order differs at '" + store_[i].name + "'");
    auto value = in.tensor<S>();
    auto m = in.tensor<S>();
    auto v = in.tensor<S>();
    if (value.shape() != store_[i].value.shape() || m.shape() != value.shape() || v.shape() != value.shape()) {
      in.fail("shape mismatch for '" + store_[i].name + "'");
    }
    store_[i].value = std::move(value);
    adam_.first_moments()[i] = std::move(m);
    adam_.second_moments()[i] = std::move(v);
  }
  history_.clear();
  for (const auto& row : json::parse(in.str())) history_.push_back(row_from_vector(row.get<std::vector<double>>()));
  window_ = row_from_vector(json::parse(in.str()).get<std::vector<double>>()).losses;
  window_count_ = in.pod<std::uint64_t>();
  if (!in.done()) in.fail("trailing bytes");
}

}  // namespace

std::unique_ptr<Session> Session::create(const Hyperparams& hyper, std::vector<std::string> classes,
                                         std::size_t feature_dim) {
  hyper.validate();
  if (hyper.precision == "double") return std::make_unique<SessionImpl<double>>(hyper, std::move(classes), feature_dim);
  return std::make_unique<SessionImpl<float>>(hyper, std::move(classes), feature_dim);
}

std::unique_ptr<Session> Session::load(const std::filesystem::path& checkpoint) {
  const auto side_path = checkpoint_sidecar(checkpoint);
  json side;
  try {
    side = json::parse(slurp(side_path));
  } catch (const json::parse_error& e) {
    throw ParseError(side_path.string(), "byte", e.byte, e.what());
  }
  Hyperparams h;
  std::vector<std::string> classes;
  std::size_t dim = 0;
  try {
    if (side.at("format").get<std::string>() != "segsemi-checkpoint") {
      throw ParseError(side_path.string(), "key", 0, "not a checkpoint sidecar");
    }
    h.merge_json(side.at("hyperparams").dump(), side_path.string());
    classes = side.at("classes").get<std::vector<std::string>>();
    dim = side.at("feature_dim").get<std::size_t>();
  } catch (const json::exception& e) {
    throw ParseError(side_path.string(), "key", 0, e.what());
  }
  In in(slurp(checkpoint), checkpoint.string());
  if (h.precision == "double") {
    auto s = std::make_unique<SessionImpl<double>>(h, std::move(classes), dim);
    s->restore(in);
    return s;
  }
  auto s = std::make_unique<SessionImpl<float>>(h, std::move(classes), dim);
  s->restore(in);
  return s;
}

}  // namespace segsemi
