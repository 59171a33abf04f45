#include <cmath>
#include <cstdio>
#include <set>
#include <type_traits>

#include <json.hpp>

#include "segsemi/error.hpp"
#include "segsemi/trainer.hpp"

namespace segsemi {

using nlohmann::json;

void Hyperparams::validate() const {
  auto fail = [](const std::string& m) { throw InvalidArgument("hyperparams: " + m); };
  if (!(alpha >= 0.0 && alpha <= 1.0)) fail("alpha must lie in [0, 1]");
  if (!(beta_smooth >= 0.0) || !(beta_distill >= 0.0)) fail("beta weights must be non-negative");
  if (!(tau > 0.0)) fail("tau must be positive");
  if (streams == 0) fail("streams must be >= 1");
  if (beam_width == 0) fail("beam_width must be >= 1");
  if (pool_k == 0) fail("pool_k must be >= 1");
  if (!(lr > 0.0)) fail("lr must be positive");
  if (batch == 0) fail("batch must be >= 1");
  if (total_steps == 0) fail("total_steps must be >= 1");
  if (warmup_steps >= total_steps) fail("warmup_steps must be < total_steps");
  if (pseudo_refresh_interval == 0) fail("pseudo_refresh_interval must be >= 1");
  if (channels == 0 || gen_layers == 0) fail("channels and gen_layers must be >= 1");
  if (refine_stages > 0 && refine_layers == 0) fail("refine_layers must be >= 1 when refinement stages exist");
  if (!(dropout >= 0.0 && dropout < 1.0)) fail("dropout must lie in [0, 1)");
  if (enc_hidden == 0 || dec_hidden == 0 || attn_hidden == 0 || embed_dim == 0) fail("transcriber sizes must be >= 1");
  if (max_decode_len == 0) fail("max_decode_len must be >= 1");
  if (precision != "float" && precision != "double") fail("precision must be \"float\" or \"double\"");
  if (frame_stride == 0) fail("frame_stride must be >= 1");
  if (eval_interval == 0) fail("eval_interval must be >= 1");
  if (checkpoint_interval % eval_interval != 0) fail("checkpoint_interval must be a multiple of eval_interval");
}

std::string Hyperparams::to_json() const {
  json j = json::object();
  visit_fields(*this, [&](const char* key, const auto& v) { j[key] = v; });
  return j.dump(2);
}

void Hyperparams::merge_json(const std::string& text, const std::string& source) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(source, "byte", e.byte, e.what());
  }
  if (!j.is_object()) throw ParseError(source, "byte", 0, "config must be a JSON object");
  std::set<std::string> known;
  visit_fields(*this, [&](const char* key, auto& v) {
    known.insert(key);
    if (!j.contains(key)) return;
    try {
      v = j[key].get<std::remove_reference_t<decltype(v)>>();
    } catch (const json::exception& e) {
      throw ParseError(source, "key", 0, std::string("key '") + key + "': " + e.what());
    }
  });
  for (const auto& item : j.items()) {
    if (!known.count(item.key())) throw ParseError(source, "key", 0, "unknown config key '" + item.key() + "'");
  }
}

Hyperparams Hyperparams::desk_profile() {
  Hyperparams h;
  h.channels = 16;
  h.gen_layers = 6;
  h.refine_stages = 2;
  h.refine_layers = 6;
  h.enc_hidden = 24;
  h.dec_hidden = 32;
  h.attn_hidden = 24;
  h.embed_dim = 16;
  h.frame_stride = 4;
  h.total_steps = 2500;
  h.warmup_steps = 500;
  h.eval_interval = 500;
  return h;
}

double total_loss(const StepLosses& t, double beta_distill) {
  return (t.ls_f + t.ls_g) + (t.lu_f + t.lu_g) + beta_distill * t.ld;
}

std::string metrics_csv_header() {
  return "step,ls_f,lu_f,ls_g,lu_g,ld,total,mof,edit,f1_10,f1_25,f1_50";
}

std::string metrics_csv_row(const MetricsRow& r) {
  char buf[512];
  const auto& l = r.losses;
  int n = std::snprintf(buf, sizeof buf, "%zu,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g", r.step, l.ls_f, l.lu_f, l.ls_g, l.lu_g,
                        l.ld, l.total);
  std::string out(buf, static_cast<std::size_t>(n));
  if (r.evaluated) {
    n = std::snprintf(buf, sizeof buf, ",%.4f,%.4f,%.4f,%.4f,%.4f", r.eval.mof, r.eval.edit, r.eval.f1[0], r.eval.f1[1],
                      r.eval.f1[2]);
    out.append(buf, static_cast<std::size_t>(n));
  } else {
    out += ",,,,,";
  }
  return out;
}

}  // namespace segsemi
