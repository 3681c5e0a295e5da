#include "depthsim/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include "depthsim/error.hpp"
#include "toml_util.hpp"

namespace depthsim {

namespace tu = toml_util;

namespace {

void reject_unknown(const tu::Ctx& ctx, const toml::table& t, const std::string& section,
                    const std::set<std::string>& allowed) {
  for (const auto& [key, node] : t) {
    const std::string k(key.str());
    if (!allowed.count(k)) ctx.fail(&node, section + "." + k, "unknown key");
  }
}

int get_int(const tu::Ctx& ctx, const toml::table& t, const std::string& key, const std::string& prefix, int fallback) {
  const auto v = tu::integer(ctx, t, key, prefix, fallback);
  if (v < std::numeric_limits<int>::min() || v > std::numeric_limits<int>::max())
    ctx.fail(t.get(key), prefix + "." + key, "out of range");
  return static_cast<int>(v);
}

bool get_bool(const tu::Ctx& ctx, const toml::table& t, const std::string& key, const std::string& prefix,
              bool fallback) {
  return tu::opt_bool(ctx, t, key, prefix).value_or(fallback);
}

void parse_stereo(const tu::Ctx& ctx, const toml::table& t, StereoConfig& s) {
  const std::string p = "stereo";
  reject_unknown(ctx, t, p,
                 {"census_width", "census_height", "block_width", "block_height", "min_disp", "max_disp", "p1", "p2",
                  "uniqueness_ratio", "lr_max_diff", "median_ksize", "rectify", "sgm", "subpixel", "lr_check",
                  "registration"});
  s.census_width = get_int(ctx, t, "census_width", p, s.census_width);
  s.census_height = get_int(ctx, t, "census_height", p, s.census_height);
  s.block_width = get_int(ctx, t, "block_width", p, s.block_width);
  s.block_height = get_int(ctx, t, "block_height", p, s.block_height);
  s.min_disp = get_int(ctx, t, "min_disp", p, s.min_disp);
  s.max_disp = get_int(ctx, t, "max_disp", p, s.max_disp);
  s.p1 = get_int(ctx, t, "p1", p, s.p1);
  s.p2 = get_int(ctx, t, "p2", p, s.p2);
  s.uniqueness_ratio = get_int(ctx, t, "uniqueness_ratio", p, s.uniqueness_ratio);
  s.lr_max_diff = tu::number(ctx, t, "lr_max_diff", p, s.lr_max_diff);
  s.median_ksize = get_int(ctx, t, "median_ksize", p, s.median_ksize);
  s.rectify = get_bool(ctx, t, "rectify", p, s.rectify);
  s.sgm = get_bool(ctx, t, "sgm", p, s.sgm);
  s.subpixel = get_bool(ctx, t, "subpixel", p, s.subpixel);
  s.lr_check = get_bool(ctx, t, "lr_check", p, s.lr_check);
  s.registration = get_bool(ctx, t, "registration", p, s.registration);
}

void parse_noise(const tu::Ctx& ctx, const toml::table& t, NoiseParams& n) {
  const std::string p = "noise";
  reject_unknown(ctx, t, p, {"k", "theta", "mu_n", "sigma", "scale"});
  n.k = tu::number(ctx, t, "k", p, n.k);
  n.theta = tu::number(ctx, t, "theta", p, n.theta);
  n.mu_n = tu::number(ctx, t, "mu_n", p, n.mu_n);
  n.sigma = tu::number(ctx, t, "sigma", p, n.sigma);
  n.scale = tu::number(ctx, t, "scale", p, n.scale);
}

void parse_outputs(const tu::Ctx& ctx, const toml::table& t, OutputSelection& o) {
  const std::string p = "outputs";
  reject_unknown(ctx, t, p,
                 {"ir", "ir_noisy", "disparity", "depth", "registered_depth", "clean_depth", "visualization"});
  o.ir = get_bool(ctx, t, "ir", p, o.ir);
  o.ir_noisy = get_bool(ctx, t, "ir_noisy", p, o.ir_noisy);
  o.disparity = get_bool(ctx, t, "disparity", p, o.disparity);
  o.depth = get_bool(ctx, t, "depth", p, o.depth);
  o.registered_depth = get_bool(ctx, t, "registered_depth", p, o.registered_depth);
  o.clean_depth = get_bool(ctx, t, "clean_depth", p, o.clean_depth);
  o.visualization = get_bool(ctx, t, "visualization", p, o.visualization);
}

BatchJitter parse_batch(const tu::Ctx& ctx, const toml::table& t) {
  const std::string p = "batch";
  reject_unknown(ctx, t, p, {"position_jitter", "rotation_jitter", "objects"});
  BatchJitter b;
  b.position = tu::vec3(ctx, t, "position_jitter", p, {});
  b.rotation = tu::vec3(ctx, t, "rotation_jitter", p, {});
  if (const toml::node* n = t.get("objects")) {
    const auto* arr = n->as_array();
    if (!arr) ctx.fail(n, "batch.objects", "expected an array of object names");
    for (const auto& el : *arr) {
      auto s = el.value<std::string>();
      if (!s) ctx.fail(&el, "batch.objects", "expected a string");
      b.objects.push_back(*s);
    }
  }
  return b;
}

}  // namespace

void RunConfig::validate() const {
  if (spp < 1) throw ValidationError("run.spp", "must be >= 1");
  if (max_bounces < 0) throw ValidationError("run.max_bounces", "must be >= 0");
  if (!(exposure > 0)) throw ValidationError("run.exposure", "must be > 0");
  noise.validate("noise");
  stereo.validate();
  if (batch) {
    for (int a = 0; a < 3; ++a) {
      if (!(batch->position[a] >= 0)) throw ValidationError("batch.position_jitter", "must be >= 0");
      if (!(batch->rotation[a] >= 0)) throw ValidationError("batch.rotation_jitter", "must be >= 0");
    }
  }
}

RunConfig parse_run_config(const std::string& text, const std::string& source_name, const RunConfig& defaults) {
  tu::Ctx ctx{source_name};
  toml::table root;
  try {
    root = toml::parse(text, source_name);
  } catch (const toml::parse_error& e) {
    throw ParseError(source_name, static_cast<int>(e.source().begin.line), std::string(e.description()));
  }
  RunConfig cfg = defaults;
  if (const auto* run = tu::opt_table(ctx, root, "run", "")) {
    const std::string p = "run";
    reject_unknown(ctx, *run, p, {"spp", "seed", "max_bounces", "median_prefilter", "exposure", "noise"});
    cfg.spp = get_int(ctx, *run, "spp", p, cfg.spp);
    const auto seed = tu::integer(ctx, *run, "seed", p, static_cast<std::int64_t>(cfg.seed));
    if (seed < 0) ctx.fail(run->get("seed"), "run.seed", "must be >= 0");
    cfg.seed = static_cast<std::uint64_t>(seed);
    cfg.max_bounces = get_int(ctx, *run, "max_bounces", p, cfg.max_bounces);
    cfg.median_prefilter = get_bool(ctx, *run, "median_prefilter", p, cfg.median_prefilter);
    cfg.exposure = tu::number(ctx, *run, "exposure", p, cfg.exposure);
    cfg.noise_enabled = get_bool(ctx, *run, "noise", p, cfg.noise_enabled);
  }
  if (const auto* t = tu::opt_table(ctx, root, "noise", "")) parse_noise(ctx, *t, cfg.noise);
  if (const auto* t = tu::opt_table(ctx, root, "stereo", "")) parse_stereo(ctx, *t, cfg.stereo);
  if (const auto* t = tu::opt_table(ctx, root, "outputs", "")) parse_outputs(ctx, *t, cfg.outputs);
  if (const auto* t = tu::opt_table(ctx, root, "batch", "")) cfg.batch = parse_batch(ctx, *t);
  cfg.validate();
  return cfg;
}

RunConfig load_run_config(const std::filesystem::path& path, const RunConfig& defaults) {
  std::ifstream in(path);
  if (!in) throw MissingAssetError(path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_run_config(ss.str(), path.string(), defaults);
}

}  // namespace depthsim
