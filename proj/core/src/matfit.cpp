#include "depthsim/matfit.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <regex>
#include <sstream>

#include "depthsim/error.hpp"
#include "depthsim/image_io.hpp"
#include "depthsim/parallel.hpp"
#include "depthsim/rng.hpp"
#include "toml_util.hpp"

namespace depthsim {

namespace {

void check_same(const ImageF& a, const ImageF& b, const char* what) {
  if (!a.same_shape(b)) throw RuntimeError(std::string(what) + ": image dimensions differ");
}

using Plane = std::vector<double>;

struct Level {
  int w = 0, h = 0, c = 0;
  Plane data;  // interleaved like ImageF
};

Level to_level(const ImageF& img) {
  Level l{img.width, img.height, img.channels, Plane(img.data.begin(), img.data.end())};
  return l;
}

// 5-tap binomial blur with clamped borders, then keep every second pixel.
Level pyr_down(const Level& in) {
  static constexpr double k[5] = {1 / 16.0, 4 / 16.0, 6 / 16.0, 4 / 16.0, 1 / 16.0};
  Level tmp{in.w, in.h, in.c, Plane(in.data.size())};
  for (int y = 0; y < in.h; ++y)
    for (int x = 0; x < in.w; ++x)
      for (int c = 0; c < in.c; ++c) {
        double s = 0;
        for (int t = -2; t <= 2; ++t) {
          const int sx = std::clamp(x + t, 0, in.w - 1);
          s += k[t + 2] * in.data[(static_cast<std::size_t>(y) * in.w + sx) * in.c + c];
        }
        tmp.data[(static_cast<std::size_t>(y) * in.w + x) * in.c + c] = s;
      }
  Level out{(in.w + 1) / 2, (in.h + 1) / 2, in.c, {}};
  out.data.resize(static_cast<std::size_t>(out.w) * out.h * out.c);
  for (int y = 0; y < out.h; ++y)
    for (int x = 0; x < out.w; ++x)
      for (int c = 0; c < in.c; ++c) {
        double s = 0;
        for (int t = -2; t <= 2; ++t) {
          const int sy = std::clamp(2 * y + t, 0, in.h - 1);
          s += k[t + 2] * tmp.data[(static_cast<std::size_t>(sy) * in.w + 2 * x) * in.c + c];
        }
        out.data[(static_cast<std::size_t>(y) * out.w + x) * out.c + c] = s;
      }
  return out;
}

void normalize_channels(Level& l) {
  const std::size_t n = static_cast<std::size_t>(l.w) * l.h;
  for (int c = 0; c < l.c; ++c) {
    double mean = 0;
    for (std::size_t i = 0; i < n; ++i) mean += l.data[i * l.c + c];
    mean /= n;
    double var = 0;
    for (std::size_t i = 0; i < n; ++i) {
      const double d = l.data[i * l.c + c] - mean;
      var += d * d;
    }
    const double sd = std::sqrt(var / n);
    const double inv = sd > 1e-12 ? 1.0 / sd : 0.0;
    for (std::size_t i = 0; i < n; ++i) l.data[i * l.c + c] = (l.data[i * l.c + c] - mean) * inv;
  }
}

PbrMaterial with_params(PbrMaterial m, const PartParams& p) {
  m.roughness = p.values[kRoughness];
  m.metallic = p.values[kMetallic];
  m.specular = p.values[kSpecular];
  m.transmission = p.values[kTransmission];
  return m;
}

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(6);
  os << v;
  return os.str();
}

class Search {
 public:
  Search(const Scene& scene, const std::vector<FitTarget>& targets, const FitConfig& cfg)
      : scene_(scene), targets_(targets), cfg_(cfg), base_(scene) {
    opt_.spp = cfg.spp;
    opt_.median = cfg.median;
    opt_.max_bounces = cfg.max_bounces;
    opt_.seed = cfg.seed;
  }

  std::vector<double> evaluate(const std::vector<ParamSet>& cands) const {
    std::vector<double> losses(cands.size());
    parallel_for(cands.size(), [&](std::size_t i) { losses[i] = loss(cands[i]); });
    return losses;
  }

  double loss(const ParamSet& p) const {
    Renderer r = base_;
    apply_params(r, scene_, p);
    double total = 0;
    for (const FitTarget& t : targets_) {
      r.set_rig(t.rig);
      const CapturePair sim = render_capture(r, t.rig, opt_);
      total += multispectral_loss(sim, t.capture, cfg_.lambda, cfg_.feature);
    }
    return total;
  }

  // Evaluates the candidates and moves to the best one if it strictly beats
  // the incumbent (first minimum wins ties among candidates).
  void step(ParamSet& cur, double& cur_loss, const std::vector<ParamSet>& cands,
            const std::vector<FitCandidate>& labels, std::vector<FitCandidate>& log) const {
    const std::vector<double> losses = evaluate(cands);
    std::size_t best = 0;
    for (std::size_t i = 0; i < losses.size(); ++i) {
      FitCandidate row = labels[i];
      row.loss = losses[i];
      log.push_back(std::move(row));
      if (losses[i] < losses[best]) best = i;
    }
    if (!losses.empty() && losses[best] < cur_loss) {
      cur = cands[best];
      cur_loss = losses[best];
    }
  }

 private:
  const Scene& scene_;
  const std::vector<FitTarget>& targets_;
  const FitConfig& cfg_;
  Renderer base_;
  TraceOptions opt_;
};

// Cartesian product of per-parameter value lists.
void cartesian(const std::vector<std::pair<int, std::vector<double>>>& axes, std::size_t k, PartParams cur,
               std::vector<PartParams>& out) {
  if (k == axes.size()) {
    out.push_back(cur);
    return;
  }
  for (double v : axes[k].second) {
    cur.values[axes[k].first] = v;
    cartesian(axes, k + 1, cur, out);
  }
}

}  // namespace

double mse(const ImageF& a, const ImageF& b) {
  check_same(a, b, "mse");
  if (a.data.empty()) return 0.0;
  double s = 0;
  for (std::size_t i = 0; i < a.data.size(); ++i) {
    const double d = static_cast<double>(a.data[i]) - b.data[i];
    s += d * d;
  }
  return s / a.data.size();
}

double pyramid_feature_loss(const ImageF& a, const ImageF& b) {
  check_same(a, b, "pyramid_feature_loss");
  if (a.data.empty()) return 0.0;
  constexpr int kLevels = 4;
  Level la = to_level(a), lb = to_level(b);
  double total = 0;
  for (int level = 1; level <= kLevels; ++level) {
    la = pyr_down(la);
    lb = pyr_down(lb);
    Level na = la, nb = lb;
    normalize_channels(na);
    normalize_channels(nb);
    double s = 0;
    for (std::size_t i = 0; i < na.data.size(); ++i) {
      const double d = na.data[i] - nb.data[i];
      s += d * d;
    }
    total += s / na.data.size();
  }
  return total / kLevels;
}

double multispectral_loss(const CapturePair& sim, const CapturePair& target, double lambda, const FeatureLoss& feat) {
  check_same(sim.rgb, target.rgb, "multispectral_loss (rgb)");
  check_same(sim.ir, target.ir, "multispectral_loss (ir)");
  const double rgb = mse(sim.rgb, target.rgb) + (feat ? feat(sim.rgb, target.rgb) : 0.0);
  if (lambda == 0) return rgb;
  const double ir = mse(sim.ir, target.ir) + (feat ? feat(sim.ir, target.ir) : 0.0);
  return rgb + lambda * ir;
}

CapturePair render_capture(const Renderer& renderer, const SensorRig& rig, const TraceOptions& opt) {
  CapturePair c;
  TraceOptions o = opt;
  o.spectrum = Spectrum::visible;
  c.rgb = renderer.trace(rig.rgb, o);
  o.spectrum = Spectrum::ir;
  o.seed = derive_seed(opt.seed, 0x12);
  c.ir = renderer.trace(rig.ir_left, o);
  return c;
}

void apply_params(Renderer& renderer, const Scene& scene, const ParamSet& params) {
  for (const auto& [name, p] : params.parts) {
    const int oi = scene.find_object(name);
    if (oi < 0) throw ConfigError("unknown part '" + name + "'");
    const PbrMaterial& base = scene.materials.at(scene.objects[oi].material).material;
    renderer.set_object_material(oi, with_params(base, p));
  }
  for (std::size_t i = 0; i < params.light_multipliers.size() && i < scene.lights.size(); ++i)
    renderer.set_light_intensity(static_cast<int>(i), scene.lights[i].intensity * params.light_multipliers[i]);
}

std::vector<double> coarse_grid(int n) {
  std::vector<double> g;
  for (int i = 0; i < n; ++i) g.push_back((i + 0.5) / n);
  return g;
}

std::vector<double> fine_grid(double center, int n) {
  const double step = 1.0 / n;
  std::vector<double> g;
  for (int i = 0; i < n; ++i) {
    const double v = n == 1 ? center : center - step + 2.0 * step * i / (n - 1);
    g.push_back(std::clamp(v, 0.0, 1.0));
  }
  g.push_back(center);
  std::sort(g.begin(), g.end());
  g.erase(std::unique(g.begin(), g.end()), g.end());
  return g;
}

std::vector<double> light_grid(int n, double lo, double hi) {
  std::vector<double> g;
  for (int i = 0; i < n; ++i) g.push_back(n == 1 ? 1.0 : lo * std::pow(hi / lo, static_cast<double>(i) / (n - 1)));
  return g;
}

FitResult grid_search(const Scene& scene, const std::vector<FitTarget>& targets, const FitConfig& cfg) {
  if (targets.empty()) throw ConfigError("grid_search: no targets");
  if (cfg.samples_per_param < 1) throw ConfigError("samples_per_param must be >= 1");
  if (cfg.spp < 1) throw ConfigError("spp must be >= 1");
  if (cfg.rounds < 1) throw ConfigError("rounds must be >= 1");
  if (!(cfg.lambda >= 0)) throw ConfigError("lambda must be >= 0");

  auto mask = [&](const std::string& part) {
    const auto it = cfg.free_params.find(part);
    return it == cfg.free_params.end() ? std::array<bool, 4>{true, true, true, true} : it->second;
  };
  bool any_free = false;
  for (const auto& part : cfg.parts) {
    if (scene.find_object(part) < 0) throw ConfigError("unknown part '" + part + "'");
    for (bool b : mask(part)) any_free = any_free || b;
  }
  if (!any_free) throw ConfigError("nothing to fit");
  for (const auto& t : targets) {
    if (t.capture.rgb.width != t.rig.rgb.width || t.capture.rgb.height != t.rig.rgb.height)
      throw ConfigError("target rgb size does not match the rgb camera");
    if (t.capture.ir.width != t.rig.ir_left.width || t.capture.ir.height != t.rig.ir_left.height)
      throw ConfigError("target ir size does not match the ir camera");
  }

  const Search search(scene, targets, cfg);
  FitResult res;
  ParamSet cur;
  for (const auto& part : cfg.parts) {
    const PbrMaterial& m = scene.materials.at(scene.objects[scene.find_object(part)].material).material;
    cur.parts[part].values = {m.roughness, m.metallic, m.specular, m.transmission};
  }
  cur.light_multipliers.assign(scene.lights.size(), 1.0);
  res.initial = cur;
  double cur_loss = search.loss(cur);
  res.initial_loss = cur_loss;
  res.candidates.push_back({"default", "", "", "", cur_loss});

  const int n = cfg.samples_per_param;
  const bool full = cfg.mode == SearchMode::full;
  std::map<std::string, PartParams> anchors;

  auto sweep_part = [&](const std::string& phase, const std::string& part,
                        const std::function<std::vector<double>(int param)>& grid) {
    const auto free = mask(part);
    if (full) {
      std::vector<std::pair<int, std::vector<double>>> axes;
      for (int p = 0; p < 4; ++p)
        if (free[p]) axes.emplace_back(p, grid(p));
      std::vector<PartParams> combos;
      cartesian(axes, 0, cur.parts[part], combos);
      std::vector<ParamSet> cands;
      std::vector<FitCandidate> labels;
      for (const auto& c : combos) {
        ParamSet s = cur;
        s.parts[part] = c;
        cands.push_back(std::move(s));
        std::string value;
        for (const auto& [p, _] : axes) value += (value.empty() ? "" : ";") + fmt(c.values[p]);
        std::string names;
        for (const auto& [p, _] : axes) names += (names.empty() ? "" : ";") + std::string(kMaterialParamNames[p]);
        labels.push_back({phase, part, names, value, 0});
      }
      search.step(cur, cur_loss, cands, labels, res.candidates);
      return;
    }
    for (int p = 0; p < 4; ++p) {
      if (!free[p]) continue;
      std::vector<ParamSet> cands;
      std::vector<FitCandidate> labels;
      for (double v : grid(p)) {
        ParamSet s = cur;
        s.parts[part].values[p] = v;
        cands.push_back(std::move(s));
        labels.push_back({phase, part, kMaterialParamNames[p], fmt(v), 0});
      }
      search.step(cur, cur_loss, cands, labels, res.candidates);
    }
  };

  // Coarse phase, with light multipliers swept jointly.
  const std::vector<double> cg = coarse_grid(n);
  const std::vector<double> lg = light_grid(n, cfg.light_min, cfg.light_max);
  for (int round = 0; round < (full ? 1 : cfg.rounds); ++round) {
    for (const auto& part : cfg.parts) sweep_part("coarse", part, [&](int) { return cg; });
    if (cfg.fit_lights) {
      for (std::size_t li = 0; li < scene.lights.size(); ++li) {
        std::vector<ParamSet> cands;
        std::vector<FitCandidate> labels;
        for (double m : lg) {
          ParamSet s = cur;
          s.light_multipliers[li] = m;
          cands.push_back(std::move(s));
          labels.push_back({"coarse", "lights", "multiplier[" + std::to_string(li) + "]", fmt(m), 0});
        }
        search.step(cur, cur_loss, cands, labels, res.candidates);
      }
    }
  }
  res.coarse = cur;
  res.coarse_loss = cur_loss;

  // Fine phase around the coarse optimum; lights stay fixed.
  for (int round = 0; round < (full ? 1 : cfg.rounds); ++round) {
    for (const auto& part : cfg.parts) {
      const PartParams anchor = res.coarse.parts.at(part);
      sweep_part("fine", part, [&](int p) { return fine_grid(anchor.values[p], n); });
    }
  }
  res.fine = cur;
  res.fine_loss = cur_loss;
  return res;
}

std::vector<FitTarget> load_targets(const std::filesystem::path& dir, const SensorRig& rig) {
  if (!std::filesystem::is_directory(dir)) throw MissingAssetError(dir.string());
  const std::regex pattern(R"((\d+)_rgb\.pfm)");
  std::vector<std::pair<long, std::filesystem::path>> found;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    std::smatch m;
    const std::string name = entry.path().filename().string();
    if (std::regex_match(name, m, pattern)) found.emplace_back(std::stol(m[1].str()), entry.path());
  }
  if (found.empty()) throw ConfigError("no NNN_rgb.pfm targets in " + dir.string());
  std::sort(found.begin(), found.end());

  std::vector<Transform> motions;
  const auto vp = dir / "viewpoints.txt";
  if (std::filesystem::exists(vp)) {
    std::ifstream in(vp);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      if (line.find_first_not_of(" \t\r") == std::string::npos || line[line.find_first_not_of(" \t")] == '#')
        continue;
      std::istringstream ls(line);
      std::vector<double> v;
      double x;
      while (ls >> x) v.push_back(x);
      if (v.size() != 12 || !ls.eof()) throw ParseError(vp.string(), lineno, "expected 12 numbers");
      Transform t;
      std::copy(v.begin(), v.begin() + 9, t.rotation.m.begin());
      t.translation = {v[9], v[10], v[11]};
      motions.push_back(t);
    }
    if (motions.size() != found.size())
      throw ConfigError("viewpoints.txt has " + std::to_string(motions.size()) + " entries for " +
                        std::to_string(found.size()) + " targets");
  }

  std::vector<FitTarget> out;
  for (std::size_t i = 0; i < found.size(); ++i) {
    const auto& rgb_path = found[i].second;
    std::string ir_name = rgb_path.filename().string();
    ir_name.replace(ir_name.find("_rgb"), 4, "_ir");
    FitTarget t;
    t.capture.rgb = read_pfm(rgb_path);
    t.capture.ir = read_pfm(rgb_path.parent_path() / ir_name);
    if (t.capture.ir.channels != 1) t.capture.ir = extract_channel(t.capture.ir, 0);
    if (t.capture.rgb.channels != 3) throw ConfigError(rgb_path.string() + ": rgb target needs 3 channels");
    t.capture.tag = CaptureTag::real_target;
    t.rig = motions.empty() ? rig : rig.moved(motions[i]);
    out.push_back(std::move(t));
  }
  return out;
}

std::string params_to_toml(const ParamSet& params) {
  toml::table objects;
  for (const auto& [name, p] : params.parts) {
    toml::table t;
    for (int i = 0; i < 4; ++i) t.insert(kMaterialParamNames[i], p.values[i]);
    objects.insert(name, std::move(t));
  }
  toml::table overrides;
  overrides.insert("objects", std::move(objects));
  if (!params.light_multipliers.empty()) {
    toml::array m;
    for (double v : params.light_multipliers) m.push_back(v);
    overrides.insert("lights", toml::table{{"multipliers", std::move(m)}});
  }
  toml::table root;
  root.insert("overrides", std::move(overrides));
  std::ostringstream os;
  os << "# Fitted material parameters; append to the scene file.\n" << root << "\n";
  return os.str();
}

void write_candidates_csv(const std::filesystem::path& path, const std::vector<FitCandidate>& rows) {
  std::ofstream out(path);
  if (!out) throw RuntimeError("cannot write " + path.string());
  out << "candidate,phase,part,parameter,value,loss\n";
  out.precision(10);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto& r = rows[i];
    out << i << ',' << r.phase << ',' << r.part << ',' << r.parameter << ',' << r.value << ',' << r.loss << '\n';
  }
}

}  // namespace depthsim
