#include "depthsim/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <map>
#include <mutex>
#include <sstream>

#include <nlohmann/json.hpp>
#include <openssl/evp.h>

#include "depthsim/error.hpp"
#include "depthsim/image_io.hpp"
#include "depthsim/noise.hpp"
#include "depthsim/parallel.hpp"
#include "depthsim/rng.hpp"

namespace depthsim {

namespace {

constexpr const char* kManifest = "manifest.jsonl";

std::string sample_dir_name(std::size_t id) {
  std::ostringstream os;
  os << std::setw(6) << std::setfill('0') << id;
  return os.str();
}

std::string to_hex(const unsigned char* d, unsigned n) {
  std::ostringstream os;
  for (unsigned i = 0; i < n; ++i) os << std::hex << std::setw(2) << std::setfill('0') << static_cast<int>(d[i]);
  return os.str();
}

struct Digest {
  EVP_MD_CTX* ctx;
  Digest() : ctx(EVP_MD_CTX_new()) {
    if (!ctx || EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr) != 1) throw RuntimeError("sha256 init failed");
  }
  ~Digest() { EVP_MD_CTX_free(ctx); }
  void update(const void* data, std::size_t n) {
    if (EVP_DigestUpdate(ctx, data, n) != 1) throw RuntimeError("sha256 update failed");
  }
  std::string hex() {
    unsigned char md[EVP_MAX_MD_SIZE];
    unsigned len = 0;
    if (EVP_DigestFinal_ex(ctx, md, &len) != 1) throw RuntimeError("sha256 final failed");
    return to_hex(md, len);
  }
};

nlohmann::json pose_json(const Transform& t) {
  return {{"position", {t.translation.x, t.translation.y, t.translation.z}},
          {"matrix", std::vector<double>(t.rotation.m.begin(), t.rotation.m.end())}};
}

}  // namespace

std::string sha256_hex(const void* data, std::size_t size) {
  Digest d;
  d.update(data, size);
  return d.hex();
}

std::string sha256_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw MissingAssetError(path.string());
  Digest d;
  std::vector<char> buf(1 << 16);
  while (in) {
    in.read(buf.data(), static_cast<std::streamsize>(buf.size()));
    if (in.gcount() > 0) d.update(buf.data(), static_cast<std::size_t>(in.gcount()));
  }
  return d.hex();
}

Image8 sense_ir(const RadianceImage& radiance, double exposure, const NoiseParams* noise, std::uint64_t seed) {
  if (!noise) return quantize_ir(radiance, exposure);
  ImageF dn = radiance;
  const double gain = exposure * 255.0;
  for (auto& v : dn.data) v = static_cast<float>(v * gain);
  return quantize_ir(apply_noise(dn, *noise, seed), 1.0 / 255.0);
}

SimOutput simulate(const Scene& scene, const RunConfig& cfg) { return simulate(Renderer(scene), cfg); }

SimOutput simulate(const Renderer& renderer, const RunConfig& cfg) {
  cfg.validate();
  const SensorRig& rig = renderer.scene().rig;
  TraceOptions opt;
  opt.spp = cfg.spp;
  opt.seed = cfg.seed;
  opt.max_bounces = cfg.max_bounces;
  opt.median = cfg.median_prefilter;
  const auto [left, right] = render_ir_pair(renderer, opt);

  SimOutput out;
  out.ir_left = quantize_ir(left, cfg.exposure);
  out.ir_right = quantize_ir(right, cfg.exposure);
  if (cfg.noise_enabled) {
    out.ir_left_noisy = sense_ir(left, cfg.exposure, &cfg.noise, derive_seed(cfg.seed, 0x4e4c));
    out.ir_right_noisy = sense_ir(right, cfg.exposure, &cfg.noise, derive_seed(cfg.seed, 0x4e52));
  } else {
    out.ir_left_noisy = out.ir_left;
    out.ir_right_noisy = out.ir_right;
  }

  DepthOutput d = compute_depth(out.ir_left_noisy, out.ir_right_noisy, cfg.stereo, rig);
  out.disparity = std::move(d.disparity);
  out.depth = std::move(d.depth);
  out.registered_depth = std::move(d.registered_depth);
  out.clean_depth = renderer.depth(rig.ir_left);
  if (cfg.stereo.registration) out.registered_clean_depth = register_depth(out.clean_depth, rig.ir_left, rig.rgb);
  return out;
}

Image8 disparity_visualization(const DisparityMap& d, int min_disp, int max_disp) {
  Image8 vis(d.width, d.height, 1, 0);
  const double span = std::max(1, max_disp - min_disp);
  for (std::size_t i = 0; i < d.data.size(); ++i) {
    const float v = d.data[i];
    if (!is_valid(v)) continue;
    vis.data[i] = static_cast<std::uint8_t>(std::clamp(std::lround(1 + 254.0 * (v - min_disp) / span), 1L, 255L));
  }
  return vis;
}

std::vector<std::string> write_outputs(const SimOutput& out, const OutputSelection& sel, const StereoConfig& stereo,
                                       const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  std::vector<std::string> files;
  auto pgm = [&](const char* name, const Image8& img) {
    write_pgm(dir / name, img);
    files.emplace_back(name);
  };
  auto pfm = [&](const char* name, const ImageF& img) {
    if (img.empty()) return;
    write_pfm(dir / name, img);
    files.emplace_back(name);
  };
  if (sel.ir) {
    pgm("ir_left.pgm", out.ir_left);
    pgm("ir_right.pgm", out.ir_right);
  }
  if (sel.ir_noisy) {
    pgm("ir_left_noisy.pgm", out.ir_left_noisy);
    pgm("ir_right_noisy.pgm", out.ir_right_noisy);
  }
  if (sel.disparity) pfm("disparity.pfm", out.disparity);
  if (sel.depth) pfm("depth.pfm", out.depth);
  if (sel.registered_depth) pfm("registered_depth.pfm", out.registered_depth);
  if (sel.clean_depth) {
    pfm("clean_depth.pfm", out.clean_depth);
    pfm("registered_clean_depth.pfm", out.registered_clean_depth);
  }
  if (sel.visualization && !out.disparity.empty())
    pgm("disparity_vis.pgm", disparity_visualization(out.disparity, stereo.min_disp, stereo.max_disp));
  return files;
}

Scene jitter_scene(const Scene& scene, const RunConfig& cfg, std::size_t index) {
  Scene s = scene;
  if (!cfg.batch) return s;
  const BatchJitter& j = *cfg.batch;
  for (const auto& name : j.objects)
    if (scene.find_object(name) < 0) throw ConfigError("batch.objects: unknown object '" + name + "'");
  Pcg32 rng(derive_seed(cfg.seed, index, 0xba7c4));
  for (auto& obj : s.objects) {
    if (!j.objects.empty() && std::find(j.objects.begin(), j.objects.end(), obj.name) == j.objects.end()) continue;
    Vec3 dp, dr;
    for (int a = 0; a < 3; ++a) dp[a] = (2.0 * rng.uniform() - 1.0) * j.position[a];
    for (int a = 0; a < 3; ++a) dr[a] = (2.0 * rng.uniform() - 1.0) * j.rotation[a];
    obj.pose.rotation = rotation_xyz(dr) * obj.pose.rotation;
    obj.pose.translation += dp;
  }
  return s;
}

BatchReport generate_batch(const Scene& scene, const RunConfig& cfg, std::size_t n, const std::filesystem::path& dir) {
  if (n < 1) throw ConfigError("batch size must be >= 1");
  if (!cfg.batch) throw ConfigError("batch: no [batch] jitter ranges configured");
  cfg.validate();
  std::filesystem::create_directories(dir);
  const auto manifest_path = dir / kManifest;

  // Completed samples: manifest records whose files still hash to the
  // recorded digests and whose seed matches this run.
  std::map<std::size_t, nlohmann::json> done;
  if (std::filesystem::exists(manifest_path)) {
    std::ifstream in(manifest_path);
    std::string line;
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      nlohmann::json rec;
      try {
        rec = nlohmann::json::parse(line);
      } catch (const nlohmann::json::exception&) {
        continue;  // torn write from an interrupted run
      }
      const auto id = rec.value("id", std::size_t{0});
      if (id >= n || rec.value("seed", std::uint64_t{0}) != cfg.seed + id) continue;
      bool ok = rec.contains("files") && rec["files"].is_array();
      for (const auto& f : ok ? rec["files"] : nlohmann::json::array()) {
        const auto p = dir / f.value("path", std::string());
        if (!std::filesystem::exists(p) || sha256_file(p) != f.value("sha256", std::string())) {
          ok = false;
          break;
        }
      }
      if (ok) done[id] = rec;
    }
  }

  BatchReport report;
  std::mutex manifest_mutex;
  std::ofstream manifest(manifest_path, std::ios::app);
  if (!manifest) throw RuntimeError("cannot write " + manifest_path.string());
  std::vector<std::size_t> todo;
  for (std::size_t i = 0; i < n; ++i) {
    if (done.count(i)) {
      ++report.skipped;
    } else {
      todo.push_back(i);
    }
  }

  parallel_for(todo.size(), [&](std::size_t k) {
    const std::size_t id = todo[k];
    RunConfig sample_cfg = cfg;
    sample_cfg.seed = cfg.seed + id;
    const Scene s = jitter_scene(scene, cfg, id);
    const SimOutput out = simulate(s, sample_cfg);
    const std::string sub = sample_dir_name(id);
    const auto names = write_outputs(out, cfg.outputs, cfg.stereo, dir / sub);

    nlohmann::json rec;
    rec["id"] = id;
    rec["seed"] = sample_cfg.seed;
    rec["dir"] = sub;
    nlohmann::json poses = nlohmann::json::array();
    for (const auto& obj : s.objects) {
      nlohmann::json p = pose_json(obj.pose);
      p["object"] = obj.name;
      poses.push_back(std::move(p));
    }
    rec["poses"] = std::move(poses);
    nlohmann::json files = nlohmann::json::array();
    for (const auto& name : names) {
      const std::string rel = sub + "/" + name;
      files.push_back({{"path", rel}, {"sha256", sha256_file(dir / rel)}});
    }
    rec["files"] = std::move(files);

    std::lock_guard lock(manifest_mutex);
    manifest << rec.dump() << '\n' << std::flush;
    done[id] = std::move(rec);
    ++report.generated;
  });
  manifest.close();

  // Rewrite in id order so the manifest itself is reproducible.
  const auto tmp = dir / (std::string(kManifest) + ".tmp");
  {
    std::ofstream out(tmp, std::ios::trunc);
    for (const auto& [id, rec] : done) out << rec.dump() << '\n';
    if (!out) throw RuntimeError("cannot write " + tmp.string());
  }
  std::filesystem::rename(tmp, manifest_path);
  return report;
}

}  // namespace depthsim
