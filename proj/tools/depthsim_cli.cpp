// depthsim command line front end.
//
// Exit codes: 0 ok, 1 usage, 2 config/scene error, 3 runtime failure.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "depthsim/config.hpp"
#include "depthsim/error.hpp"
#include "depthsim/image_io.hpp"
#include "depthsim/matfit.hpp"
#include "depthsim/noise.hpp"
#include "depthsim/parallel.hpp"
#include "depthsim/pipeline.hpp"
#include "depthsim/render.hpp"
#include "depthsim/scene.hpp"
#include "depthsim/stereo.hpp"

namespace fs = std::filesystem;
using namespace depthsim;

namespace {

struct Globals {
  std::optional<std::uint64_t> seed;
  int threads = 0;
  std::string config;
};

bool has_ext(const fs::path& p, const char* ext) {
  std::string e = p.extension().string();
  std::transform(e.begin(), e.end(), e.begin(), [](unsigned char c) { return std::tolower(c); });
  return e == ext;
}

// Run settings: --config if given, else the [run]/[noise]/... sections of the
// scene file (if any), else defaults. --seed overrides either.
RunConfig run_config(const Globals& g, const std::string& scene_path) {
  RunConfig cfg;
  if (!g.config.empty()) cfg = load_run_config(g.config);
  else if (!scene_path.empty()) cfg = load_run_config(scene_path);
  if (g.seed) cfg.seed = *g.seed;
  cfg.validate();
  return cfg;
}

// 8-bit frames as-is; PFM frames are taken to hold [0,1] intensities.
Image8 read_frame8(const fs::path& p) {
  if (has_ext(p, ".pfm")) return quantize_ir(read_pfm(p), 1.0);
  return read_pnm(p);
}

// Float frames in DN units (0..255 for 8-bit files).
ImageF read_frame_dn(const fs::path& p) {
  if (has_ext(p, ".pfm")) return read_pfm(p);
  return to_float(read_pnm(p));
}

// Writes radiance as PFM, or quantised 8-bit when the name ends in .pgm/.ppm.
void write_radiance(const fs::path& p, const ImageF& img, double exposure) {
  if (has_ext(p, ".pgm") || has_ext(p, ".ppm")) {
    Image8 out(img.width, img.height, img.channels);
    for (std::size_t i = 0; i < img.data.size(); ++i) {
      const double v = std::floor(img.data[i] * exposure * 255.0 + 0.5);
      out.data[i] = static_cast<std::uint8_t>(std::isnan(v) ? 0 : std::clamp(v, 0.0, 255.0));
    }
    write_pnm(p, out);
  } else {
    write_pfm(p, img);
  }
}

// A frame stack is a directory of numbered .pgm/.pfm files, in name order.
FrameStack read_stack(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw MissingAssetError(dir.string());
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(dir))
    if (e.is_regular_file() && (has_ext(e.path(), ".pgm") || has_ext(e.path(), ".pfm"))) files.push_back(e.path());
  std::sort(files.begin(), files.end());
  FrameStack stack;
  for (const auto& f : files) {
    stack.push_back(read_frame_dn(f));
    if (!stack.front().same_shape(stack.back())) throw ValidationError("stack", "frame size mismatch in " + f.string());
  }
  if (stack.size() < 2) throw ValidationError("stack", dir.string() + " needs at least 2 frames");
  return stack;
}

const CameraModel& pick_camera(const SensorRig& rig, const std::string& name) {
  if (name == "ir_left") return rig.ir_left;
  if (name == "ir_right") return rig.ir_right;
  return rig.rgb;
}

void write_text(const fs::path& p, const std::string& text) {
  std::ofstream out(p);
  if (!out || !(out << text)) throw RuntimeError("cannot write " + p.string());
}

std::string noise_toml(const NoiseParams& p) {
  char buf[256];
  std::snprintf(buf, sizeof buf, "[noise]\nk = %.9g\ntheta = %.9g\nmu_n = %.9g\nsigma = %.9g\nscale = %.9g\n", p.k,
                p.theta, p.mu_n, p.sigma, p.scale);
  return buf;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Active stereo depth sensor simulator"};
  app.require_subcommand(1);
  app.fallthrough();
  Globals g;
  app.add_option("--seed", g.seed, "RNG seed (overrides the config)");
  app.add_option("--threads", g.threads, "worker threads (0 = all cores)")->check(CLI::NonNegativeNumber);
  app.add_option("--config", g.config, "run config TOML ([run], [noise], [stereo], [outputs], [batch])");

  // render
  std::string r_scene, r_camera = "rgb", r_spectrum = "visible", r_out;
  int r_spp = -1;
  auto* render = app.add_subcommand("render", "path-trace one camera of the rig");
  render->add_option("--scene", r_scene)->required();
  render->add_option("--camera", r_camera)->check(CLI::IsMember({"ir_left", "ir_right", "rgb"}));
  render->add_option("--spectrum", r_spectrum)->check(CLI::IsMember({"visible", "ir"}));
  render->add_option("--spp", r_spp, "samples per pixel (default from config)");
  render->add_option("--out", r_out, "output .pfm (float) or .pgm/.ppm (8-bit)")->required();

  // ir-pair
  std::string p_scene, p_out;
  auto* irpair = app.add_subcommand("ir-pair", "render the left/right IR pair");
  irpair->add_option("--scene", p_scene)->required();
  irpair->add_option("--out-dir", p_out)->required();

  // noise
  std::string n_in, n_out;
  auto* noise = app.add_subcommand("noise", "apply the speckle/thermal noise model to an image");
  noise->add_option("--in", n_in, "8-bit PGM or PFM in DN units")->required();
  noise->add_option("--out", n_out, ".pgm (rounded) or .pfm")->required();

  // match
  std::string m_left, m_right, m_scene, m_disp, m_depth, m_vis;
  double m_fx = 0, m_baseline = 0;
  auto* match = app.add_subcommand("match", "stereo matching on a rectified pair");
  match->add_option("--left", m_left)->required();
  match->add_option("--right", m_right)->required();
  match->add_option("--scene", m_scene, "scene whose rig supplies fx and baseline");
  match->add_option("--fx", m_fx, "focal length in px (without --scene)");
  match->add_option("--baseline", m_baseline, "baseline in m (without --scene)");
  match->add_option("--out-disp", m_disp, "disparity PFM");
  match->add_option("--out-depth", m_depth, "depth PFM");
  match->add_option("--out-vis", m_vis, "normalised disparity PGM");

  // simulate
  std::string s_scene, s_out;
  auto* simulate_cmd = app.add_subcommand("simulate", "full sensor simulation of one scene");
  simulate_cmd->add_option("--scene", s_scene)->required();
  simulate_cmd->add_option("--out-dir", s_out)->required();

  // batch
  std::string b_scene, b_out;
  std::size_t b_n = 1;
  auto* batch = app.add_subcommand("batch", "generate a jittered dataset (resumable)");
  batch->add_option("--scene", b_scene)->required();
  batch->add_option("--n", b_n)->required()->check(CLI::PositiveNumber);
  batch->add_option("--out-dir", b_out)->required();

  // fit
  std::string f_scene, f_targets, f_mode = "coord", f_params, f_csv;
  std::vector<std::string> f_parts;
  double f_lambda = 1.0;
  int f_spp = 8, f_samples = 10;
  bool f_no_lights = false;
  auto* fit = app.add_subcommand("fit", "grid-search part materials against target captures");
  fit->add_option("--scene", f_scene)->required();
  fit->add_option("--targets-dir", f_targets)->required();
  fit->add_option("--part", f_parts, "object with unknown material (repeatable)")->required();
  fit->add_option("--lambda", f_lambda, "IR loss weight")->check(CLI::NonNegativeNumber);
  fit->add_option("--mode", f_mode)->check(CLI::IsMember({"coord", "full"}));
  fit->add_option("--spp", f_spp)->check(CLI::PositiveNumber);
  fit->add_option("--samples", f_samples, "grid samples per parameter")->check(CLI::PositiveNumber);
  fit->add_flag("--no-lights", f_no_lights, "keep light intensities fixed");
  fit->add_option("--out-params", f_params, "TOML fragment with the fitted parameters")->required();
  fit->add_option("--out-csv", f_csv, "candidate losses (default: <out-params>.csv)");

  // estimate-noise
  std::vector<std::string> e_stacks;
  std::string e_out;
  double e_bright = 0.1;
  auto* estimate = app.add_subcommand("estimate-noise", "fit noise parameters to static frame stacks");
  estimate->add_option("--stack", e_stacks, "directory of frames of one static scene (repeatable)")->required();
  estimate->add_option("--bright-fraction", e_bright)->check(CLI::Range(0.0, 1.0));
  estimate->add_option("--out", e_out, "write a [noise] TOML fragment here");

  // extract-pattern
  std::string x_stack, x_out;
  std::optional<double> x_threshold;
  auto* extract = app.add_subcommand("extract-pattern", "threshold a wall capture stack into a dot pattern");
  extract->add_option("--stack", x_stack)->required();
  extract->add_option("--threshold", x_threshold, "DN threshold (default: Otsu)");
  extract->add_option("--out", x_out, "binary PGM")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 1;
  }

  try {
    set_thread_count(g.threads);

    if (*render) {
      const Scene scene = load_scene(r_scene);
      const RunConfig cfg = run_config(g, r_scene);
      TraceOptions opt;
      opt.spp = r_spp > 0 ? r_spp : cfg.spp;
      opt.spectrum = r_spectrum == "ir" ? Spectrum::ir : Spectrum::visible;
      opt.max_bounces = cfg.max_bounces;
      opt.seed = cfg.seed;
      opt.median = cfg.median_prefilter;
      const Renderer renderer(scene);
      write_radiance(r_out, renderer.trace(pick_camera(scene.rig, r_camera), opt), cfg.exposure);
    } else if (*irpair) {
      const Scene scene = load_scene(p_scene);
      const RunConfig cfg = run_config(g, p_scene);
      TraceOptions opt;
      opt.spp = cfg.spp;
      opt.max_bounces = cfg.max_bounces;
      opt.seed = cfg.seed;
      opt.median = cfg.median_prefilter;
      const auto [l, r] = render_ir_pair(Renderer(scene), opt);
      fs::create_directories(p_out);
      write_pfm(fs::path(p_out) / "ir_left.pfm", l);
      write_pfm(fs::path(p_out) / "ir_right.pfm", r);
      write_pgm(fs::path(p_out) / "ir_left.pgm", quantize_ir(l, cfg.exposure));
      write_pgm(fs::path(p_out) / "ir_right.pgm", quantize_ir(r, cfg.exposure));
    } else if (*noise) {
      const RunConfig cfg = run_config(g, "");
      const ImageF out = apply_noise(read_frame_dn(n_in), cfg.noise, cfg.seed);
      if (has_ext(n_out, ".pfm")) write_pfm(n_out, out);
      else write_radiance(n_out, out, 1.0 / 255.0);
    } else if (*match) {
      const RunConfig cfg = run_config(g, "");
      const Image8 left = read_frame8(m_left), right = read_frame8(m_right);
      if (!left.same_shape(right) || left.channels != 1)
        throw ValidationError("match", "left and right must be single-channel images of equal size");
      SensorRig rig;
      if (!m_scene.empty()) {
        rig = load_scene(m_scene).rig;
      } else {
        if (!(m_fx > 0) || !(m_baseline > 0))
          throw ValidationError("match", "give --scene, or --fx and --baseline");
        CameraModel cam;
        cam.width = left.width;
        cam.height = left.height;
        cam.fx = cam.fy = m_fx;
        cam.cx = (left.width - 1) / 2.0;
        cam.cy = (left.height - 1) / 2.0;
        rig = make_default_rig(cam, m_baseline);
      }
      if (rig.ir_left.width != left.width || rig.ir_left.height != left.height)
        throw ValidationError("match", "image size does not match the rig cameras");
      const DepthOutput out = compute_depth(left, right, cfg.stereo, rig);
      if (!m_disp.empty()) write_pfm(m_disp, out.disparity);
      if (!m_depth.empty()) write_pfm(m_depth, out.depth);
      if (!m_vis.empty())
        write_pgm(m_vis, disparity_visualization(out.disparity, cfg.stereo.min_disp, cfg.stereo.max_disp));
    } else if (*simulate_cmd) {
      const Scene scene = load_scene(s_scene);
      const RunConfig cfg = run_config(g, s_scene);
      const SimOutput out = simulate(scene, cfg);
      fs::create_directories(s_out);
      for (const auto& f : write_outputs(out, cfg.outputs, cfg.stereo, s_out)) std::cout << f << '\n';
    } else if (*batch) {
      const Scene scene = load_scene(b_scene);
      const RunConfig cfg = run_config(g, b_scene);
      const BatchReport rep = generate_batch(scene, cfg, b_n, b_out);
      std::cout << "generated " << rep.generated << ", skipped " << rep.skipped << '\n';
    } else if (*fit) {
      const Scene scene = load_scene(f_scene);
      const RunConfig run = run_config(g, f_scene);
      FitConfig cfg;
      cfg.parts = f_parts;
      cfg.lambda = f_lambda;
      cfg.mode = f_mode == "full" ? SearchMode::full : SearchMode::coord;
      cfg.spp = f_spp;
      cfg.samples_per_param = f_samples;
      cfg.seed = run.seed;
      cfg.max_bounces = run.max_bounces;
      cfg.fit_lights = !f_no_lights;
      const auto targets = load_targets(f_targets, scene.rig);
      const FitResult res = grid_search(scene, targets, cfg);
      write_text(f_params, params_to_toml(res.fine));
      write_candidates_csv(f_csv.empty() ? f_params + ".csv" : f_csv, res.candidates);
      std::cout << "loss default " << res.initial_loss << ", coarse " << res.coarse_loss << ", fine "
                << res.fine_loss << '\n';
    } else if (*estimate) {
      std::vector<FrameStack> stacks;
      for (const auto& s : e_stacks) stacks.push_back(read_stack(s));
      NoiseEstimateOptions opt;
      opt.bright_fraction = e_bright;
      const std::string text = noise_toml(estimate_noise_params(stacks, opt));
      if (!e_out.empty()) write_text(e_out, text);
      std::cout << text;
    } else if (*extract) {
      const FrameStack stack = read_stack(x_stack);
      const double thr = x_threshold ? *x_threshold : otsu_threshold(stack_mean(stack));
      const Texture pattern = extract_pattern(stack, thr);
      write_radiance(x_out, pattern.image, 1.0);
      std::cout << "threshold " << thr << '\n';
    }
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 3;
  }
  return 0;
}
