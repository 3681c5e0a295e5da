// Acceptance checks. Prints one PASS/FAIL line per criterion; exit status is
// the number of failed criteria (capped at 1).
//
//   depthsim_acceptance            run every criterion
//   depthsim_acceptance c4 c9      run a subset

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <functional>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>

#include "depthsim/matfit.hpp"
#include "depthsim/noise.hpp"
#include "depthsim/parallel.hpp"
#include "depthsim/pipeline.hpp"
#include "depthsim/render.hpp"
#include "depthsim/stereo.hpp"
#include "sgm_oracle.hpp"
#include "test_support.hpp"

using namespace depthsim;
namespace fx = depthsim::fixtures;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string digest(const ImageF& img) { return sha256_hex(img.data.data(), img.data.size() * sizeof(float)); }
std::string digest(const Image8& img) { return sha256_hex(img.data.data(), img.data.size()); }

// ---- 1: flat wall ----

SimOutput wall_run() {
  const Scene s = fx::wall_scene(1.0, PbrMaterial{}, fx::d415_like_camera());
  RunConfig cfg;
  cfg.spp = 8;
  cfg.seed = 1;
  return simulate(s, cfg);
}

std::string wall_digest(const SimOutput& o) {
  return digest(o.ir_left_noisy) + digest(o.ir_right_noisy) + digest(o.disparity) + digest(o.depth) +
         digest(o.registered_depth);
}

Outcome c1() {
  ScopedThreadCount one(1);
  const auto t0 = std::chrono::steady_clock::now();
  const SimOutput out = wall_run();
  const double secs = seconds_since(t0);
  std::vector<double> err, depth;
  for (float z : out.depth.data)
    if (is_valid(z)) {
      err.push_back(std::abs(z - 1.0));
      depth.push_back(z);
    }
  const double valid = static_cast<double>(err.size()) / out.depth.data.size();
  const double med = err.empty() ? 1e9 : fx::median_of(err);
  const double bias = depth.empty() ? 1e9 : fx::median_of(depth) - 1.0;
  return {valid >= 0.80 && med <= 0.005 && secs <= 120.0,
          fmt("valid %.1f%% (>= 80%%), median |z-1| %.2f mm (<= 5 mm), %.1f s single-thread (<= 120 s); "
              "info: median z - 1 = %+.2f mm",
              100 * valid, 1000 * med, secs, 1000 * bias)};
}

// ---- 2: material-dependent holes ----

Outcome c2() {
  PbrMaterial glass;
  glass.transmission = 1.0;
  const CameraModel cam = fx::d415_like_camera();
  RunConfig cfg;
  cfg.spp = 8;
  cfg.seed = 3;
  const SimOutput opaque = simulate(fx::ball_scene(PbrMaterial{}, cam), cfg);
  const SimOutput clear = simulate(fx::ball_scene(glass, cam), cfg);
  // Silhouette from the z-buffer: the sphere spans 0.8..1.2 m, the plane is at 1.5 m.
  int inside = 0, holes_opaque = 0, holes_clear = 0;
  for (std::size_t i = 0; i < opaque.clean_depth.data.size(); ++i) {
    if (!(opaque.clean_depth.data[i] < 1.3f)) continue;
    ++inside;
    holes_opaque += !is_valid(opaque.depth.data[i]);
    holes_clear += !is_valid(clear.depth.data[i]);
  }
  const double fo = inside ? double(holes_opaque) / inside : 0, fc = inside ? double(holes_clear) / inside : 0;
  const bool pass = inside > 0 && fc > 0 && fc >= 5.0 * fo;
  return {pass, fmt("invalid inside silhouette (%d px): transparent %.1f%%, opaque %.1f%%, ratio %.2f (>= 5)", inside,
                    100 * fc, 100 * fo, fo > 0 ? fc / fo : INFINITY)};
}

// ---- 3: SGM oracle ----

Outcome c3() {
  std::mt19937 rng(2024);
  int mismatched = 0;
  for (int run = 0; run < 1000; ++run) {
    std::uniform_int_distribution<int> dw(1, 6), dd(2, 4), dp(1, 20);
    const int w = dw(rng), h = dw(rng), d = dd(rng);
    StereoConfig cfg;
    cfg.max_disp = d;
    cfg.p1 = dp(rng);
    cfg.p2 = cfg.p1 + dp(rng);
    const CostVolume v = fx::random_volume(w, h, d, rng, 60);
    const AggregatedVolume agg = sgm_aggregate(v, cfg);
    const auto oracle = fx::oracle_sgm(v, cfg.p1, cfg.p2);
    bool same = agg.data.size() == oracle.size();
    for (std::size_t i = 0; same && i < oracle.size(); ++i) same = static_cast<std::int64_t>(agg.data[i]) == oracle[i];
    mismatched += !same;
  }
  return {mismatched == 0, fmt("%d of 1000 random volumes differ from the exhaustive oracle (need 0)", mismatched)};
}

// ---- 4: shift recovery ----

struct ShiftResult {
  double exact_fraction = 0, valid_fraction = 0, median_err = 0;
  std::string digest;
};

ShiftResult shift_run() {
  const int W = 320, H = 240, m = 4;
  const SensorRig rig = make_default_rig(fx::small_camera(W, H, 100), 0.05);
  ShiftResult r;

  StereoConfig integer;
  integer.subpixel = false;
  const Image8 right = fx::random_image(W, H, 11);
  const DepthOutput a = compute_depth(fx::shift_right(right, 7), right, integer, rig);
  int valid = 0, exact = 0, total = 0;
  for (int y = m; y < H - m; ++y)
    for (int x = m + 7; x < W - m; ++x) {
      ++total;
      const float d = a.disparity.at(x, y);
      if (!is_valid(d)) continue;
      ++valid;
      exact += d == 7.0f;
    }
  r.exact_fraction = valid ? double(exact) / valid : 0;
  r.valid_fraction = double(valid) / total;

  const Image8 smooth = fx::smooth_random_image(W, H, 12);
  const DepthOutput b = compute_depth(fx::shift_right(smooth, 6.5), smooth, StereoConfig{}, rig);
  std::vector<double> err;
  for (int y = m; y < H - m; ++y)
    for (int x = m + 7; x < W - m; ++x)
      if (is_valid(b.disparity.at(x, y))) err.push_back(std::abs(b.disparity.at(x, y) - 6.5));
  r.median_err = err.empty() ? 1e9 : fx::median_of(err);
  r.digest = digest(a.disparity) + digest(a.depth) + digest(b.disparity) + digest(b.depth);
  return r;
}

Outcome c4() {
  const ShiftResult r = shift_run();
  return {r.exact_fraction >= 0.99 && r.median_err <= 0.25,
          fmt("+7 px: %.2f%% of interior valid pixels exactly 7 (>= 99%%, %.1f%% valid); 6.5 px: median |d-6.5| "
              "%.3f px (<= 0.25)",
              100 * r.exact_fraction, 100 * r.valid_fraction, r.median_err)};
}

// ---- 5: noise round trip ----

ImageF bright_dark_image(int w, int h) {
  ImageF img(w, h, 1);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) img.at(x, y) = (x / 8 + y / 8) % 2 ? 0.0f : static_cast<float>(40 + (x * 7 + y * 3) % 160);
  return img;
}

struct NoiseResult {
  NoiseParams est;
  double mean_err[2]{}, var_err[2]{};
  std::string digest;
};

NoiseResult noise_run() {
  NoiseParams truth;
  truth.k = 3.98;
  truth.theta = 0.254;
  truth.mu_n = -0.231;
  truth.sigma = 0.83;
  NoiseResult r;
  const ImageF clean = bright_dark_image(320, 240);
  FrameStack st;
  for (std::uint64_t f = 0; f < 100; ++f) st.push_back(apply_noise(clean, truth, derive_seed(17, f)));
  r.est = estimate_noise_params({st});
  r.digest = digest(st.front()) + digest(st.back());

  // Moments on 10^6 pixels at levels where the output clamp is inactive.
  const float levels[2] = {20.0f, 100.0f};
  for (int i = 0; i < 2; ++i) {
    const ImageF out = apply_noise(ImageF(1000, 1000, 1, levels[i]), truth, 11 + i);
    double s = 0, s2 = 0;
    for (float v : out.data) {
      s += v;
      s2 += double(v) * v;
    }
    const double n = out.data.size(), mean = s / n, var = s2 / n - mean * mean;
    const double c = levels[i], kt = truth.k * truth.theta;
    const double want_mean = kt * c + truth.mu_n;
    const double want_var = c * c * truth.k * truth.theta * truth.theta + truth.sigma * truth.sigma;
    r.mean_err[i] = std::abs(mean - want_mean) / want_mean;
    r.var_err[i] = std::abs(var - want_var) / want_var;
    r.digest += digest(out);
  }
  return r;
}

Outcome c5() {
  const NoiseResult r = noise_run();
  const double ek = std::abs(r.est.k - 3.98) / 3.98, et = std::abs(r.est.theta - 0.254) / 0.254;
  const double em = std::abs(r.est.mu_n + 0.231) / 0.231, es = std::abs(r.est.sigma - 0.83) / 0.83;
  const double worst = std::max({ek, et, em, es});
  const double mean_err = std::max(r.mean_err[0], r.mean_err[1]), var_err = std::max(r.var_err[0], r.var_err[1]);
  return {worst <= 0.15 && mean_err <= 0.01 && var_err <= 0.03,
          fmt("estimate k %.3f theta %.4f mu %.4f sigma %.4f, worst rel err %.1f%% (<= 15%%); moments mean %.2f%% "
              "(<= 1%%) var %.2f%% (<= 3%%)",
              r.est.k, r.est.theta, r.est.mu_n, r.est.sigma, 100 * worst, 100 * mean_err, 100 * var_err)};
}

// ---- 6: white furnace ----

Outcome c6() {
  Scene s;
  s.rig = make_default_rig(fx::small_camera(16, 16, 50), 0.055);
  s.environment = {0.7, 0.7, 0.7};
  PbrMaterial white;
  white.base_color = {1, 1, 1};
  s.meshes.push_back({"ball", make_sphere(0.5, 96, 48)});
  s.materials.push_back({"white", white});
  SceneObject o;
  o.name = "ball";
  o.pose = Transform::translate({0, 0, 3});
  s.objects.push_back(o);
  TraceOptions opt;
  opt.spp = 1024;
  opt.clamp = 0;
  const ImageF img = trace(s, s.rig.ir_left, opt);
  double worst = 0;
  for (int c = 0; c < 3; ++c) {
    double sum = 0;
    for (int y = 0; y < img.height; ++y)
      for (int x = 0; x < img.width; ++x) sum += img.at(x, y, c);
    worst = std::max(worst, std::abs(sum / (img.width * img.height) - 0.7) / 0.7);
  }
  return {worst <= 0.02, fmt("mean pixel error %.3f%% of environment radiance (<= 2%%)", 100 * worst)};
}

// ---- 7: grid search ----

Outcome c7() {
  const CameraModel cam = fx::small_camera(64, 48, 60);
  PbrMaterial metal;
  metal.base_color = {0.9, 0.6, 0.3};
  metal.metallic = 1.0;
  FitConfig cfg;
  cfg.parts = {"ball"};
  cfg.free_params["ball"] = {true, false, false, false};
  cfg.fit_lights = false;
  cfg.spp = 16;
  cfg.seed = 5;
  metal.roughness = 0.42;
  const Scene truth = fx::ball_scene(metal, cam);
  TraceOptions topt;
  topt.spp = cfg.spp;
  topt.median = cfg.median;
  topt.max_bounces = cfg.max_bounces;
  topt.seed = cfg.seed;
  const std::vector<FitTarget> targets{{render_capture(Renderer(truth), truth.rig, topt), truth.rig}};

  std::ostringstream os;
  bool pass = true;
  for (double start : {0.8, 0.1}) {
    metal.roughness = start;
    const FitResult r = grid_search(fx::ball_scene(metal, cam), targets, cfg);
    const double got = r.fine.parts.at("ball").values[kRoughness];
    const bool ok = std::abs(got - 0.42) <= 0.011 + 1e-12 && r.fine_loss <= r.coarse_loss;
    pass = pass && ok;
    os << fmt("start %.1f -> %.4f (loss coarse %.5f fine %.5f); ", start, got, r.coarse_loss, r.fine_loss);
  }
  return {pass, os.str() + "need |r-0.42| <= 0.011 and fine <= coarse"};
}

// ---- 8: throughput ----

struct Timed {
  double secs = 0;
  DisparityMap disp;
};

Timed time_match(const Image8& l, const Image8& r, const StereoConfig& cfg, int threads) {
  ScopedThreadCount tc(threads);
  const auto t0 = std::chrono::steady_clock::now();
  Timed t;
  t.disp = compute_disparity(l, r, cfg);
  t.secs = seconds_since(t0);
  return t;
}

Outcome c8() {
  const int W = 640, H = 480;
  const Image8 right = fx::random_image(W, H, 5);
  const Image8 left = fx::shift_right(right, 20);
  StereoConfig cfg;
  cfg.max_disp = 64;
  time_match(left, right, cfg, 1);  // warm-up
  const Timed one = time_match(left, right, cfg, 1);
  const Timed four = time_match(left, right, cfg, 4);
  const double speedup = one.secs / four.secs;
  const bool identical = digest(one.disp) == digest(four.disp);
  return {one.secs <= 5.0 && speedup >= 2.5 && identical,
          fmt("640x480 max_disp 64: %.2f s on 1 thread (<= 5 s), %.2f s on 4 threads, speedup %.2fx (>= 2.5x, %u "
              "hardware threads), outputs %s",
              one.secs, four.secs, speedup, std::thread::hardware_concurrency(), identical ? "identical" : "DIFFER")};
}

// ---- 9: determinism ----

Outcome c9() {
  std::map<int, std::string> wall, shift, noise;
  for (int n : {1, 4, 8}) {
    ScopedThreadCount tc(n);
    wall[n] = wall_digest(wall_run());
    shift[n] = shift_run().digest;
    noise[n] = noise_run().digest;
  }
  auto same = [](const std::map<int, std::string>& m) { return m.at(1) == m.at(4) && m.at(1) == m.at(8); };
  return {same(wall) && same(shift) && same(noise),
          fmt("threads {1,4,8}: wall %s, shift %s, noise %s", same(wall) ? "identical" : "DIFFER",
              same(shift) ? "identical" : "DIFFER", same(noise) ? "identical" : "DIFFER")};
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> all = {
      {"c1", c1}, {"c2", c2}, {"c3", c3}, {"c4", c4}, {"c5", c5}, {"c6", c6}, {"c7", c7}, {"c8", c8}, {"c9", c9}};
  std::vector<std::string> selected;
  CLI::App app("depthsim acceptance checks");
  app.add_option("criteria", selected, "criteria to run (default: all)")->check(CLI::IsMember({"c1", "c2", "c3", "c4",
                                                                                                "c5", "c6", "c7", "c8",
                                                                                                "c9"}));
  CLI11_PARSE(app, argc, argv);

  int failed = 0;
  for (const auto& [name, fn] : all) {
    if (!selected.empty() && std::find(selected.begin(), selected.end(), name) == selected.end()) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = fn();
    } catch (const std::exception& e) {
      o = {false, std::string("error: ") + e.what()};
    }
    std::printf("%s %s  %s  [%.1f s]\n", name.c_str(), o.pass ? "PASS" : "FAIL", o.detail.c_str(), seconds_since(t0));
    std::fflush(stdout);
    failed += !o.pass;
  }
  return failed ? 1 : 0;
}
