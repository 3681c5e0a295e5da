#pragma once

// Shared fixtures for the unit and acceptance tests.

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "depthsim/image.hpp"
#include "depthsim/scene.hpp"

namespace depthsim::fixtures {

inline CameraModel small_camera(int w, int h, double fx) {
  CameraModel c;
  c.width = w;
  c.height = h;
  c.fx = c.fy = fx;
  c.cx = (w - 1) / 2.0;
  c.cy = (h - 1) / 2.0;
  return c;
}

// Frontal wall at depth z (in front of the rig centre) with one material.
inline Scene wall_scene(double z, const PbrMaterial& mat, const CameraModel& cam, double baseline = 0.055,
                        double size = 4.0) {
  Scene s;
  s.meshes.push_back({"wall", make_quad(size, size)});
  s.materials.push_back({"wall", mat});
  SceneObject o;
  o.name = "wall";
  o.pose = Transform::translate({baseline / 2, 0, z});
  s.objects.push_back(o);
  s.rig = make_default_rig(cam, baseline);
  return s;
}

// Grey wall at 1.5 m behind a ball ("ball", radius 0.2 m at 1.0 m) made of
// `ball`, lit by one point light and a dim uniform environment.
inline Scene ball_scene(const PbrMaterial& ball, const CameraModel& cam) {
  PbrMaterial grey;
  grey.base_color = {0.5, 0.5, 0.5};
  Scene s = wall_scene(1.5, grey, cam);
  s.meshes.push_back({"sphere", make_sphere(0.2, 48, 24)});
  s.materials.push_back({"ball", ball});
  SceneObject o;
  o.name = "ball";
  o.mesh = 1;
  o.material = 1;
  o.pose = Transform::translate({0.0275, 0, 1.0});
  s.objects.push_back(o);
  LightSource l;
  l.kind = LightKind::point;
  l.pose = Transform::translate({0.4, -0.5, 0.2});
  l.intensity = {1.5, 1.5, 1.5};
  s.lights.push_back(l);
  s.environment = {0.2, 0.2, 0.2};
  return s;
}

// The rig used by the flat-wall checks: 424x240, fx 430, 55 mm baseline.
inline CameraModel d415_like_camera() { return small_camera(424, 240, 430.0); }

// Uniform random 8-bit texture, deterministic in `seed`.
inline Image8 random_image(int w, int h, std::uint32_t seed) {
  std::mt19937 rng(seed);
  std::uniform_int_distribution<int> dist(0, 255);
  Image8 img(w, h, 1);
  for (auto& v : img.data) v = static_cast<std::uint8_t>(dist(rng));
  return img;
}

// Shifts `img` right by `shift` px with bilinear resampling: out(x) = in(x - shift).
// Columns that would sample outside are clamped to the border.
inline Image8 shift_right(const Image8& img, double shift) {
  Image8 out(img.width, img.height, 1);
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x) {
      const double sx = std::clamp(x - shift, 0.0, img.width - 1.0);
      const int x0 = static_cast<int>(std::floor(sx));
      const int x1 = std::min(x0 + 1, img.width - 1);
      const double f = sx - x0;
      const double v = (1 - f) * img.at(x0, y) + f * img.at(x1, y);
      out.at(x, y) = static_cast<std::uint8_t>(std::lround(v));
    }
  return out;
}

// Blurred random texture: smooth enough that bilinear resampling keeps
// sub-pixel information (plain white noise aliases).
inline Image8 smooth_random_image(int w, int h, std::uint32_t seed) {
  const Image8 raw = random_image(w, h, seed);
  Image8 out(w, h, 1);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      int sum = 0, n = 0;
      for (int dy = -1; dy <= 1; ++dy)
        for (int dx = -1; dx <= 1; ++dx) {
          const int xx = std::clamp(x + dx, 0, w - 1), yy = std::clamp(y + dy, 0, h - 1);
          sum += raw.at(xx, yy);
          ++n;
        }
      out.at(x, y) = static_cast<std::uint8_t>((sum + n / 2) / n);
    }
  return out;
}

inline double median_of(std::vector<double> v) {
  if (v.empty()) return std::nan("");
  const std::size_t m = v.size() / 2;
  std::nth_element(v.begin(), v.begin() + m, v.end());
  double hi = v[m];
  if (v.size() % 2 == 1) return hi;
  const double lo = *std::max_element(v.begin(), v.begin() + m);
  return 0.5 * (lo + hi);
}

inline std::filesystem::path temp_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("depthsim_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace depthsim::fixtures
