#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "depthsim/bvh.hpp"
#include "depthsim/lights.hpp"
#include "depthsim/parallel.hpp"
#include "depthsim/render.hpp"
#include "test_support.hpp"

using namespace depthsim;
namespace fx = depthsim::fixtures;

namespace {

double mean(const ImageF& img, int channel = 0) {
  double s = 0;
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x) s += img.at(x, y, channel);
  return s / img.pixel_count();
}

Texture constant_pattern(float v) {
  Texture t;
  t.image = ImageF(8, 8, 1, v);
  return t;
}

// Scene with no geometry and no lights, used as a base.
Scene empty_scene(const CameraModel& cam) {
  Scene s;
  s.rig = make_default_rig(cam, 0.05);
  return s;
}

}  // namespace

TEST(Lights, InverseSquareFalloff) {
  LightSource l;
  l.kind = LightKind::point;
  l.intensity = {2, 2, 2};
  Pcg32 rng(1);
  const auto a = light_contribution(l, {0, 0, 1}, rng);
  const auto b = light_contribution(l, {0, 0, 2}, rng);
  EXPECT_NEAR(b.radiance.x / a.radiance.x, 0.25, 1e-12);
  EXPECT_NEAR(a.radiance.x, 2.0, 1e-12);
  EXPECT_NEAR(a.direction.z, -1.0, 1e-12);
  EXPECT_TRUE(a.delta);
}

TEST(Lights, AllOnesPatternEqualsPlainSpot) {
  LightSource spot;
  spot.kind = LightKind::spot;
  spot.fov = 0.5;
  spot.intensity = {1, 0.5, 0.25};
  spot.pose = Transform::from_euler({0.1, -0.2, 0}, {0.1, 0.2, 0});
  LightSource tex = spot;
  tex.kind = LightKind::textured_spot;
  tex.pattern = constant_pattern(1.0f);
  std::mt19937 gen(3);
  std::uniform_real_distribution<double> u(-1, 1);
  Pcg32 rng(1);
  for (int k = 0; k < 500; ++k) {
    const Vec3 p{u(gen), u(gen), 1 + u(gen)};
    const auto a = light_contribution(spot, p, rng);
    const auto b = light_contribution(tex, p, rng);
    // The plain spot is a cone; the pattern spans the square circumscribing
    // it, so every cone point finds a texel.
    for (int c = 0; c < 3; ++c) EXPECT_EQ(a.radiance[c], b.radiance[c]);
  }
}

TEST(Lights, AllZerosPatternGivesNothing) {
  LightSource tex;
  tex.kind = LightKind::textured_spot;
  tex.fov = 0.7;
  tex.pattern = constant_pattern(0.0f);
  Pcg32 rng(1);
  for (double x = -1; x <= 1; x += 0.1) {
    const auto s = light_contribution(tex, {x, 0.3 * x, 1}, rng);
    EXPECT_EQ(max_component(s.radiance), 0.0);
  }
}

TEST(Lights, SpotConeMask) {
  LightSource spot;
  spot.kind = LightKind::spot;
  spot.fov = 0.3;
  EXPECT_EQ(spot_attenuation(spot, {std::tan(0.29), 0, 1}), 1.0);
  EXPECT_EQ(spot_attenuation(spot, {std::tan(0.31), 0, 1}), 0.0);
  EXPECT_EQ(spot_attenuation(spot, {0, 0, -1}), 0.0);
}

TEST(Lights, PatternOrientation) {
  // Left half of the texture lit: points at negative light-space x are bright.
  LightSource tex;
  tex.kind = LightKind::textured_spot;
  tex.fov = 0.6;
  Texture t;
  t.image = ImageF(2, 2, 1);
  t.image.data = {1, 0, 0, 0};  // top-left texel only
  tex.pattern = t;
  // Image-style axes: x right, y down, so the top-left texel is at -x, -y.
  EXPECT_EQ(spot_attenuation(tex, {-0.2, -0.2, 1}), 1.0);
  EXPECT_EQ(spot_attenuation(tex, {0.2, -0.2, 1}), 0.0);
  EXPECT_EQ(spot_attenuation(tex, {-0.2, 0.2, 1}), 0.0);
}

TEST(Lights, AreaLightPdfIntegratesToOne) {
  LightSource l;
  l.kind = LightKind::area;
  l.size = {0.4, 0.2};
  l.pose = Transform::from_euler({0, 0, 1}, {kPi, 0, 0});  // facing -z
  const Vec3 p{0.1, 0, 0};
  Pcg32 rng(4);
  // E[1/pdf] over light samples = subtended solid angle; compare with
  // uniform-sphere hit-testing.
  double inv_pdf = 0;
  const int kN = 200000;
  for (int s = 0; s < kN; ++s) {
    const auto ls = light_contribution(l, p, rng);
    ASSERT_FALSE(ls.delta);
    inv_pdf += 1.0 / ls.pdf;
  }
  double hits = 0;
  for (int s = 0; s < kN; ++s) {
    const double z = 2 * rng.uniform() - 1;
    const double phi = 2 * kPi * rng.uniform();
    const double r = std::sqrt(1 - z * z);
    const Ray ray{p, {r * std::cos(phi), r * std::sin(phi), z}};
    if (intersect_area_light(l, ray)) hits += 1;
  }
  EXPECT_NEAR(inv_pdf / kN, hits / kN * 4 * kPi, 0.02 * inv_pdf / kN);
}

TEST(Bvh, MatchesBruteForce) {
  std::mt19937 gen(5);
  std::uniform_real_distribution<double> u(-1, 1);
  std::vector<WorldTriangle> tris;
  for (int k = 0; k < 300; ++k) {
    WorldTriangle t;
    t.p0 = {u(gen), u(gen), 2 + u(gen)};
    t.e1 = Vec3{u(gen), u(gen), u(gen)} * 0.2;
    t.e2 = Vec3{u(gen), u(gen), u(gen)} * 0.2;
    t.ng = normalize(cross(t.e1, t.e2));
    t.object = k;
    tris.push_back(t);
  }
  const Bvh bvh(tris);
  for (int r = 0; r < 2000; ++r) {
    const Ray ray{{0, 0, 0}, normalize(Vec3{u(gen) * 0.6, u(gen) * 0.6, 1})};
    double best = 1e30;
    int best_tri = -1;
    for (std::size_t k = 0; k < tris.size(); ++k) {
      Hit h;
      if (intersect_triangle(tris[k], ray, 1e-9, best, h)) {
        best = h.t;
        best_tri = static_cast<int>(k);
      }
    }
    const auto hit = bvh.intersect(ray, 1e30);
    ASSERT_EQ(hit.has_value(), best_tri >= 0);
    if (hit) {
      EXPECT_DOUBLE_EQ(hit->t, best);
      EXPECT_EQ(bvh.triangles()[hit->triangle].object, tris[best_tri].object);
    }
    EXPECT_EQ(bvh.occluded(ray, 1e30), best_tri >= 0);
  }
}

TEST(Camera, RaysFollowPinholeConvention) {
  CameraModel cam = fx::small_camera(640, 480, 500);
  const Ray c = camera_ray(cam, cam.cx, cam.cy);
  EXPECT_NEAR(c.dir.z, 1, 1e-12);
  const Ray r = camera_ray(cam, cam.cx + 500, cam.cy);
  EXPECT_NEAR(r.dir.x, std::sqrt(0.5), 1e-12);  // 45 degrees to the right
  const Ray d = camera_ray(cam, cam.cx, cam.cy + 500);
  EXPECT_GT(d.dir.y, 0);  // image y points down
}

TEST(Render, EmptySceneIsAmbient) {
  Scene s = empty_scene(fx::small_camera(20, 12, 20));
  s.rig.ir_ambient = 0.037;
  TraceOptions opt;
  opt.spp = 2;
  opt.spectrum = Spectrum::ir;
  const ImageF img = trace(s, s.rig.ir_left, opt);
  ASSERT_EQ(img.channels, 1);
  for (float v : img.data) EXPECT_FLOAT_EQ(v, 0.037f);
}

TEST(Render, WhiteFurnace) {
  Scene s = empty_scene(fx::small_camera(12, 12, 40));
  s.environment = {0.7, 0.7, 0.7};
  PbrMaterial white;
  white.base_color = {1, 1, 1};
  white.roughness = 1;
  s.meshes.push_back({"ball", make_sphere(0.5, 96, 48)});
  s.materials.push_back({"white", white});
  SceneObject o;
  o.pose = Transform::translate({0, 0, 3});
  s.objects.push_back(o);
  TraceOptions opt;
  opt.spp = 1024;
  opt.clamp = 0;
  const ImageF img = trace(s, s.rig.ir_left, opt);
  for (int c = 0; c < 3; ++c) EXPECT_NEAR(mean(img, c), 0.7, 0.02 * 0.7);
  for (float v : img.data) EXPECT_TRUE(std::isfinite(v) && v >= 0);
}

TEST(Render, DotFractionMatchesPatternDensity) {
  const CameraModel cam = fx::small_camera(96, 96, 120);
  Scene s = empty_scene(cam);
  s.meshes.push_back({"wall", make_quad(6, 6)});
  s.materials.push_back({"white", PbrMaterial{}});
  SceneObject o;
  o.pose = Transform::translate({0, 0, 1});
  s.objects.push_back(o);
  LightSource spot;
  spot.kind = LightKind::textured_spot;
  spot.fov = 0.6;  // wider than the camera, so the whole view is inside the pattern
  spot.intensity = {1, 1, 1};
  spot.pattern = generate_dot_pattern({48, 48, 0.5, 11});
  s.lights.push_back(spot);
  TraceOptions opt;
  opt.spp = 16;
  const ImageF img = trace(s, cam, opt);

  // Texels inside the camera's view, counted from the texture itself.
  const double span = std::tan(spot.fov);
  double on = 0, n = 0;
  for (int y = 0; y < cam.height; ++y)
    for (int x = 0; x < cam.width; ++x) {
      const double tx = (x - cam.cx) / cam.fx / span, ty = (y - cam.cy) / cam.fy / span;
      on += spot.pattern->sample(0.5 * (tx + 1), 1 - 0.5 * (ty + 1));
      n += 1;
    }
  const double expected = on / n;

  double peak = 0;
  for (int i = 0; i < static_cast<int>(img.pixel_count()); ++i) peak = std::max(peak, double(img.data[i * 3]));
  double bright = 0, dark_mode = 0;
  for (int i = 0; i < static_cast<int>(img.pixel_count()); ++i) {
    const double v = img.data[i * 3];
    bright += v > 0.5 * peak;
    dark_mode += v < 0.1 * peak || v > 0.6 * peak;
  }
  EXPECT_NEAR(bright / n, expected, 0.05);
  EXPECT_NEAR(expected, 0.5, 0.1);
  EXPECT_GT(dark_mode / n, 0.6);  // bimodal: most pixels near one of the two levels
}

TEST(Render, SmallAreaLightMatchesPointIrradiance) {
  const CameraModel cam = fx::small_camera(8, 8, 400);
  Scene s = empty_scene(cam);
  s.meshes.push_back({"floor", make_quad(4, 4)});
  PbrMaterial m;
  m.base_color = {0.5, 0.5, 0.5};
  s.materials.push_back({"grey", m});
  SceneObject o;
  o.pose = Transform::translate({0, 0, 2});
  s.objects.push_back(o);
  LightSource area;
  area.kind = LightKind::area;
  area.size = {0.02, 0.02};
  area.intensity = {1000, 1000, 1000};
  area.pose = Transform::translate({0, 0, 1});  // 1 m in front of the floor, emitting +z
  s.lights.push_back(area);
  TraceOptions opt;
  opt.spp = 64;
  opt.clamp = 0;
  const ImageF img = trace(s, cam, opt);
  // E = L * A / r^2 at normal incidence, outgoing radiance albedo/pi * E.
  const double expected = 0.5 * kInvPi * 1000 * 0.02 * 0.02 / 1.0;
  EXPECT_NEAR(mean(img, 0), expected, 0.01 * expected);
}

TEST(Render, DeterministicAcrossThreadCounts) {
  const Scene s = fx::wall_scene(0.8, PbrMaterial{}, fx::small_camera(50, 37, 50));
  TraceOptions opt;
  opt.spp = 4;
  opt.spectrum = Spectrum::ir;
  opt.seed = 42;
  ImageF a, b, c;
  {
    ScopedThreadCount t(1);
    a = trace(s, s.rig.ir_left, opt);
  }
  {
    ScopedThreadCount t(4);
    b = trace(s, s.rig.ir_left, opt);
  }
  {
    ScopedThreadCount t(8);
    c = trace(s, s.rig.ir_left, opt);
  }
  EXPECT_EQ(a, b);
  EXPECT_EQ(a, c);
  opt.seed = 43;
  EXPECT_NE(trace(s, s.rig.ir_left, opt), a);
}

TEST(Render, IrMatchesVisibleRedChannel) {
  const CameraModel cam = fx::small_camera(32, 24, 30);
  Scene ir = fx::wall_scene(1.0, PbrMaterial{}, cam);
  ir.materials[0].material.base_color = {0.6, 0.2, 0.9};
  LightSource lamp;
  lamp.kind = LightKind::point;
  lamp.pose = Transform::translate({0.3, -0.5, 0.2});
  lamp.intensity = {0.5, 0.1, 0.2};
  ir.lights.push_back(lamp);
  ir.rig.visible_attenuation = 1;
  ir.rig.ir_ambient = 0;
  ir.rig.projector.pattern = constant_pattern(1.0f);

  Scene vis = ir;
  LightSource plain = ir.rig.projector;
  plain.kind = LightKind::spot;
  plain.pattern.reset();
  vis.lights.push_back(plain);

  TraceOptions opt;
  opt.spp = 512;
  opt.spectrum = Spectrum::ir;
  const ImageF a = trace(ir, cam, opt);
  opt.spectrum = Spectrum::visible;
  opt.seed = 99;
  const ImageF b = trace(vis, cam, opt);
  double diff = 0;
  for (int y = 0; y < cam.height; ++y)
    for (int x = 0; x < cam.width; ++x) diff += std::abs(a.at(x, y) - b.at(x, y, 0));
  const double m = mean(a);
  EXPECT_GT(m, 0);
  EXPECT_LT(diff / a.pixel_count(), 0.02 * m);
}

TEST(Render, IrScalesSceneLightsOnly) {
  const CameraModel cam = fx::small_camera(16, 16, 20);
  Scene s = fx::wall_scene(1.0, PbrMaterial{}, cam);
  s.rig.projector.intensity = {0, 0, 0};
  s.rig.ir_ambient = 0;
  LightSource lamp;
  lamp.kind = LightKind::point;
  lamp.pose = Transform::translate({0, 0, 0});
  lamp.intensity = {1, 1, 1};
  s.lights.push_back(lamp);
  TraceOptions opt;
  opt.spp = 16;
  const double vis = mean(trace(s, cam, opt), 0);
  opt.spectrum = Spectrum::ir;
  const double ir = mean(trace(s, cam, opt));
  EXPECT_NEAR(ir / vis, s.rig.visible_attenuation, 1e-3);
}

TEST(IrPair, DotsShiftByDisparity) {
  const CameraModel cam = fx::small_camera(160, 60, 150);
  const double z = 0.75, b = 0.055;
  const Scene s = fx::wall_scene(z, PbrMaterial{}, cam, b);
  const auto [left, right] = render_ir_pair(s, 8, 3);
  const double expect = cam.fx * b / z;  // 11 px
  // Best integer shift by sum of squared differences over interior rows.
  int best = -1;
  double best_ssd = 1e300;
  for (int d = 0; d < 25; ++d) {
    double ssd = 0;
    for (int y = 10; y < cam.height - 10; ++y)
      for (int x = 30; x < cam.width - 30; ++x) ssd += std::pow(left.at(x, y) - right.at(x - d, y), 2);
    if (ssd < best_ssd) best_ssd = ssd, best = d;
  }
  EXPECT_NEAR(best, expect, 0.6);
}

TEST(IrPair, IndependentSeedsSameExposure) {
  const CameraModel cam = fx::small_camera(48, 32, 50);
  const Scene s = fx::wall_scene(1.0, PbrMaterial{}, cam);
  const auto [l1, r1] = render_ir_pair(s, 1, 5);
  const auto [l64, r64] = render_ir_pair(s, 64, 5);
  EXPECT_NE(l1, l64);
  EXPECT_NEAR(mean(l1), mean(l64), 0.05 * mean(l64));
  EXPECT_NEAR(mean(r1), mean(r64), 0.05 * mean(r64));
  // Same seed reproduces; the two eyes use different streams.
  EXPECT_EQ(render_ir_pair(s, 1, 5).first, l1);
  EXPECT_NE(l1, r1);
}

TEST(IrPair, MirrorSymmetricScene) {
  const CameraModel cam = fx::small_camera(64, 48, 60);
  const double b = 0.055;
  Scene s = fx::wall_scene(0.9, PbrMaterial{}, cam, b);
  // Symmetric pattern and a ball on the rig's mid-plane.
  Texture pat = generate_dot_pattern({40, 40, 0.4, 5});
  for (int y = 0; y < 40; ++y)
    for (int x = 0; x < 20; ++x) pat.image.at(39 - x, y) = pat.image.at(x, y);
  pat.filter = TextureFilter::bilinear;
  s.rig.projector.pattern = pat;
  s.meshes.push_back({"ball", make_sphere(0.1, 48, 24)});
  s.materials.push_back({"ball", PbrMaterial{}});
  SceneObject ball;
  ball.mesh = 1;
  ball.material = 1;
  ball.pose = Transform::translate({b / 2, 0.05, 0.6});
  s.objects.push_back(ball);

  const auto [left, right] = render_ir_pair(s, 256, 8);
  double peak = 0;
  for (float v : left.data) peak = std::max(peak, double(v));
  EXPECT_GT(ssim(left, flip_horizontal(right), peak), 0.95);
}

TEST(Quantize, Examples) {
  ImageF img(4, 1, 1);
  img.data = {1.0f / 2.0f, 0.0f, 0.5f, 7.0f};
  const Image8 a = quantize_ir(img, 2.0);
  EXPECT_EQ(a.at(0, 0), 255);  // 1/exposure
  EXPECT_EQ(a.at(1, 0), 0);
  EXPECT_EQ(a.at(3, 0), 255);
  const Image8 b = quantize_ir(img, 1.0);
  EXPECT_EQ(b.at(2, 0), 128);  // round half up of 127.5
  ImageF nan(1, 1, 1, std::nanf(""));
  EXPECT_EQ(quantize_ir(nan, 1.0).at(0, 0), 0);
}

TEST(Depth, ZBufferOfWall) {
  const CameraModel cam = fx::small_camera(30, 20, 25);
  const Scene s = fx::wall_scene(1.3, PbrMaterial{}, cam, 0.055, 10.0);
  const ImageF z = render_depth(s, cam);
  for (float v : z.data) EXPECT_NEAR(v, 1.3, 1e-6);  // stored as float
  const ImageF none = render_depth(empty_scene(cam), cam);
  for (float v : none.data) EXPECT_TRUE(std::isnan(v));
}
