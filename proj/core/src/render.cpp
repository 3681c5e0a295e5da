#include "depthsim/render.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "depthsim/bsdf.hpp"
#include "depthsim/error.hpp"
#include "depthsim/lights.hpp"
#include "depthsim/parallel.hpp"
#include "depthsim/rng.hpp"

namespace depthsim {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double power_heuristic(double a, double b) {
  const double a2 = a * a, b2 = b * b;
  return a2 + b2 > 0 ? a2 / (a2 + b2) : 0.0;
}

Vec3 offset_origin(const Vec3& p, const Vec3& ng, const Vec3& dir) {
  const double scale = 1e-6 * (1.0 + std::max({std::abs(p.x), std::abs(p.y), std::abs(p.z)}));
  return p + ng * (dot(ng, dir) >= 0 ? scale : -scale);
}

}  // namespace

struct Renderer::Env {
  std::vector<LightSource> lights;  // with spectrum-dependent scaling applied
  std::vector<int> area;            // indices into lights
  Vec3 background;
  double emission_scale = 1.0;
  double clamp = 0.0;
};

Renderer::Renderer(const Scene& scene) : scene_(scene) {
  validate_scene(scene_);
  bvh_ = std::make_shared<const Bvh>(flatten_scene(scene_));
  object_materials_.reserve(scene_.objects.size());
  for (const auto& obj : scene_.objects) object_materials_.push_back(scene_.materials.at(obj.material).material);
}

void Renderer::set_object_material(int object, const PbrMaterial& material) {
  validate_material(material, "objects." + scene_.objects.at(object).name + ".material");
  object_materials_.at(object) = material;
}

void Renderer::set_light_intensity(int light, const Vec3& intensity) {
  scene_.lights.at(light).intensity = intensity;
}

void Renderer::set_rig(const SensorRig& rig) {
  validate_rig(rig);
  scene_.rig = rig;
}

Renderer::Env Renderer::make_env(Spectrum spectrum) const {
  Env env;
  const bool ir = spectrum == Spectrum::ir;
  const double a = ir ? scene_.rig.visible_attenuation : 1.0;
  for (LightSource l : scene_.lights) {
    l.intensity *= a;
    env.lights.push_back(std::move(l));
  }
  if (ir) env.lights.push_back(scene_.rig.projector);
  for (std::size_t i = 0; i < env.lights.size(); ++i)
    if (env.lights[i].kind == LightKind::area) env.area.push_back(static_cast<int>(i));
  env.background = scene_.environment * a;
  if (ir) env.background += Vec3{1, 1, 1} * scene_.rig.ir_ambient;
  // Emissive surfaces count as scene lights.
  env.emission_scale = a;

  double brightest = max_component(env.background);
  for (const auto& l : env.lights) brightest = std::max(brightest, max_component(l.intensity));
  for (const auto& m : object_materials_) brightest = std::max(brightest, max_component(m.emission) * a);
  env.clamp = 50.0 * brightest;
  return env;
}

Ray camera_ray(const CameraModel& cam, double x, double y) {
  const Vec3 d{(x - cam.cx) / cam.fx, (y - cam.cy) / cam.fy, 1.0};
  return {cam.pose.translation, normalize(cam.pose.vector(d))};
}

Vec3 Renderer::radiance(const Ray& camera, const Env& env, Pcg32& rng, int max_bounces) const {
  const auto& tris = bvh_->triangles();
  Vec3 L;
  Vec3 beta{1, 1, 1};
  Ray ray = camera;
  double prev_pdf = 0;
  for (int bounce = 0;; ++bounce) {
    const auto hit = bvh_->intersect(ray, kInf);
    const double t_geom = hit ? hit->t : kInf;

    int area_hit = -1;
    double t_area = t_geom;
    for (int li : env.area) {
      if (auto t = intersect_area_light(env.lights[li], ray); t && *t < t_area) {
        t_area = *t;
        area_hit = li;
      }
    }
    if (area_hit >= 0) {
      const LightSource& l = env.lights[area_hit];
      double w = 1.0;
      if (bounce > 0) w = power_heuristic(prev_pdf, area_light_pdf(l, ray.dir, t_area));
      L += beta * l.intensity * w;
      break;
    }
    if (!hit) {
      L += beta * env.background;
      break;
    }

    const WorldTriangle& tri = tris[hit->triangle];
    const double b0 = 1.0 - hit->b1 - hit->b2;
    const Vec3 p = ray.origin + ray.dir * hit->t;
    Vec3 ns = normalize(tri.n0 * b0 + tri.n1 * hit->b1 + tri.n2 * hit->b2);
    if (!is_finite(ns) || dot(ns, ns) == 0) ns = tri.ng;
    const PbrMaterial& mat = object_materials_[tri.object];
    Vec3 base = mat.base_color;
    if (mat.base_color_map) {
      const double u = tri.uv0.x * b0 + tri.uv1.x * hit->b1 + tri.uv2.x * hit->b2;
      const double v = tri.uv0.y * b0 + tri.uv1.y * hit->b1 + tri.uv2.y * hit->b2;
      base = mat.base_color_map->sample_rgb(u, v) * mat.base_color;
    }
    L += beta * mat.emission * env.emission_scale;

    const Vec3 o = -ray.dir;
    for (const LightSource& l : env.lights) {
      const LightSample ls = light_contribution(l, p, rng);
      if (!(ls.pdf > 0) || max_component(ls.radiance) <= 0) continue;
      const ShadingFrame frame{ns, ls.direction, o};
      const Vec3 f = eval_bsdf(mat, base, frame);
      if (max_component(f) <= 0) continue;
      const Ray shadow{offset_origin(p, tri.ng, ls.direction), ls.direction};
      const double t_max = std::isinf(ls.distance) ? kInf : ls.distance * (1.0 - 1e-7);
      if (bvh_->occluded(shadow, t_max)) continue;
      double w = 1.0;
      if (!ls.delta) w = power_heuristic(ls.pdf, bsdf_pdf(mat, frame));
      L += beta * f * ls.radiance * (std::abs(dot(ns, ls.direction)) * w / ls.pdf);
    }

    if (bounce >= max_bounces) break;
    const auto s = sample_bsdf(mat, base, o, ns, rng);
    if (!s) break;
    beta *= s->throughput;
    prev_pdf = s->pdf;
    ray = {offset_origin(p, tri.ng, s->i), s->i};

    if (bounce >= 3) {
      const double survive = std::clamp(max_component(beta), 0.05, 1.0);
      if (rng.uniform() >= survive) break;
      beta = beta / survive;
    }
  }
  return L;
}

RadianceImage Renderer::trace(const CameraModel& cam, const TraceOptions& opt) const {
  if (opt.spp < 1) throw ConfigError("spp must be >= 1");
  if (opt.max_bounces < 0) throw ConfigError("max_bounces must be >= 0");
  Env env = make_env(opt.spectrum);
  if (opt.clamp >= 0) env.clamp = opt.clamp;

  RadianceImage img(cam.width, cam.height, 3);
  const int tiles_x = (cam.width + kRenderTileSize - 1) / kRenderTileSize;
  const int tiles_y = (cam.height + kRenderTileSize - 1) / kRenderTileSize;
  parallel_for(static_cast<std::size_t>(tiles_x) * tiles_y, [&](std::size_t tile) {
    Pcg32 rng(derive_seed(opt.seed, tile), tile);
    const int x0 = static_cast<int>(tile % tiles_x) * kRenderTileSize;
    const int y0 = static_cast<int>(tile / tiles_x) * kRenderTileSize;
    const int x1 = std::min(x0 + kRenderTileSize, cam.width);
    const int y1 = std::min(y0 + kRenderTileSize, cam.height);
    for (int y = y0; y < y1; ++y) {
      for (int x = x0; x < x1; ++x) {
        Vec3 sum;
        for (int s = 0; s < opt.spp; ++s) {
          const double jx = rng.uniform() - 0.5;
          const double jy = rng.uniform() - 0.5;
          Vec3 v = radiance(camera_ray(cam, x + jx, y + jy), env, rng, opt.max_bounces);
          if (!is_finite(v)) v = {};
          if (env.clamp > 0) v = min(v, Vec3{env.clamp, env.clamp, env.clamp});
          sum += max(v, Vec3{});
        }
        sum = sum / opt.spp;
        for (int c = 0; c < 3; ++c) img.at(x, y, c) = static_cast<float>(sum[c]);
      }
    }
  });
  if (opt.median) img = median3x3(img);
  if (opt.spectrum == Spectrum::ir) return extract_channel(img, 0);
  return img;
}

ImageF Renderer::depth(const CameraModel& cam) const {
  ImageF out(cam.width, cam.height, 1, std::numeric_limits<float>::quiet_NaN());
  const Vec3 forward = normalize(cam.pose.vector({0, 0, 1}));
  parallel_for(static_cast<std::size_t>(cam.height), [&](std::size_t yy) {
    const int y = static_cast<int>(yy);
    for (int x = 0; x < cam.width; ++x) {
      const Ray r = camera_ray(cam, x, y);
      if (auto h = bvh_->intersect(r, kInf)) out.at(x, y) = static_cast<float>(h->t * dot(r.dir, forward));
    }
  });
  return out;
}

RadianceImage trace(const Scene& scene, const CameraModel& cam, const TraceOptions& opt) {
  return Renderer(scene).trace(cam, opt);
}

std::pair<RadianceImage, RadianceImage> render_ir_pair(const Renderer& renderer, TraceOptions opt) {
  opt.spectrum = Spectrum::ir;
  const std::uint64_t base = opt.seed;
  const SensorRig& rig = renderer.scene().rig;
  opt.seed = derive_seed(base, 0x1e57);
  RadianceImage left = renderer.trace(rig.ir_left, opt);
  opt.seed = derive_seed(base, 0x819e7);
  RadianceImage right = renderer.trace(rig.ir_right, opt);
  return {std::move(left), std::move(right)};
}

std::pair<RadianceImage, RadianceImage> render_ir_pair(const Scene& scene, int spp, std::uint64_t seed) {
  TraceOptions opt;
  opt.spp = spp;
  opt.seed = seed;
  return render_ir_pair(Renderer(scene), opt);
}

ImageF render_depth(const Scene& scene, const CameraModel& cam) { return Renderer(scene).depth(cam); }

Image8 quantize_ir(const RadianceImage& img, double exposure) {
  if (!(exposure > 0)) throw ConfigError("exposure must be > 0");
  Image8 out(img.width, img.height, img.channels);
  for (std::size_t i = 0; i < img.data.size(); ++i) {
    const double v = std::floor(static_cast<double>(img.data[i]) * exposure * 255.0 + 0.5);
    out.data[i] = static_cast<std::uint8_t>(std::isnan(v) ? 0.0 : std::clamp(v, 0.0, 255.0));
  }
  return out;
}

}  // namespace depthsim
