#include "depthsim/lights.hpp"

#include <cmath>
#include <limits>

namespace depthsim {

double spot_attenuation(const LightSource& light, const Vec3& p) {
  const Vec3 local = light.pose.inverse().point(p);
  const double r = length(local);
  if (r <= 0 || local.z <= 0) return 0.0;
  if (local.z / r < std::cos(light.fov)) return 0.0;
  if (light.kind != LightKind::textured_spot) return 1.0;
  if (!light.pattern) return 0.0;
  const double span = std::tan(light.fov);
  const double tx = local.x / local.z / span;
  const double ty = local.y / local.z / span;
  if (std::abs(tx) > 1 || std::abs(ty) > 1) return 0.0;
  const double u = 0.5 * (tx + 1.0);
  const double v = 1.0 - 0.5 * (ty + 1.0);
  return light.pattern->sample(u, v, 0);
}

LightSample light_contribution(const LightSource& light, const Vec3& p, Pcg32& rng) {
  LightSample s;
  switch (light.kind) {
    case LightKind::directional: {
      s.direction = -normalize(light.pose.vector({0, 0, 1}));
      s.distance = std::numeric_limits<double>::infinity();
      s.radiance = light.intensity;
      s.pdf = 1;
      return s;
    }
    case LightKind::point:
    case LightKind::spot:
    case LightKind::textured_spot: {
      const Vec3 d = light.pose.translation - p;
      const double r2 = dot(d, d);
      s.distance = std::sqrt(r2);
      s.pdf = 1;
      if (r2 <= 0) return s;
      s.direction = d / s.distance;
      double att = 1.0;
      if (light.kind != LightKind::point) att = spot_attenuation(light, p);
      s.radiance = light.intensity * (att / r2);
      return s;
    }
    case LightKind::area: {
      s.delta = false;
      const double u = rng.uniform();
      const double v = rng.uniform();
      const Vec3 q = light.pose.point({(u - 0.5) * light.size.x, (v - 0.5) * light.size.y, 0});
      const Vec3 d = q - p;
      const double r2 = dot(d, d);
      if (r2 <= 0) return s;
      s.distance = std::sqrt(r2);
      s.direction = d / s.distance;
      s.pdf = area_light_pdf(light, s.direction, s.distance);
      if (s.pdf > 0) s.radiance = light.intensity;
      return s;
    }
  }
  return s;
}

std::optional<double> intersect_area_light(const LightSource& light, const Ray& ray) {
  if (light.kind != LightKind::area) return std::nullopt;
  const Transform inv = light.pose.inverse();
  const Vec3 o = inv.point(ray.origin);
  const Vec3 d = inv.vector(ray.dir);
  // One-sided: only rays travelling against the emitting +z face.
  if (d.z >= 0) return std::nullopt;
  const double t = -o.z / d.z;
  if (t <= 1e-9) return std::nullopt;
  const double x = o.x + t * d.x, y = o.y + t * d.y;
  if (std::abs(x) > 0.5 * light.size.x || std::abs(y) > 0.5 * light.size.y) return std::nullopt;
  return t;
}

double area_light_pdf(const LightSource& light, const Vec3& dir, double t) {
  const Vec3 nz = normalize(light.pose.vector({0, 0, 1}));
  const double cos_l = -dot(dir, nz);
  const double area = light.size.x * light.size.y;
  if (cos_l <= 0 || area <= 0) return 0.0;
  return t * t / (cos_l * area);
}

}  // namespace depthsim
