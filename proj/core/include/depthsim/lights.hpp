#pragma once

#include <optional>

#include "depthsim/bvh.hpp"
#include "depthsim/math.hpp"
#include "depthsim/rng.hpp"
#include "depthsim/scene.hpp"

namespace depthsim {

struct LightSample {
  Vec3 direction;        // unit, from the shade point toward the light
  double distance = 0;   // to the sampled light point; infinity for directional
  Vec3 radiance;         // incident radiance (area) or irradiance at normal incidence (delta lights)
  double pdf = 0;        // solid-angle pdf for area lights, 1 for delta lights
  bool delta = true;
};

// One light sample for `p`. Point-like kinds fall off as 1/r^2, spot kinds
// are masked to a cone of half-angle fov around the light's +z, and
// textured_spot additionally scales by the pattern texel the shadow ray
// passes through. The pattern spans tan(fov)*[-1,1]^2 on the light's z=1
// plane, x right and y down. Zero radiance means no contribution.
LightSample light_contribution(const LightSource& light, const Vec3& p, Pcg32& rng);

// Pattern/cone attenuation of a spot-like light toward world point p, in [0,1].
double spot_attenuation(const LightSource& light, const Vec3& p);

// Ray hit against a one-sided area light quad; returns distance along the ray.
std::optional<double> intersect_area_light(const LightSource& light, const Ray& ray);

// Solid-angle pdf with which light_contribution samples `dir` from `p` on an
// area light at distance t.
double area_light_pdf(const LightSource& light, const Vec3& dir, double t);

}  // namespace depthsim
