#pragma once

#include <optional>

#include "depthsim/math.hpp"
#include "depthsim/rng.hpp"
#include "depthsim/scene.hpp"

namespace depthsim {

// All three vectors unit length. `i` points toward the light, `o` toward the
// viewer; both point away from the surface. `n` is the outward normal.
struct ShadingFrame {
  Vec3 n;
  Vec3 i;
  Vec3 o;
};

// Normal-incidence reflectance of a dielectric: 2*specular*((ior-1)/(ior+1))^2
// clamped to 1, so specular=0.5 gives the plain Fresnel value.
double dielectric_f0(double specular, double ior);

// Exact unpolarised Fresnel reflectance; cos_i < 0 means the incident side is
// inside the medium.
double fresnel_dielectric(double cos_i, double eta);

// GGX microfacet pieces, alpha = roughness^2 (floored to keep D finite).
double roughness_to_alpha(double roughness);
double ggx_d(double cos_h, double alpha);
double ggx_lambda(double cos_w, double alpha);
// Height-correlated Smith masking-shadowing.
double ggx_g2(double cos_i, double cos_o, double alpha);
// Samples a half vector around +z with density ggx_d(cos_h) * cos_h.
Vec3 sample_ggx_half(double alpha, double u1, double u2);

// f(i, o, n) = w_d*f_d + (1-w_d)*[(1-t)*f_reflect + t*f_dielectric] with
// w_d = (1-metallic)(1-transmission) and t = transmission. `base_color`
// overrides mat.base_color (texture lookups happen in the caller).
Vec3 eval_bsdf(const PbrMaterial& mat, const ShadingFrame& frame);
Vec3 eval_bsdf(const PbrMaterial& mat, const Vec3& base_color, const ShadingFrame& frame);

// Solid-angle density with which sample_bsdf returns `frame.i`.
double bsdf_pdf(const PbrMaterial& mat, const ShadingFrame& frame);

enum class BsdfLobe { diffuse, reflect, dielectric };

struct BsdfSample {
  Vec3 i;
  double pdf = 0;
  Vec3 throughput;  // f * |n.i| / pdf
  BsdfLobe lobe = BsdfLobe::diffuse;
};

// Lobe picked with probabilities (w_d, (1-w_d)(1-t), (1-w_d)t); the returned
// pdf and throughput are those of the full mixture. nullopt when the sampled
// microfacet yields no valid direction (the path simply ends).
std::optional<BsdfSample> sample_bsdf(const PbrMaterial& mat, const Vec3& o, const Vec3& n, Pcg32& rng);
std::optional<BsdfSample> sample_bsdf(const PbrMaterial& mat, const Vec3& base_color, const Vec3& o, const Vec3& n,
                                      Pcg32& rng);

}  // namespace depthsim
