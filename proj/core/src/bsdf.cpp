#include "depthsim/bsdf.hpp"

#include <algorithm>
#include <cmath>

namespace depthsim {

namespace {

constexpr double kMinAlpha = 1e-4;
// Stand-in density for delta lobes; large enough that MIS gives them full weight.
constexpr double kDeltaPdf = 1e12;

Vec3 reflect(const Vec3& w, const Vec3& h) { return h * (2.0 * dot(w, h)) - w; }

// Refracts w (pointing away from the surface) through a microfacet with
// normal h. Returns false on total internal reflection.
bool refract(const Vec3& w, Vec3 h, double eta, Vec3& out, double& etap) {
  double cos_i = dot(h, w);
  if (cos_i < 0) {
    eta = 1.0 / eta;
    cos_i = -cos_i;
    h = -h;
  }
  const double sin2_t = std::max(0.0, 1.0 - cos_i * cos_i) / (eta * eta);
  if (sin2_t >= 1.0) return false;
  const double cos_t = std::sqrt(1.0 - sin2_t);
  out = normalize(-w / eta + h * (cos_i / eta - cos_t));
  etap = eta;
  return true;
}

Vec3 schlick(const Vec3& f0, double cos) {
  const double m = std::clamp(1.0 - cos, 0.0, 1.0);
  const double m5 = m * m * m * m * m;
  return f0 + (Vec3{1, 1, 1} - f0) * m5;
}

struct Lobes {
  double w_d, p_reflect, p_dielectric;
};

Lobes lobe_weights(const PbrMaterial& mat) {
  const double w_d = mat.diffuse_weight();
  return {w_d, (1.0 - w_d) * (1.0 - mat.transmission), (1.0 - w_d) * mat.transmission};
}

Vec3 reflect_f0(const PbrMaterial& mat, const Vec3& base) {
  const double d = dielectric_f0(mat.specular, mat.ior);
  return lerp(Vec3{d, d, d}, base, mat.metallic);
}

// Diffuse + GGX reflection. n is already flipped to the side of o.
void eval_reflect_lobes(const PbrMaterial& mat, const Vec3& base, const Lobes& w, const Vec3& n, const Vec3& i,
                        const Vec3& o, double alpha, Vec3& f, double& pdf) {
  const double cos_i = dot(n, i);
  const double cos_o = dot(n, o);
  if (cos_i <= 0 || cos_o <= 0) return;
  if (w.w_d > 0) {
    f += base * (w.w_d * kInvPi);
    pdf += w.w_d * cos_i * kInvPi;
  }
  if (w.p_reflect > 0) {
    const Vec3 h = normalize(i + o);
    const double cos_h = dot(n, h);
    const double d = ggx_d(cos_h, alpha);
    const double g = ggx_g2(cos_i, cos_o, alpha);
    const Vec3 fr = schlick(reflect_f0(mat, base), dot(o, h));
    f += fr * (w.p_reflect * d * g / (4.0 * cos_i * cos_o));
    pdf += w.p_reflect * d * cos_h / (4.0 * std::abs(dot(o, h)));
  }
}

// Rough dielectric interface (reflection + refraction). n is the outward normal.
void eval_dielectric(const PbrMaterial& mat, const Vec3& base, double weight, const Vec3& n, const Vec3& i,
                     const Vec3& o, double alpha, Vec3& f, double& pdf) {
  const double cos_i = dot(n, i);
  const double cos_o = dot(n, o);
  if (cos_i == 0 || cos_o == 0) return;
  const bool is_reflect = cos_i * cos_o > 0;
  const double eta = mat.ior;
  double etap = 1.0;
  if (!is_reflect) etap = cos_o > 0 ? eta : 1.0 / eta;
  Vec3 wm = i * etap + o;
  if (dot(wm, wm) == 0) return;
  wm = normalize(wm);
  if (dot(wm, n) < 0) wm = -wm;
  // Discard back-facing microfacets.
  if (dot(wm, i) * cos_i < 0 || dot(wm, o) * cos_o < 0) return;

  const double fr = fresnel_dielectric(dot(o, wm), eta);
  const double tr = 1.0 - fr;
  const double cos_m = dot(wm, n);
  const double d = ggx_d(cos_m, alpha);
  const double g = ggx_g2(std::abs(cos_i), std::abs(cos_o), alpha);
  const double pdf_h = d * cos_m;
  if (is_reflect) {
    const double v = d * g * fr / std::abs(4.0 * cos_i * cos_o);
    f += Vec3{v, v, v} * weight;
    pdf += weight * pdf_h / (4.0 * std::abs(dot(o, wm))) * fr;
  } else {
    const double s = dot(i, wm) + dot(o, wm) / etap;
    const double denom = s * s * cos_i * cos_o;
    if (denom == 0) return;
    double v = d * tr * g * std::abs(dot(i, wm) * dot(o, wm) / denom);
    v /= etap * etap;  // radiance compression across the interface
    f += base * (v * weight);
    pdf += weight * pdf_h * std::abs(dot(i, wm)) / (s * s) * tr;
  }
}

void eval_all(const PbrMaterial& mat, const Vec3& base, const ShadingFrame& fr, Vec3& f, double& pdf) {
  const Lobes w = lobe_weights(mat);
  const double alpha = roughness_to_alpha(mat.roughness);
  const Vec3 n_o = dot(fr.n, fr.o) >= 0 ? fr.n : -fr.n;
  if (w.w_d > 0 || w.p_reflect > 0) eval_reflect_lobes(mat, base, w, n_o, fr.i, fr.o, alpha, f, pdf);
  if (w.p_dielectric > 0) eval_dielectric(mat, base, w.p_dielectric, fr.n, fr.i, fr.o, alpha, f, pdf);
}

Vec3 to_world(const Vec3& local, const Vec3& n) {
  Vec3 t, b;
  make_basis(n, t, b);
  return t * local.x + b * local.y + n * local.z;
}

}  // namespace

double dielectric_f0(double specular, double ior) {
  const double r = (ior - 1.0) / (ior + 1.0);
  return std::min(1.0, 2.0 * specular * r * r);
}

double fresnel_dielectric(double cos_i, double eta) {
  cos_i = std::clamp(cos_i, -1.0, 1.0);
  if (cos_i < 0) {
    eta = 1.0 / eta;
    cos_i = -cos_i;
  }
  const double sin2_t = (1.0 - cos_i * cos_i) / (eta * eta);
  if (sin2_t >= 1.0) return 1.0;
  const double cos_t = std::sqrt(std::max(0.0, 1.0 - sin2_t));
  const double r_parl = (eta * cos_i - cos_t) / (eta * cos_i + cos_t);
  const double r_perp = (cos_i - eta * cos_t) / (cos_i + eta * cos_t);
  return 0.5 * (r_parl * r_parl + r_perp * r_perp);
}

double roughness_to_alpha(double roughness) { return std::max(roughness * roughness, kMinAlpha); }

double ggx_d(double cos_h, double alpha) {
  if (cos_h <= 0) return 0;
  const double a2 = alpha * alpha;
  const double c2 = cos_h * cos_h;
  const double t = c2 * (a2 - 1.0) + 1.0;
  return a2 / (kPi * t * t);
}

double ggx_lambda(double cos_w, double alpha) {
  const double c2 = cos_w * cos_w;
  if (c2 <= 0) return 1e300;
  const double tan2 = std::max(0.0, 1.0 - c2) / c2;
  return 0.5 * (-1.0 + std::sqrt(1.0 + alpha * alpha * tan2));
}

double ggx_g2(double cos_i, double cos_o, double alpha) {
  return 1.0 / (1.0 + ggx_lambda(cos_i, alpha) + ggx_lambda(cos_o, alpha));
}

Vec3 sample_ggx_half(double alpha, double u1, double u2) {
  const double tan2 = alpha * alpha * u1 / (1.0 - u1);
  const double cos_t = 1.0 / std::sqrt(1.0 + tan2);
  const double sin_t = std::sqrt(std::max(0.0, 1.0 - cos_t * cos_t));
  const double phi = 2.0 * kPi * u2;
  return {sin_t * std::cos(phi), sin_t * std::sin(phi), cos_t};
}

Vec3 eval_bsdf(const PbrMaterial& mat, const ShadingFrame& frame) {
  return eval_bsdf(mat, mat.base_color, frame);
}

Vec3 eval_bsdf(const PbrMaterial& mat, const Vec3& base_color, const ShadingFrame& frame) {
  Vec3 f;
  double pdf = 0;
  eval_all(mat, base_color, frame, f, pdf);
  return f;
}

double bsdf_pdf(const PbrMaterial& mat, const ShadingFrame& frame) {
  Vec3 f;
  double pdf = 0;
  eval_all(mat, mat.base_color, frame, f, pdf);
  return pdf;
}

std::optional<BsdfSample> sample_bsdf(const PbrMaterial& mat, const Vec3& o, const Vec3& n, Pcg32& rng) {
  return sample_bsdf(mat, mat.base_color, o, n, rng);
}

std::optional<BsdfSample> sample_bsdf(const PbrMaterial& mat, const Vec3& base_color, const Vec3& o, const Vec3& n,
                                      Pcg32& rng) {
  const Lobes w = lobe_weights(mat);
  const double alpha = roughness_to_alpha(mat.roughness);
  const double u_lobe = rng.uniform();
  const double u1 = rng.uniform();
  const double u2 = rng.uniform();
  const double u3 = rng.uniform();

  BsdfSample s;
  if (u_lobe < w.w_d) {
    s.lobe = BsdfLobe::diffuse;
    const Vec3 n_o = dot(n, o) >= 0 ? n : -n;
    // Cosine-weighted hemisphere (Malley).
    const double r = std::sqrt(u1);
    const double phi = 2.0 * kPi * u2;
    s.i = to_world({r * std::cos(phi), r * std::sin(phi), std::sqrt(std::max(0.0, 1.0 - u1))}, n_o);
  } else if (u_lobe < w.w_d + w.p_reflect) {
    s.lobe = BsdfLobe::reflect;
    const Vec3 n_o = dot(n, o) >= 0 ? n : -n;
    const Vec3 h = to_world(sample_ggx_half(alpha, u1, u2), n_o);
    s.i = reflect(o, h);
    if (dot(s.i, n_o) <= 0) return std::nullopt;
  } else {
    s.lobe = BsdfLobe::dielectric;
    if (std::abs(mat.ior - 1.0) < 1e-9) {
      // Index-matched interface: light passes straight through, a delta lobe.
      s.i = -o;
      s.pdf = kDeltaPdf;
      s.throughput = base_color;
      return s;
    }
    const Vec3 h = to_world(sample_ggx_half(alpha, u1, u2), n);
    const double cos_o = dot(o, n);
    if (dot(h, o) * cos_o < 0) return std::nullopt;
    const double fr = fresnel_dielectric(dot(o, h), mat.ior);
    if (u3 < fr) {
      s.i = reflect(o, h);
      if (dot(s.i, n) * cos_o <= 0) return std::nullopt;
    } else {
      double etap = 1;
      if (!refract(o, h, mat.ior, s.i, etap)) return std::nullopt;
      if (dot(s.i, n) * cos_o >= 0) return std::nullopt;
    }
  }

  Vec3 f;
  double pdf = 0;
  eval_all(mat, base_color, {n, s.i, o}, f, pdf);
  if (!(pdf > 0) || !std::isfinite(pdf)) return std::nullopt;
  s.pdf = pdf;
  s.throughput = f * (std::abs(dot(n, s.i)) / pdf);
  if (!is_finite(s.throughput)) return std::nullopt;
  return s;
}

}  // namespace depthsim
