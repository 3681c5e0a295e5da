#pragma once

#include <cstdint>
#include <memory>
#include <utility>

#include "depthsim/bvh.hpp"
#include "depthsim/image.hpp"
#include "depthsim/rng.hpp"
#include "depthsim/scene.hpp"

namespace depthsim {

enum class Spectrum { visible, ir };

struct TraceOptions {
  int spp = 16;
  Spectrum spectrum = Spectrum::visible;
  int max_bounces = 8;
  std::uint64_t seed = 0;
  // Per-sample radiance clamp. Negative picks 50x the brightest emitter
  // (light intensity, environment or ambient); 0 disables clamping.
  double clamp = -1.0;
  // 3x3 median prefilter on the finished image.
  bool median = false;
};

inline constexpr int kRenderTileSize = 16;

// Path tracer over a prepared scene. Geometry is flattened and the BVH built
// once; copies share it, so per-candidate material or light overrides are
// cheap. Images are traced in 16x16 tiles, each with its own RNG stream
// derived from (seed, tile index), which makes output independent of the
// worker count.
class Renderer {
 public:
  explicit Renderer(const Scene& scene);

  const Scene& scene() const { return scene_; }

  // Material used by one object (overrides the shared material entry).
  void set_object_material(int object, const PbrMaterial& material);
  const PbrMaterial& object_material(int object) const { return object_materials_.at(object); }
  void set_light_intensity(int light, const Vec3& intensity);
  // Swaps the sensor rig (viewpoint changes). Geometry is unaffected.
  void set_rig(const SensorRig& rig);

  // Visible: 3 channels, every scene light at full intensity, projector off.
  // IR: scene lights and environment scaled by rig.visible_attenuation, the
  // projector at full intensity, rig.ir_ambient added to the environment;
  // returns the R channel only.
  RadianceImage trace(const CameraModel& cam, const TraceOptions& opt) const;

  // z-depth of the primary ray through each pixel centre; NaN on a miss.
  ImageF depth(const CameraModel& cam) const;

 private:
  struct Env;
  Env make_env(Spectrum spectrum) const;
  Vec3 radiance(const Ray& primary, const Env& env, Pcg32& rng, int max_bounces) const;

  Scene scene_;
  std::shared_ptr<const Bvh> bvh_;
  std::vector<PbrMaterial> object_materials_;
};

RadianceImage trace(const Scene& scene, const CameraModel& cam, const TraceOptions& opt);

// IR renders from both rig cameras; seeds for the two eyes are derived from
// opt.seed. opt.spectrum is forced to IR.
std::pair<RadianceImage, RadianceImage> render_ir_pair(const Renderer& renderer, TraceOptions opt);
std::pair<RadianceImage, RadianceImage> render_ir_pair(const Scene& scene, int spp, std::uint64_t seed);

ImageF render_depth(const Scene& scene, const CameraModel& cam);

// out = clamp(round(img * exposure * 255), 0, 255), halves rounded up.
Image8 quantize_ir(const RadianceImage& img, double exposure);

// Primary ray through continuous pixel coordinates (x, y); pixel centres
// sit at integer coordinates.
Ray camera_ray(const CameraModel& cam, double x, double y);

}  // namespace depthsim
