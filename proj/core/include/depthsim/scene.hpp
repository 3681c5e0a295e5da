#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "depthsim/image.hpp"
#include "depthsim/math.hpp"
#include "depthsim/mesh.hpp"

namespace depthsim {

enum class TextureFilter { nearest, bilinear };

// Grayscale or RGB texture with values in [0,1]. Texture coordinates (u, v)
// have v pointing up, so v=1 is the top row of the image.
struct Texture {
  ImageF image;
  TextureFilter filter = TextureFilter::nearest;

  // Returns channel `c` (clamped to the available channels) at (u, v).
  double sample(double u, double v, int c = 0) const;
  Vec3 sample_rgb(double u, double v) const;

  friend bool operator==(const Texture&, const Texture&) = default;
};

struct DotPatternSpec {
  int width = 160;
  int height = 160;
  double density = 0.25;
  std::uint64_t seed = 7;
};

// Bernoulli dot texture: each texel is 1 with probability `density`, else 0.
Texture generate_dot_pattern(const DotPatternSpec& spec);

struct PbrMaterial {
  Vec3 base_color{0.8, 0.8, 0.8};
  std::optional<Texture> base_color_map;
  double metallic = 0.0;
  double specular = 0.5;
  double roughness = 0.5;
  double ior = 1.5;
  double transmission = 0.0;
  Vec3 emission{0, 0, 0};

  // w_d = (1 - metallic) * (1 - transmission).
  double diffuse_weight() const { return (1.0 - metallic) * (1.0 - transmission); }

  friend bool operator==(const PbrMaterial&, const PbrMaterial&) = default;
};

// Throws ValidationError naming `<prefix>.<field>`.
void validate_material(const PbrMaterial& m, const std::string& prefix);

enum class LightKind { point, directional, spot, area, textured_spot };

const char* to_string(LightKind kind);
LightKind light_kind_from_string(const std::string& s);

// Lights emit along the +z axis of their pose. `intensity` is radiant
// intensity (point/spot kinds), irradiance (directional) or radiance (area).
struct LightSource {
  LightKind kind = LightKind::point;
  Transform pose;
  Vec3 intensity{1, 1, 1};
  std::optional<Texture> pattern;
  double fov = 0.5;       // cone half-angle, radians (spot kinds)
  Vec2 size{0.1, 0.1};    // area light extent in its local x/y, metres

  friend bool operator==(const LightSource&, const LightSource&) = default;
};

void validate_light(const LightSource& l, const std::string& prefix);

// Pinhole camera looking along +z of its pose; x right, y down.
struct CameraModel {
  int width = 640;
  int height = 480;
  double fx = 500, fy = 500;
  double cx = 319.5, cy = 239.5;
  Transform pose;  // camera-to-world

  Vec3 position() const { return pose.translation; }
  friend bool operator==(const CameraModel&, const CameraModel&) = default;
};

void validate_camera(const CameraModel& c, const std::string& prefix);

struct SensorRig {
  CameraModel ir_left;
  CameraModel ir_right;
  CameraModel rgb;
  LightSource projector;
  double baseline = 0.055;
  double ir_ambient = 0.02;
  double visible_attenuation = 0.05;

  // Applies a world-space rigid motion to every device of the rig.
  SensorRig moved(const Transform& world_motion) const;

  friend bool operator==(const SensorRig&, const SensorRig&) = default;
};

// Builds a rectified rig: ir_right is ir_left shifted +baseline along the
// camera x axis, the rgb camera coincides with ir_left and the projector sits
// midway between the IR cameras with the default dot pattern, sampled
// bilinearly so each dot covers a few pixels with soft edges.
SensorRig make_default_rig(const CameraModel& ir_left, double baseline);

// Throws ValidationError if the IR pair is not a rectified pair (shared
// intrinsics, identical orientation, offset purely along camera x equal to
// `baseline`) or if the baseline is degenerate.
void validate_rig(const SensorRig& rig);

struct NamedMesh {
  std::string name;
  Mesh mesh;
  friend bool operator==(const NamedMesh&, const NamedMesh&) = default;
};

struct NamedMaterial {
  std::string name;
  PbrMaterial material;
  friend bool operator==(const NamedMaterial&, const NamedMaterial&) = default;
};

struct SceneObject {
  std::string name;
  int mesh = 0;
  int material = 0;
  Transform pose;
  friend bool operator==(const SceneObject&, const SceneObject&) = default;
};

struct Scene {
  std::vector<NamedMesh> meshes;
  std::vector<NamedMaterial> materials;
  std::vector<SceneObject> objects;
  std::vector<LightSource> lights;
  SensorRig rig;
  // Uniform environment radiance seen by escaping rays (visible spectrum).
  Vec3 environment{0, 0, 0};

  int find_object(const std::string& name) const;
  int find_material(const std::string& name) const;
  int find_mesh(const std::string& name) const;

  friend bool operator==(const Scene&, const Scene&) = default;
};

// Validates every invariant of the scene; throws ValidationError naming the
// field. Pure: repeated calls on the same scene behave identically.
void validate_scene(const Scene& scene);

// Loads a TOML scene description (sections: meshes, materials, objects,
// lights, rig, environment). Relative asset paths resolve against the scene
// file's directory. Throws ParseError, MissingAssetError or ValidationError.
Scene load_scene(const std::filesystem::path& path);
Scene parse_scene(const std::string& text, const std::filesystem::path& base_dir,
                  const std::string& source_name = "<scene>");

// Writes the scene file plus sidecar assets (meshes as OBJ, textures as
// PGM/PPM) into the scene file's directory. Textures round-trip at 8 bits.
void save_scene(const Scene& scene, const std::filesystem::path& path);

}  // namespace depthsim
