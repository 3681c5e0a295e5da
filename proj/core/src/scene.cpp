#include "depthsim/scene.hpp"

#include <fstream>
#include <sstream>

#include "depthsim/error.hpp"
#include "depthsim/image_io.hpp"
#include "depthsim/rng.hpp"
#include "toml_util.hpp"

namespace depthsim {

namespace tu = toml_util;

double Texture::sample(double u, double v, int c) const {
  const int ch = std::min(c, image.channels - 1);
  const double fx = u * image.width;
  const double fy = (1.0 - v) * image.height;
  if (filter == TextureFilter::nearest) {
    const int x = std::clamp(static_cast<int>(std::floor(fx)), 0, image.width - 1);
    const int y = std::clamp(static_cast<int>(std::floor(fy)), 0, image.height - 1);
    return image.at(x, y, ch);
  }
  const double sx = fx - 0.5, sy = fy - 0.5;
  const int x0 = static_cast<int>(std::floor(sx)), y0 = static_cast<int>(std::floor(sy));
  const double tx = sx - x0, ty = sy - y0;
  auto px = [&](int x, int y) {
    return static_cast<double>(
        image.at(std::clamp(x, 0, image.width - 1), std::clamp(y, 0, image.height - 1), ch));
  };
  return (1 - ty) * ((1 - tx) * px(x0, y0) + tx * px(x0 + 1, y0)) +
         ty * ((1 - tx) * px(x0, y0 + 1) + tx * px(x0 + 1, y0 + 1));
}

Vec3 Texture::sample_rgb(double u, double v) const { return {sample(u, v, 0), sample(u, v, 1), sample(u, v, 2)}; }

Texture generate_dot_pattern(const DotPatternSpec& spec) {
  if (spec.width <= 0 || spec.height <= 0) throw ValidationError("pattern.size", "must be positive");
  if (!(spec.density >= 0 && spec.density <= 1)) throw ValidationError("pattern.density", "must be in [0,1]");
  Texture tex;
  tex.image = ImageF(spec.width, spec.height, 1);
  Pcg32 rng(spec.seed, 0x5eed);
  for (auto& v : tex.image.data) v = rng.uniform() < spec.density ? 1.0f : 0.0f;
  return tex;
}

namespace {

void check_unit(double v, const std::string& field) {
  if (!(v >= 0.0 && v <= 1.0)) throw ValidationError(field, "must be in [0,1], got " + std::to_string(v));
}

void check_texture_range(const Texture& t, const std::string& field) {
  if (t.image.empty()) throw ValidationError(field, "empty texture");
  for (float v : t.image.data)
    if (!(v >= 0.0f && v <= 1.0f)) throw ValidationError(field, "texture values must be in [0,1]");
}

}  // namespace

void validate_material(const PbrMaterial& m, const std::string& prefix) {
  for (int c = 0; c < 3; ++c) check_unit(m.base_color[c], prefix + ".base_color");
  check_unit(m.metallic, prefix + ".metallic");
  check_unit(m.specular, prefix + ".specular");
  check_unit(m.roughness, prefix + ".roughness");
  check_unit(m.transmission, prefix + ".transmission");
  if (!(m.ior >= 1.0) || !std::isfinite(m.ior)) throw ValidationError(prefix + ".ior", "must be >= 1");
  for (int c = 0; c < 3; ++c)
    if (!(m.emission[c] >= 0.0) || !std::isfinite(m.emission[c]))
      throw ValidationError(prefix + ".emission", "must be >= 0");
  if (m.base_color_map) check_texture_range(*m.base_color_map, prefix + ".base_color_map");
}

const char* to_string(LightKind kind) {
  switch (kind) {
    case LightKind::point: return "point";
    case LightKind::directional: return "directional";
    case LightKind::spot: return "spot";
    case LightKind::area: return "area";
    case LightKind::textured_spot: return "textured_spot";
  }
  return "point";
}

LightKind light_kind_from_string(const std::string& s) {
  if (s == "point") return LightKind::point;
  if (s == "directional") return LightKind::directional;
  if (s == "spot") return LightKind::spot;
  if (s == "area") return LightKind::area;
  if (s == "textured_spot") return LightKind::textured_spot;
  throw ValidationError("kind", "unknown light kind '" + s + "'");
}

void validate_light(const LightSource& l, const std::string& prefix) {
  for (int c = 0; c < 3; ++c)
    if (!(l.intensity[c] >= 0.0) || !std::isfinite(l.intensity[c]))
      throw ValidationError(prefix + ".intensity", "must be >= 0");
  if (l.kind == LightKind::textured_spot && !l.pattern)
    throw ValidationError(prefix + ".pattern", "textured_spot requires a pattern");
  if (l.pattern) check_texture_range(*l.pattern, prefix + ".pattern");
  if ((l.kind == LightKind::spot || l.kind == LightKind::textured_spot) && !(l.fov > 0 && l.fov < kPi / 2))
    throw ValidationError(prefix + ".fov", "cone half-angle must be in (0, pi/2)");
  if (l.kind == LightKind::area && !(l.size.x > 0 && l.size.y > 0))
    throw ValidationError(prefix + ".size", "area light extent must be positive");
}

void validate_camera(const CameraModel& c, const std::string& prefix) {
  if (c.width <= 0 || c.height <= 0) throw ValidationError(prefix + ".width", "image size must be positive");
  if (!(c.fx > 0)) throw ValidationError(prefix + ".fx", "must be > 0");
  if (!(c.fy > 0)) throw ValidationError(prefix + ".fy", "must be > 0");
  if (!(c.cx >= 0 && c.cx < c.width)) throw ValidationError(prefix + ".cx", "must be in [0, width)");
  if (!(c.cy >= 0 && c.cy < c.height)) throw ValidationError(prefix + ".cy", "must be in [0, height)");
}

SensorRig SensorRig::moved(const Transform& m) const {
  SensorRig r = *this;
  r.ir_left.pose = m * ir_left.pose;
  r.ir_right.pose = m * ir_right.pose;
  r.rgb.pose = m * rgb.pose;
  r.projector.pose = m * projector.pose;
  return r;
}

SensorRig make_default_rig(const CameraModel& ir_left, double baseline) {
  SensorRig rig;
  rig.baseline = baseline;
  rig.ir_left = ir_left;
  rig.ir_right = ir_left;
  rig.ir_right.pose = ir_left.pose * Transform::translate({baseline, 0, 0});
  rig.rgb = ir_left;
  rig.projector.kind = LightKind::textured_spot;
  rig.projector.pose = ir_left.pose * Transform::translate({baseline / 2, 0, 0});
  rig.projector.intensity = {3.0, 3.0, 3.0};
  rig.projector.fov = 0.6;
  rig.projector.pattern = generate_dot_pattern({});
  rig.projector.pattern->filter = TextureFilter::bilinear;
  return rig;
}

void validate_rig(const SensorRig& rig) {
  validate_camera(rig.ir_left, "rig.ir_left");
  validate_camera(rig.ir_right, "rig.ir_right");
  validate_camera(rig.rgb, "rig.rgb");
  validate_light(rig.projector, "rig.projector");
  if (rig.projector.kind != LightKind::textured_spot)
    throw ValidationError("rig.projector.kind", "projector must be a textured_spot");
  if (!(rig.baseline > 0) || !std::isfinite(rig.baseline))
    throw ValidationError("rig.baseline", "degenerate baseline");
  if (!(rig.ir_ambient >= 0)) throw ValidationError("rig.ir_ambient", "must be >= 0");
  if (!(rig.visible_attenuation >= 0)) throw ValidationError("rig.visible_attenuation", "must be >= 0");

  const CameraModel& l = rig.ir_left;
  const CameraModel& r = rig.ir_right;
  if (l.width != r.width || l.height != r.height || l.fx != r.fx || l.fy != r.fy || l.cx != r.cx || l.cy != r.cy)
    throw ValidationError("rig.ir_right", "IR cameras must share intrinsics");
  constexpr double kRotTol = 1e-9;
  for (int i = 0; i < 9; ++i)
    if (std::abs(l.pose.rotation.m[i] - r.pose.rotation.m[i]) > kRotTol)
      throw ValidationError("rig.ir_right", "IR cameras not rectified");
  const Vec3 offset = transpose(l.pose.rotation) * (r.pose.translation - l.pose.translation);
  const double tol = 1e-9 * std::max(1.0, rig.baseline);
  if (std::abs(offset.y) > tol || std::abs(offset.z) > tol)
    throw ValidationError("rig.ir_right", "IR cameras not rectified");
  if (!(offset.x > 0)) throw ValidationError("rig.baseline", "degenerate baseline");
  if (std::abs(offset.x - rig.baseline) > tol)
    throw ValidationError("rig.baseline", "baseline does not match the IR camera offset");
}

int Scene::find_object(const std::string& name) const {
  for (std::size_t i = 0; i < objects.size(); ++i)
    if (objects[i].name == name) return static_cast<int>(i);
  return -1;
}
int Scene::find_material(const std::string& name) const {
  for (std::size_t i = 0; i < materials.size(); ++i)
    if (materials[i].name == name) return static_cast<int>(i);
  return -1;
}
int Scene::find_mesh(const std::string& name) const {
  for (std::size_t i = 0; i < meshes.size(); ++i)
    if (meshes[i].name == name) return static_cast<int>(i);
  return -1;
}

void validate_scene(const Scene& scene) {
  for (const auto& m : scene.meshes) validate_mesh(m.mesh, m.name);
  for (const auto& m : scene.materials) validate_material(m.material, "materials." + m.name);
  for (std::size_t i = 0; i < scene.objects.size(); ++i) {
    const auto& o = scene.objects[i];
    const std::string f = "objects." + (o.name.empty() ? std::to_string(i) : o.name);
    if (o.mesh < 0 || o.mesh >= static_cast<int>(scene.meshes.size()))
      throw ValidationError(f + ".mesh", "unknown mesh");
    if (o.material < 0 || o.material >= static_cast<int>(scene.materials.size()))
      throw ValidationError(f + ".material", "unknown material");
  }
  for (std::size_t i = 0; i < scene.lights.size(); ++i) validate_light(scene.lights[i], "lights." + std::to_string(i));
  for (int c = 0; c < 3; ++c)
    if (!(scene.environment[c] >= 0)) throw ValidationError("environment.radiance", "must be >= 0");
  validate_rig(scene.rig);
}

// ---------------------------------------------------------------------------
// Loading

namespace {

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& rel) {
  std::filesystem::path p(rel);
  return p.is_absolute() ? p : base / p;
}

Transform parse_pose(const tu::Ctx& ctx, const toml::table& t, const std::string& prefix, const Transform& fallback) {
  Transform pose = fallback;
  if (auto p = tu::opt_vec3(ctx, t, "position", prefix)) pose.translation = *p;
  const toml::node* mat = t.get("matrix");
  const toml::node* rot = t.get("rotation");
  const toml::node* look = t.get("look_at");
  if ((mat != nullptr) + (rot != nullptr) + (look != nullptr) > 1)
    ctx.fail(&t, prefix, "give at most one of matrix, rotation, look_at");
  if (mat) {
    const auto v = tu::number_array(ctx, *mat, prefix + ".matrix", 9);
    std::copy(v.begin(), v.end(), pose.rotation.m.begin());
    // Must be orthonormal with det +1.
    const Mat3 should_be_i = transpose(pose.rotation) * pose.rotation;
    for (int i = 0; i < 9; ++i)
      if (std::abs(should_be_i.m[i] - Mat3::identity().m[i]) > 1e-6 || determinant(pose.rotation) < 0)
        ctx.fail(mat, prefix + ".matrix", "not a rotation matrix");
  } else if (rot) {
    const auto v = tu::number_array(ctx, *rot, prefix + ".rotation", 3);
    pose.rotation = rotation_xyz({v[0], v[1], v[2]});
  } else if (look) {
    const auto v = tu::number_array(ctx, *look, prefix + ".look_at", 3);
    const Vec3 up = tu::vec3(ctx, t, "up", prefix, {0, -1, 0});
    const Vec3 z = normalize(Vec3{v[0], v[1], v[2]} - pose.translation);
    Vec3 x = cross(up, z);
    if (length(x) < 1e-12) ctx.fail(look, prefix + ".look_at", "view direction parallel to up");
    x = normalize(x);
    const Vec3 y = cross(z, x);
    pose.rotation = Mat3{{x.x, y.x, z.x, x.y, y.y, z.y, x.z, y.z, z.z}};
  }
  return pose;
}

Texture load_texture(const tu::Ctx& ctx, const toml::node& n, const std::filesystem::path& base,
                     const std::string& field) {
  Texture tex;
  if (auto s = n.value<std::string>()) {
    const auto path = resolve(base, *s);
    if (!std::filesystem::exists(path)) throw MissingAssetError(path.string());
    tex.image = read_image_normalized(path);
  } else if (const auto* t = n.as_table()) {
    DotPatternSpec spec;
    spec.width = static_cast<int>(tu::integer(ctx, *t, "width", field, spec.width));
    spec.height = static_cast<int>(tu::integer(ctx, *t, "height", field, spec.height));
    spec.density = tu::number(ctx, *t, "density", field, spec.density);
    spec.seed = static_cast<std::uint64_t>(tu::integer(ctx, *t, "seed", field, static_cast<std::int64_t>(spec.seed)));
    tex = generate_dot_pattern(spec);
  } else {
    ctx.fail(&n, field, "expected a file name or a procedural pattern table");
  }
  return tex;
}

TextureFilter parse_filter(const tu::Ctx& ctx, const toml::table& t, const std::string& key,
                           const std::string& prefix) {
  const auto s = tu::opt_string(ctx, t, key, prefix);
  if (!s || *s == "nearest") return TextureFilter::nearest;
  if (*s == "bilinear") return TextureFilter::bilinear;
  ctx.fail(t.get(key), tu::join(prefix, key), "expected 'nearest' or 'bilinear'");
}

Mesh parse_mesh(const tu::Ctx& ctx, const toml::table& t, const std::filesystem::path& base,
                const std::string& prefix) {
  const auto file = tu::opt_string(ctx, t, "file", prefix);
  const auto prim = tu::opt_string(ctx, t, "primitive", prefix);
  if (file && prim) ctx.fail(&t, prefix, "give either file or primitive");
  if (file) {
    const auto path = resolve(base, *file);
    if (!std::filesystem::exists(path)) throw MissingAssetError(path.string());
    return load_obj(path);
  }
  if (!prim) ctx.fail(&t, prefix, "mesh needs a file or a primitive");
  if (*prim == "quad") {
    const toml::node* s = t.get("size");
    const auto v = s ? tu::number_array(ctx, *s, prefix + ".size", 2) : std::vector<double>{1.0, 1.0};
    return make_quad(v[0], v[1]);
  }
  if (*prim == "sphere") {
    return make_sphere(tu::number(ctx, t, "radius", prefix, 0.5),
                       static_cast<int>(tu::integer(ctx, t, "segments", prefix, 64)),
                       static_cast<int>(tu::integer(ctx, t, "rings", prefix, 32)));
  }
  if (*prim == "box") return make_box(tu::vec3(ctx, t, "size", prefix, {1, 1, 1}));
  ctx.fail(t.get("primitive"), prefix + ".primitive", "unknown primitive '" + *prim + "'");
}

PbrMaterial parse_material(const tu::Ctx& ctx, const toml::table& t, const std::filesystem::path& base,
                           const std::string& prefix) {
  PbrMaterial m;
  m.base_color = tu::vec3(ctx, t, "base_color", prefix, m.base_color);
  m.metallic = tu::number(ctx, t, "metallic", prefix, m.metallic);
  m.specular = tu::number(ctx, t, "specular", prefix, m.specular);
  m.roughness = tu::number(ctx, t, "roughness", prefix, m.roughness);
  m.ior = tu::number(ctx, t, "ior", prefix, m.ior);
  m.transmission = tu::number(ctx, t, "transmission", prefix, m.transmission);
  m.emission = tu::vec3(ctx, t, "emission", prefix, m.emission);
  if (const toml::node* map = t.get("base_color_map")) {
    m.base_color_map = load_texture(ctx, *map, base, prefix + ".base_color_map");
    m.base_color_map->filter = parse_filter(ctx, t, "base_color_filter", prefix);
  }
  return m;
}

LightSource parse_light(const tu::Ctx& ctx, const toml::table& t, const std::filesystem::path& base,
                        const std::string& prefix, const LightSource& fallback) {
  LightSource l = fallback;
  if (auto k = tu::opt_string(ctx, t, "kind", prefix)) {
    try {
      l.kind = light_kind_from_string(*k);
    } catch (const ValidationError& e) {
      ctx.fail(t.get("kind"), prefix + ".kind", e.what());
    }
  }
  l.pose = parse_pose(ctx, t, prefix, l.pose);
  l.intensity = tu::vec3(ctx, t, "intensity", prefix, l.intensity);
  l.fov = tu::number(ctx, t, "fov", prefix, l.fov);
  if (const toml::node* s = t.get("size")) {
    const auto v = tu::number_array(ctx, *s, prefix + ".size", 2);
    l.size = {v[0], v[1]};
  }
  if (const toml::node* p = t.get("pattern")) {
    l.pattern = load_texture(ctx, *p, base, prefix + ".pattern");
  }
  if (l.pattern && t.get("pattern_filter")) l.pattern->filter = parse_filter(ctx, t, "pattern_filter", prefix);
  return l;
}

CameraModel parse_camera(const tu::Ctx& ctx, const toml::table& t, const std::string& prefix,
                         const CameraModel& fallback) {
  CameraModel c = fallback;
  c.width = static_cast<int>(tu::integer(ctx, t, "width", prefix, c.width));
  c.height = static_cast<int>(tu::integer(ctx, t, "height", prefix, c.height));
  const auto fx = tu::opt_number(ctx, t, "fx", prefix);
  c.fx = fx.value_or(c.fx);
  c.fy = tu::number(ctx, t, "fy", prefix, fx ? *fx : c.fy);
  c.cx = tu::number(ctx, t, "cx", prefix, c.width == fallback.width ? c.cx : (c.width - 1) / 2.0);
  c.cy = tu::number(ctx, t, "cy", prefix, c.height == fallback.height ? c.cy : (c.height - 1) / 2.0);
  c.pose = parse_pose(ctx, t, prefix, c.pose);
  return c;
}

SensorRig parse_rig(const tu::Ctx& ctx, const toml::table& t, const std::filesystem::path& base) {
  const std::string p = "rig";
  const toml::table* left = tu::opt_table(ctx, t, "ir_left", p);
  if (!left) ctx.fail(&t, "rig.ir_left", "missing IR camera");
  const CameraModel ir_left = parse_camera(ctx, *left, "rig.ir_left", CameraModel{});
  const double baseline = tu::number(ctx, t, "baseline", p, 0.055);
  SensorRig rig = make_default_rig(ir_left, baseline);
  rig.ir_ambient = tu::number(ctx, t, "ir_ambient", p, rig.ir_ambient);
  rig.visible_attenuation = tu::number(ctx, t, "visible_attenuation", p, rig.visible_attenuation);
  if (const auto* r = tu::opt_table(ctx, t, "ir_right", p)) rig.ir_right = parse_camera(ctx, *r, "rig.ir_right", rig.ir_right);
  if (const auto* r = tu::opt_table(ctx, t, "rgb", p)) rig.rgb = parse_camera(ctx, *r, "rig.rgb", rig.rgb);
  if (const auto* r = tu::opt_table(ctx, t, "projector", p)) {
    rig.projector = parse_light(ctx, *r, base, "rig.projector", rig.projector);
  }
  return rig;
}

// [overrides.objects.<name>] replaces scalar material parameters of one
// object (through a private copy of its material); [overrides.lights]
// multipliers scale light intensities. Written by the fit tool.
void apply_overrides(const tu::Ctx& ctx, const toml::table& ov, Scene& scene) {
  if (const auto* objs = tu::opt_table(ctx, ov, "objects", "overrides")) {
    for (const auto& [key, node] : *objs) {
      const std::string name(key.str());
      const std::string prefix = "overrides.objects." + name;
      const auto* t = node.as_table();
      if (!t) ctx.fail(&node, prefix, "expected a table");
      const int oi = scene.find_object(name);
      if (oi < 0) ctx.fail(&node, prefix, "unknown object '" + name + "'");
      SceneObject& obj = scene.objects[oi];
      NamedMaterial m = scene.materials[obj.material];
      m.name = name + "@override";
      PbrMaterial& pm = m.material;
      pm.roughness = tu::number(ctx, *t, "roughness", prefix, pm.roughness);
      pm.metallic = tu::number(ctx, *t, "metallic", prefix, pm.metallic);
      pm.specular = tu::number(ctx, *t, "specular", prefix, pm.specular);
      pm.transmission = tu::number(ctx, *t, "transmission", prefix, pm.transmission);
      const int existing = scene.find_material(m.name);
      if (existing >= 0) {
        scene.materials[existing] = std::move(m);
        obj.material = existing;
      } else {
        scene.materials.push_back(std::move(m));
        obj.material = static_cast<int>(scene.materials.size()) - 1;
      }
    }
  }
  if (const auto* lights = tu::opt_table(ctx, ov, "lights", "overrides")) {
    if (const toml::node* n = lights->get("multipliers")) {
      const auto mult = tu::number_array(ctx, *n, "overrides.lights.multipliers", scene.lights.size());
      for (std::size_t i = 0; i < mult.size(); ++i) {
        if (!(mult[i] > 0)) ctx.fail(n, "overrides.lights.multipliers", "multipliers must be > 0");
        scene.lights[i].intensity *= mult[i];
      }
    }
  }
}

template <typename F>
void for_each_table(const tu::Ctx& ctx, const toml::table& root, const std::string& key, F&& f) {
  const toml::node* n = root.get(key);
  if (!n) return;
  const toml::array* arr = n->as_array();
  if (!arr) ctx.fail(n, key, "expected an array of tables ([[" + key + "]])");
  for (std::size_t i = 0; i < arr->size(); ++i) {
    const toml::table* t = (*arr)[i].as_table();
    if (!t) ctx.fail(&(*arr)[i], key + "[" + std::to_string(i) + "]", "expected a table");
    f(*t, i);
  }
}

}  // namespace

Scene parse_scene(const std::string& text, const std::filesystem::path& base_dir, const std::string& source_name) {
  tu::Ctx ctx{source_name};
  toml::table root;
  try {
    root = toml::parse(text, source_name);
  } catch (const toml::parse_error& e) {
    throw ParseError(source_name, static_cast<int>(e.source().begin.line), std::string(e.description()));
  }

  Scene scene;
  for_each_table(ctx, root, "meshes", [&](const toml::table& t, std::size_t i) {
    const std::string prefix = "meshes[" + std::to_string(i) + "]";
    NamedMesh m;
    m.name = tu::required_string(ctx, t, "name", prefix);
    m.mesh = parse_mesh(ctx, t, base_dir, "meshes." + m.name);
    if (scene.find_mesh(m.name) >= 0) ctx.fail(&t, "meshes." + m.name, "duplicate mesh name");
    scene.meshes.push_back(std::move(m));
  });
  for_each_table(ctx, root, "materials", [&](const toml::table& t, std::size_t i) {
    NamedMaterial m;
    m.name = tu::required_string(ctx, t, "name", "materials[" + std::to_string(i) + "]");
    m.material = parse_material(ctx, t, base_dir, "materials." + m.name);
    if (scene.find_material(m.name) >= 0) ctx.fail(&t, "materials." + m.name, "duplicate material name");
    scene.materials.push_back(std::move(m));
  });
  for_each_table(ctx, root, "objects", [&](const toml::table& t, std::size_t i) {
    SceneObject o;
    const std::string idx = "objects[" + std::to_string(i) + "]";
    o.name = tu::opt_string(ctx, t, "name", idx).value_or("object" + std::to_string(i));
    const std::string prefix = "objects." + o.name;
    const std::string mesh = tu::required_string(ctx, t, "mesh", prefix);
    const std::string mat = tu::required_string(ctx, t, "material", prefix);
    o.mesh = scene.find_mesh(mesh);
    o.material = scene.find_material(mat);
    if (o.mesh < 0) ctx.fail(t.get("mesh"), prefix + ".mesh", "unknown mesh '" + mesh + "'");
    if (o.material < 0) ctx.fail(t.get("material"), prefix + ".material", "unknown material '" + mat + "'");
    o.pose = parse_pose(ctx, t, prefix, Transform{});
    scene.objects.push_back(std::move(o));
  });
  for_each_table(ctx, root, "lights", [&](const toml::table& t, std::size_t i) {
    const std::string prefix = "lights." + std::to_string(i);
    if (!t.get("kind")) ctx.fail(&t, prefix + ".kind", "missing light kind");
    scene.lights.push_back(parse_light(ctx, t, base_dir, prefix, LightSource{}));
  });
  if (const auto* env = tu::opt_table(ctx, root, "environment", "")) {
    scene.environment = tu::vec3(ctx, *env, "radiance", "environment", scene.environment);
  }
  const toml::table* rig = tu::opt_table(ctx, root, "rig", "");
  if (!rig) ctx.fail(&root, "rig", "scene needs exactly one [rig] section");
  scene.rig = parse_rig(ctx, *rig, base_dir);
  if (const auto* ov = tu::opt_table(ctx, root, "overrides", "")) apply_overrides(ctx, *ov, scene);

  validate_scene(scene);
  return scene;
}

Scene load_scene(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw MissingAssetError(path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  const auto base = path.has_parent_path() ? path.parent_path() : std::filesystem::path(".");
  return parse_scene(ss.str(), base, path.string());
}

// ---------------------------------------------------------------------------
// Saving

namespace {

toml::array matrix_array(const Mat3& m) {
  toml::array a;
  for (double v : m.m) a.push_back(v);
  return a;
}

void put_pose(toml::table& t, const Transform& pose) {
  t.insert_or_assign("position", tu::to_array(pose.translation));
  t.insert_or_assign("matrix", matrix_array(pose.rotation));
}

std::string write_texture(const Texture& tex, const std::filesystem::path& dir, const std::string& stem) {
  Image8 img(tex.image.width, tex.image.height, tex.image.channels == 1 ? 1 : 3);
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x)
      for (int c = 0; c < img.channels; ++c) {
        const double v = tex.image.at(x, y, std::min(c, tex.image.channels - 1));
        img.at(x, y, c) = static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0));
      }
  const std::string name = stem + (img.channels == 1 ? ".pgm" : ".ppm");
  write_pnm(dir / name, img);
  return name;
}

const char* filter_name(TextureFilter f) { return f == TextureFilter::bilinear ? "bilinear" : "nearest"; }

toml::table light_table(const LightSource& l, const std::filesystem::path& dir, const std::string& stem) {
  toml::table t;
  t.insert_or_assign("kind", to_string(l.kind));
  put_pose(t, l.pose);
  t.insert_or_assign("intensity", tu::to_array(l.intensity));
  t.insert_or_assign("fov", l.fov);
  t.insert_or_assign("size", toml::array{l.size.x, l.size.y});
  if (l.pattern) {
    t.insert_or_assign("pattern", write_texture(*l.pattern, dir, stem + "_pattern"));
    t.insert_or_assign("pattern_filter", filter_name(l.pattern->filter));
  }
  return t;
}

toml::table camera_table(const CameraModel& c) {
  toml::table t;
  t.insert_or_assign("width", c.width);
  t.insert_or_assign("height", c.height);
  t.insert_or_assign("fx", c.fx);
  t.insert_or_assign("fy", c.fy);
  t.insert_or_assign("cx", c.cx);
  t.insert_or_assign("cy", c.cy);
  put_pose(t, c.pose);
  return t;
}

}  // namespace

void save_scene(const Scene& scene, const std::filesystem::path& path) {
  const auto dir = path.has_parent_path() ? path.parent_path() : std::filesystem::path(".");
  const std::string stem = path.stem().string();
  toml::table root;

  toml::array meshes;
  for (std::size_t i = 0; i < scene.meshes.size(); ++i) {
    const std::string file = stem + "_mesh" + std::to_string(i) + ".obj";
    save_obj(dir / file, scene.meshes[i].mesh);
    meshes.push_back(toml::table{{"name", scene.meshes[i].name}, {"file", file}});
  }
  root.insert_or_assign("meshes", std::move(meshes));

  toml::array materials;
  for (std::size_t i = 0; i < scene.materials.size(); ++i) {
    const auto& m = scene.materials[i].material;
    toml::table t{{"name", scene.materials[i].name},
                  {"base_color", tu::to_array(m.base_color)},
                  {"metallic", m.metallic},
                  {"specular", m.specular},
                  {"roughness", m.roughness},
                  {"ior", m.ior},
                  {"transmission", m.transmission},
                  {"emission", tu::to_array(m.emission)}};
    if (m.base_color_map) {
      t.insert_or_assign("base_color_map", write_texture(*m.base_color_map, dir, stem + "_albedo" + std::to_string(i)));
      t.insert_or_assign("base_color_filter", filter_name(m.base_color_map->filter));
    }
    materials.push_back(std::move(t));
  }
  root.insert_or_assign("materials", std::move(materials));

  toml::array objects;
  for (const auto& o : scene.objects) {
    toml::table t{{"name", o.name},
                  {"mesh", scene.meshes.at(o.mesh).name},
                  {"material", scene.materials.at(o.material).name}};
    put_pose(t, o.pose);
    objects.push_back(std::move(t));
  }
  root.insert_or_assign("objects", std::move(objects));

  toml::array lights;
  for (std::size_t i = 0; i < scene.lights.size(); ++i)
    lights.push_back(light_table(scene.lights[i], dir, stem + "_light" + std::to_string(i)));
  root.insert_or_assign("lights", std::move(lights));

  root.insert_or_assign("environment", toml::table{{"radiance", tu::to_array(scene.environment)}});

  toml::table rig{{"baseline", scene.rig.baseline},
                  {"ir_ambient", scene.rig.ir_ambient},
                  {"visible_attenuation", scene.rig.visible_attenuation}};
  rig.insert_or_assign("ir_left", camera_table(scene.rig.ir_left));
  rig.insert_or_assign("ir_right", camera_table(scene.rig.ir_right));
  rig.insert_or_assign("rgb", camera_table(scene.rig.rgb));
  rig.insert_or_assign("projector", light_table(scene.rig.projector, dir, stem + "_projector"));
  root.insert_or_assign("rig", std::move(rig));

  std::ofstream out(path);
  if (!out) throw RuntimeError("cannot write " + path.string());
  out << root << '\n';
  if (!out) throw RuntimeError("write failed: " + path.string());
}

}  // namespace depthsim
