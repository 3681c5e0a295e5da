#include <fstream>
#include <random>

#include <gtest/gtest.h>

#include "depthsim/error.hpp"
#include "depthsim/mesh.hpp"
#include "depthsim/scene.hpp"
#include "test_support.hpp"

using namespace depthsim;

namespace {

const char* kMinimal = R"(
[[meshes]]
name = "quad"
primitive = "quad"

[[materials]]
name = "grey"

[[objects]]
mesh = "quad"
material = "grey"
position = [0, 0, 1]

[[lights]]
kind = "point"
position = [0, -1, 0]

[rig.ir_left]
width = 64
height = 48
fx = 60.0
)";

std::string with_material(const std::string& extra) {
  return std::string(kMinimal) + "\n[[materials]]\nname = \"odd\"\n" + extra + "\n";
}

template <typename E>
E expect_throw(const std::function<void()>& f) {
  try {
    f();
  } catch (const E& e) {
    return e;
  }
  ADD_FAILURE() << "expected exception";
  throw std::logic_error("unreachable");
}

}  // namespace

TEST(SceneLoad, MinimalScene) {
  const Scene s = parse_scene(kMinimal, ".");
  EXPECT_EQ(s.objects.size(), 1u);
  EXPECT_EQ(s.lights.size(), 1u);
  EXPECT_EQ(s.rig.ir_left.width, 64);
  EXPECT_DOUBLE_EQ(s.rig.ir_left.cx, 31.5);
  EXPECT_DOUBLE_EQ(s.rig.baseline, 0.055);
  EXPECT_DOUBLE_EQ(s.rig.visible_attenuation, 0.05);
  ASSERT_TRUE(s.rig.projector.pattern.has_value());
  EXPECT_EQ(s.rig.projector.kind, LightKind::textured_spot);
}

TEST(SceneLoad, MissingMeshFileNamesThePath) {
  const std::string text = std::string(kMinimal) + "\n[[meshes]]\nname = \"gone\"\nfile = \"no_such_mesh.obj\"\n";
  const auto e = expect_throw<MissingAssetError>([&] { parse_scene(text, "/tmp"); });
  EXPECT_NE(e.path().find("no_such_mesh.obj"), std::string::npos);
}

TEST(SceneLoad, MissingSceneFile) {
  EXPECT_THROW(load_scene("/nonexistent/scene.toml"), MissingAssetError);
}

TEST(SceneLoad, TransmissionOutOfRangeNamesField) {
  const auto e = expect_throw<ValidationError>([&] { parse_scene(with_material("transmission = 1.2"), "."); });
  EXPECT_NE(e.field().find("transmission"), std::string::npos);
}

TEST(SceneLoad, OtherRangeChecks) {
  EXPECT_THROW(parse_scene(with_material("ior = 0.9"), "."), ValidationError);
  EXPECT_THROW(parse_scene(with_material("roughness = -0.1"), "."), ValidationError);
  EXPECT_THROW(parse_scene(with_material("emission = [0, -1, 0]"), "."), ValidationError);
  EXPECT_THROW(parse_scene(std::string(kMinimal) + "\n[[lights]]\nkind = \"spot\"\nintensity = [1, -1, 1]\n", "."),
               ValidationError);
  EXPECT_THROW(parse_scene(std::string(kMinimal) + "\n[[lights]]\nkind = \"textured_spot\"\n", "."),
               ValidationError);
}

TEST(SceneLoad, ParseErrorCarriesLine) {
  const std::string text = std::string(kMinimal) + "\n[[materials]]\nname = \"x\"\nroughness = \"high\"\n";
  const auto e = expect_throw<ParseError>([&] { parse_scene(text, ".", "s.toml"); });
  EXPECT_GT(e.line(), 20);
  EXPECT_NE(std::string(e.what()).find("roughness"), std::string::npos);
  EXPECT_THROW(parse_scene("[[meshes]\n", "."), ParseError);
}

TEST(SceneLoad, UnknownReferencesAndMissingRig) {
  std::string text = kMinimal;
  text.replace(text.find("material = \"grey\""), 17, "material = \"nope\"");
  EXPECT_THROW(parse_scene(text, "."), ParseError);
  EXPECT_THROW(parse_scene("[[materials]]\nname = \"a\"\n", "."), ParseError);
}

TEST(SceneLoad, RunSectionsAreIgnored) {
  const std::string text = std::string(kMinimal) + "\n[run]\nspp = 4\n[stereo]\nmax_disp = 32\n";
  EXPECT_NO_THROW(parse_scene(text, "."));
}

TEST(SceneLoad, OverridesCreatePrivateMaterialAndScaleLights) {
  const std::string text = std::string(kMinimal) +
                           "\n[overrides.objects.object0]\nroughness = 0.3\nmetallic = 1.0\n"
                           "[overrides.lights]\nmultipliers = [2.0]\n";
  const Scene s = parse_scene(text, ".");
  const auto& m = s.materials.at(s.objects[0].material);
  EXPECT_EQ(s.materials.at(s.objects[0].material).name, "object0@override");
  EXPECT_DOUBLE_EQ(m.material.roughness, 0.3);
  EXPECT_DOUBLE_EQ(m.material.metallic, 1.0);
  EXPECT_EQ(s.materials.at(s.find_material("grey")).material, PbrMaterial{});
  EXPECT_DOUBLE_EQ(s.lights[0].intensity.x, 2.0);
}

TEST(Rig, DefaultRigIsValid) {
  const SensorRig rig = make_default_rig(fixtures::small_camera(64, 48, 60), 0.055);
  EXPECT_NO_THROW(validate_rig(rig));
  EXPECT_DOUBLE_EQ(rig.ir_right.pose.translation.x, 0.055);
}

TEST(Rig, RotatedRightCameraIsNotRectified) {
  SensorRig rig = make_default_rig(fixtures::small_camera(64, 48, 60), 0.055);
  rig.ir_right.pose.rotation = rotation_xyz({0, kPi / 180, 0});
  const auto e = expect_throw<ValidationError>([&] { validate_rig(rig); });
  EXPECT_NE(std::string(e.what()).find("IR cameras not rectified"), std::string::npos);
}

TEST(Rig, ZeroBaselineIsDegenerate) {
  SensorRig rig = make_default_rig(fixtures::small_camera(64, 48, 60), 0.055);
  rig.baseline = 0;
  rig.ir_right = rig.ir_left;
  const auto e = expect_throw<ValidationError>([&] { validate_rig(rig); });
  EXPECT_NE(std::string(e.what()).find("degenerate baseline"), std::string::npos);
}

TEST(Rig, OtherViolations) {
  SensorRig rig = make_default_rig(fixtures::small_camera(64, 48, 60), 0.055);
  SensorRig r1 = rig;
  r1.ir_right.fx = 61;
  EXPECT_THROW(validate_rig(r1), ValidationError);
  SensorRig r2 = rig;
  r2.ir_right.pose.translation.y = 0.01;
  EXPECT_THROW(validate_rig(r2), ValidationError);
  SensorRig r3 = rig;
  r3.projector.kind = LightKind::spot;
  EXPECT_THROW(validate_rig(r3), ValidationError);
  SensorRig r4 = rig;
  r4.ir_left.cx = 64;
  EXPECT_THROW(validate_rig(r4), ValidationError);
}

TEST(Rig, MovedKeepsRectification) {
  const SensorRig rig = make_default_rig(fixtures::small_camera(64, 48, 60), 0.055);
  const SensorRig moved = rig.moved(Transform::from_euler({0.1, 0.2, 0.3}, {0.2, -0.4, 0.1}));
  EXPECT_NO_THROW(validate_rig(moved));
}

TEST(Texture, NearestAndBilinear) {
  Texture t;
  t.image = ImageF(2, 1, 1);
  t.image.data = {0.0f, 1.0f};
  EXPECT_DOUBLE_EQ(t.sample(0.2, 0.5), 0.0);
  EXPECT_DOUBLE_EQ(t.sample(0.8, 0.5), 1.0);
  t.filter = TextureFilter::bilinear;
  EXPECT_NEAR(t.sample(0.5, 0.5), 0.5, 1e-12);
}

TEST(Texture, VPointsUp) {
  Texture t;
  t.image = ImageF(1, 2, 1);
  t.image.data = {1.0f, 0.0f};  // top row bright
  EXPECT_DOUBLE_EQ(t.sample(0.5, 0.9), 1.0);
  EXPECT_DOUBLE_EQ(t.sample(0.5, 0.1), 0.0);
}

TEST(DotPattern, DensityAndDeterminism) {
  DotPatternSpec spec;
  spec.width = spec.height = 200;
  spec.density = 0.5;
  const Texture a = generate_dot_pattern(spec);
  const Texture b = generate_dot_pattern(spec);
  EXPECT_EQ(a, b);
  double on = 0;
  for (float v : a.image.data) {
    EXPECT_TRUE(v == 0.0f || v == 1.0f);
    on += v;
  }
  EXPECT_NEAR(on / a.image.data.size(), 0.5, 0.01);
  spec.seed = 8;
  EXPECT_NE(generate_dot_pattern(spec), a);
  spec.density = 1.5;
  EXPECT_THROW(generate_dot_pattern(spec), ValidationError);
}

TEST(Obj, ParsesFaceVariantsAndNegativeIndices) {
  const char* text =
      "# tri\n"
      "v 0 0 0\nv 1 0 0\nv 0 1 0\nv 1 1 0\n"
      "vt 0 0\nvt 1 0\nvt 0 1\n"
      "vn 0 0 1\n"
      "o thing\ns off\n"
      "f 1/1/1 2/2/1 3/3/1\n"
      "f -3//-1 -1//-1 -2//-1\n";
  const Mesh m = parse_obj(text, "t.obj");
  ASSERT_EQ(m.triangles.size(), 2u);
  EXPECT_EQ(m.triangles[1], (std::array<int, 3>{1, 3, 2}));
  EXPECT_EQ(m.normal_indices[1], (std::array<int, 3>{0, 0, 0}));
  EXPECT_EQ(m.uv_indices[1], (std::array<int, 3>{-1, -1, -1}));
}

TEST(Obj, RejectsQuadsAndBadIndices) {
  EXPECT_THROW(parse_obj("v 0 0 0\nv 1 0 0\nv 0 1 0\nv 1 1 0\nf 1 2 3 4\n", "q.obj"), ParseError);
  EXPECT_THROW(parse_obj("v 0 0 0\nv 1 0 0\nf 1 2 7\n", "b.obj"), ParseError);
}

TEST(Obj, SaveLoadRoundTrip) {
  const Mesh m = make_sphere(0.3, 12, 6);
  const auto dir = fixtures::temp_dir("obj_rt");
  save_obj(dir / "s.obj", m);
  EXPECT_EQ(load_obj(dir / "s.obj"), m);
}

TEST(Primitives, QuadFacesPlusZ) {
  const Mesh q = make_quad(2, 1);
  ASSERT_EQ(q.triangles.size(), 2u);
  const auto& t = q.triangles[0];
  const Vec3 n = cross(q.positions[t[1]] - q.positions[t[0]], q.positions[t[2]] - q.positions[t[0]]);
  EXPECT_GT(n.z, 0);
  EXPECT_NO_THROW(validate_mesh(make_box({1, 2, 3}), "box"));
}

namespace {

Scene random_scene(std::uint32_t seed, const std::filesystem::path& dir) {
  std::mt19937 rng(seed);
  std::uniform_real_distribution<double> u(0, 1);
  Scene s;
  s.meshes.push_back({"quad", make_quad(1 + u(rng), 1 + u(rng))});
  s.meshes.push_back({"ball", make_sphere(0.1 + 0.2 * u(rng), 10, 5)});
  for (int i = 0; i < 3; ++i) {
    PbrMaterial m;
    m.base_color = {u(rng), u(rng), u(rng)};
    m.metallic = u(rng);
    m.specular = u(rng);
    m.roughness = u(rng);
    m.ior = 1 + u(rng);
    m.transmission = u(rng);
    m.emission = {u(rng), 0, 0};
    s.materials.push_back({"m" + std::to_string(i), m});
  }
  Texture albedo = generate_dot_pattern({8, 4, 0.5, seed});
  albedo.filter = TextureFilter::bilinear;
  s.materials[0].material.base_color_map = albedo;
  for (int i = 0; i < 4; ++i) {
    SceneObject o;
    o.name = "obj" + std::to_string(i);
    o.mesh = i % 2;
    o.material = i % 3;
    o.pose = Transform::from_euler({u(rng), u(rng), 1 + u(rng)}, {u(rng), u(rng), u(rng)});
    s.objects.push_back(o);
  }
  const LightKind kinds[] = {LightKind::point, LightKind::directional, LightKind::spot, LightKind::area,
                             LightKind::textured_spot};
  for (LightKind k : kinds) {
    LightSource l;
    l.kind = k;
    l.pose = Transform::from_euler({u(rng), -1, 0}, {u(rng), 0, 0});
    l.intensity = {u(rng), u(rng), u(rng)};
    l.fov = 0.2 + u(rng);
    l.size = {0.1 + u(rng), 0.1 + u(rng)};
    if (k == LightKind::textured_spot) l.pattern = generate_dot_pattern({16, 16, 0.3, seed + 1});
    s.lights.push_back(l);
  }
  CameraModel cam = fixtures::small_camera(80, 60, 70 + 10 * u(rng));
  cam.pose = Transform::from_euler({u(rng), u(rng), u(rng)}, {0.1 * u(rng), 0.1 * u(rng), 0});
  s.rig = make_default_rig(cam, 0.03 + 0.05 * u(rng));
  s.rig.rgb.pose.translation.x += 0.01;
  s.rig.ir_ambient = u(rng);
  s.environment = {u(rng), u(rng), u(rng)};
  (void)dir;
  return s;
}

}  // namespace

TEST(SceneProperty, SaveLoadRoundTrip) {
  for (std::uint32_t seed = 1; seed <= 10; ++seed) {
    const auto dir = fixtures::temp_dir("scene_rt_" + std::to_string(seed));
    const Scene s = random_scene(seed, dir);
    ASSERT_NO_THROW(validate_scene(s));
    save_scene(s, dir / "scene.toml");
    const Scene back = load_scene(dir / "scene.toml");
    EXPECT_EQ(back, s) << "seed " << seed;
  }
}

TEST(SceneProperty, ValidationIsPure) {
  const auto dir = fixtures::temp_dir("scene_pure");
  Scene s = random_scene(3, dir);
  const Scene copy = s;
  EXPECT_NO_THROW(validate_scene(s));
  EXPECT_NO_THROW(validate_scene(s));
  EXPECT_EQ(s, copy);

  s.materials[1].material.metallic = 2;
  std::string first, second;
  try { validate_scene(s); } catch (const ValidationError& e) { first = e.what(); }
  try { validate_scene(s); } catch (const ValidationError& e) { second = e.what(); }
  EXPECT_FALSE(first.empty());
  EXPECT_EQ(first, second);
}

TEST(SceneProperty, MeshIndexOutOfRange) {
  Scene s = random_scene(4, fixtures::temp_dir("scene_idx"));
  s.meshes[0].mesh.triangles[0][1] = 999;
  EXPECT_THROW(validate_scene(s), ValidationError);
  Scene s2 = random_scene(4, fixtures::temp_dir("scene_idx2"));
  s2.objects[0].mesh = 7;
  EXPECT_THROW(validate_scene(s2), ValidationError);
}
