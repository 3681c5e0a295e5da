#pragma once

#include <array>
#include <filesystem>
#include <string>
#include <vector>

#include "depthsim/math.hpp"

namespace depthsim {

// Indexed triangle soup. Normal/UV index arrays are either empty or
// parallel to `triangles`; -1 marks a missing attribute on a corner.
struct Mesh {
  std::vector<Vec3> positions;
  std::vector<Vec3> normals;
  std::vector<Vec2> uvs;
  std::vector<std::array<int, 3>> triangles;
  std::vector<std::array<int, 3>> normal_indices;
  std::vector<std::array<int, 3>> uv_indices;

  friend bool operator==(const Mesh&, const Mesh&) = default;
};

// ASCII OBJ subset: v, vn, vt, f (triangles only; v, v/t, v//n, v/t/n and
// negative indices). Other statements (o, g, s, usemtl, mtllib) are ignored.
Mesh load_obj(const std::filesystem::path& path);
Mesh parse_obj(const std::string& text, const std::string& source_name);
void save_obj(const std::filesystem::path& path, const Mesh& mesh);

// Throws ValidationError("mesh.<name>...") on out-of-range indices or
// degenerate (zero-area) triangles.
void validate_mesh(const Mesh& mesh, const std::string& name);

// Procedural primitives, centred at the origin.
// Quad in the z=0 plane facing +z, size sx by sy.
Mesh make_quad(double sx, double sy);
// UV sphere with smooth normals, outward-facing.
Mesh make_sphere(double radius, int segments, int rings);
// Axis-aligned box, outward faces, flat normals.
Mesh make_box(const Vec3& size);

}  // namespace depthsim
