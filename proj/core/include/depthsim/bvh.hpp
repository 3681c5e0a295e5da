#pragma once

#include <optional>
#include <vector>

#include "depthsim/math.hpp"
#include "depthsim/scene.hpp"

namespace depthsim {

struct Ray {
  Vec3 origin;
  Vec3 dir;  // unit length
};

// World-space triangle with everything shading needs.
struct WorldTriangle {
  Vec3 p0, e1, e2;         // p1 = p0 + e1, p2 = p0 + e2
  Vec3 ng;                 // unit geometric normal, (e1 x e2) orientation
  Vec3 n0, n1, n2;         // unit shading normals (== ng when the mesh has none)
  Vec2 uv0, uv1, uv2;
  int object = -1;
};

struct Hit {
  double t = 0;
  double b1 = 0, b2 = 0;  // barycentrics of p1 and p2
  int triangle = -1;
};

// Axis-aligned BVH over a triangle soup: median split along the widest
// centroid axis, at most 4 triangles per leaf.
class Bvh {
 public:
  Bvh() = default;
  explicit Bvh(std::vector<WorldTriangle> triangles);

  std::optional<Hit> intersect(const Ray& ray, double t_max) const;
  bool occluded(const Ray& ray, double t_max) const;

  const std::vector<WorldTriangle>& triangles() const { return tris_; }
  std::size_t node_count() const { return nodes_.size(); }

 private:
  struct Node {
    Vec3 lo, hi;
    int first = 0;   // leaf: first triangle; interior: index of the right child
    int count = 0;   // > 0 for leaves
    int axis = 0;
  };

  int build(int begin, int end, std::vector<Vec3>& centroids);
  template <bool AnyHit>
  std::optional<Hit> traverse(const Ray& ray, double t_max) const;

  std::vector<WorldTriangle> tris_;
  std::vector<Node> nodes_;
};

// Transforms every object of the scene into world space.
std::vector<WorldTriangle> flatten_scene(const Scene& scene);

// Möller-Trumbore; returns t and barycentrics for hits in (t_min, t_max).
bool intersect_triangle(const WorldTriangle& tri, const Ray& ray, double t_min, double t_max, Hit& hit);

}  // namespace depthsim
