#include "depthsim/bvh.hpp"

#include <algorithm>
#include <numeric>

namespace depthsim {

namespace {
constexpr int kMaxLeafTris = 4;
constexpr double kTMin = 1e-9;
}  // namespace

bool intersect_triangle(const WorldTriangle& tri, const Ray& ray, double t_min, double t_max, Hit& hit) {
  const Vec3 p = cross(ray.dir, tri.e2);
  const double det = dot(tri.e1, p);
  if (std::abs(det) < 1e-14) return false;
  const double inv_det = 1.0 / det;
  const Vec3 s = ray.origin - tri.p0;
  const double b1 = dot(s, p) * inv_det;
  if (b1 < 0.0 || b1 > 1.0) return false;
  const Vec3 q = cross(s, tri.e1);
  const double b2 = dot(ray.dir, q) * inv_det;
  if (b2 < 0.0 || b1 + b2 > 1.0) return false;
  const double t = dot(tri.e2, q) * inv_det;
  if (t <= t_min || t >= t_max) return false;
  hit.t = t;
  hit.b1 = b1;
  hit.b2 = b2;
  return true;
}

std::vector<WorldTriangle> flatten_scene(const Scene& scene) {
  std::vector<WorldTriangle> out;
  for (std::size_t oi = 0; oi < scene.objects.size(); ++oi) {
    const SceneObject& obj = scene.objects[oi];
    const Mesh& mesh = scene.meshes.at(obj.mesh).mesh;
    const bool has_n = !mesh.normal_indices.empty();
    const bool has_t = !mesh.uv_indices.empty();
    for (std::size_t f = 0; f < mesh.triangles.size(); ++f) {
      const auto& idx = mesh.triangles[f];
      WorldTriangle tri;
      const Vec3 p0 = obj.pose.point(mesh.positions[idx[0]]);
      const Vec3 p1 = obj.pose.point(mesh.positions[idx[1]]);
      const Vec3 p2 = obj.pose.point(mesh.positions[idx[2]]);
      tri.p0 = p0;
      tri.e1 = p1 - p0;
      tri.e2 = p2 - p0;
      tri.ng = normalize(cross(tri.e1, tri.e2));
      Vec3* ns[3] = {&tri.n0, &tri.n1, &tri.n2};
      Vec2* uvs[3] = {&tri.uv0, &tri.uv1, &tri.uv2};
      for (int k = 0; k < 3; ++k) {
        const int ni = has_n ? mesh.normal_indices[f][k] : -1;
        *ns[k] = ni >= 0 ? normalize(obj.pose.vector(mesh.normals[ni])) : tri.ng;
        const int ti = has_t ? mesh.uv_indices[f][k] : -1;
        *uvs[k] = ti >= 0 ? mesh.uvs[ti] : Vec2{};
      }
      tri.object = static_cast<int>(oi);
      out.push_back(tri);
    }
  }
  return out;
}

Bvh::Bvh(std::vector<WorldTriangle> triangles) : tris_(std::move(triangles)) {
  if (tris_.empty()) return;
  std::vector<Vec3> centroids(tris_.size());
  for (std::size_t i = 0; i < tris_.size(); ++i)
    centroids[i] = tris_[i].p0 + (tris_[i].e1 + tris_[i].e2) * (1.0 / 3.0);
  nodes_.reserve(2 * tris_.size() / kMaxLeafTris + 1);
  build(0, static_cast<int>(tris_.size()), centroids);
}

int Bvh::build(int begin, int end, std::vector<Vec3>& centroids) {
  const int index = static_cast<int>(nodes_.size());
  nodes_.emplace_back();
  Vec3 lo{1e300, 1e300, 1e300}, hi{-1e300, -1e300, -1e300};
  Vec3 clo = lo, chi = hi;
  for (int i = begin; i < end; ++i) {
    const auto& t = tris_[i];
    for (const Vec3& p : {t.p0, t.p0 + t.e1, t.p0 + t.e2}) {
      lo = min(lo, p);
      hi = max(hi, p);
    }
    clo = min(clo, centroids[i]);
    chi = max(chi, centroids[i]);
  }
  nodes_[index].lo = lo;
  nodes_[index].hi = hi;

  const Vec3 extent = chi - clo;
  const int axis = extent.x >= extent.y && extent.x >= extent.z ? 0 : (extent.y >= extent.z ? 1 : 2);
  if (end - begin <= kMaxLeafTris || extent[axis] <= 0) {
    nodes_[index].first = begin;
    nodes_[index].count = end - begin;
    return index;
  }

  // Median split: reorder triangles and centroids together through a permutation.
  const int mid = (begin + end) / 2;
  std::vector<int> perm(end - begin);
  std::iota(perm.begin(), perm.end(), begin);
  std::nth_element(perm.begin(), perm.begin() + (mid - begin), perm.end(),
                   [&](int a, int b) { return centroids[a][axis] < centroids[b][axis]; });
  std::vector<WorldTriangle> tmp_t;
  std::vector<Vec3> tmp_c;
  tmp_t.reserve(perm.size());
  tmp_c.reserve(perm.size());
  for (int i : perm) {
    tmp_t.push_back(tris_[i]);
    tmp_c.push_back(centroids[i]);
  }
  std::copy(tmp_t.begin(), tmp_t.end(), tris_.begin() + begin);
  std::copy(tmp_c.begin(), tmp_c.end(), centroids.begin() + begin);

  nodes_[index].axis = axis;
  build(begin, mid, centroids);
  const int right = build(mid, end, centroids);
  nodes_[index].first = right;
  nodes_[index].count = 0;
  return index;
}

namespace {

inline bool hit_box(const Vec3& lo, const Vec3& hi, const Vec3& origin, const Vec3& inv_dir, double t_max) {
  double t0 = kTMin, t1 = t_max;
  for (int a = 0; a < 3; ++a) {
    double tn = (lo[a] - origin[a]) * inv_dir[a];
    double tf = (hi[a] - origin[a]) * inv_dir[a];
    if (tn > tf) std::swap(tn, tf);
    // NaN (0 * inf) on a slab boundary: keep the interval.
    t0 = tn > t0 ? tn : t0;
    t1 = tf < t1 ? tf : t1;
    if (t0 > t1 * (1 + 4e-16)) return false;
  }
  return true;
}

}  // namespace

template <bool AnyHit>
std::optional<Hit> Bvh::traverse(const Ray& ray, double t_max) const {
  if (nodes_.empty()) return std::nullopt;
  const Vec3 inv{1.0 / ray.dir.x, 1.0 / ray.dir.y, 1.0 / ray.dir.z};
  const bool neg[3] = {ray.dir.x < 0, ray.dir.y < 0, ray.dir.z < 0};
  std::optional<Hit> best;
  double closest = t_max;
  int stack[64];
  int sp = 0;
  stack[sp++] = 0;
  while (sp > 0) {
    const Node& node = nodes_[stack[--sp]];
    if (!hit_box(node.lo, node.hi, ray.origin, inv, closest)) continue;
    if (node.count > 0) {
      for (int i = node.first; i < node.first + node.count; ++i) {
        Hit h;
        if (intersect_triangle(tris_[i], ray, kTMin, closest, h)) {
          h.triangle = i;
          closest = h.t;
          best = h;
          if constexpr (AnyHit) return best;
        }
      }
      continue;
    }
    const int left = static_cast<int>(&node - nodes_.data()) + 1;
    const int right = node.first;
    // Visit the near child first.
    if (neg[node.axis]) {
      stack[sp++] = left;
      stack[sp++] = right;
    } else {
      stack[sp++] = right;
      stack[sp++] = left;
    }
  }
  return best;
}

std::optional<Hit> Bvh::intersect(const Ray& ray, double t_max) const { return traverse<false>(ray, t_max); }
bool Bvh::occluded(const Ray& ray, double t_max) const { return traverse<true>(ray, t_max).has_value(); }

}  // namespace depthsim
