#include "depthsim/mesh.hpp"

#include <charconv>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "depthsim/error.hpp"

namespace depthsim {
namespace {

double parse_number(std::string_view tok, const std::string& src, int line) {
  double v = 0;
  const auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (ec != std::errc{} || ptr != tok.data() + tok.size())
    throw ParseError(src, line, "bad number '" + std::string(tok) + "'");
  return v;
}

int resolve_index(std::string_view tok, int count, const std::string& src, int line) {
  int v = 0;
  const auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (ec != std::errc{} || ptr != tok.data() + tok.size() || v == 0)
    throw ParseError(src, line, "bad index '" + std::string(tok) + "'");
  const int idx = v > 0 ? v - 1 : count + v;
  if (idx < 0 || idx >= count) throw ParseError(src, line, "index out of range '" + std::string(tok) + "'");
  return idx;
}

}  // namespace

Mesh parse_obj(const std::string& text, const std::string& source_name) {
  Mesh mesh;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  bool any_normals = false, any_uvs = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    std::istringstream ls(line);
    std::string key;
    if (!(ls >> key)) continue;
    std::vector<std::string> toks;
    for (std::string t; ls >> t;) toks.push_back(t);
    if (key == "v" || key == "vn") {
      if (toks.size() < 3) throw ParseError(source_name, line_no, key + " needs 3 components");
      const Vec3 v{parse_number(toks[0], source_name, line_no), parse_number(toks[1], source_name, line_no),
                   parse_number(toks[2], source_name, line_no)};
      (key == "v" ? mesh.positions : mesh.normals).push_back(v);
    } else if (key == "vt") {
      if (toks.size() < 2) throw ParseError(source_name, line_no, "vt needs 2 components");
      mesh.uvs.push_back({parse_number(toks[0], source_name, line_no), parse_number(toks[1], source_name, line_no)});
    } else if (key == "f") {
      if (toks.size() != 3)
        throw ParseError(source_name, line_no, "only triangular faces are supported (got " +
                                                   std::to_string(toks.size()) + " vertices)");
      std::array<int, 3> vi{}, ni{-1, -1, -1}, ti{-1, -1, -1};
      for (int k = 0; k < 3; ++k) {
        std::string_view t = toks[k];
        const auto s1 = t.find('/');
        vi[k] = resolve_index(t.substr(0, s1), static_cast<int>(mesh.positions.size()), source_name, line_no);
        if (s1 == std::string_view::npos) continue;
        const auto rest = t.substr(s1 + 1);
        const auto s2 = rest.find('/');
        const auto tt = rest.substr(0, s2);
        if (!tt.empty()) ti[k] = resolve_index(tt, static_cast<int>(mesh.uvs.size()), source_name, line_no);
        if (s2 != std::string_view::npos && s2 + 1 < rest.size())
          ni[k] = resolve_index(rest.substr(s2 + 1), static_cast<int>(mesh.normals.size()), source_name, line_no);
      }
      any_normals |= ni[0] >= 0;
      any_uvs |= ti[0] >= 0;
      mesh.triangles.push_back(vi);
      mesh.normal_indices.push_back(ni);
      mesh.uv_indices.push_back(ti);
    }
  }
  if (!any_normals) mesh.normal_indices.clear();
  if (!any_uvs) mesh.uv_indices.clear();
  return mesh;
}

Mesh load_obj(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw MissingAssetError(path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_obj(ss.str(), path.string());
}

void save_obj(const std::filesystem::path& path, const Mesh& mesh) {
  std::ofstream out(path);
  if (!out) throw RuntimeError("cannot write " + path.string());
  out << std::setprecision(17);
  for (const auto& p : mesh.positions) out << "v " << p.x << ' ' << p.y << ' ' << p.z << '\n';
  for (const auto& t : mesh.uvs) out << "vt " << t.x << ' ' << t.y << '\n';
  for (const auto& n : mesh.normals) out << "vn " << n.x << ' ' << n.y << ' ' << n.z << '\n';
  const bool has_n = !mesh.normal_indices.empty(), has_t = !mesh.uv_indices.empty();
  for (std::size_t f = 0; f < mesh.triangles.size(); ++f) {
    out << 'f';
    for (int k = 0; k < 3; ++k) {
      out << ' ' << mesh.triangles[f][k] + 1;
      const int t = has_t ? mesh.uv_indices[f][k] : -1;
      const int n = has_n ? mesh.normal_indices[f][k] : -1;
      if (t >= 0 || n >= 0) out << '/';
      if (t >= 0) out << t + 1;
      if (n >= 0) out << '/' << n + 1;
    }
    out << '\n';
  }
}

void validate_mesh(const Mesh& mesh, const std::string& name) {
  const std::string field = "meshes." + name;
  if (mesh.triangles.empty()) throw ValidationError(field, "mesh has no triangles");
  const auto np = static_cast<int>(mesh.positions.size());
  const auto nn = static_cast<int>(mesh.normals.size());
  const auto nt = static_cast<int>(mesh.uvs.size());
  if (!mesh.normal_indices.empty() && mesh.normal_indices.size() != mesh.triangles.size())
    throw ValidationError(field, "normal index count mismatch");
  if (!mesh.uv_indices.empty() && mesh.uv_indices.size() != mesh.triangles.size())
    throw ValidationError(field, "uv index count mismatch");
  for (std::size_t f = 0; f < mesh.triangles.size(); ++f) {
    const auto& t = mesh.triangles[f];
    for (int k = 0; k < 3; ++k) {
      if (t[k] < 0 || t[k] >= np) throw ValidationError(field, "vertex index out of range in face " + std::to_string(f));
      if (!mesh.normal_indices.empty() && mesh.normal_indices[f][k] >= nn)
        throw ValidationError(field, "normal index out of range in face " + std::to_string(f));
      if (!mesh.uv_indices.empty() && mesh.uv_indices[f][k] >= nt)
        throw ValidationError(field, "uv index out of range in face " + std::to_string(f));
    }
    const Vec3 n = cross(mesh.positions[t[1]] - mesh.positions[t[0]], mesh.positions[t[2]] - mesh.positions[t[0]]);
    if (!(length(n) > 0)) throw ValidationError(field, "degenerate triangle " + std::to_string(f));
  }
  for (const auto& n : mesh.normals)
    if (!(length(n) > 0) || !is_finite(n)) throw ValidationError(field, "zero-length vertex normal");
}

Mesh make_quad(double sx, double sy) {
  Mesh m;
  const double hx = sx / 2, hy = sy / 2;
  m.positions = {{-hx, -hy, 0}, {hx, -hy, 0}, {hx, hy, 0}, {-hx, hy, 0}};
  m.uvs = {{0, 0}, {1, 0}, {1, 1}, {0, 1}};
  m.normals = {{0, 0, 1}};
  m.triangles = {{0, 1, 2}, {0, 2, 3}};
  m.uv_indices = m.triangles;
  m.normal_indices = {{0, 0, 0}, {0, 0, 0}};
  return m;
}

Mesh make_sphere(double radius, int segments, int rings) {
  Mesh m;
  segments = std::max(segments, 3);
  rings = std::max(rings, 2);
  for (int r = 0; r <= rings; ++r) {
    const double theta = kPi * r / rings;
    for (int s = 0; s <= segments; ++s) {
      const double phi = 2 * kPi * s / segments;
      const Vec3 n{std::sin(theta) * std::cos(phi), std::sin(theta) * std::sin(phi), std::cos(theta)};
      m.positions.push_back(n * radius);
      m.normals.push_back(n);
      m.uvs.push_back({static_cast<double>(s) / segments, 1.0 - static_cast<double>(r) / rings});
    }
  }
  auto idx = [&](int r, int s) { return r * (segments + 1) + s; };
  for (int r = 0; r < rings; ++r) {
    for (int s = 0; s < segments; ++s) {
      const int a = idx(r, s), b = idx(r + 1, s), c = idx(r + 1, s + 1), d = idx(r, s + 1);
      // Counter-clockwise seen from outside.
      if (r != 0) m.triangles.push_back({a, b, d});
      if (r != rings - 1) m.triangles.push_back({b, c, d});
    }
  }
  m.normal_indices = m.triangles;
  m.uv_indices = m.triangles;
  return m;
}

Mesh make_box(const Vec3& size) {
  Mesh m;
  const Vec3 h = size * 0.5;
  const Vec3 axes[3] = {{1, 0, 0}, {0, 1, 0}, {0, 0, 1}};
  for (int a = 0; a < 3; ++a) {
    for (int sgn = -1; sgn <= 1; sgn += 2) {
      const Vec3 n = axes[a] * sgn;
      const Vec3 u = axes[(a + 1) % 3] * sgn;
      const Vec3 v = cross(n, u);
      const double hn = h[a], hu = h[(a + 1) % 3], hv = h[(a + 2) % 3];
      const int base = static_cast<int>(m.positions.size());
      const Vec3 c = n * hn;
      m.positions.push_back(c - u * hu - v * hv);
      m.positions.push_back(c + u * hu - v * hv);
      m.positions.push_back(c + u * hu + v * hv);
      m.positions.push_back(c - u * hu + v * hv);
      const int ni = static_cast<int>(m.normals.size());
      m.normals.push_back(n);
      m.triangles.push_back({base, base + 1, base + 2});
      m.triangles.push_back({base, base + 2, base + 3});
      m.normal_indices.push_back({ni, ni, ni});
      m.normal_indices.push_back({ni, ni, ni});
    }
  }
  return m;
}

}  // namespace depthsim
