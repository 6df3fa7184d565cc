#include "hjb/mesh.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <ostream>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <unordered_set>

namespace hjb {

namespace {

std::uint64_t edge_key(int a, int b) {
  if (a > b) std::swap(a, b);
  return (static_cast<std::uint64_t>(a) << 32) | static_cast<std::uint32_t>(b);
}

double signed_area(const Point2& a, const Point2& b, const Point2& c) {
  return 0.5 * ((b - a).x() * (c - a).y() - (b - a).y() * (c - a).x());
}

bool lex_less(const Point2& a, const Point2& b) {
  return a.x() < b.x() || (a.x() == b.x() && a.y() < b.y());
}

}  // namespace

MeshLevel::MeshLevel(std::vector<Point2> vertices, std::vector<Element> elements, int index)
    : vertices_(std::move(vertices)), elements_(std::move(elements)), index_(index) {
  for (std::size_t k = 0; k < elements_.size(); ++k) {
    const auto& v = elements_[k].vertices;
    for (int i : v) {
      if (i < 0 || i >= num_vertices())
        throw std::invalid_argument("element " + std::to_string(k) + " references missing vertex");
    }
    if (v[0] == v[1] || v[1] == v[2] || v[0] == v[2])
      throw std::invalid_argument("element " + std::to_string(k) + " has repeated vertices");
    if (signed_area(vertices_[v[0]], vertices_[v[1]], vertices_[v[2]]) <= 0.0)
      throw std::invalid_argument("element " + std::to_string(k) + " is not counterclockwise");
    if (elements_[k].refinement_edge < 0 || elements_[k].refinement_edge > 2)
      throw std::invalid_argument("element " + std::to_string(k) + " has invalid refinement edge");
  }
  build_faces();
}

std::array<int, 2> MeshLevel::edge_vertices(int k, int e) const {
  const auto& v = elements_[k].vertices;
  return {v[(e + 1) % 3], v[(e + 2) % 3]};
}

void MeshLevel::build_faces() {
  std::unordered_map<std::uint64_t, int> lookup;
  lookup.reserve(elements_.size() * 2);
  element_faces_.assign(elements_.size(), {-1, -1, -1});
  for (int k = 0; k < num_elements(); ++k) {
    for (int e = 0; e < 3; ++e) {
      auto [a, b] = edge_vertices(k, e);
      auto [it, inserted] = lookup.try_emplace(edge_key(a, b), num_faces());
      if (inserted) {
        Face f;
        f.vertices = {std::min(a, b), std::max(a, b)};
        f.kind = FaceKind::boundary;
        f.elements = {k, -1};
        f.local_edges = {e, -1};
        faces_.push_back(f);
      } else {
        Face& f = faces_[it->second];
        if (f.kind == FaceKind::interior)
          throw std::invalid_argument("edge shared by more than two elements");
        f.kind = FaceKind::interior;
        f.elements[1] = k;
        f.local_edges[1] = e;
      }
      element_faces_[k][e] = it->second;
    }
  }

  boundary_vertex_.assign(vertices_.size(), false);
  for (Face& f : faces_) {
    const Point2& a = vertices_[f.vertices[0]];
    const Point2& b = vertices_[f.vertices[1]];
    f.normal = canonical_normal(a, b);
    // elements[0] must be the side the normal points out of.
    const bool points_into_first = (centroid(f.elements[0]) - a).dot(f.normal) > 0.0;
    if (f.is_interior()) {
      if (points_into_first) {
        std::swap(f.elements[0], f.elements[1]);
        std::swap(f.local_edges[0], f.local_edges[1]);
      }
    } else {
      if (points_into_first) f.normal = -f.normal;
      boundary_vertex_[f.vertices[0]] = true;
      boundary_vertex_[f.vertices[1]] = true;
    }
  }
}

std::array<Point2, 3> MeshLevel::corners(int k) const {
  const auto& v = elements_[k].vertices;
  return {vertices_[v[0]], vertices_[v[1]], vertices_[v[2]]};
}

double MeshLevel::area(int k) const {
  auto c = corners(k);
  return signed_area(c[0], c[1], c[2]);
}

double MeshLevel::face_length(int f) const {
  return (vertices_[faces_[f].vertices[1]] - vertices_[faces_[f].vertices[0]]).norm();
}

Point2 MeshLevel::centroid(int k) const {
  auto c = corners(k);
  return (c[0] + c[1] + c[2]) / 3.0;
}

Point2 canonical_normal(const Point2& a, const Point2& b) {
  const Point2 t = lex_less(a, b) ? Point2(b - a) : Point2(a - b);
  const double len = t.norm();
  if (!(len > 0.0)) throw std::invalid_argument("degenerate face");
  return Point2(t.y(), -t.x()) / len;
}

Point2 face_normal(const MeshLevel& mesh, int face) { return mesh.faces().at(face).normal; }

MeshLevel unit_square_mesh(int n) {
  if (n < 1) throw std::invalid_argument("unit_square_mesh: n must be positive");
  std::vector<Point2> vertices;
  vertices.reserve((n + 1) * (n + 1));
  for (int j = 0; j <= n; ++j)
    for (int i = 0; i <= n; ++i) vertices.emplace_back(double(i) / n, double(j) / n);
  auto id = [n](int i, int j) { return j * (n + 1) + i; };

  std::vector<Element> elements;
  elements.reserve(2 * n * n);
  for (int j = 0; j < n; ++j) {
    for (int i = 0; i < n; ++i) {
      // The shared diagonal (i,j)-(i+1,j+1) is the hypotenuse of both halves.
      elements.push_back({{id(i, j), id(i + 1, j), id(i + 1, j + 1)}, 1, std::nullopt, 0});
      elements.push_back({{id(i, j), id(i + 1, j + 1), id(i, j + 1)}, 2, std::nullopt, 0});
    }
  }
  return MeshLevel(std::move(vertices), std::move(elements), 0);
}

MeshLevel convex_polygon_mesh(std::span<const Point2> polygon) {
  const int n = static_cast<int>(polygon.size());
  if (n < 3) throw std::invalid_argument("polygon needs at least three vertices");
  std::vector<Point2> pts(polygon.begin(), polygon.end());
  for (const auto& p : pts)
    if (!std::isfinite(p.x()) || !std::isfinite(p.y()))
      throw std::invalid_argument("polygon has non-finite coordinates");

  double total = 0.0;
  for (int i = 0; i < n; ++i) total += pts[i].x() * pts[(i + 1) % n].y() - pts[(i + 1) % n].x() * pts[i].y();
  if (total < 0.0) std::reverse(pts.begin(), pts.end());
  for (int i = 0; i < n; ++i) {
    if (signed_area(pts[i], pts[(i + 1) % n], pts[(i + 2) % n]) <= 0.0)
      throw std::invalid_argument("polygon is not strictly convex");
  }

  // Clipping ears from vertex 0 of a convex polygon yields a fan.
  std::vector<Element> elements;
  for (int i = 1; i + 1 < n; ++i) {
    Element el{{0, i, i + 1}, 0, std::nullopt, 0};
    double longest = -1.0;
    for (int e = 0; e < 3; ++e) {
      const double len = (pts[el.vertices[(e + 1) % 3]] - pts[el.vertices[(e + 2) % 3]]).norm();
      if (len > longest * (1.0 + 1e-12)) {
        longest = len;
        el.refinement_edge = e;
      }
    }
    elements.push_back(el);
  }
  return MeshLevel(std::move(pts), std::move(elements), 0);
}

MeshLevel refine_conforming(const MeshLevel& mesh, std::span<const int> marked) {
  const auto& elements = mesh.elements();
  const int ne = mesh.num_elements();
  auto refinement_key = [&](const Element& el) {
    const int e = el.refinement_edge;
    return edge_key(el.vertices[(e + 1) % 3], el.vertices[(e + 2) % 3]);
  };

  std::unordered_set<std::uint64_t> split;
  for (int k : marked) {
    if (k < 0 || k >= ne) throw std::invalid_argument("marked element id out of range");
    split.insert(refinement_key(elements[k]));
  }

  // Closure: an element with any split edge must also split its refinement edge.
  bool changed = !split.empty();
  int passes = 0;
  while (changed) {
    changed = false;
    if (++passes > ne + 1) throw std::logic_error("refinement closure did not terminate");
    for (const Element& el : elements) {
      const auto key = refinement_key(el);
      if (split.contains(key)) continue;
      for (int e = 0; e < 3; ++e) {
        if (split.contains(edge_key(el.vertices[(e + 1) % 3], el.vertices[(e + 2) % 3]))) {
          split.insert(key);
          changed = true;
          break;
        }
      }
    }
  }

  std::vector<Point2> vertices = mesh.vertices();
  std::unordered_map<std::uint64_t, int> midpoint;
  auto midpoint_of = [&](int a, int b) {
    auto [it, inserted] = midpoint.try_emplace(edge_key(a, b), static_cast<int>(vertices.size()));
    if (inserted) vertices.push_back(0.5 * (vertices[a] + vertices[b]));
    return it->second;
  };

  std::vector<Element> out;
  out.reserve(ne + 2 * split.size());
  std::vector<Element> stack;
  for (int k = 0; k < ne; ++k) {
    Element root = elements[k];
    root.parent = k;
    stack.push_back(root);
    while (!stack.empty()) {
      Element el = stack.back();
      stack.pop_back();
      if (!split.contains(refinement_key(el))) {
        for (int e = 0; e < 3; ++e)
          if (split.contains(edge_key(el.vertices[(e + 1) % 3], el.vertices[(e + 2) % 3])))
            throw std::logic_error("refinement edge assignment is inconsistent");
        out.push_back(el);
        continue;
      }
      // Rotate so the refinement edge is (a, b) and c is the newest vertex.
      const int r = el.refinement_edge;
      const int c = el.vertices[r];
      const int a = el.vertices[(r + 1) % 3];
      const int b = el.vertices[(r + 2) % 3];
      const int m = midpoint_of(a, b);
      // Children (a, m, c) and (m, b, c); m is the newest vertex of both.
      Element left{{a, m, c}, 1, el.parent, el.level + 1};
      Element right{{m, b, c}, 0, el.parent, el.level + 1};
      // Pushed in reverse so `left` is emitted first.
      stack.push_back(right);
      stack.push_back(left);
    }
  }
  return MeshLevel(std::move(vertices), std::move(out), mesh.index() + 1);
}

MeshLevel refine_uniform(const MeshLevel& mesh, int rounds) {
  if (rounds < 1) throw std::invalid_argument("refine_uniform: rounds must be positive");
  std::vector<int> all(mesh.num_elements());
  for (int k = 0; k < mesh.num_elements(); ++k) all[k] = k;
  MeshLevel current = refine_conforming(mesh, all);
  for (int r = 1; r < rounds; ++r) {
    all.resize(current.num_elements());
    for (int k = 0; k < current.num_elements(); ++k) all[k] = k;
    MeshLevel next = refine_conforming(current, all);
    // Point lineage back to the input mesh.
    std::vector<Element> elements = next.elements();
    for (Element& el : elements) el.parent = current.elements()[*el.parent].parent;
    current = MeshLevel(next.vertices(), std::move(elements), mesh.index() + 1);
  }
  return current;
}

SizeData sizes(const MeshLevel& mesh) {
  SizeData s;
  s.element.resize(mesh.num_elements());
  s.face.resize(mesh.num_faces());
  for (int k = 0; k < mesh.num_elements(); ++k) s.element[k] = std::sqrt(mesh.area(k));
  for (int f = 0; f < mesh.num_faces(); ++f) s.face[f] = mesh.face_length(f);
  return s;
}

bool is_conforming(const MeshLevel& mesh) {
  for (const Face& f : mesh.faces()) {
    for (int side = 0; side < (f.is_interior() ? 2 : 1); ++side) {
      auto ev = mesh.edge_vertices(f.elements[side], f.local_edges[side]);
      if (edge_key(ev[0], ev[1]) != edge_key(f.vertices[0], f.vertices[1])) return false;
    }
  }
  // A hanging node leaves an unmatched edge inside the domain. The domain is
  // convex, so it is the convex hull of the vertices; every boundary face must
  // have the hull strictly on its inner side.
  std::vector<Point2> pts = mesh.vertices();
  std::sort(pts.begin(), pts.end(), lex_less);
  std::vector<Point2> hull;
  for (int pass = 0; pass < 2; ++pass) {
    const std::size_t base = hull.size();
    for (const Point2& p : pts) {
      while (hull.size() >= base + 2 && signed_area(hull[hull.size() - 2], hull.back(), p) <= 0.0)
        hull.pop_back();
      hull.push_back(p);
    }
    hull.pop_back();
    std::reverse(pts.begin(), pts.end());
  }
  auto inside_hull = [&](const Point2& q) {
    for (std::size_t i = 0; i < hull.size(); ++i)
      if (signed_area(hull[i], hull[(i + 1) % hull.size()], q) <= 0.0) return false;
    return true;
  };
  for (const Face& f : mesh.faces()) {
    if (f.is_interior()) continue;
    const Point2& a = mesh.vertices()[f.vertices[0]];
    const Point2& b = mesh.vertices()[f.vertices[1]];
    if (inside_hull(0.5 * (a + b) + 1e-8 * (b - a).norm() * f.normal)) return false;
  }
  return true;
}

double shape_regularity(const MeshLevel& mesh) {
  double worst = 0.0;
  for (int k = 0; k < mesh.num_elements(); ++k) {
    auto c = mesh.corners(k);
    double longest = 0.0;
    for (int e = 0; e < 3; ++e) longest = std::max(longest, (c[(e + 1) % 3] - c[(e + 2) % 3]).norm());
    worst = std::max(worst, longest * longest / (2.0 * mesh.area(k)));
  }
  return worst;
}

double min_angle(const MeshLevel& mesh) {
  double worst = std::numbers::pi;
  for (int k = 0; k < mesh.num_elements(); ++k) {
    auto c = mesh.corners(k);
    for (int i = 0; i < 3; ++i) {
      const Point2 u = c[(i + 1) % 3] - c[i];
      const Point2 w = c[(i + 2) % 3] - c[i];
      worst = std::min(worst, std::acos(std::clamp(u.dot(w) / (u.norm() * w.norm()), -1.0, 1.0)));
    }
  }
  return worst;
}

double max_size_ratio(const MeshLevel& mesh) {
  const SizeData s = sizes(mesh);
  double worst = 1.0;
  for (int f = 0; f < mesh.num_faces(); ++f) {
    const Face& face = mesh.faces()[f];
    for (int side = 0; side < 2; ++side) {
      if (face.elements[side] < 0) continue;
      const double hk = s.element[face.elements[side]];
      worst = std::max({worst, hk / s.face[f], s.face[f] / hk});
    }
  }
  return worst;
}

void write_mesh_text(std::ostream& out, const MeshLevel& mesh) {
  out << "mesh d=2 nv=" << mesh.num_vertices() << " ne=" << mesh.num_elements() << '\n';
  out.precision(17);
  for (const Point2& v : mesh.vertices()) out << "v " << v.x() << ' ' << v.y() << '\n';
  for (const Element& el : mesh.elements())
    out << "e " << el.vertices[0] << ' ' << el.vertices[1] << ' ' << el.vertices[2] << '\n';
}

void write_mesh_vtk(std::ostream& out, const MeshLevel& mesh) {
  out << "# vtk DataFile Version 3.0\nmesh level " << mesh.index() << "\nASCII\nDATASET UNSTRUCTURED_GRID\n";
  out.precision(17);
  out << "POINTS " << mesh.num_vertices() << " double\n";
  for (const Point2& v : mesh.vertices()) out << v.x() << ' ' << v.y() << " 0\n";
  out << "CELLS " << mesh.num_elements() << ' ' << 4 * mesh.num_elements() << '\n';
  for (const Element& el : mesh.elements())
    out << "3 " << el.vertices[0] << ' ' << el.vertices[1] << ' ' << el.vertices[2] << '\n';
  out << "CELL_TYPES " << mesh.num_elements() << '\n';
  for (int k = 0; k < mesh.num_elements(); ++k) out << "5\n";
  out << "CELL_DATA " << mesh.num_elements() << "\nSCALARS level int 1\nLOOKUP_TABLE default\n";
  for (const Element& el : mesh.elements()) out << el.level << '\n';
}

}  // namespace hjb
