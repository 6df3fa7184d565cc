#pragma once

#include <Eigen/Core>

#include <array>
#include <iosfwd>
#include <optional>
#include <span>
#include <vector>

namespace hjb {

using Point2 = Eigen::Vector2d;

enum class FaceKind { interior, boundary };

/// Triangle of a conforming mesh.
///
/// Vertices are stored counterclockwise. Local edge `e` is the edge opposite
/// local vertex `e`; `refinement_edge` names the edge that newest-vertex
/// bisection splits next. `parent` is the index of the element of the previous
/// level this element descends from (itself if it was not refined), and
/// `level` counts bisections since the initial mesh.
struct Element {
  std::array<int, 3> vertices{};
  int refinement_edge = 0;
  std::optional<int> parent;
  int level = 0;
};

/// Mesh edge with its fixed unit normal.
///
/// `elements[0]` is the side the normal points out of; for interior faces
/// `elements[1]` is the other side, for boundary faces it is -1.
/// `local_edges[i]` is the local edge index of this face in `elements[i]`.
struct Face {
  std::array<int, 2> vertices{};
  FaceKind kind = FaceKind::interior;
  std::array<int, 2> elements{-1, -1};
  std::array<int, 2> local_edges{-1, -1};
  Point2 normal = Point2::Zero();

  bool is_interior() const { return kind == FaceKind::interior; }
};

struct SizeData {
  std::vector<double> element;  // h_K = |K|^{1/2}
  std::vector<double> face;     // h_F = |F|
};

/// Immutable conforming triangulation of a convex polygon.
class MeshLevel {
 public:
  MeshLevel(std::vector<Point2> vertices, std::vector<Element> elements, int index = 0);

  const std::vector<Point2>& vertices() const { return vertices_; }
  const std::vector<Element>& elements() const { return elements_; }
  const std::vector<Face>& faces() const { return faces_; }
  int index() const { return index_; }

  int num_vertices() const { return static_cast<int>(vertices_.size()); }
  int num_elements() const { return static_cast<int>(elements_.size()); }
  int num_faces() const { return static_cast<int>(faces_.size()); }

  /// Face ids of element `k`, indexed by local edge.
  const std::array<int, 3>& element_faces(int k) const { return element_faces_[k]; }
  bool is_boundary_vertex(int v) const { return boundary_vertex_[v]; }

  std::array<Point2, 3> corners(int k) const;
  double area(int k) const;
  double face_length(int f) const;
  Point2 centroid(int k) const;

  /// Global vertex ids of local edge `e` of element `k` (in counterclockwise order).
  std::array<int, 2> edge_vertices(int k, int e) const;

 private:
  void build_faces();

  std::vector<Point2> vertices_;
  std::vector<Element> elements_;
  std::vector<Face> faces_;
  std::vector<std::array<int, 3>> element_faces_;
  std::vector<bool> boundary_vertex_;
  int index_ = 0;
};

/// (0,1)^2 split into n x n squares, each cut along its (0,0)-(1,1) diagonal.
/// Refinement edges are the hypotenuses.
MeshLevel unit_square_mesh(int n);

/// Fan triangulation of a convex polygon (either orientation). Refinement edges
/// are the longest edges. Nonconvex or degenerate input throws std::invalid_argument.
MeshLevel convex_polygon_mesh(std::span<const Point2> polygon);

/// Newest-vertex bisection of every marked element plus the conformity closure.
MeshLevel refine_conforming(const MeshLevel& mesh, std::span<const int> marked);

/// `rounds` passes of refine_conforming with every element marked, returned as
/// a single level: `parent` refers to `mesh`. Two rounds halve the mesh size.
MeshLevel refine_uniform(const MeshLevel& mesh, int rounds = 2);

/// Level-independent normal of a segment: the tangent runs from the
/// lexicographically smaller endpoint to the larger, the normal is the tangent
/// rotated clockwise. Throws std::invalid_argument for zero-length segments.
Point2 canonical_normal(const Point2& a, const Point2& b);

/// Stored normal of a face (outward on the boundary).
Point2 face_normal(const MeshLevel& mesh, int face);

SizeData sizes(const MeshLevel& mesh);

// Diagnostics.
bool is_conforming(const MeshLevel& mesh);
double shape_regularity(const MeshLevel& mesh);  // max longest edge / shortest altitude
double min_angle(const MeshLevel& mesh);         // radians
double max_size_ratio(const MeshLevel& mesh);    // max h_K/h_F, h_F/h_K over adjacent pairs

void write_mesh_text(std::ostream& out, const MeshLevel& mesh);
void write_mesh_vtk(std::ostream& out, const MeshLevel& mesh);

}  // namespace hjb
