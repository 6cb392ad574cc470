#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <utility>
#include <vector>

namespace msfem {

struct Point2 {
    double x = 0.0;
    double y = 0.0;

    friend Point2 operator+(Point2 a, Point2 b) { return {a.x + b.x, a.y + b.y}; }
    friend Point2 operator-(Point2 a, Point2 b) { return {a.x - b.x, a.y - b.y}; }
    friend Point2 operator*(double s, Point2 a) { return {s * a.x, s * a.y}; }
    friend bool operator==(Point2 a, Point2 b) = default;
};

double dot(Point2 a, Point2 b);
double cross(Point2 a, Point2 b);
double norm(Point2 a);
double distance(Point2 a, Point2 b);

using Triangle = std::array<Point2, 3>;
using Barycentric = std::array<double, 3>;

double signed_area(const Triangle& t);
double diameter(const Triangle& t);
/// Diameter of the largest inscribed disc.
double inscribed_diameter(const Triangle& t);
Point2 barycenter(const Triangle& t);
Barycentric barycentric(const Triangle& t, Point2 p);
/// Gradients of the three barycentric coordinates (constant on the triangle).
std::array<Point2, 3> barycentric_gradients(const Triangle& t);
/// Distance from p to the line through a and b.
double line_distance(Point2 p, Point2 a, Point2 b);

/// Axis-aligned rectangle [x0, x1] x [y0, y1].
struct Rect {
    double x0 = 0.0;
    double y0 = 0.0;
    double x1 = 1.0;
    double y1 = 1.0;

    double width() const { return x1 - x0; }
    double height() const { return y1 - y0; }
    double area() const { return width() * height(); }
    bool contains(Point2 p, double tol = 1e-12) const;

    static Rect unit_square() { return {}; }
};

/// Describes a mesh produced by build_structured_triangulation. Enables O(1)
/// point location and exact vertex lookup by lattice coordinates.
struct GridInfo {
    Rect domain;
    int nx = 0;
    int ny = 0;

    double dx() const { return domain.width() / nx; }
    double dy() const { return domain.height() / ny; }
    std::size_t vertex(int i, int j) const {
        return static_cast<std::size_t>(j) * static_cast<std::size_t>(nx + 1) +
               static_cast<std::size_t>(i);
    }
};

struct Mesh {
    std::vector<Point2> vertices;
    std::vector<std::array<std::uint32_t, 3>> elements;
    std::vector<char> boundary;  ///< one flag per vertex
    double h = 0.0;              ///< max element diameter
    double h_min = 0.0;          ///< min element diameter
    double sigma0 = 0.0;         ///< max h_tau / rho_tau
    double sigma1 = 0.0;         ///< h / h_min
    std::optional<GridInfo> grid;

    std::size_t num_vertices() const { return vertices.size(); }
    std::size_t num_elements() const { return elements.size(); }
    Triangle triangle(std::size_t e) const;
    bool is_boundary(std::size_t v) const { return boundary[v] != 0; }
    double total_area() const;
};

/// Fills h, h_min, sigma0 and sigma1 from the element geometry. Throws
/// AssemblyError on a non-positive element.
void compute_quality(Mesh& mesh);

/// Verifies orientation, tiling of `expected_area` and the recorded quality
/// constants. Throws AssemblyError describing the first violation.
void check_invariants(const Mesh& mesh, double expected_area);

/// n x n grid of squares, each split along its anti-diagonal into two right
/// triangles. The right-angle vertex is stored first in every element.
Mesh build_structured_triangulation(const Rect& domain, int n);

/// Element containing p and the barycentric coordinates of p in it.
/// Requires mesh.grid. Points on shared edges resolve to one fixed side.
std::pair<std::size_t, Barycentric> locate(const Mesh& mesh, Point2 p);

struct Patch {
    std::size_t element_id = 0;
    Triangle simplex{};   ///< S(tau), vertices correspond to those of tau
    Point2 center{};      ///< homothety center c with S = c + dilation (tau - c)
    double dilation = 1.0;
    double gamma1 = 1.0;  ///< diam S / h_tau
    double gamma2 = 0.0;  ///< dist(boundary tau, boundary S) / h_tau
    bool clipped = false;
};

struct PatchOptions {
    /// Translated patches keep the homothety center inside
    /// barycenter + margin * (tau - barycenter), so tau stays strictly inside S.
    double center_margin = 0.5;
};

Patch oversample_patch(const Mesh& mesh, std::size_t element_id, double dilation,
                       const Rect& domain, const PatchOptions& options = {});

/// dist(boundary inner, boundary outer) for a triangle nested in another.
double boundary_gap(const Triangle& inner, const Triangle& outer);

struct LocalMesh {
    Mesh mesh;
    Triangle parent{};
    /// Barycentric coordinates (w.r.t. parent) of every vertex on the parent
    /// boundary, keyed by local vertex index.
    std::vector<std::pair<std::uint32_t, Barycentric>> trace_map;
    /// Red-refinement levels of the core simplex.
    int levels = 0;
    /// The first core_vertices / core_elements entries triangulate the
    /// element the mesh was built for; the rest (if any) cover the oversampling
    /// ring.
    std::size_t core_vertices = 0;
    std::size_t core_elements = 0;
};

/// Number of red refinements needed to bring diam(parent) down to target_h.
int refinement_levels(const Triangle& parent, double target_h);

/// Uniform red refinement applied `levels` times: 4^levels sub-triangles.
LocalMesh sub_triangulate_levels(const Triangle& parent, int levels);
LocalMesh sub_triangulate(const Triangle& parent, double target_h);

/// Extends a refined element mesh to the oversampling simplex of `patch` by
/// meshing the ring S \ tau with layers of homothetic triangles. The element
/// mesh is kept verbatim as the leading vertices/elements.
LocalMesh extend_to_patch(const LocalMesh& core, const Patch& patch);

/// Text format: `MSH2 nv ne`, `v x y` lines, `e i j k` lines, `b i` lines.
void write_msh2(std::ostream& out, const Mesh& mesh);
Mesh read_msh2(std::istream& in);

/// Stable 64-bit fingerprint of vertex coordinates and connectivity.
std::uint64_t mesh_hash(const Mesh& mesh);

}  // namespace msfem
