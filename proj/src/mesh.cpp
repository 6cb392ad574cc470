#include "msfem/mesh.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>
#include <string>

#include "msfem/errors.hpp"
#include "msfem/hash.hpp"

namespace msfem {

double dot(Point2 a, Point2 b) { return a.x * b.x + a.y * b.y; }
double cross(Point2 a, Point2 b) { return a.x * b.y - a.y * b.x; }
double norm(Point2 a) { return std::hypot(a.x, a.y); }
double distance(Point2 a, Point2 b) { return norm(a - b); }

double signed_area(const Triangle& t) { return 0.5 * cross(t[1] - t[0], t[2] - t[0]); }

double diameter(const Triangle& t) {
    return std::max({distance(t[0], t[1]), distance(t[1], t[2]), distance(t[2], t[0])});
}

double inscribed_diameter(const Triangle& t) {
    const double perimeter = distance(t[0], t[1]) + distance(t[1], t[2]) + distance(t[2], t[0]);
    return 4.0 * std::abs(signed_area(t)) / perimeter;
}

Point2 barycenter(const Triangle& t) {
    return {(t[0].x + t[1].x + t[2].x) / 3.0, (t[0].y + t[1].y + t[2].y) / 3.0};
}

Barycentric barycentric(const Triangle& t, Point2 p) {
    const double area = signed_area(t);
    const double l1 = 0.5 * cross(t[2] - t[1], p - t[1]) / area;
    const double l2 = 0.5 * cross(t[0] - t[2], p - t[2]) / area;
    return {l1, l2, 1.0 - l1 - l2};
}

std::array<Point2, 3> barycentric_gradients(const Triangle& t) {
    const double two_area = 2.0 * signed_area(t);
    std::array<Point2, 3> g;
    for (int i = 0; i < 3; ++i) {
        const Point2 a = t[(i + 1) % 3];
        const Point2 b = t[(i + 2) % 3];
        // gradient of the coordinate that vanishes on edge (a, b)
        g[i] = {(a.y - b.y) / two_area, (b.x - a.x) / two_area};
    }
    return g;
}

double line_distance(Point2 p, Point2 a, Point2 b) {
    return std::abs(cross(b - a, p - a)) / distance(a, b);
}

bool Rect::contains(Point2 p, double tol) const {
    const double sx = tol * std::max(1.0, width());
    const double sy = tol * std::max(1.0, height());
    return p.x >= x0 - sx && p.x <= x1 + sx && p.y >= y0 - sy && p.y <= y1 + sy;
}

Triangle Mesh::triangle(std::size_t e) const {
    const auto& el = elements[e];
    return {vertices[el[0]], vertices[el[1]], vertices[el[2]]};
}

double Mesh::total_area() const {
    double sum = 0.0;
    for (std::size_t e = 0; e < elements.size(); ++e) sum += signed_area(triangle(e));
    return sum;
}

void compute_quality(Mesh& mesh) {
    if (mesh.elements.empty()) throw AssemblyError("mesh has no elements");
    double h = 0.0;
    double h_min = std::numeric_limits<double>::infinity();
    double sigma0 = 0.0;
    for (std::size_t e = 0; e < mesh.num_elements(); ++e) {
        const Triangle t = mesh.triangle(e);
        const double area = signed_area(t);
        const double diam = diameter(t);
        if (!(area > 1e-14 * diam * diam)) {
            throw AssemblyError("element " + std::to_string(e) + " is degenerate or clockwise");
        }
        h = std::max(h, diam);
        h_min = std::min(h_min, diam);
        sigma0 = std::max(sigma0, diam / inscribed_diameter(t));
    }
    mesh.h = h;
    mesh.h_min = h_min;
    mesh.sigma0 = sigma0;
    mesh.sigma1 = h / h_min;
}

void check_invariants(const Mesh& mesh, double expected_area) {
    if (mesh.boundary.size() != mesh.vertices.size()) {
        throw AssemblyError("boundary flag count does not match vertex count");
    }
    double sum = 0.0;
    for (std::size_t e = 0; e < mesh.num_elements(); ++e) {
        for (auto v : mesh.elements[e]) {
            if (v >= mesh.num_vertices()) {
                throw AssemblyError("element " + std::to_string(e) + " references a missing vertex");
            }
        }
        const Triangle t = mesh.triangle(e);
        const double area = signed_area(t);
        if (!(area > 0.0)) {
            throw AssemblyError("element " + std::to_string(e) + " is not positively oriented");
        }
        const double diam = diameter(t);
        if (diam / inscribed_diameter(t) > mesh.sigma0 * (1.0 + 1e-12)) {
            throw AssemblyError("element " + std::to_string(e) + " exceeds recorded sigma0");
        }
        if (mesh.h / diam > mesh.sigma1 * (1.0 + 1e-12)) {
            throw AssemblyError("element " + std::to_string(e) + " exceeds recorded sigma1");
        }
        sum += area;
    }
    if (std::abs(sum - expected_area) > 1e-12 * std::abs(expected_area)) {
        std::ostringstream msg;
        msg.precision(17);
        msg << "element areas sum to " << sum << ", expected " << expected_area;
        throw AssemblyError(msg.str());
    }
}

Mesh build_structured_triangulation(const Rect& domain, int n) {
    if (n < 1) throw InvalidArgument("build_structured_triangulation: n must be >= 1");
    if (!(domain.width() > 0.0) || !(domain.height() > 0.0)) {
        throw InvalidArgument("build_structured_triangulation: domain has non-positive extent");
    }
    Mesh mesh;
    GridInfo grid{domain, n, n};
    const auto np = static_cast<std::size_t>(n + 1);
    mesh.vertices.reserve(np * np);
    mesh.boundary.reserve(np * np);
    for (int j = 0; j <= n; ++j) {
        // exact end points so that boundary coordinates are bit-identical
        const double y = (j == n) ? domain.y1 : domain.y0 + domain.height() * j / n;
        for (int i = 0; i <= n; ++i) {
            const double x = (i == n) ? domain.x1 : domain.x0 + domain.width() * i / n;
            mesh.vertices.push_back({x, y});
            mesh.boundary.push_back(i == 0 || j == 0 || i == n || j == n);
        }
    }
    mesh.elements.reserve(2 * static_cast<std::size_t>(n) * n);
    for (int j = 0; j < n; ++j) {
        for (int i = 0; i < n; ++i) {
            const auto v00 = static_cast<std::uint32_t>(grid.vertex(i, j));
            const auto v10 = static_cast<std::uint32_t>(grid.vertex(i + 1, j));
            const auto v01 = static_cast<std::uint32_t>(grid.vertex(i, j + 1));
            const auto v11 = static_cast<std::uint32_t>(grid.vertex(i + 1, j + 1));
            mesh.elements.push_back({v00, v10, v01});
            mesh.elements.push_back({v11, v01, v10});
        }
    }
    mesh.grid = grid;
    compute_quality(mesh);
    return mesh;
}

std::pair<std::size_t, Barycentric> locate(const Mesh& mesh, Point2 p) {
    if (!mesh.grid) throw InvalidArgument("locate: mesh is not a structured grid");
    const GridInfo& g = *mesh.grid;
    const double sx = (p.x - g.domain.x0) / g.dx();
    const double sy = (p.y - g.domain.y0) / g.dy();
    const int i = std::clamp(static_cast<int>(std::floor(sx)), 0, g.nx - 1);
    const int j = std::clamp(static_cast<int>(std::floor(sy)), 0, g.ny - 1);
    const double s = sx - i;
    const double t = sy - j;
    const std::size_t cell = static_cast<std::size_t>(j) * g.nx + i;
    const std::size_t e = 2 * cell + ((s + t <= 1.0) ? 0 : 1);
    return {e, barycentric(mesh.triangle(e), p)};
}

double boundary_gap(const Triangle& inner, const Triangle& outer) {
    // For nested convex polygons the gap is attained at an inner vertex.
    double gap = std::numeric_limits<double>::infinity();
    for (const Point2& v : inner) {
        for (int k = 0; k < 3; ++k) {
            gap = std::min(gap, line_distance(v, outer[k], outer[(k + 1) % 3]));
        }
    }
    return gap;
}

namespace {

Triangle homothety(const Triangle& t, Point2 c, double s) {
    return {c + s * (t[0] - c), c + s * (t[1] - c), c + s * (t[2] - c)};
}

bool inside_rect(const Triangle& t, const Rect& r) {
    return std::all_of(t.begin(), t.end(), [&](Point2 p) { return r.contains(p, 1e-12); });
}

// Admissible homothety centers for a given dilation: S = c + D (tau - c) lies
// in the rectangle iff c lies in an axis-aligned box.
struct Box {
    double x0, y0, x1, y1;
    bool empty() const { return x0 > x1 || y0 > y1; }
};

Box center_box(const Triangle& tau, double D, const Rect& r) {
    Box b{-std::numeric_limits<double>::infinity(), -std::numeric_limits<double>::infinity(),
          std::numeric_limits<double>::infinity(), std::numeric_limits<double>::infinity()};
    const double k = D - 1.0;
    for (const Point2& v : tau) {
        b.x0 = std::max(b.x0, (D * v.x - r.x1) / k);
        b.x1 = std::min(b.x1, (D * v.x - r.x0) / k);
        b.y0 = std::max(b.y0, (D * v.y - r.y1) / k);
        b.y1 = std::min(b.y1, (D * v.y - r.y0) / k);
    }
    return b;
}

// Sutherland-Hodgman clip of a convex polygon against a box.
std::vector<Point2> clip(std::vector<Point2> poly, const Box& box) {
    auto clip_half = [](const std::vector<Point2>& in, auto inside, auto intersect) {
        std::vector<Point2> out;
        for (std::size_t i = 0; i < in.size(); ++i) {
            const Point2 a = in[i];
            const Point2 b = in[(i + 1) % in.size()];
            const bool ia = inside(a);
            const bool ib = inside(b);
            if (ia) out.push_back(a);
            if (ia != ib) out.push_back(intersect(a, b));
        }
        return out;
    };
    auto at_x = [](double x) {
        return [x](Point2 a, Point2 b) {
            const double t = (x - a.x) / (b.x - a.x);
            return Point2{x, a.y + t * (b.y - a.y)};
        };
    };
    auto at_y = [](double y) {
        return [y](Point2 a, Point2 b) {
            const double t = (y - a.y) / (b.y - a.y);
            return Point2{a.x + t * (b.x - a.x), y};
        };
    };
    poly = clip_half(poly, [&](Point2 p) { return p.x >= box.x0; }, at_x(box.x0));
    if (poly.empty()) return poly;
    poly = clip_half(poly, [&](Point2 p) { return p.x <= box.x1; }, at_x(box.x1));
    if (poly.empty()) return poly;
    poly = clip_half(poly, [&](Point2 p) { return p.y >= box.y0; }, at_y(box.y0));
    if (poly.empty()) return poly;
    poly = clip_half(poly, [&](Point2 p) { return p.y <= box.y1; }, at_y(box.y1));
    return poly;
}

Point2 closest_on_segment(Point2 p, Point2 a, Point2 b) {
    const Point2 ab = b - a;
    const double len2 = dot(ab, ab);
    if (len2 == 0.0) return a;
    const double t = std::clamp(dot(p - a, ab) / len2, 0.0, 1.0);
    return a + t * ab;
}

// Feasible center closest to the barycenter, if any.
std::optional<Point2> feasible_center(const Triangle& tau, double D, const Rect& r,
                                      double margin) {
    const Point2 b = barycenter(tau);
    const Box box = center_box(tau, D, r);
    if (box.empty()) return std::nullopt;
    if (b.x >= box.x0 && b.x <= box.x1 && b.y >= box.y0 && b.y <= box.y1) return b;
    const Triangle region = homothety(tau, b, margin);
    const auto poly = clip({region.begin(), region.end()}, box);
    if (poly.empty()) return std::nullopt;
    Point2 best = poly.front();
    double best_d = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < poly.size(); ++i) {
        const Point2 q = closest_on_segment(b, poly[i], poly[(i + 1) % poly.size()]);
        const double d = distance(q, b);
        if (d < best_d) {
            best_d = d;
            best = q;
        }
    }
    return best;
}

}  // namespace

Patch oversample_patch(const Mesh& mesh, std::size_t element_id, double dilation,
                       const Rect& domain, const PatchOptions& options) {
    if (element_id >= mesh.num_elements()) {
        throw InvalidArgument("oversample_patch: element id " + std::to_string(element_id) +
                              " out of range");
    }
    if (!(dilation >= 1.0)) throw InvalidArgument("oversample_patch: dilation must be >= 1");
    const Triangle tau = mesh.triangle(element_id);
    const double h_tau = diameter(tau);

    Patch patch;
    patch.element_id = element_id;
    double D = dilation;
    std::optional<Point2> center;
    if (D == 1.0) {
        center = barycenter(tau);
    } else {
        center = feasible_center(tau, D, domain, options.center_margin);
        if (!center) {
            // largest feasible dilation by bisection; feasibility is monotone in D
            double lo = 1.0;
            double hi = D;
            for (int it = 0; it < 100 && hi - lo > 1e-14 * hi; ++it) {
                const double mid = 0.5 * (lo + hi);
                if (feasible_center(tau, mid, domain, options.center_margin)) {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            D = lo;
            center = (D > 1.0) ? feasible_center(tau, D, domain, options.center_margin)
                               : std::optional<Point2>(barycenter(tau));
            if (!center) center = barycenter(tau);
            patch.clipped = true;
        }
        if (!patch.clipped && distance(*center, barycenter(tau)) > 0.0) patch.clipped = true;
    }
    patch.center = *center;
    patch.dilation = D;
    patch.simplex = homothety(tau, *center, D);
    if (D == 1.0) patch.simplex = tau;
    if (!inside_rect(patch.simplex, domain)) {
        throw AssemblyError("oversample_patch: element " + std::to_string(element_id) +
                            " has no admissible patch inside the domain");
    }
    patch.gamma1 = diameter(patch.simplex) / h_tau;
    patch.gamma2 = boundary_gap(tau, patch.simplex) / h_tau;
    return patch;
}

int refinement_levels(const Triangle& parent, double target_h) {
    if (!(target_h > 0.0)) throw InvalidArgument("sub_triangulate: target_h must be positive");
    const double diam = diameter(parent);
    if (target_h >= diam) return 0;
    // tolerance absorbs round-off when diam / target_h is an exact power of two
    return static_cast<int>(std::ceil(std::log2(diam / target_h) - 1e-9));
}

LocalMesh sub_triangulate_levels(const Triangle& parent, int levels) {
    if (levels < 0 || levels > 14) throw InvalidArgument("sub_triangulate: bad level count");
    if (!(signed_area(parent) > 0.0)) {
        throw InvalidArgument("sub_triangulate: parent simplex is degenerate or clockwise");
    }
    const int n = 1 << levels;
    LocalMesh local;
    local.parent = parent;
    local.levels = levels;
    Mesh& mesh = local.mesh;
    const auto nv = static_cast<std::size_t>(n + 1) * (n + 2) / 2;
    mesh.vertices.reserve(nv);
    mesh.boundary.reserve(nv);
    std::vector<std::uint32_t> row_offset(n + 2, 0);
    for (int j = 0; j <= n; ++j) row_offset[j + 1] = row_offset[j] + (n + 1 - j);
    const Point2 a = parent[0];
    const Point2 e1 = parent[1] - parent[0];
    const Point2 e2 = parent[2] - parent[0];
    for (int j = 0; j <= n; ++j) {
        for (int i = 0; i + j <= n; ++i) {
            Point2 p;
            if (i == n) {
                p = parent[1];
            } else if (j == n) {
                p = parent[2];
            } else {
                const double s = static_cast<double>(i) / n;
                const double t = static_cast<double>(j) / n;
                p = a + s * e1 + t * e2;
            }
            const bool on_boundary = (i == 0 || j == 0 || i + j == n);
            const auto index = static_cast<std::uint32_t>(mesh.vertices.size());
            mesh.vertices.push_back(p);
            mesh.boundary.push_back(on_boundary);
            if (on_boundary) {
                const double s = static_cast<double>(i) / n;
                const double t = static_cast<double>(j) / n;
                local.trace_map.push_back({index, {1.0 - s - t, s, t}});
            }
        }
    }
    auto id = [&](int i, int j) { return row_offset[j] + static_cast<std::uint32_t>(i); };
    mesh.elements.reserve(static_cast<std::size_t>(n) * n);
    for (int j = 0; j < n; ++j) {
        for (int i = 0; i + j < n; ++i) {
            mesh.elements.push_back({id(i, j), id(i + 1, j), id(i, j + 1)});
            if (i + j + 1 < n) mesh.elements.push_back({id(i + 1, j), id(i + 1, j + 1), id(i, j + 1)});
        }
    }
    compute_quality(mesh);
    local.core_vertices = mesh.num_vertices();
    local.core_elements = mesh.num_elements();
    return local;
}

LocalMesh sub_triangulate(const Triangle& parent, double target_h) {
    return sub_triangulate_levels(parent, refinement_levels(parent, target_h));
}

LocalMesh extend_to_patch(const LocalMesh& core, const Patch& patch) {
    if (core.core_vertices != core.mesh.num_vertices()) {
        throw InvalidArgument("extend_to_patch: input is already extended");
    }
    const double D = patch.dilation;
    LocalMesh out;
    out.levels = core.levels;
    out.parent = patch.simplex;
    out.core_vertices = core.mesh.num_vertices();
    out.core_elements = core.mesh.num_elements();
    Mesh& mesh = out.mesh;
    mesh.vertices = core.mesh.vertices;
    mesh.elements = core.mesh.elements;
    mesh.boundary.assign(mesh.vertices.size(), 0);

    const Triangle& tau = core.parent;
    const int n = 1 << core.levels;
    if (D <= 1.0 + 1e-12) {
        mesh.boundary = core.mesh.boundary;
        out.trace_map = core.trace_map;
        out.parent = tau;
        compute_quality(mesh);
        return out;
    }

    // Ring 0: boundary of the core lattice, edge k runs from vertex k to k+1.
    std::vector<std::uint32_t> row_offset(n + 2, 0);
    for (int j = 0; j <= n; ++j) row_offset[j + 1] = row_offset[j] + (n + 1 - j);
    auto id = [&](int i, int j) { return row_offset[j] + static_cast<std::uint32_t>(i); };
    using Edge = std::vector<std::uint32_t>;
    std::array<Edge, 3> inner;
    for (int s = 0; s <= n; ++s) {
        inner[0].push_back(id(s, 0));
        inner[1].push_back(id(n - s, s));
        inner[2].push_back(id(0, n - s));
    }

    // Layer step: ring thickness next to edge k is ds * dist(c, edge k); keep it
    // at most the fine altitude towards that edge.
    const Point2 c = patch.center;
    double ds = std::numeric_limits<double>::infinity();
    for (int k = 0; k < 3; ++k) {
        const Point2 a = tau[k];
        const Point2 b = tau[(k + 1) % 3];
        const double altitude = line_distance(tau[(k + 2) % 3], a, b);
        const double dist = line_distance(c, a, b);
        ds = std::min(ds, (altitude / n) / dist);
    }
    const int layers = std::max(1, static_cast<int>(std::ceil((D - 1.0) / ds - 1e-9)));

    int segments = n;
    for (int l = 1; l <= layers; ++l) {
        const double s = (l == layers) ? D : 1.0 + (D - 1.0) * l / layers;
        const Triangle ring = (l == layers) ? patch.simplex : homothety(tau, c, s);
        const int next_segments =
            std::max(segments, static_cast<int>(std::ceil(s * n - 1e-9)));
        std::array<std::uint32_t, 3> corner;
        for (int k = 0; k < 3; ++k) {
            corner[k] = static_cast<std::uint32_t>(mesh.vertices.size());
            mesh.vertices.push_back(ring[k]);
            mesh.boundary.push_back(l == layers);
        }
        std::array<Edge, 3> outer;
        for (int k = 0; k < 3; ++k) {
            const Point2 a = ring[k];
            const Point2 b = ring[(k + 1) % 3];
            outer[k].push_back(corner[k]);
            for (int q = 1; q < next_segments; ++q) {
                outer[k].push_back(static_cast<std::uint32_t>(mesh.vertices.size()));
                mesh.vertices.push_back(a + (static_cast<double>(q) / next_segments) * (b - a));
                mesh.boundary.push_back(l == layers);
            }
            outer[k].push_back(corner[(k + 1) % 3]);
        }
        // zipper triangulation of each trapezoidal strip
        for (int k = 0; k < 3; ++k) {
            const Edge& in = inner[k];
            const Edge& ou = outer[k];
            const auto ni = static_cast<std::ptrdiff_t>(in.size()) - 1;
            const auto no = static_cast<std::ptrdiff_t>(ou.size()) - 1;
            std::ptrdiff_t p = 0;
            std::ptrdiff_t q = 0;
            auto emit = [&](std::uint32_t a, std::uint32_t b, std::uint32_t d) {
                std::array<std::uint32_t, 3> el{a, b, d};
                const Triangle t{mesh.vertices[a], mesh.vertices[b], mesh.vertices[d]};
                if (signed_area(t) < 0.0) std::swap(el[1], el[2]);
                mesh.elements.push_back(el);
            };
            while (p < ni || q < no) {
                const bool advance_inner =
                    (q == no) || (p < ni && (p + 1) * no < (q + 1) * ni);
                if (advance_inner) {
                    emit(in[p], in[p + 1], ou[q]);
                    ++p;
                } else {
                    emit(in[p], ou[q + 1], ou[q]);
                    ++q;
                }
            }
        }
        inner = std::move(outer);
        segments = next_segments;
    }
    for (std::uint32_t v = 0; v < mesh.vertices.size(); ++v) {
        if (mesh.boundary[v]) out.trace_map.push_back({v, barycentric(patch.simplex, mesh.vertices[v])});
    }
    compute_quality(mesh);
    return out;
}

void write_msh2(std::ostream& out, const Mesh& mesh) {
    out << "MSH2 " << mesh.num_vertices() << ' ' << mesh.num_elements() << '\n';
    const auto old_precision = out.precision(17);
    for (const Point2& p : mesh.vertices) out << "v " << p.x << ' ' << p.y << '\n';
    for (const auto& e : mesh.elements) out << "e " << e[0] << ' ' << e[1] << ' ' << e[2] << '\n';
    for (std::size_t v = 0; v < mesh.num_vertices(); ++v) {
        if (mesh.boundary[v]) out << "b " << v << '\n';
    }
    out.precision(old_precision);
}

Mesh read_msh2(std::istream& in) {
    std::string tag;
    std::size_t nv = 0;
    std::size_t ne = 0;
    if (!(in >> tag >> nv >> ne) || tag != "MSH2") throw InvalidArgument("read_msh2: bad header");
    Mesh mesh;
    mesh.vertices.reserve(nv);
    mesh.elements.reserve(ne);
    mesh.boundary.assign(nv, 0);
    while (in >> tag) {
        if (tag == "v") {
            Point2 p;
            in >> p.x >> p.y;
            mesh.vertices.push_back(p);
        } else if (tag == "e") {
            std::array<std::uint32_t, 3> e{};
            in >> e[0] >> e[1] >> e[2];
            mesh.elements.push_back(e);
        } else if (tag == "b") {
            std::size_t v = 0;
            in >> v;
            if (v >= nv) throw InvalidArgument("read_msh2: boundary index out of range");
            mesh.boundary[v] = 1;
        } else {
            throw InvalidArgument("read_msh2: unknown record '" + tag + "'");
        }
        if (!in) throw InvalidArgument("read_msh2: truncated record");
    }
    if (mesh.vertices.size() != nv || mesh.elements.size() != ne) {
        throw InvalidArgument("read_msh2: record counts do not match header");
    }
    compute_quality(mesh);
    return mesh;
}

std::uint64_t mesh_hash(const Mesh& mesh) {
    Fnv1a h;
    for (const Point2& p : mesh.vertices) {
        h.value(p.x);
        h.value(p.y);
    }
    for (const auto& e : mesh.elements) h.bytes(e.data(), sizeof e);
    h.bytes(mesh.boundary.data(), mesh.boundary.size());
    return h.digest();
}

}  // namespace msfem
