#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <sstream>

#include "msfem/errors.hpp"
#include "msfem/mesh.hpp"

using namespace msfem;

namespace {

double segment_distance(Point2 p, Point2 a, Point2 b) {
    const Point2 ab = b - a;
    double t = dot(p - a, ab) / dot(ab, ab);
    t = std::clamp(t, 0.0, 1.0);
    return distance(p, a + t * ab);
}

// Brute force: sample both boundaries densely and take the closest pair.
double sampled_gap(const Triangle& in, const Triangle& out) {
    double best = 1e300;
    const int n = 2000;
    for (int e = 0; e < 3; ++e) {
        for (int k = 0; k <= n; ++k) {
            const double t = static_cast<double>(k) / n;
            const Point2 p = in[e] + t * (in[(e + 1) % 3] - in[e]);
            for (int f = 0; f < 3; ++f) best = std::min(best, segment_distance(p, out[f], out[(f + 1) % 3]));
        }
    }
    return best;
}

bool strictly_inside(const Triangle& t, Point2 p) {
    const auto b = barycentric(t, p);
    return b[0] > -1e-12 && b[1] > -1e-12 && b[2] > -1e-12;
}

}  // namespace

TEST(Mesh, SmallestGrid) {
    const Mesh m = build_structured_triangulation(Rect::unit_square(), 1);
    EXPECT_EQ(m.num_elements(), 2u);
    EXPECT_EQ(m.num_vertices(), 4u);
    for (std::size_t v = 0; v < 4; ++v) EXPECT_TRUE(m.is_boundary(v));
}

TEST(Mesh, FourByFourCountsAndQuality) {
    const Mesh m = build_structured_triangulation(Rect::unit_square(), 4);
    EXPECT_EQ(m.num_elements(), 32u);
    EXPECT_EQ(m.num_vertices(), 25u);
    EXPECT_NEAR(m.total_area(), 1.0, 1e-12);
    EXPECT_NEAR(m.h, std::sqrt(2.0) / 4, 1e-15);
    // every element has the same h/rho, computed independently from side lengths
    std::vector<double> ratios;
    for (std::size_t e = 0; e < m.num_elements(); ++e) {
        const Triangle t = m.triangle(e);
        const double a = distance(t[0], t[1]), b = distance(t[1], t[2]), c = distance(t[2], t[0]);
        const double s = 0.5 * (a + b + c);
        const double area = std::sqrt(s * (s - a) * (s - b) * (s - c));
        const double rho = 2.0 * area / s;
        ratios.push_back(std::max({a, b, c}) / rho);
        EXPECT_GT(signed_area(t), 0.0);
    }
    for (double r : ratios) EXPECT_NEAR(r, ratios.front(), 1e-12);
    EXPECT_NEAR(m.sigma0, ratios.front(), 1e-12);
    EXPECT_NO_THROW(check_invariants(m, 1.0));
    int boundary = 0;
    for (std::size_t v = 0; v < m.num_vertices(); ++v) boundary += m.is_boundary(v);
    EXPECT_EQ(boundary, 16);
}

TEST(Mesh, RejectsZeroSubdivisions) {
    EXPECT_THROW(build_structured_triangulation(Rect::unit_square(), 0), InvalidArgument);
}

TEST(Mesh, RectangularDomainTiles) {
    const Rect r{-1.0, 0.5, 2.0, 1.5};
    const Mesh m = build_structured_triangulation(r, 3);
    EXPECT_NEAR(m.total_area(), 3.0, 1e-12);
    EXPECT_NO_THROW(check_invariants(m, 3.0));
}

TEST(Mesh, LocateFindsContainingElement) {
    const Mesh m = build_structured_triangulation(Rect::unit_square(), 8);
    for (Point2 p : {Point2{0.01, 0.02}, Point2{0.53, 0.77}, Point2{0.999, 0.001}, Point2{1.0, 1.0}}) {
        const auto [e, b] = locate(m, p);
        const Triangle t = m.triangle(e);
        for (double w : b) EXPECT_GE(w, -1e-12);
        const Point2 q = b[0] * t[0] + b[1] * t[1] + b[2] * t[2];
        EXPECT_NEAR(q.x, p.x, 1e-12);
        EXPECT_NEAR(q.y, p.y, 1e-12);
    }
}

TEST(Patch, InteriorDilationTwo) {
    const Mesh m = build_structured_triangulation(Rect::unit_square(), 4);
    const std::size_t e = 2 * (4 * 1 + 1);  // square (1,1), lower element
    const Patch p = oversample_patch(m, e, 2.0, Rect::unit_square());
    const Triangle tau = m.triangle(e);
    EXPECT_FALSE(p.clipped);
    EXPECT_NEAR(p.gamma1, 2.0, 1e-12);
    const double gap = sampled_gap(tau, p.simplex);
    EXPECT_NEAR(p.gamma2 * diameter(tau), gap, 1e-4 * diameter(tau));
    EXPECT_GT(p.gamma2, 0.0);
    for (const auto& v : tau) EXPECT_TRUE(strictly_inside(p.simplex, v));
    for (const auto& v : p.simplex) EXPECT_TRUE(Rect::unit_square().contains(v));
}

TEST(Patch, NearIdentityDilation) {
    const Mesh m = build_structured_triangulation(Rect::unit_square(), 4);
    const Patch p = oversample_patch(m, 10, 1.0 + 1e-9, Rect::unit_square());
    EXPECT_LT(p.gamma2, 1e-8);
    for (const auto& v : m.triangle(10)) EXPECT_TRUE(strictly_inside(p.simplex, v));
}

TEST(Patch, CornerElementIsClipped) {
    const Mesh m = build_structured_triangulation(Rect::unit_square(), 4);
    const Patch p = oversample_patch(m, 0, 3.0, Rect::unit_square());
    EXPECT_TRUE(p.clipped);
    for (const auto& v : p.simplex) EXPECT_TRUE(Rect::unit_square().contains(v, 1e-12));
    for (const auto& v : m.triangle(0)) EXPECT_TRUE(strictly_inside(p.simplex, v));
}

TEST(Patch, AllElementsStayInsideDomain) {
    const Mesh m = build_structured_triangulation(Rect::unit_square(), 8);
    for (std::size_t e = 0; e < m.num_elements(); ++e) {
        const Patch p = oversample_patch(m, e, 2.0, Rect::unit_square());
        for (const auto& v : p.simplex) EXPECT_TRUE(Rect::unit_square().contains(v, 1e-12));
        for (const auto& v : m.triangle(e)) EXPECT_TRUE(strictly_inside(p.simplex, v));
        if (!p.clipped) EXPECT_NEAR(p.gamma1, 2.0, 1e-12);
    }
}

TEST(Patch, OutOfRangeElement) {
    const Mesh m = build_structured_triangulation(Rect::unit_square(), 2);
    EXPECT_THROW(oversample_patch(m, 8, 2.0, Rect::unit_square()), InvalidArgument);
}

TEST(SubTriangulate, TargetEqualToDiameterKeepsParent) {
    const Triangle t{Point2{0, 0}, Point2{1, 0}, Point2{0, 1}};
    const LocalMesh lm = sub_triangulate(t, diameter(t));
    EXPECT_EQ(lm.mesh.num_elements(), 1u);
}

TEST(SubTriangulate, TwoLevels) {
    const Triangle t{Point2{0, 0}, Point2{1, 0}, Point2{0, 1}};
    const LocalMesh lm = sub_triangulate_levels(t, 2);
    EXPECT_EQ(lm.mesh.num_elements(), 16u);
    EXPECT_EQ(lm.mesh.num_vertices(), 15u);
    EXPECT_NEAR(lm.mesh.total_area(), 0.5, 1e-12);
}

TEST(SubTriangulate, PreservesShapeRegularityAndTarget) {
    const Triangle t{Point2{0.2, 0.1}, Point2{0.9, 0.3}, Point2{0.4, 0.8}};
    const double parent_ratio = diameter(t) / inscribed_diameter(t);
    const LocalMesh lm = sub_triangulate(t, 0.05);
    EXPECT_LE(lm.mesh.h, 0.05 + 1e-12);
    EXPECT_NEAR(lm.mesh.total_area(), signed_area(t), 1e-12 * signed_area(t) + 1e-15);
    for (std::size_t e = 0; e < lm.mesh.num_elements(); ++e) {
        const Triangle c = lm.mesh.triangle(e);
        EXPECT_NEAR(diameter(c) / inscribed_diameter(c), parent_ratio, 1e-9);
    }
    // trace map covers exactly the boundary vertices and lies on the parent boundary
    std::size_t nb = 0;
    for (std::size_t v = 0; v < lm.mesh.num_vertices(); ++v) nb += lm.mesh.is_boundary(v);
    EXPECT_EQ(lm.trace_map.size(), nb);
    for (const auto& [v, b] : lm.trace_map) {
        EXPECT_NEAR(std::min({b[0], b[1], b[2]}), 0.0, 1e-12);
        const Point2 q = b[0] * t[0] + b[1] * t[1] + b[2] * t[2];
        EXPECT_NEAR(distance(q, lm.mesh.vertices[v]), 0.0, 1e-12);
    }
}

TEST(SubTriangulate, RejectsNonPositiveTarget) {
    const Triangle t{Point2{0, 0}, Point2{1, 0}, Point2{0, 1}};
    EXPECT_THROW(sub_triangulate(t, 0.0), InvalidArgument);
}

TEST(PatchMesh, ExtensionKeepsCoreAndTilesPatch) {
    const Mesh m = build_structured_triangulation(Rect::unit_square(), 4);
    for (std::size_t e : {std::size_t{0}, std::size_t{11}, std::size_t{31}}) {
        const Patch p = oversample_patch(m, e, 2.0, Rect::unit_square());
        const LocalMesh core = sub_triangulate_levels(m.triangle(e), 3);
        const LocalMesh ext = extend_to_patch(core, p);
        EXPECT_EQ(ext.core_vertices, core.mesh.num_vertices());
        EXPECT_EQ(ext.core_elements, core.mesh.num_elements());
        for (std::size_t v = 0; v < core.mesh.num_vertices(); ++v) {
            EXPECT_EQ(ext.mesh.vertices[v], core.mesh.vertices[v]);
        }
        EXPECT_NEAR(ext.mesh.total_area(), signed_area(p.simplex), 1e-12);
        EXPECT_NO_THROW(check_invariants(ext.mesh, signed_area(p.simplex)));
        // boundary vertices lie on the boundary of S
        for (std::size_t v = 0; v < ext.mesh.num_vertices(); ++v) {
            const auto b = barycentric(p.simplex, ext.mesh.vertices[v]);
            const double mn = std::min({b[0], b[1], b[2]});
            if (ext.mesh.is_boundary(v)) {
                EXPECT_NEAR(mn, 0.0, 1e-12);
            } else {
                EXPECT_GT(mn, 1e-12);
            }
        }
    }
}

TEST(MeshIo, GoldenSmallestGrid) {
    const Mesh m = build_structured_triangulation(Rect::unit_square(), 1);
    std::ostringstream out;
    write_msh2(out, m);
    const std::string expected =
        "MSH2 4 2\n"
        "v 0 0\nv 1 0\nv 0 1\nv 1 1\n"
        "e 0 1 2\ne 3 2 1\n"
        "b 0\nb 1\nb 2\nb 3\n";
    EXPECT_EQ(out.str(), expected);
}

TEST(MeshIo, RoundTrip) {
    const Mesh m = build_structured_triangulation(Rect{0.0, 0.0, 1.0, 0.7}, 5);
    std::ostringstream out;
    write_msh2(out, m);
    std::istringstream in(out.str());
    const Mesh r = read_msh2(in);
    EXPECT_EQ(r.vertices, m.vertices);
    EXPECT_EQ(r.elements, m.elements);
    EXPECT_EQ(r.boundary, m.boundary);
    EXPECT_EQ(mesh_hash(r), mesh_hash(m));
}
