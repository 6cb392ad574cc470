#include "msfem/fem.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>

#include "msfem/errors.hpp"

namespace msfem {

FeFunction::FeFunction(std::shared_ptr<const Mesh> mesh_, int m_)
    : mesh(std::move(mesh_)), m(m_), values(mesh->num_vertices() * static_cast<std::size_t>(m_), 0.0) {}

FeFunction::FeFunction(std::shared_ptr<const Mesh> mesh_, int m_, std::vector<double> values_)
    : mesh(std::move(mesh_)), m(m_), values(std::move(values_)) {
    if (values.size() != mesh->num_vertices() * static_cast<std::size_t>(m)) {
        throw InvalidArgument("FeFunction: value count must equal m * vertex count");
    }
}

FeFunction interpolate(std::shared_ptr<const Mesh> mesh, const ScalarSource& f) {
    FeFunction u(mesh, 1);
    for (std::size_t v = 0; v < mesh->num_vertices(); ++v) u.values[v] = f(mesh->vertices[v]);
    return u;
}

FeFunction interpolate(std::shared_ptr<const Mesh> mesh, int m, const VectorSource& f) {
    FeFunction u(mesh, m);
    for (std::size_t v = 0; v < mesh->num_vertices(); ++v) {
        f(mesh->vertices[v], std::span<double>(u.values).subspan(v * m, static_cast<std::size_t>(m)));
    }
    return u;
}

namespace {

constexpr double kA4 = 0.445948490915965;
constexpr double kB4 = 0.091576213509771;
constexpr double kW4a = 0.223381589678011;
constexpr double kW4b = 0.109951743655322;

const std::array<QuadraturePoint, 1> kRule1{{{{1.0 / 3, 1.0 / 3, 1.0 / 3}, 1.0}}};
const std::array<QuadraturePoint, 3> kRule2{{
    {{2.0 / 3, 1.0 / 6, 1.0 / 6}, 1.0 / 3},
    {{1.0 / 6, 2.0 / 3, 1.0 / 6}, 1.0 / 3},
    {{1.0 / 6, 1.0 / 6, 2.0 / 3}, 1.0 / 3},
}};
const std::array<QuadraturePoint, 6> kRule4{{
    {{kA4, kA4, 1.0 - 2 * kA4}, kW4a},
    {{kA4, 1.0 - 2 * kA4, kA4}, kW4a},
    {{1.0 - 2 * kA4, kA4, kA4}, kW4a},
    {{kB4, kB4, 1.0 - 2 * kB4}, kW4b},
    {{kB4, 1.0 - 2 * kB4, kB4}, kW4b},
    {{1.0 - 2 * kB4, kB4, kB4}, kW4b},
}};

void check_same_mesh(const FeFunction& u, const FeFunction& v) {
    if (!u.mesh || !v.mesh) throw InvalidArgument("function has no mesh");
    if (u.mesh != v.mesh &&
        (u.mesh->num_vertices() != v.mesh->num_vertices() || u.mesh->num_elements() != v.mesh->num_elements())) {
        throw InvalidArgument("functions live on different meshes");
    }
    if (u.m != v.m) throw InvalidArgument("functions have different component counts");
}

}  // namespace

std::span<const QuadraturePoint> triangle_rule(int order) {
    if (order <= 1) return kRule1;
    if (order == 2) return kRule2;
    if (order <= 4) return kRule4;
    throw InvalidArgument("triangle_rule: orders above 4 are not provided");
}

Point2 map_to_triangle(const Triangle& t, const Barycentric& b) {
    return {b[0] * t[0].x + b[1] * t[1].x + b[2] * t[2].x, b[0] * t[0].y + b[1] * t[1].y + b[2] * t[2].y};
}

SparseMatrix assembly_pattern(const Mesh& mesh, int m) {
    const std::size_t nv = mesh.num_vertices();
    std::vector<std::vector<std::uint32_t>> adj(nv);
    for (const auto& e : mesh.elements) {
        for (auto a : e)
            for (auto b : e) adj[a].push_back(b);
    }
    std::vector<std::vector<std::uint32_t>> rows(nv * static_cast<std::size_t>(m));
    for (std::size_t v = 0; v < nv; ++v) {
        auto& nb = adj[v];
        std::sort(nb.begin(), nb.end());
        nb.erase(std::unique(nb.begin(), nb.end()), nb.end());
        for (int a = 0; a < m; ++a) {
            auto& row = rows[v * m + a];
            row.reserve(nb.size() * m);
            for (auto w : nb)
                for (int b = 0; b < m; ++b) row.push_back(static_cast<std::uint32_t>(w * m + b));
        }
        std::vector<std::uint32_t>().swap(nb);
    }
    return SparseMatrix::from_pattern(nv * static_cast<std::size_t>(m), std::move(rows));
}

CoeffTensor element_coefficient(const Triangle& t, const CoefficientField& field, double eps,
                                int quadrature_order) {
    if (std::isinf(eps)) {
        if (field.kind() != FieldKind::constant) {
            throw InvalidArgument("eps = infinity requires a constant coefficient field");
        }
        return field.eval({0.0, 0.0});
    }
    if (!(eps > 0.0)) throw InvalidArgument("eps must be positive");
    const auto rule = triangle_rule(quadrature_order);
    if (rule.size() == 1) return field.eval((1.0 / eps) * map_to_triangle(t, rule[0].bary));
    CoeffTensor avg = CoeffTensor::zero(field.m());
    for (const auto& q : rule) {
        const CoeffTensor A = field.eval((1.0 / eps) * map_to_triangle(t, q.bary));
        for (int r = 0; r < avg.dm; ++r)
            for (int c = 0; c < avg.dm; ++c) avg(r, c) += q.weight * A(r, c);
    }
    return avg;
}

SparseMatrix assemble_stiffness(const Mesh& mesh, const CoefficientField& field, double eps,
                                int quadrature_order) {
    const int m = field.m();
    SparseMatrix K = assembly_pattern(mesh, m);
    const bool scalar = field.is_scalar_isotropic() && !std::isinf(eps);
    if (!scalar && std::isinf(eps) && field.kind() != FieldKind::constant) {
        throw InvalidArgument("eps = infinity requires a constant coefficient field");
    }
    if (!std::isinf(eps) && !(eps > 0.0)) throw InvalidArgument("assemble_stiffness: eps must be positive");
    const auto rule = triangle_rule(quadrature_order);
    for (std::size_t e = 0; e < mesh.num_elements(); ++e) {
        const Triangle t = mesh.triangle(e);
        const double area = signed_area(t);
        if (!(area >= 1e-14 * diameter(t) * diameter(t)) || area < 1e-300) {
            throw AssemblyError("assemble_stiffness: element " + std::to_string(e) + " is degenerate");
        }
        const auto g = barycentric_gradients(t);
        const auto& el = mesh.elements[e];
        if (scalar) {
            double a = 0.0;
            for (const auto& q : rule) a += q.weight * field.eval_scalar((1.0 / eps) * map_to_triangle(t, q.bary));
            for (int i = 0; i < 3; ++i) {
                for (int j = 0; j < 3; ++j) {
                    const double kij = area * a * dot(g[i], g[j]);
                    for (int c = 0; c < m; ++c) K.add(el[i] * m + c, el[j] * m + c, kij);
                }
            }
            continue;
        }
        const CoeffTensor A = element_coefficient(t, field, eps, quadrature_order);
        for (int i = 0; i < 3; ++i) {
            const double gi[2] = {g[i].x, g[i].y};
            for (int j = 0; j < 3; ++j) {
                const double gj[2] = {g[j].x, g[j].y};
                for (int al = 0; al < m; ++al) {
                    for (int be = 0; be < m; ++be) {
                        double s = 0.0;
                        for (int p = 0; p < kDim; ++p)
                            for (int q = 0; q < kDim; ++q) s += gi[p] * A(al * kDim + p, be * kDim + q) * gj[q];
                        K.add(el[i] * m + al, el[j] * m + be, area * s);
                    }
                }
            }
        }
    }
    return K;
}

std::vector<double> assemble_load(const Mesh& mesh, const ScalarSource& f, int quadrature_order) {
    return assemble_load(mesh, 1, [&](Point2 x, std::span<double> out) { out[0] = f(x); }, quadrature_order);
}

std::vector<double> assemble_load(const Mesh& mesh, int m, const VectorSource& f, int quadrature_order) {
    std::vector<double> b(mesh.num_vertices() * static_cast<std::size_t>(m), 0.0);
    const auto rule = triangle_rule(quadrature_order);
    std::array<double, kMaxEquations> fx{};
    for (std::size_t e = 0; e < mesh.num_elements(); ++e) {
        const Triangle t = mesh.triangle(e);
        const double area = signed_area(t);
        const auto& el = mesh.elements[e];
        for (const auto& q : rule) {
            f(map_to_triangle(t, q.bary), std::span<double>(fx.data(), static_cast<std::size_t>(m)));
            for (int i = 0; i < 3; ++i)
                for (int c = 0; c < m; ++c) b[el[i] * m + c] += area * q.weight * q.bary[i] * fx[c];
        }
    }
    return b;
}

std::vector<double> DirichletSystem::expand(std::span<const double> reduced) const {
    if (reduced.size() != free_dofs.size()) throw InvalidArgument("expand: reduced vector has wrong size");
    std::vector<double> x = full;
    for (std::size_t k = 0; k < free_dofs.size(); ++k) x[free_dofs[k]] = reduced[k];
    return x;
}

DirichletSystem apply_dirichlet(const SparseMatrix& K, std::span<const double> rhs, const Mesh& mesh, int m,
                                std::span<const double> boundary_values) {
    const std::size_t n = mesh.num_vertices() * static_cast<std::size_t>(m);
    if (K.rows() != n || rhs.size() != n || boundary_values.size() != n) {
        throw InvalidArgument("apply_dirichlet: sizes do not match mesh and component count");
    }
    DirichletSystem sys;
    sys.full.assign(n, 0.0);
    std::vector<char> fixed(n, 0);
    for (std::size_t v = 0; v < mesh.num_vertices(); ++v) {
        if (!mesh.is_boundary(v)) continue;
        for (int c = 0; c < m; ++c) {
            const double g = boundary_values[v * m + c];
            if (std::isnan(g)) {
                throw InvalidArgument("apply_dirichlet: missing boundary value at vertex " + std::to_string(v));
            }
            sys.full[v * m + c] = g;
            fixed[v * m + c] = 1;
        }
    }
    std::vector<std::uint32_t> fixed_dofs;
    for (std::size_t i = 0; i < n; ++i) {
        if (fixed[i]) {
            fixed_dofs.push_back(static_cast<std::uint32_t>(i));
        } else {
            sys.free_dofs.push_back(static_cast<std::uint32_t>(i));
        }
    }
    sys.K = K.submatrix(sys.free_dofs, sys.free_dofs);
    // rhs_I - K_IB g_B
    const auto ptr = K.row_ptr();
    const auto col = K.col_idx();
    const auto val = K.values();
    sys.rhs.resize(sys.free_dofs.size());
    for (std::size_t k = 0; k < sys.free_dofs.size(); ++k) {
        const std::size_t r = sys.free_dofs[k];
        double s = rhs[r];
        for (std::size_t p = ptr[r]; p < ptr[r + 1]; ++p)
            if (fixed[col[p]]) s -= val[p] * sys.full[col[p]];
        sys.rhs[k] = s;
    }
    return sys;
}

std::vector<double> boundary_values_from(const Mesh& mesh, int m, const VectorSource& g) {
    std::vector<double> out(mesh.num_vertices() * static_cast<std::size_t>(m),
                            std::numeric_limits<double>::quiet_NaN());
    for (std::size_t v = 0; v < mesh.num_vertices(); ++v) {
        if (mesh.is_boundary(v)) g(mesh.vertices[v], std::span<double>(out).subspan(v * m, static_cast<std::size_t>(m)));
    }
    return out;
}

std::vector<double> zero_boundary_values(const Mesh& mesh, int m) {
    return std::vector<double>(mesh.num_vertices() * static_cast<std::size_t>(m), 0.0);
}

FeSolve solve_fe(std::shared_ptr<const Mesh> mesh, const CoefficientField& field, double eps,
                 const VectorSource& f, std::span<const double> boundary_values, const SolveOptions& options) {
    const int m = field.m();
    const SparseMatrix K = assemble_stiffness(*mesh, field, eps);
    const std::vector<double> b = assemble_load(*mesh, m, f);
    const DirichletSystem sys = apply_dirichlet(K, b, *mesh, m, boundary_values);
    FeSolve out;
    std::vector<double> x;
    if (sys.free_dofs.empty()) {
        out.report.method = "none";
    } else {
        SolveResult r = solve_sparse(sys.K, sys.rhs, options);
        x = std::move(r.x);
        out.report = r.report;
    }
    out.u = FeFunction(mesh, m, sys.expand(x));
    return out;
}

Point2 element_gradient(const FeFunction& u, std::size_t e, int component) {
    const Triangle t = u.mesh->triangle(e);
    const auto g = barycentric_gradients(t);
    const auto& el = u.mesh->elements[e];
    Point2 grad{};
    for (int i = 0; i < 3; ++i) grad = grad + u.value(el[i], component) * g[i];
    return grad;
}

double h1_seminorm(const FeFunction& u) {
    double s = 0.0;
    for (std::size_t e = 0; e < u.mesh->num_elements(); ++e) {
        const double area = signed_area(u.mesh->triangle(e));
        for (int c = 0; c < u.m; ++c) {
            const Point2 g = element_gradient(u, e, c);
            s += area * dot(g, g);
        }
    }
    return std::sqrt(s);
}

double l2_norm(const FeFunction& u) {
    // exact for P1: int u^2 = |T|/6 (sum u_i^2 + sum_{i<j} u_i u_j)
    double s = 0.0;
    for (std::size_t e = 0; e < u.mesh->num_elements(); ++e) {
        const double area = signed_area(u.mesh->triangle(e));
        const auto& el = u.mesh->elements[e];
        for (int c = 0; c < u.m; ++c) {
            const double a = u.value(el[0], c);
            const double b = u.value(el[1], c);
            const double d = u.value(el[2], c);
            s += area / 6.0 * (a * a + b * b + d * d + a * b + b * d + a * d);
        }
    }
    return std::sqrt(s);
}

double lp_norm(const FeFunction& u, double p) {
    if (!(p >= 1.0)) throw InvalidArgument("lp_norm: p must be >= 1");
    const auto rule = triangle_rule(4);
    double s = 0.0;
    for (std::size_t e = 0; e < u.mesh->num_elements(); ++e) {
        const double area = signed_area(u.mesh->triangle(e));
        const auto& el = u.mesh->elements[e];
        for (const auto& q : rule) {
            double mag2 = 0.0;
            for (int c = 0; c < u.m; ++c) {
                const double val = q.bary[0] * u.value(el[0], c) + q.bary[1] * u.value(el[1], c) +
                                   q.bary[2] * u.value(el[2], c);
                mag2 += val * val;
            }
            s += area * q.weight * std::pow(mag2, 0.5 * p);
        }
    }
    return std::pow(s, 1.0 / p);
}

double energy_form(const FeFunction& u, const FeFunction& v, const CoefficientField& field, double eps,
                   int quadrature_order) {
    check_same_mesh(u, v);
    if (u.m != field.m()) throw InvalidArgument("energy_form: component count differs from field");
    const int m = u.m;
    double s = 0.0;
    for (std::size_t e = 0; e < u.mesh->num_elements(); ++e) {
        const Triangle t = u.mesh->triangle(e);
        const double area = signed_area(t);
        const CoeffTensor A = element_coefficient(t, field, eps, quadrature_order);
        std::array<double, kMaxDm> gu{};
        std::array<double, kMaxDm> gv{};
        for (int c = 0; c < m; ++c) {
            const Point2 a = element_gradient(u, e, c);
            const Point2 b = element_gradient(v, e, c);
            gu[c * kDim] = a.x;
            gu[c * kDim + 1] = a.y;
            gv[c * kDim] = b.x;
            gv[c * kDim + 1] = b.y;
        }
        double form = 0.0;
        for (int r = 0; r < A.dm; ++r)
            for (int c = 0; c < A.dm; ++c) form += gv[r] * A(r, c) * gu[c];
        s += area * form;
    }
    return s;
}

FeFunction difference(const FeFunction& u, const FeFunction& v) {
    check_same_mesh(u, v);
    FeFunction d(u.mesh, u.m);
    for (std::size_t i = 0; i < d.values.size(); ++i) d.values[i] = u.values[i] - v.values[i];
    return d;
}

double evaluate(const FeFunction& u, Point2 p, int component) {
    const auto [e, b] = locate(*u.mesh, p);
    const auto& el = u.mesh->elements[e];
    return b[0] * u.value(el[0], component) + b[1] * u.value(el[1], component) + b[2] * u.value(el[2], component);
}

}  // namespace msfem
