#include "msfem/cell.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>

#include "msfem/errors.hpp"
#include "msfem/sparse.hpp"

namespace msfem {

namespace {

CoeffTensor midpoint_coefficient(const Mesh& mesh, std::size_t e, const CoefficientField& field) {
    return field.eval(barycenter(mesh.triangle(e)));
}

double frobenius2_gradient(const CorrectorSet& c, std::size_t e) {
    double s = 0.0;
    for (const auto& chi : c.chi) {
        for (int g = 0; g < c.m; ++g) {
            const Point2 gr = element_gradient(chi, e, g);
            s += dot(gr, gr);
        }
    }
    return s;
}

}  // namespace

double CorrectorSet::gradient(std::size_t e, int j, int beta, int gamma, int k) const {
    const Point2 g = element_gradient(corrector(j, beta), e, gamma);
    return k == 0 ? g.x : g.y;
}

PeriodicCellMesh build_periodic_cell_mesh(int n_cell) {
    if (n_cell < 1) throw InvalidArgument("cell mesh needs n_cell >= 1");
    PeriodicCellMesh out;
    out.mesh = std::make_shared<const Mesh>(build_structured_triangulation(Rect::unit_square(), n_cell));
    out.dof_of_vertex.resize(out.mesh->num_vertices());
    const GridInfo& g = *out.mesh->grid;
    for (int j = 0; j <= n_cell; ++j) {
        for (int i = 0; i <= n_cell; ++i) {
            out.dof_of_vertex[g.vertex(i, j)] =
                static_cast<std::uint32_t>((i % n_cell) + n_cell * (j % n_cell));
        }
    }
    out.num_dofs = static_cast<std::size_t>(n_cell) * static_cast<std::size_t>(n_cell);
    return out;
}

CorrectorSet solve_corrector(const CoefficientField& field, int n_cell, double tol) {
    if (n_cell < 4) throw InvalidArgument("solve_corrector: n_cell must be at least 4");
    check_ellipticity(field, 1024, 64);

    const int m = field.m();
    const PeriodicCellMesh cell = build_periodic_cell_mesh(n_cell);
    const Mesh& mesh = *cell.mesh;
    const std::size_t n = cell.num_dofs * static_cast<std::size_t>(m);

    std::vector<CoeffTensor> coeff(mesh.num_elements());
    std::vector<SparseMatrix::Triplet> trip;
    trip.reserve(mesh.num_elements() * 9 * static_cast<std::size_t>(m * m));
    // rhs[(beta * d + j)][dof * m + alpha]
    std::vector<std::vector<double>> rhs(static_cast<std::size_t>(kDim * m), std::vector<double>(n, 0.0));
    for (std::size_t e = 0; e < mesh.num_elements(); ++e) {
        const Triangle t = mesh.triangle(e);
        const double area = signed_area(t);
        const auto g = barycentric_gradients(t);
        coeff[e] = midpoint_coefficient(mesh, e, field);
        const CoeffTensor& A = coeff[e];
        std::array<std::uint32_t, 3> dof{};
        for (int a = 0; a < 3; ++a) dof[a] = cell.dof_of_vertex[mesh.elements[e][a]];
        for (int a = 0; a < 3; ++a) {
            const double ga[2] = {g[a].x, g[a].y};
            for (int al = 0; al < m; ++al) {
                const std::uint32_t row = dof[a] * m + al;
                for (int b = 0; b < 3; ++b) {
                    const double gb[2] = {g[b].x, g[b].y};
                    for (int be = 0; be < m; ++be) {
                        double s = 0.0;
                        for (int p = 0; p < kDim; ++p)
                            for (int q = 0; q < kDim; ++q) s += ga[p] * A(al * kDim + p, be * kDim + q) * gb[q];
                        trip.push_back({row, dof[b] * m + be, area * s});
                    }
                }
                for (int be = 0; be < m; ++be) {
                    for (int j = 0; j < kDim; ++j) {
                        double s = 0.0;
                        for (int p = 0; p < kDim; ++p) s += ga[p] * A(al * kDim + p, be * kDim + j);
                        rhs[static_cast<std::size_t>(be * kDim + j)][row] -= area * s;
                    }
                }
            }
        }
    }
    const SparseMatrix K = SparseMatrix::from_triplets(n, n, std::move(trip));

    // pin all components of dof 0
    std::vector<std::uint32_t> free;
    free.reserve(n - m);
    for (std::size_t i = static_cast<std::size_t>(m); i < n; ++i) free.push_back(static_cast<std::uint32_t>(i));
    const SparseMatrix Kr = K.submatrix(free, free);
    const bool symmetric = Kr.is_symmetric(1e-12);
    std::unique_ptr<SpdFactorization> factor;
    if (symmetric) factor = std::make_unique<SpdFactorization>(Kr);

    CorrectorSet out;
    out.mesh = cell.mesh;
    out.n_cell = n_cell;
    out.m = m;
    out.dof_of_vertex = cell.dof_of_vertex;
    out.field_hash = field.hash();

    std::vector<double> node_weight(cell.num_dofs, 0.0);
    for (std::size_t e = 0; e < mesh.num_elements(); ++e) {
        const double w = signed_area(mesh.triangle(e)) / 3.0;
        for (auto v : mesh.elements[e]) node_weight[cell.dof_of_vertex[v]] += w;
    }

    for (std::size_t k = 0; k < rhs.size(); ++k) {
        const std::vector<double>& b = rhs[k];
        std::vector<double> br(free.size());
        for (std::size_t i = 0; i < free.size(); ++i) br[i] = b[free[i]];
        auto solve_reduced = [&](std::span<const double> r) {
            if (factor) return factor->solve(r);
            SolveOptions opt;
            opt.tol = tol;
            return solve_sparse(Kr, r, opt).x;
        };
        std::vector<double> xr = solve_reduced(br);
        const double bnorm = norm2(b);
        std::vector<double> x(n, 0.0);
        double residual = 0.0;
        for (int step = 0; step < 3; ++step) {
            for (std::size_t i = 0; i < free.size(); ++i) x[free[i]] = xr[i];
            std::vector<double> r = K.multiply(x);
            for (std::size_t i = 0; i < n; ++i) r[i] = b[i] - r[i];
            residual = bnorm > 0.0 ? norm2(r) / bnorm : norm2(r);
            if (residual <= tol) break;
            std::vector<double> rr(free.size());
            for (std::size_t i = 0; i < free.size(); ++i) rr[i] = r[free[i]];
            const std::vector<double> dx = solve_reduced(rr);
            for (std::size_t i = 0; i < free.size(); ++i) xr[i] += dx[i];
        }
        if (residual > tol) {
            SolveReport rep;
            rep.residual = residual;
            rep.method = factor ? "sparse-ldlt" : "dense-lu";
            throw ConvergenceFailure("solve_corrector: periodic residual above tolerance", rep);
        }
        out.residual = std::max(out.residual, residual);
        for (int g = 0; g < m; ++g) {
            double mean = 0.0;
            for (std::size_t d = 0; d < cell.num_dofs; ++d) mean += node_weight[d] * x[d * m + g];
            for (std::size_t d = 0; d < cell.num_dofs; ++d) x[d * m + g] -= mean;
        }
        FeFunction chi(cell.mesh, m);
        for (std::size_t v = 0; v < mesh.num_vertices(); ++v)
            for (int g = 0; g < m; ++g) chi.values[v * m + g] = x[cell.dof_of_vertex[v] * m + g];
        out.chi.push_back(std::move(chi));
    }
    return out;
}

HomogenizedTensor homogenized_tensor(const CoefficientField& field, const CorrectorSet& c) {
    if (field.hash() != c.field_hash || field.m() != c.m) {
        throw InvalidArgument("homogenized_tensor: correctors were computed for a different field");
    }
    const int m = c.m;
    const Mesh& mesh = *c.mesh;
    HomogenizedTensor out;
    out.n_cell = c.n_cell;
    out.value = CoeffTensor::zero(m);
    for (std::size_t e = 0; e < mesh.num_elements(); ++e) {
        const double area = signed_area(mesh.triangle(e));
        const CoeffTensor A = midpoint_coefficient(mesh, e, field);
        // grad[(beta, j)][gamma * d + k]
        std::array<std::array<double, kMaxDm>, kMaxDm> grad{};
        for (int be = 0; be < m; ++be)
            for (int j = 0; j < kDim; ++j)
                for (int g = 0; g < m; ++g) {
                    const Point2 gr = element_gradient(c.corrector(j, be), e, g);
                    grad[be * kDim + j][g * kDim] = gr.x;
                    grad[be * kDim + j][g * kDim + 1] = gr.y;
                }
        for (int r = 0; r < A.dm; ++r) {
            for (int col = 0; col < A.dm; ++col) {
                double s = A(r, col);
                for (int q = 0; q < A.dm; ++q) s += A(r, q) * grad[col][q];
                out.value(r, col) += area * s;
            }
        }
    }
    return out;
}

double corrector_mean(const CorrectorSet& c, int j, int beta, int gamma) {
    const FeFunction& chi = c.corrector(j, beta);
    double s = 0.0;
    for (std::size_t e = 0; e < c.mesh->num_elements(); ++e) {
        const double area = signed_area(c.mesh->triangle(e));
        for (auto v : c.mesh->elements[e]) s += area / 3.0 * chi.value(v, gamma);
    }
    return s;
}

double corrector_gradient_norm(const CorrectorSet& c, int j, int beta) {
    return h1_seminorm(c.corrector(j, beta));
}

double corrector_max_abs(const CorrectorSet& c) {
    double mx = 0.0;
    for (const auto& chi : c.chi)
        for (double v : chi.values) mx = std::max(mx, std::abs(v));
    return mx;
}

double corrector_value(const CorrectorSet& c, Point2 y, int j, int beta, int gamma) {
    return evaluate(c.corrector(j, beta), {periodic_reduce(y.x), periodic_reduce(y.y)}, gamma);
}

std::vector<double> recover_gradient(const FeFunction& u) {
    const Mesh& mesh = *u.mesh;
    const std::size_t stride = static_cast<std::size_t>(u.m * kDim);
    std::vector<double> grad(mesh.num_vertices() * stride, 0.0);
    std::vector<double> weight(mesh.num_vertices(), 0.0);
    for (std::size_t e = 0; e < mesh.num_elements(); ++e) {
        const double area = signed_area(mesh.triangle(e));
        for (int b = 0; b < u.m; ++b) {
            const Point2 g = element_gradient(u, e, b);
            for (auto v : mesh.elements[e]) {
                grad[v * stride + b * kDim] += area * g.x;
                grad[v * stride + b * kDim + 1] += area * g.y;
            }
        }
        for (auto v : mesh.elements[e]) weight[v] += area;
    }
    for (std::size_t v = 0; v < mesh.num_vertices(); ++v)
        for (std::size_t k = 0; k < stride; ++k) grad[v * stride + k] /= weight[v];
    return grad;
}

namespace {

/// u1 = u0 + eps chi(x / eps) grad u0 at one point.
void add_corrector_term(const CorrectorSet& c, double eps, Point2 x, std::span<const double> grad_u0,
                        std::span<double> u) {
    const Point2 y{periodic_reduce(x.x / eps), periodic_reduce(x.y / eps)};
    const auto [e, b] = locate(*c.mesh, y);
    const auto& el = c.mesh->elements[e];
    for (int be = 0; be < c.m; ++be) {
        for (int j = 0; j < kDim; ++j) {
            const double gj = grad_u0[static_cast<std::size_t>(be * kDim + j)];
            if (gj == 0.0) continue;
            const FeFunction& chi = c.corrector(j, be);
            for (int g = 0; g < c.m; ++g) {
                const double val = b[0] * chi.value(el[0], g) + b[1] * chi.value(el[1], g) + b[2] * chi.value(el[2], g);
                u[static_cast<std::size_t>(g)] += eps * val * gj;
            }
        }
    }
}

}  // namespace

FeFunction first_order_approx(const FeFunction& u0, const CorrectorSet& c, double eps,
                              std::shared_ptr<const Mesh> target) {
    if (!(eps > 0.0)) throw InvalidArgument("first_order_approx: eps must be positive");
    if (u0.m != c.m) throw InvalidArgument("first_order_approx: component count differs from correctors");
    const std::vector<double> grad = recover_gradient(u0);
    const int m = u0.m;
    const std::size_t stride = static_cast<std::size_t>(m * kDim);
    FeFunction out(target, m);
    std::array<double, kMaxDm> g{};
    for (std::size_t v = 0; v < target->num_vertices(); ++v) {
        const Point2 x = target->vertices[v];
        const auto [e, b] = locate(*u0.mesh, x);
        const auto& el = u0.mesh->elements[e];
        std::span<double> u(out.values.data() + v * m, static_cast<std::size_t>(m));
        for (int k = 0; k < m; ++k)
            u[k] = b[0] * u0.value(el[0], k) + b[1] * u0.value(el[1], k) + b[2] * u0.value(el[2], k);
        for (std::size_t k = 0; k < stride; ++k)
            g[k] = b[0] * grad[el[0] * stride + k] + b[1] * grad[el[1] * stride + k] + b[2] * grad[el[2] * stride + k];
        add_corrector_term(c, eps, x, std::span<const double>(g.data(), stride), u);
    }
    return out;
}

FeFunction first_order_approx(const VectorSource& u0, const VectorSource& grad_u0, int m, const CorrectorSet& c,
                              double eps, std::shared_ptr<const Mesh> target) {
    if (!(eps > 0.0)) throw InvalidArgument("first_order_approx: eps must be positive");
    if (m != c.m) throw InvalidArgument("first_order_approx: component count differs from correctors");
    FeFunction out(target, m);
    std::array<double, kMaxDm> g{};
    const std::size_t stride = static_cast<std::size_t>(m * kDim);
    for (std::size_t v = 0; v < target->num_vertices(); ++v) {
        const Point2 x = target->vertices[v];
        std::span<double> u(out.values.data() + v * m, static_cast<std::size_t>(m));
        u0(x, u);
        grad_u0(x, std::span<double>(g.data(), stride));
        add_corrector_term(c, eps, x, std::span<const double>(g.data(), stride), u);
    }
    return out;
}

double corrector_lp_gradient(const CorrectorSet& c, double p) {
    if (!(p >= 1.0)) throw InvalidArgument("corrector_lp_gradient: p must be >= 1");
    double s = 0.0;
    for (std::size_t e = 0; e < c.mesh->num_elements(); ++e) {
        const double area = signed_area(c.mesh->triangle(e));
        s += area * std::pow(frobenius2_gradient(c, e), 0.5 * p);
    }
    return std::pow(s, 1.0 / p);
}

MultiplierResult multiplier_diagnostic(const CorrectorSet& c, double eps, const FeFunction& psi,
                                       MultiplierVariant variant) {
    if (!(eps > 0.0)) throw InvalidArgument("multiplier_diagnostic: eps must be positive");
    const Mesh& cm = *c.mesh;
    std::vector<double> g2(cm.num_elements());
    for (std::size_t e = 0; e < cm.num_elements(); ++e) g2[e] = frobenius2_gradient(c, e);

    const Mesh& mesh = *psi.mesh;
    const double cell_h = eps * cm.h;
    const auto rule = triangle_rule(2);
    double lhs2 = 0.0;
    double grad_d = 0.0;
    for (std::size_t e = 0; e < mesh.num_elements(); ++e) {
        const Triangle t = mesh.triangle(e);
        const double area = signed_area(t);
        const auto& el = mesh.elements[e];
        double gpsi2 = 0.0;
        for (int k = 0; k < psi.m; ++k) {
            const Point2 g = element_gradient(psi, e, k);
            gpsi2 += dot(g, g);
        }
        grad_d += area * std::pow(gpsi2, 0.5 * kDim);

        const int levels = std::min(refinement_levels(t, cell_h), 8);
        const int N = 1 << levels;
        const double sub_area = area / (static_cast<double>(N) * N);
        auto psi2_at = [&](const Barycentric& b) {
            double s = 0.0;
            for (int k = 0; k < psi.m; ++k) {
                const double v = b[0] * psi.value(el[0], k) + b[1] * psi.value(el[1], k) + b[2] * psi.value(el[2], k);
                s += v * v;
            }
            return s;
        };
        auto lattice = [N](int i, int j) {
            return Barycentric{1.0 - static_cast<double>(i + j) / N, static_cast<double>(i) / N,
                               static_cast<double>(j) / N};
        };
        auto sub_triangle = [&](const Barycentric& p0, const Barycentric& p1, const Barycentric& p2) {
            for (const auto& q : rule) {
                Barycentric b{};
                for (int r = 0; r < 3; ++r) b[r] = q.bary[0] * p0[r] + q.bary[1] * p1[r] + q.bary[2] * p2[r];
                const Point2 x = map_to_triangle(t, b);
                const auto [ce, cb] = locate(cm, {periodic_reduce(x.x / eps), periodic_reduce(x.y / eps)});
                (void)cb;
                lhs2 += sub_area * q.weight * g2[ce] * psi2_at(b);
            }
        };
        for (int j = 0; j < N; ++j) {
            for (int i = 0; i + j < N; ++i) {
                sub_triangle(lattice(i, j), lattice(i + 1, j), lattice(i, j + 1));
                if (i + j < N - 1) sub_triangle(lattice(i + 1, j), lattice(i + 1, j + 1), lattice(i, j + 1));
            }
        }
    }

    MultiplierResult out;
    out.lhs = std::sqrt(lhs2);
    if (variant == MultiplierVariant::w1d) {
        const double area = mesh.total_area();
        out.rhs = std::pow(area, 0.5 - 1.0 / kDim) *
                  (lp_norm(psi, kDim) + eps * std::pow(grad_d, 1.0 / kDim));
    } else {
        out.rhs = (1.0 + corrector_max_abs(c)) * (l2_norm(psi) + eps * h1_seminorm(psi));
    }
    out.ratio = out.rhs > 0.0 ? out.lhs / out.rhs : 0.0;
    return out;
}

void write_homogenized_csv(std::ostream& out, const HomogenizedTensor& a_hat, int m) {
    out << "i,j,alpha,beta,value\n";
    out.precision(17);
    for (int al = 0; al < m; ++al)
        for (int be = 0; be < m; ++be)
            for (int i = 0; i < kDim; ++i)
                for (int j = 0; j < kDim; ++j)
                    out << i + 1 << ',' << j + 1 << ',' << al + 1 << ',' << be + 1 << ','
                        << a_hat.value.at(i, j, al, be) << '\n';
}

void write_correctors_csv(std::ostream& out, const CorrectorSet& c) {
    out << "vertex,x,y";
    for (int be = 0; be < c.m; ++be)
        for (int j = 0; j < kDim; ++j)
            for (int g = 0; g < c.m; ++g) out << ",chi_" << j + 1 << '_' << be + 1 << '_' << g + 1;
    out << '\n';
    out.precision(17);
    for (std::size_t v = 0; v < c.mesh->num_vertices(); ++v) {
        out << v << ',' << c.mesh->vertices[v].x << ',' << c.mesh->vertices[v].y;
        for (int be = 0; be < c.m; ++be)
            for (int j = 0; j < kDim; ++j)
                for (int g = 0; g < c.m; ++g) out << ',' << c.corrector(j, be).value(v, g);
        out << '\n';
    }
}

}  // namespace msfem
