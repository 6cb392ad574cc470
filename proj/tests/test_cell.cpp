#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <sstream>

#include "msfem/cell.hpp"
#include "msfem/errors.hpp"

using namespace msfem;

namespace {

// Periodic 1D three-point scheme for (a (1 + chi'))' = 0 with a on cell
// midpoints; returns the effective coefficient and chi at the nodes.
struct OneD {
    double a_eff;
    std::vector<double> chi;
};

OneD fd_cell_1d(double a1, double a2, int n) {
    const double h = 1.0 / n;
    std::vector<double> a(n);
    for (int i = 0; i < n; ++i) a[i] = (i + 0.5) * h < 0.5 ? a1 : a2;
    // unknowns chi_1 .. chi_{n-1}, chi_0 = 0 pinned; periodic wrap to chi_0
    const int k = n - 1;
    std::vector<double> M(static_cast<std::size_t>(k * k), 0.0), r(k, 0.0);
    for (int i = 1; i < n; ++i) {
        const double al = a[i - 1], ar = a[i];
        const int row = i - 1;
        M[row * k + row] = (al + ar) / (h * h);
        if (i - 1 >= 1) M[row * k + row - 1] = -al / (h * h);
        if (i + 1 <= n - 1) M[row * k + row + 1] = -ar / (h * h);
        r[row] = (ar - al) / h;
    }
    // Gaussian elimination without pivoting (SPD)
    for (int p = 0; p < k; ++p)
        for (int q = p + 1; q < k; ++q) {
            const double f = M[q * k + p] / M[p * k + p];
            if (f == 0.0) continue;
            for (int c = p; c < k; ++c) M[q * k + c] -= f * M[p * k + c];
            r[q] -= f * r[p];
        }
    std::vector<double> x(k);
    for (int p = k - 1; p >= 0; --p) {
        double s = r[p];
        for (int c = p + 1; c < k; ++c) s -= M[p * k + c] * x[c];
        x[p] = s / M[p * k + p];
    }
    std::vector<double> chi(n + 1, 0.0);
    for (int i = 1; i < n; ++i) chi[i] = x[i - 1];
    double mean = 0.0;
    for (int i = 0; i < n; ++i) mean += 0.5 * h * (chi[i] + chi[i + 1]);
    for (auto& v : chi) v -= mean;
    double a_eff = 0.0;
    for (int i = 0; i < n; ++i) a_eff += h * a[i] * (1.0 + (chi[i + 1] - chi[i]) / h);
    return {a_eff, chi};
}

double laminate_chi(double y) {
    y -= std::floor(y);
    return y < 0.5 ? 0.6 * y - 0.15 : 0.45 - 0.6 * y;
}

std::shared_ptr<const Mesh> unit_mesh(int n) {
    return std::make_shared<const Mesh>(build_structured_triangulation(Rect::unit_square(), n));
}

}  // namespace

TEST(Cell, PeriodicMeshIdentification) {
    const auto c = build_periodic_cell_mesh(4);
    EXPECT_EQ(c.num_dofs, 16u);
    const GridInfo& g = *c.mesh->grid;
    for (int j = 0; j <= 4; ++j) EXPECT_EQ(c.dof_of_vertex[g.vertex(0, j)], c.dof_of_vertex[g.vertex(4, j)]);
    for (int i = 0; i <= 4; ++i) EXPECT_EQ(c.dof_of_vertex[g.vertex(i, 0)], c.dof_of_vertex[g.vertex(i, 4)]);
}

TEST(Cell, RejectsCoarseCell) {
    EXPECT_THROW(solve_corrector(CoefficientField::laminate(1, 4), 3), InvalidArgument);
}

TEST(Cell, ConstantFieldHasZeroCorrector) {
    CoeffTensor A = CoeffTensor::zero(1);
    A(0, 0) = 2.0;
    A(0, 1) = A(1, 0) = 0.5;
    A(1, 1) = 3.0;
    const auto f = CoefficientField::constant(A);
    const auto c = solve_corrector(f, 8);
    for (const auto& chi : c.chi)
        for (double v : chi.values) EXPECT_NEAR(v, 0.0, 1e-10);
    const auto h = homogenized_tensor(f, c);
    for (int r = 0; r < 2; ++r)
        for (int s = 0; s < 2; ++s) EXPECT_NEAR(h.value(r, s), A(r, s), 1e-12);
    EXPECT_NEAR(corrector_lp_gradient(c, 2.0), 0.0, 1e-10);
}

TEST(Cell, LaminateMatchesClosedFormAndFiniteDifferences) {
    const auto f = CoefficientField::laminate(1, 4);
    const auto c = solve_corrector(f, 64);
    const auto oracle = fd_cell_1d(1.0, 4.0, 64);
    const auto& chi1 = c.corrector(0, 0);
    const auto& chi2 = c.corrector(1, 0);
    for (std::size_t v = 0; v < c.mesh->num_vertices(); ++v) {
        const Point2 y = c.mesh->vertices[v];
        EXPECT_NEAR(chi1.values[v], laminate_chi(y.x), 1e-10);
        const int i = static_cast<int>(std::lround(y.x * 64));
        EXPECT_NEAR(chi1.values[v], oracle.chi[i], 1e-10);
        EXPECT_NEAR(chi2.values[v], 0.0, 1e-10);
    }
    const auto h = homogenized_tensor(f, c);
    EXPECT_NEAR(h.value(0, 0), oracle.a_eff, 1e-10);
    EXPECT_NEAR(h.value(0, 0), 1.6, 1e-3);
    EXPECT_NEAR(h.value(1, 1), 2.5, 1e-3);
    EXPECT_NEAR(h.value(0, 1), 0.0, 1e-12);
    EXPECT_NEAR(h.value(1, 0), 0.0, 1e-12);
    EXPECT_NEAR(corrector_lp_gradient(c, 2.0), 0.6, 1e-10);
    EXPECT_NEAR(corrector_max_abs(c), 0.15, 1e-12);
}

TEST(Cell, CheckerboardDykhne) {
    const auto f = CoefficientField::checkerboard(1, 4);
    std::vector<double> a;
    for (int n : {32, 64, 128}) {
        const auto c = solve_corrector(f, n);
        const auto h = homogenized_tensor(f, c);
        EXPECT_NEAR(h.value(0, 0), h.value(1, 1), 1e-8);
        EXPECT_NEAR(h.value(0, 1), 0.0, 1e-8);
        a.push_back(h.value(0, 0));
    }
    EXPECT_NEAR(a[2], 2.0, 2e-2);
    // Richardson with the observed order
    const double p = std::log2((a[0] - a[1]) / (a[1] - a[2]));
    const double extrap = a[2] + (a[2] - a[1]) / (std::pow(2.0, p) - 1.0);
    EXPECT_GT(p, 0.5);
    EXPECT_NEAR(extrap, 2.0, 1e-2);
    EXPECT_LT(std::abs(extrap - 2.0), std::abs(a[2] - 2.0));
}

TEST(Cell, TrigonometricInvariants) {
    const auto f = CoefficientField::trigonometric();
    const auto c = solve_corrector(f, 64);
    for (int j = 0; j < 2; ++j) {
        EXPECT_NEAR(corrector_mean(c, j, 0, 0), 0.0, 1e-10);
        EXPECT_LE(corrector_gradient_norm(c, j, 0), 3.0 * 1.1);
    }
    const auto h = homogenized_tensor(f, c);
    EXPECT_NEAR(h.value(0, 1), h.value(1, 0), 1e-10);
    // harmonic / arithmetic mean sandwich by independent quadrature
    const int q = 400;
    double inv = 0.0, mean = 0.0;
    for (int i = 0; i < q; ++i)
        for (int j = 0; j < q; ++j) {
            const double y1 = (i + 0.5) / q, y2 = (j + 0.5) / q;
            const double av = 2.0 + std::sin(2 * std::numbers::pi * y1) * std::sin(2 * std::numbers::pi * y2);
            inv += 1.0 / av / (q * q);
            mean += av / (q * q);
        }
    const double tr = h.value(0, 0) + h.value(1, 1);
    const double det = h.value(0, 0) * h.value(1, 1) - h.value(0, 1) * h.value(1, 0);
    const double disc = std::sqrt(std::max(0.0, tr * tr / 4 - det));
    EXPECT_GE(tr / 2 - disc, 1.0 / inv * (1 - 1e-3));
    EXPECT_LE(tr / 2 + disc, mean * (1 + 1e-3));
}

TEST(Cell, PeriodicityIsExact) {
    const auto c = solve_corrector(CoefficientField::checkerboard(1, 4), 16);
    const GridInfo& g = *c.mesh->grid;
    for (const auto& chi : c.chi)
        for (int k = 0; k <= 16; ++k) {
            EXPECT_EQ(chi.values[g.vertex(0, k)], chi.values[g.vertex(16, k)]);
            EXPECT_EQ(chi.values[g.vertex(k, 0)], chi.values[g.vertex(k, 16)]);
        }
}

TEST(Cell, BlockLaminateSystem) {
    // A = a(y) delta_ij M with M = [[1, c], [c, 1]] separates: a_hat = M (x) diag(1.6, 2.5)
    const double cpl = 0.3;
    const auto f = CoefficientField::laminate(1, 4, 1, 0.5, 2, cpl);
    const auto c = solve_corrector(f, 32);
    const auto h = homogenized_tensor(f, c);
    const double M[2][2] = {{1, cpl}, {cpl, 1}};
    const double D[2] = {1.6, 2.5};
    for (int al = 0; al < 2; ++al)
        for (int be = 0; be < 2; ++be)
            for (int i = 0; i < 2; ++i)
                for (int j = 0; j < 2; ++j)
                    EXPECT_NEAR(h.value.at(i, j, al, be), i == j ? M[al][be] * D[i] : 0.0, 1e-9);
    EXPECT_TRUE(h.value.is_symmetric(1e-10));
}

TEST(Cell, MismatchedFieldRejected) {
    const auto c = solve_corrector(CoefficientField::laminate(1, 4), 8);
    EXPECT_THROW(homogenized_tensor(CoefficientField::laminate(1, 5), c), InvalidArgument);
}

TEST(Cell, GradientLpMonotoneInP) {
    const auto c = solve_corrector(CoefficientField::checkerboard(1, 4), 32);
    double prev = 0.0;
    for (double p : {2.0, 3.0, 4.0, 6.0, 8.0}) {
        const double v = corrector_lp_gradient(c, p);
        EXPECT_GE(v, prev * (1 - 1e-12));
        prev = v;
    }
}

TEST(FirstOrder, ZeroCorrectorGivesInterpolant) {
    const auto c = solve_corrector(CoefficientField::constant(CoeffTensor::identity(1)), 8);
    const auto coarse = unit_mesh(4);
    const auto fine = unit_mesh(16);
    const auto u0 = interpolate(coarse, [](Point2 x) { return x.x * (1 - x.x) + 0.5 * x.y; });
    const auto u1 = first_order_approx(u0, c, 0.1, fine);
    for (std::size_t v = 0; v < fine->num_vertices(); ++v)
        EXPECT_NEAR(u1.values[v], evaluate(u0, fine->vertices[v]), 1e-9);
}

TEST(FirstOrder, LinearU0AddsScaledProfile) {
    const auto c = solve_corrector(CoefficientField::laminate(1, 4), 32);
    const auto fine = unit_mesh(64);
    const auto u0 = interpolate(unit_mesh(2), [](Point2 x) { return 2.0 * x.x + 3.0 * x.y; });
    const double eps = 1.0 / 8;
    const auto u1 = first_order_approx(u0, c, eps, fine);
    for (std::size_t v = 0; v < fine->num_vertices(); ++v) {
        const Point2 x = fine->vertices[v];
        EXPECT_NEAR(u1.values[v], 2.0 * x.x + 3.0 * x.y + eps * laminate_chi(x.x / eps) * 2.0, 1e-9);
    }
    EXPECT_THROW(first_order_approx(u0, c, 0.0, fine), InvalidArgument);
}

TEST(FirstOrder, DifferenceDecaysLinearlyInEps) {
    const auto c = solve_corrector(CoefficientField::laminate(1, 4), 32);
    const auto fine = unit_mesh(256);
    auto val = [](Point2 x, std::span<double> out) { out[0] = std::sin(std::numbers::pi * x.x) * x.y; };
    auto grad = [](Point2 x, std::span<double> out) {
        out[0] = std::numbers::pi * std::cos(std::numbers::pi * x.x) * x.y;
        out[1] = std::sin(std::numbers::pi * x.x);
    };
    const auto u0 = interpolate(fine, 1, val);
    std::vector<double> logs_e, logs_d;
    for (double eps : {1.0 / 8, 1.0 / 16, 1.0 / 32}) {
        const auto u1 = first_order_approx(val, grad, 1, c, eps, fine);
        logs_e.push_back(std::log(eps));
        logs_d.push_back(std::log(l2_norm(difference(u1, u0))));
    }
    const double slope = (logs_d[2] - logs_d[0]) / (logs_e[2] - logs_e[0]);
    EXPECT_NEAR(slope, 1.0, 0.1);
}

TEST(Multiplier, ConstantFieldIsZero) {
    const auto c = solve_corrector(CoefficientField::constant(CoeffTensor::identity(1)), 8);
    const auto psi = interpolate(unit_mesh(8), [](Point2) { return 1.0; });
    EXPECT_NEAR(multiplier_diagnostic(c, 0.125, psi, MultiplierVariant::w1d).ratio, 0.0, 1e-9);
}

TEST(Multiplier, LaminateBoundedAcrossEps) {
    const auto c = solve_corrector(CoefficientField::laminate(1, 4), 32);
    for (auto variant : {MultiplierVariant::w1d, MultiplierVariant::linf}) {
        for (int which = 0; which < 2; ++which) {
            std::vector<double> ratios;
            for (double eps : {1.0 / 8, 1.0 / 16, 1.0 / 32}) {
                const auto mesh = unit_mesh(static_cast<int>(std::lround(4 / eps)));
                const auto psi = which == 0 ? interpolate(mesh, [](Point2) { return 1.0; })
                                            : interpolate(mesh, [eps](Point2 x) {
                                                  return std::sin(2 * std::numbers::pi * x.x / eps);
                                              });
                ratios.push_back(multiplier_diagnostic(c, eps, psi, variant).ratio);
            }
            for (double r : ratios) {
                EXPECT_GT(r, 0.0);
                EXPECT_LE(r, 1.5 * ratios.front());
                EXPECT_GE(r, ratios.front() / 1.5);
            }
        }
    }
    // psi = 1 reduces the left side to ||grad chi||_{L^2(Y)} = 0.6 on the unit square
    const auto psi = interpolate(unit_mesh(32), [](Point2) { return 1.0; });
    EXPECT_NEAR(multiplier_diagnostic(c, 1.0 / 8, psi, MultiplierVariant::w1d).lhs, 0.6, 1e-9);
}

TEST(CellIo, HomogenizedCsv) {
    const auto f = CoefficientField::laminate(1, 4);
    const auto h = homogenized_tensor(f, solve_corrector(f, 16));
    std::ostringstream out;
    write_homogenized_csv(out, h, 1);
    EXPECT_EQ(out.str().substr(0, 24), "i,j,alpha,beta,value\n1,1");
    std::ostringstream cc;
    write_correctors_csv(cc, solve_corrector(f, 4));
    EXPECT_EQ(cc.str().substr(0, 30), "vertex,x,y,chi_1_1_1,chi_2_1_1");
}
