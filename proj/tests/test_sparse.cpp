#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "msfem/errors.hpp"
#include "msfem/sparse.hpp"

using namespace msfem;

namespace {

SparseMatrix dense_to_sparse(const std::vector<double>& a, std::size_t n) {
    std::vector<SparseMatrix::Triplet> t;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j)
            if (a[i * n + j] != 0.0) t.push_back({static_cast<std::uint32_t>(i), static_cast<std::uint32_t>(j), a[i * n + j]});
    return SparseMatrix::from_triplets(n, n, t);
}

std::vector<double> random_spd(std::size_t n, std::mt19937_64& rng) {
    std::normal_distribution<double> g;
    std::vector<double> b(n * n);
    for (auto& v : b) v = g(rng);
    std::vector<double> a(n * n, 0.0);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) {
            double s = 0.0;
            for (std::size_t k = 0; k < n; ++k) s += b[i * n + k] * b[j * n + k];
            a[i * n + j] = s + (i == j ? static_cast<double>(n) : 0.0);
        }
    return a;
}

}  // namespace

TEST(Sparse, TripletsSumDuplicates) {
    const auto K = SparseMatrix::from_triplets(2, 2, {{0, 0, 1.0}, {0, 0, 2.0}, {1, 0, 5.0}});
    EXPECT_EQ(K(0, 0), 3.0);
    EXPECT_EQ(K(1, 0), 5.0);
    EXPECT_EQ(K(0, 1), 0.0);
    EXPECT_EQ(K.nnz(), 2u);
}

TEST(Sparse, AddOutsidePatternThrows) {
    auto K = SparseMatrix::identity(3);
    EXPECT_THROW(K.add(0, 2, 1.0), InvalidArgument);
}

TEST(Solve, IdentityOneIteration) {
    const auto K = SparseMatrix::identity(300);
    std::vector<double> b(300);
    for (std::size_t i = 0; i < b.size(); ++i) b[i] = std::sin(1.0 + i);
    SolveOptions opt;
    opt.method = SolverMethod::cg;
    const auto r = solve_sparse(K, b, opt);
    EXPECT_EQ(r.report.iterations, 1);
    for (std::size_t i = 0; i < b.size(); ++i) EXPECT_NEAR(r.x[i], b[i], 1e-14);
}

TEST(Solve, TwoByTwoAllMethods) {
    const auto K = dense_to_sparse({2, 1, 1, 2}, 2);
    for (auto m : {SolverMethod::automatic, SolverMethod::cg, SolverMethod::dense, SolverMethod::cholesky}) {
        SolveOptions opt;
        opt.method = m;
        const auto r = solve_sparse(K, std::vector<double>{3, 3}, opt);
        EXPECT_NEAR(r.x[0], 1.0, 1e-12);
        EXPECT_NEAR(r.x[1], 1.0, 1e-12);
    }
}

TEST(Solve, RandomSpdMatchesDense) {
    std::mt19937_64 rng(42);
    const std::size_t n = 50;
    const auto a = random_spd(n, rng);
    const auto K = dense_to_sparse(a, n);
    std::normal_distribution<double> g;
    std::vector<double> b(n);
    for (auto& v : b) v = g(rng);
    const auto oracle = dense_lu_solve(a, b, n);
    const double tol = 1e-10;
    for (auto m : {SolverMethod::cg, SolverMethod::cholesky}) {
        SolveOptions opt;
        opt.method = m;
        opt.tol = tol;
        const auto r = solve_sparse(K, b, opt);
        EXPECT_LE(r.report.residual, tol);
        double err = 0.0, nx = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            err = std::max(err, std::abs(r.x[i] - oracle[i]));
            nx = std::max(nx, std::abs(oracle[i]));
        }
        EXPECT_LE(err, 10 * tol * std::max(1.0, nx));
    }
}

TEST(Solve, CgMaxIterExceeded) {
    std::mt19937_64 rng(1);
    const std::size_t n = 40;
    const auto K = dense_to_sparse(random_spd(n, rng), n);
    std::vector<double> b(n, 1.0);
    try {
        conjugate_gradient(K, b, 1e-14, 2);
        FAIL() << "expected ConvergenceFailure";
    } catch (const ConvergenceFailure& e) {
        EXPECT_EQ(e.report().iterations, 2);
        EXPECT_GT(e.report().residual, 1e-14);
    }
}

TEST(Solve, NonsymmetricRoutedToDirect) {
    const auto K = dense_to_sparse({4, 1, 0, 2, 5, 1, 0, 3, 6}, 3);
    SolveOptions opt;
    opt.method = SolverMethod::cg;
    const std::vector<double> x{1, -2, 3};
    const auto b = K.multiply(x);
    const auto r = solve_sparse(K, b, opt);
    EXPECT_EQ(r.report.method, to_string(SolverMethod::dense));
    for (int i = 0; i < 3; ++i) EXPECT_NEAR(r.x[i], x[i], 1e-12);
}

TEST(Solve, FactorizationReuse) {
    std::mt19937_64 rng(3);
    const std::size_t n = 30;
    const auto a = random_spd(n, rng);
    const SpdFactorization F(dense_to_sparse(a, n));
    for (int rep = 0; rep < 3; ++rep) {
        std::vector<double> b(n);
        for (std::size_t i = 0; i < n; ++i) b[i] = std::cos(rep + 0.3 * i);
        const auto x = F.solve(b);
        const auto oracle = dense_lu_solve(a, b, n);
        for (std::size_t i = 0; i < n; ++i) EXPECT_NEAR(x[i], oracle[i], 1e-10);
    }
}

TEST(Sparse, SubmatrixAndSymmetry) {
    const auto K = dense_to_sparse({2, -1, 0, -1, 2, -1, 0, -1, 2}, 3);
    EXPECT_TRUE(K.is_symmetric());
    const std::vector<std::uint32_t> keep{0, 2};
    const auto S = K.submatrix(keep, keep);
    EXPECT_EQ(S.rows(), 2u);
    EXPECT_EQ(S(0, 0), 2.0);
    EXPECT_EQ(S(0, 1), 0.0);
    EXPECT_FALSE(dense_to_sparse({1, 2, 0, 1}, 2).is_symmetric());
}

TEST(Sparse, MatrixMarket) {
    const auto K = dense_to_sparse({2, -1, -1, 2}, 2);
    std::ostringstream out;
    write_matrix_market(out, K);
    const std::string s = out.str();
    EXPECT_EQ(s.rfind("%%MatrixMarket matrix coordinate real general\n", 0), 0u);
    EXPECT_NE(s.find("2 2 4\n"), std::string::npos);
    EXPECT_NE(s.find("1 2 -1"), std::string::npos);
}
