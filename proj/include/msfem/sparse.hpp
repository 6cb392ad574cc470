#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace msfem {

/// Compressed row storage with sorted, unique column indices per row.
class SparseMatrix {
public:
    struct Triplet {
        std::uint32_t row;
        std::uint32_t col;
        double value;
    };

    SparseMatrix() = default;
    SparseMatrix(std::size_t rows, std::size_t cols, std::vector<std::size_t> row_ptr,
                 std::vector<std::uint32_t> col_idx, std::vector<double> values);

    static SparseMatrix identity(std::size_t n);
    /// Duplicates are summed.
    static SparseMatrix from_triplets(std::size_t rows, std::size_t cols, std::vector<Triplet> triplets);
    /// Zero-valued matrix with the given per-row column sets.
    static SparseMatrix from_pattern(std::size_t cols, std::vector<std::vector<std::uint32_t>> rows);

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }
    std::size_t nnz() const { return col_idx_.size(); }
    std::span<const std::size_t> row_ptr() const { return row_ptr_; }
    std::span<const std::uint32_t> col_idx() const { return col_idx_; }
    std::span<const double> values() const { return values_; }
    std::span<double> values() { return values_; }

    /// Adds v to an entry of the pattern. Throws if (r, c) is not stored.
    void add(std::size_t r, std::size_t c, double v);
    double operator()(std::size_t r, std::size_t c) const;

    void multiply(std::span<const double> x, std::span<double> y) const;
    std::vector<double> multiply(std::span<const double> x) const;
    std::vector<double> diagonal() const;
    double max_abs() const;
    /// max |K - K^T| <= rel_tol * max |K|
    bool is_symmetric(double rel_tol = 1e-12) const;
    /// Rows and columns restricted to `keep` (indices in increasing order).
    SparseMatrix submatrix(std::span<const std::uint32_t> keep_rows,
                           std::span<const std::uint32_t> keep_cols) const;

private:
    std::ptrdiff_t find(std::size_t r, std::size_t c) const;

    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<std::size_t> row_ptr_{0};
    std::vector<std::uint32_t> col_idx_;
    std::vector<double> values_;
};

enum class SolverMethod { automatic, cg, dense, cholesky };

std::string to_string(SolverMethod method);

struct SolveOptions {
    double tol = 1e-10;
    int max_iter = 20000;
    SolverMethod method = SolverMethod::automatic;
    /// automatic: dense LU below this many unknowns
    std::size_t dense_below = 200;
};

struct SolveReport {
    int iterations = 0;
    double residual = 0.0;  ///< ||K x - b|| / ||b||
    double seconds = 0.0;
    std::string method;
};

class ConvergenceFailure : public std::runtime_error {
public:
    ConvergenceFailure(const std::string& what, SolveReport report)
        : std::runtime_error(what), report_(std::move(report)) {}
    const SolveReport& report() const { return report_; }

private:
    SolveReport report_;
};

struct SolveResult {
    std::vector<double> x;
    SolveReport report;
};

/// Solves K x = b. automatic picks dense LU for small systems, a sparse
/// Cholesky (LDL^T) factorization for larger symmetric systems and dense LU
/// otherwise. cg is Jacobi-preconditioned conjugate gradients.
SolveResult solve_sparse(const SparseMatrix& K, std::span<const double> b,
                         const SolveOptions& options = {});

/// Jacobi-preconditioned CG for symmetric positive definite K.
SolveResult conjugate_gradient(const SparseMatrix& K, std::span<const double> b, double tol,
                               int max_iter);

/// Gaussian elimination with partial pivoting on a row-major n x n matrix.
std::vector<double> dense_lu_solve(std::vector<double> a, std::vector<double> b, std::size_t n);

/// Sparse LDL^T factorization reused across right-hand sides.
class SpdFactorization {
public:
    explicit SpdFactorization(const SparseMatrix& K);
    ~SpdFactorization();
    SpdFactorization(SpdFactorization&&) noexcept;
    SpdFactorization& operator=(SpdFactorization&&) noexcept;

    std::size_t size() const { return n_; }
    std::vector<double> solve(std::span<const double> b) const;

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
    std::size_t n_ = 0;
};

/// `%%MatrixMarket matrix coordinate real general`, 1-based indices.
void write_matrix_market(std::ostream& out, const SparseMatrix& K);

double norm2(std::span<const double> v);
double dot(std::span<const double> a, std::span<const double> b);

}  // namespace msfem
