#include "msfem/sparse.hpp"

#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <ostream>
#include <sstream>

#include "msfem/errors.hpp"

namespace msfem {

double norm2(std::span<const double> v) { return std::sqrt(dot(v, v)); }

double dot(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

SparseMatrix::SparseMatrix(std::size_t rows, std::size_t cols, std::vector<std::size_t> row_ptr,
                           std::vector<std::uint32_t> col_idx, std::vector<double> values)
    : rows_(rows), cols_(cols), row_ptr_(std::move(row_ptr)), col_idx_(std::move(col_idx)),
      values_(std::move(values)) {
    if (row_ptr_.size() != rows_ + 1 || row_ptr_.front() != 0 || row_ptr_.back() != col_idx_.size() ||
        values_.size() != col_idx_.size()) {
        throw InvalidArgument("SparseMatrix: inconsistent CSR arrays");
    }
    for (std::size_t r = 0; r < rows_; ++r) {
        for (std::size_t k = row_ptr_[r]; k < row_ptr_[r + 1]; ++k) {
            if (col_idx_[k] >= cols_) throw InvalidArgument("SparseMatrix: column index out of range");
            if (k > row_ptr_[r] && col_idx_[k] <= col_idx_[k - 1]) {
                throw InvalidArgument("SparseMatrix: columns must be sorted and unique within a row");
            }
        }
    }
}

SparseMatrix SparseMatrix::identity(std::size_t n) {
    std::vector<std::size_t> ptr(n + 1);
    std::iota(ptr.begin(), ptr.end(), std::size_t{0});
    std::vector<std::uint32_t> col(n);
    std::iota(col.begin(), col.end(), 0u);
    return SparseMatrix(n, n, std::move(ptr), std::move(col), std::vector<double>(n, 1.0));
}

SparseMatrix SparseMatrix::from_triplets(std::size_t rows, std::size_t cols, std::vector<Triplet> t) {
    std::sort(t.begin(), t.end(), [](const Triplet& a, const Triplet& b) {
        return a.row != b.row ? a.row < b.row : a.col < b.col;
    });
    std::vector<std::size_t> ptr(rows + 1, 0);
    std::vector<std::uint32_t> col;
    std::vector<double> val;
    for (std::size_t k = 0; k < t.size(); ++k) {
        if (t[k].row >= rows || t[k].col >= cols) throw InvalidArgument("from_triplets: index out of range");
        if (k > 0 && t[k].row == t[k - 1].row && t[k].col == t[k - 1].col) {
            val.back() += t[k].value;
            continue;
        }
        col.push_back(t[k].col);
        val.push_back(t[k].value);
        ++ptr[t[k].row + 1];
    }
    std::partial_sum(ptr.begin(), ptr.end(), ptr.begin());
    return SparseMatrix(rows, cols, std::move(ptr), std::move(col), std::move(val));
}

SparseMatrix SparseMatrix::from_pattern(std::size_t cols, std::vector<std::vector<std::uint32_t>> rows) {
    std::vector<std::size_t> ptr(rows.size() + 1, 0);
    for (std::size_t r = 0; r < rows.size(); ++r) {
        auto& cs = rows[r];
        std::sort(cs.begin(), cs.end());
        cs.erase(std::unique(cs.begin(), cs.end()), cs.end());
        ptr[r + 1] = ptr[r] + cs.size();
    }
    std::vector<std::uint32_t> col;
    col.reserve(ptr.back());
    for (const auto& cs : rows) col.insert(col.end(), cs.begin(), cs.end());
    std::vector<double> val(col.size(), 0.0);
    return SparseMatrix(rows.size(), cols, std::move(ptr), std::move(col), std::move(val));
}

std::ptrdiff_t SparseMatrix::find(std::size_t r, std::size_t c) const {
    const auto first = col_idx_.begin() + static_cast<std::ptrdiff_t>(row_ptr_[r]);
    const auto last = col_idx_.begin() + static_cast<std::ptrdiff_t>(row_ptr_[r + 1]);
    const auto it = std::lower_bound(first, last, static_cast<std::uint32_t>(c));
    if (it == last || *it != c) return -1;
    return it - col_idx_.begin();
}

void SparseMatrix::add(std::size_t r, std::size_t c, double v) {
    const auto k = find(r, c);
    if (k < 0) throw InvalidArgument("SparseMatrix::add: entry not in sparsity pattern");
    values_[static_cast<std::size_t>(k)] += v;
}

double SparseMatrix::operator()(std::size_t r, std::size_t c) const {
    const auto k = find(r, c);
    return k < 0 ? 0.0 : values_[static_cast<std::size_t>(k)];
}

void SparseMatrix::multiply(std::span<const double> x, std::span<double> y) const {
    for (std::size_t r = 0; r < rows_; ++r) {
        double s = 0.0;
        for (std::size_t k = row_ptr_[r]; k < row_ptr_[r + 1]; ++k) s += values_[k] * x[col_idx_[k]];
        y[r] = s;
    }
}

std::vector<double> SparseMatrix::multiply(std::span<const double> x) const {
    std::vector<double> y(rows_);
    multiply(x, y);
    return y;
}

std::vector<double> SparseMatrix::diagonal() const {
    std::vector<double> d(std::min(rows_, cols_), 0.0);
    for (std::size_t r = 0; r < d.size(); ++r) d[r] = (*this)(r, r);
    return d;
}

double SparseMatrix::max_abs() const {
    double m = 0.0;
    for (double v : values_) m = std::max(m, std::abs(v));
    return m;
}

bool SparseMatrix::is_symmetric(double rel_tol) const {
    if (rows_ != cols_) return false;
    const double tol = rel_tol * max_abs();
    for (std::size_t r = 0; r < rows_; ++r) {
        for (std::size_t k = row_ptr_[r]; k < row_ptr_[r + 1]; ++k) {
            if (std::abs(values_[k] - (*this)(col_idx_[k], r)) > tol) return false;
        }
    }
    return true;
}

SparseMatrix SparseMatrix::submatrix(std::span<const std::uint32_t> keep_rows,
                                     std::span<const std::uint32_t> keep_cols) const {
    std::vector<std::int64_t> new_col(cols_, -1);
    for (std::size_t k = 0; k < keep_cols.size(); ++k) new_col[keep_cols[k]] = static_cast<std::int64_t>(k);
    std::vector<std::size_t> ptr(keep_rows.size() + 1, 0);
    std::vector<std::uint32_t> col;
    std::vector<double> val;
    for (std::size_t i = 0; i < keep_rows.size(); ++i) {
        const std::size_t r = keep_rows[i];
        for (std::size_t k = row_ptr_[r]; k < row_ptr_[r + 1]; ++k) {
            const auto c = new_col[col_idx_[k]];
            if (c < 0) continue;
            col.push_back(static_cast<std::uint32_t>(c));
            val.push_back(values_[k]);
        }
        ptr[i + 1] = col.size();
    }
    return SparseMatrix(keep_rows.size(), keep_cols.size(), std::move(ptr), std::move(col), std::move(val));
}

std::string to_string(SolverMethod method) {
    switch (method) {
        case SolverMethod::automatic: return "auto";
        case SolverMethod::cg: return "cg-jacobi";
        case SolverMethod::dense: return "dense-lu";
        case SolverMethod::cholesky: return "sparse-ldlt";
    }
    return "unknown";
}

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

double relative_residual(const SparseMatrix& K, std::span<const double> x, std::span<const double> b,
                         std::vector<double>& r) {
    K.multiply(x, r);
    for (std::size_t i = 0; i < r.size(); ++i) r[i] = b[i] - r[i];
    const double nb = norm2(b);
    return nb > 0.0 ? norm2(r) / nb : norm2(r);
}

Eigen::SparseMatrix<double> to_eigen(const SparseMatrix& K) {
    const auto ptr = K.row_ptr();
    const auto col = K.col_idx();
    const auto val = K.values();
    // CSR of K is CSC of K^T; LDL^T reads only one triangle of a symmetric matrix.
    Eigen::SparseMatrix<double> A(static_cast<Eigen::Index>(K.rows()), static_cast<Eigen::Index>(K.cols()));
    std::vector<Eigen::Triplet<double>> t;
    t.reserve(K.nnz());
    for (std::size_t r = 0; r < K.rows(); ++r)
        for (std::size_t k = ptr[r]; k < ptr[r + 1]; ++k)
            t.emplace_back(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(col[k]), val[k]);
    A.setFromTriplets(t.begin(), t.end());
    return A;
}

std::vector<double> dense_of(const SparseMatrix& K) {
    const std::size_t n = K.rows();
    std::vector<double> a(n * n, 0.0);
    const auto ptr = K.row_ptr();
    const auto col = K.col_idx();
    const auto val = K.values();
    for (std::size_t r = 0; r < n; ++r)
        for (std::size_t k = ptr[r]; k < ptr[r + 1]; ++k) a[r * n + col[k]] = val[k];
    return a;
}

}  // namespace

std::vector<double> dense_lu_solve(std::vector<double> a, std::vector<double> b, std::size_t n) {
    for (std::size_t k = 0; k < n; ++k) {
        std::size_t p = k;
        for (std::size_t i = k + 1; i < n; ++i)
            if (std::abs(a[i * n + k]) > std::abs(a[p * n + k])) p = i;
        if (a[p * n + k] == 0.0) throw InvalidArgument("dense_lu_solve: matrix is singular");
        if (p != k) {
            for (std::size_t j = 0; j < n; ++j) std::swap(a[k * n + j], a[p * n + j]);
            std::swap(b[k], b[p]);
        }
        const double piv = a[k * n + k];
        for (std::size_t i = k + 1; i < n; ++i) {
            const double f = a[i * n + k] / piv;
            if (f == 0.0) continue;
            for (std::size_t j = k + 1; j < n; ++j) a[i * n + j] -= f * a[k * n + j];
            b[i] -= f * b[k];
        }
    }
    for (std::size_t k = n; k-- > 0;) {
        double s = b[k];
        for (std::size_t j = k + 1; j < n; ++j) s -= a[k * n + j] * b[j];
        b[k] = s / a[k * n + k];
    }
    return b;
}

SolveResult conjugate_gradient(const SparseMatrix& K, std::span<const double> b, double tol, int max_iter) {
    const auto t0 = Clock::now();
    const std::size_t n = K.rows();
    SolveResult result;
    result.x.assign(n, 0.0);
    result.report.method = to_string(SolverMethod::cg);
    const double nb = norm2(b);
    if (nb == 0.0) {
        result.report.seconds = seconds_since(t0);
        return result;
    }
    std::vector<double> inv_diag = K.diagonal();
    for (double& d : inv_diag) {
        if (!(d > 0.0)) throw InvalidArgument("conjugate_gradient: non-positive diagonal entry");
        d = 1.0 / d;
    }
    std::vector<double> r(b.begin(), b.end());
    std::vector<double> z(n);
    std::vector<double> p(n);
    std::vector<double> q(n);
    for (std::size_t i = 0; i < n; ++i) z[i] = inv_diag[i] * r[i];
    p = z;
    double rz = dot(r, z);
    int it = 0;
    double res = 1.0;
    while (it < max_iter) {
        K.multiply(p, q);
        const double alpha = rz / dot(p, q);
        for (std::size_t i = 0; i < n; ++i) {
            result.x[i] += alpha * p[i];
            r[i] -= alpha * q[i];
        }
        ++it;
        res = norm2(r) / nb;
        if (res <= tol) break;
        for (std::size_t i = 0; i < n; ++i) z[i] = inv_diag[i] * r[i];
        const double rz_new = dot(r, z);
        const double beta = rz_new / rz;
        rz = rz_new;
        for (std::size_t i = 0; i < n; ++i) p[i] = z[i] + beta * p[i];
    }
    // recompute the true residual; the recurrence drifts slightly
    result.report.residual = relative_residual(K, result.x, b, q);
    result.report.iterations = it;
    result.report.seconds = seconds_since(t0);
    if (result.report.residual > tol && it >= max_iter) {
        std::ostringstream msg;
        msg << "conjugate gradients did not converge in " << max_iter << " iterations (residual "
            << result.report.residual << ")";
        throw ConvergenceFailure(msg.str(), result.report);
    }
    return result;
}

struct SpdFactorization::Impl {
    Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>, Eigen::Lower> ldlt;
};

SpdFactorization::SpdFactorization(const SparseMatrix& K) : impl_(std::make_unique<Impl>()), n_(K.rows()) {
    if (K.rows() != K.cols()) throw InvalidArgument("SpdFactorization: matrix must be square");
    impl_->ldlt.compute(to_eigen(K));
    if (impl_->ldlt.info() != Eigen::Success) {
        throw InvalidArgument("SpdFactorization: matrix is not positive definite");
    }
}

SpdFactorization::~SpdFactorization() = default;
SpdFactorization::SpdFactorization(SpdFactorization&&) noexcept = default;
SpdFactorization& SpdFactorization::operator=(SpdFactorization&&) noexcept = default;

std::vector<double> SpdFactorization::solve(std::span<const double> b) const {
    if (b.size() != n_) throw InvalidArgument("SpdFactorization::solve: size mismatch");
    const Eigen::Map<const Eigen::VectorXd> rhs(b.data(), static_cast<Eigen::Index>(b.size()));
    const Eigen::VectorXd x = impl_->ldlt.solve(rhs);
    return {x.data(), x.data() + x.size()};
}

SolveResult solve_sparse(const SparseMatrix& K, std::span<const double> b, const SolveOptions& options) {
    if (K.rows() != K.cols()) throw InvalidArgument("solve_sparse: matrix must be square");
    if (b.size() != K.rows()) throw InvalidArgument("solve_sparse: right-hand side size mismatch");
    const std::size_t n = K.rows();
    SolverMethod method = options.method;
    const bool symmetric = K.is_symmetric(1e-12);
    if (method == SolverMethod::automatic) {
        if (n < options.dense_below || !symmetric) {
            method = SolverMethod::dense;
        } else {
            method = SolverMethod::cholesky;
        }
    }
    if (method == SolverMethod::cg && !symmetric) method = SolverMethod::dense;
    if (method == SolverMethod::cg) return conjugate_gradient(K, b, options.tol, options.max_iter);

    const auto t0 = Clock::now();
    SolveResult result;
    result.report.method = to_string(method);
    std::vector<double> r(n);
    if (method == SolverMethod::dense) {
        const std::vector<double> a = dense_of(K);
        result.x = dense_lu_solve(a, {b.begin(), b.end()}, n);
        result.report.residual = relative_residual(K, result.x, b, r);
        // iterative refinement
        for (int k = 0; k < 3 && result.report.residual > options.tol; ++k) {
            const auto dx = dense_lu_solve(a, r, n);
            for (std::size_t i = 0; i < n; ++i) result.x[i] += dx[i];
            result.report.residual = relative_residual(K, result.x, b, r);
            ++result.report.iterations;
        }
    } else {
        const SpdFactorization factor(K);
        result.x = factor.solve(b);
        result.report.residual = relative_residual(K, result.x, b, r);
        for (int k = 0; k < 3 && result.report.residual > options.tol; ++k) {
            const auto dx = factor.solve(r);
            for (std::size_t i = 0; i < n; ++i) result.x[i] += dx[i];
            result.report.residual = relative_residual(K, result.x, b, r);
            ++result.report.iterations;
        }
    }
    ++result.report.iterations;
    result.report.seconds = seconds_since(t0);
    if (!(result.report.residual <= options.tol)) {
        std::ostringstream msg;
        msg << to_string(method) << " solve left relative residual " << result.report.residual;
        throw ConvergenceFailure(msg.str(), result.report);
    }
    return result;
}

void write_matrix_market(std::ostream& out, const SparseMatrix& K) {
    out << "%%MatrixMarket matrix coordinate real general\n";
    out << K.rows() << ' ' << K.cols() << ' ' << K.nnz() << '\n';
    const auto old = out.precision(17);
    const auto ptr = K.row_ptr();
    const auto col = K.col_idx();
    const auto val = K.values();
    for (std::size_t r = 0; r < K.rows(); ++r)
        for (std::size_t k = ptr[r]; k < ptr[r + 1]; ++k) out << r + 1 << ' ' << col[k] + 1 << ' ' << val[k] << '\n';
    out.precision(old);
}

}  // namespace msfem
