#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"
#include "msfem/mesh.hpp"

namespace msfem {

inline constexpr int kDim = 2;
inline constexpr int kMaxEquations = 3;
inline constexpr int kMaxDm = kDim * kMaxEquations;

/// Coefficient tensor a_ij^{ab} stored as a dm x dm matrix with row index
/// a*d + i (test side) and column index b*d + j (trial side).
struct CoeffTensor {
    int dm = kDim;
    std::array<double, kMaxDm * kMaxDm> v{};

    double& operator()(int r, int c) { return v[static_cast<std::size_t>(r * kMaxDm + c)]; }
    double operator()(int r, int c) const { return v[static_cast<std::size_t>(r * kMaxDm + c)]; }
    /// a_ij^{ab}
    double at(int i, int j, int a, int b) const { return (*this)(a * kDim + i, b * kDim + j); }

    static CoeffTensor zero(int m);
    static CoeffTensor identity(int m);
    static CoeffTensor scalar(double a, int m = 1);
    double max_abs() const;
    bool is_symmetric(double tol) const;
};

enum class FieldKind { constant, laminate, checkerboard, trigonometric, sampled_grid };

std::string to_string(FieldKind kind);

/// 1-periodic coefficient tensor A(y) on R^2.
class CoefficientField {
public:
    static CoefficientField constant(const CoeffTensor& value);
    /// a(y) = a1 for y_dir mod 1 < fraction, a2 otherwise. For m = 2 the tensor
    /// is a(y) delta_ij M^{ab} with M = [[1, coupling], [coupling, 1]].
    static CoefficientField laminate(double a1, double a2, int direction = 1,
                                     double fraction = 0.5, int m = 1, double coupling = 0.0);
    /// a1 on the cells where (y1 < 1/2) == (y2 < 1/2), a2 on the others.
    static CoefficientField checkerboard(double a1, double a2);
    /// a(y) = mean + amplitude sin(2 pi y1) sin(2 pi y2).
    static CoefficientField trigonometric(double mean = 2.0, double amplitude = 1.0);
    /// Piecewise-constant n x n grid; cells[j * n + i] covers
    /// [i/n, (i+1)/n) x [j/n, (j+1)/n).
    static CoefficientField sampled_grid(int n, std::vector<CoeffTensor> cells, int m);

    FieldKind kind() const { return kind_; }
    int m() const { return m_; }
    int d() const { return kDim; }
    int dm() const { return kDim * m_; }
    bool symmetric() const { return symmetric_; }
    /// True when A(y) = a(y) I with a scalar a(y) (fast assembly path).
    bool is_scalar_isotropic() const;

    CoeffTensor eval(Point2 y) const;
    /// a(y) for scalar-isotropic fields.
    double eval_scalar(Point2 y) const;

    nlohmann::json to_json() const;
    /// Accepts the descriptor written by to_json. `base_dir` resolves the CSV
    /// path of sampled grids. Throws ConfigError naming unknown keys.
    static CoefficientField from_json(const nlohmann::json& j,
                                      const std::filesystem::path& base_dir = {});
    std::uint64_t hash() const;

private:
    FieldKind kind_ = FieldKind::constant;
    int m_ = 1;
    bool symmetric_ = true;
    CoeffTensor constant_{};
    double a1_ = 1.0;
    double a2_ = 1.0;
    int direction_ = 1;
    double fraction_ = 0.5;
    double coupling_ = 0.0;
    double mean_ = 2.0;
    double amplitude_ = 1.0;
    int grid_n_ = 0;
    std::vector<CoeffTensor> cells_;
};

/// Reduces a coordinate to [0, 1).
double periodic_reduce(double y);

CoeffTensor eval_A(const CoefficientField& field, Point2 y);
/// A(x / eps). Throws InvalidArgument for eps <= 0.
CoeffTensor eval_A_eps(const CoefficientField& field, Point2 x, double eps);

struct EllipticityBounds {
    double lambda = 0.0;
    double Lambda = 0.0;
};

/// Extremes of a_ij^{ab}(y) xi_i xi_j eta_a eta_b over a uniform grid of
/// about n_samples points y and n_directions random unit pairs (xi, eta).
/// For m = 1 the extremes over xi are computed exactly from the symmetric
/// part. Throws EllipticityError if lambda_est <= 0.
EllipticityBounds check_ellipticity(const CoefficientField& field, int n_samples,
                                    int n_directions, std::uint64_t seed = 0x5eed);

/// Reads a CSV with one tensor per line (dm*dm entries, row-major), lines
/// ordered row by row of an n x n grid.
CoefficientField load_sampled_grid_csv(const std::filesystem::path& path, int m);

}  // namespace msfem
