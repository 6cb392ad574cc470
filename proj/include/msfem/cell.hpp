#pragma once

#include <functional>
#include <iosfwd>
#include <memory>
#include <vector>

#include "msfem/coeff.hpp"
#include "msfem/fem.hpp"
#include "msfem/mesh.hpp"

namespace msfem {

/// Periodic correctors chi_j^beta on Y = [0, 1)^2, one m-component P1
/// function per (j, beta), stored on the non-periodic n x n cell mesh with
/// identified boundary values.
struct CorrectorSet {
    std::shared_ptr<const Mesh> mesh;
    int n_cell = 0;
    int m = 1;
    /// Periodic dof of each mesh vertex.
    std::vector<std::uint32_t> dof_of_vertex;
    /// chi[beta * kDim + j]
    std::vector<FeFunction> chi;
    std::uint64_t field_hash = 0;
    double residual = 0.0;  ///< worst relative residual of the periodic systems

    const FeFunction& corrector(int j, int beta) const { return chi[static_cast<std::size_t>(beta * kDim + j)]; }
    /// d chi_j^{gamma beta} / d y_k on cell element e.
    double gradient(std::size_t e, int j, int beta, int gamma, int k) const;
};

/// Uniform n x n triangulation of [0, 1]^2 with periodic dof identification.
struct PeriodicCellMesh {
    std::shared_ptr<const Mesh> mesh;
    std::vector<std::uint32_t> dof_of_vertex;
    std::size_t num_dofs = 0;
};
PeriodicCellMesh build_periodic_cell_mesh(int n_cell);

/// Solves the cell problems with the mean fixed by pinning one dof and
/// re-centering. Throws InvalidArgument for n_cell < 4 and
/// ConvergenceFailure if a periodic residual exceeds `tol`.
CorrectorSet solve_corrector(const CoefficientField& field, int n_cell, double tol = 1e-10);

struct HomogenizedTensor {
    CoeffTensor value;
    int n_cell = 0;
};

/// Cell average of A (I + grad chi), midpoint rule per cell element. Throws
/// InvalidArgument when the correctors were computed for another field.
HomogenizedTensor homogenized_tensor(const CoefficientField& field, const CorrectorSet& correctors);

/// Mean of each component of chi_j^beta over Y.
double corrector_mean(const CorrectorSet& correctors, int j, int beta, int gamma);
/// ||grad chi_j^beta||_{L^2(Y)}.
double corrector_gradient_norm(const CorrectorSet& correctors, int j, int beta);
/// max |chi| over all nodes and correctors.
double corrector_max_abs(const CorrectorSet& correctors);

/// chi_j^{gamma beta}(y) with y reduced mod 1.
double corrector_value(const CorrectorSet& correctors, Point2 y, int j, int beta, int gamma);

/// Area-weighted average of the element gradients around each vertex.
/// Returns grad[v * m * kDim + beta * kDim + j] = d u^beta / d x_j.
std::vector<double> recover_gradient(const FeFunction& u);

/// Nodal interpolant on `target` of u0 + eps chi(x / eps) grad u0, with grad
/// u0 recovered at the vertices of u0's mesh and interpolated linearly.
/// u0's mesh must come from build_structured_triangulation.
FeFunction first_order_approx(const FeFunction& u0, const CorrectorSet& correctors, double eps,
                              std::shared_ptr<const Mesh> target);

/// Same with an analytic u0 and gradient: value(x, out[m]) and
/// gradient(x, out[m * kDim]) indexed beta * kDim + j.
FeFunction first_order_approx(const VectorSource& u0, const VectorSource& grad_u0, int m,
                              const CorrectorSet& correctors, double eps, std::shared_ptr<const Mesh> target);

/// (int_Y |grad chi|^p)^{1/p}, |.| the Frobenius norm over all j, beta,
/// gamma, k.
double corrector_lp_gradient(const CorrectorSet& correctors, double p);

enum class MultiplierVariant { w1d, linf };

struct MultiplierResult {
    double lhs = 0.0;   ///< eps || grad[chi(x / eps)] psi ||_{L^2(D)}
    double rhs = 0.0;   ///< right-hand side without the constant
    double ratio = 0.0;
};

/// Compares eps || grad[chi(x / eps)] psi || with |D|^{1/2 - 1/d} (||psi||_{L^d}
/// + eps ||grad psi||_{L^d}) (w1d) or (1 + ||chi||_inf)(||psi||_{L^2} +
/// eps ||grad psi||_{L^2}) (linf), D the domain of psi's mesh. The left side
/// is integrated on a sub-lattice of each element fine enough to resolve
/// the cell mesh at scale eps; |grad chi psi| is taken as |grad chi|_F |psi|.
MultiplierResult multiplier_diagnostic(const CorrectorSet& correctors, double eps, const FeFunction& psi,
                                       MultiplierVariant variant);

/// `i,j,alpha,beta,value` rows.
void write_homogenized_csv(std::ostream& out, const HomogenizedTensor& a_hat, int m);
/// `vertex,x,y,chi_<j>_<beta>_<gamma>...` rows.
void write_correctors_csv(std::ostream& out, const CorrectorSet& correctors);

}  // namespace msfem
