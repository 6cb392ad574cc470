#pragma once

#include <array>
#include <filesystem>
#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "msfem/coeff.hpp"
#include "msfem/fem.hpp"
#include "msfem/mesh.hpp"
#include "msfem/sparse.hpp"

namespace msfem {

enum class BasisMode { plain, oversampled };
std::string to_string(BasisMode mode);
BasisMode basis_mode_from_string(const std::string& s);

struct BasisOptions {
    /// Target spacing of the local fine meshes (leg length of the fine
    /// right triangles); the element is red-refined until its legs are at
    /// most this long.
    double fine_spacing = 0.0;
    double dilation = 2.0;  ///< oversampled mode only
    PatchOptions patch;
    int workers = 1;
    double tol = 1e-10;
};

/// Red-refinement levels giving local spacing <= fine_spacing on a
/// structured mesh.
int levels_for_spacing(const Mesh& coarse, double fine_spacing);

/// Multiscale shape functions of one coarse element on its refined
/// sub-mesh (the lattice numbering of sub_triangulate_levels).
struct ElementBasis {
    /// phi_i^beta component gamma at local vertex v:
    /// values[((i * m + beta) * n_local + v) * m + gamma]
    std::vector<double> values;
    /// c_ik (identity in plain mode).
    std::array<double, 9> c{1, 0, 0, 0, 1, 0, 0, 0, 1};
    std::optional<Patch> patch;
    double det_q = 1.0;  ///< det [Q_k(x_j)], oversampled mode
};

struct MsBasis {
    BasisMode mode = BasisMode::plain;
    int m = 1;
    int levels = 0;
    double eps = 0.0;
    double dilation = 1.0;
    std::shared_ptr<const Mesh> coarse;
    Rect domain;
    std::vector<ElementBasis> elements;
    std::uint64_t key = 0;

    std::size_t local_vertices() const;
    /// Fine sub-mesh of coarse element e.
    LocalMesh local_mesh(std::size_t e) const;
    double value(std::size_t e, int i, int beta, std::size_t v, int gamma) const;
};

/// Local problems with boundary data lambda_i e^beta on each element.
MsBasis build_basis_plain(std::shared_ptr<const Mesh> coarse, const Rect& domain, const CoefficientField& field,
                          double eps, const BasisOptions& options);
/// Local problems on oversampling simplices, combined so that the linear
/// parts are nodal duals at the element vertices, then restricted to tau.
MsBasis build_basis_oversampled(std::shared_ptr<const Mesh> coarse, const Rect& domain,
                                const CoefficientField& field, double eps, const BasisOptions& options);
MsBasis build_basis(BasisMode mode, std::shared_ptr<const Mesh> coarse, const Rect& domain,
                    const CoefficientField& field, double eps, const BasisOptions& options);

/// Cache key over mesh, field, eps, levels, mode and dilation.
std::uint64_t basis_key(BasisMode mode, const Mesh& coarse, const CoefficientField& field, double eps, int levels,
                        double dilation);

/// Binary blob with an `MSB1` header.
void save_basis(const std::filesystem::path& path, const MsBasis& basis);
/// Throws InvalidArgument on a malformed file or a key mismatch.
MsBasis load_basis(const std::filesystem::path& path, std::shared_ptr<const Mesh> coarse, std::uint64_t expected_key);

/// Loads a cached basis when present under `cache_dir`, otherwise builds and
/// stores it. An empty cache_dir disables caching.
std::shared_ptr<const MsBasis> cached_basis(const std::filesystem::path& cache_dir, BasisMode mode,
                                            std::shared_ptr<const Mesh> coarse, const Rect& domain,
                                            const CoefficientField& field, double eps,
                                            const BasisOptions& options, bool* cache_hit = nullptr);

struct MsSystem {
    SparseMatrix K;  ///< on all coarse dofs
    std::vector<double> b;
    /// 3m x 3m element matrices a_tau(phi_j, phi_i), row-major.
    std::vector<std::vector<double>> element_matrices;
};

/// a_h(phi_j, phi_i) and <f, phi_i> by fine-scale quadrature on each
/// element's sub-mesh.
MsSystem assemble_msfem(const MsBasis& basis, const CoefficientField& field, double eps, const VectorSource& f,
                        int workers = 1);

struct DiscreteSolution {
    std::shared_ptr<const MsBasis> basis;
    std::vector<double> dofs;  ///< coarse vertex-major, m per vertex
    SolveReport report;
};

/// Imposes zero coarse boundary dofs and solves.
DiscreteSolution solve_msfem(std::shared_ptr<const MsBasis> basis, const MsSystem& system,
                             const SolveOptions& options = {});

/// u_h on the sub-mesh of element e, m values per local vertex.
std::vector<double> element_values(const DiscreteSolution& u, std::size_t e);

/// Structured reference grid matching the local sub-meshes.
std::shared_ptr<const Mesh> reference_grid_for(const MsBasis& basis);

/// u_h on the reference grid; vertices shared by several elements take the
/// value of the lowest-index element. Throws InvalidArgument unless
/// `reference` is the structured grid of reference_grid_for.
FeFunction prolongate(const DiscreteSolution& u, std::shared_ptr<const Mesh> reference);

/// (sum_tau ||grad u_h||^2_{L^2(tau)})^{1/2}
double broken_h1_norm(const DiscreteSolution& u);

struct ErrorRecord {
    double energy_broken = 0.0;
    double l2 = 0.0;
    double l3_2 = 0.0;
};

/// Elementwise errors of u_h against u_ref, on the sub-meshes.
ErrorRecord msfem_errors(const DiscreteSolution& u, const FeFunction& u_ref);
double broken_h1_error(const DiscreteSolution& u, const FeFunction& u_ref);

/// (sum over interior coarse edges of ||[u_h]||^2_{L^2(edge)})^{1/2}
double edge_jump_norm(const DiscreteSolution& u);

/// max over elements, nodes and components of |phi_i^beta(x_j) - delta_ij e^beta|
double nodal_duality_defect(const MsBasis& basis);
/// Same for the linear combination sum_k c_ik Q_k evaluated at x_j (exact by
/// construction in both modes).
double linear_duality_defect(const MsBasis& basis);

}  // namespace msfem
