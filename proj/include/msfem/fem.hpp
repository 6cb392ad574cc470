#pragma once

#include <functional>
#include <memory>
#include <span>
#include <vector>

#include "msfem/coeff.hpp"
#include "msfem/mesh.hpp"
#include "msfem/sparse.hpp"

namespace msfem {

/// Continuous P1 function with m components per vertex, stored vertex-major.
struct FeFunction {
    std::shared_ptr<const Mesh> mesh;
    int m = 1;
    std::vector<double> values;

    FeFunction() = default;
    FeFunction(std::shared_ptr<const Mesh> mesh_, int m_);
    FeFunction(std::shared_ptr<const Mesh> mesh_, int m_, std::vector<double> values_);

    double value(std::size_t vertex, int component = 0) const {
        return values[vertex * static_cast<std::size_t>(m) + static_cast<std::size_t>(component)];
    }
};

using ScalarSource = std::function<double(Point2)>;
/// Writes the m components of a vector-valued function at a point.
using VectorSource = std::function<void(Point2, std::span<double>)>;

FeFunction interpolate(std::shared_ptr<const Mesh> mesh, const ScalarSource& f);
FeFunction interpolate(std::shared_ptr<const Mesh> mesh, int m, const VectorSource& f);

struct QuadraturePoint {
    Barycentric bary;
    double weight;  ///< weights sum to 1; multiply by the element area
};

/// Symmetric triangle rules exact for polynomials of degree 1, 2 or 4.
std::span<const QuadraturePoint> triangle_rule(int order);

Point2 map_to_triangle(const Triangle& t, const Barycentric& b);

/// Column pattern coupling all components of vertices that share an element.
SparseMatrix assembly_pattern(const Mesh& mesh, int m);

/// Stiffness of a(u, v) = int grad v . A(x/eps) grad u. `quadrature_order`
/// selects the rule used to average A over each element (1 = midpoint).
/// eps = +infinity is accepted for constant fields only.
SparseMatrix assemble_stiffness(const Mesh& mesh, const CoefficientField& field, double eps,
                                int quadrature_order = 1);

/// Element-averaged coefficient tensor, as used by assembly.
CoeffTensor element_coefficient(const Triangle& t, const CoefficientField& field, double eps,
                                int quadrature_order);

std::vector<double> assemble_load(const Mesh& mesh, const ScalarSource& f, int quadrature_order = 4);
std::vector<double> assemble_load(const Mesh& mesh, int m, const VectorSource& f,
                                  int quadrature_order = 4);

/// Reduced system on the free (non-boundary) dofs after eliminating the
/// prescribed boundary values from rows and columns.
struct DirichletSystem {
    SparseMatrix K;
    std::vector<double> rhs;
    std::vector<std::uint32_t> free_dofs;
    std::vector<double> full;  ///< boundary values in place, zeros elsewhere

    std::vector<double> expand(std::span<const double> reduced) const;
};

/// boundary_values holds nv * m entries; only entries of boundary vertices are
/// read and none of them may be NaN.
DirichletSystem apply_dirichlet(const SparseMatrix& K, std::span<const double> rhs, const Mesh& mesh,
                                int m, std::span<const double> boundary_values);

/// NaN everywhere except boundary vertices, where g is sampled.
std::vector<double> boundary_values_from(const Mesh& mesh, int m, const VectorSource& g);
std::vector<double> zero_boundary_values(const Mesh& mesh, int m);

/// Galerkin P1 solve of -div(A(x/eps) grad u) = f with u = g on the boundary.
struct FeSolve {
    FeFunction u;
    SolveReport report;
};
FeSolve solve_fe(std::shared_ptr<const Mesh> mesh, const CoefficientField& field, double eps,
                 const VectorSource& f, std::span<const double> boundary_values,
                 const SolveOptions& options = {});

double h1_seminorm(const FeFunction& u);
double l2_norm(const FeFunction& u);
/// (int |u|^p)^{1/p} with |.| the Euclidean norm over components; order-4 rule.
double lp_norm(const FeFunction& u, double p);
double energy_form(const FeFunction& u, const FeFunction& v, const CoefficientField& field, double eps,
                   int quadrature_order = 1);

/// u - v for functions on the same mesh.
FeFunction difference(const FeFunction& u, const FeFunction& v);

/// Gradient of component c of u on element e.
Point2 element_gradient(const FeFunction& u, std::size_t e, int component);

/// Value of u at p via mesh.grid point location.
double evaluate(const FeFunction& u, Point2 p, int component = 0);

}  // namespace msfem
