#pragma once

#include "rmvp/geometry.hpp"
#include "rmvp/materials.hpp"
#include "rmvp/mesh.hpp"

#include <Eigen/Sparse>

#include <array>
#include <functional>
#include <memory>
#include <optional>
#include <utility>
#include <vector>

namespace rmvp {

using SparseMatrix = Eigen::SparseMatrix<double>;
using Vector = Eigen::VectorXd;

/// Out-of-plane potential and in-plane flux density at a point.
struct FieldValue {
    double az = 0.0;  // T·m
    Vec2 b{};         // T
};

/// P1 degrees of freedom on the nodes of the triangles selected by a domain.
/// Dofs are numbered in ascending mesh-node order.
class DofMap {
public:
    DofMap(std::shared_ptr<const Mesh> mesh, Domain domain);

    const Mesh& mesh() const { return *mesh_; }
    const std::shared_ptr<const Mesh>& mesh_ptr() const { return mesh_; }
    Domain domain() const { return domain_; }

    std::size_t size() const { return nodes_.size(); }
    /// Dof of a mesh node, -1 when the node is not in the region.
    int dof(int mesh_node) const { return dof_of_node_[static_cast<std::size_t>(mesh_node)]; }
    int node(int dof) const { return nodes_[static_cast<std::size_t>(dof)]; }
    /// Triangles of the region, ascending.
    const std::vector<int>& triangles() const { return triangles_; }
    std::array<int, 3> element_dofs(int t) const;
    /// Region dofs on the outer boundary of the mesh, ascending.
    const std::vector<int>& boundary_dofs() const { return boundary_dofs_; }

private:
    std::shared_ptr<const Mesh> mesh_;
    Domain domain_;
    std::vector<int> nodes_;
    std::vector<int> dof_of_node_;
    std::vector<int> triangles_;
    std::vector<int> boundary_dofs_;
};

/// Constant gradients of the three hat functions of a triangle.
struct P1Element {
    std::array<Vec2, 3> grad{};
    double area = 0.0;
};

/// Throws ValidationError for elements with area below 1e-16 m².
P1Element p1_element(const Mesh& mesh, int t);

/// Nodal P1 field (Az semantics) on a DofMap.
class FEFunction {
public:
    FEFunction() = default;
    explicit FEFunction(std::shared_ptr<const DofMap> map);
    FEFunction(std::shared_ptr<const DofMap> map, Vector values);

    const DofMap& map() const { return *map_; }
    const std::shared_ptr<const DofMap>& map_ptr() const { return map_; }
    const Vector& values() const { return values_; }
    Vector& values() { return values_; }

    /// Value at a mesh node; throws GeometryError outside the region.
    double at_node(int mesh_node) const;
    /// Element-constant gradient and flux density B = (dAz/dy, -dAz/dx).
    Vec2 gradient(int t) const;
    Vec2 b(int t) const;
    /// Evaluation inside a known triangle of the region.
    FieldValue eval(int t, Vec2 p) const;
    std::optional<FieldValue> try_eval(Vec2 p) const;
    /// Throws GeometryError when p is outside the region.
    FieldValue eval(Vec2 p) const;

private:
    std::shared_ptr<const DofMap> map_;
    Vector values_;
};

/// One scalar per interface node, tangential-H semantics (A/m), expressed in
/// the orientation convention of its curve.
struct TraceFunction {
    std::shared_ptr<const InterfaceCurve> curve;
    Vector values;
};

/// Symmetric system with Dirichlet constraints (dof -> prescribed value).
struct SparseSystem {
    SparseMatrix matrix;
    Vector rhs;
    std::vector<std::pair<int, double>> constraints;
};

/// Stiffness sum_e nu_e area_e grad(phi_i).grad(phi_j) over the region. For a
/// nonlinear material map the element reluctivity is taken at the element's
/// B² from `state`, which must then be given.
SparseMatrix assemble_stiffness(const DofMap& map, const MaterialMap& materials,
                                const FEFunction* state = nullptr);
SparseMatrix assemble_stiffness(const DofMap& map, double nu);

SparseMatrix assemble_mass(const DofMap& map);

struct NewtonSystem {
    SparseMatrix jacobian;
    Vector residual;  // K(state) state - f
};

NewtonSystem assemble_newton(const DofMap& map, const MaterialMap& materials, const FEFunction& state,
                             const Vector& f);

/// Boundary mass coupling between the P1 trace space on the curve (rows,
/// trace index) and the region dofs (columns). Every curve node must be a dof.
SparseMatrix assemble_interface_coupling(const DofMap& map, const InterfaceCurve& curve);

/// b_i = integral over the curve of Kg phi_i with Kg piecewise linear.
Vector assemble_surface_current_rhs(const DofMap& map, const TraceFunction& kg);

/// Eliminates the constraints symmetrically and solves the reduced SPD system
/// by sparse Cholesky, with up to three refinement passes. Throws SolverError
/// if the factorization fails or the relative residual, measured as the
/// normwise backward error |b - K x| / (|K|_F |x| + |b|), exceeds 1e-10.
Vector solve_spd(const SparseSystem& system);

struct SaddleSolution {
    Vector primal;
    Vector multiplier;
};

/// Solves [[K, C^T], [C, 0]] [u; l] = [f; g] by sparse LU, same residual
/// contract as solve_spd.
SaddleSolution solve_saddle(const SparseMatrix& k, const SparseMatrix& c, const Vector& f, const Vector& g);

struct NewtonOptions {
    double rel_tol = 1e-8;
    int max_iterations = 50;
    int max_halvings = 10;
};

struct NewtonResult {
    Vector solution;
    int iterations = 0;
    std::vector<double> residual_history;  // relative residual per iterate
};

/// Solves K(a) a = f with a = 0 on `zero_dofs`. Linear maps take a single
/// Cholesky solve (zero iterations); nonlinear maps run damped Newton from
/// a = 0. Throws SolverError when the line search fails or the iteration
/// limit is reached.
NewtonResult solve_nonlinear(const DofMap& map, const MaterialMap& materials, const Vector& f,
                             const std::vector<int>& zero_dofs, const NewtonOptions& options = {});

// ----------------------------------------------------------------------------
// Quadrature, energy and error norms
// ----------------------------------------------------------------------------

struct QuadPoint {
    Vec2 p;
    double w = 0.0;  // includes the triangle area
};

/// Seven-point degree-5 rule on a triangle given by its corners.
std::array<QuadPoint, 7> triangle_rule(Vec2 a, Vec2 b, Vec2 c);

/// Field sampled at a point known to lie in a triangle of the integration mesh.
using FieldSampler = std::function<FieldValue(int triangle, Vec2 p)>;

/// Sampler for an FE field. When the field lives on `quad_mesh` the triangle
/// hint is used directly, otherwise the point is located in the field's mesh.
FieldSampler make_sampler(const FEFunction& f, const Mesh& quad_mesh);

/// W' = 1/2 sum_e nu_e |B_e|² area_e over the elements of `domain` (exact for
/// P1, element-constant reluctivity).
double energy(const FEFunction& field, const MaterialMap& materials, Domain domain);
/// Same quantity for a general field by the seven-point rule.
double energy(const Mesh& mesh, Domain domain, const MaterialMap& materials, const FieldSampler& field);

enum class Quantity { Az, B };

struct L2Error {
    double absolute = 0.0;
    double relative = 0.0;  // normalized by |f|, 0 when |f| = 0
};

/// L2 norm of f - g over the triangles of `domain` in `mesh`, seven-point rule.
L2Error l2_error(const Mesh& mesh, Domain domain, const FieldSampler& f, const FieldSampler& g, Quantity q);

}  // namespace rmvp
