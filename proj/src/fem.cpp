#include "rmvp/fem.hpp"

#include "rmvp/error.hpp"
#include "rmvp/io.hpp"
#include "rmvp/parallel.hpp"

#include <Eigen/SparseCholesky>
#include <Eigen/SparseLU>

#include <algorithm>
#include <cmath>
#include <string>

namespace rmvp {

namespace {

using Triplet = Eigen::Triplet<double>;
using ElementMatrix = std::array<double, 9>;

// iterative refinement passes when a direct solve misses the residual target
constexpr int kRefinementSteps = 3;

SparseMatrix from_element_matrices(const DofMap& map, const std::vector<ElementMatrix>& ke) {
    const auto& tris = map.triangles();
    std::vector<Triplet> trips;
    trips.reserve(tris.size() * 9);
    for (std::size_t e = 0; e < tris.size(); ++e) {
        const auto dofs = map.element_dofs(tris[e]);
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j) trips.emplace_back(dofs[i], dofs[j], ke[e][static_cast<std::size_t>(3 * i + j)]);
    }
    const auto n = static_cast<Eigen::Index>(map.size());
    SparseMatrix k(n, n);
    k.setFromTriplets(trips.begin(), trips.end());
    return k;
}

double element_b2(const P1Element& el, const std::array<int, 3>& dofs, const Vector& a) {
    Vec2 g{};
    for (int i = 0; i < 3; ++i) g += el.grad[static_cast<std::size_t>(i)] * a[dofs[static_cast<std::size_t>(i)]];
    return norm2(g);
}

// Normwise backward error |b - K x| / (|K|_F |x| + |b|).
double relative_residual(const SparseMatrix& k, const Vector& x, const Vector& b) {
    const double scale = k.norm() * x.norm() + b.norm();
    const double nr = (k * x - b).norm();
    return scale > 0.0 ? nr / scale : nr;
}

}  // namespace

// ----------------------------------------------------------------------------
// DofMap
// ----------------------------------------------------------------------------

DofMap::DofMap(std::shared_ptr<const Mesh> mesh, Domain domain) : mesh_(std::move(mesh)), domain_(domain) {
    if (!mesh_) throw ValidationError("DofMap: null mesh");
    const auto& tris = mesh_->triangles();
    std::vector<char> used(mesh_->node_count(), 0);
    for (std::size_t t = 0; t < tris.size(); ++t) {
        if (!in_domain(tris[t], domain_)) continue;
        triangles_.push_back(static_cast<int>(t));
        for (int v : tris[t].v) used[static_cast<std::size_t>(v)] = 1;
    }
    if (triangles_.empty()) throw ValidationError("DofMap: region has no triangles");
    dof_of_node_.assign(mesh_->node_count(), -1);
    for (std::size_t i = 0; i < used.size(); ++i) {
        if (!used[i]) continue;
        dof_of_node_[i] = static_cast<int>(nodes_.size());
        nodes_.push_back(static_cast<int>(i));
    }
    for (int n : mesh_->outer_nodes())
        if (dof(n) >= 0) boundary_dofs_.push_back(dof(n));
}

std::array<int, 3> DofMap::element_dofs(int t) const {
    const auto& v = mesh_->triangles()[static_cast<std::size_t>(t)].v;
    return {dof(v[0]), dof(v[1]), dof(v[2])};
}

P1Element p1_element(const Mesh& mesh, int t) {
    const auto& v = mesh.triangles()[static_cast<std::size_t>(t)].v;
    const Vec2 p0 = mesh.node(v[0]), p1 = mesh.node(v[1]), p2 = mesh.node(v[2]);
    const double a2 = signed_area2(p0, p1, p2);
    if (a2 < 2e-16) throw ValidationError("degenerate element " + std::to_string(t));
    P1Element el;
    el.area = 0.5 * a2;
    el.grad[0] = rotate_ccw(p2 - p1) / a2;
    el.grad[1] = rotate_ccw(p0 - p2) / a2;
    el.grad[2] = rotate_ccw(p1 - p0) / a2;
    return el;
}

// ----------------------------------------------------------------------------
// FEFunction
// ----------------------------------------------------------------------------

FEFunction::FEFunction(std::shared_ptr<const DofMap> map)
    : map_(std::move(map)), values_(Vector::Zero(static_cast<Eigen::Index>(map_->size()))) {}

FEFunction::FEFunction(std::shared_ptr<const DofMap> map, Vector values)
    : map_(std::move(map)), values_(std::move(values)) {
    if (static_cast<std::size_t>(values_.size()) != map_->size())
        throw ValidationError("FEFunction: " + std::to_string(values_.size()) + " values for " +
                              std::to_string(map_->size()) + " dofs");
}

double FEFunction::at_node(int mesh_node) const {
    const int d = map_->dof(mesh_node);
    if (d < 0) throw GeometryError("node " + std::to_string(mesh_node) + " is outside the field's region");
    return values_[d];
}

Vec2 FEFunction::gradient(int t) const {
    const P1Element el = p1_element(map_->mesh(), t);
    const auto dofs = map_->element_dofs(t);
    Vec2 g{};
    for (std::size_t i = 0; i < 3; ++i) g += el.grad[i] * values_[dofs[i]];
    return g;
}

Vec2 FEFunction::b(int t) const {
    const Vec2 g = gradient(t);
    return {g.y, -g.x};
}

FieldValue FEFunction::eval(int t, Vec2 p) const {
    const auto bary = barycentric(map_->mesh(), t, p);
    const auto dofs = map_->element_dofs(t);
    FieldValue out;
    for (std::size_t i = 0; i < 3; ++i) out.az += bary[i] * values_[dofs[i]];
    out.b = b(t);
    return out;
}

std::optional<FieldValue> FEFunction::try_eval(Vec2 p) const {
    const auto loc = map_->mesh().find(p, map_->domain());
    if (!loc) return std::nullopt;
    return eval(loc->triangle, p);
}

FieldValue FEFunction::eval(Vec2 p) const {
    const auto v = try_eval(p);
    if (!v)
        throw GeometryError("point (" + std::to_string(p.x) + ", " + std::to_string(p.y) +
                            ") is outside the field's region");
    return *v;
}

// ----------------------------------------------------------------------------
// Assembly
// ----------------------------------------------------------------------------

SparseMatrix assemble_stiffness(const DofMap& map, const MaterialMap& materials, const FEFunction* state) {
    if (!materials.is_linear() && state == nullptr)
        throw ValidationError("assemble_stiffness: nonlinear material needs a state");
    const Mesh& mesh = map.mesh();
    const auto& tris = map.triangles();
    std::vector<ElementMatrix> ke(tris.size());
    parallel_for(tris.size(), [&](std::size_t e) {
        const int t = tris[e];
        const P1Element el = p1_element(mesh, t);
        const MaterialModel& m = materials(mesh.triangles()[static_cast<std::size_t>(t)].role);
        double nu = m.nu(0.0);
        if (!m.is_linear()) nu = m.nu(element_b2(el, state->map().element_dofs(t), state->values()));
        for (std::size_t i = 0; i < 3; ++i)
            for (std::size_t j = 0; j < 3; ++j) ke[e][3 * i + j] = nu * el.area * dot(el.grad[i], el.grad[j]);
    });
    return from_element_matrices(map, ke);
}

SparseMatrix assemble_stiffness(const DofMap& map, double nu) {
    const Mesh& mesh = map.mesh();
    const auto& tris = map.triangles();
    std::vector<ElementMatrix> ke(tris.size());
    parallel_for(tris.size(), [&](std::size_t e) {
        const P1Element el = p1_element(mesh, tris[e]);
        for (std::size_t i = 0; i < 3; ++i)
            for (std::size_t j = 0; j < 3; ++j) ke[e][3 * i + j] = nu * el.area * dot(el.grad[i], el.grad[j]);
    });
    return from_element_matrices(map, ke);
}

SparseMatrix assemble_mass(const DofMap& map) {
    const Mesh& mesh = map.mesh();
    const auto& tris = map.triangles();
    std::vector<ElementMatrix> me(tris.size());
    parallel_for(tris.size(), [&](std::size_t e) {
        const double area = p1_element(mesh, tris[e]).area;
        for (std::size_t i = 0; i < 3; ++i)
            for (std::size_t j = 0; j < 3; ++j) me[e][3 * i + j] = area * (i == j ? 1.0 / 6.0 : 1.0 / 12.0);
    });
    return from_element_matrices(map, me);
}

NewtonSystem assemble_newton(const DofMap& map, const MaterialMap& materials, const FEFunction& state,
                             const Vector& f) {
    const Mesh& mesh = map.mesh();
    const auto& tris = map.triangles();
    const Vector& a = state.values();
    std::vector<ElementMatrix> je(tris.size());
    std::vector<std::array<double, 3>> re(tris.size());
    parallel_for(tris.size(), [&](std::size_t e) {
        const int t = tris[e];
        const P1Element el = p1_element(mesh, t);
        const auto dofs = map.element_dofs(t);
        const MaterialModel& m = materials(mesh.triangles()[static_cast<std::size_t>(t)].role);
        Vec2 g{};
        for (std::size_t i = 0; i < 3; ++i) g += el.grad[i] * a[dofs[i]];
        const double b2 = norm2(g);
        const double nu = m.nu(b2);
        const double dnu = m.dnu_db2(b2);
        for (std::size_t i = 0; i < 3; ++i) {
            re[e][i] = nu * el.area * dot(el.grad[i], g);
            for (std::size_t j = 0; j < 3; ++j)
                je[e][3 * i + j] = el.area * (nu * dot(el.grad[i], el.grad[j]) +
                                              2.0 * dnu * dot(g, el.grad[i]) * dot(g, el.grad[j]));
        }
    });
    NewtonSystem sys;
    sys.jacobian = from_element_matrices(map, je);
    sys.residual = -f;
    for (std::size_t e = 0; e < tris.size(); ++e) {
        const auto dofs = map.element_dofs(tris[e]);
        for (std::size_t i = 0; i < 3; ++i) sys.residual[dofs[i]] += re[e][i];
    }
    return sys;
}

SparseMatrix assemble_interface_coupling(const DofMap& map, const InterfaceCurve& curve) {
    std::vector<Triplet> trips;
    trips.reserve(curve.edges().size() * 4);
    for (const auto& e : curve.edges()) {
        const int da = map.dof(e.a), db = map.dof(e.b);
        if (da < 0 || db < 0) throw ValidationError("interface node outside the coupling region");
        trips.emplace_back(e.ta, da, e.length / 3.0);
        trips.emplace_back(e.ta, db, e.length / 6.0);
        trips.emplace_back(e.tb, da, e.length / 6.0);
        trips.emplace_back(e.tb, db, e.length / 3.0);
    }
    SparseMatrix c(static_cast<Eigen::Index>(curve.size()), static_cast<Eigen::Index>(map.size()));
    c.setFromTriplets(trips.begin(), trips.end());
    return c;
}

Vector assemble_surface_current_rhs(const DofMap& map, const TraceFunction& kg) {
    if (!kg.curve) throw ValidationError("surface current without interface");
    Vector b = Vector::Zero(static_cast<Eigen::Index>(map.size()));
    for (const auto& e : kg.curve->edges()) {
        const int da = map.dof(e.a), db = map.dof(e.b);
        if (da < 0 || db < 0) throw ValidationError("interface node outside the reaction region");
        const double ka = kg.values[e.ta], kb = kg.values[e.tb];
        b[da] += e.length * (2.0 * ka + kb) / 6.0;
        b[db] += e.length * (ka + 2.0 * kb) / 6.0;
    }
    return b;
}

// ----------------------------------------------------------------------------
// Solvers
// ----------------------------------------------------------------------------

Vector solve_spd(const SparseSystem& system) {
    const SparseMatrix& k = system.matrix;
    const Eigen::Index n = k.rows();
    if (k.cols() != n || system.rhs.size() != n) throw SolverError("solve_spd: dimension mismatch");

    Vector x = Vector::Zero(n);
    std::vector<int> reduced(static_cast<std::size_t>(n), 0);
    for (const auto& [dof, value] : system.constraints) {
        if (dof < 0 || dof >= n) throw SolverError("solve_spd: constraint on dof " + std::to_string(dof));
        reduced[static_cast<std::size_t>(dof)] = -1;
        x[dof] = value;
    }
    Eigen::Index m = 0;
    for (auto& r : reduced)
        if (r == 0) r = static_cast<int>(m++);
        else r = -1;
    if (m == 0) return x;

    // f_free - K_fc x_c
    Vector rhs(m);
    for (Eigen::Index i = 0; i < n; ++i)
        if (reduced[static_cast<std::size_t>(i)] >= 0) rhs[reduced[static_cast<std::size_t>(i)]] = system.rhs[i];
    std::vector<Triplet> trips;
    trips.reserve(static_cast<std::size_t>(k.nonZeros()));
    for (Eigen::Index col = 0; col < k.outerSize(); ++col) {
        const int rc = reduced[static_cast<std::size_t>(col)];
        for (SparseMatrix::InnerIterator it(k, col); it; ++it) {
            const int rr = reduced[static_cast<std::size_t>(it.row())];
            if (rr < 0) continue;
            if (rc >= 0) trips.emplace_back(rr, rc, it.value());
            else rhs[rr] -= it.value() * x[col];
        }
    }
    SparseMatrix kr(m, m);
    kr.setFromTriplets(trips.begin(), trips.end());

    Eigen::SimplicialLLT<SparseMatrix> llt(kr);
    if (llt.info() != Eigen::Success) throw SolverError("Cholesky factorization failed (matrix not SPD)");
    Vector xr = llt.solve(rhs);
    double res = relative_residual(kr, xr, rhs);
    for (int step = 0; step < kRefinementSteps && !(res <= 1e-10); ++step) {
        xr += llt.solve(rhs - kr * xr);
        res = relative_residual(kr, xr, rhs);
    }
    if (!(res <= 1e-10)) throw SolverError("linear solve residual " + format_number(res) + " above 1e-10");
    for (Eigen::Index i = 0; i < n; ++i)
        if (reduced[static_cast<std::size_t>(i)] >= 0) x[i] = xr[reduced[static_cast<std::size_t>(i)]];
    return x;
}

SaddleSolution solve_saddle(const SparseMatrix& k, const SparseMatrix& c, const Vector& f, const Vector& g) {
    const Eigen::Index n = k.rows(), m = c.rows();
    if (k.cols() != n || c.cols() != n || f.size() != n || g.size() != m)
        throw SolverError("solve_saddle: dimension mismatch");
    std::vector<Triplet> trips;
    trips.reserve(static_cast<std::size_t>(k.nonZeros() + 2 * c.nonZeros()));
    for (Eigen::Index col = 0; col < n; ++col)
        for (SparseMatrix::InnerIterator it(k, col); it; ++it) trips.emplace_back(it.row(), col, it.value());
    for (Eigen::Index col = 0; col < n; ++col)
        for (SparseMatrix::InnerIterator it(c, col); it; ++it) {
            trips.emplace_back(n + it.row(), col, it.value());
            trips.emplace_back(col, n + it.row(), it.value());
        }
    SparseMatrix a(n + m, n + m);
    a.setFromTriplets(trips.begin(), trips.end());
    Vector rhs(n + m);
    rhs << f, g;

    Eigen::SparseLU<SparseMatrix> lu;
    lu.analyzePattern(a);
    lu.factorize(a);
    if (lu.info() != Eigen::Success) throw SolverError("saddle-point factorization failed: " + lu.lastErrorMessage());
    Vector x = lu.solve(rhs);
    double res = relative_residual(a, x, rhs);
    for (int step = 0; step < kRefinementSteps && !(res <= 1e-10); ++step) {
        x += lu.solve(rhs - a * x);
        res = relative_residual(a, x, rhs);
    }
    if (!(res <= 1e-10)) throw SolverError("saddle-point residual " + format_number(res) + " above 1e-10");
    return {x.head(n), x.tail(m)};
}

NewtonResult solve_nonlinear(const DofMap& map, const MaterialMap& materials, const Vector& f,
                             const std::vector<int>& zero_dofs, const NewtonOptions& options) {
    std::vector<std::pair<int, double>> constraints;
    constraints.reserve(zero_dofs.size());
    for (int d : zero_dofs) constraints.emplace_back(d, 0.0);

    NewtonResult result;
    if (materials.is_linear()) {
        result.solution = solve_spd({assemble_stiffness(map, materials), f, constraints});
        return result;
    }

    auto shared = std::make_shared<const DofMap>(map);
    FEFunction state(shared);
    auto free_residual = [&](const FEFunction& s, SparseMatrix* jac) {
        NewtonSystem sys = assemble_newton(map, materials, s, f);
        for (int d : zero_dofs) sys.residual[d] = 0.0;
        if (jac) *jac = std::move(sys.jacobian);
        return sys.residual;
    };

    SparseMatrix jac;
    Vector r = free_residual(state, &jac);
    const double r0 = r.norm();
    result.residual_history.push_back(1.0);
    if (r0 == 0.0) {
        result.solution = state.values();
        return result;
    }
    double rel = 1.0;
    while (rel > options.rel_tol) {
        if (result.iterations >= options.max_iterations)
            throw SolverError("Newton did not converge in " + std::to_string(options.max_iterations) +
                              " iterations (relative residual " + std::to_string(rel) + ")");
        const Vector delta = solve_spd({jac, -r, constraints});
        double alpha = 1.0;
        bool accepted = false;
        for (int k = 0; k <= options.max_halvings; ++k, alpha *= 0.5) {
            FEFunction trial(shared, state.values() + alpha * delta);
            Vector rt = free_residual(trial, nullptr);
            if (rt.norm() < r.norm()) {
                state = std::move(trial);
                accepted = true;
                break;
            }
        }
        if (!accepted)
            throw SolverError("Newton line search failed at relative residual " + std::to_string(rel));
        r = free_residual(state, &jac);
        rel = r.norm() / r0;
        ++result.iterations;
        result.residual_history.push_back(rel);
    }
    result.solution = state.values();
    return result;
}

// ----------------------------------------------------------------------------
// Quadrature, energy, errors
// ----------------------------------------------------------------------------

std::array<QuadPoint, 7> triangle_rule(Vec2 a, Vec2 b, Vec2 c) {
    constexpr double w0 = 0.225;
    constexpr double a1 = 0.059715871789770, b1 = 0.470142064105115, w1 = 0.132394152788506;
    constexpr double a2 = 0.797426985353087, b2 = 0.101286507323456, w2 = 0.125939180544827;
    const double area = 0.5 * std::abs(signed_area2(a, b, c));
    auto at = [&](double l0, double l1, double l2) { return a * l0 + b * l1 + c * l2; };
    return {{
        {at(1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0), w0 * area},
        {at(a1, b1, b1), w1 * area},
        {at(b1, a1, b1), w1 * area},
        {at(b1, b1, a1), w1 * area},
        {at(a2, b2, b2), w2 * area},
        {at(b2, a2, b2), w2 * area},
        {at(b2, b2, a2), w2 * area},
    }};
}

FieldSampler make_sampler(const FEFunction& f, const Mesh& quad_mesh) {
    if (&f.map().mesh() == &quad_mesh) {
        return [f](int t, Vec2 p) {
            const auto& tri = f.map().mesh().triangles()[static_cast<std::size_t>(t)];
            return in_domain(tri, f.map().domain()) ? f.eval(t, p) : f.eval(p);
        };
    }
    return [f](int, Vec2 p) { return f.eval(p); };
}

double energy(const FEFunction& field, const MaterialMap& materials, Domain domain) {
    const Mesh& mesh = field.map().mesh();
    double w = 0.0;
    for (int t : field.map().triangles()) {
        const auto& tri = mesh.triangles()[static_cast<std::size_t>(t)];
        if (!in_domain(tri, domain)) continue;
        const double b2 = norm2(field.b(t));
        w += 0.5 * materials(tri.role).nu(b2) * b2 * mesh.area(t);
    }
    return w;
}

double energy(const Mesh& mesh, Domain domain, const MaterialMap& materials, const FieldSampler& field) {
    const auto& tris = mesh.triangles();
    std::vector<double> we(tris.size(), 0.0);
    parallel_for(tris.size(), [&](std::size_t t) {
        if (!in_domain(tris[t], domain)) return;
        const auto& v = tris[t].v;
        const MaterialModel& m = materials(tris[t].role);
        for (const auto& q : triangle_rule(mesh.node(v[0]), mesh.node(v[1]), mesh.node(v[2]))) {
            const double b2 = norm2(field(static_cast<int>(t), q.p).b);
            we[t] += 0.5 * q.w * m.nu(b2) * b2;
        }
    });
    double w = 0.0;
    for (double x : we) w += x;
    return w;
}

L2Error l2_error(const Mesh& mesh, Domain domain, const FieldSampler& f, const FieldSampler& g, Quantity q) {
    const auto& tris = mesh.triangles();
    std::vector<std::array<double, 2>> parts(tris.size(), {0.0, 0.0});
    parallel_for(tris.size(), [&](std::size_t t) {
        if (!in_domain(tris[t], domain)) return;
        const auto& v = tris[t].v;
        for (const auto& qp : triangle_rule(mesh.node(v[0]), mesh.node(v[1]), mesh.node(v[2]))) {
            const FieldValue fv = f(static_cast<int>(t), qp.p);
            const FieldValue gv = g(static_cast<int>(t), qp.p);
            if (q == Quantity::Az) {
                parts[t][0] += qp.w * (fv.az - gv.az) * (fv.az - gv.az);
                parts[t][1] += qp.w * fv.az * fv.az;
            } else {
                parts[t][0] += qp.w * norm2(fv.b - gv.b);
                parts[t][1] += qp.w * norm2(fv.b);
            }
        }
    });
    double err = 0.0, ref = 0.0;
    for (const auto& p : parts) {
        err += p[0];
        ref += p[1];
    }
    L2Error out;
    out.absolute = std::sqrt(err);
    out.relative = ref > 0.0 ? std::sqrt(err / ref) : 0.0;
    return out;
}

}  // namespace rmvp
