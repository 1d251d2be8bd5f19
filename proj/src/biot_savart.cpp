#include "rmvp/biot_savart.hpp"

#include "rmvp/error.hpp"
#include "rmvp/io.hpp"
#include "rmvp/parallel.hpp"

#include <Eigen/SparseCholesky>

#include <cmath>
#include <limits>
#include <numbers>
#include <string>

namespace rmvp {

namespace {

constexpr double kSingular2 = 1e-24;  // (1e-12 m)²
constexpr double kAzFactor = kMu0 / (2.0 * std::numbers::pi);
constexpr double kHFactor = 1.0 / (2.0 * std::numbers::pi);

[[noreturn]] void singular(Vec2 r) {
    throw GeometryError("Biot-Savart evaluation at a line current (" + std::to_string(r.x) + ", " +
                        std::to_string(r.y) + ")");
}

// Az and H of a subset, one kernel per source.
void kernel_sum(std::span<const LineCurrent> sources, Vec2 r, double& az, Vec2& h) {
    double a = 0.0, hx = 0.0, hy = 0.0;
    for (const auto& s : sources) {
        const double dx = r.x - s.position.x, dy = r.y - s.position.y;
        const double d2 = dx * dx + dy * dy;
        if (d2 <= kSingular2) singular(r);
        a += s.current * (-0.5 * std::log(d2));
        const double f = s.current / d2;
        hx -= f * dy;
        hy += f * dx;
    }
    az = kAzFactor * a;
    h = {kHFactor * hx, kHFactor * hy};
}

}  // namespace

// ----------------------------------------------------------------------------
// SourceSet
// ----------------------------------------------------------------------------

SourceSet::SourceSet(std::vector<LineCurrent> sources) : sources_(std::move(sources)) {
    for (const auto& s : sources_)
        if (!std::isfinite(s.position.x) || !std::isfinite(s.position.y) || !std::isfinite(s.current))
            throw ValidationError("line current with non-finite position or current");
}

SourceSet::SourceSet(const SourceSet& other)
    : sources_(other.sources_), targets_(other.targets_.load()), kernels_(other.kernels_.load()) {}

SourceSet& SourceSet::operator=(const SourceSet& other) {
    if (this != &other) {
        sources_ = other.sources_;
        targets_ = other.targets_.load();
        kernels_ = other.kernels_.load();
    }
    return *this;
}

double SourceSet::total_current() const {
    double i = 0.0;
    for (const auto& s : sources_) i += s.current;
    return i;
}

double az_kernel(std::span<const LineCurrent> sources, Vec2 r) {
    double a = 0.0;
    for (const auto& s : sources) {
        const double dx = r.x - s.position.x, dy = r.y - s.position.y;
        const double d2 = dx * dx + dy * dy;
        if (d2 <= kSingular2) singular(r);
        a += s.current * (-0.5 * std::log(d2));
    }
    return kAzFactor * a;
}

double SourceSet::az_at(Vec2 r) const {
    count(1, sources_.size());
    return az_kernel(sources_, r);
}

Vec2 SourceSet::h_at(Vec2 r) const {
    count(1, sources_.size());
    double hx = 0.0, hy = 0.0;
    for (const auto& s : sources_) {
        const double dx = r.x - s.position.x, dy = r.y - s.position.y;
        const double d2 = dx * dx + dy * dy;
        if (d2 <= kSingular2) singular(r);
        const double f = s.current / d2;
        hx -= f * dy;
        hy += f * dx;
    }
    return {kHFactor * hx, kHFactor * hy};
}

FieldValue SourceSet::field_at(Vec2 r) const {
    count(1, sources_.size());
    FieldValue out;
    Vec2 h;
    kernel_sum(sources_, r, out.az, h);
    out.b = h * kMu0;
    return out;
}

double SourceSet::min_distance(Vec2 r) const {
    double d = std::numeric_limits<double>::infinity();
    for (const auto& s : sources_) d = std::min(d, distance(r, s.position));
    return d;
}

EvalCounters SourceSet::eval_count() const { return {targets_.load(), kernels_.load()}; }

void SourceSet::reset_counters() const {
    targets_ = 0;
    kernels_ = 0;
}

void SourceSet::count(std::uint64_t targets, std::uint64_t kernels) const {
    targets_.fetch_add(targets, std::memory_order_relaxed);
    kernels_.fetch_add(kernels, std::memory_order_relaxed);
}

// ----------------------------------------------------------------------------
// Projections
// ----------------------------------------------------------------------------

FEFunction interpolate_nodal(const SourceSet& sources, std::shared_ptr<const DofMap> map) {
    FEFunction f(map);
    Vector& a = f.values();
    if (sources.empty()) return f;
    const Mesh& mesh = map->mesh();
    parallel_for(map->size(), [&](std::size_t d) {
        a[static_cast<Eigen::Index>(d)] = sources.az_at(mesh.node(map->node(static_cast<int>(d))));
    });
    return f;
}

namespace {

struct LoadAccumulator {
    std::array<double, 3> b{};
    std::uint64_t targets = 0;
    std::uint64_t kernels = 0;
};

// Adds int_T az(sources) phi_i over sub-triangle (p0, p1, p2) of element
// (c0, c1, c2), refining for every source within one sub-triangle diameter.
void integrate_load(std::span<const LineCurrent> sources, const std::array<Vec2, 3>& corners,
                    Vec2 p0, Vec2 p1, Vec2 p2, int depth, int max_depth, LoadAccumulator& acc) {
    std::vector<LineCurrent> far, near;
    if (depth < max_depth) {
        const double diam = std::max({distance(p0, p1), distance(p1, p2), distance(p2, p0)});
        for (const auto& s : sources) {
            const Vec2 q = s.position;
            const double a0 = signed_area2(p0, p1, q), a1 = signed_area2(p1, p2, q), a2 = signed_area2(p2, p0, q);
            const bool inside = (a0 >= 0 && a1 >= 0 && a2 >= 0) || (a0 <= 0 && a1 <= 0 && a2 <= 0);
            const double d = inside ? 0.0
                                    : std::min({point_segment_distance(q, p0, p1), point_segment_distance(q, p1, p2),
                                                point_segment_distance(q, p2, p0)});
            (d < diam ? near : far).push_back(s);
        }
    } else {
        far.assign(sources.begin(), sources.end());
    }
    if (!far.empty()) {
        const double area2 = signed_area2(corners[0], corners[1], corners[2]);
        for (const auto& q : triangle_rule(p0, p1, p2)) {
            const double az = az_kernel(far, q.p);
            const std::array<double, 3> phi{signed_area2(q.p, corners[1], corners[2]) / area2,
                                            signed_area2(corners[0], q.p, corners[2]) / area2,
                                            signed_area2(corners[0], corners[1], q.p) / area2};
            for (std::size_t i = 0; i < 3; ++i) acc.b[i] += q.w * az * phi[i];
            acc.targets += 1;
            acc.kernels += far.size();
        }
    }
    if (!near.empty()) {
        const Vec2 m01 = (p0 + p1) * 0.5, m12 = (p1 + p2) * 0.5, m20 = (p2 + p0) * 0.5;
        integrate_load(near, corners, p0, m01, m20, depth + 1, max_depth, acc);
        integrate_load(near, corners, m01, p1, m12, depth + 1, max_depth, acc);
        integrate_load(near, corners, m20, m12, p2, depth + 1, max_depth, acc);
        integrate_load(near, corners, m01, m12, m20, depth + 1, max_depth, acc);
    }
}

}  // namespace

FEFunction project_l2(const SourceSet& sources, std::shared_ptr<const DofMap> map, const ProjectionOptions& options) {
    FEFunction f(map);
    if (sources.empty()) return f;
    const Mesh& mesh = map->mesh();
    const auto& tris = map->triangles();
    std::vector<LoadAccumulator> loads(tris.size());
    parallel_for(tris.size(), [&](std::size_t e) {
        const auto& v = mesh.triangles()[static_cast<std::size_t>(tris[e])].v;
        const std::array<Vec2, 3> c{mesh.node(v[0]), mesh.node(v[1]), mesh.node(v[2])};
        integrate_load(sources.sources(), c, c[0], c[1], c[2], 0, options.max_depth, loads[e]);
    });
    Vector b = Vector::Zero(static_cast<Eigen::Index>(map->size()));
    std::uint64_t targets = 0, kernels = 0;
    for (std::size_t e = 0; e < tris.size(); ++e) {
        const auto dofs = map->element_dofs(tris[e]);
        for (std::size_t i = 0; i < 3; ++i) b[dofs[i]] += loads[e].b[i];
        targets += loads[e].targets;
        kernels += loads[e].kernels;
    }
    sources.count(targets, kernels);

    const SparseMatrix m = assemble_mass(*map);
    Eigen::SimplicialLLT<SparseMatrix> llt(m);
    if (llt.info() != Eigen::Success) throw SolverError("mass matrix factorization failed");
    f.values() = llt.solve(b);
    const double res = (m * f.values() - b).norm();
    if (!(res <= 1e-10 * b.norm())) throw SolverError("L2 projection residual above 1e-10");
    return f;
}

TraceFunction trace_tangential_h(const SourceSet& sources, std::shared_ptr<const InterfaceCurve> curve) {
    TraceFunction tr{curve, Vector::Zero(static_cast<Eigen::Index>(curve->size()))};
    if (sources.empty()) return tr;
    parallel_for(curve->size(), [&](std::size_t i) {
        const int k = static_cast<int>(i);
        tr.values[k] = dot(curve->node_tangent(k), sources.h_at(curve->point(k)));
    });
    return tr;
}

InterfaceSourceTraces interface_source_traces(const SourceSet& sources, std::shared_ptr<const InterfaceCurve> curve) {
    const auto n = static_cast<Eigen::Index>(curve->size());
    InterfaceSourceTraces out{Vector::Zero(n), {curve, Vector::Zero(n)}};
    if (sources.empty()) return out;
    parallel_for(curve->size(), [&](std::size_t i) {
        const int k = static_cast<int>(i);
        Vec2 h;
        kernel_sum(sources.sources(), curve->point(k), out.az[k], h);
        out.ht.values[k] = dot(curve->node_tangent(k), h);
    });
    sources.count(curve->size(), curve->size() * sources.size());
    return out;
}

std::vector<LineCurrent> load_sources_csv(const std::filesystem::path& path) {
    std::vector<LineCurrent> out;
    for (const auto& row : read_csv(path, {"x_m", "y_m", "I_A"})) out.push_back({{row[0], row[1]}, row[2]});
    try {
        SourceSet check(out);
    } catch (const ValidationError& e) {
        throw ValidationError(path.string() + ": " + e.what());
    }
    return out;
}

}  // namespace rmvp
