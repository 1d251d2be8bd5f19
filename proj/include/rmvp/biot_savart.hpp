#pragma once

#include "rmvp/fem.hpp"
#include "rmvp/geometry.hpp"
#include "rmvp/mesh.hpp"

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <span>
#include <vector>

namespace rmvp {

/// Infinitely long straight wire along z; positive current flows in +z.
struct LineCurrent {
    Vec2 position{};  // m
    double current = 0.0;  // A
};

struct EvalCounters {
    std::uint64_t targets = 0;  // evaluation points
    std::uint64_t kernels = 0;  // (target, source) pairs
};

/// Free-space potential and field of a set of line currents, superposed in
/// list order. Evaluations count targets and kernels atomically; the counters
/// are the only mutable state.
class SourceSet {
public:
    SourceSet() = default;
    explicit SourceSet(std::vector<LineCurrent> sources);
    SourceSet(const SourceSet& other);
    SourceSet& operator=(const SourceSet& other);

    const std::vector<LineCurrent>& sources() const { return sources_; }
    std::size_t size() const { return sources_.size(); }
    bool empty() const { return sources_.empty(); }
    double total_current() const;

    /// Az = sum mu0 I / (2 pi) ln(1 / |r - r_k|). Throws GeometryError within
    /// 1e-12 m of a source.
    double az_at(Vec2 r) const;
    /// H = sum I / (2 pi) (-(y - y_k), x - x_k) / |r - r_k|².
    Vec2 h_at(Vec2 r) const;
    /// Az and B = mu0 H from one pass over the sources (one kernel per source).
    FieldValue field_at(Vec2 r) const;

    /// Smallest distance from r to any source, +inf for an empty set.
    double min_distance(Vec2 r) const;

    EvalCounters eval_count() const;
    void reset_counters() const;
    /// Adds externally performed evaluations (batched kernels).
    void count(std::uint64_t targets, std::uint64_t kernels) const;

private:
    std::vector<LineCurrent> sources_;
    mutable std::atomic<std::uint64_t> targets_{0};
    mutable std::atomic<std::uint64_t> kernels_{0};
};

/// Kernel sums over a subset of sources without counting.
double az_kernel(std::span<const LineCurrent> sources, Vec2 r);

/// a_j = az_at(node_j) for every dof of the map.
FEFunction interpolate_nodal(const SourceSet& sources, std::shared_ptr<const DofMap> map);

struct ProjectionOptions {
    /// Subdivision depth limit for triangles near a source.
    int max_depth = 6;
};

/// Weak L2 projection onto the P1 space of the map. The load vector uses the
/// seven-point rule; for each source closer to a (sub)triangle than its
/// diameter that source's contribution is integrated on the four children,
/// recursively up to max_depth. The mass system is solved by Cholesky.
FEFunction project_l2(const SourceSet& sources, std::shared_ptr<const DofMap> map,
                      const ProjectionOptions& options = {});

/// Per interface node, t.Hs with the curve's node tangent (length-weighted mean
/// of the adjacent edge tangents, so that the trapezoidal circulation of a
/// piecewise-linear trace is exact).
TraceFunction trace_tangential_h(const SourceSet& sources, std::shared_ptr<const InterfaceCurve> curve);

/// Az trace and t.Hs on the interface nodes from a single kernel pass.
struct InterfaceSourceTraces {
    Vector az;
    TraceFunction ht;
};

InterfaceSourceTraces interface_source_traces(const SourceSet& sources,
                                              std::shared_ptr<const InterfaceCurve> curve);

/// Reads sources from CSV with header `x_m,y_m,I_A`.
std::vector<LineCurrent> load_sources_csv(const std::filesystem::path& path);

}  // namespace rmvp
