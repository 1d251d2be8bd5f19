#pragma once

#include "rmvp/biot_savart.hpp"
#include "rmvp/fem.hpp"
#include "rmvp/materials.hpp"
#include "rmvp/mesh.hpp"

#include <memory>
#include <string>
#include <utility>
#include <vector>

namespace rmvp {

/// Convex winding cross-section carrying a uniform current density.
struct WindingRegion {
    std::vector<Vec2> polygon;  // counter-clockwise, convex
    double current = 0.0;       // A, signed, +z

    /// Rectangle of size w x h centred at c, rotated by `angle` (rad).
    static WindingRegion rectangle(Vec2 c, double w, double h, double current, double angle = 0.0);

    double area() const;
    Vec2 centroid() const;
    double current_density() const { return current / area(); }
    /// nu x nv line currents at the cell centres of a parallelogram winding
    /// (edges p0->p1 and p0->p3), each carrying current / (nu nv). Other
    /// polygons yield a single line current at the centroid.
    std::vector<LineCurrent> filaments(int nu, int nv) const;
};

/// Clips a triangle against a convex polygon (both counter-clockwise).
std::vector<Vec2> clip_convex(const std::array<Vec2, 3>& tri, const std::vector<Vec2>& polygon);
double polygon_area(const std::vector<Vec2>& p);
Vec2 polygon_centroid(const std::vector<Vec2>& p);

struct StageTimes {
    double source_eval = 0.0;  // s
    double image = 0.0;
    double reaction = 0.0;
    double composition = 0.0;
    double total = 0.0;
};

struct SolveReport {
    std::string formulation;
    std::size_t domain_dofs = 0;
    std::size_t image_dofs = 0;
    std::size_t trace_dofs = 0;
    std::size_t sources = 0;
    std::string source_projection = "none";
    EvalCounters biot_savart;
    int newton_iterations = 0;
    std::vector<double> residual_history;
    double linear_tolerance = 1e-10;
    double newton_tolerance = 1e-8;
    std::string trace_convention;
    double min_source_distance = 0.0;  // to the interface, m
    double delta = 0.0;                // min distance / interface radius
    std::vector<std::string> warnings;
    StageTimes timings;
};

/// Deterministic JSON of a report (timings excluded) and the timings alone.
std::string report_json(const SolveReport& report);
std::string timings_json(const SolveReport& report);

/// Total potential assembled from the parts of a solve.
///
/// Reference: the FE solution. Original: analytic As plus the reduced field Ar.
/// Updated: analytic As + Am + Ag in the air region, Ag in the iron.
class TotalField {
public:
    enum class Kind { Reference, Original, Updated };

    TotalField(Kind kind, SourceSet sources, FEFunction primary, FEFunction image = {});

    Kind kind() const { return kind_; }
    const Mesh& mesh() const { return primary_.map().mesh(); }
    const SourceSet& sources() const { return sources_; }
    /// Reference: A. Original: Ar. Updated: Ag.
    const FEFunction& primary() const { return primary_; }
    /// Updated: Am on the air region; empty otherwise.
    const FEFunction& image() const { return image_; }

    /// Evaluation at p inside triangle t of mesh().
    FieldValue eval(int t, Vec2 p) const;
    /// Throws GeometryError outside the mesh or on a line current.
    FieldValue eval(Vec2 p) const;
    /// Sampler for integration meshes; uses the triangle hint on mesh().
    FieldSampler sampler(const Mesh& quad_mesh) const;

    /// Nodal total potential per mesh node (As interpolated where needed).
    std::vector<double> nodal_total() const;
    /// B at every triangle centroid.
    std::vector<Vec2> centroid_b() const;

private:
    Kind kind_;
    SourceSet sources_;
    FEFunction primary_;
    FEFunction image_;
};

struct Solution {
    TotalField field;
    SolveReport report;
};

/// Volumetric problem -div(nu grad A) = J with A = 0 on the outer boundary.
/// Winding current enters through the exact overlap of each element with the
/// winding polygons; windings must lie in the air region.
Solution solve_reference(std::shared_ptr<const Mesh> mesh, const std::vector<WindingRegion>& windings,
                         const MaterialMap& materials, const NewtonOptions& newton = {});

enum class SourceProjection { Nodal, L2 };

struct OriginalOptions {
    SourceProjection projection = SourceProjection::Nodal;
    NewtonOptions newton;
};

/// Original reduced formulation: As projected on the whole mesh, total
/// potential solved from K(nu) A = K(nu0) As_h with A = 0 on the boundary,
/// Ar = A - As_h.
Solution solve_original(std::shared_ptr<const Mesh> mesh, const SourceSet& sources, const MaterialMap& materials,
                        const OriginalOptions& options = {});

struct ImageSolution {
    FEFunction am;          // on the air region
    TraceFunction lambda;   // n x Hm in the curve's convention
    TraceFunction hs;       // t . Hs in the curve's convention
};

/// Image problem on the air region with the trace constraint Am + As = 0 on
/// the interface imposed by a P1 multiplier.
ImageSolution solve_image(std::shared_ptr<const Mesh> mesh, const SourceSet& sources,
                          std::shared_ptr<const InterfaceCurve> curve);

/// Kg = t . Hs + lambda, node by node. Both traces must live on `curve`.
TraceFunction compute_kg(const TraceFunction& hs, const TraceFunction& lambda);

/// Reaction field on the whole mesh driven by the surface current Kg, with
/// Ag = 0 on the outer boundary. Newton for nonlinear materials.
std::pair<FEFunction, NewtonResult> solve_reaction(std::shared_ptr<const Mesh> mesh, const TraceFunction& kg,
                                                   const MaterialMap& materials, const NewtonOptions& newton = {});

struct UpdatedOptions {
    NewtonOptions newton;
    /// Minimum source-to-interface distance relative to the interface diameter.
    double min_distance_rel = 1e-3;
    /// Delta = distance / interface radius below which a warning is logged.
    double warn_delta = 0.1;
    /// Solve with the flipped orientation convention (n and t negated).
    bool flip_interface = false;
};

Solution solve_updated(std::shared_ptr<const Mesh> mesh, const SourceSet& sources, const MaterialMap& materials,
                       const UpdatedOptions& options = {});

/// Checks the air/iron layout required by the updated formulation: a single
/// interface loop and no air node on the outer boundary. Returns the curve.
InterfaceCurve checked_interface(const Mesh& mesh);

}  // namespace rmvp
