#include "rmvp/formulations.hpp"

#include "rmvp/error.hpp"
#include "rmvp/log.hpp"
#include "rmvp/parallel.hpp"

#include <nlohmann/json.hpp>

#include <chrono>
#include <cmath>
#include <limits>
#include <string>

namespace rmvp {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::vector<int> all_boundary(const DofMap& map) { return map.boundary_dofs(); }

}  // namespace

// ----------------------------------------------------------------------------
// Winding geometry
// ----------------------------------------------------------------------------

WindingRegion WindingRegion::rectangle(Vec2 c, double w, double h, double current, double angle) {
    if (!(w > 0.0) || !(h > 0.0)) throw ValidationError("winding rectangle needs positive size");
    const Vec2 u{std::cos(angle), std::sin(angle)};
    const Vec2 v = rotate_ccw(u);
    const Vec2 du = u * (0.5 * w), dv = v * (0.5 * h);
    return {{c - du - dv, c + du - dv, c + du + dv, c - du + dv}, current};
}

double polygon_area(const std::vector<Vec2>& p) {
    double a2 = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) a2 += cross(p[i], p[(i + 1) % p.size()]);
    return 0.5 * a2;
}

Vec2 polygon_centroid(const std::vector<Vec2>& p) {
    double a2 = 0.0;
    Vec2 c{};
    for (std::size_t i = 0; i < p.size(); ++i) {
        const Vec2 a = p[i], b = p[(i + 1) % p.size()];
        const double w = cross(a, b);
        a2 += w;
        c += (a + b) * w;
    }
    if (a2 == 0.0) return p.empty() ? Vec2{} : p.front();
    return c / (3.0 * a2);
}

double WindingRegion::area() const { return polygon_area(polygon); }
Vec2 WindingRegion::centroid() const { return polygon_centroid(polygon); }

std::vector<LineCurrent> WindingRegion::filaments(int nu, int nv) const {
    if (nu < 1 || nv < 1) throw ValidationError("filament counts must be positive");
    const bool parallelogram =
        polygon.size() == 4 && norm(polygon[0] + polygon[2] - polygon[1] - polygon[3]) <= 1e-12 * norm(polygon[1] - polygon[0]);
    if (!parallelogram) return {{centroid(), current}};
    const Vec2 eu = polygon[1] - polygon[0], ev = polygon[3] - polygon[0];
    std::vector<LineCurrent> out;
    out.reserve(static_cast<std::size_t>(nu * nv));
    const double i = current / (nu * nv);
    for (int b = 0; b < nv; ++b)
        for (int a = 0; a < nu; ++a)
            out.push_back({polygon[0] + eu * ((a + 0.5) / nu) + ev * ((b + 0.5) / nv), i});
    return out;
}

std::vector<Vec2> clip_convex(const std::array<Vec2, 3>& tri, const std::vector<Vec2>& polygon) {
    std::vector<Vec2> out(tri.begin(), tri.end());
    for (std::size_t k = 0; k < polygon.size() && !out.empty(); ++k) {
        const Vec2 a = polygon[k], b = polygon[(k + 1) % polygon.size()];
        std::vector<Vec2> in;
        in.swap(out);
        for (std::size_t i = 0; i < in.size(); ++i) {
            const Vec2 p = in[i], q = in[(i + 1) % in.size()];
            const double sp = cross(b - a, p - a), sq = cross(b - a, q - a);
            if (sp >= 0.0) out.push_back(p);
            if ((sp >= 0.0) != (sq >= 0.0)) out.push_back(p + (q - p) * (sp / (sp - sq)));
        }
    }
    if (out.size() < 3) out.clear();
    return out;
}

// ----------------------------------------------------------------------------
// Reports
// ----------------------------------------------------------------------------

std::string report_json(const SolveReport& r) {
    nlohmann::ordered_json j;
    j["formulation"] = r.formulation;
    j["dofs"] = {{"domain", r.domain_dofs}, {"image", r.image_dofs}, {"trace", r.trace_dofs}};
    j["sources"] = r.sources;
    j["source_projection"] = r.source_projection;
    j["biot_savart"] = {{"targets", r.biot_savart.targets}, {"kernels", r.biot_savart.kernels}};
    j["newton"] = {{"iterations", r.newton_iterations}, {"residual_history", r.residual_history},
                   {"tolerance", r.newton_tolerance}};
    j["linear_tolerance"] = r.linear_tolerance;
    if (!r.trace_convention.empty()) {
        j["trace_convention"] = r.trace_convention;
        j["min_source_distance_m"] = r.min_source_distance;
        j["delta"] = r.delta;
    }
    j["warnings"] = r.warnings;
    return j.dump(2) + "\n";
}

std::string timings_json(const SolveReport& r) {
    nlohmann::ordered_json j;
    j["formulation"] = r.formulation;
    j["source_eval_s"] = r.timings.source_eval;
    j["image_s"] = r.timings.image;
    j["reaction_s"] = r.timings.reaction;
    j["composition_s"] = r.timings.composition;
    j["total_s"] = r.timings.total;
    return j.dump(2) + "\n";
}

// ----------------------------------------------------------------------------
// TotalField
// ----------------------------------------------------------------------------

TotalField::TotalField(Kind kind, SourceSet sources, FEFunction primary, FEFunction image)
    : kind_(kind), sources_(std::move(sources)), primary_(std::move(primary)), image_(std::move(image)) {
    if (!primary_.map_ptr()) throw ValidationError("TotalField without a primary field");
    if (kind_ == Kind::Updated && !image_.map_ptr()) throw ValidationError("updated TotalField without image field");
}

FieldValue TotalField::eval(int t, Vec2 p) const {
    const FieldValue a = primary_.eval(t, p);
    const auto role = mesh().triangles()[static_cast<std::size_t>(t)].role;
    if (kind_ == Kind::Reference || (kind_ == Kind::Updated && role == Role::Iron)) return a;
    FieldValue out = sources_.empty() ? FieldValue{} : sources_.field_at(p);
    out.az += a.az;
    out.b += a.b;
    if (kind_ == Kind::Updated) {
        const FieldValue m = image_.eval(t, p);
        out.az += m.az;
        out.b += m.b;
    }
    return out;
}

FieldValue TotalField::eval(Vec2 p) const { return eval(mesh().locate(p).triangle, p); }

FieldSampler TotalField::sampler(const Mesh& quad_mesh) const {
    auto self = std::make_shared<const TotalField>(*this);
    if (&quad_mesh == &mesh()) return [self](int t, Vec2 p) { return self->eval(t, p); };
    return [self](int, Vec2 p) { return self->eval(p); };
}

std::vector<double> TotalField::nodal_total() const {
    const Mesh& m = mesh();
    std::vector<double> out(m.node_count(), 0.0);
    std::vector<char> in_air(m.node_count(), 0);
    for (const auto& t : m.triangles())
        if (t.role == Role::Air)
            for (int v : t.v) in_air[static_cast<std::size_t>(v)] = 1;
    parallel_for(m.node_count(), [&](std::size_t i) {
        const int n = static_cast<int>(i);
        double a = primary_.at_node(n);
        const bool add_source = kind_ == Kind::Original || (kind_ == Kind::Updated && in_air[i]);
        if (kind_ == Kind::Updated && in_air[i]) a += image_.at_node(n);
        if (add_source && !sources_.empty()) {
            try {
                a += sources_.az_at(m.node(n));
            } catch (const GeometryError&) {
                a = std::numeric_limits<double>::quiet_NaN();
            }
        }
        out[i] = a;
    });
    return out;
}

std::vector<Vec2> TotalField::centroid_b() const {
    const Mesh& m = mesh();
    std::vector<Vec2> out(m.triangle_count());
    parallel_for(m.triangle_count(), [&](std::size_t t) {
        const int ti = static_cast<int>(t);
        try {
            out[t] = eval(ti, m.centroid(ti)).b;
        } catch (const GeometryError&) {
            out[t] = {std::numeric_limits<double>::quiet_NaN(), std::numeric_limits<double>::quiet_NaN()};
        }
    });
    return out;
}

// ----------------------------------------------------------------------------
// Reference
// ----------------------------------------------------------------------------

Solution solve_reference(std::shared_ptr<const Mesh> mesh, const std::vector<WindingRegion>& windings,
                         const MaterialMap& materials, const NewtonOptions& newton) {
    const auto t0 = Clock::now();
    auto map = std::make_shared<const DofMap>(mesh, Domain::All);
    Vector f = Vector::Zero(static_cast<Eigen::Index>(map->size()));
    std::vector<double> covered(windings.size(), 0.0);
    for (std::size_t w = 0; w < windings.size(); ++w) {
        const double area = windings[w].area();
        if (!(area > 0.0)) throw ValidationError("winding " + std::to_string(w) + " has no positive area");
    }
    for (int t : map->triangles()) {
        const auto& tri = mesh->triangles()[static_cast<std::size_t>(t)];
        const std::array<Vec2, 3> c{mesh->node(tri.v[0]), mesh->node(tri.v[1]), mesh->node(tri.v[2])};
        const auto dofs = map->element_dofs(t);
        for (std::size_t w = 0; w < windings.size(); ++w) {
            const auto piece = clip_convex(c, windings[w].polygon);
            if (piece.empty()) continue;
            const double area = polygon_area(piece);
            if (area <= 0.0) continue;
            if (tri.role == Role::Air) covered[w] += area;
            const auto bary = barycentric(*mesh, t, polygon_centroid(piece));
            const double j = windings[w].current_density() * area;
            for (std::size_t i = 0; i < 3; ++i) f[dofs[i]] += j * bary[i];
        }
    }
    for (std::size_t w = 0; w < windings.size(); ++w)
        if (std::abs(covered[w] - windings[w].area()) > 1e-9 * windings[w].area())
            throw ValidationError("winding " + std::to_string(w) + " is not contained in the air region");

    const NewtonResult nr = solve_nonlinear(*map, materials, f, all_boundary(*map), newton);
    SolveReport report;
    report.formulation = "reference";
    report.domain_dofs = map->size();
    report.newton_iterations = nr.iterations;
    report.residual_history = nr.residual_history;
    report.newton_tolerance = newton.rel_tol;
    report.timings.reaction = seconds_since(t0);
    report.timings.total = report.timings.reaction;
    return {TotalField(TotalField::Kind::Reference, SourceSet(), FEFunction(map, nr.solution)), report};
}

// ----------------------------------------------------------------------------
// Original reduced formulation
// ----------------------------------------------------------------------------

Solution solve_original(std::shared_ptr<const Mesh> mesh, const SourceSet& sources_in, const MaterialMap& materials,
                        const OriginalOptions& options) {
    const auto t0 = Clock::now();
    SourceSet sources = sources_in;
    sources.reset_counters();
    for (const auto& s : sources.sources())
        if (!mesh->find(s.position, Domain::Air))
            throw ValidationError("line current at (" + std::to_string(s.position.x) + ", " +
                                  std::to_string(s.position.y) + ") is not inside the air region");
    auto map = std::make_shared<const DofMap>(mesh, Domain::All);

    SolveReport report;
    report.formulation = "original";
    report.domain_dofs = map->size();
    report.sources = sources.size();
    report.source_projection = options.projection == SourceProjection::Nodal ? "nodal" : "l2";

    auto ts = Clock::now();
    const FEFunction as = options.projection == SourceProjection::Nodal ? interpolate_nodal(sources, map)
                                                                          : project_l2(sources, map);
    report.timings.source_eval = seconds_since(ts);
    report.biot_savart = sources.eval_count();

    ts = Clock::now();
    const Vector f = assemble_stiffness(*map, kNu0) * as.values();
    const NewtonResult nr = solve_nonlinear(*map, materials, f, all_boundary(*map), options.newton);
    report.timings.reaction = seconds_since(ts);
    report.newton_iterations = nr.iterations;
    report.residual_history = nr.residual_history;
    report.newton_tolerance = options.newton.rel_tol;

    ts = Clock::now();
    FEFunction ar(map, nr.solution - as.values());
    TotalField field(TotalField::Kind::Original, sources, std::move(ar));
    report.timings.composition = seconds_since(ts);
    report.timings.total = seconds_since(t0);
    return {std::move(field), report};
}

// ----------------------------------------------------------------------------
// Updated reduced formulation
// ----------------------------------------------------------------------------

InterfaceCurve checked_interface(const Mesh& mesh) {
    InterfaceCurve curve = extract_interface(mesh);
    if (curve.loops().size() != 1)
        throw ValidationError("air region must be enclosed by a single interface loop, found " +
                              std::to_string(curve.loops().size()));
    std::vector<char> air(mesh.node_count(), 0);
    for (const auto& t : mesh.triangles())
        if (t.role == Role::Air)
            for (int v : t.v) air[static_cast<std::size_t>(v)] = 1;
    for (int n : mesh.outer_nodes())
        if (air[static_cast<std::size_t>(n)])
            throw ValidationError("air region touches the outer boundary; it must be enclosed by iron");
    return curve;
}

namespace {

ImageSolution image_from_traces(std::shared_ptr<const Mesh> mesh, const InterfaceSourceTraces& tr,
                                std::shared_ptr<const InterfaceCurve> curve) {
    auto air = std::make_shared<const DofMap>(mesh, Domain::Air);
    // unit reluctivity keeps the saddle system balanced; lambda scales with nu0
    const SparseMatrix k = assemble_stiffness(*air, 1.0);
    const SparseMatrix c = assemble_interface_coupling(*air, *curve);
    Vector as = Vector::Zero(static_cast<Eigen::Index>(air->size()));
    for (std::size_t i = 0; i < curve->size(); ++i)
        as[air->dof(curve->nodes()[i])] = tr.az[static_cast<Eigen::Index>(i)];
    const Vector g = -(c * as);
    const SaddleSolution s = solve_saddle(k, c, Vector::Zero(k.rows()), g);
    // the saddle system is orientation independent and yields n x Hm for the
    // standard normal; express it in the curve's convention
    return {FEFunction(air, s.primal), {curve, s.multiplier * (kNu0 * curve->sign())}, tr.ht};
}

}  // namespace

ImageSolution solve_image(std::shared_ptr<const Mesh> mesh, const SourceSet& sources,
                          std::shared_ptr<const InterfaceCurve> curve) {
    return image_from_traces(mesh, interface_source_traces(sources, curve), curve);
}

TraceFunction compute_kg(const TraceFunction& hs, const TraceFunction& lambda) {
    if (!hs.curve || hs.curve != lambda.curve)
        throw ValidationError("compute_kg: traces live on different interface conventions");
    return {hs.curve, hs.values + lambda.values};
}

std::pair<FEFunction, NewtonResult> solve_reaction(std::shared_ptr<const Mesh> mesh, const TraceFunction& kg,
                                                   const MaterialMap& materials, const NewtonOptions& newton) {
    auto map = std::make_shared<const DofMap>(mesh, Domain::All);
    const Vector f = assemble_surface_current_rhs(*map, kg) * static_cast<double>(kg.curve->sign());
    NewtonResult nr = solve_nonlinear(*map, materials, f, all_boundary(*map), newton);
    FEFunction ag(map, nr.solution);
    return {std::move(ag), std::move(nr)};
}

Solution solve_updated(std::shared_ptr<const Mesh> mesh, const SourceSet& sources_in, const MaterialMap& materials,
                       const UpdatedOptions& options) {
    const auto t0 = Clock::now();
    SourceSet sources = sources_in;
    sources.reset_counters();
    auto curve = std::make_shared<const InterfaceCurve>(checked_interface(*mesh));
    if (options.flip_interface) curve = std::make_shared<const InterfaceCurve>(curve->flipped());

    SolveReport report;
    report.formulation = "updated";
    report.sources = sources.size();
    report.trace_convention = options.flip_interface
                                  ? "n from iron into air, t = n rotated +90 deg (flipped, sign -1)"
                                  : "n from air into iron, t = n rotated +90 deg (standard, sign +1)";

    const double radius = curve->radius();
    double dmin = std::numeric_limits<double>::infinity();
    for (const auto& s : sources.sources()) {
        if (!mesh->find(s.position, Domain::Air))
            throw ValidationError("line current at (" + std::to_string(s.position.x) + ", " +
                                  std::to_string(s.position.y) + ") is not inside the air region");
        for (const auto& e : curve->edges())
            dmin = std::min(dmin, point_segment_distance(s.position, mesh->node(e.a), mesh->node(e.b)));
    }
    if (!sources.empty()) {
        report.min_source_distance = dmin;
        report.delta = dmin / radius;
        if (dmin < options.min_distance_rel * 2.0 * radius)
            throw ValidationError("line current closer to the interface than " +
                                  std::to_string(options.min_distance_rel * 2.0 * radius) + " m");
        if (report.delta < options.warn_delta) {
            const std::string w = "line current within Delta = " + std::to_string(report.delta) +
                                   " of the interface; accuracy degrades below " + std::to_string(options.warn_delta);
            log::warn(w);
            report.warnings.push_back(w);
        }
    }

    auto ts = Clock::now();
    const InterfaceSourceTraces traces = interface_source_traces(sources, curve);
    report.timings.source_eval = seconds_since(ts);
    ts = Clock::now();
    ImageSolution image = image_from_traces(mesh, traces, curve);
    report.timings.image = seconds_since(ts);
    report.image_dofs = image.am.map().size();
    report.trace_dofs = curve->size();
    report.biot_savart = sources.eval_count();

    ts = Clock::now();
    const TraceFunction kg = compute_kg(image.hs, image.lambda);
    auto [ag, nr] = solve_reaction(mesh, kg, materials, options.newton);
    report.timings.reaction = seconds_since(ts);
    report.domain_dofs = ag.map().size();
    report.newton_iterations = nr.iterations;
    report.residual_history = nr.residual_history;
    report.newton_tolerance = options.newton.rel_tol;

    ts = Clock::now();
    TotalField field(TotalField::Kind::Updated, sources, std::move(ag), std::move(image.am));
    report.timings.composition = seconds_since(ts);
    report.timings.total = seconds_since(t0);
    return {std::move(field), report};
}

}  // namespace rmvp
