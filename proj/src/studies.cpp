#include "rmvp/studies.hpp"

#include "rmvp/error.hpp"
#include "rmvp/io.hpp"
#include "rmvp/log.hpp"
#include "rmvp/parallel.hpp"

#include <boost/math/distributions/students_t.hpp>
#include <nlohmann/json.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <numbers>

namespace rmvp {

namespace {

constexpr double kPi = std::numbers::pi;

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

MaterialMap linear_iron(double mu_r) { return {MaterialModel(), MaterialModel::linear(mu_r)}; }

nlohmann::ordered_json fit_json(const SlopeFit& f) {
    return {{"slope", f.slope}, {"ci95", f.ci95}, {"intercept", f.intercept},
            {"residual", f.residual}, {"points", f.points}};
}

std::vector<std::string> format_row(const std::vector<double>& v) {
    std::vector<std::string> out;
    out.reserve(v.size());
    for (double x : v) out.push_back(format_number(x));
    return out;
}

// Restores the process worker count on scope exit.
class WorkerScope {
public:
    explicit WorkerScope(int workers) : saved_(worker_count()) { set_worker_count(workers); }
    ~WorkerScope() { set_worker_count(saved_); }
    WorkerScope(const WorkerScope&) = delete;
    WorkerScope& operator=(const WorkerScope&) = delete;

private:
    int saved_;
};

}  // namespace

// ----------------------------------------------------------------------------
// Case layouts
// ----------------------------------------------------------------------------

std::vector<WindingRegion> racetrack_windings(const RacetrackCoil& c) {
    if (c.columns < 0 || c.rows < 0 || !(c.cell > 0.0) || !(c.x_inner > 0.0))
        throw ValidationError("racetrack coil needs non-negative counts, positive cell size and inner offset");
    std::vector<WindingRegion> out;
    for (int side : {1, -1})
        for (int j = 0; j < c.rows; ++j)
            for (int i = 0; i < c.columns; ++i) {
                const double x = side * (c.x_inner + (i + 0.5) * c.cell);
                const double y = c.y_center + (j - 0.5 * (c.rows - 1)) * c.cell;
                out.push_back(WindingRegion::rectangle({x, y}, c.cell, c.cell, side * c.current));
            }
    return out;
}

std::vector<WindingRegion> quadrupole_windings(const QuadrupoleCoil& c) {
    if (c.angles.empty()) throw ValidationError("quadrupole coil needs at least one winding angle");
    for (double a : c.angles)
        if (a < 0.0 || a >= kPi / 4) throw ValidationError("quadrupole winding angles must lie in [0, pi/4)");
    std::vector<WindingRegion> out;
    for (int q = 0; q < 4; ++q)
        for (int mirror = 0; mirror < 2; ++mirror)
            for (double a : c.angles) {
                const double phi = q * kPi / 2 + (mirror ? kPi / 2 - a : a);
                const double sign = std::cos(2 * phi) >= 0.0 ? 1.0 : -1.0;
                const Vec2 center{c.radius * std::cos(phi), c.radius * std::sin(phi)};
                out.push_back(WindingRegion::rectangle(center, c.radial_length, c.width, sign * c.current, phi));
            }
    return out;
}

std::vector<LineCurrent> winding_filaments(const std::vector<WindingRegion>& windings, int nu, int nv) {
    std::vector<LineCurrent> out;
    for (const auto& w : windings) {
        const auto f = w.filaments(nu, nv);
        out.insert(out.end(), f.begin(), f.end());
    }
    return out;
}

// ----------------------------------------------------------------------------
// Fits and records
// ----------------------------------------------------------------------------

SlopeFit fit_loglog(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() != y.size() || x.size() < 3) throw ValidationError("slope fit needs at least three points");
    const std::size_t n = x.size();
    std::vector<double> lx(n), ly(n);
    for (std::size_t i = 0; i < n; ++i) {
        if (!(x[i] > 0.0) || !(y[i] > 0.0)) throw ValidationError("slope fit needs positive data");
        lx[i] = std::log(x[i]);
        ly[i] = std::log(y[i]);
    }
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        mx += lx[i] / static_cast<double>(n);
        my += ly[i] / static_cast<double>(n);
    }
    double sxx = 0.0, sxy = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        sxx += (lx[i] - mx) * (lx[i] - mx);
        sxy += (lx[i] - mx) * (ly[i] - my);
    }
    if (sxx == 0.0) throw ValidationError("slope fit needs distinct abscissae");
    SlopeFit f;
    f.points = static_cast<int>(n);
    f.slope = sxy / sxx;
    f.intercept = my - f.slope * mx;
    double ssr = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double r = ly[i] - (f.intercept + f.slope * lx[i]);
        ssr += r * r;
    }
    f.residual = std::sqrt(ssr / static_cast<double>(n));
    const double dof = static_cast<double>(n - 2);
    if (dof > 0) {
        const boost::math::students_t t(dof);
        f.ci95 = boost::math::quantile(boost::math::complement(t, 0.025)) * std::sqrt(ssr / dof / sxx);
    }
    return f;
}

std::string StudyRecord::csv() const {
    CsvWriter w(header);
    for (const auto& r : rows) w.row(r);
    return w.str();
}

// ----------------------------------------------------------------------------
// Convergence
// ----------------------------------------------------------------------------

ConvergenceResult run_convergence(const ConvergenceConfig& cfg) {
    if (cfg.levels < 3) throw ValidationError("convergence study needs at least three mesh levels");
    if (cfg.reference_extra_levels < 1) throw ValidationError("reference mesh must be finer than the last level");
    if (!(cfg.mesh.eval_radius > 0.0)) throw ValidationError("convergence study needs an evaluation disk");
    const auto windings = racetrack_windings(cfg.coil);
    const SourceSet sources(winding_filaments(windings));
    const MaterialMap mats = linear_iron(cfg.mu_r);

    RectParams rp = cfg.mesh;
    rp.refine = cfg.mesh.refine + cfg.levels - 1 + cfg.reference_extra_levels;
    auto ref_mesh = std::make_shared<const Mesh>(rect_in_rect(rp));
    log::info("convergence: reference mesh with " + std::to_string(ref_mesh->node_count()) + " nodes");
    const Solution ref = [&] {
        try {
            return solve_reference(ref_mesh, windings, mats);
        } catch (const Error& e) {
            throw SolverError(std::string("convergence reference solve failed: ") + e.what());
        }
    }();
    const FieldSampler ref_sampler = ref.field.sampler(*ref_mesh);

    ConvergenceResult out;
    out.reference_h = mesh_length(*ref_mesh);
    out.reference_energy_eval = energy(ref.field.primary(), mats, Domain::Eval);
    for (int level = 0; level < cfg.levels; ++level) {
        rp.refine = cfg.mesh.refine + level;
        auto mesh = std::make_shared<const Mesh>(rect_in_rect(rp));
        const Solution u = solve_updated(mesh, sources, mats);
        // Integrate on the reference mesh so every level shares one quadrature.
        const FieldSampler us = u.field.sampler(*ref_mesh);
        ConvergenceRow row;
        row.h = mesh_length(*mesh);
        row.dofs = u.report.domain_dofs;
        row.rel_err_eval = l2_error(*ref_mesh, Domain::Eval, ref_sampler, us, Quantity::B).relative;
        row.rel_err_total = l2_error(*ref_mesh, Domain::All, ref_sampler, us, Quantity::B).relative;
        row.energy_eval = energy(*mesh, Domain::Eval, mats, u.field.sampler(*mesh));
        log::info("convergence: h = " + format_number(row.h) + " err_eval = " + format_number(row.rel_err_eval));
        out.rows.push_back(row);
    }
    std::vector<double> h, ee, et;
    for (const auto& r : out.rows) {
        h.push_back(r.h);
        ee.push_back(r.rel_err_eval);
        et.push_back(r.rel_err_total);
    }
    out.fit_eval = fit_loglog(h, ee);
    out.fit_total = fit_loglog(h, et);
    return out;
}

StudyRecord ConvergenceResult::record() const {
    StudyRecord r;
    r.study = "convergence";
    r.header = {"h", "rel_err_eval", "rel_err_total", "energy_eval"};
    for (const auto& row : rows) r.rows.push_back(format_row({row.h, row.rel_err_eval, row.rel_err_total, row.energy_eval}));
    nlohmann::ordered_json j;
    j["study"] = r.study;
    j["independent_variable"] = "h_m";
    j["reference_h"] = reference_h;
    j["reference_energy_eval"] = reference_energy_eval;
    j["fit_eval"] = fit_json(fit_eval);
    j["fit_total"] = fit_json(fit_total);
    nlohmann::ordered_json dofs = nlohmann::ordered_json::array();
    for (const auto& row : rows) dofs.push_back(row.dofs);
    j["dofs"] = dofs;
    r.summary_json = j.dump(2) + "\n";
    return r;
}

// ----------------------------------------------------------------------------
// Runtime
// ----------------------------------------------------------------------------

RuntimeResult run_runtime(const RuntimeConfig& cfg) {
    if (cfg.filaments < 1 || cfg.repeats < 1) throw ValidationError("runtime study needs filaments, repeats >= 1");
    const WorkerScope sequential(1);
    auto mesh = std::make_shared<const Mesh>(rect_in_rect(cfg.mesh));
    const SourceSet sources(winding_filaments(racetrack_windings(cfg.coil), cfg.filaments, cfg.filaments));
    const MaterialMap mats = linear_iron(cfg.mu_r);

    RuntimeResult out;
    out.dofs = mesh->node_count();
    out.sources = sources.size();
    out.interface_nodes = extract_interface(*mesh).size();
    std::vector<int> air_nodes;
    {
        std::vector<char> in_air(mesh->node_count(), 0);
        for (const auto& t : mesh->triangles())
            if (t.role == Role::Air)
                for (int v : t.v) in_air[static_cast<std::size_t>(v)] = 1;
        for (std::size_t i = 0; i < in_air.size(); ++i)
            if (in_air[i]) air_nodes.push_back(static_cast<int>(i));
    }
    out.air_nodes = air_nodes.size();

    RuntimeRow orig{"original"}, upd_va{"updated-Va"}, upd_g{"updated-Gamma"};
    for (RuntimeRow* r : {&orig, &upd_va, &upd_g})
        r->total_s = r->biot_savart_s = std::numeric_limits<double>::infinity();
    OriginalOptions oo;
    oo.projection = cfg.projection;
    for (int rep = 0; rep < cfg.repeats; ++rep) {
        {
            const Solution s = solve_original(mesh, sources, mats, oo);
            orig.total_s = std::min(orig.total_s, s.report.timings.total);
            orig.biot_savart_s = std::min(orig.biot_savart_s, s.report.timings.source_eval);
            orig.kernel_evals = s.report.biot_savart.kernels;
        }
        {
            const auto t0 = Clock::now();
            const Solution s = solve_updated(mesh, sources, mats);
            // worst case: the source potential is wanted on all of Va
            const auto ts = Clock::now();
            const SourceSet& ss = s.field.sources();
            const EvalCounters before = ss.eval_count();
            std::vector<double> as(air_nodes.size(), 0.0);
            for (std::size_t i = 0; i < air_nodes.size(); ++i) {
                try {
                    as[i] = ss.az_at(mesh->node(air_nodes[i]));
                } catch (const GeometryError&) {
                    as[i] = std::numeric_limits<double>::quiet_NaN();
                }
            }
            const double extra = seconds_since(ts);
            const double total = seconds_since(t0);
            upd_va.total_s = std::min(upd_va.total_s, total);
            upd_va.biot_savart_s = std::min(upd_va.biot_savart_s, s.report.timings.source_eval + extra);
            upd_va.kernel_evals = s.report.biot_savart.kernels + (ss.eval_count().kernels - before.kernels);
        }
        {
            const Solution s = solve_updated(mesh, sources, mats);
            upd_g.total_s = std::min(upd_g.total_s, s.report.timings.total);
            upd_g.biot_savart_s = std::min(upd_g.biot_savart_s, s.report.timings.source_eval);
            upd_g.kernel_evals = s.report.biot_savart.kernels;
        }
    }
    out.rows = {orig, upd_va, upd_g};
    return out;
}

StudyRecord RuntimeResult::record() const {
    StudyRecord r;
    r.study = "runtime";
    r.header = {"formulation", "total_s", "biot_savart_s", "kernel_evals"};
    for (const auto& row : rows)
        r.rows.push_back({row.formulation, format_number(row.total_s), format_number(row.biot_savart_s),
                          std::to_string(row.kernel_evals)});
    nlohmann::ordered_json j;
    j["study"] = r.study;
    j["independent_variable"] = "formulation";
    j["dofs"] = dofs;
    j["sources"] = sources;
    j["interface_nodes"] = interface_nodes;
    j["air_nodes"] = air_nodes;
    if (rows.size() == 3) {
        const double n_ratio = static_cast<double>(interface_nodes) / static_cast<double>(dofs);
        const double k_ratio = rows[0].kernel_evals ? static_cast<double>(rows[2].kernel_evals) /
                                                          static_cast<double>(rows[0].kernel_evals)
                                                    : 0.0;
        j["kernel_ratio_gamma_vs_original"] = k_ratio;
        j["node_ratio_gamma_vs_total"] = n_ratio;
        j["speedup_gamma_vs_original"] = rows[0].total_s / rows[2].total_s;
        j["speedup_va_vs_original"] = rows[0].total_s / rows[1].total_s;
        j["biot_savart_share_original"] = rows[0].biot_savart_s / rows[0].total_s;
    }
    r.summary_json = j.dump(2) + "\n";
    return r;
}

// ----------------------------------------------------------------------------
// Distance to the interface
// ----------------------------------------------------------------------------

FieldValue grounded_circle_field(double current, double d, double r, Vec2 p) {
    if (!(d > 0.0) || !(d < r)) throw ValidationError("grounded circle needs 0 < d < r");
    const SourceSet pair({{{d, 0.0}, current}, {{r * r / d, 0.0}, -current}});
    FieldValue f = pair.field_at(p);
    f.az += kMu0 * current / (2 * kPi) * std::log(d / r);
    return f;
}

DistanceResult run_distance(const DistanceConfig& cfg) {
    if (cfg.deltas.size() < 3) throw ValidationError("distance study needs at least three Delta values");
    if (!(cfg.source_x > 0.0) || !(cfg.source_x < cfg.r_outer))
        throw ValidationError("distance study source must lie inside the outer circle");
    std::vector<double> deltas = cfg.deltas;
    std::sort(deltas.begin(), deltas.end());
    for (double d : deltas) {
        if (d < 1e-4) throw ValidationError("Delta below 1e-4 is not supported: " + format_number(d));
        if (cfg.source_x / (1.0 - d) >= cfg.r_outer - cfg.h)
            throw ValidationError("Delta " + format_number(d) + " puts the interface outside the outer circle");
    }
    const Vec2 src{cfg.source_x, 0.0};
    const SourceSet sources({{src, cfg.current}});
    const MaterialMap mats = linear_iron(1.0);
    UpdatedOptions uo;
    uo.min_distance_rel = 0.0;
    uo.warn_delta = 0.0;

    DistanceResult out;
    for (double delta : deltas) {
        const double r_gamma = cfg.source_x / (1.0 - delta);
        auto mesh = std::make_shared<const Mesh>(
            disk_in_annulus({.r_gamma = r_gamma, .r_outer = cfg.r_outer, .h = cfg.h, .eval_radius = cfg.eval_radius}));
        const Solution u = solve_updated(mesh, sources, mats, uo);
        double num = 0.0, den = 0.0;
        for (std::size_t t = 0; t < mesh->triangle_count(); ++t) {
            if (!in_domain(mesh->triangles()[t], Domain::Eval)) continue;
            const int ti = static_cast<int>(t);
            const auto& v = mesh->triangles()[t].v;
            for (const auto& q : triangle_rule(mesh->node(v[0]), mesh->node(v[1]), mesh->node(v[2]))) {
                const Vec2 be = grounded_circle_field(cfg.current, cfg.source_x, cfg.r_outer, q.p).b;
                const Vec2 bh = u.field.eval(ti, q.p).b;
                num += q.w * norm2(be - bh);
                den += q.w * norm2(be);
            }
        }
        out.rows.push_back({delta, r_gamma, std::sqrt(num / den)});
        log::info("distance: Delta = " + format_number(delta) + " err = " + format_number(out.rows.back().rel_err));
    }
    out.floor = out.rows.back().rel_err;

    // decaying branch: from the largest error while the error is still clearly
    // above the floor
    const auto peak = std::max_element(out.rows.begin(), out.rows.end(),
                                       [](const DistanceRow& a, const DistanceRow& b) { return a.rel_err < b.rel_err; });
    out.branch_begin = static_cast<std::size_t>(peak - out.rows.begin());
    out.branch_end = out.branch_begin;
    while (out.branch_end < out.rows.size() && out.rows[out.branch_end].rel_err > 3.0 * out.floor &&
           (out.branch_end == out.branch_begin ||
            out.rows[out.branch_end].rel_err < out.rows[out.branch_end - 1].rel_err))
        ++out.branch_end;
    std::vector<double> x, y;
    for (std::size_t i = out.branch_begin; i < out.branch_end; ++i) {
        x.push_back(out.rows[i].delta);
        y.push_back(out.rows[i].rel_err);
    }
    if (x.size() >= 3) out.fit = fit_loglog(x, y);
    else log::warn("distance: decaying branch has fewer than three points, no slope fitted");
    return out;
}

StudyRecord DistanceResult::record() const {
    StudyRecord r;
    r.study = "distance";
    r.header = {"delta_rel", "rel_L2_err_B"};
    for (const auto& row : rows) r.rows.push_back(format_row({row.delta, row.rel_err}));
    nlohmann::ordered_json j;
    j["study"] = r.study;
    j["independent_variable"] = "delta_rel";
    nlohmann::ordered_json radii = nlohmann::ordered_json::array();
    for (const auto& row : rows) radii.push_back(row.r_gamma);
    j["r_gamma"] = radii;
    j["fit_decay"] = fit_json(fit);
    j["fit_range"] = {branch_begin, branch_end};
    j["floor"] = floor;
    r.summary_json = j.dump(2) + "\n";
    return r;
}

// ----------------------------------------------------------------------------
// Multipoles
// ----------------------------------------------------------------------------

double MultipoleSpectrum::dominance(int n) const {
    if (n < 1 || static_cast<std::size_t>(n) > b.size()) throw ValidationError("harmonic order out of range");
    double other = 0.0;
    for (std::size_t m = 0; m < b.size(); ++m)
        if (static_cast<int>(m) + 1 != n) other = std::max(other, std::hypot(b[m], a[m]));
    const double main = std::hypot(b[static_cast<std::size_t>(n - 1)], a[static_cast<std::size_t>(n - 1)]);
    return other > 0.0 ? main / other : std::numeric_limits<double>::infinity();
}

MultipoleSpectrum multipoles(const std::function<Vec2(Vec2)>& b_at, double radius, Vec2 center, int order) {
    if (order < 1 || !(radius > 0.0)) throw ValidationError("multipoles need order >= 1 and a positive radius");
    const int m = 8 * order;
    MultipoleSpectrum s;
    s.radius = radius;
    s.center = center;
    s.b.assign(static_cast<std::size_t>(order), 0.0);
    s.a.assign(static_cast<std::size_t>(order), 0.0);
    for (int k = 0; k < m; ++k) {
        const double phi = 2 * kPi * k / m;
        const Vec2 e{std::cos(phi), std::sin(phi)};
        const double br = dot(b_at(center + e * radius), e);
        for (int n = 1; n <= order; ++n) {
            s.b[static_cast<std::size_t>(n - 1)] += 2.0 / m * br * std::sin(n * phi);
            s.a[static_cast<std::size_t>(n - 1)] += 2.0 / m * br * std::cos(n * phi);
        }
    }
    return s;
}

MultipoleSpectrum multipoles(const TotalField& field, double radius, Vec2 center, int order) {
    for (const auto& src : field.sources().sources())
        if (std::abs(distance(src.position, center) - radius) < 1e-6)
            throw ValidationError("multipole circle passes through a line current");
    const Mesh& mesh = field.mesh();
    if (!mesh.find(center, Domain::Air)) throw ValidationError("multipole circle centre is not in the air region");
    if (mesh.has_role(Role::Iron)) {
        const InterfaceCurve curve = extract_interface(mesh);
        for (const auto& e : curve.edges())
            if (point_segment_distance(center, mesh.node(e.a), mesh.node(e.b)) <= radius)
                throw ValidationError("multipole circle crosses the interface");
    }
    return multipoles([&](Vec2 p) { return field.eval(p).b; }, radius, center, order);
}

// ----------------------------------------------------------------------------
// Quadrupole demo
// ----------------------------------------------------------------------------

QuadrupoleResult run_quadrupole_demo(const QuadrupoleConfig& cfg) {
    auto mesh = std::make_shared<const Mesh>(quadrupole_yoke(cfg.mesh));
    const auto windings = quadrupole_windings(cfg.coil);
    const SourceSet sources(winding_filaments(windings, cfg.filaments_u, cfg.filaments_v));
    MaterialMap mats = linear_iron(cfg.mu_r);
    if (!cfg.bh_curve.empty()) mats.iron = load_bh_csv(cfg.bh_curve);

    QuadrupoleResult out{.updated = solve_updated(mesh, sources, mats),
                         .reference = solve_reference(mesh, windings, mats),
                         .spectrum = {},
                         .reference_spectrum = {},
                         .rel_diff = {}};
    out.spectrum = multipoles(out.updated.field, cfg.multipole_radius, {0, 0}, cfg.multipole_order);
    out.reference_spectrum = multipoles(out.reference.field, cfg.multipole_radius, {0, 0}, cfg.multipole_order);

    const double exclusion = cfg.exclusion_factor * mesh_length(*mesh);
    const auto bu = out.updated.field.centroid_b();
    const auto br = out.reference.field.centroid_b();
    out.rel_diff.assign(mesh->triangle_count(), std::numeric_limits<double>::quiet_NaN());
    std::vector<double> kept;
    for (std::size_t t = 0; t < mesh->triangle_count(); ++t) {
        if (sources.min_distance(mesh->centroid(static_cast<int>(t))) < exclusion) continue;
        const double ref = norm(br[t]);
        if (!(ref > 0.0)) continue;
        out.rel_diff[t] = std::abs(norm(bu[t]) - ref) / ref;
        kept.push_back(out.rel_diff[t]);
    }
    if (kept.empty()) throw ValidationError("quadrupole comparison excluded every element");
    out.compared_elements = kept.size();
    auto quantile = [&](double q) {
        const auto k = static_cast<std::size_t>(q * static_cast<double>(kept.size() - 1));
        std::nth_element(kept.begin(), kept.begin() + static_cast<std::ptrdiff_t>(k), kept.end());
        return kept[k];
    };
    out.median_rel_diff = quantile(0.5);
    out.p90_rel_diff = quantile(0.9);
    return out;
}

StudyRecord QuadrupoleResult::record() const {
    StudyRecord r;
    r.study = "quadrupole";
    r.header = {"n", "B_n", "A_n", "B_n_ref", "A_n_ref"};
    for (std::size_t n = 0; n < spectrum.b.size(); ++n)
        r.rows.push_back(format_row({static_cast<double>(n + 1), spectrum.b[n], spectrum.a[n],
                                     reference_spectrum.b[n], reference_spectrum.a[n]}));
    nlohmann::ordered_json j;
    j["study"] = r.study;
    j["independent_variable"] = "harmonic_order";
    j["reference_radius"] = spectrum.radius;
    j["newton_iterations"] = updated.report.newton_iterations;
    j["final_residual"] = updated.report.residual_history.empty() ? 0.0 : updated.report.residual_history.back();
    j["reference_newton_iterations"] = reference.report.newton_iterations;
    j["dominance_n2"] = spectrum.dominance(2);
    j["median_rel_diff"] = median_rel_diff;
    j["p90_rel_diff"] = p90_rel_diff;
    j["compared_elements"] = compared_elements;
    j["sources"] = updated.report.sources;
    r.summary_json = j.dump(2) + "\n";
    return r;
}

}  // namespace rmvp
