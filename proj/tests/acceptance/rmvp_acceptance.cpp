// Acceptance checks C1-C8. Prints one PASS/FAIL line per criterion and exits
// non-zero when any selected criterion fails.

#include "rmvp/biot_savart.hpp"
#include "rmvp/config.hpp"
#include "rmvp/error.hpp"
#include "rmvp/fem.hpp"
#include "rmvp/formulations.hpp"
#include "rmvp/io.hpp"
#include "rmvp/log.hpp"
#include "rmvp/materials.hpp"
#include "rmvp/meshgen.hpp"
#include "rmvp/parallel.hpp"
#include "rmvp/studies.hpp"

#include "CLI11.hpp"
#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <numbers>
#include <random>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

using namespace rmvp;
namespace fs = std::filesystem;

namespace {

constexpr double kPi = std::numbers::pi;

struct Outcome {
    bool pass = false;
    std::string detail;
};

struct Context {
    fs::path cases;
    fs::path cli;
    fs::path scratch;
};

double rate(double e0, double e1, double h0, double h1) { return std::log(e0 / e1) / std::log(h0 / h1); }

std::shared_ptr<const Mesh> shared(Mesh m) { return std::make_shared<const Mesh>(std::move(m)); }

// C1: updated RMVP (line current) against the volumetric winding solve on the
// eccentric tube, on the bundled mesh and on one twice as coarse.
Outcome c1(const Context& ctx) {
    const RunConfig upd = load_config(ctx.cases / "eccentric_tube_updated.toml");
    const RunConfig ref = load_config(ctx.cases / "eccentric_tube_reference.toml");
    std::vector<double> hs, errs;
    for (double scale : {2.0, 1.0}) {
        MeshSpec spec = upd.mesh;
        spec.disk.h *= scale;
        auto mesh = shared(build_mesh(spec));
        const Solution u = solve_updated(mesh, SourceSet(upd.line_currents()), upd.materials(), upd.updated);
        const Solution r = solve_reference(mesh, ref.windings, ref.materials(), ref.newton);
        errs.push_back(l2_error(*mesh, Domain::Eval, r.field.sampler(*mesh), u.field.sampler(*mesh), Quantity::B)
                           .relative);
        hs.push_back(mesh_length(*mesh));
    }
    const double r_gamma = upd.mesh.disk.r_gamma;
    const bool ok = errs[1] <= 0.05 && errs[1] < errs[0] && hs[1] <= 1.1 * r_gamma / 25;
    return {ok, fmt::format("rel L2(V_eval) of B: {:.4f} at h = {:.4f}, {:.4f} at h = {:.4f} (R/25 = {:.4f}); "
                            "limit 0.05, decreasing",
                            errs[1], hs[1], errs[0], hs[0], r_gamma / 25)};
}

// C2: original and updated RMVP on the racetrack, same mesh and line currents.
Outcome c2(const Context& ctx) {
    const RunConfig cfg = load_config(ctx.cases / "racetrack.toml");
    auto mesh = shared(build_mesh(cfg.mesh));
    const SourceSet sources(cfg.line_currents());
    const Solution u = solve_updated(mesh, sources, cfg.materials(), cfg.updated);
    OriginalOptions oo;
    oo.projection = cfg.projection;
    oo.newton = cfg.newton;
    const Solution o = solve_original(mesh, sources, cfg.materials(), oo);
    const double e =
        l2_error(*mesh, Domain::Eval, u.field.sampler(*mesh), o.field.sampler(*mesh), Quantity::B).relative;
    return {e <= 0.01, fmt::format("rel L2(V_eval) of B original vs updated: {:.2e} on {} nodes, {} sources; "
                                   "limit 1e-2",
                                   e, mesh->node_count(), sources.size())};
}

// C3: convergence slopes over at least four halvings.
Outcome c3(const Context& ctx) {
    const RunConfig cfg = load_config(ctx.cases / "convergence.toml");
    const ConvergenceResult r = run_convergence(cfg.convergence);
    const int halvings = static_cast<int>(r.rows.size()) - 1;
    const bool eval_ok = std::abs(r.fit_eval.slope - 1.0) <= 0.2 && r.fit_eval.residual < 0.1;
    const bool total_ok = r.fit_total.slope <= 0.2 && r.fit_total.residual < 0.1;
    return {halvings >= 4 && eval_ok && total_ok,
            fmt::format("{} halvings; slope V_eval {:.3f} +- {:.3f} (log residual {:.3f}), slope V {:.3f} "
                        "(log residual {:.3f}); want 1 +- 0.2 and <= 0.2",
                        halvings, r.fit_eval.slope, r.fit_eval.ci95, r.fit_eval.residual, r.fit_total.slope,
                        r.fit_total.residual)};
}

// C4: kernel counts and wall-clock ordering at >= 1e5 dofs.
Outcome c4(const Context& ctx) {
    const RunConfig cfg = load_config(ctx.cases / "runtime.toml");
    const RuntimeResult r = run_runtime(cfg.runtime);
    const auto& orig = r.rows[0];
    const auto& va = r.rows[1];
    const auto& g = r.rows[2];
    const double k_ratio = static_cast<double>(g.kernel_evals) / static_cast<double>(orig.kernel_evals);
    const double n_ratio = static_cast<double>(r.interface_nodes) / static_cast<double>(r.dofs);
    const double speedup = orig.total_s / g.total_s;
    const bool ok = r.dofs >= 100000 && r.sources >= 8 && k_ratio <= n_ratio + 0.01 && g.total_s < va.total_s &&
                    va.total_s < orig.total_s && speedup >= 10.0;
    return {ok, fmt::format("{} dofs, {} sources; kernel ratio {:.5f} vs node ratio {:.5f}; total s original {:.2f}, "
                            "updated-Va {:.2f}, updated-Gamma {:.2f}; speedup {:.1f} (want >= 10)",
                            r.dofs, r.sources, k_ratio, n_ratio, orig.total_s, va.total_s, g.total_s, speedup)};
}

// C5: decay exponent over the decaying branch and the floor for Delta >= 0.1.
Outcome c5(const Context& ctx) {
    const RunConfig cfg = load_config(ctx.cases / "distance.toml");
    const DistanceResult r = run_distance(cfg.distance);
    double worst_floor = 0.0;
    for (const auto& row : r.rows)
        if (row.delta >= 0.1) worst_floor = std::max(worst_floor, row.rel_err / r.floor);
    const bool floor_ok = worst_floor <= 2.0;
    const double mag = std::abs(r.fit.slope);
    const bool fit_usable = r.fit.points >= 3 && r.fit.residual < 0.1;
    const bool slope_ok = fit_usable && mag >= 3.0 && mag <= 5.0;
    return {floor_ok && slope_ok,
            fmt::format("decay slope {:.2f} +- {:.2f} over {} points (log residual {:.3f}, usable below 0.1); "
                        "max err / floor for Delta >= 0.1: {:.2f} (want <= 2)",
                        r.fit.slope, r.fit.ci95, r.fit.points, r.fit.residual, worst_floor)};
}

// C6: nonlinear quadrupole.
Outcome c6(const Context& ctx) {
    const RunConfig cfg = load_config(ctx.cases / "quadrupole.toml");
    const QuadrupoleResult r = run_quadrupole_demo(cfg.quadrupole);
    const auto& rep = r.updated.report;
    const double final_res = rep.residual_history.empty() ? 0.0 : rep.residual_history.back();
    const double dom = r.spectrum.dominance(2);
    const bool ok = !rep.residual_history.empty() && final_res <= 1e-8 && rep.newton_iterations <= 25 &&
                    r.median_rel_diff >= 1e-3 && r.median_rel_diff <= 1e-1 && dom >= 20.0;
    return {ok, fmt::format("Newton {} iterations, final rel residual {:.2e}; median |B| rel diff {:.4f} over {} "
                            "elements (band [1e-3, 1e-1]); B2 dominance {:.1f} (want >= 20)",
                            rep.newton_iterations, final_res, r.median_rel_diff, r.compared_elements, dom)};
}

// C7: analytic oracles.
Outcome c7(const Context& ctx) {
    std::vector<std::string> failed;
    std::ostringstream detail;

    // energy of a concentric wire in a vacuum annulus a < r < b
    {
        const double a = 0.2, b = 1.0, current = 10.0;
        auto mesh = shared(disk_in_annulus({.r_gamma = a, .r_outer = b, .h = (b - a) / 20}));
        auto map = std::make_shared<const DofMap>(mesh, Domain::Iron);
        const double exact = kMu0 * current * current * std::log(b / a) / (4 * kPi);
        const double w = energy(interpolate_nodal(SourceSet({{{0, 0}, current}}), map), MaterialMap(), Domain::Iron);
        const double e = std::abs(w - exact) / exact;
        detail << fmt::format("energy {:.2e}", e);
        if (!(e < 0.01)) failed.push_back("energy");
    }
    // grounded-cylinder image solution, O(h) in B and Az
    {
        const double current = 100.0, d = 0.8, r = 1.25;
        const SourceSet s({{{d, 0}, current}});
        const FieldSampler exact = [&](int, Vec2 p) {
            FieldValue f = SourceSet({{{r * r / d, 0.0}, -current}}).field_at(p);
            f.az += kMu0 * current / (2 * kPi) * std::log(d / r);
            return f;
        };
        std::vector<double> hs, eb, ea;
        for (double h : {0.1, 0.05, 0.025}) {
            auto mesh = shared(disk_in_annulus({.r_gamma = r, .r_outer = 2.0, .h = h, .eval_radius = 0.5}));
            auto curve = std::make_shared<const InterfaceCurve>(checked_interface(*mesh));
            const ImageSolution im = solve_image(mesh, s, curve);
            eb.push_back(l2_error(*mesh, Domain::Air, exact, make_sampler(im.am, *mesh), Quantity::B).relative);
            ea.push_back(l2_error(*mesh, Domain::Air, exact, make_sampler(im.am, *mesh), Quantity::Az).relative);
            hs.push_back(mesh_length(*mesh));
        }
        double worst = 1e300;
        for (std::size_t i = 1; i < hs.size(); ++i)
            worst = std::min({worst, rate(eb[i - 1], eb[i], hs[i - 1], hs[i]), rate(ea[i - 1], ea[i], hs[i - 1], hs[i])});
        detail << fmt::format(", image rate {:.2f}", worst);
        if (!(worst >= 0.9)) failed.push_back("image rate");
    }
    // Newton Jacobian against central differences of the residual
    {
        auto mesh = shared(disk_in_annulus({.r_gamma = 0.5, .r_outer = 1.0, .h = 0.08}));
        auto map = std::make_shared<const DofMap>(mesh, Domain::All);
        const auto n = static_cast<Eigen::Index>(map->size());
        std::mt19937 rng(11);
        std::uniform_real_distribution<double> u(-1.0, 1.0);
        Vector f(n), a(n), dir(n);
        for (Eigen::Index i = 0; i < n; ++i) {
            f[i] = u(rng);
            a[i] = 0.15 * u(rng);
            dir[i] = u(rng);
        }
        const fs::path steel = ctx.cases.parent_path() / "data" / "steel_bh.csv";
        double worst = 0.0;
        for (const auto& model : {MaterialModel::linear(4000), load_bh_csv(steel)}) {
            const MaterialMap mats{MaterialModel(), model};
            const NewtonSystem sys = assemble_newton(*map, mats, FEFunction(map, a), f);
            const double eps = 1e-7;
            const Vector rp = assemble_newton(*map, mats, FEFunction(map, a + eps * dir), f).residual;
            const Vector rm = assemble_newton(*map, mats, FEFunction(map, a - eps * dir), f).residual;
            const Vector jd = sys.jacobian * dir;
            worst = std::max(worst, ((rp - rm) / (2 * eps) - jd).norm() / jd.norm());
        }
        detail << fmt::format(", Jacobian {:.2e}", worst);
        if (!(worst < 1e-5)) failed.push_back("Jacobian");
    }
    // Ampere circulation: 360-gon around a wire and the discrete trace on Gamma
    {
        const SourceSet w({{{0.13, -0.07}, 2.5}});
        double circ = 0.0;
        for (int k = 0; k < 360; ++k) {
            const double t0 = 2 * kPi * k / 360, t1 = 2 * kPi * (k + 1) / 360;
            const Vec2 p0{0.5 * std::cos(t0), 0.5 * std::sin(t0)}, p1{0.5 * std::cos(t1), 0.5 * std::sin(t1)};
            circ += dot(w.h_at((p0 + p1) * 0.5), p1 - p0);
        }
        const double e_poly = std::abs(circ - 2.5) / 2.5;

        auto mesh = shared(disk_in_annulus({.r_gamma = 1.25, .r_outer = 2.0, .h = 0.05}));
        auto curve = std::make_shared<const InterfaceCurve>(checked_interface(*mesh));
        const TraceFunction t = trace_tangential_h(SourceSet({{{0.8, 0.0}, 100.0}}), curve);
        double ct = 0.0;
        for (const auto& e : curve->edges()) ct += 0.5 * e.length * (t.values[e.ta] + t.values[e.tb]);
        const double e_trace = std::abs(ct - 100.0) / 100.0;
        detail << fmt::format(", circulation {:.2e} / {:.2e}", e_poly, e_trace);
        if (!(std::max(e_poly, e_trace) < 1e-3)) failed.push_back("circulation");
    }
    if (!failed.empty()) {
        detail << "; failed:";
        for (const auto& f : failed) detail << ' ' << f;
    }
    return {failed.empty(), detail.str()};
}

// Files of an output directory by name. Wall-clock data is dropped: the whole
// timings.json, the time columns of runtime.csv and the time-derived keys of
// runtime_summary.json.
std::map<std::string, std::string> comparable_outputs(const fs::path& dir) {
    std::map<std::string, std::string> out;
    for (const auto& entry : fs::directory_iterator(dir)) {
        const std::string name = entry.path().filename().string();
        if (name == "timings.json") continue;
        std::string text = read_text(entry.path());
        if (name == "runtime.csv") {
            std::istringstream in(text);
            std::string line, kept;
            while (std::getline(in, line)) {
                const auto first = line.find(',');
                const auto last = line.rfind(',');
                kept += line.substr(0, first) + line.substr(last) + "\n";
            }
            text = kept;
        } else if (name == "runtime_summary.json") {
            auto j = nlohmann::ordered_json::parse(text);
            for (const char* key : {"speedup_gamma_vs_original", "speedup_va_vs_original", "biot_savart_share_original"})
                j.erase(key);
            text = j.dump();
        }
        out[name] = std::move(text);
    }
    return out;
}

// C8: every CI-sized bundled config, run twice through the CLI with one worker.
Outcome c8(const Context& ctx) {
    if (ctx.cli.empty() || !fs::exists(ctx.cli)) return {false, "CLI binary not found; pass --cli"};
    const fs::path ci = ctx.cases / "ci";
    std::vector<fs::path> configs;
    for (const auto& e : fs::directory_iterator(ci))
        if (e.path().extension() == ".toml") configs.push_back(e.path());
    std::sort(configs.begin(), configs.end());
    static const std::vector<std::string> studies{"convergence", "runtime", "distance", "quadrupole"};

    std::vector<std::string> differing;
    std::size_t files = 0;
    for (const auto& cfg : configs) {
        const std::string stem = cfg.stem().string();
        const bool is_study = std::find(studies.begin(), studies.end(), stem) != studies.end();
        std::map<std::string, std::string> runs[2];
        for (int k = 0; k < 2; ++k) {
            const fs::path out = ctx.scratch / fmt::format("{}_{}", stem, k);
            fs::remove_all(out);
            const std::string cmd =
                fmt::format("\"{}\" {} --config \"{}\" --out \"{}\" --workers 1 > \"{}.log\" 2>&1", ctx.cli.string(),
                            is_study ? "study " + stem : std::string("solve"), cfg.string(), out.string(),
                            out.string());
            if (std::system(cmd.c_str()) != 0) return {false, fmt::format("CLI run failed for {}", cfg.string())};
            runs[k] = comparable_outputs(out);
        }
        if (runs[0] != runs[1]) differing.push_back(stem);
        files += runs[0].size();
    }
    std::string detail = fmt::format("{} configs run twice with --workers 1, {} output files compared", configs.size(),
                                     files);
    if (!differing.empty()) {
        detail += "; differing:";
        for (const auto& d : differing) detail += " " + d;
    }
    return {!configs.empty() && differing.empty(), detail};
}

}  // namespace

int main(int argc, char** argv) {
    log::init_from_env();
    CLI::App app{"rmvp acceptance checks"};
    std::vector<std::string> only;
    Context ctx;
    ctx.cases = fs::path(RMVP_SOURCE_DIR) / "cases";
    int workers = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
    app.add_option("--only", only, "criteria to run, e.g. C1 C4 (default all)");
    app.add_option("--cases", ctx.cases, "directory of bundled configs");
    app.add_option("--cli", ctx.cli, "path of the rmvp executable (C8)");
    app.add_option("--workers", workers, "worker threads for C1-C3, C5-C7");
    CLI11_PARSE(app, argc, argv);
    ctx.scratch = fs::temp_directory_path() / fmt::format("rmvp_acceptance_{}", std::chrono::steady_clock::now()
                                                                                     .time_since_epoch()
                                                                                     .count());
    fs::create_directories(ctx.scratch);
    set_worker_count(workers);

    const std::vector<std::pair<std::string, std::function<Outcome(const Context&)>>> criteria{
        {"C1", c1}, {"C2", c2}, {"C3", c3}, {"C4", c4}, {"C5", c5}, {"C6", c6}, {"C7", c7}, {"C8", c8}};
    bool all = true;
    for (const auto& [id, fn] : criteria) {
        if (!only.empty() && std::find(only.begin(), only.end(), id) == only.end()) continue;
        const auto t0 = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = fn(ctx);
        } catch (const std::exception& e) {
            o = {false, std::string("error: ") + e.what()};
        }
        const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        std::cout << fmt::format("{} {} {} [{:.1f} s]", id, o.pass ? "PASS" : "FAIL", o.detail, s) << std::endl;
        all = all && o.pass;
    }
    fs::remove_all(ctx.scratch);
    return all ? EXIT_SUCCESS : EXIT_FAILURE;
}
