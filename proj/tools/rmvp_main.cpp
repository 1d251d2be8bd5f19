// rmvp command-line entry point: solve, study, meshgen, validate.

#include "rmvp/config.hpp"
#include "rmvp/error.hpp"
#include "rmvp/io.hpp"
#include "rmvp/log.hpp"
#include "rmvp/parallel.hpp"
#include "rmvp/studies.hpp"

#include "CLI11.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <iostream>
#include <limits>
#include <optional>
#include <string>

namespace fs = std::filesystem;
using namespace rmvp;

namespace {

struct GlobalOptions {
    std::string config;
    std::string out = "out";
    std::optional<int> workers;
    std::uint64_t seed = 0;
    bool validate_only = false;
};

const std::vector<std::string> kStudies{"convergence", "runtime", "distance", "quadrupole"};

RunConfig load(const GlobalOptions& g) {
    if (g.config.empty()) throw ConfigError("--config <path> is required");
    RunConfig c = load_config(g.config);
    if (g.workers) {
        if (*g.workers < 1) throw ConfigError("--workers must be at least 1");
        c.workers = *g.workers;
    }
    if (g.seed) c.seed = g.seed;
    set_worker_count(c.workers);
    log::debug("workers " + std::to_string(c.workers) + ", seed " + std::to_string(c.seed));
    return c;
}

std::vector<double> nodal(const FEFunction& f) {
    const Mesh& m = f.map().mesh();
    std::vector<double> out(m.node_count(), 0.0);
    for (std::size_t d = 0; d < f.map().size(); ++d)
        out[static_cast<std::size_t>(f.map().node(static_cast<int>(d)))] = f.values()[static_cast<Eigen::Index>(d)];
    return out;
}

std::vector<Vec2> element_b(const FEFunction& f) {
    std::vector<Vec2> out(f.map().mesh().triangle_count());
    for (int t : f.map().triangles()) out[static_cast<std::size_t>(t)] = f.b(t);
    return out;
}

// Checks that must pass before any solve; returns the mesh.
std::shared_ptr<const Mesh> validate(const RunConfig& c) {
    if (c.mesh.file.empty() && c.mesh.generator.empty()) throw ConfigError("missing [mesh] table");
    auto mesh = std::make_shared<const Mesh>(build_mesh(c.mesh));
    (void)c.materials();
    if (c.formulation == "reference") {
        if (c.windings.empty()) throw ConfigError("reference formulation needs [[windings]] or a [coil]");
    } else {
        for (const auto& s : c.line_currents())
            if (!mesh->find(s.position, Domain::Air))
                throw ValidationError("line current at (" + format_number(s.position.x) + ", " +
                                      format_number(s.position.y) + ") is not inside the air region");
        if (c.formulation == "updated") (void)checked_interface(*mesh);
    }
    for (const auto& p : c.eval_points)
        if (!mesh->find(p))
            throw ValidationError("evaluation point (" + format_number(p.x) + ", " + format_number(p.y) +
                                  ") is outside the mesh");
    return mesh;
}

int cmd_solve(const GlobalOptions& g) {
    const RunConfig c = load(g);
    auto mesh = validate(c);
    if (g.validate_only) {
        std::cout << "config ok: " << mesh->node_count() << " nodes, " << mesh->triangle_count() << " triangles, "
                  << c.line_currents().size() << " line currents, " << c.windings.size() << " windings\n";
        return 0;
    }
    const fs::path out = g.out;
    const MaterialMap mats = c.materials();
    Solution s = [&] {
        if (c.formulation == "reference") return solve_reference(mesh, c.windings, mats, c.newton);
        const SourceSet sources(c.line_currents());
        if (c.formulation == "original") {
            OriginalOptions o;
            o.projection = c.projection;
            o.newton = c.newton;
            return solve_original(mesh, sources, mats, o);
        }
        return solve_updated(mesh, sources, mats, c.updated);
    }();
    write_text(out / "report.json", report_json(s.report));
    write_text(out / "timings.json", timings_json(s.report));

    const TotalField& f = s.field;
    if (c.write_vtk) {
        write_vtk(out / "total.vtk", *mesh, Domain::All, {{{"Az", f.nodal_total()}}, {{"B", f.centroid_b()}}},
                  "total potential (" + c.formulation + ")");
        if (c.formulation == "updated") {
            std::vector<double> as(mesh->node_count(), 0.0);
            std::vector<Vec2> bs(mesh->triangle_count());
            for (const auto& t : mesh->triangles())
                for (int v : t.v) {
                    const auto i = static_cast<std::size_t>(v);
                    try {
                        as[i] = f.sources().empty() ? 0.0 : f.sources().az_at(mesh->node(v));
                    } catch (const GeometryError&) {
                        as[i] = std::numeric_limits<double>::quiet_NaN();
                    }
                }
            for (std::size_t t = 0; t < mesh->triangle_count(); ++t)
                if (mesh->triangles()[t].role == Role::Air && !f.sources().empty())
                    bs[t] = f.sources().field_at(mesh->centroid(static_cast<int>(t))).b;
            write_vtk(out / "source.vtk", *mesh, Domain::Air, {{{"As", as}}, {{"B", bs}}}, "source potential on Va");
            write_vtk(out / "image.vtk", *mesh, Domain::Air, {{{"Am", nodal(f.image())}}, {{"B", element_b(f.image())}}},
                      "image potential on Va");
            write_vtk(out / "reaction.vtk", *mesh, Domain::All,
                      {{{"Ag", nodal(f.primary())}}, {{"B", element_b(f.primary())}}}, "reaction potential");
        } else if (c.formulation == "original") {
            write_vtk(out / "reduced.vtk", *mesh, Domain::All,
                      {{{"Ar", nodal(f.primary())}}, {{"B", element_b(f.primary())}}}, "reduced potential");
        }
    }
    if (!c.eval_points.empty()) {
        CsvWriter w({"x_m", "y_m", "Az_T_m", "Bx_T", "By_T"});
        for (const auto& p : c.eval_points) {
            const FieldValue v = f.eval(p);
            w.row(std::vector<double>{p.x, p.y, v.az, v.b.x, v.b.y});
        }
        w.save(out / "points.csv");
    }
    if (!c.eval_circles.empty()) {
        CsvWriter w({"circle", "radius_m", "center_x_m", "center_y_m", "n", "B_n_T", "A_n_T"});
        for (std::size_t i = 0; i < c.eval_circles.size(); ++i) {
            const auto& e = c.eval_circles[i];
            const MultipoleSpectrum m = multipoles(f, e.radius, e.center, e.order);
            for (std::size_t n = 0; n < m.b.size(); ++n)
                w.row(std::vector<double>{static_cast<double>(i), e.radius, e.center.x, e.center.y,
                                          static_cast<double>(n + 1), m.b[n], m.a[n]});
        }
        w.save(out / "multipoles.csv");
    }
    std::cout << c.formulation << ": " << s.report.domain_dofs << " dofs, " << s.report.newton_iterations
              << " Newton iterations, " << s.report.biot_savart.kernels << " Biot-Savart kernels, "
              << format_number(s.report.timings.total) << " s -> " << out.string() << "\n";
    for (const auto& w : s.report.warnings) std::cerr << "warning: " << w << "\n";
    return 0;
}

int cmd_study(const GlobalOptions& g, const std::string& name) {
    if (std::find(kStudies.begin(), kStudies.end(), name) == kStudies.end())
        throw ConfigError("unknown study '" + name + "'; valid studies: convergence, runtime, distance, quadrupole");
    const RunConfig c = load(g);
    if (g.validate_only) {
        std::cout << "config ok for study " << name << "\n";
        return 0;
    }
    const fs::path out = g.out;
    StudyRecord rec;
    if (name == "convergence") {
        rec = run_convergence(c.convergence).record();
    } else if (name == "runtime") {
        rec = run_runtime(c.runtime).record();
    } else if (name == "distance") {
        rec = run_distance(c.distance).record();
    } else {
        const QuadrupoleResult q = run_quadrupole_demo(c.quadrupole);
        rec = q.record();
        write_text(out / "quadrupole_report.json", report_json(q.updated.report));
        if (c.write_vtk)
            write_vtk(out / "quadrupole_total.vtk", q.updated.field.mesh(), Domain::All,
                      {{{"Az", q.updated.field.nodal_total()}}, {{"B", q.updated.field.centroid_b()}}},
                      "quadrupole total potential");
    }
    write_text(out / (name + ".csv"), rec.csv());
    write_text(out / (name + "_summary.json"), rec.summary_json);
    std::cout << rec.csv() << rec.summary_json;
    return 0;
}

struct MeshgenOptions {
    std::string geometry;
    std::optional<double> r_gamma, r_outer, h, eval_radius, outer_hx, outer_hy, inner_hx, inner_hy;
    std::optional<int> refine;
    bool d4 = false;
};

int cmd_meshgen(const GlobalOptions& g, const MeshgenOptions& o) {
    MeshSpec spec;
    spec.generator = o.geometry;
    if (o.geometry == "disk-in-annulus") {
        auto& p = spec.disk;
        p.r_gamma = o.r_gamma.value_or(p.r_gamma);
        p.r_outer = o.r_outer.value_or(p.r_outer);
        p.h = o.h.value_or(p.h);
        p.eval_radius = o.eval_radius.value_or(p.eval_radius);
        p.d4_symmetric = o.d4;
    } else if (o.geometry == "rect-in-rect") {
        auto& p = spec.rect;
        p.outer_hx = o.outer_hx.value_or(p.outer_hx);
        p.outer_hy = o.outer_hy.value_or(p.outer_hy);
        p.inner_hx = o.inner_hx.value_or(p.inner_hx);
        p.inner_hy = o.inner_hy.value_or(p.inner_hy);
        p.h = o.h.value_or(p.h);
        p.refine = o.refine.value_or(p.refine);
        p.eval_radius = o.eval_radius.value_or(p.eval_radius);
    } else if (o.geometry == "quadrupole-yoke") {
        auto& p = spec.quadrupole;
        p.r_gamma = o.r_gamma.value_or(p.r_gamma);
        p.r_outer = o.r_outer.value_or(p.r_outer);
        p.h = o.h.value_or(p.h);
    } else {
        throw ConfigError("unknown geometry '" + o.geometry + "'; valid: disk-in-annulus, rect-in-rect, quadrupole-yoke");
    }
    const Mesh mesh = build_mesh(spec);
    if (g.validate_only) {
        std::cout << "mesh ok: " << mesh.node_count() << " nodes\n";
        return 0;
    }
    fs::path path = g.out;
    if (path.extension() != ".msh") path /= o.geometry + ".msh";
    write_text(path, format_msh(mesh));
    std::cout << o.geometry << ": " << mesh.node_count() << " nodes, " << mesh.triangle_count() << " triangles, h = "
              << format_number(mesh_length(mesh)) << " -> " << path.string() << "\n";
    return 0;
}

int cmd_validate(GlobalOptions g) {
    g.validate_only = true;
    return cmd_solve(g);
}

}  // namespace

int main(int argc, char** argv) {
    log::init_from_env();
    CLI::App app{"rmvp: 2D magnetostatics with the reduced magnetic vector potential"};
    app.require_subcommand(1);
    app.fallthrough();

    GlobalOptions g;
    app.add_option("--config", g.config, "TOML configuration file");
    app.add_option("--out", g.out, "output directory (meshgen: directory or .msh file)");
    app.add_option("--workers", g.workers, "worker threads (default 1, bitwise deterministic)");
    app.add_option("--seed", g.seed, "seed recorded with the run (all solves are deterministic)");
    app.add_flag("--validate-only", g.validate_only, "check config and mesh, then exit without solving");

    auto* solve = app.add_subcommand("solve", "solve the configured problem");
    auto* study = app.add_subcommand("study", "run a numerical study");
    std::string study_name;
    study->add_option("name", study_name, "convergence | runtime | distance | quadrupole")->required();
    auto* meshgen = app.add_subcommand("meshgen", "write a generated mesh as MSH 2.2");
    MeshgenOptions mo;
    meshgen->add_option("geometry", mo.geometry, "disk-in-annulus | rect-in-rect | quadrupole-yoke")->required();
    meshgen->add_option("--r-gamma", mo.r_gamma, "interface radius, m");
    meshgen->add_option("--r-outer", mo.r_outer, "outer radius, m");
    meshgen->add_option("--mesh-size", mo.h, "target maximum edge length, m");
    meshgen->add_option("--eval-radius", mo.eval_radius, "evaluation disk radius, m");
    meshgen->add_option("--outer-hx", mo.outer_hx, "yoke half width, m");
    meshgen->add_option("--outer-hy", mo.outer_hy, "yoke half height, m");
    meshgen->add_option("--inner-hx", mo.inner_hx, "window half width, m");
    meshgen->add_option("--inner-hy", mo.inner_hy, "window half height, m");
    meshgen->add_option("--refine", mo.refine, "uniform refinement level (rect-in-rect)");
    meshgen->add_flag("--d4", mo.d4, "D4-symmetric ring layout (disk-in-annulus)");
    auto* val = app.add_subcommand("validate", "check a configuration without solving");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        if (*solve) return cmd_solve(g);
        if (*study) return cmd_study(g, study_name);
        if (*meshgen) return cmd_meshgen(g, mo);
        if (*val) return cmd_validate(g);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 1;
    } catch (const ParseError& e) {
        std::cerr << "parse error: " << e.what() << "\n";
        return 1;
    } catch (const ValidationError& e) {
        std::cerr << "invalid input: " << e.what() << "\n";
        return 1;
    } catch (const GeometryError& e) {
        std::cerr << "geometry error: " << e.what() << "\n";
        return 1;
    } catch (const SolverError& e) {
        std::cerr << "solver error: " << e.what() << "\n";
        return 2;
    } catch (const IoError& e) {
        std::cerr << "I/O error: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 1;
}
