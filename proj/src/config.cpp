#include "rmvp/config.hpp"

#include "rmvp/error.hpp"
#include "rmvp/io.hpp"

#include "toml.hpp"

#include <cmath>
#include <set>
#include <sstream>

namespace rmvp {

namespace {

// Typed access to one TOML table that remembers which keys were read, so
// that misspelled keys are reported instead of silently ignored.
class Section {
public:
    Section(const toml::table* table, std::string name) : table_(table), name_(std::move(name)) {}

    bool present() const { return table_ != nullptr; }
    bool has(std::string_view key) const { return table_ && table_->contains(key); }

    double number(std::string_view key, double fallback) {
        const toml::node* n = node(key);
        if (!n) return fallback;
        if (!n->is_number()) throw ConfigError("key '" + qualified(key) + "' must be a number");
        return n->value<double>().value();
    }

    int integer(std::string_view key, int fallback) {
        const toml::node* n = node(key);
        if (!n) return fallback;
        if (!n->is_integer()) throw ConfigError("key '" + qualified(key) + "' must be an integer");
        return static_cast<int>(n->value<std::int64_t>().value());
    }

    bool flag(std::string_view key, bool fallback) {
        const toml::node* n = node(key);
        if (!n) return fallback;
        if (!n->is_boolean()) throw ConfigError("key '" + qualified(key) + "' must be true or false");
        return n->value<bool>().value();
    }

    std::string text(std::string_view key, std::string fallback) {
        const toml::node* n = node(key);
        if (!n) return fallback;
        if (!n->is_string()) throw ConfigError("key '" + qualified(key) + "' must be a string");
        return n->value<std::string>().value();
    }

    std::vector<double> numbers(std::string_view key, std::vector<double> fallback) {
        const toml::node* n = node(key);
        if (!n) return fallback;
        return to_numbers(*n, qualified(key));
    }

    Vec2 point(std::string_view key, Vec2 fallback) {
        if (!has(key)) return fallback;
        const auto v = numbers(key, {});
        if (v.size() != 2) throw ConfigError("key '" + qualified(key) + "' must be a pair [x, y]");
        return {v[0], v[1]};
    }

    Section table(std::string_view key) {
        const toml::node* n = node(key);
        if (!n) return {nullptr, qualified(key)};
        if (!n->is_table()) throw ConfigError("key '" + qualified(key) + "' must be a table");
        return {n->as_table(), qualified(key)};
    }

    std::vector<Section> tables(std::string_view key) {
        const toml::node* n = node(key);
        if (!n) return {};
        const toml::array* arr = n->as_array();
        if (!arr) throw ConfigError("key '" + qualified(key) + "' must be an array of tables");
        std::vector<Section> out;
        for (std::size_t i = 0; i < arr->size(); ++i) {
            const toml::table* t = (*arr)[i].as_table();
            if (!t) throw ConfigError("key '" + qualified(key) + "' must be an array of tables");
            out.emplace_back(t, qualified(key) + "[" + std::to_string(i) + "]");
        }
        return out;
    }

    const toml::node* raw(std::string_view key) { return node(key); }

    /// Throws ConfigError on keys that were never read.
    void done() const {
        if (!table_) return;
        for (const auto& [k, v] : *table_)
            if (!seen_.count(std::string(k.str())))
                throw ConfigError("unknown key '" + qualified(k.str()) + "'");
    }

    std::string qualified(std::string_view key) const {
        return name_.empty() ? std::string(key) : name_ + "." + std::string(key);
    }

    static std::vector<double> to_numbers(const toml::node& n, const std::string& name) {
        const toml::array* arr = n.as_array();
        if (!arr) throw ConfigError("key '" + name + "' must be an array of numbers");
        std::vector<double> out;
        for (const auto& e : *arr) {
            if (!e.is_number()) throw ConfigError("key '" + name + "' must be an array of numbers");
            out.push_back(e.value<double>().value());
        }
        return out;
    }

private:
    const toml::node* node(std::string_view key) {
        if (!table_) return nullptr;
        seen_.insert(std::string(key));
        return table_->get(key);
    }

    const toml::table* table_;
    std::string name_;
    std::set<std::string> seen_;
};

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p, const std::string& key) {
    if (p.empty()) throw ConfigError("key '" + key + "' must not be empty");
    std::filesystem::path out = p;
    if (out.is_relative()) out = base / out;
    if (!std::filesystem::exists(out)) throw ConfigError("file not found for '" + key + "': " + out.string());
    return out;
}

void read_mesh(Section s, const std::filesystem::path& base, MeshSpec& m) {
    if (!s.present()) return;
    if (s.has("file")) {
        if (s.has("generator")) throw ConfigError("[mesh] takes either 'file' or 'generator', not both");
        m.file = resolve(base, s.text("file", ""), "mesh.file");
        s.done();
        return;
    }
    m.generator = s.text("generator", "");
    if (m.generator == "disk-in-annulus") {
        auto& p = m.disk;
        p.r_gamma = s.number("r_gamma", p.r_gamma);
        p.r_outer = s.number("r_outer", p.r_outer);
        p.h = s.number("h", p.h);
        p.eval_radius = s.number("eval_radius", p.eval_radius);
        p.eval_center = s.point("eval_center", p.eval_center);
        p.angle_offset = s.number("angle_offset", p.angle_offset);
        p.d4_symmetric = s.flag("d4_symmetric", p.d4_symmetric);
    } else if (m.generator == "rect-in-rect") {
        auto& p = m.rect;
        p.outer_hx = s.number("outer_hx", p.outer_hx);
        p.outer_hy = s.number("outer_hy", p.outer_hy);
        p.inner_hx = s.number("inner_hx", p.inner_hx);
        p.inner_hy = s.number("inner_hy", p.inner_hy);
        p.h = s.number("h", p.h);
        p.refine = s.integer("refine", p.refine);
        p.eval_radius = s.number("eval_radius", p.eval_radius);
        p.eval_center = s.point("eval_center", p.eval_center);
    } else if (m.generator == "quadrupole-yoke") {
        auto& p = m.quadrupole;
        p.r_gamma = s.number("r_gamma", p.r_gamma);
        p.r_outer = s.number("r_outer", p.r_outer);
        p.h = s.number("h", p.h);
    } else {
        throw ConfigError("[mesh] needs 'file' or 'generator' = disk-in-annulus | rect-in-rect | quadrupole-yoke, got '" +
                          m.generator + "'");
    }
    s.done();
}

void read_coil(Section s, RunConfig& c) {
    if (!s.present()) return;
    const std::string type = s.text("type", "");
    if (type == "racetrack") {
        auto& k = c.convergence.coil;
        k.x_inner = s.number("x_inner", k.x_inner);
        k.y_center = s.number("y_center", k.y_center);
        k.columns = s.integer("columns", k.columns);
        k.rows = s.integer("rows", k.rows);
        k.cell = s.number("cell", k.cell);
        k.current = s.number("current", k.current);
        c.runtime.coil = k;
        const auto w = racetrack_windings(k);
        c.windings.insert(c.windings.end(), w.begin(), w.end());
    } else if (type == "quadrupole") {
        auto& k = c.quadrupole.coil;
        k.radius = s.number("radius", k.radius);
        k.radial_length = s.number("radial_length", k.radial_length);
        k.width = s.number("width", k.width);
        k.angles = s.numbers("angles", k.angles);
        k.current = s.number("current", k.current);
        const auto w = quadrupole_windings(k);
        c.windings.insert(c.windings.end(), w.begin(), w.end());
    } else {
        throw ConfigError("[coil] type must be 'racetrack' or 'quadrupole', got '" + type + "'");
    }
    s.done();
}

SourceProjection projection_from(const std::string& s, const std::string& key) {
    if (s == "nodal") return SourceProjection::Nodal;
    if (s == "l2") return SourceProjection::L2;
    throw ConfigError("key '" + key + "' must be 'nodal' or 'l2', got '" + s + "'");
}

}  // namespace

Mesh build_mesh(const MeshSpec& spec) {
    if (!spec.file.empty()) return load_msh(spec.file);
    if (spec.generator == "disk-in-annulus") return disk_in_annulus(spec.disk);
    if (spec.generator == "rect-in-rect") return rect_in_rect(spec.rect);
    if (spec.generator == "quadrupole-yoke") return quadrupole_yoke(spec.quadrupole);
    throw ConfigError("no mesh source configured");
}

std::vector<LineCurrent> RunConfig::line_currents() const {
    std::vector<LineCurrent> out = sources;
    const auto f = winding_filaments(windings, filaments_u, filaments_v);
    out.insert(out.end(), f.begin(), f.end());
    return out;
}

MaterialMap RunConfig::materials() const {
    MaterialMap m{MaterialModel(), MaterialModel::linear(mu_r)};
    if (!bh_curve.empty()) m.iron = load_bh_csv(bh_curve);
    return m;
}

RunConfig load_config(const std::filesystem::path& path) {
    if (!std::filesystem::exists(path)) throw ConfigError("config file not found: " + path.string());
    RunConfig c = parse_config(read_text(path), path.parent_path());
    c.path = path;
    return c;
}

RunConfig parse_config(const std::string& text, const std::filesystem::path& base_dir) {
    toml::table root;
    try {
        root = toml::parse(text);
    } catch (const toml::parse_error& e) {
        std::ostringstream os;
        os << "TOML syntax error at line " << e.source().begin.line << ": " << e.description();
        throw ParseError(os.str());
    }
    Section top(&root, "");
    RunConfig c;

    Section run = top.table("run");
    c.formulation = run.text("formulation", c.formulation);
    if (c.formulation != "reference" && c.formulation != "original" && c.formulation != "updated")
        throw ConfigError("run.formulation must be reference, original or updated, got '" + c.formulation + "'");
    c.workers = run.integer("workers", c.workers);
    if (c.workers < 1) throw ConfigError("run.workers must be at least 1");
    c.seed = static_cast<std::uint64_t>(run.integer("seed", 0));
    run.done();

    read_mesh(top.table("mesh"), base_dir, c.mesh);

    Section mat = top.table("materials");
    c.mu_r = mat.number("mu_r", c.mu_r);
    if (!(c.mu_r >= 1.0)) throw ConfigError("materials.mu_r must be at least 1");
    if (mat.has("bh_curve")) c.bh_curve = resolve(base_dir, mat.text("bh_curve", ""), "materials.bh_curve");
    mat.done();

    read_coil(top.table("coil"), c);
    for (Section w : top.tables("windings")) {
        const Vec2 center = w.point("center", {});
        c.windings.push_back(WindingRegion::rectangle(center, w.number("width", 0.0), w.number("height", 0.0),
                                                      w.number("current", 0.0), w.number("angle", 0.0)));
        w.done();
    }
    for (Section s : top.tables("sources")) {
        c.sources.push_back({{s.number("x", 0.0), s.number("y", 0.0)}, s.number("current", 0.0)});
        s.done();
    }
    Section exc = top.table("excitation");
    if (exc.has("sources_file")) {
        const auto file = resolve(base_dir, exc.text("sources_file", ""), "excitation.sources_file");
        const auto more = load_sources_csv(file);
        c.sources.insert(c.sources.end(), more.begin(), more.end());
    }
    const auto fil = exc.numbers("filaments", {1.0, 1.0});
    if (fil.size() != 2 || fil[0] < 1 || fil[1] < 1 || fil[0] != std::floor(fil[0]) || fil[1] != std::floor(fil[1]))
        throw ConfigError("excitation.filaments must be a pair of positive integers");
    c.filaments_u = static_cast<int>(fil[0]);
    c.filaments_v = static_cast<int>(fil[1]);
    exc.done();

    Section sol = top.table("solver");
    c.newton.rel_tol = sol.number("rel_tol", c.newton.rel_tol);
    c.newton.max_iterations = sol.integer("max_iterations", c.newton.max_iterations);
    c.newton.max_halvings = sol.integer("max_halvings", c.newton.max_halvings);
    c.projection = projection_from(sol.text("projection", "nodal"), "solver.projection");
    c.updated.flip_interface = sol.flag("flip_interface", false);
    c.updated.min_distance_rel = sol.number("min_distance_rel", c.updated.min_distance_rel);
    c.updated.warn_delta = sol.number("warn_delta", c.updated.warn_delta);
    c.updated.newton = c.newton;
    if (!(c.newton.rel_tol > 0.0) || c.newton.max_iterations < 1 || c.newton.max_halvings < 0)
        throw ConfigError("solver tolerances and iteration limits must be positive");
    sol.done();

    Section ev = top.table("evaluation");
    if (const toml::node* pts = ev.raw("points")) {
        const toml::array* arr = pts->as_array();
        if (!arr) throw ConfigError("evaluation.points must be an array of [x, y] pairs");
        for (const auto& p : *arr) {
            const auto v = Section::to_numbers(p, "evaluation.points");
            if (v.size() != 2) throw ConfigError("evaluation.points must be an array of [x, y] pairs");
            c.eval_points.push_back({v[0], v[1]});
        }
    }
    for (Section circ : ev.tables("circles")) {
        EvalCircle e;
        e.radius = circ.number("radius", 0.0);
        e.center = circ.point("center", {});
        e.order = circ.integer("order", e.order);
        if (!(e.radius > 0.0) || e.order < 1) throw ConfigError(circ.qualified("radius") + " and order must be positive");
        c.eval_circles.push_back(e);
        circ.done();
    }
    ev.done();

    Section out = top.table("output");
    c.write_vtk = out.flag("vtk", c.write_vtk);
    out.done();

    // studies take geometry, coil and material from the shared tables
    c.convergence.mu_r = c.runtime.mu_r = c.quadrupole.mu_r = c.mu_r;
    c.convergence.mesh = c.runtime.mesh = c.mesh.rect;
    c.quadrupole.mesh = c.mesh.quadrupole;
    c.quadrupole.bh_curve = c.bh_curve.string();
    c.runtime.projection = c.projection;
    Section study = top.table("study");
    {
        Section s = study.table("convergence");
        c.convergence.levels = s.integer("levels", c.convergence.levels);
        c.convergence.reference_extra_levels = s.integer("reference_extra_levels", c.convergence.reference_extra_levels);
        s.done();
    }
    {
        Section s = study.table("runtime");
        c.runtime.filaments = s.integer("filaments", c.runtime.filaments);
        c.runtime.repeats = s.integer("repeats", c.runtime.repeats);
        if (s.has("projection")) c.runtime.projection = projection_from(s.text("projection", ""), s.qualified("projection"));
        s.done();
    }
    {
        Section s = study.table("distance");
        auto& d = c.distance;
        d.source_x = s.number("source_x", d.source_x);
        d.current = s.number("current", d.current);
        d.r_outer = s.number("r_outer", d.r_outer);
        d.h = s.number("h", d.h);
        d.deltas = s.numbers("deltas", d.deltas);
        d.eval_radius = s.number("eval_radius", d.eval_radius);
        s.done();
    }
    {
        Section s = study.table("quadrupole");
        auto& q = c.quadrupole;
        q.filaments_u = s.integer("filaments_u", q.filaments_u);
        q.filaments_v = s.integer("filaments_v", q.filaments_v);
        q.multipole_radius = s.number("multipole_radius", q.multipole_radius);
        q.multipole_order = s.integer("multipole_order", q.multipole_order);
        q.exclusion_factor = s.number("exclusion_factor", q.exclusion_factor);
        s.done();
    }
    study.done();
    top.done();
    return c;
}

}  // namespace rmvp
