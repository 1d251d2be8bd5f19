#pragma once

#include "rmvp/formulations.hpp"
#include "rmvp/meshgen.hpp"
#include "rmvp/studies.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace rmvp {

/// Mesh either read from an MSH 2.2 file or produced by a built-in generator
/// (disk-in-annulus, rect-in-rect, quadrupole-yoke).
struct MeshSpec {
    std::filesystem::path file;
    std::string generator;
    DiskAnnulusParams disk;
    RectParams rect;
    QuadrupoleYokeParams quadrupole;
};

Mesh build_mesh(const MeshSpec& spec);

struct EvalCircle {
    double radius = 0.0;  // m
    Vec2 center{};
    int order = 10;
};

/// Parsed TOML run configuration. Relative paths are resolved against the
/// directory of the configuration file.
struct RunConfig {
    std::filesystem::path path;
    MeshSpec mesh;

    double mu_r = 4000.0;
    std::filesystem::path bh_curve;  // empty: linear iron with mu_r

    std::vector<WindingRegion> windings;  // explicit windings plus coil presets
    std::vector<LineCurrent> sources;     // explicit and file line currents
    int filaments_u = 1;                  // line currents per winding
    int filaments_v = 1;

    std::string formulation = "updated";  // reference | original | updated
    NewtonOptions newton;
    SourceProjection projection = SourceProjection::Nodal;
    UpdatedOptions updated;

    std::vector<Vec2> eval_points;
    std::vector<EvalCircle> eval_circles;
    bool write_vtk = true;

    int workers = 1;
    std::uint64_t seed = 0;

    ConvergenceConfig convergence;
    RuntimeConfig runtime;
    DistanceConfig distance;
    QuadrupoleConfig quadrupole;

    /// Line currents seen by the reduced formulations: explicit sources
    /// followed by the filaments of every winding.
    std::vector<LineCurrent> line_currents() const;
    MaterialMap materials() const;
};

/// Throws ConfigError (with the offending key or path) or ParseError.
RunConfig load_config(const std::filesystem::path& path);
RunConfig parse_config(const std::string& text, const std::filesystem::path& base_dir);

}  // namespace rmvp
