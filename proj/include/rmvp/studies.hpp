#pragma once

#include "rmvp/formulations.hpp"
#include "rmvp/materials.hpp"
#include "rmvp/meshgen.hpp"

#include <string>
#include <vector>

namespace rmvp {

// ----------------------------------------------------------------------------
// Case layouts
// ----------------------------------------------------------------------------

/// Two mirrored winding groups of columns x rows square half-turns. The right
/// group starts at x_inner and carries +current per half-turn, the left group
/// carries -current.
struct RacetrackCoil {
    double x_inner = 0.075;
    double y_center = 0.0;
    int columns = 3;
    int rows = 3;
    double cell = 0.01;
    double current = 100.0;
};

std::vector<WindingRegion> racetrack_windings(const RacetrackCoil& coil);

/// Quadrupole coil: `angles` are the winding centre angles (rad) in the first
/// octant [0, pi/4); the layout is mirrored into all eight octants with the
/// current sign of cos(2 phi). Windings are rectangles elongated radially.
struct QuadrupoleCoil {
    double radius = 0.07;       // winding centre radius, m
    double radial_length = 0.02;
    double width = 0.006;       // azimuthal thickness, m
    std::vector<double> angles{0.07, 0.22, 0.37, 0.52};
    double current = 50000.0;   // A per winding
};

std::vector<WindingRegion> quadrupole_windings(const QuadrupoleCoil& coil);

/// nu x nv line currents per winding, in winding order.
std::vector<LineCurrent> winding_filaments(const std::vector<WindingRegion>& windings, int nu = 1, int nv = 1);

// ----------------------------------------------------------------------------
// Fits and records
// ----------------------------------------------------------------------------

/// Least-squares line through (log x, log y).
struct SlopeFit {
    double slope = 0.0;
    double intercept = 0.0;
    double ci95 = 0.0;      // half-width of the 95% interval of the slope
    double residual = 0.0;  // rms residual in log space
    int points = 0;
};

/// Needs at least three points with x, y > 0; throws ValidationError otherwise.
SlopeFit fit_loglog(const std::vector<double>& x, const std::vector<double>& y);

/// One study run: CSV table with the fixed study header plus a JSON summary
/// with fitted quantities.
struct StudyRecord {
    std::string study;
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;
    std::string summary_json;

    std::string csv() const;
};

// ----------------------------------------------------------------------------
// Convergence
// ----------------------------------------------------------------------------

struct ConvergenceConfig {
    RectParams mesh;                 // refine is overridden per level
    RacetrackCoil coil;
    double mu_r = 4000.0;
    int levels = 5;                  // number of meshes, each h halved
    int reference_extra_levels = 2;  // reference refine = last level + this
};

struct ConvergenceRow {
    double h = 0.0;
    double rel_err_eval = 0.0;
    double rel_err_total = 0.0;
    double energy_eval = 0.0;  // J/m
    std::size_t dofs = 0;
};

struct ConvergenceResult {
    std::vector<ConvergenceRow> rows;
    double reference_h = 0.0;
    double reference_energy_eval = 0.0;
    SlopeFit fit_eval;
    SlopeFit fit_total;
    StudyRecord record() const;
};

/// Updated RMVP (one line current per half-turn) against the volumetric
/// winding solution on a finer mesh of the same family. Errors are relative
/// L2 norms of B on the evaluation disk and on the whole domain.
ConvergenceResult run_convergence(const ConvergenceConfig& config);

// ----------------------------------------------------------------------------
// Runtime
// ----------------------------------------------------------------------------

struct RuntimeConfig {
    RectParams mesh;
    RacetrackCoil coil;
    int filaments = 30;  // per half-turn edge, filaments² line currents each
    double mu_r = 4000.0;
    SourceProjection projection = SourceProjection::Nodal;
    int repeats = 3;     // best-of
};

struct RuntimeRow {
    std::string formulation;
    double total_s = 0.0;
    double biot_savart_s = 0.0;
    std::uint64_t kernel_evals = 0;
};

struct RuntimeResult {
    std::vector<RuntimeRow> rows;  // original, updated-Va, updated-Gamma
    std::size_t dofs = 0;
    std::size_t sources = 0;
    std::size_t interface_nodes = 0;
    std::size_t air_nodes = 0;
    StudyRecord record() const;
};

/// Times the original formulation, the updated formulation with As
/// additionally evaluated on every air node, and the updated formulation with
/// As on the interface only. Runs sequentially regardless of the worker count.
RuntimeResult run_runtime(const RuntimeConfig& config);

// ----------------------------------------------------------------------------
// Distance to the interface
// ----------------------------------------------------------------------------

struct DistanceConfig {
    double source_x = 0.5;   // line current at (source_x, 0)
    double current = 100.0;
    double r_outer = 2.0;
    double h = 0.007;
    std::vector<double> deltas{1e-3, 1.5e-3, 2e-3, 3e-3, 5e-3, 7e-3, 1e-2, 2e-2, 5e-2, 0.1, 0.2, 0.5};
    /// Errors are integrated over the disk of this radius around the origin,
    /// which must stay clear of the source and of every interface radius.
    double eval_radius = 0.25;
};

struct DistanceRow {
    double delta = 0.0;
    double r_gamma = 0.0;
    double rel_err = 0.0;
};

struct DistanceResult {
    std::vector<DistanceRow> rows;
    SlopeFit fit;          // over the decaying branch
    std::size_t branch_begin = 0, branch_end = 0;  // row range of the fit
    double floor = 0.0;    // error at the largest Delta
    StudyRecord record() const;
};

/// Line current in air inside a grounded circle of radius r_outer; the
/// artificial interface radius R = source_x / (1 - Delta) is swept and the
/// updated RMVP is compared with the closed-form image solution.
DistanceResult run_distance(const DistanceConfig& config);

/// Grounded-circle solution for a line current at (d, 0), d < r: the wire plus
/// an image wire -I at (r² / d, 0) and the constant that zeroes Az on the circle.
FieldValue grounded_circle_field(double current, double d, double r, Vec2 p);

// ----------------------------------------------------------------------------
// Multipoles and the quadrupole demo
// ----------------------------------------------------------------------------

struct MultipoleSpectrum {
    double radius = 0.0;
    Vec2 center{};
    std::vector<double> b;  // b[n - 1] = B_n, normal, T
    std::vector<double> a;  // a[n - 1] = A_n, skew, T

    /// |B_n| / max over m != n of |B_m| (over the normal and skew parts).
    double dominance(int n) const;
};

/// Radial field sampled at 8 * order points on the circle, B_n = (2/M) sum
/// B_r sin(n phi), A_n = (2/M) sum B_r cos(n phi). Throws ValidationError if
/// the circle leaves the air region or passes within 1e-6 m of a source.
MultipoleSpectrum multipoles(const TotalField& field, double radius, Vec2 center, int order);
/// Same analysis for an arbitrary field function.
MultipoleSpectrum multipoles(const std::function<Vec2(Vec2)>& b_at, double radius, Vec2 center, int order);

struct QuadrupoleConfig {
    QuadrupoleYokeParams mesh;
    QuadrupoleCoil coil;
    std::string bh_curve;        // CSV path; empty selects linear mu_r
    double mu_r = 4000.0;
    int filaments_u = 1;         // line currents per winding, radial direction
    int filaments_v = 1;
    double multipole_radius = 0.03;
    int multipole_order = 10;
    double exclusion_factor = 3.0;  // singular disks of radius factor * h
};

struct QuadrupoleResult {
    Solution updated;
    Solution reference;
    MultipoleSpectrum spectrum;
    MultipoleSpectrum reference_spectrum;
    double median_rel_diff = 0.0;
    double p90_rel_diff = 0.0;
    std::size_t compared_elements = 0;
    std::vector<double> rel_diff;  // per triangle, NaN inside excluded disks
    StudyRecord record() const;
};

/// Nonlinear updated RMVP of a quadrupole with line currents at the winding
/// centres, compared with the volumetric solution of the winding rectangles.
QuadrupoleResult run_quadrupole_demo(const QuadrupoleConfig& config);

}  // namespace rmvp
