#pragma once

#include "rmvp/geometry.hpp"
#include "rmvp/mesh.hpp"

#include <filesystem>
#include <string>
#include <vector>

namespace rmvp {

struct BHPoint {
    double b = 0.0;  // T
    double h = 0.0;  // A/m
};

/// Reluctivity as a function of B².
///
/// Linear models have constant ν = 1/(μ0 μr). Tabulated models interpolate
/// ν(B²) = H/B with a monotone piecewise-cubic Hermite interpolant whose
/// knots are the table points; ν(0) is the initial slope H1/B1 and ν is held
/// constant beyond the last knot (end slope forced to zero so ν stays C¹).
class MaterialModel {
public:
    MaterialModel() = default;  // vacuum

    static MaterialModel linear(double mu_r);
    static MaterialModel bh_table(std::vector<BHPoint> table);

    bool is_linear() const { return knots_.empty(); }
    /// Relative permeability of a linear model, or μr at B = 0 for a table.
    double mu_r0() const;

    double nu(double b_squared) const;
    double dnu_db2(double b_squared) const;

    const std::vector<BHPoint>& table() const { return table_; }

private:
    struct Knot {
        double x = 0.0;   // B²
        double y = 0.0;   // ν
        double d = 0.0;   // dν/dB² at the knot
    };
    std::size_t interval(double x) const;

    double nu_linear_ = kNu0;
    std::vector<BHPoint> table_;
    std::vector<Knot> knots_;
};

/// Reads a BH table with header `B_T,H_A_per_m`. The first row may be (0, 0);
/// B and H must be strictly increasing and the implied ν = H/B non-decreasing.
MaterialModel load_bh_csv(const std::filesystem::path& path);

/// Reluctivity per triangle role. Air is always vacuum.
struct MaterialMap {
    MaterialModel air;
    MaterialModel iron;

    const MaterialModel& operator()(Role r) const { return r == Role::Air ? air : iron; }
    bool is_linear() const { return air.is_linear() && iron.is_linear(); }
};

}  // namespace rmvp
