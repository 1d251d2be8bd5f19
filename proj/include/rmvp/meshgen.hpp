#pragma once

#include "rmvp/mesh.hpp"

namespace rmvp {

/// Air disk of radius r_gamma inside an iron annulus up to r_outer, meshed by
/// concentric node rings. h is the target maximum edge length.
struct DiskAnnulusParams {
    double r_gamma = 1.25;
    double r_outer = 2.0;
    double h = 0.05;
    double eval_radius = 0.0;  // > 0 tags air triangles whose centroid is inside
    Vec2 eval_center{};
    double angle_offset = 0.0;  // global rotation of every ring, rad
    /// Ring node counts in multiples of 8 with nodes on the diagonals, so the
    /// node set is invariant under the quadrupole symmetry group.
    bool d4_symmetric = false;
};

Mesh disk_in_annulus(const DiskAnnulusParams& p);

/// Rectangular air window (half sizes inner_hx, inner_hy) inside a
/// rectangular iron yoke (half sizes outer_hx, outer_hy), both centred at the
/// origin. Structured grid whose lines contain both rectangles; each
/// interval is split into ceil(len / (h / sqrt 2)) * 2^refine cells so that
/// successive refine levels halve h exactly.
struct RectParams {
    double outer_hx = 0.255;
    double outer_hy = 0.165;
    double inner_hx = 0.155;
    double inner_hy = 0.065;
    double h = 0.0137;
    int refine = 0;
    double eval_radius = 0.0;
    Vec2 eval_center{};
};

Mesh rect_in_rect(const RectParams& p);

/// Circular iron yoke around a circular air aperture; the coil sits in the
/// air. Geometrically a disk-in-annulus with quadrupole defaults.
struct QuadrupoleYokeParams {
    double r_gamma = 0.10;
    double r_outer = 0.20;
    double h = 0.004;
};

Mesh quadrupole_yoke(const QuadrupoleYokeParams& p);

}  // namespace rmvp
