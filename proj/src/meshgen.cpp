#include "rmvp/meshgen.hpp"
#include "rmvp/error.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace rmvp {

namespace {

void tag_eval(std::vector<Triangle>& tris, const std::vector<Vec2>& nodes, double radius, Vec2 center) {
    if (radius <= 0.0) return;
    for (auto& t : tris) {
        if (t.role != Role::Air) continue;
        const Vec2 c = (nodes[static_cast<std::size_t>(t.v[0])] + nodes[static_cast<std::size_t>(t.v[1])] +
                        nodes[static_cast<std::size_t>(t.v[2])]) / 3.0;
        t.eval = distance(c, center) < radius;
    }
}

}  // namespace

Mesh disk_in_annulus(const DiskAnnulusParams& p) {
    if (!(p.h > 0.0)) throw ValidationError("mesh size h must be positive");
    if (!(p.r_gamma > 0.0) || !(p.r_gamma < p.r_outer))
        throw ValidationError("disk-in-annulus needs 0 < r_gamma < r_outer");
    const double spacing = p.h / std::numbers::sqrt2;
    const int n_in = std::max(2, static_cast<int>(std::ceil(p.r_gamma / spacing - 1e-9)));
    const int n_out = std::max(1, static_cast<int>(std::ceil((p.r_outer - p.r_gamma) / spacing - 1e-9)));

    std::vector<double> radii;
    for (int k = 0; k <= n_in; ++k) radii.push_back(p.r_gamma * k / n_in);
    for (int k = 1; k <= n_out; ++k) radii.push_back(p.r_gamma + (p.r_outer - p.r_gamma) * k / n_out);

    std::vector<Vec2> nodes{{0.0, 0.0}};
    struct Ring { int first; int count; double theta0; };
    std::vector<Ring> rings{{0, 1, 0.0}};
    for (std::size_t k = 1; k < radii.size(); ++k) {
        const double r = radii[k];
        int count = std::max(6, static_cast<int>(std::ceil(2.0 * std::numbers::pi * r / spacing - 1e-9)));
        double phase = k % 2 == 1 ? 0.75 : 0.25;  // staggered, never on the positive x-axis
        if (p.d4_symmetric) {
            count = k == 1 ? 4 : 8 * ((count + 7) / 8);
            phase = count / 8.0;  // a node on every diagonal
        }
        const double dtheta = 2.0 * std::numbers::pi / count;
        const double theta0 = p.angle_offset + std::fmod(phase, 1.0) * dtheta;
        rings.push_back({static_cast<int>(nodes.size()), count, theta0});
        for (int i = 0; i < count; ++i) {
            const double th = theta0 + dtheta * i;
            nodes.push_back({r * std::cos(th), r * std::sin(th)});
        }
    }

    std::vector<Triangle> tris;
    for (std::size_t k = 1; k < rings.size(); ++k) {
        const Role role = radii[k] <= p.r_gamma * (1.0 + 1e-12) ? Role::Air : Role::Iron;
        const Ring& a = rings[k - 1];
        const Ring& b = rings[k];
        auto node_b = [&](int j) { return b.first + (j % b.count); };
        if (a.count == 1) {
            for (int j = 0; j < b.count; ++j) tris.push_back({{a.first, node_b(j), node_b(j + 1)}, role, false});
            continue;
        }
        auto node_a = [&](int i) { return a.first + (i % a.count); };
        // unwrap so that both start angles lie in the same 2*pi window
        const double ta0 = a.theta0 - p.angle_offset;
        const double tb0 = b.theta0 - p.angle_offset;
        auto ang_a = [&](int i) { return ta0 + 2.0 * std::numbers::pi * i / a.count; };
        auto ang_b = [&](int j) { return tb0 + 2.0 * std::numbers::pi * j / b.count; };
        int i = 0, j = 0;
        while (i < a.count || j < b.count) {
            const bool advance_a = j == b.count || (i < a.count && ang_a(i + 1) <= ang_b(j + 1));
            if (advance_a) {
                tris.push_back({{node_a(i), node_b(j), node_a(i + 1)}, role, false});
                ++i;
            } else {
                tris.push_back({{node_a(i), node_b(j), node_b(j + 1)}, role, false});
                ++j;
            }
        }
    }
    tag_eval(tris, nodes, p.eval_radius, p.eval_center);
    return Mesh(std::move(nodes), std::move(tris));
}

Mesh rect_in_rect(const RectParams& p) {
    if (!(p.h > 0.0)) throw ValidationError("mesh size h must be positive");
    if (p.refine < 0 || p.refine > 12) throw ValidationError("refine level must be in [0, 12]");
    if (!(p.inner_hx > 0.0 && p.inner_hy > 0.0 && p.inner_hx < p.outer_hx && p.inner_hy < p.outer_hy))
        throw ValidationError("rect-in-rect needs 0 < inner half sizes < outer half sizes");
    const double cell = p.h / std::numbers::sqrt2;
    auto axis = [&](double inner, double outer) {
        const double keys[4] = {-outer, -inner, inner, outer};
        std::vector<double> xs{keys[0]};
        for (int s = 0; s < 3; ++s) {
            const double len = keys[s + 1] - keys[s];
            const int n = std::max(1, static_cast<int>(std::ceil(len / cell - 1e-9))) << p.refine;
            for (int i = 1; i <= n; ++i) xs.push_back(i == n ? keys[s + 1] : keys[s] + len * i / n);
        }
        return xs;
    };
    const auto xs = axis(p.inner_hx, p.outer_hx);
    const auto ys = axis(p.inner_hy, p.outer_hy);
    const int nx = static_cast<int>(xs.size());
    const int ny = static_cast<int>(ys.size());

    std::vector<Vec2> nodes;
    nodes.reserve(static_cast<std::size_t>(nx * ny));
    for (int j = 0; j < ny; ++j)
        for (int i = 0; i < nx; ++i) nodes.push_back({xs[static_cast<std::size_t>(i)], ys[static_cast<std::size_t>(j)]});
    auto id = [nx](int i, int j) { return j * nx + i; };

    std::vector<Triangle> tris;
    tris.reserve(static_cast<std::size_t>(2 * (nx - 1) * (ny - 1)));
    for (int j = 0; j + 1 < ny; ++j) {
        for (int i = 0; i + 1 < nx; ++i) {
            const double cx = 0.5 * (xs[static_cast<std::size_t>(i)] + xs[static_cast<std::size_t>(i + 1)]);
            const double cy = 0.5 * (ys[static_cast<std::size_t>(j)] + ys[static_cast<std::size_t>(j + 1)]);
            const Role role = (std::abs(cx) < p.inner_hx && std::abs(cy) < p.inner_hy) ? Role::Air : Role::Iron;
            const int a = id(i, j), b = id(i + 1, j), c = id(i + 1, j + 1), d = id(i, j + 1);
            // alternate the diagonal so the grid has no preferred direction
            if ((i + j) % 2 == 0) {
                tris.push_back({{a, b, c}, role, false});
                tris.push_back({{a, c, d}, role, false});
            } else {
                tris.push_back({{a, b, d}, role, false});
                tris.push_back({{b, c, d}, role, false});
            }
        }
    }
    tag_eval(tris, nodes, p.eval_radius, p.eval_center);
    return Mesh(std::move(nodes), std::move(tris));
}

Mesh quadrupole_yoke(const QuadrupoleYokeParams& p) {
    DiskAnnulusParams d;
    d.r_gamma = p.r_gamma;
    d.r_outer = p.r_outer;
    d.h = p.h;
    d.d4_symmetric = true;
    return disk_in_annulus(d);
}

}  // namespace rmvp
