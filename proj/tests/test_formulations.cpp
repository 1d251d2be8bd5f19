#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "rmvp/error.hpp"
#include "rmvp/formulations.hpp"
#include "rmvp/meshgen.hpp"

#include <cmath>
#include <cstring>
#include <numbers>

using namespace rmvp;

namespace {

constexpr double kPi = std::numbers::pi;

std::shared_ptr<const Mesh> tube(double h, double eval_radius = 0.5, double r_gamma = 1.25, double r_outer = 2.0) {
    return std::make_shared<const Mesh>(disk_in_annulus(
        {.r_gamma = r_gamma, .r_outer = r_outer, .h = h, .eval_radius = eval_radius, .eval_center = {0, 0}}));
}

MaterialMap iron(double mu_r) { return {MaterialModel(), MaterialModel::linear(mu_r)}; }

// Am of a wire at (d, 0) inside a grounded circle of radius r: image wire -I
// at r²/d plus the constant that makes As + Am vanish on the circle.
FieldValue image_closed_form(double current, double d, double r, Vec2 p) {
    SourceSet img({{{r * r / d, 0.0}, -current}});
    FieldValue f = img.field_at(p);
    f.az += kMu0 * current / (2 * kPi) * std::log(d / r);
    return f;
}

}  // namespace

TEST_CASE("polygon clipping and winding geometry") {
    const std::array<Vec2, 3> tri{Vec2{0, 0}, Vec2{2, 0}, Vec2{0, 2}};
    const WindingRegion sq = WindingRegion::rectangle({0.5, 0.5}, 1.0, 1.0, 10.0);
    CHECK(polygon_area(clip_convex(tri, sq.polygon)) == doctest::Approx(1.0));
    const WindingRegion far = WindingRegion::rectangle({5, 5}, 1.0, 1.0, 10.0);
    CHECK(clip_convex(tri, far.polygon).empty());
    const WindingRegion big = WindingRegion::rectangle({0.5, 0.5}, 10.0, 10.0, 1.0);
    CHECK(polygon_area(clip_convex(tri, big.polygon)) == doctest::Approx(2.0));
    // square [1,3]x[-1,1] cuts the triangle in a small triangle of area 0.5
    const WindingRegion cut = WindingRegion::rectangle({2, 0}, 2.0, 2.0, 1.0);
    CHECK(polygon_area(clip_convex(tri, cut.polygon)) == doctest::Approx(0.5));

    const WindingRegion rot = WindingRegion::rectangle({1, 2}, 0.4, 0.1, 6.0, 0.3);
    CHECK(rot.area() == doctest::Approx(0.04));
    CHECK(norm(rot.centroid() - Vec2{1, 2}) < 1e-14);
    const auto fil = rot.filaments(3, 2);
    REQUIRE(fil.size() == 6);
    Vec2 mean{};
    double total = 0.0;
    for (const auto& f : fil) {
        mean += f.position / 6.0;
        total += f.current;
    }
    CHECK(norm(mean - Vec2{1, 2}) < 1e-14);
    CHECK(total == doctest::Approx(6.0));
    CHECK(rot.filaments(1, 1).front().position.x == doctest::Approx(1.0));
}

TEST_CASE("zero excitation gives zero fields") {
    auto mesh = tube(0.2);
    const auto mats = iron(4000);
    CHECK(solve_reference(mesh, {}, mats).field.primary().values().norm() == 0.0);
    CHECK(solve_original(mesh, SourceSet(), mats).field.primary().values().norm() == 0.0);
    const Solution u = solve_updated(mesh, SourceSet(), mats);
    CHECK(u.field.primary().values().norm() == 0.0);
    CHECK(u.field.image().values().norm() == 0.0);
    CHECK(norm(u.field.eval({0.3, 0.2}).b) == 0.0);
}

TEST_CASE("reference: sign flip negates the field, windings must lie in air") {
    auto mesh = tube(0.1);
    const auto mats = iron(4000);
    const Solution a = solve_reference(mesh, {WindingRegion::rectangle({0.8, 0}, 0.1, 0.1, 100.0)}, mats);
    const Solution b = solve_reference(mesh, {WindingRegion::rectangle({0.8, 0}, 0.1, 0.1, -100.0)}, mats);
    CHECK((a.field.primary().values() + b.field.primary().values()).norm() == 0.0);
    CHECK_THROWS_AS(solve_reference(mesh, {WindingRegion::rectangle({1.25, 0}, 0.1, 0.1, 1.0)}, mats),
                    ValidationError);
}

TEST_CASE("image problem: concentric wire") {
    auto mesh = tube(0.05);
    auto curve = std::make_shared<const InterfaceCurve>(checked_interface(*mesh));
    const double current = 100.0, r = 1.25;
    SourceSet s({{{0, 0}, current}});
    const ImageSolution im = solve_image(mesh, s, curve);
    // Am is the constant that cancels As on the circle, lambda vanishes
    const double am = kMu0 * current / (2 * kPi) * std::log(r);
    const double scale = std::abs(am);
    CHECK((im.am.values().array() - am).abs().maxCoeff() < 1e-3 * scale);
    CHECK(im.lambda.values.cwiseAbs().maxCoeff() < 1e-3 * current / (2 * kPi * r));
    const TraceFunction kg = compute_kg(im.hs, im.lambda);
    double circ = 0.0;
    for (const auto& e : curve->edges()) circ += 0.5 * e.length * (kg.values[e.ta] + kg.values[e.tb]);
    CHECK(circ == doctest::Approx(current).epsilon(1e-3));
    for (Eigen::Index i = 0; i < kg.values.size(); ++i)
        CHECK(kg.values[i] == doctest::Approx(current / (2 * kPi * r)).epsilon(1e-3));

    SourceSet none;
    const ImageSolution z = solve_image(mesh, none, curve);
    CHECK(z.am.values().norm() == 0.0);
    CHECK(z.lambda.values.norm() == 0.0);
}

TEST_CASE("image problem: eccentric wire against the grounded-circle closed form") {
    const double current = 100.0, d = 0.8, r = 1.25;
    SourceSet s({{{d, 0}, current}});
    std::vector<double> err_az, err_b, hs;
    for (double h : {0.1, 0.05, 0.025}) {
        auto mesh = tube(h);
        auto curve = std::make_shared<const InterfaceCurve>(checked_interface(*mesh));
        const ImageSolution im = solve_image(mesh, s, curve);
        const FieldSampler exact = [&](int, Vec2 p) { return image_closed_form(current, d, r, p); };
        err_az.push_back(l2_error(*mesh, Domain::Air, exact, make_sampler(im.am, *mesh), Quantity::Az).relative);
        err_b.push_back(l2_error(*mesh, Domain::Air, exact, make_sampler(im.am, *mesh), Quantity::B).relative);
        hs.push_back(mesh_length(*mesh));
    }
    for (std::size_t i = 1; i < hs.size(); ++i) {
        CHECK(std::log(err_b[i - 1] / err_b[i]) / std::log(hs[i - 1] / hs[i]) >= 0.9);
        CHECK(std::log(err_az[i - 1] / err_az[i]) / std::log(hs[i - 1] / hs[i]) >= 0.9);
    }
    CHECK(err_b.back() < 0.05);
}

TEST_CASE("uniform reluctivity: composed field equals free space up to the outer boundary image") {
    // Va and Vi both vacuum; the composed total must solve the grounded-circle
    // problem at the outer radius
    const double current = 100.0, d = 0.8, r_out = 2.0;
    auto mesh = tube(0.025);
    const Solution u = solve_updated(mesh, SourceSet({{{d, 0}, current}}), iron(1.0));
    const FieldSampler exact = [&](int, Vec2 p) {
        FieldValue f = SourceSet({{{d, 0}, current}}).field_at(p);
        const FieldValue g = image_closed_form(current, d, r_out, p);
        f.az += g.az;
        f.b += g.b;
        return f;
    };
    const L2Error e = l2_error(*mesh, Domain::Eval, exact, u.field.sampler(*mesh), Quantity::B);
    CHECK(e.relative < 0.01);
    const L2Error ei = l2_error(*mesh, Domain::Iron, exact, u.field.sampler(*mesh), Quantity::B);
    CHECK(ei.relative < 0.02);
}

TEST_CASE("concentric tube: axisymmetric transfer solution") {
    const double current = 100.0, mu_r = 4000.0;
    auto mesh = tube(0.05);
    const Solution u = solve_updated(mesh, SourceSet({{{0, 0}, current}}), iron(mu_r));
    // H = I / (2 pi r) everywhere, B = mu H
    const FieldSampler exact = [&](int t, Vec2 p) {
        const double mu = mesh->triangles()[static_cast<std::size_t>(t)].role == Role::Iron ? mu_r : 1.0;
        const double rr = norm2(p);
        return FieldValue{0.0, Vec2{-p.y, p.x} * (kMu0 * mu * current / (2 * kPi * rr))};
    };
    CHECK(l2_error(*mesh, Domain::Iron, exact, u.field.sampler(*mesh), Quantity::B).relative < 0.02);
    CHECK(l2_error(*mesh, Domain::Eval, exact, u.field.sampler(*mesh), Quantity::B).relative < 0.01);
}

TEST_CASE("updated equals reference for the eccentric tube") {
    const auto mats = iron(4000);
    std::vector<double> errs;
    for (double h : {0.1, 0.05}) {
        auto mesh = tube(h);
        const Solution ref = solve_reference(mesh, {WindingRegion::rectangle({0.8, 0}, 0.1, 0.1, 100.0)}, mats);
        const Solution upd = solve_updated(mesh, SourceSet({{{0.8, 0}, 100.0}}), mats);
        errs.push_back(l2_error(*mesh, Domain::Eval, ref.field.sampler(*mesh), upd.field.sampler(*mesh), Quantity::B).relative);
    }
    CHECK(errs[1] < errs[0]);
    CHECK(errs[1] < 0.05);
}

TEST_CASE("orientation flip leaves the total field invariant") {
    auto mesh = tube(0.1);
    const auto mats = iron(4000);
    SourceSet s({{{0.8, 0.1}, 100.0}, {{-0.3, 0.4}, -40.0}});
    UpdatedOptions flip;
    flip.flip_interface = true;
    const Solution a = solve_updated(mesh, s, mats);
    const Solution b = solve_updated(mesh, s, mats, flip);
    CHECK((a.field.primary().values() - b.field.primary().values()).cwiseAbs().maxCoeff() <=
          1e-12 * a.field.primary().values().cwiseAbs().maxCoeff());
    CHECK(a.report.trace_convention != b.report.trace_convention);
}

TEST_CASE("original and updated agree; pipeline is linear") {
    auto mesh = tube(0.05);
    const auto mats = iron(4000);
    SourceSet s({{{0.8, 0.1}, 100.0}, {{-0.3, 0.4}, -40.0}});
    const Solution o = solve_original(mesh, s, mats);
    const Solution u = solve_updated(mesh, s, mats);
    CHECK(l2_error(*mesh, Domain::Eval, o.field.sampler(*mesh), u.field.sampler(*mesh), Quantity::B).relative < 0.01);

    SourceSet s2({{{0.8, 0.1}, 200.0}, {{-0.3, 0.4}, -80.0}});
    const Solution u2 = solve_updated(mesh, s2, mats);
    for (Vec2 p : {Vec2{0.1, 0.1}, Vec2{1.5, 0.3}}) {
        CHECK(u2.field.eval(p).az == doctest::Approx(2 * u.field.eval(p).az).epsilon(1e-10));
        CHECK(u2.field.eval(p).b.x == doctest::Approx(2 * u.field.eval(p).b.x).epsilon(1e-10));
    }
    // L2 projection variant of the original formulation also agrees
    OriginalOptions l2;
    l2.projection = SourceProjection::L2;
    const Solution ol2 = solve_original(mesh, s, mats, l2);
    CHECK(l2_error(*mesh, Domain::Eval, ol2.field.sampler(*mesh), u.field.sampler(*mesh), Quantity::B).relative < 0.01);
    CHECK(ol2.report.source_projection == "l2");
}

TEST_CASE("original formulation in free space with a distant boundary") {
    // boundary at 50x the cluster radius, mu_r = 1
    const double rc = 0.04;
    auto mesh = std::make_shared<const Mesh>(disk_in_annulus(
        {.r_gamma = 0.3, .r_outer = 50 * rc, .h = 0.05, .eval_radius = 0.2, .eval_center = {0, 0}}));
    SourceSet s({{{rc, 0}, 100.0}, {{-rc, 0.0}, -100.0}});
    const Solution o = solve_original(mesh, s, iron(1.0));
    const FieldSampler free = [&](int, Vec2 p) { return s.field_at(p); };
    CHECK(l2_error(*mesh, Domain::Eval, free, o.field.sampler(*mesh), Quantity::B).relative < 0.02);
}

TEST_CASE("Biot-Savart counts: updated depends on the interface only") {
    auto mesh = tube(0.05);
    const auto mats = iron(4000);
    std::vector<LineCurrent> many;
    for (int k = 0; k < 8; ++k) many.push_back({{0.5 * std::cos(k * 0.7 + 0.1), 0.5 * std::sin(k * 0.7 + 0.1)}, 10.0});
    SourceSet s(many);
    const Solution o = solve_original(mesh, s, mats);
    const Solution u = solve_updated(mesh, s, mats);
    CHECK(o.report.biot_savart.kernels == 8 * mesh->node_count());
    CHECK(u.report.biot_savart.kernels == 8 * u.report.trace_dofs);
    const double n_gamma = static_cast<double>(u.report.trace_dofs);
    const double n_total = static_cast<double>(mesh->node_count());
    CHECK(static_cast<double>(u.report.biot_savart.kernels) <=
          static_cast<double>(o.report.biot_savart.kernels) * n_gamma / n_total * (1 + 1e-12));
}

TEST_CASE("interface continuity of the composed field") {
    auto mesh = tube(0.05);
    const Solution u = solve_updated(mesh, SourceSet({{{0.8, 0.1}, 100.0}}), iron(4000));
    auto curve = checked_interface(*mesh);
    double worst = 0.0, scale = 0.0;
    for (int n : curve.nodes()) {
        const double as = u.field.sources().az_at(mesh->node(n));
        const double am = u.field.image().at_node(n);
        worst = std::max(worst, std::abs(as + am));
        scale = std::max(scale, std::abs(as));
    }
    CHECK(worst < 1e-2 * scale);
}

TEST_CASE("updated formulation validation") {
    const auto mats = iron(4000);
    auto mesh = tube(0.1);
    CHECK_THROWS_AS(solve_updated(mesh, SourceSet({{{1.6, 0}, 1.0}}), mats), ValidationError);
    UpdatedOptions opts;
    const Solution warn = solve_updated(mesh, SourceSet({{{1.2, 0.0}, 1.0}}), mats, opts);
    CHECK(warn.report.warnings.size() == 1);
    CHECK(warn.report.delta < 0.1);
    opts.min_distance_rel = 0.05;
    CHECK_THROWS_AS(solve_updated(mesh, SourceSet({{{1.2, 0.0}, 1.0}}), mats, opts), ValidationError);

    // air touching the outer boundary
    RectParams p;
    p.h = 0.05;
    auto rect = std::make_shared<const Mesh>(rect_in_rect(p));
    CHECK_NOTHROW(checked_interface(*rect));
    std::vector<Triangle> tris = rect->triangles();
    for (auto& t : tris) t.role = Role::Air;
    tris.front().role = Role::Iron;
    const Mesh mostly_air(rect->nodes(), tris);
    CHECK_THROWS_AS(checked_interface(mostly_air), ValidationError);
}

TEST_CASE("reports are deterministic and exclude timings") {
    auto mesh = tube(0.1);
    const auto mats = iron(4000);
    SourceSet s({{{0.8, 0.1}, 100.0}});
    const Solution a = solve_updated(mesh, s, mats);
    const Solution b = solve_updated(mesh, s, mats);
    CHECK(report_json(a.report) == report_json(b.report));
    CHECK(report_json(a.report).find("_s\"") == std::string::npos);
    CHECK(timings_json(a.report).find("total_s") != std::string::npos);
    const auto na = a.field.nodal_total(), nb = b.field.nodal_total();
    CHECK(std::memcmp(na.data(), nb.data(), na.size() * sizeof(double)) == 0);
}
