#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "rmvp/error.hpp"
#include "rmvp/mesh.hpp"
#include "rmvp/meshgen.hpp"

#include <cmath>
#include <algorithm>
#include <numbers>
#include <random>
#include <set>

using namespace rmvp;

namespace {

const char* kSingleTriangle = R"($MeshFormat
2.2 0 8
$EndMeshFormat
$PhysicalNames
1
2 3 "iron"
$EndPhysicalNames
$Nodes
3
1 0 0 0
2 1 0 0
3 0 1 0
$EndNodes
$Elements
1
1 2 2 3 3 1 2 3
$EndElements
)";

// Exhaustive point-in-triangle scan used as the locate() oracle.
std::vector<int> brute_force_hits(const Mesh& mesh, Vec2 p) {
    std::vector<int> hits;
    for (int t = 0; t < static_cast<int>(mesh.triangle_count()); ++t) {
        const auto& v = mesh.triangles()[static_cast<std::size_t>(t)].v;
        const Vec2 a = mesh.node(v[0]), b = mesh.node(v[1]), c = mesh.node(v[2]);
        const double d = signed_area2(a, b, c);
        const double l0 = signed_area2(p, b, c) / d;
        const double l1 = signed_area2(a, p, c) / d;
        const double l2 = 1.0 - l0 - l1;
        if (l0 >= -1e-10 && l1 >= -1e-10 && l2 >= -1e-10) hits.push_back(t);
    }
    return hits;
}

// Unit-square grid of n x n cells; cells listed in `holes` are air, the rest iron.
Mesh grid_with_holes(int n, const std::set<std::pair<int, int>>& holes) {
    std::vector<Vec2> nodes;
    for (int j = 0; j <= n; ++j)
        for (int i = 0; i <= n; ++i) nodes.push_back({static_cast<double>(i) / n, static_cast<double>(j) / n});
    std::vector<Triangle> tris;
    auto id = [n](int i, int j) { return j * (n + 1) + i; };
    for (int j = 0; j < n; ++j)
        for (int i = 0; i < n; ++i) {
            const Role r = holes.count({i, j}) ? Role::Air : Role::Iron;
            tris.push_back({{id(i, j), id(i + 1, j), id(i + 1, j + 1)}, r, false});
            tris.push_back({{id(i, j), id(i + 1, j + 1), id(i, j + 1)}, r, false});
        }
    return Mesh(std::move(nodes), std::move(tris));
}

}  // namespace

TEST_CASE("single triangle file reads back with area one half") {
    const Mesh m = parse_msh(kSingleTriangle);
    REQUIRE(m.triangle_count() == 1);
    CHECK(m.area(0) == doctest::Approx(0.5));
    CHECK(m.triangles()[0].role == Role::Iron);
}

TEST_CASE("clockwise triangle is reordered to positive area") {
    const Mesh m({{0, 0}, {0, 1}, {1, 0}}, {{{0, 1, 2}, Role::Air, false}});
    CHECK(m.area(0) == doctest::Approx(0.5));
    const auto& v = m.triangles()[0].v;
    CHECK(signed_area2(m.node(v[0]), m.node(v[1]), m.node(v[2])) > 0.0);
}

TEST_CASE("degenerate triangle is rejected") {
    CHECK_THROWS_AS(Mesh({{0, 0}, {1, 0}, {2, 0}}, {{{0, 1, 2}, Role::Air, false}}), ValidationError);
}

TEST_CASE("edge shared by three triangles is rejected") {
    std::vector<Vec2> nodes{{0, 0}, {1, 0}, {0.5, 1}, {0.5, -1}, {0.5, 2}};
    std::vector<Triangle> tris{{{0, 1, 2}, Role::Air, false}, {{0, 3, 1}, Role::Air, false},
                               {{0, 1, 4}, Role::Air, false}};
    CHECK_THROWS_AS(Mesh(nodes, tris), ValidationError);
}

TEST_CASE("hanging node is rejected") {
    // big triangle beside two small ones splitting its edge
    std::vector<Vec2> nodes{{0, 0}, {0, 2}, {-1, 1}, {1, 1}, {0, 1}};
    std::vector<Triangle> tris{{{0, 1, 2}, Role::Air, false}, {{0, 3, 4}, Role::Air, false},
                               {{4, 3, 1}, Role::Air, false}};
    CHECK_THROWS_AS(Mesh(nodes, tris), ValidationError);
}

TEST_CASE("mesh_length of a 3-4-5 triangle is 5") {
    const Mesh m({{0, 0}, {3, 0}, {0, 4}}, {{{0, 1, 2}, Role::Air, false}});
    CHECK(mesh_length(m) == doctest::Approx(5.0));
}

TEST_CASE("mesh_length of a right-triangle grid with legs 0.1") {
    std::vector<Vec2> nodes;
    for (int j = 0; j <= 10; ++j)
        for (int i = 0; i <= 10; ++i) nodes.push_back({0.1 * i, 0.1 * j});
    std::vector<Triangle> tris;
    for (int j = 0; j < 10; ++j)
        for (int i = 0; i < 10; ++i) {
            const int a = j * 11 + i;
            tris.push_back({{a, a + 1, a + 12}, Role::Air, false});
            tris.push_back({{a, a + 12, a + 11}, Role::Air, false});
        }
    CHECK(mesh_length(Mesh(nodes, tris)) == doctest::Approx(0.1 * std::numbers::sqrt2));
}

TEST_CASE("mesh_length halves under rect refinement") {
    RectParams p;
    p.h = 0.04;
    const double h0 = mesh_length(rect_in_rect(p));
    p.refine = 1;
    const double h1 = mesh_length(rect_in_rect(p));
    CHECK(h1 == doctest::Approx(0.5 * h0).epsilon(1e-12));
}

TEST_CASE("locate finds centroids and nodes") {
    DiskAnnulusParams p;
    p.h = 0.3;
    const Mesh m = disk_in_annulus(p);
    for (int t = 0; t < static_cast<int>(m.triangle_count()); t += 7) {
        const Location loc = m.locate(m.centroid(t));
        CHECK(loc.triangle == t);
        for (double b : loc.bary) CHECK(b == doctest::Approx(1.0 / 3.0));
    }
    const Location at_node = m.locate(m.node(5));
    const auto& v = m.triangles()[static_cast<std::size_t>(at_node.triangle)].v;
    bool found = false;
    for (int k = 0; k < 3; ++k)
        if (v[static_cast<std::size_t>(k)] == 5) {
            found = true;
            CHECK(at_node.bary[static_cast<std::size_t>(k)] == doctest::Approx(1.0));
        }
    CHECK(found);
}

TEST_CASE("locate agrees with a brute-force scan") {
    DiskAnnulusParams p;
    p.h = 0.2;
    const Mesh m = disk_in_annulus(p);
    std::mt19937 rng(42);
    std::uniform_real_distribution<double> u(-2.0, 2.0);
    int inside = 0;
    for (int k = 0; k < 2000; ++k) {
        const Vec2 q{u(rng), u(rng)};
        const auto hits = brute_force_hits(m, q);
        const auto loc = m.find(q);
        if (hits.empty()) {
            CHECK_FALSE(loc.has_value());
            CHECK_THROWS_AS(m.locate(q), GeometryError);
            continue;
        }
        ++inside;
        REQUIRE(loc.has_value());
        CHECK(loc->triangle == hits.front());
        double s = 0.0;
        for (double b : loc->bary) {
            CHECK(b >= -1e-10);
            s += b;
        }
        CHECK(s == doctest::Approx(1.0));
    }
    CHECK(inside > 1000);
}

TEST_CASE("disk-in-annulus: one circular interface loop with radial normals") {
    DiskAnnulusParams p;
    p.h = 0.05;
    const Mesh m = disk_in_annulus(p);
    const InterfaceCurve g = extract_interface(m);
    REQUIRE(g.loops().size() == 1);
    CHECK(g.edges().size() == g.loops()[0].size());
    const double h = mesh_length(m);
    for (const auto& e : g.edges()) {
        const Vec2 mid = 0.5 * (m.node(e.a) + m.node(e.b));
        CHECK(norm(mid) == doctest::Approx(1.25).epsilon(0.01));
        const Vec2 radial = mid / norm(mid);
        CHECK(norm(e.normal - radial) < h);
        // t is n rotated counter-clockwise
        CHECK(norm(e.tangent - rotate_ccw(e.normal)) < 1e-14);
        // normal points from the air triangle into the iron triangle
        CHECK(dot(e.normal, m.centroid(e.iron_triangle) - m.centroid(e.air_triangle)) > 0.0);
    }
    CHECK(g.length() == doctest::Approx(2.0 * std::numbers::pi * 1.25).epsilon(1e-3));
    // closed and chained
    const auto& es = g.edges();
    for (std::size_t k = 0; k < es.size(); ++k) CHECK(es[k].b == es[(k + 1) % es.size()].a);
    // counter-clockwise seen from the air: positive enclosed signed area
    double area2 = 0.0;
    for (const auto& e : es) area2 += cross(m.node(e.a), m.node(e.b));
    CHECK(area2 > 0.0);
}

TEST_CASE("rect-in-rect: one loop with perimeter length") {
    RectParams p;
    const Mesh m = rect_in_rect(p);
    const InterfaceCurve g = extract_interface(m);
    CHECK(g.loops().size() == 1);
    CHECK(g.length() == doctest::Approx(4.0 * (p.inner_hx + p.inner_hy)));
}

TEST_CASE("two disjoint air pockets give two loops") {
    const std::set<std::pair<int, int>> holes{{1, 1}, {2, 1}, {5, 4}, {5, 5}, {6, 5}};
    const Mesh m = grid_with_holes(8, holes);
    const InterfaceCurve g = extract_interface(m);
    CHECK(g.loops().size() == 2);
    // oracle: count air/iron edges by brute-force adjacency
    std::map<std::pair<int, int>, std::vector<Role>> edge_roles;
    for (const auto& t : m.triangles())
        for (int k = 0; k < 3; ++k) {
            int a = t.v[static_cast<std::size_t>(k)], b = t.v[static_cast<std::size_t>((k + 1) % 3)];
            if (a > b) std::swap(a, b);
            edge_roles[{a, b}].push_back(t.role);
        }
    std::size_t mixed = 0;
    for (const auto& [e, roles] : edge_roles)
        if (roles.size() == 2 && roles[0] != roles[1]) ++mixed;
    CHECK(g.edges().size() == mixed);
}

TEST_CASE("air touching itself at a node is not a simple curve") {
    const std::set<std::pair<int, int>> holes{{1, 1}, {2, 2}};
    CHECK_THROWS_AS(extract_interface(grid_with_holes(4, holes)), ValidationError);
}

TEST_CASE("mesh without iron has no interface") {
    const Mesh m({{0, 0}, {1, 0}, {0, 1}}, {{{0, 1, 2}, Role::Air, false}});
    CHECK_THROWS_AS(extract_interface(m), ValidationError);
}

TEST_CASE("flipped curve negates normals and tangents") {
    DiskAnnulusParams p;
    p.h = 0.2;
    const InterfaceCurve g = extract_interface(disk_in_annulus(p));
    const InterfaceCurve f = g.flipped();
    CHECK(f.sign() == -1);
    for (std::size_t k = 0; k < g.edges().size(); ++k) {
        CHECK(f.edges()[k].normal.x == -g.edges()[k].normal.x);
        CHECK(f.edges()[k].tangent.y == -g.edges()[k].tangent.y);
    }
}

TEST_CASE("region areas match the analytic geometry") {
    DiskAnnulusParams p;
    p.h = 0.02;
    const Mesh m = disk_in_annulus(p);
    const double pi = std::numbers::pi;
    CHECK(m.region_area(Domain::Air) == doctest::Approx(pi * 1.25 * 1.25).epsilon(1e-3));
    CHECK(m.region_area(Domain::Iron) == doctest::Approx(pi * (4.0 - 1.25 * 1.25)).epsilon(1e-3));

    RectParams r;
    const Mesh q = rect_in_rect(r);
    CHECK(q.region_area(Domain::Air) == doctest::Approx(4.0 * r.inner_hx * r.inner_hy));
    CHECK(q.region_area(Domain::All) == doctest::Approx(4.0 * r.outer_hx * r.outer_hy));
}

TEST_CASE("eval disk tags only air triangles inside the radius") {
    DiskAnnulusParams p;
    p.h = 0.1;
    p.eval_radius = 0.5;
    const Mesh m = disk_in_annulus(p);
    CHECK(m.has_eval_region());
    for (int t = 0; t < static_cast<int>(m.triangle_count()); ++t) {
        const auto& tri = m.triangles()[static_cast<std::size_t>(t)];
        if (tri.eval) {
            CHECK(tri.role == Role::Air);
            CHECK(norm(m.centroid(t)) < 0.5);
        }
    }
}

TEST_CASE("halving h roughly quadruples the node count") {
    DiskAnnulusParams p;
    p.h = 0.1;
    const double n0 = static_cast<double>(disk_in_annulus(p).node_count());
    p.h = 0.05;
    const double n1 = static_cast<double>(disk_in_annulus(p).node_count());
    CHECK(n1 / n0 == doctest::Approx(4.0).epsilon(0.1));
}

TEST_CASE("invalid radii are rejected") {
    DiskAnnulusParams p;
    p.r_gamma = 2.0;
    CHECK_THROWS_AS(disk_in_annulus(p), ValidationError);
}

TEST_CASE("MSH round trip preserves geometry, tags and interface order") {
    DiskAnnulusParams p;
    p.h = 0.2;
    p.eval_radius = 0.6;
    const Mesh m = disk_in_annulus(p);
    const std::string text = format_msh(m);
    const Mesh back = parse_msh(text);
    REQUIRE(back.node_count() == m.node_count());
    REQUIRE(back.triangle_count() == m.triangle_count());
    for (std::size_t t = 0; t < m.triangle_count(); ++t) {
        CHECK(back.triangles()[t].role == m.triangles()[t].role);
        CHECK(back.triangles()[t].eval == m.triangles()[t].eval);
    }
    CHECK(extract_interface(back).loops() == extract_interface(m).loops());
    CHECK(format_msh(back) == text);
}

TEST_CASE("MSH version 4 and binary files are rejected") {
    std::string v4 = kSingleTriangle;
    v4.replace(v4.find("2.2 0 8"), 7, "4.1 0 8");
    CHECK_THROWS_AS(parse_msh(v4), ParseError);
    std::string bin = kSingleTriangle;
    bin.replace(bin.find("2.2 0 8"), 7, "2.2 1 8");
    CHECK_THROWS_AS(parse_msh(bin), ParseError);
}

TEST_CASE("MSH with an unmapped physical group is rejected") {
    std::string s = kSingleTriangle;
    s.replace(s.find("\"iron\""), 6, "\"yoke\"");
    CHECK_THROWS_AS(parse_msh(s), ValidationError);
    TagMap tags = default_tag_map();
    tags["yoke"] = "iron";
    CHECK(parse_msh(s, tags).triangle_count() == 1);
}

TEST_CASE("MSH with a truncated node section fails to parse") {
    std::string s = kSingleTriangle;
    s.erase(s.find("3 0 1 0\n"), 8);
    CHECK_THROWS_AS(parse_msh(s), ParseError);
}

TEST_CASE("MSH with varying z is rejected") {
    std::string s = kSingleTriangle;
    s.replace(s.find("3 0 1 0"), 7, "3 0 1 5");
    CHECK_THROWS(parse_msh(s));
}

TEST_CASE("missing MSH file is an I/O error naming the path") {
    try {
        load_msh("/nonexistent/mesh.msh");
        FAIL("expected an exception");
    } catch (const IoError& e) {
        CHECK(std::string(e.what()).find("/nonexistent/mesh.msh") != std::string::npos);
    }
}

TEST_CASE("quadrupole yoke node set is invariant under quarter turns") {
    const Mesh m = quadrupole_yoke({});
    std::vector<std::pair<long long, long long>> keys, rotated;
    auto key = [](Vec2 p) { return std::pair{std::llround(p.x * 1e9), std::llround(p.y * 1e9)}; };
    for (const Vec2& p : m.nodes()) {
        keys.push_back(key(p));
        rotated.push_back(key(rotate_ccw(p)));
    }
    std::sort(keys.begin(), keys.end());
    std::sort(rotated.begin(), rotated.end());
    CHECK(keys == rotated);
    CHECK(extract_interface(m).loops().size() == 1);
}

TEST_CASE("default disk rings keep the positive x-axis free of nodes") {
    DiskAnnulusParams p;
    p.h = 0.05;
    const Mesh m = disk_in_annulus(p);
    for (const Vec2& q : m.nodes())
        if (q.x > 0.0) CHECK(std::abs(q.y) > 1e-6);
}
