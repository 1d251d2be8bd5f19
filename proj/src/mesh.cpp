#include "rmvp/mesh.hpp"
#include "rmvp/error.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <numeric>
#include <sstream>
#include <unordered_map>

namespace rmvp {

namespace {

constexpr double kMinArea = 1e-16;

struct EdgeRef {
    int lo, hi;  // sorted node ids
    int tri;
    int k;  // local edge index (opposite vertex k)
    bool operator<(const EdgeRef& o) const {
        if (lo != o.lo) return lo < o.lo;
        if (hi != o.hi) return hi < o.hi;
        return tri < o.tri;
    }
};

std::vector<EdgeRef> collect_edges(const std::vector<Triangle>& tris) {
    std::vector<EdgeRef> edges;
    edges.reserve(tris.size() * 3);
    for (int t = 0; t < static_cast<int>(tris.size()); ++t) {
        const auto& v = tris[static_cast<std::size_t>(t)].v;
        for (int k = 0; k < 3; ++k) {
            const int a = v[static_cast<std::size_t>((k + 1) % 3)];
            const int b = v[static_cast<std::size_t>((k + 2) % 3)];
            edges.push_back({std::min(a, b), std::max(a, b), t, k});
        }
    }
    std::sort(edges.begin(), edges.end());
    return edges;
}

}  // namespace

// ============================================================================
// Mesh
// ============================================================================

Mesh::Mesh(std::vector<Vec2> nodes, std::vector<Triangle> triangles,
           std::vector<BoundaryEdge> boundary_edges)
    : nodes_(std::move(nodes)),
      triangles_(std::move(triangles)),
      boundary_edges_(std::move(boundary_edges)) {
    if (triangles_.empty()) throw ValidationError("mesh has no triangles (empty region)");
    orient_and_check();
    build_topology();
    check_hanging_nodes();
    build_locator();
}

void Mesh::orient_and_check() {
    const int n = static_cast<int>(nodes_.size());
    for (std::size_t t = 0; t < triangles_.size(); ++t) {
        auto& tri = triangles_[t];
        for (int v : tri.v) {
            if (v < 0 || v >= n)
                throw ValidationError("triangle " + std::to_string(t) + " references missing node " +
                                      std::to_string(v));
        }
        if (tri.eval && tri.role != Role::Air)
            throw ValidationError("eval triangle " + std::to_string(t) + " is not air");
        double a2 = signed_area2(nodes_[static_cast<std::size_t>(tri.v[0])],
                                 nodes_[static_cast<std::size_t>(tri.v[1])],
                                 nodes_[static_cast<std::size_t>(tri.v[2])]);
        if (a2 < 0.0) {
            std::swap(tri.v[1], tri.v[2]);
            a2 = -a2;
        }
        if (0.5 * a2 < kMinArea)
            throw ValidationError("degenerate triangle " + std::to_string(t) + " (area below 1e-16 m^2)");
    }
}

void Mesh::build_topology() {
    neighbors_.assign(triangles_.size(), {-1, -1, -1});
    const auto edges = collect_edges(triangles_);
    std::vector<char> on_boundary(nodes_.size(), 0);
    for (std::size_t i = 0; i < edges.size();) {
        std::size_t j = i;
        while (j < edges.size() && edges[j].lo == edges[i].lo && edges[j].hi == edges[i].hi) ++j;
        const std::size_t count = j - i;
        if (count > 2)
            throw ValidationError("non-conforming mesh: edge (" + std::to_string(edges[i].lo) + ", " +
                                  std::to_string(edges[i].hi) + ") shared by " + std::to_string(count) +
                                  " triangles");
        if (count == 2) {
            const auto& e0 = edges[i];
            const auto& e1 = edges[i + 1];
            neighbors_[static_cast<std::size_t>(e0.tri)][static_cast<std::size_t>(e0.k)] = e1.tri;
            neighbors_[static_cast<std::size_t>(e1.tri)][static_cast<std::size_t>(e1.k)] = e0.tri;
        } else {
            const auto& e = edges[i];
            const auto& v = triangles_[static_cast<std::size_t>(e.tri)].v;
            // counter-clockwise triangle: edge (k+1 -> k+2) has the interior on the left
            const int a = v[static_cast<std::size_t>((e.k + 1) % 3)];
            const int b = v[static_cast<std::size_t>((e.k + 2) % 3)];
            outer_edges_.push_back({a, b});
            on_boundary[static_cast<std::size_t>(a)] = 1;
            on_boundary[static_cast<std::size_t>(b)] = 1;
        }
        i = j;
    }
    for (std::size_t v = 0; v < nodes_.size(); ++v)
        if (on_boundary[v]) outer_nodes_.push_back(static_cast<int>(v));
}

void Mesh::check_hanging_nodes() const {
    // a node in the interior of a single-sided edge is a T-junction
    Vec2 lo{std::numeric_limits<double>::max(), std::numeric_limits<double>::max()};
    Vec2 hi{-lo.x, -lo.y};
    for (const auto& p : nodes_) {
        lo = {std::min(lo.x, p.x), std::min(lo.y, p.y)};
        hi = {std::max(hi.x, p.x), std::max(hi.y, p.y)};
    }
    const int side = std::max(1, static_cast<int>(std::sqrt(static_cast<double>(nodes_.size()))));
    const double w = std::max(hi.x - lo.x, 1e-300) / side;
    const double h = std::max(hi.y - lo.y, 1e-300) / side;
    auto cell_of = [&](Vec2 p) {
        const int cx = std::clamp(static_cast<int>((p.x - lo.x) / w), 0, side - 1);
        const int cy = std::clamp(static_cast<int>((p.y - lo.y) / h), 0, side - 1);
        return std::pair{cx, cy};
    };
    std::vector<std::vector<int>> cells(static_cast<std::size_t>(side * side));
    for (int i = 0; i < static_cast<int>(nodes_.size()); ++i) {
        auto [cx, cy] = cell_of(nodes_[static_cast<std::size_t>(i)]);
        cells[static_cast<std::size_t>(cy * side + cx)].push_back(i);
    }
    for (const auto& e : outer_edges_) {
        const Vec2 a = nodes_[static_cast<std::size_t>(e[0])];
        const Vec2 b = nodes_[static_cast<std::size_t>(e[1])];
        const double len = distance(a, b);
        auto [x0, y0] = cell_of({std::min(a.x, b.x), std::min(a.y, b.y)});
        auto [x1, y1] = cell_of({std::max(a.x, b.x), std::max(a.y, b.y)});
        for (int cy = y0; cy <= y1; ++cy) {
            for (int cx = x0; cx <= x1; ++cx) {
                for (int i : cells[static_cast<std::size_t>(cy * side + cx)]) {
                    if (i == e[0] || i == e[1]) continue;
                    const Vec2 p = nodes_[static_cast<std::size_t>(i)];
                    const double t = dot(p - a, b - a) / (len * len);
                    if (t <= 0.0 || t >= 1.0) continue;
                    if (point_segment_distance(p, a, b) < 1e-10 * len)
                        throw ValidationError("non-conforming mesh: hanging node " + std::to_string(i) +
                                              " on edge (" + std::to_string(e[0]) + ", " +
                                              std::to_string(e[1]) + ")");
                }
            }
        }
    }
}

void Mesh::build_locator() {
    Vec2 lo{std::numeric_limits<double>::max(), std::numeric_limits<double>::max()};
    Vec2 hi{-lo.x, -lo.y};
    for (const auto& p : nodes_) {
        lo = {std::min(lo.x, p.x), std::min(lo.y, p.y)};
        hi = {std::max(hi.x, p.x), std::max(hi.y, p.y)};
    }
    const double wx = std::max(hi.x - lo.x, 1e-12);
    const double wy = std::max(hi.y - lo.y, 1e-12);
    const double target = std::max(1.0, static_cast<double>(triangles_.size()) / 2.0);
    grid_nx_ = std::max(1, static_cast<int>(std::sqrt(target * wx / wy)));
    grid_ny_ = std::max(1, static_cast<int>(target / grid_nx_));
    grid_min_ = lo;
    cell_w_ = wx / grid_nx_;
    cell_h_ = wy / grid_ny_;

    auto range = [&](int t) {
        const auto& v = triangles_[static_cast<std::size_t>(t)].v;
        double x0 = std::numeric_limits<double>::max(), y0 = x0, x1 = -x0, y1 = -x0;
        for (int i : v) {
            const Vec2 p = nodes_[static_cast<std::size_t>(i)];
            x0 = std::min(x0, p.x); x1 = std::max(x1, p.x);
            y0 = std::min(y0, p.y); y1 = std::max(y1, p.y);
        }
        const double pad = 1e-9 * std::max(cell_w_, cell_h_);
        const int cx0 = std::clamp(static_cast<int>((x0 - pad - lo.x) / cell_w_), 0, grid_nx_ - 1);
        const int cx1 = std::clamp(static_cast<int>((x1 + pad - lo.x) / cell_w_), 0, grid_nx_ - 1);
        const int cy0 = std::clamp(static_cast<int>((y0 - pad - lo.y) / cell_h_), 0, grid_ny_ - 1);
        const int cy1 = std::clamp(static_cast<int>((y1 + pad - lo.y) / cell_h_), 0, grid_ny_ - 1);
        return std::array<int, 4>{cx0, cx1, cy0, cy1};
    };

    const std::size_t ncell = static_cast<std::size_t>(grid_nx_) * static_cast<std::size_t>(grid_ny_);
    std::vector<int> counts(ncell + 1, 0);
    for (int t = 0; t < static_cast<int>(triangles_.size()); ++t) {
        auto r = range(t);
        for (int cy = r[2]; cy <= r[3]; ++cy)
            for (int cx = r[0]; cx <= r[1]; ++cx) ++counts[static_cast<std::size_t>(cy * grid_nx_ + cx) + 1];
    }
    cell_start_.assign(ncell + 1, 0);
    for (std::size_t c = 0; c < ncell; ++c) cell_start_[c + 1] = cell_start_[c] + counts[c + 1];
    cell_items_.assign(static_cast<std::size_t>(cell_start_[ncell]), 0);
    std::vector<int> fill(cell_start_.begin(), cell_start_.end() - 1);
    for (int t = 0; t < static_cast<int>(triangles_.size()); ++t) {
        auto r = range(t);
        for (int cy = r[2]; cy <= r[3]; ++cy)
            for (int cx = r[0]; cx <= r[1]; ++cx)
                cell_items_[static_cast<std::size_t>(fill[static_cast<std::size_t>(cy * grid_nx_ + cx)]++)] = t;
    }
}

double Mesh::area(int t) const {
    const auto& v = triangles_[static_cast<std::size_t>(t)].v;
    return 0.5 * signed_area2(node(v[0]), node(v[1]), node(v[2]));
}

Vec2 Mesh::centroid(int t) const {
    const auto& v = triangles_[static_cast<std::size_t>(t)].v;
    return (node(v[0]) + node(v[1]) + node(v[2])) / 3.0;
}

bool Mesh::has_role(Role r) const {
    return std::any_of(triangles_.begin(), triangles_.end(), [r](const Triangle& t) { return t.role == r; });
}

bool Mesh::has_eval_region() const {
    return std::any_of(triangles_.begin(), triangles_.end(), [](const Triangle& t) { return t.eval; });
}

double Mesh::region_area(Domain d) const {
    double sum = 0.0;
    for (int t = 0; t < static_cast<int>(triangles_.size()); ++t)
        if (in_domain(triangles_[static_cast<std::size_t>(t)], d)) sum += area(t);
    return sum;
}

std::array<double, 3> barycentric(const Mesh& mesh, int t, Vec2 p) {
    const auto& v = mesh.triangles()[static_cast<std::size_t>(t)].v;
    const Vec2 a = mesh.node(v[0]), b = mesh.node(v[1]), c = mesh.node(v[2]);
    const double det = signed_area2(a, b, c);
    const double l1 = signed_area2(a, p, c) / det;
    const double l2 = signed_area2(a, b, p) / det;
    return {1.0 - l1 - l2, l1, l2};
}

std::optional<Location> Mesh::find(Vec2 p, Domain d) const {
    if (!std::isfinite(p.x) || !std::isfinite(p.y)) return std::nullopt;
    const double fx = (p.x - grid_min_.x) / cell_w_;
    const double fy = (p.y - grid_min_.y) / cell_h_;
    if (fx < -1e-9 || fy < -1e-9 || fx > grid_nx_ + 1e-9 || fy > grid_ny_ + 1e-9) return std::nullopt;
    const int cx = std::clamp(static_cast<int>(fx), 0, grid_nx_ - 1);
    const int cy = std::clamp(static_cast<int>(fy), 0, grid_ny_ - 1);
    const std::size_t c = static_cast<std::size_t>(cy * grid_nx_ + cx);
    for (int i = cell_start_[c]; i < cell_start_[c + 1]; ++i) {
        const int t = cell_items_[static_cast<std::size_t>(i)];
        if (!in_domain(triangles_[static_cast<std::size_t>(t)], d)) continue;
        const auto bary = barycentric(*this, t, p);
        if (bary[0] >= -kBaryTolerance && bary[1] >= -kBaryTolerance && bary[2] >= -kBaryTolerance)
            return Location{t, bary};
    }
    return std::nullopt;
}

Location Mesh::locate(Vec2 p, Domain d) const {
    auto loc = find(p, d);
    if (!loc) {
        std::ostringstream os;
        os << std::setprecision(17) << "point (" << p.x << ", " << p.y << ") is outside the meshed domain";
        throw GeometryError(os.str());
    }
    return *loc;
}

double mesh_length(const Mesh& mesh) {
    double h = 0.0;
    for (const auto& tri : mesh.triangles())
        for (int k = 0; k < 3; ++k)
            h = std::max(h, distance(mesh.node(tri.v[static_cast<std::size_t>(k)]),
                                     mesh.node(tri.v[static_cast<std::size_t>((k + 1) % 3)])));
    return h;
}

double mean_edge_length(const Mesh& mesh) {
    const auto edges = collect_edges(mesh.triangles());
    double sum = 0.0;
    std::size_t count = 0;
    for (std::size_t i = 0; i < edges.size(); ++i) {
        if (i > 0 && edges[i].lo == edges[i - 1].lo && edges[i].hi == edges[i - 1].hi) continue;
        sum += distance(mesh.node(edges[i].lo), mesh.node(edges[i].hi));
        ++count;
    }
    return count ? sum / static_cast<double>(count) : 0.0;
}

// ============================================================================
// Interface
// ============================================================================

int InterfaceCurve::trace_index(int mesh_node) const {
    if (mesh_node < 0 || mesh_node >= static_cast<int>(node_lookup_.size())) return -1;
    return node_lookup_[static_cast<std::size_t>(mesh_node)];
}

double InterfaceCurve::length() const {
    double sum = 0.0;
    for (const auto& e : edges_) sum += e.length;
    return sum;
}

InterfaceCurve InterfaceCurve::flipped() const {
    InterfaceCurve c = *this;
    c.sign_ = -sign_;
    for (auto& e : c.edges_) {
        e.tangent = e.tangent * -1.0;
        e.normal = e.normal * -1.0;
    }
    for (auto& t : c.node_tangent_) t = t * -1.0;
    return c;
}

Vec2 InterfaceCurve::center() const {
    // length-weighted edge midpoints, insensitive to node spacing
    Vec2 c{};
    double total = 0.0;
    for (const auto& e : edges_) {
        c += (points_[static_cast<std::size_t>(e.ta)] + points_[static_cast<std::size_t>(e.tb)]) * (0.5 * e.length);
        total += e.length;
    }
    return total > 0.0 ? c / total : c;
}

double InterfaceCurve::radius() const {
    const Vec2 c = center();
    double r = 0.0;
    for (const auto& p : points_) r = std::max(r, distance(p, c));
    return r;
}

InterfaceCurve extract_interface(const Mesh& mesh) {
    if (!mesh.has_role(Role::Air) || !mesh.has_role(Role::Iron))
        throw ValidationError("interface extraction needs both an air and an iron region");
    const auto& tris = mesh.triangles();

    std::vector<InterfaceEdge> raw;
    for (int t = 0; t < static_cast<int>(tris.size()); ++t) {
        const auto& tri = tris[static_cast<std::size_t>(t)];
        if (tri.role != Role::Air) continue;
        for (int k = 0; k < 3; ++k) {
            const int nb = mesh.neighbor(t, k);
            if (nb < 0 || tris[static_cast<std::size_t>(nb)].role != Role::Iron) continue;
            InterfaceEdge e;
            e.a = tri.v[static_cast<std::size_t>((k + 1) % 3)];
            e.b = tri.v[static_cast<std::size_t>((k + 2) % 3)];
            const Vec2 d = mesh.node(e.b) - mesh.node(e.a);
            e.length = norm(d);
            e.tangent = d / e.length;
            e.normal = rotate_cw(e.tangent);  // air on the left -> right side is iron
            e.air_triangle = t;
            e.iron_triangle = nb;
            raw.push_back(e);
        }
    }
    if (raw.empty()) throw ValidationError("air and iron regions share no edge (zero interface edges)");

    std::unordered_map<int, std::size_t> outgoing;
    for (std::size_t i = 0; i < raw.size(); ++i) {
        if (!outgoing.emplace(raw[i].a, i).second)
            throw ValidationError("interface is not a simple curve at node " + std::to_string(raw[i].a));
    }

    InterfaceCurve curve;
    curve.node_lookup_.assign(mesh.node_count(), -1);
    std::vector<char> used(raw.size(), 0);
    // loop starts ordered by smallest node id
    std::vector<std::size_t> order(raw.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) { return raw[x].a < raw[y].a; });
    for (std::size_t start : order) {
        if (used[start]) continue;
        std::vector<int> loop;
        std::size_t cur = start;
        double s = 0.0;
        const std::size_t first_edge = curve.edges_.size();
        while (true) {
            if (used[cur]) throw ValidationError("interface chain revisits an edge");
            used[cur] = 1;
            InterfaceEdge e = raw[cur];
            const int idx = static_cast<int>(curve.nodes_.size());
            curve.node_lookup_[static_cast<std::size_t>(e.a)] = idx;
            curve.nodes_.push_back(e.a);
            curve.points_.push_back(mesh.node(e.a));
            curve.arc_length_.push_back(s);
            s += e.length;
            loop.push_back(e.a);
            curve.edges_.push_back(e);
            auto it = outgoing.find(e.b);
            if (it == outgoing.end())
                throw ValidationError("interface chain is open at node " + std::to_string(e.b) +
                                      " (non-watertight interface)");
            cur = it->second;
            if (cur == start) break;
        }
        for (std::size_t i = first_edge; i < curve.edges_.size(); ++i) {
            auto& e = curve.edges_[i];
            e.ta = curve.node_lookup_[static_cast<std::size_t>(e.a)];
            e.tb = curve.node_lookup_[static_cast<std::size_t>(e.b)];
        }
        curve.loops_.push_back(std::move(loop));
    }

    // length-weighted mean of the adjacent edge tangents, deliberately not
    // renormalised: the trapezoidal sum of t.H over the nodes then equals the
    // edge-exact one, so circulations over Γ are second-order accurate
    curve.node_tangent_.assign(curve.nodes_.size(), Vec2{});
    std::vector<double> weight(curve.nodes_.size(), 0.0);
    for (const auto& e : curve.edges_) {
        for (int k : {e.ta, e.tb}) {
            curve.node_tangent_[static_cast<std::size_t>(k)] += e.tangent * e.length;
            weight[static_cast<std::size_t>(k)] += e.length;
        }
    }
    for (std::size_t k = 0; k < weight.size(); ++k) curve.node_tangent_[k] = curve.node_tangent_[k] / weight[k];
    return curve;
}

// ============================================================================
// MSH 2.2
// ============================================================================

TagMap default_tag_map() {
    return {{"air", "air"}, {"iron", "iron"}, {"eval", "eval"}, {"outer_boundary", "outer_boundary"}};
}

namespace {

std::string next_line(std::istream& in, int& lineno) {
    std::string line;
    if (!std::getline(in, line)) throw ParseError("unexpected end of file after line " + std::to_string(lineno));
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    return line;
}

void expect_end(std::istream& in, int& lineno, const std::string& section) {
    const std::string line = next_line(in, lineno);
    if (line.rfind("$End" + section, 0) != 0)
        throw ParseError("line " + std::to_string(lineno) + ": expected $End" + section);
}

}  // namespace

Mesh parse_msh(const std::string& text, const TagMap& tags) {
    std::istringstream in(text);
    int lineno = 0;
    bool have_format = false;
    std::map<int, std::string> physical_names;  // 2D and 1D share the map, tags are unique per dim in practice
    std::map<long, Vec2> raw_nodes;
    double z_ref = std::numeric_limits<double>::quiet_NaN();
    struct RawTri { std::array<long, 3> v; int phys; };
    struct RawLine { std::array<long, 2> v; int phys; };
    std::vector<RawTri> raw_tris;
    std::vector<RawLine> raw_lines;

    std::string line;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        if (line == "$MeshFormat") {
            std::istringstream ls(next_line(in, lineno));
            double version = 0.0;
            int file_type = -1, data_size = 0;
            if (!(ls >> version >> file_type >> data_size)) throw ParseError("malformed $MeshFormat header");
            if (version >= 3.0 || version < 2.0)
                throw ParseError("unsupported MSH version " + std::to_string(version) +
                                 "; only ASCII MSH 2.2 is accepted (export with -format msh22)");
            if (file_type != 0) throw ParseError("binary MSH files are not supported");
            expect_end(in, lineno, "MeshFormat");
            have_format = true;
        } else if (line == "$PhysicalNames") {
            std::istringstream cs(next_line(in, lineno));
            int n = 0;
            if (!(cs >> n) || n < 0) throw ParseError("malformed $PhysicalNames count");
            for (int i = 0; i < n; ++i) {
                std::istringstream ls(next_line(in, lineno));
                int dim = 0, tag = 0;
                std::string name;
                if (!(ls >> dim >> tag)) throw ParseError("malformed physical name at line " + std::to_string(lineno));
                std::getline(ls, name);
                const auto q0 = name.find('"');
                const auto q1 = name.rfind('"');
                if (q0 == std::string::npos || q1 <= q0)
                    throw ParseError("physical name must be quoted at line " + std::to_string(lineno));
                physical_names[tag] = name.substr(q0 + 1, q1 - q0 - 1);
            }
            expect_end(in, lineno, "PhysicalNames");
        } else if (line == "$Nodes") {
            std::istringstream cs(next_line(in, lineno));
            long n = 0;
            if (!(cs >> n) || n < 0) throw ParseError("malformed $Nodes count");
            for (long i = 0; i < n; ++i) {
                std::istringstream ls(next_line(in, lineno));
                long id = 0;
                double x = 0, y = 0, z = 0;
                if (!(ls >> id >> x >> y >> z)) throw ParseError("malformed node at line " + std::to_string(lineno));
                if (std::isnan(z_ref)) z_ref = z;
                if (std::abs(z - z_ref) > 1e-12 * std::max(1.0, std::abs(z_ref)))
                    throw ParseError("node " + std::to_string(id) + " has a different z-coordinate; mesh must be planar");
                raw_nodes[id] = {x, y};
            }
            expect_end(in, lineno, "Nodes");
        } else if (line == "$Elements") {
            std::istringstream cs(next_line(in, lineno));
            long n = 0;
            if (!(cs >> n) || n < 0) throw ParseError("malformed $Elements count");
            for (long i = 0; i < n; ++i) {
                std::istringstream ls(next_line(in, lineno));
                long id = 0;
                int type = 0, ntags = 0;
                if (!(ls >> id >> type >> ntags) || ntags < 0)
                    throw ParseError("malformed element at line " + std::to_string(lineno));
                std::vector<int> etags(static_cast<std::size_t>(ntags));
                for (auto& t : etags)
                    if (!(ls >> t)) throw ParseError("malformed element tags at line " + std::to_string(lineno));
                const int phys = ntags > 0 ? etags[0] : 0;
                if (type == 2) {
                    RawTri t{{}, phys};
                    for (auto& v : t.v)
                        if (!(ls >> v)) throw ParseError("malformed triangle at line " + std::to_string(lineno));
                    raw_tris.push_back(t);
                } else if (type == 1) {
                    RawLine l{{}, phys};
                    for (auto& v : l.v)
                        if (!(ls >> v)) throw ParseError("malformed line element at line " + std::to_string(lineno));
                    raw_lines.push_back(l);
                }
                // other element types are skipped
            }
            expect_end(in, lineno, "Elements");
        } else if (line.rfind("$", 0) == 0 && line.rfind("$End", 0) != 0) {
            // unknown section: skip to its end marker
            const std::string end = "$End" + line.substr(1);
            std::string skip;
            while (true) {
                skip = next_line(in, lineno);
                if (skip == end) break;
            }
        }
    }
    if (!have_format) throw ParseError("missing $MeshFormat section");
    if (raw_tris.empty()) throw ValidationError("mesh file contains no triangles (empty region)");

    auto role_of = [&](int phys) -> std::string {
        auto name = physical_names.find(phys);
        if (name != physical_names.end()) {
            auto it = tags.find(name->second);
            if (it != tags.end()) return it->second;
        }
        auto it = tags.find(std::to_string(phys));
        if (it != tags.end()) return it->second;
        const std::string label = name != physical_names.end() ? "'" + name->second + "'" : std::to_string(phys);
        throw ValidationError("no region role mapped for physical group " + label);
    };

    std::map<long, int> renumber;
    std::vector<Vec2> nodes;
    auto index_of = [&](long id) {
        auto it = renumber.find(id);
        if (it != renumber.end()) return it->second;
        auto p = raw_nodes.find(id);
        if (p == raw_nodes.end()) throw ParseError("element references unknown node " + std::to_string(id));
        const int idx = static_cast<int>(nodes.size());
        nodes.push_back(p->second);
        renumber.emplace(id, idx);
        return idx;
    };

    std::vector<Triangle> tris;
    tris.reserve(raw_tris.size());
    for (const auto& rt : raw_tris) {
        const std::string role = role_of(rt.phys);
        Triangle t;
        if (role == "air") {
            t.role = Role::Air;
        } else if (role == "iron") {
            t.role = Role::Iron;
        } else if (role == "eval") {
            t.role = Role::Air;
            t.eval = true;
        } else {
            throw ValidationError("triangles cannot carry role '" + role + "'");
        }
        for (int k = 0; k < 3; ++k) t.v[static_cast<std::size_t>(k)] = index_of(rt.v[static_cast<std::size_t>(k)]);
        tris.push_back(t);
    }
    std::vector<BoundaryEdge> lines;
    for (const auto& rl : raw_lines) {
        if (renumber.count(rl.v[0]) == 0 || renumber.count(rl.v[1]) == 0) continue;
        lines.push_back({{renumber[rl.v[0]], renumber[rl.v[1]]}, rl.phys});
    }
    return Mesh(std::move(nodes), std::move(tris), std::move(lines));
}

Mesh load_msh(const std::filesystem::path& path, const TagMap& tags) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open mesh file " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_msh(ss.str(), tags);
}

std::string format_msh(const Mesh& mesh) {
    std::ostringstream os;
    os << std::setprecision(17);
    os << "$MeshFormat\n2.2 0 8\n$EndMeshFormat\n";
    os << "$PhysicalNames\n4\n1 1 \"outer_boundary\"\n2 2 \"air\"\n2 3 \"iron\"\n2 4 \"eval\"\n$EndPhysicalNames\n";
    os << "$Nodes\n" << mesh.node_count() << "\n";
    for (std::size_t i = 0; i < mesh.node_count(); ++i)
        os << i + 1 << " " << mesh.nodes()[i].x << " " << mesh.nodes()[i].y << " 0\n";
    os << "$EndNodes\n";
    const auto& outer = mesh.outer_edges();
    os << "$Elements\n" << outer.size() + mesh.triangle_count() << "\n";
    long id = 1;
    for (const auto& e : outer) os << id++ << " 1 2 1 1 " << e[0] + 1 << " " << e[1] + 1 << "\n";
    for (const auto& t : mesh.triangles()) {
        const int phys = t.eval ? 4 : (t.role == Role::Air ? 2 : 3);
        os << id++ << " 2 2 " << phys << " " << phys << " " << t.v[0] + 1 << " " << t.v[1] + 1 << " "
           << t.v[2] + 1 << "\n";
    }
    os << "$EndElements\n";
    return os.str();
}

void write_msh(const Mesh& mesh, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write mesh file " + path.string());
    out << format_msh(mesh);
    if (!out) throw IoError("failed writing mesh file " + path.string());
}

}  // namespace rmvp
