#pragma once

#include "rmvp/geometry.hpp"

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace rmvp {

/// Material role of a triangle. Air is the source-carrying, non-permeable
/// sub-domain; iron is the source-free, possibly nonlinear one.
enum class Role : std::uint8_t { Air, Iron };

struct Triangle {
    std::array<int, 3> v{};
    Role role = Role::Air;
    bool eval = false;  // member of the optional evaluation disk (always air)
};

struct BoundaryEdge {
    std::array<int, 2> v{};
    int tag = 0;
};

/// Selects the elements an operation integrates over. Eval is the optional
/// evaluation disk, a subset of Air.
enum class Domain : std::uint8_t { All, Air, Iron, Eval };

inline bool in_domain(const Triangle& t, Domain d) {
    switch (d) {
        case Domain::All: return true;
        case Domain::Air: return t.role == Role::Air;
        case Domain::Iron: return t.role == Role::Iron;
        case Domain::Eval: return t.role == Role::Air && t.eval;
    }
    return false;
}

struct Location {
    int triangle = -1;
    std::array<double, 3> bary{};
};

/// Conforming 2D triangle mesh with air/iron region tags.
///
/// Construction validates the mesh (positive areas after reorientation,
/// conformity, no hanging nodes) and builds the adjacency and a bucket grid
/// for point location. Immutable afterwards.
class Mesh {
public:
    Mesh(std::vector<Vec2> nodes, std::vector<Triangle> triangles,
         std::vector<BoundaryEdge> boundary_edges = {});

    const std::vector<Vec2>& nodes() const { return nodes_; }
    const std::vector<Triangle>& triangles() const { return triangles_; }
    /// Line elements as read from the file (informational).
    const std::vector<BoundaryEdge>& boundary_edges() const { return boundary_edges_; }

    std::size_t node_count() const { return nodes_.size(); }
    std::size_t triangle_count() const { return triangles_.size(); }

    double area(int t) const;
    Vec2 centroid(int t) const;
    Vec2 node(int i) const { return nodes_[static_cast<std::size_t>(i)]; }

    /// Edges with exactly one adjacent triangle (topological outer boundary),
    /// oriented with the domain on the left.
    const std::vector<std::array<int, 2>>& outer_edges() const { return outer_edges_; }
    /// Sorted node ids on the outer boundary.
    const std::vector<int>& outer_nodes() const { return outer_nodes_; }

    /// Neighbour triangle across local edge k (opposite vertex k), -1 on the boundary.
    int neighbor(int t, int k) const { return neighbors_[static_cast<std::size_t>(t)][static_cast<std::size_t>(k)]; }

    bool has_role(Role r) const;
    bool has_eval_region() const;
    double region_area(Domain d) const;

    /// Finds a triangle containing p (barycentrics >= -1e-10). Among several
    /// candidates the lowest triangle index wins. Returns nullopt outside.
    std::optional<Location> find(Vec2 p, Domain d = Domain::All) const;
    /// As find(), but throws GeometryError when p lies outside.
    Location locate(Vec2 p, Domain d = Domain::All) const;

    static constexpr double kBaryTolerance = 1e-10;

private:
    void orient_and_check();
    void build_topology();
    void check_hanging_nodes() const;
    void build_locator();

    std::vector<Vec2> nodes_;
    std::vector<Triangle> triangles_;
    std::vector<BoundaryEdge> boundary_edges_;
    std::vector<std::array<int, 3>> neighbors_;
    std::vector<std::array<int, 2>> outer_edges_;
    std::vector<int> outer_nodes_;

    // uniform bucket grid over triangle bounding boxes
    Vec2 grid_min_{};
    double cell_w_ = 1.0, cell_h_ = 1.0;
    int grid_nx_ = 1, grid_ny_ = 1;
    std::vector<int> cell_start_;
    std::vector<int> cell_items_;
};

/// Barycentric coordinates of p in triangle t.
std::array<double, 3> barycentric(const Mesh& mesh, int t, Vec2 p);

/// Maximum edge length over all triangles.
double mesh_length(const Mesh& mesh);
/// Mean length over unique edges (diagnostic only).
double mean_edge_length(const Mesh& mesh);

// ----------------------------------------------------------------------------
// Interface curve between air and iron
// ----------------------------------------------------------------------------

struct InterfaceEdge {
    int a = -1, b = -1;       // mesh node ids, traversal order a -> b
    int ta = -1, tb = -1;     // trace indices of a and b
    Vec2 tangent, normal;     // unit vectors, t = n rotated by +90 degrees
    double length = 0.0;
    int air_triangle = -1;
    int iron_triangle = -1;
};

/// Oriented interface Γ between the air and the iron region.
///
/// Standard orientation: n points from air into iron, loops run
/// counter-clockwise as seen from the air region (air on the left).
/// flipped() negates n and t; every trace quantity built on a curve is
/// expressed in that curve's convention, see sign().
class InterfaceCurve {
public:
    InterfaceCurve() = default;

    /// Node sequences, one per closed loop. Loop k starts at its smallest
    /// mesh node id; loops are ordered by that id.
    const std::vector<std::vector<int>>& loops() const { return loops_; }
    /// Edges in loop order.
    const std::vector<InterfaceEdge>& edges() const { return edges_; }
    /// Mesh node ids of the trace dofs, in loop order.
    const std::vector<int>& nodes() const { return nodes_; }
    /// Trace index of a mesh node, -1 if not on Γ.
    int trace_index(int mesh_node) const;
    /// Arc-length coordinate per trace node, restarting at 0 on each loop.
    const std::vector<double>& arc_length() const { return arc_length_; }
    /// Tangent at a trace node: length-weighted mean of the adjacent edge
    /// tangents (slightly shorter than unit length at corners).
    Vec2 node_tangent(int trace_node) const { return node_tangent_[static_cast<std::size_t>(trace_node)]; }
    Vec2 point(int trace_node) const { return points_[static_cast<std::size_t>(trace_node)]; }

    std::size_t size() const { return nodes_.size(); }
    double length() const;
    /// +1 for the standard orientation, -1 after flipped().
    int sign() const { return sign_; }
    InterfaceCurve flipped() const;

    /// Centroid of the trace nodes and the largest node distance to it.
    Vec2 center() const;
    double radius() const;

    friend InterfaceCurve extract_interface(const Mesh& mesh);

private:
    std::vector<std::vector<int>> loops_;
    std::vector<InterfaceEdge> edges_;
    std::vector<int> nodes_;
    std::vector<double> arc_length_;
    std::vector<Vec2> node_tangent_;
    std::vector<Vec2> points_;
    std::vector<int> node_lookup_;  // mesh node -> trace index
    int sign_ = 1;
};

/// All edges shared by an air and an iron triangle, chained into closed loops.
/// Throws ValidationError when there are no such edges or a chain is open.
InterfaceCurve extract_interface(const Mesh& mesh);

// ----------------------------------------------------------------------------
// Gmsh MSH 2.2 ASCII
// ----------------------------------------------------------------------------

/// Maps physical names (or decimal physical tags) onto roles:
/// "air", "iron", "eval" or "outer_boundary".
using TagMap = std::map<std::string, std::string>;

/// Identity mapping for the names written by write_msh().
TagMap default_tag_map();

Mesh load_msh(const std::filesystem::path& path, const TagMap& tags = default_tag_map());
Mesh parse_msh(const std::string& text, const TagMap& tags = default_tag_map());

/// Writes physical groups 1 = outer_boundary (lines), 2 = air, 3 = iron,
/// 4 = eval (triangles). Byte-deterministic.
void write_msh(const Mesh& mesh, const std::filesystem::path& path);
std::string format_msh(const Mesh& mesh);

}  // namespace rmvp
