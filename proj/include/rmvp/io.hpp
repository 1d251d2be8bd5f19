#pragma once

#include "rmvp/geometry.hpp"
#include "rmvp/mesh.hpp"

#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace rmvp {

/// Numeric CSV with a fixed header line. Blank lines are skipped.
std::vector<std::vector<double>> read_csv(const std::filesystem::path& path,
                                          const std::vector<std::string>& header);

/// Shortest round-trip decimal representation (deterministic).
std::string format_number(double v);

class CsvWriter {
public:
    explicit CsvWriter(std::vector<std::string> header);
    CsvWriter& row(const std::vector<std::string>& cells);
    CsvWriter& row(const std::vector<double>& values);
    std::string str() const { return text_; }
    void save(const std::filesystem::path& path) const;

private:
    std::size_t columns_;
    std::string text_;
};

/// Writes text to a file, creating parent directories. Throws IoError.
void write_text(const std::filesystem::path& path, const std::string& text);
std::string read_text(const std::filesystem::path& path);

/// Legacy ASCII VTK unstructured grid of the triangles in `domain`, with one
/// nodal scalar per entry of `point_scalars` (indexed by mesh node) and one
/// 3-component cell vector per entry of `cell_vectors` (indexed by triangle).
struct VtkFields {
    std::map<std::string, std::vector<double>> point_scalars;
    std::map<std::string, std::vector<Vec2>> cell_vectors;
};

std::string format_vtk(const Mesh& mesh, Domain domain, const VtkFields& fields, const std::string& title);
void write_vtk(const std::filesystem::path& path, const Mesh& mesh, Domain domain, const VtkFields& fields,
               const std::string& title);

}  // namespace rmvp
