#include "rmvp/io.hpp"
#include "rmvp/error.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <sstream>

namespace rmvp {

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

std::vector<std::string> split(const std::string& line) {
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(trim(cell));
    if (!line.empty() && line.back() == ',') cells.emplace_back();
    return cells;
}

}  // namespace

std::vector<std::vector<double>> read_csv(const std::filesystem::path& path,
                                          const std::vector<std::string>& header) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path.string());
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!trim(line).empty()) break;
    }
    if (split(trim(line)) != header) {
        std::string expected;
        for (const auto& h : header) expected += (expected.empty() ? "" : ",") + h;
        throw ParseError(path.string() + ": expected header '" + expected + "'");
    }
    std::vector<std::vector<double>> rows;
    while (std::getline(in, line)) {
        ++lineno;
        if (trim(line).empty()) continue;
        const auto cells = split(trim(line));
        if (cells.size() != header.size())
            throw ParseError(path.string() + ":" + std::to_string(lineno) + ": expected " +
                             std::to_string(header.size()) + " columns");
        std::vector<double> row;
        for (const auto& c : cells) {
            double v = 0.0;
            const auto [ptr, ec] = std::from_chars(c.data(), c.data() + c.size(), v);
            if (ec != std::errc{} || ptr != c.data() + c.size())
                throw ParseError(path.string() + ":" + std::to_string(lineno) + ": not a number: '" + c + "'");
            row.push_back(v);
        }
        rows.push_back(std::move(row));
    }
    return rows;
}

std::string format_number(double v) {
    char buf[64];
    const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, ptr);
}

CsvWriter::CsvWriter(std::vector<std::string> header) : columns_(header.size()) {
    row(header);
}

CsvWriter& CsvWriter::row(const std::vector<std::string>& cells) {
    if (cells.size() != columns_) throw Error("CSV row has " + std::to_string(cells.size()) + " cells, expected " +
                                              std::to_string(columns_));
    for (std::size_t i = 0; i < cells.size(); ++i) text_ += (i ? "," : "") + cells[i];
    text_ += '\n';
    return *this;
}

CsvWriter& CsvWriter::row(const std::vector<double>& values) {
    std::vector<std::string> cells;
    cells.reserve(values.size());
    for (double v : values) cells.push_back(format_number(v));
    return row(cells);
}

void CsvWriter::save(const std::filesystem::path& path) const { write_text(path, text_); }

void write_text(const std::filesystem::path& path, const std::string& text) {
    std::error_code ec;
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path(), ec);
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + path.string());
    out << text;
    if (!out) throw IoError("write failed: " + path.string());
}

std::string read_text(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::string format_vtk(const Mesh& mesh, Domain domain, const VtkFields& fields, const std::string& title) {
    std::vector<int> local(mesh.node_count(), -1);
    std::vector<int> nodes, tris;
    for (int t = 0; t < static_cast<int>(mesh.triangle_count()); ++t) {
        const auto& tri = mesh.triangles()[static_cast<std::size_t>(t)];
        if (!in_domain(tri, domain)) continue;
        tris.push_back(t);
        for (int v : tri.v)
            if (local[static_cast<std::size_t>(v)] < 0) {
                local[static_cast<std::size_t>(v)] = 0;
                nodes.push_back(v);
            }
    }
    std::sort(nodes.begin(), nodes.end());
    for (std::size_t i = 0; i < nodes.size(); ++i) local[static_cast<std::size_t>(nodes[i])] = static_cast<int>(i);

    std::ostringstream os;
    os << "# vtk DataFile Version 3.0\n" << title << "\nASCII\nDATASET UNSTRUCTURED_GRID\n";
    os << "POINTS " << nodes.size() << " double\n";
    for (int n : nodes) {
        const Vec2 p = mesh.node(n);
        os << format_number(p.x) << ' ' << format_number(p.y) << " 0\n";
    }
    os << "CELLS " << tris.size() << ' ' << 4 * tris.size() << '\n';
    for (int t : tris) {
        const auto& v = mesh.triangles()[static_cast<std::size_t>(t)].v;
        os << "3 " << local[static_cast<std::size_t>(v[0])] << ' ' << local[static_cast<std::size_t>(v[1])] << ' '
           << local[static_cast<std::size_t>(v[2])] << '\n';
    }
    os << "CELL_TYPES " << tris.size() << '\n';
    for (std::size_t i = 0; i < tris.size(); ++i) os << "5\n";
    if (!fields.point_scalars.empty()) {
        os << "POINT_DATA " << nodes.size() << '\n';
        for (const auto& [name, values] : fields.point_scalars) {
            if (values.size() != mesh.node_count()) throw Error("VTK point field '" + name + "' has wrong size");
            os << "SCALARS " << name << " double 1\nLOOKUP_TABLE default\n";
            for (int n : nodes) os << format_number(values[static_cast<std::size_t>(n)]) << '\n';
        }
    }
    if (!fields.cell_vectors.empty()) {
        os << "CELL_DATA " << tris.size() << '\n';
        for (const auto& [name, values] : fields.cell_vectors) {
            if (values.size() != mesh.triangle_count()) throw Error("VTK cell field '" + name + "' has wrong size");
            os << "VECTORS " << name << " double\n";
            for (int t : tris) {
                const Vec2 b = values[static_cast<std::size_t>(t)];
                os << format_number(b.x) << ' ' << format_number(b.y) << " 0\n";
            }
        }
    }
    return os.str();
}

void write_vtk(const std::filesystem::path& path, const Mesh& mesh, Domain domain, const VtkFields& fields,
               const std::string& title) {
    write_text(path, format_vtk(mesh, domain, fields, title));
}

}  // namespace rmvp
