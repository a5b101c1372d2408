#pragma once

#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "crossreg/error.hpp"
#include "crossreg/pointcloud.hpp"

namespace crossreg {

namespace ply_detail {

inline std::vector<std::string_view> split_ws(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && std::isspace(static_cast<unsigned char>(line[i]))) ++i;
    std::size_t j = i;
    while (j < line.size() && !std::isspace(static_cast<unsigned char>(line[j]))) ++j;
    if (j > i) out.push_back(line.substr(i, j - i));
    i = j;
  }
  return out;
}

inline bool parse_double(std::string_view tok, double& out) {
  // from_chars rejects a leading '+', strtod-style inputs use it.
  if (!tok.empty() && tok.front() == '+') tok.remove_prefix(1);
  const auto* end = tok.data() + tok.size();
  auto [ptr, ec] = std::from_chars(tok.data(), end, out);
  if (ec == std::errc::result_out_of_range) {
    out = std::numeric_limits<double>::infinity();
    return ptr == end;
  }
  return ec == std::errc() && ptr == end;
}

struct Element {
  std::string name;
  std::size_t count = 0;
  std::vector<std::string> properties;
  bool has_list = false;
};

}  // namespace ply_detail

/// Reads an ASCII PLY file. Only the x, y and z properties of the vertex
/// element are kept; other properties and elements are skipped.
inline PointCloud load_ply(const std::string& path) {
  using namespace ply_detail;
  std::ifstream in(path);
  if (!in) throw PlyError(PlyErrc::kOpenFailed, "cannot open " + path);

  std::string line;
  if (!std::getline(in, line) || split_ws(line) != std::vector<std::string_view>{"ply"}) {
    throw PlyError(PlyErrc::kMalformedHeader, "malformed header: missing 'ply' magic in " + path);
  }

  std::vector<Element> elements;
  bool format_seen = false, end_seen = false;
  while (std::getline(in, line)) {
    const auto tok = split_ws(line);
    if (tok.empty()) continue;
    if (tok[0] == "comment" || tok[0] == "obj_info") continue;
    if (tok[0] == "end_header") {
      end_seen = true;
      break;
    }
    if (tok[0] == "format") {
      if (tok.size() != 3) throw PlyError(PlyErrc::kMalformedHeader, "malformed header: bad format line");
      if (tok[1] != "ascii") {
        throw PlyError(PlyErrc::kUnsupportedFormat, "unsupported PLY format '" + std::string(tok[1]) + "'");
      }
      format_seen = true;
    } else if (tok[0] == "element") {
      std::size_t count = 0;
      if (tok.size() != 3 ||
          std::from_chars(tok[2].data(), tok[2].data() + tok[2].size(), count).ec != std::errc()) {
        throw PlyError(PlyErrc::kMalformedHeader, "malformed header: bad element line '" + line + "'");
      }
      elements.push_back({std::string(tok[1]), count, {}, false});
    } else if (tok[0] == "property") {
      if (elements.empty() || tok.size() < 3) {
        throw PlyError(PlyErrc::kMalformedHeader, "malformed header: bad property line '" + line + "'");
      }
      if (tok[1] == "list") {
        if (tok.size() != 5) throw PlyError(PlyErrc::kMalformedHeader, "malformed header: bad list property");
        elements.back().has_list = true;
        elements.back().properties.emplace_back(tok[4]);
      } else {
        if (tok.size() != 3) throw PlyError(PlyErrc::kMalformedHeader, "malformed header: bad property line");
        elements.back().properties.emplace_back(tok[2]);
      }
    } else {
      throw PlyError(PlyErrc::kMalformedHeader, "malformed header: unknown keyword '" + std::string(tok[0]) + "'");
    }
  }
  if (!end_seen) throw PlyError(PlyErrc::kMalformedHeader, "malformed header: missing end_header");
  if (!format_seen) throw PlyError(PlyErrc::kMalformedHeader, "malformed header: missing format line");

  PointCloud cloud;
  bool vertex_seen = false;
  for (const auto& el : elements) {
    if (el.name != "vertex") {
      // Skip rows of elements we do not use.
      for (std::size_t r = 0; r < el.count; ++r) {
        if (!std::getline(in, line)) {
          throw PlyError(PlyErrc::kVertexCountMismatch, "unexpected end of file in element '" + el.name + "'");
        }
      }
      continue;
    }
    vertex_seen = true;
    if (el.has_list) throw PlyError(PlyErrc::kMalformedHeader, "malformed header: list property on vertex");
    int col[3] = {-1, -1, -1};
    for (std::size_t p = 0; p < el.properties.size(); ++p) {
      if (el.properties[p] == "x") col[0] = static_cast<int>(p);
      if (el.properties[p] == "y") col[1] = static_cast<int>(p);
      if (el.properties[p] == "z") col[2] = static_cast<int>(p);
    }
    if (col[0] < 0 || col[1] < 0 || col[2] < 0) {
      throw PlyError(PlyErrc::kMalformedHeader, "malformed header: vertex lacks x, y, z properties");
    }
    if (el.count == 0) throw PlyError(PlyErrc::kZeroVertices, "zero vertices in " + path);
    cloud.points.reserve(el.count);
    std::size_t rows = 0;
    while (rows < el.count && std::getline(in, line)) {
      const auto tok = split_ws(line);
      if (tok.empty()) continue;
      if (tok.size() != el.properties.size()) {
        throw PlyError(PlyErrc::kBadValue, "vertex row " + std::to_string(rows) + " has " +
                                               std::to_string(tok.size()) + " values, expected " +
                                               std::to_string(el.properties.size()));
      }
      Vec3 p;
      for (int a = 0; a < 3; ++a) {
        double v = 0.0;
        const auto t = tok[static_cast<std::size_t>(col[a])];
        if (!parse_double(t, v)) {
          // from_chars accepts "nan"/"inf" as values, so failures here are junk.
          throw PlyError(PlyErrc::kBadValue, "unparseable value '" + std::string(t) + "' in vertex row " +
                                                 std::to_string(rows));
        }
        if (!std::isfinite(v)) {
          throw PlyError(PlyErrc::kNonFiniteCoordinate,
                         "non-finite coordinate in vertex row " + std::to_string(rows));
        }
        p[a] = v;
      }
      cloud.points.push_back(p);
      ++rows;
    }
    if (rows != el.count) {
      throw PlyError(PlyErrc::kVertexCountMismatch, "vertex count mismatch: header declares " +
                                                        std::to_string(el.count) + ", file contains " +
                                                        std::to_string(rows));
    }
  }
  if (!vertex_seen) throw PlyError(PlyErrc::kZeroVertices, "zero vertices: no vertex element in " + path);
  // Stray non-blank rows after the declared elements mean the count was wrong.
  while (std::getline(in, line)) {
    if (!split_ws(line).empty()) {
      throw PlyError(PlyErrc::kVertexCountMismatch, "vertex count mismatch: data beyond declared elements");
    }
  }
  return cloud;
}

/// Writes x, y, z only. Values use 17 significant digits, so a reload is
/// bit-exact.
inline void save_ply(const PointCloud& cloud, const std::string& path) {
  if (cloud.empty()) throw DataError("save_ply: empty point cloud");
  std::ofstream out(path);
  if (!out) throw PlyError(PlyErrc::kWriteFailed, "cannot open " + path + " for writing");
  out << "ply\nformat ascii 1.0\nelement vertex " << cloud.size()
      << "\nproperty float x\nproperty float y\nproperty float z\nend_header\n";
  out << std::setprecision(std::numeric_limits<double>::max_digits10);
  for (const auto& p : cloud.points) out << p.x() << ' ' << p.y() << ' ' << p.z() << '\n';
  out.flush();
  if (!out) throw PlyError(PlyErrc::kWriteFailed, "write failed: " + path);
}

}  // namespace crossreg
