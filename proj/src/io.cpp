#include "pcup/io.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <vector>

namespace pcup {

namespace {

std::string trim(const std::string& s) {
  const auto begin = s.find_first_not_of(" \t\r\n");
  if (begin == std::string::npos) return "";
  const auto end = s.find_last_not_of(" \t\r\n");
  return s.substr(begin, end - begin + 1);
}

bool skippable(const std::string& line) { return line.empty() || line.front() == '#'; }

std::ifstream open_input(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open for reading: " + path);
  return in;
}

std::ofstream open_output(const std::string& path, std::ios::openmode mode = std::ios::out) {
  std::ofstream out(path, mode);
  if (!out) throw IoError("cannot open for writing: " + path);
  return out;
}

std::string format_value(double v) {
  char buffer[32];
  std::snprintf(buffer, sizeof(buffer), "%.9g", v);
  return buffer;
}

}  // namespace

Points read_xyz(std::istream& in) {
  std::vector<Vec3> points;
  std::string line;
  long line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string body = trim(line);
    if (skippable(body)) continue;
    std::istringstream fields(body);
    Vec3 p;
    std::string extra;
    if (!(fields >> p.x() >> p.y() >> p.z()))
      throw ParseError("xyz: expected three coordinates", line_no);
    if (fields >> extra) throw ParseError("xyz: trailing fields after the coordinates", line_no);
    points.push_back(p);
  }
  if (points.empty()) throw DataError("xyz: no points in input");
  Points cloud(static_cast<Index>(points.size()), 3);
  for (Index i = 0; i < cloud.rows(); ++i) cloud.row(i) = points[i].transpose();
  require_finite(cloud, "xyz input");
  return cloud;
}

Points read_xyz(const std::string& path) {
  auto in = open_input(path);
  return read_xyz(in);
}

void write_xyz(const Points& cloud, std::ostream& out) {
  require(cloud.rows() >= 1, "write_xyz: refusing to write an empty cloud");
  require_finite(cloud, "write_xyz cloud");
  for (Index i = 0; i < cloud.rows(); ++i)
    out << format_value(cloud(i, 0)) << ' ' << format_value(cloud(i, 1)) << ' '
        << format_value(cloud(i, 2)) << '\n';
  if (!out) throw IoError("write_xyz: stream write failed");
}

void write_xyz(const Points& cloud, const std::string& path) {
  require(cloud.rows() >= 1, "write_xyz: refusing to write an empty cloud");
  auto out = open_output(path);
  write_xyz(cloud, out);
  if (!out) throw IoError("write_xyz: write failed: " + path);
}

namespace {

// Next content line of an OFF file, skipping blanks and comments.
bool next_off_line(std::istream& in, std::string& body, long& line_no) {
  std::string line;
  while (std::getline(in, line)) {
    ++line_no;
    body = trim(line);
    if (!skippable(body)) return true;
  }
  return false;
}

}  // namespace

ReferenceMesh read_off(std::istream& in) {
  std::string body;
  long line_no = 0;
  if (!next_off_line(in, body, line_no) || body != "OFF")
    throw ParseError("off: missing OFF header", line_no);

  if (!next_off_line(in, body, line_no)) throw ParseError("off: missing counts line", line_no);
  std::istringstream counts(body);
  long vertex_count = 0;
  long face_count = 0;
  long edge_count = 0;  // present in the common form of the format, unused
  if (!(counts >> vertex_count >> face_count) || vertex_count < 0 || face_count < 0)
    throw ParseError("off: malformed counts line", line_no);
  counts >> edge_count;

  ReferenceMesh mesh;
  mesh.vertices.resize(vertex_count, 3);
  for (long v = 0; v < vertex_count; ++v) {
    if (!next_off_line(in, body, line_no)) throw ParseError("off: truncated vertex list", line_no);
    std::istringstream fields(body);
    if (!(fields >> mesh.vertices(v, 0) >> mesh.vertices(v, 1) >> mesh.vertices(v, 2)))
      throw ParseError("off: malformed vertex", line_no);
  }
  require_finite(mesh.vertices, "off vertices");

  mesh.triangles.resize(face_count, 3);
  for (long f = 0; f < face_count; ++f) {
    if (!next_off_line(in, body, line_no)) throw ParseError("off: truncated face list", line_no);
    std::istringstream fields(body);
    long arity = 0;
    if (!(fields >> arity)) throw ParseError("off: malformed face", line_no);
    if (arity != 3)
      throw DataError("off: unsupported face with " + std::to_string(arity) +
                      " vertices (line " + std::to_string(line_no) + "), only triangles");
    long i = 0, j = 0, k = 0;
    if (!(fields >> i >> j >> k)) throw ParseError("off: malformed face", line_no);
    if (i < 0 || i >= vertex_count || j < 0 || j >= vertex_count || k < 0 || k >= vertex_count)
      throw ParseError("off: face index out of range", line_no);
    if (i == j || j == k || i == k)
      throw ParseError("off: face repeats a vertex", line_no);
    mesh.triangles.row(f) << i, j, k;
  }
  return mesh;
}

ReferenceMesh read_off(const std::string& path) {
  auto in = open_input(path);
  return read_off(in);
}

void write_pgm(const SilhouetteImage& image, std::ostream& out, PgmFormat format) {
  require(image.pixels.size() > 0, "pgm: empty image");
  const int w = image.width();
  const int h = image.height();
  out << (format == PgmFormat::Binary ? "P5" : "P2") << '\n' << w << ' ' << h << "\n255\n";
  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < w; ++c) {
      const double v = std::clamp(image.pixels(r, c), 0.0, 1.0);
      const int level = static_cast<int>(std::lround(v * 255.0));
      if (format == PgmFormat::Binary) {
        out.put(static_cast<char>(level));
      } else {
        out << level << (c + 1 < w ? ' ' : '\n');
      }
    }
  }
  if (!out) throw IoError("pgm: stream write failed");
}

void write_pgm(const SilhouetteImage& image, const std::string& path, PgmFormat format) {
  auto out = open_output(path, format == PgmFormat::Binary
                                   ? std::ios::out | std::ios::binary
                                   : std::ios::out);
  write_pgm(image, out, format);
  if (!out) throw IoError("pgm: write failed: " + path);
}

std::map<std::string, std::string> parse_config(std::istream& in) {
  std::map<std::string, std::string> config;
  std::string line;
  long line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string body = trim(line);
    if (skippable(body)) continue;
    const auto eq = body.find('=');
    if (eq == std::string::npos) throw ParseError("config: expected key=value", line_no);
    const std::string key = trim(body.substr(0, eq));
    if (key.empty()) throw ParseError("config: empty key", line_no);
    config[key] = trim(body.substr(eq + 1));
  }
  return config;
}

std::map<std::string, std::string> read_config(const std::string& path) {
  auto in = open_input(path);
  return parse_config(in);
}

std::string trace_csv(const OptimTrace& trace) {
  std::string out = "iteration,sc,ic,hd,un,joint,millis\n";
  for (std::size_t i = 0; i < trace.reports.size(); ++i) {
    const LossReport& r = trace.reports[i];
    out += std::to_string(i) + "," + format_value(r.sc) + "," + format_value(r.ic) + "," +
           format_value(r.hd) + "," + format_value(r.un) + "," + format_value(r.joint) + "," +
           format_value(i < trace.millis.size() ? trace.millis[i] : 0.0) + "\n";
  }
  return out;
}

void write_trace_csv(const OptimTrace& trace, const std::string& path) {
  auto out = open_output(path);
  out << trace_csv(trace);
  if (!out) throw IoError("trace: write failed: " + path);
}

}  // namespace pcup
