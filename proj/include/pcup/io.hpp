#pragma once

#include <iosfwd>
#include <map>
#include <string>

#include "pcup/mesh.hpp"
#include "pcup/optim.hpp"
#include "pcup/raster.hpp"
#include "pcup/types.hpp"

namespace pcup {

/// Parses ASCII "x y z" lines; blank lines and lines starting with '#' are
/// skipped, order is preserved. Throws ParseError with the line number on a
/// malformed line, DataError on an empty cloud or non-finite coordinates.
Points read_xyz(std::istream& in);
Points read_xyz(const std::string& path);

/// One point per line at 9 significant digits, so a read-back round-trip
/// agrees within 1e-9 per coordinate. Refuses an empty cloud.
void write_xyz(const Points& cloud, std::ostream& out);
void write_xyz(const Points& cloud, const std::string& path);

/// Reads an OFF mesh: "OFF" header, counts line, vertex lines, then triangle
/// faces "3 i j k". Non-triangle faces raise DataError; malformed lines and
/// out-of-range indices raise ParseError with the line number.
ReferenceMesh read_off(std::istream& in);
ReferenceMesh read_off(const std::string& path);

enum class PgmFormat { Ascii, Binary };  // P2 and P5 respectively

/// Writes a silhouette as an 8-bit PGM, mapping [0,1] to 0..255.
void write_pgm(const SilhouetteImage& image, std::ostream& out,
               PgmFormat format = PgmFormat::Binary);
void write_pgm(const SilhouetteImage& image, const std::string& path,
               PgmFormat format = PgmFormat::Binary);

/// Flat "key=value" config: blank lines and '#' comments are skipped, keys and
/// values are trimmed. A line without '=' raises ParseError with its number.
std::map<std::string, std::string> parse_config(std::istream& in);
std::map<std::string, std::string> read_config(const std::string& path);

/// Optimization trace as CSV with the header
/// "iteration,sc,ic,hd,un,joint,millis".
std::string trace_csv(const OptimTrace& trace);
void write_trace_csv(const OptimTrace& trace, const std::string& path);

}  // namespace pcup
