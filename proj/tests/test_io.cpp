#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <random>
#include <sstream>
#include <string>

#include "pcup/io.hpp"

using namespace pcup;

namespace {

Points random_cloud(Index n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Points c(n, 3);
  for (Index i = 0; i < n; ++i)
    for (int k = 0; k < 3; ++k) c(i, k) = u(rng);
  return c;
}

long parse_error_line(const std::function<void()>& action) {
  try {
    action();
  } catch (const ParseError& e) {
    return e.line;
  }
  return -1;  // no ParseError raised
}

std::filesystem::path scratch_dir() {
  const auto dir = std::filesystem::temp_directory_path() / "pcup_io_tests";
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace

TEST_CASE("xyz reading parses points and skips comments and blanks") {
  std::istringstream in("# header\n\n0 0 0\n  1 0 0 \n# trailing comment\n-0.5 2.25 1e-3\n");
  const Points cloud = read_xyz(in);
  REQUIRE(cloud.rows() == 3);
  CHECK(cloud(0, 0) == 0.0);
  CHECK(cloud(1, 0) == 1.0);
  CHECK(cloud(2, 0) == -0.5);
  CHECK(cloud(2, 1) == 2.25);
  CHECK(cloud(2, 2) == 1e-3);
}

TEST_CASE("xyz reading reports the offending line") {
  CHECK(parse_error_line([] {
          std::istringstream in("0 0\n");
          read_xyz(in);
        }) == 1);
  CHECK(parse_error_line([] {
          std::istringstream in("0 0 0\n1 2 3 4\n");
          read_xyz(in);
        }) == 2);
  CHECK(parse_error_line([] {
          std::istringstream in("# comment\n\nnot numbers\n");
          read_xyz(in);
        }) == 3);
}

TEST_CASE("xyz reading rejects empty and non-finite input") {
  std::istringstream empty("# only a comment\n");
  CHECK_THROWS_AS(read_xyz(empty), DataError);
  std::istringstream nothing("");
  CHECK_THROWS_AS(read_xyz(nothing), DataError);
  std::istringstream nan_point("nan 0 0\n");
  CHECK_THROWS_AS(read_xyz(nan_point), DataError);
}

TEST_CASE("xyz writing produces one plain line per point") {
  Points cloud(2, 3);
  cloud << 0, 0, 0, 1.5, -2.25, 3;
  std::ostringstream out;
  write_xyz(cloud, out);
  CHECK(out.str() == "0 0 0\n1.5 -2.25 3\n");
}

TEST_CASE("xyz writing refuses empty or non-finite clouds") {
  std::ostringstream out;
  CHECK_THROWS_AS(write_xyz(Points(0, 3), out), std::invalid_argument);
  Points bad = random_cloud(3, 1);
  bad(0, 1) = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(write_xyz(bad, out), DataError);
}

TEST_CASE("xyz round-trip preserves coordinates to nine digits") {
  const Points cloud = random_cloud(40, 5);
  std::ostringstream out;
  write_xyz(cloud, out);
  std::ostringstream again;
  write_xyz(cloud, again);
  CHECK(out.str() == again.str());  // byte-stable output

  std::istringstream in(out.str());
  const Points back = read_xyz(in);
  REQUIRE(back.rows() == cloud.rows());
  CHECK((back - cloud).cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("xyz file round-trip goes through the path overloads") {
  const auto path = (scratch_dir() / "cloud.xyz").string();
  const Points cloud = random_cloud(12, 6);
  write_xyz(cloud, path);
  const Points back = read_xyz(path);
  CHECK((back - cloud).cwiseAbs().maxCoeff() < 1e-9);
  CHECK_THROWS_AS(read_xyz((scratch_dir() / "missing.xyz").string()), IoError);
}

TEST_CASE("off reading parses a minimal triangle mesh") {
  std::istringstream in("OFF\n# a comment\n3 1 0\n0 0 0\n1 0 0\n0 1 0\n3 0 1 2\n");
  const ReferenceMesh mesh = read_off(in);
  REQUIRE(mesh.vertices.rows() == 3);
  REQUIRE(mesh.triangles.rows() == 1);
  CHECK(mesh.vertices(1, 0) == 1.0);
  CHECK(mesh.triangles(0, 0) == 0);
  CHECK(mesh.triangles(0, 1) == 1);
  CHECK(mesh.triangles(0, 2) == 2);
}

TEST_CASE("off reading accepts the optional edge count") {
  std::istringstream in("OFF\n3 1 3\n0 0 0\n1 0 0\n0 1 0\n3 0 2 1\n");
  const ReferenceMesh mesh = read_off(in);
  CHECK(mesh.triangles(0, 1) == 2);
}

TEST_CASE("off reading rejects non-triangle faces as unsupported data") {
  std::istringstream in("OFF\n4 1 0\n0 0 0\n1 0 0\n1 1 0\n0 1 0\n4 0 1 2 3\n");
  bool unsupported = false;
  try {
    read_off(in);
  } catch (const ParseError&) {
    // a quad is well-formed text, so it must not be reported as a parse error
  } catch (const DataError&) {
    unsupported = true;
  }
  CHECK(unsupported);
}

TEST_CASE("off reading reports malformed content with line numbers") {
  CHECK(parse_error_line([] {
          std::istringstream in("3 1 0\n0 0 0\n1 0 0\n0 1 0\n3 0 1 2\n");
          read_off(in);  // missing header
        }) == 1);
  CHECK(parse_error_line([] {
          std::istringstream in("OFF\nnot counts\n");
          read_off(in);
        }) == 2);
  CHECK(parse_error_line([] {
          std::istringstream in("OFF\n3 1 0\n0 0 0\n1 0 0\n");
          read_off(in);  // truncated vertex list
        }) == 4);
  CHECK(parse_error_line([] {
          std::istringstream in("OFF\n3 1 0\n0 0 0\n1 0 0\n0 1 0\n3 0 1 3\n");
          read_off(in);  // index out of range
        }) == 6);
  CHECK(parse_error_line([] {
          std::istringstream in("OFF\n3 1 0\n0 0 0\n1 0 0\n0 1 0\n3 0 1 1\n");
          read_off(in);  // repeated vertex
        }) == 6);
}

TEST_CASE("pgm writing emits exact ascii output") {
  SilhouetteImage image;
  image.pixels.resize(2, 3);
  image.pixels << 0.0, 0.5, 1.0, 0.25, -0.5, 2.0;  // out-of-range values clamp
  std::ostringstream out;
  write_pgm(image, out, PgmFormat::Ascii);
  CHECK(out.str() == "P2\n3 2\n255\n0 128 255\n64 0 255\n");
}

TEST_CASE("pgm writing emits exact binary output") {
  SilhouetteImage image;
  image.pixels.resize(2, 3);
  image.pixels << 0.0, 0.5, 1.0, 0.25, -0.5, 2.0;
  std::ostringstream out;
  write_pgm(image, out, PgmFormat::Binary);
  const std::string header = "P5\n3 2\n255\n";
  const unsigned char levels[6] = {0, 128, 255, 64, 0, 255};
  REQUIRE(out.str().size() == header.size() + 6);
  CHECK(out.str().substr(0, header.size()) == header);
  for (int i = 0; i < 6; ++i)
    CHECK(static_cast<unsigned char>(out.str()[header.size() + i]) == levels[i]);
}

TEST_CASE("pgm writing refuses an empty image") {
  SilhouetteImage image;
  image.pixels.resize(0, 0);
  std::ostringstream out;
  CHECK_THROWS_AS(write_pgm(image, out), std::invalid_argument);
}

TEST_CASE("config parsing trims keys and values and skips noise") {
  std::istringstream in("  key = some value \n# note\n\nother=1\npath = a=b\nempty=\n");
  const auto config = parse_config(in);
  REQUIRE(config.size() == 4);
  CHECK(config.at("key") == "some value");
  CHECK(config.at("other") == "1");
  CHECK(config.at("path") == "a=b");  // only the first '=' splits
  CHECK(config.at("empty").empty());
}

TEST_CASE("config parsing reports bad lines") {
  CHECK(parse_error_line([] {
          std::istringstream in("ok=1\nno separator\n");
          parse_config(in);
        }) == 2);
  CHECK(parse_error_line([] {
          std::istringstream in("=value\n");
          parse_config(in);
        }) == 1);
}

TEST_CASE("trace serialization is exact csv") {
  OptimTrace trace;
  LossReport first;
  first.sc = 1.0;
  first.ic = 2.0;
  first.hd = 3.0;
  first.un = 4.0;
  first.joint = 10.0;
  LossReport second;
  second.sc = 0.5;
  second.joint = 0.5;
  trace.reports = {first, second};
  trace.millis = {5.5};  // second timing missing on purpose
  CHECK(trace_csv(trace) ==
        "iteration,sc,ic,hd,un,joint,millis\n"
        "0,1,2,3,4,10,5.5\n"
        "1,0.5,0,0,0,0.5,0\n");

  const auto path = (scratch_dir() / "trace.csv").string();
  write_trace_csv(trace, path);
  std::ifstream back(path);
  std::stringstream contents;
  contents << back.rdbuf();
  CHECK(contents.str() == trace_csv(trace));
}

TEST_CASE("empty trace serializes to just the header") {
  CHECK(trace_csv(OptimTrace{}) == "iteration,sc,ic,hd,un,joint,millis\n");
}
