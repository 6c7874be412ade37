#include "doctest.h"

#include "qpath/io.hpp"

#include <Eigen/Dense>

#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

using namespace qpath;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() : path(fs::temp_directory_path() / "qpath_io_test") {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string file(const std::string& name) const { return (path / name).string(); }
};

}  // namespace

TEST_CASE("fnv1a matches the reference vectors") {
  CHECK(io::fnv1a("", 0) == 14695981039346656037ull);
  CHECK(io::fnv1a("a", 1) == 0xaf63dc4c8601ec8cull);
  CHECK(io::fnv1a("foobar", 6) == 0x85944171f73967e8ull);
  CHECK(io::hex64(io::fnv1a("", 0)) == "cbf29ce484222325");

  // chunked feeding matches one-shot hashing
  const std::string text = "qpath checksum probe";
  std::uint64_t h = 14695981039346656037ull;
  h = io::fnv1a(text.data(), 7, h);
  h = io::fnv1a(text.data() + 7, text.size() - 7, h);
  CHECK(h == io::fnv1a(text.data(), text.size()));
}

TEST_CASE("csv round-trips bitwise") {
  TempDir tmp;
  const std::vector<std::string> cols{"t", "x", "p"};
  const std::vector<std::vector<double>> rows{
      {0.0, -4.1833001327, 0.0},
      {1e-3, 3.141592653589793, -2.2250738585072014e-308},
      {2e-3, -0.1, 12345678901234.5},
  };
  const std::string path = tmp.file("table.csv");
  io::write_csv(path, cols, rows);

  io::Csv back = io::read_csv(path);
  CHECK(back.columns == cols);
  REQUIRE(back.rows.size() == rows.size());
  for (std::size_t r = 0; r < rows.size(); ++r)
    for (std::size_t c = 0; c < cols.size(); ++c) CHECK(back.rows[r][c] == rows[r][c]);

  CHECK_THROWS_AS(io::write_csv(tmp.file("bad.csv"), cols, {{1.0}}), std::invalid_argument);
  CHECK_THROWS_AS(io::read_csv(tmp.file("absent.csv")), std::runtime_error);

  // identical content, identical checksum; any edit shows up
  io::write_csv(tmp.file("a.csv"), cols, rows);
  io::write_csv(tmp.file("b.csv"), cols, rows);
  CHECK(io::file_checksum(tmp.file("a.csv")) == io::file_checksum(tmp.file("b.csv")));
  auto bumped = rows;
  bumped[1][1] += 1e-9;
  io::write_csv(tmp.file("c.csv"), cols, bumped);
  CHECK(io::file_checksum(tmp.file("c.csv")) != io::file_checksum(tmp.file("a.csv")));
}

TEST_CASE("field dumps carry headers and exact payloads") {
  TempDir tmp;
  Eigen::MatrixXd m(7, 5);
  for (int i = 0; i < m.rows(); ++i)
    for (int j = 0; j < m.cols(); ++j) m(i, j) = std::sin(0.7 * i) * std::exp(0.1 * j - 2.0);

  const std::string path = tmp.file("field.bin");
  io::write_field(path, {{"grid", "x -6 6 p -6 6"}, {"normalization", "unit-mass"}}, m);
  io::Field back = io::read_field(path);
  CHECK(back.header.at("grid") == "x -6 6 p -6 6");
  CHECK(back.header.at("normalization") == "unit-mass");
  REQUIRE(back.values.rows() == 7);
  REQUIRE(back.values.cols() == 5);
  CHECK((back.values.array() == m.array()).all());

  CHECK_THROWS_AS(io::write_field(tmp.file("x.bin"), {{"rows", "3"}}, m), std::invalid_argument);
  CHECK_THROWS_AS(io::write_field(tmp.file("y.bin"), {{"two words", "v"}}, m),
                  std::invalid_argument);

  // truncation is detected
  fs::resize_file(path, fs::file_size(path) - 8);
  CHECK_THROWS_AS(io::read_field(path), std::runtime_error);

  {
    std::ofstream out(tmp.file("junk.bin"), std::ios::binary);
    out << "not a field\n";
  }
  CHECK_THROWS_AS(io::read_field(tmp.file("junk.bin")), std::runtime_error);
}

TEST_CASE("manifests list every artifact with its checksum") {
  TempDir tmp;
  io::RunManifest m;
  m.subcommand = "tis";
  m.config_hash = 0x123456789abcdef0ull;
  m.wall_clock = io::utc_timestamp();
  m.artifacts = {{"rate.csv", 0xdeadbeefull}, {"flux.csv", 0x1ull}};

  REQUIRE(m.wall_clock.size() == 20);
  CHECK(m.wall_clock[10] == 'T');
  CHECK(m.wall_clock.back() == 'Z');

  const std::string path = tmp.file("manifest.txt");
  io::write_manifest(path, m);
  io::RunManifest back = io::read_manifest(path);
  CHECK(back.subcommand == "tis");
  CHECK(back.config_hash == m.config_hash);
  CHECK(back.code_version == std::string(io::kCodeVersion));
  CHECK(back.wall_clock == m.wall_clock);
  REQUIRE(back.artifacts.size() == 2);
  CHECK(back.artifacts[0].first == "rate.csv");
  CHECK(back.artifacts[0].second == 0xdeadbeefull);
  CHECK(back.artifacts[1].first == "flux.csv");
  CHECK(back.artifacts[1].second == 0x1ull);
}

TEST_CASE("rng engines survive serialization") {
  rng::Engine eng = rng::make_stream(99, 3, "ckpt");
  for (int i = 0; i < 57; ++i) rng::normal(eng);
  const std::string state = io::serialize_engine(eng);
  rng::Engine twin = io::deserialize_engine(state);
  for (int i = 0; i < 100; ++i) CHECK(rng::normal(eng) == rng::normal(twin));
  CHECK_THROWS_AS(io::deserialize_engine("not numbers"), std::runtime_error);
}

TEST_CASE("checkpoints restore the exact sampler state") {
  TempDir tmp;

  SUBCASE("classical path") {
    io::ChainCheckpoint ckpt;
    ckpt.kind = "classical";
    ckpt.config_hash = 0xfeedfacecafebeefull;
    ckpt.moves_done = 1234;
    ckpt.accepted = 567;
    ckpt.dt = 1e-3;
    rng::Engine eng = rng::make_stream(7, 0, "chain");
    for (int i = 0; i < 321; ++i) rng::uniform(eng);
    ckpt.rng_state = io::serialize_engine(eng);
    std::vector<ClassicalState> path;
    for (int i = 0; i < 40; ++i) {
      path.push_back({-4.0 + 0.2 * i, std::sin(1.3 * i)});
      ckpt.slices.push_back(io::pack_slice(path.back()));
    }

    const std::string file = tmp.file("chain.ckpt");
    io::write_checkpoint(file, ckpt);
    io::ChainCheckpoint back = io::read_checkpoint(file);
    CHECK(back.kind == "classical");
    CHECK(back.config_hash == ckpt.config_hash);
    CHECK(back.moves_done == 1234);
    CHECK(back.accepted == 567);
    CHECK(back.dt == 1e-3);
    REQUIRE(back.slices.size() == 40);
    for (int i = 0; i < 40; ++i) {
      ClassicalState s = io::unpack_classical(back.slices[i]);
      CHECK(s.x == path[i].x);
      CHECK(s.p == path[i].p);
    }
    rng::Engine resumed = io::deserialize_engine(back.rng_state);
    CHECK(rng::uniform(resumed) == rng::uniform(eng));
  }

  SUBCASE("quantum path") {
    io::ChainCheckpoint ckpt;
    ckpt.kind = "quantum";
    ckpt.dt = 2e-3;
    ckpt.rng_state = io::serialize_engine(rng::make_stream(1, 1, "q"));
    QuantumState psi(6);
    for (int n = 0; n < 6; ++n) psi(n) = std::complex<double>(0.1 * n, -0.3 + 0.05 * n);
    ckpt.slices = {io::pack_slice(psi), io::pack_slice(psi)};

    const std::string file = tmp.file("qchain.ckpt");
    io::write_checkpoint(file, ckpt);
    io::ChainCheckpoint back = io::read_checkpoint(file);
    REQUIRE(back.slices.size() == 2);
    QuantumState again = io::unpack_quantum(back.slices[1]);
    REQUIRE(again.size() == 6);
    for (int n = 0; n < 6; ++n) CHECK(again(n) == psi(n));
  }

  SUBCASE("shape errors") {
    io::ChainCheckpoint empty;
    empty.kind = "classical";
    CHECK_THROWS_AS(io::write_checkpoint(tmp.file("e.ckpt"), empty), std::invalid_argument);

    io::ChainCheckpoint ragged;
    ragged.kind = "classical";
    ragged.rng_state = io::serialize_engine(rng::make_stream(1, 0, ""));
    ragged.slices = {Eigen::VectorXd::Zero(2), Eigen::VectorXd::Zero(3)};
    CHECK_THROWS_AS(io::write_checkpoint(tmp.file("r.ckpt"), ragged), std::invalid_argument);

    CHECK_THROWS_AS(io::unpack_classical(Eigen::VectorXd::Zero(3)), std::invalid_argument);
    CHECK_THROWS_AS(io::unpack_quantum(Eigen::VectorXd::Zero(5)), std::invalid_argument);
  }
}
