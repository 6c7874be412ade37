#pragma once

#include "qpath/dynamics.hpp"
#include "qpath/rng.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

// Artifact plumbing: CSV tables, binary matrix dumps with structured-text
// headers, FNV-1a checksums, run manifests, and resumable chain checkpoints.

namespace qpath::io {

inline constexpr const char* kCodeVersion = "0.1.0";

// ------------------------------- checksums --------------------------------

std::uint64_t fnv1a(const void* data, std::size_t n,
                    std::uint64_t h = 14695981039346656037ull);
std::uint64_t file_checksum(const std::string& path);  // throws if unreadable
std::string hex64(std::uint64_t v);

// ---------------------------------- CSV ------------------------------------

struct Csv {
  std::vector<std::string> columns;
  std::vector<std::vector<double>> rows;
};

// Numeric table with a header row; cells are written round-trippably.
void write_csv(const std::string& path, const std::vector<std::string>& columns,
               const std::vector<std::vector<double>>& rows);
Csv read_csv(const std::string& path);

// Mixed tables (tag columns next to numbers) are written pre-formatted.
void write_csv_text(const std::string& path, const std::vector<std::string>& columns,
                    const std::vector<std::vector<std::string>>& rows);

// Shortest decimal form that parses back to the same double.
std::string format_number(double v);

// ------------------------------ field dumps --------------------------------

// Binary column-major float64 payload preceded by a text header of key value
// lines; rows/cols are stored by the writer and authoritative on read.
void write_field(const std::string& path, const std::map<std::string, std::string>& header,
                 const Eigen::MatrixXd& values);

struct Field {
  std::map<std::string, std::string> header;
  Eigen::MatrixXd values;
};
Field read_field(const std::string& path);

// -------------------------------- manifests --------------------------------

struct RunManifest {
  std::string subcommand;
  std::uint64_t config_hash{0};
  std::string code_version{kCodeVersion};
  std::string wall_clock;  // ISO 8601 UTC
  std::vector<std::pair<std::string, std::uint64_t>> artifacts;  // name, checksum
};

std::string utc_timestamp();
void write_manifest(const std::string& path, const RunManifest& manifest);
RunManifest read_manifest(const std::string& path);

// ------------------------------- checkpoints -------------------------------

// Resumable sampler state: counters and the serialized RNG engine in the
// header, the current path as the binary payload. Classical slices store
// (x, p); quantum slices store interleaved re/im amplitudes.
struct ChainCheckpoint {
  std::string kind;  // "classical" | "quantum"
  std::uint64_t config_hash{0};
  long moves_done{0};
  long accepted{0};
  std::string rng_state;
  double dt{0.0};
  std::vector<Eigen::VectorXd> slices;  // flattened per-slice payload
};

void write_checkpoint(const std::string& path, const ChainCheckpoint& ckpt);
ChainCheckpoint read_checkpoint(const std::string& path);

std::string serialize_engine(const rng::Engine& eng);
rng::Engine deserialize_engine(const std::string& text);

// Flattening helpers for the payload.
Eigen::VectorXd pack_slice(const ClassicalState& s);
Eigen::VectorXd pack_slice(const QuantumState& psi);
ClassicalState unpack_classical(const Eigen::VectorXd& v);
QuantumState unpack_quantum(const Eigen::VectorXd& v);

}  // namespace qpath::io
