#include "qpath/io.hpp"

#include <chrono>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <stdexcept>

namespace qpath::io {

namespace {

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("io: cannot write '" + path + "'");
  return out;
}

std::ifstream open_in(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("io: cannot read '" + path + "'");
  return in;
}

// shortest decimal form that parses back to the same double
std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  double back = 0.0;
  std::sscanf(buf, "%lg", &back);
  if (back == v) {
    for (int prec = 1; prec < 17; ++prec) {
      char tight[32];
      std::snprintf(tight, sizeof tight, "%.*g", prec, v);
      std::sscanf(tight, "%lg", &back);
      if (back == v) return tight;
    }
  }
  return buf;
}

}  // namespace

std::uint64_t fnv1a(const void* data, std::size_t n, std::uint64_t h) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= 1099511628211ull;
  }
  return h;
}

std::uint64_t file_checksum(const std::string& path) {
  auto in = open_in(path);
  std::uint64_t h = 14695981039346656037ull;
  char buf[1 << 16];
  while (in.read(buf, sizeof buf) || in.gcount() > 0) h = fnv1a(buf, std::size_t(in.gcount()), h);
  return h;
}

std::string hex64(std::uint64_t v) {
  std::ostringstream out;
  out << std::hex << std::setw(16) << std::setfill('0') << v;
  return out.str();
}

void write_csv(const std::string& path, const std::vector<std::string>& columns,
               const std::vector<std::vector<double>>& rows) {
  auto out = open_out(path);
  for (std::size_t c = 0; c < columns.size(); ++c) out << (c ? "," : "") << columns[c];
  out << "\n";
  for (const auto& row : rows) {
    if (row.size() != columns.size())
      throw std::invalid_argument("write_csv: row width does not match the header");
    for (std::size_t c = 0; c < row.size(); ++c) out << (c ? "," : "") << format_double(row[c]);
    out << "\n";
  }
}

void write_csv_text(const std::string& path, const std::vector<std::string>& columns,
                    const std::vector<std::vector<std::string>>& rows) {
  auto out = open_out(path);
  for (std::size_t c = 0; c < columns.size(); ++c) out << (c ? "," : "") << columns[c];
  out << "\n";
  for (const auto& row : rows) {
    if (row.size() != columns.size())
      throw std::invalid_argument("write_csv_text: row width does not match the header");
    for (std::size_t c = 0; c < row.size(); ++c) out << (c ? "," : "") << row[c];
    out << "\n";
  }
}

std::string format_number(double v) { return format_double(v); }

Csv read_csv(const std::string& path) {
  auto in = open_in(path);
  Csv table;
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("read_csv: empty file '" + path + "'");
  std::stringstream head(line);
  std::string cell;
  while (std::getline(head, cell, ',')) table.columns.push_back(cell);
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::vector<double> row;
    while (std::getline(ss, cell, ',')) row.push_back(std::stod(cell));
    if (row.size() != table.columns.size())
      throw std::runtime_error("read_csv: ragged row in '" + path + "'");
    table.rows.push_back(std::move(row));
  }
  return table;
}

void write_field(const std::string& path, const std::map<std::string, std::string>& header,
                 const Eigen::MatrixXd& values) {
  auto out = open_out(path);
  out << "qpath-field 1\n";
  for (const auto& [k, v] : header) {
    if (k == "rows" || k == "cols" || k.find(' ') != std::string::npos)
      throw std::invalid_argument("write_field: reserved or malformed header key '" + k + "'");
    out << k << " " << v << "\n";
  }
  out << "rows " << values.rows() << "\n";
  out << "cols " << values.cols() << "\n";
  out << "end\n";
  out.write(reinterpret_cast<const char*>(values.data()),
            std::streamsize(sizeof(double) * std::size_t(values.size())));
}

Field read_field(const std::string& path) {
  auto in = open_in(path);
  std::string line;
  if (!std::getline(in, line) || line != "qpath-field 1")
    throw std::runtime_error("read_field: '" + path + "' is not a field dump");
  Field field;
  long rows = -1, cols = -1;
  while (std::getline(in, line)) {
    if (line == "end") break;
    const auto sp = line.find(' ');
    if (sp == std::string::npos)
      throw std::runtime_error("read_field: malformed header line '" + line + "'");
    const std::string key = line.substr(0, sp);
    const std::string value = line.substr(sp + 1);
    if (key == "rows")
      rows = std::stol(value);
    else if (key == "cols")
      cols = std::stol(value);
    else
      field.header[key] = value;
  }
  if (rows < 0 || cols < 0) throw std::runtime_error("read_field: missing dimensions");
  field.values.resize(rows, cols);
  in.read(reinterpret_cast<char*>(field.values.data()),
          std::streamsize(sizeof(double) * std::size_t(field.values.size())));
  if (in.gcount() != std::streamsize(sizeof(double) * std::size_t(field.values.size())))
    throw std::runtime_error("read_field: truncated payload in '" + path + "'");
  return field;
}

std::string utc_timestamp() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  std::ostringstream out;
  out << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  return out.str();
}

void write_manifest(const std::string& path, const RunManifest& manifest) {
  auto out = open_out(path);
  out << "qpath-manifest 1\n";
  out << "subcommand " << manifest.subcommand << "\n";
  out << "config_hash " << hex64(manifest.config_hash) << "\n";
  out << "code_version " << manifest.code_version << "\n";
  out << "wall_clock " << manifest.wall_clock << "\n";
  for (const auto& [name, sum] : manifest.artifacts)
    out << "artifact " << hex64(sum) << " " << name << "\n";
}

RunManifest read_manifest(const std::string& path) {
  auto in = open_in(path);
  std::string line;
  if (!std::getline(in, line) || line != "qpath-manifest 1")
    throw std::runtime_error("read_manifest: '" + path + "' is not a manifest");
  RunManifest m;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string key;
    ss >> key;
    if (key == "subcommand")
      ss >> m.subcommand;
    else if (key == "config_hash") {
      std::string hex;
      ss >> hex;
      m.config_hash = std::stoull(hex, nullptr, 16);
    } else if (key == "code_version")
      ss >> m.code_version;
    else if (key == "wall_clock")
      ss >> m.wall_clock;
    else if (key == "artifact") {
      std::string hex, name;
      ss >> hex >> name;
      m.artifacts.emplace_back(name, std::stoull(hex, nullptr, 16));
    } else
      throw std::runtime_error("read_manifest: unknown record '" + key + "'");
  }
  return m;
}

std::string serialize_engine(const rng::Engine& eng) {
  std::ostringstream out;
  out << eng;
  return out.str();
}

rng::Engine deserialize_engine(const std::string& text) {
  std::istringstream in(text);
  rng::Engine eng;
  in >> eng;
  if (!in) throw std::runtime_error("deserialize_engine: malformed state");
  return eng;
}

Eigen::VectorXd pack_slice(const ClassicalState& s) {
  Eigen::VectorXd v(2);
  v << s.x, s.p;
  return v;
}

Eigen::VectorXd pack_slice(const QuantumState& psi) {
  Eigen::VectorXd v(2 * psi.size());
  for (long n = 0; n < psi.size(); ++n) {
    v(2 * n) = psi(n).real();
    v(2 * n + 1) = psi(n).imag();
  }
  return v;
}

ClassicalState unpack_classical(const Eigen::VectorXd& v) {
  if (v.size() != 2) throw std::invalid_argument("unpack_classical: slice width is not 2");
  return ClassicalState{v(0), v(1)};
}

QuantumState unpack_quantum(const Eigen::VectorXd& v) {
  if (v.size() % 2 != 0) throw std::invalid_argument("unpack_quantum: odd slice width");
  QuantumState psi(v.size() / 2);
  for (long n = 0; n < psi.size(); ++n) psi(n) = {v(2 * n), v(2 * n + 1)};
  return psi;
}

void write_checkpoint(const std::string& path, const ChainCheckpoint& ckpt) {
  if (ckpt.slices.empty()) throw std::invalid_argument("write_checkpoint: empty path");
  const long width = ckpt.slices.front().size();
  for (const auto& s : ckpt.slices)
    if (s.size() != width) throw std::invalid_argument("write_checkpoint: ragged slices");
  auto out = open_out(path);
  out << "qpath-checkpoint 1\n";
  out << "kind " << ckpt.kind << "\n";
  out << "config_hash " << hex64(ckpt.config_hash) << "\n";
  out << "moves_done " << ckpt.moves_done << "\n";
  out << "accepted " << ckpt.accepted << "\n";
  out << "dt " << format_double(ckpt.dt) << "\n";
  out << "rng " << ckpt.rng_state << "\n";
  out << "slices " << ckpt.slices.size() << " " << width << "\n";
  out << "end\n";
  for (const auto& s : ckpt.slices)
    out.write(reinterpret_cast<const char*>(s.data()),
              std::streamsize(sizeof(double) * std::size_t(width)));
}

ChainCheckpoint read_checkpoint(const std::string& path) {
  auto in = open_in(path);
  std::string line;
  if (!std::getline(in, line) || line != "qpath-checkpoint 1")
    throw std::runtime_error("read_checkpoint: '" + path + "' is not a checkpoint");
  ChainCheckpoint ckpt;
  long count = -1, width = -1;
  while (std::getline(in, line)) {
    if (line == "end") break;
    const auto sp = line.find(' ');
    if (sp == std::string::npos)
      throw std::runtime_error("read_checkpoint: malformed header line '" + line + "'");
    const std::string key = line.substr(0, sp);
    const std::string value = line.substr(sp + 1);
    if (key == "kind")
      ckpt.kind = value;
    else if (key == "config_hash")
      ckpt.config_hash = std::stoull(value, nullptr, 16);
    else if (key == "moves_done")
      ckpt.moves_done = std::stol(value);
    else if (key == "accepted")
      ckpt.accepted = std::stol(value);
    else if (key == "dt")
      ckpt.dt = std::stod(value);
    else if (key == "rng")
      ckpt.rng_state = value;
    else if (key == "slices") {
      std::stringstream ss(value);
      ss >> count >> width;
    } else
      throw std::runtime_error("read_checkpoint: unknown record '" + key + "'");
  }
  if (count < 1 || width < 1) throw std::runtime_error("read_checkpoint: missing payload shape");
  ckpt.slices.assign(std::size_t(count), Eigen::VectorXd(width));
  for (auto& s : ckpt.slices) {
    in.read(reinterpret_cast<char*>(s.data()), std::streamsize(sizeof(double) * std::size_t(width)));
    if (in.gcount() != std::streamsize(sizeof(double) * std::size_t(width)))
      throw std::runtime_error("read_checkpoint: truncated payload in '" + path + "'");
  }
  return ckpt;
}

}  // namespace qpath::io
