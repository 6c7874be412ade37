#include "qpath/config.hpp"

#include "qpath/io.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

namespace qpath {

namespace {

std::string trim(std::string s) {
  const auto notspace = [](unsigned char c) { return !std::isspace(c); };
  s.erase(s.begin(), std::find_if(s.begin(), s.end(), notspace));
  s.erase(std::find_if(s.rbegin(), s.rend(), notspace).base(), s.end());
  return s;
}

double parse_double(const std::string& v, int line) {
  try {
    std::size_t used = 0;
    const double x = std::stod(v, &used);
    if (used != v.size()) throw std::invalid_argument("");
    return x;
  } catch (const std::exception&) {
    throw ConfigError(line, "expected a number, got '" + v + "'");
  }
}

long parse_long(const std::string& v, int line) {
  long x = 0;
  const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), x);
  if (ec != std::errc{} || p != v.data() + v.size())
    throw ConfigError(line, "expected an integer, got '" + v + "'");
  return x;
}

std::uint64_t parse_u64(const std::string& v, int line) {
  std::uint64_t x = 0;
  const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), x);
  if (ec != std::errc{} || p != v.data() + v.size())
    throw ConfigError(line, "expected a non-negative integer, got '" + v + "'");
  return x;
}

std::vector<std::string> split_list(const std::string& v) {
  std::vector<std::string> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

std::vector<double> parse_double_list(const std::string& v, int line) {
  std::vector<double> out;
  for (const auto& item : split_list(v)) out.push_back(parse_double(item, line));
  return out;
}

// One setter per known key; lookup failure is what makes a key unknown.
using Setter = std::function<void(ExperimentConfig&, const std::string&, int)>;

const std::map<std::string, Setter>& key_table() {
  static const std::map<std::string, Setter> table = {
      {"system.kind", [](auto& c, const auto& v, int) { c.kind = v; }},
      {"system.c4", [](auto& c, const auto& v, int l) { c.c4 = parse_double(v, l); }},
      {"system.c2", [](auto& c, const auto& v, int l) { c.c2 = parse_double(v, l); }},
      {"system.gamma", [](auto& c, const auto& v, int l) { c.gamma = parse_double(v, l); }},
      {"system.dt", [](auto& c, const auto& v, int l) { c.dt = parse_double(v, l); }},
      {"system.dim", [](auto& c, const auto& v, int l) { c.dim = int(parse_long(v, l)); }},
      {"system.omega", [](auto& c, const auto& v, int l) { c.omega = parse_double(v, l); }},
      {"system.a_max", [](auto& c, const auto& v, int l) { c.a_max = parse_double(v, l); }},
      {"system.b_min", [](auto& c, const auto& v, int l) { c.b_min = parse_double(v, l); }},
      {"run.seed", [](auto& c, const auto& v, int l) { c.seed = parse_u64(v, l); }},
      {"run.out_dir", [](auto& c, const auto& v, int) { c.out_dir = v; }},
      {"run.threads", [](auto& c, const auto& v, int l) { c.threads = int(parse_long(v, l)); }},
      {"simulate.steps", [](auto& c, const auto& v, int l) { c.sim_steps = parse_long(v, l); }},
      {"simulate.stride",
       [](auto& c, const auto& v, int l) { c.sim_stride = int(parse_long(v, l)); }},
      {"tps.moves", [](auto& c, const auto& v, int l) { c.tps_moves = int(parse_long(v, l)); }},
      {"tps.dp_width", [](auto& c, const auto& v, int l) { c.tps_dp_width = parse_double(v, l); }},
      {"tps.mirror_fraction",
       [](auto& c, const auto& v, int l) { c.tps_mirror_fraction = parse_double(v, l); }},
      {"tps.transforms", [](auto& c, const auto& v, int) { c.tps_transforms = v; }},
      {"tps.mode", [](auto& c, const auto& v, int) { c.tps_mode = v; }},
      {"tps.min_acceptance",
       [](auto& c, const auto& v, int l) { c.tps_min_acceptance = parse_double(v, l); }},
      {"tps.path_steps",
       [](auto& c, const auto& v, int l) { c.tps_path_steps = int(parse_long(v, l)); }},
      {"tps.snapshot_every",
       [](auto& c, const auto& v, int l) { c.tps_snapshot_every = int(parse_long(v, l)); }},
      {"tis.interfaces",
       [](auto& c, const auto& v, int l) { c.tis_interfaces = parse_double_list(v, l); }},
      {"tis.place_target",
       [](auto& c, const auto& v, int l) { c.tis_place_target = parse_double(v, l); }},
      {"tis.min_spacing",
       [](auto& c, const auto& v, int l) { c.tis_min_spacing = parse_double(v, l); }},
      {"tis.flux_steps",
       [](auto& c, const auto& v, int l) { c.tis_flux_steps = parse_long(v, l); }},
      {"tis.min_crossings",
       [](auto& c, const auto& v, int l) { c.tis_min_crossings = int(parse_long(v, l)); }},
      {"tis.a_core_offset",
       [](auto& c, const auto& v, int l) { c.tis_a_core_offset = parse_double(v, l); }},
      {"tis.moves", [](auto& c, const auto& v, int l) { c.tis_moves = int(parse_long(v, l)); }},
      {"tis.burn_in",
       [](auto& c, const auto& v, int l) { c.tis_burn_in = int(parse_long(v, l)); }},
      {"tis.pilot_moves",
       [](auto& c, const auto& v, int l) { c.tis_pilot_moves = int(parse_long(v, l)); }},
      {"tis.dp_width", [](auto& c, const auto& v, int l) { c.tis_dp_width = parse_double(v, l); }},
      {"tis.max_leg_steps",
       [](auto& c, const auto& v, int l) { c.tis_max_leg_steps = int(parse_long(v, l)); }},
      {"tis.store_stride",
       [](auto& c, const auto& v, int l) { c.tis_store_stride = int(parse_long(v, l)); }},
      {"mfpt.cutoff_time",
       [](auto& c, const auto& v, int l) { c.mfpt_cutoff = parse_double(v, l); }},
      {"mfpt.trajectories",
       [](auto& c, const auto& v, int l) { c.mfpt_trajectories = int(parse_long(v, l)); }},
      {"wigner.source", [](auto& c, const auto& v, int) { c.wigner_source = v; }},
      {"wigner.x_min", [](auto& c, const auto& v, int l) { c.wig_x_min = parse_double(v, l); }},
      {"wigner.x_max", [](auto& c, const auto& v, int l) { c.wig_x_max = parse_double(v, l); }},
      {"wigner.p_min", [](auto& c, const auto& v, int l) { c.wig_p_min = parse_double(v, l); }},
      {"wigner.p_max", [](auto& c, const auto& v, int l) { c.wig_p_max = parse_double(v, l); }},
      {"wigner.nx", [](auto& c, const auto& v, int l) { c.wig_nx = int(parse_long(v, l)); }},
      {"wigner.np", [](auto& c, const auto& v, int l) { c.wig_np = int(parse_long(v, l)); }},
      {"analyze.steps",
       [](auto& c, const auto& v, int l) { c.analyze_steps = parse_long(v, l); }},
      {"analyze.bins",
       [](auto& c, const auto& v, int l) { c.analyze_bins = int(parse_long(v, l)); }},
      {"analyze.grid_half",
       [](auto& c, const auto& v, int l) { c.analyze_grid_half = parse_double(v, l); }},
      {"analyze.grid_cells",
       [](auto& c, const auto& v, int l) { c.analyze_grid_cells = int(parse_long(v, l)); }},
      {"compare.t_b",
       [](auto& c, const auto& v, int l) { c.compare_t_b = parse_double_list(v, l); }},
      {"compare.methods",
       [](auto& c, const auto& v, int) { c.compare_methods = split_list(v); }},
  };
  return table;
}

}  // namespace

void ExperimentConfig::validate() const {
  const auto fail = [](const std::string& what) { throw std::invalid_argument("config: " + what); };
  if (kind != "classical" && kind != "sse" && kind != "gaussian")
    fail("kind must be classical, sse, or gaussian");
  if (!(c4 > 0.0) || !(c2 > 0.0)) fail("potential coefficients must be positive");
  if (!(gamma >= 0.0)) fail("gamma must be non-negative");
  if (!(temperature > 0.0)) fail("temperature must be positive");
  if (!(dt > 0.0)) fail("dt must be positive");
  if (dim < 2) fail("dim must be at least 2");
  if (omega < 0.0) fail("omega must be non-negative");
  if (!(a_max < b_min)) fail("a_max must lie below b_min");
  if (threads < 1) fail("threads must be at least 1");
  if (sim_steps < 1 || sim_stride < 1) fail("simulate budgets must be positive");
  if (tps_moves < 1 || tps_path_steps < 2) fail("tps budgets too small");
  if (tps_mode != "endpoint" && tps_mode != "visiting")
    fail("tps.mode must be endpoint or visiting");
  if (tps_mirror_fraction < 0.0 || tps_mirror_fraction > 1.0)
    fail("tps.mirror_fraction must lie in [0, 1]");
  if (tis_moves < 1 || tis_burn_in < 0 || tis_burn_in >= tis_moves)
    fail("tis burn-in must leave sampled moves");
  if (tis_flux_steps < 1 || tis_max_leg_steps < 1 || tis_pilot_moves < 1)
    fail("tis budgets must be positive");
  if (!(tis_place_target > 0.0) || !(tis_place_target < 1.0))
    fail("tis.place_target must lie strictly inside (0, 1)");
  if (mfpt_trajectories < 10) fail("mfpt.trajectories must be at least 10");
  if (!(mfpt_cutoff > 0.0)) fail("mfpt.cutoff_time must be positive");
  if (!(wig_x_min < wig_x_max) || !(wig_p_min < wig_p_max) || wig_nx < 2 || wig_np < 2)
    fail("wigner grid is degenerate");
  if (analyze_steps < 1 || analyze_bins < 1 || analyze_grid_cells < 2 ||
      !(analyze_grid_half > 0.0))
    fail("analyze settings are degenerate");
  if (compare_t_b.empty()) fail("compare.t_b needs at least one temperature");
  for (double tb : compare_t_b)
    if (!(tb > 0.0)) fail("compare.t_b entries must be positive");
  for (const auto& m : compare_methods)
    if (m != "mfpt" && m != "tis") fail("compare.methods entries must be mfpt or tis");
}

SimParams ExperimentConfig::sim_params() const {
  SimParams prm;
  prm.dt = dt;
  prm.gamma = gamma;
  prm.temperature = temperature;
  prm.well = well();
  return prm;
}

BasisConfig ExperimentConfig::basis() const {
  BasisConfig b;
  b.dim = dim;
  b.omega = omega > 0.0 ? omega : well().well_frequency(b.mass);
  return b;
}

ExperimentConfig parse_config_text(const std::string& text) {
  ExperimentConfig cfg;
  std::istringstream in(text);
  std::string raw;
  std::string section;
  int line = 0;
  int t_line = 0, tb_line = 0;
  double tb_value = 0.0;

  while (std::getline(in, raw)) {
    ++line;
    std::string s = raw;
    if (const auto pos = s.find_first_of("#;"); pos != std::string::npos) s.erase(pos);
    s = trim(s);
    if (s.empty()) continue;

    if (s.front() == '[') {
      if (s.back() != ']') throw ConfigError(line, "unterminated section header");
      section = trim(s.substr(1, s.size() - 2));
      if (section.empty()) throw ConfigError(line, "empty section name");
      continue;
    }

    const auto eq = s.find('=');
    if (eq == std::string::npos) throw ConfigError(line, "expected key = value");
    const std::string key = trim(s.substr(0, eq));
    const std::string value = trim(s.substr(eq + 1));
    if (key.empty()) throw ConfigError(line, "empty key");
    const std::string full = section.empty() ? key : section + "." + key;

    // the two temperature spellings share a slot, so they bypass the table
    if (full == "system.temperature") {
      cfg.temperature = parse_double(value, line);
      t_line = line;
      continue;
    }
    if (full == "system.t_b") {
      tb_value = parse_double(value, line);
      tb_line = line;
      continue;
    }

    const auto it = key_table().find(full);
    if (it == key_table().end()) throw ConfigError(line, "unknown key '" + full + "'");
    it->second(cfg, value, line);
  }

  if (t_line && tb_line)
    throw ConfigError(std::max(t_line, tb_line),
                      "temperature and t_b are mutually exclusive; set one");
  if (tb_line) {
    if (!(tb_value > 0.0)) throw ConfigError(tb_line, "t_b must be positive");
    cfg.temperature = tb_value * cfg.well().barrier_height();
  }

  cfg.validate();
  return cfg;
}

ExperimentConfig parse_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("config: cannot open '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_config_text(buf.str());
}

std::string config_text(const ExperimentConfig& cfg) {
  std::ostringstream out;
  out.precision(17);
  const auto list = [](const std::vector<double>& v) {
    std::ostringstream s;
    s.precision(17);
    for (std::size_t i = 0; i < v.size(); ++i) s << (i ? "," : "") << v[i];
    return s.str();
  };
  out << "[system]\n"
      << "kind = " << cfg.kind << "\n"
      << "c4 = " << cfg.c4 << "\n"
      << "c2 = " << cfg.c2 << "\n"
      << "gamma = " << cfg.gamma << "\n"
      << "temperature = " << cfg.temperature << "\n"
      << "dt = " << cfg.dt << "\n"
      << "dim = " << cfg.dim << "\n"
      << "omega = " << cfg.omega << "\n"
      << "a_max = " << cfg.a_max << "\n"
      << "b_min = " << cfg.b_min << "\n\n"
      << "[run]\n"
      << "seed = " << cfg.seed << "\n"
      << "out_dir = " << cfg.out_dir << "\n"
      << "threads = " << cfg.threads << "\n\n"
      << "[simulate]\n"
      << "steps = " << cfg.sim_steps << "\n"
      << "stride = " << cfg.sim_stride << "\n\n"
      << "[tps]\n"
      << "moves = " << cfg.tps_moves << "\n"
      << "dp_width = " << cfg.tps_dp_width << "\n"
      << "mirror_fraction = " << cfg.tps_mirror_fraction << "\n"
      << "transforms = " << cfg.tps_transforms << "\n"
      << "mode = " << cfg.tps_mode << "\n"
      << "min_acceptance = " << cfg.tps_min_acceptance << "\n"
      << "path_steps = " << cfg.tps_path_steps << "\n"
      << "snapshot_every = " << cfg.tps_snapshot_every << "\n\n"
      << "[tis]\n";
  if (!cfg.tis_interfaces.empty()) out << "interfaces = " << list(cfg.tis_interfaces) << "\n";
  out << "place_target = " << cfg.tis_place_target << "\n"
      << "min_spacing = " << cfg.tis_min_spacing << "\n"
      << "flux_steps = " << cfg.tis_flux_steps << "\n"
      << "min_crossings = " << cfg.tis_min_crossings << "\n"
      << "a_core_offset = " << cfg.tis_a_core_offset << "\n"
      << "moves = " << cfg.tis_moves << "\n"
      << "burn_in = " << cfg.tis_burn_in << "\n"
      << "pilot_moves = " << cfg.tis_pilot_moves << "\n"
      << "dp_width = " << cfg.tis_dp_width << "\n"
      << "max_leg_steps = " << cfg.tis_max_leg_steps << "\n"
      << "store_stride = " << cfg.tis_store_stride << "\n\n"
      << "[mfpt]\n"
      << "cutoff_time = " << cfg.mfpt_cutoff << "\n"
      << "trajectories = " << cfg.mfpt_trajectories << "\n\n"
      << "[wigner]\n"
      << "source = " << cfg.wigner_source << "\n"
      << "x_min = " << cfg.wig_x_min << "\n"
      << "x_max = " << cfg.wig_x_max << "\n"
      << "p_min = " << cfg.wig_p_min << "\n"
      << "p_max = " << cfg.wig_p_max << "\n"
      << "nx = " << cfg.wig_nx << "\n"
      << "np = " << cfg.wig_np << "\n\n"
      << "[analyze]\n"
      << "steps = " << cfg.analyze_steps << "\n"
      << "bins = " << cfg.analyze_bins << "\n"
      << "grid_half = " << cfg.analyze_grid_half << "\n"
      << "grid_cells = " << cfg.analyze_grid_cells << "\n\n"
      << "[compare]\n"
      << "t_b = " << list(cfg.compare_t_b) << "\n"
      << "methods = ";
  for (std::size_t i = 0; i < cfg.compare_methods.size(); ++i)
    out << (i ? "," : "") << cfg.compare_methods[i];
  out << "\n";
  return out.str();
}

std::uint64_t config_hash(const ExperimentConfig& cfg) {
  const std::string text = config_text(cfg);
  return io::fnv1a(text.data(), text.size());
}

}  // namespace qpath
