#pragma once

#include "qpath/dynamics.hpp"
#include "qpath/fock.hpp"
#include "qpath/tps.hpp"

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

// Experiment configuration: a small INI dialect (sections, key = value,
// comments with # or ;) parsed into one flat struct with documented defaults.
// Unknown sections or keys, malformed values, and inconsistent settings are
// all reported with the offending line number.

namespace qpath {

struct ConfigError : std::runtime_error {
  int line;
  ConfigError(int line_, const std::string& what_)
      : std::runtime_error("line " + std::to_string(line_) + ": " + what_), line(line_) {}
};

struct ExperimentConfig {
  // [system]
  std::string kind{"classical"};  // classical | sse | gaussian
  double c4{0.01};
  double c2{0.35};
  double gamma{0.25};
  double temperature{1.53125};  // k_B T; key t_b instead gives T = T_B * barrier height
  double dt{1e-3};
  int dim{40};
  double omega{0.0};  // 0 = well curvature of the configured potential
  double a_max{-3.0};
  double b_min{3.0};

  // [run]
  std::uint64_t seed{1};
  std::string out_dir{"runs/out"};
  int threads{1};

  // [simulate]
  long sim_steps{200000};
  int sim_stride{10};

  // [tps]
  int tps_moves{2000};
  double tps_dp_width{0.5};
  double tps_mirror_fraction{0.0};
  std::string tps_transforms{"time,parity,parity_time"};
  std::string tps_mode{"endpoint"};  // endpoint | visiting
  double tps_min_acceptance{0.01};
  int tps_path_steps{6000};  // must hold a full A-to-B transit (a few time units)
  int tps_snapshot_every{0};

  // [tis]
  std::vector<double> tis_interfaces;  // empty = automatic placement
  double tis_place_target{0.4};
  double tis_min_spacing{0.05};
  long tis_flux_steps{2000000};
  int tis_min_crossings{100};
  double tis_a_core_offset{0.5};
  int tis_moves{4000};
  int tis_burn_in{400};
  int tis_pilot_moves{1500};
  double tis_dp_width{0.5};
  int tis_max_leg_steps{400000};
  int tis_store_stride{0};

  // [mfpt]
  double mfpt_cutoff{2000.0};
  int mfpt_trajectories{100};

  // [wigner]
  std::string wigner_source{"stationary"};  // stationary | gibbs
  double wig_x_min{-6.0}, wig_x_max{6.0};
  double wig_p_min{-6.0}, wig_p_max{6.0};
  int wig_nx{101}, wig_np{101};

  // [analyze]
  long analyze_steps{15000000};
  int analyze_bins{30};
  double analyze_grid_half{8.0};
  int analyze_grid_cells{41};

  // [compare]
  std::vector<double> compare_t_b{0.3, 0.4, 0.5};
  std::vector<std::string> compare_methods{"mfpt", "tis"};

  void validate() const;  // throws std::invalid_argument on inconsistent values

  DoubleWell well() const { return DoubleWell{c4, c2}; }
  SimParams sim_params() const;
  BasisConfig basis() const;
  StateRegions regions() const { return StateRegions{a_max, b_min}; }
};

// Parse from file or from text (the file's name only flavors error messages).
// An empty file or string yields the defaults above.
ExperimentConfig parse_config(const std::string& path);
ExperimentConfig parse_config_text(const std::string& text);

// Canonical round-trippable snapshot: parsing the result reproduces the
// config exactly, and its bytes feed the config hash.
std::string config_text(const ExperimentConfig& cfg);
std::uint64_t config_hash(const ExperimentConfig& cfg);

}  // namespace qpath
