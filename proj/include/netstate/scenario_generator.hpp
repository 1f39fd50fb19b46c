#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <filesystem>

#include "netstate/traffic_domain.hpp"

namespace netstate {

// Synthetic peak-hour corpus: a directed grid network plus per-scenario
// traffic-index sequences with ground-truth labels.
//
// Scenario geometry:
//   ITD - light congestion on a uniform ring around (and mildly inside) the
//         central region; recovers after the peak.
//   ATD - congestion over the central region and the northern band, severity
//         randomized per sequence; recovers after the peak.
//   ETD - deep network-wide congestion that ramps up early and never
//         recovers.
struct GeneratorConfig {
  int grid_rows = 16;  // junction grid; every undirected edge is a one-way pair
  int grid_cols = 16;
  int n_steps = 48;
  int step_minutes = 15;
  int n_itd = 37;
  int n_atd = 91;
  int n_etd = 18;
  std::uint64_t seed = 0;
  double noise_std = 0.02;  // uniform index noise, matched standard deviation
  // Congestion amplitude per scenario: the minimum index reached at peak in
  // the scenario's core region is about 1 - depth.
  double depth_itd = 0.30;
  double depth_atd = 0.55;
  double depth_etd = 0.70;
  int peak_step = 24;      // raised-cosine bump center for ITD/ATD
  int etd_ramp_steps = 8;  // ETD reaches its plateau after this many steps
  double atd_severity_min = 0.8;
  double atd_severity_max = 1.3;
  unsigned threads = 0;

  void validate() const;
};

// Grid topology plus per-link midpoint coordinates in [0,1]^2 (x east,
// y south; the northern band sits at small y). The coordinates drive the
// scenario depth fields.
struct GridNetwork {
  NetworkTopology topology;
  std::vector<double> link_x;
  std::vector<double> link_y;
};

GridNetwork generate_grid(const GeneratorConfig& config);

// Neighbor-list topology only (2 directed links per undirected grid edge).
NetworkTopology generate_topology(const GeneratorConfig& config);

// Per-link congestion depth in [0,1] before the per-sequence severity draw;
// the planted ground truth used by exemplar scoring.
Eigen::VectorXd scenario_depth_field(const GridNetwork& grid, ScenarioLabel scenario,
                                     const GeneratorConfig& config);

// Peak-hour demand profile in [0,1] at step t.
double demand_bump(int t, ScenarioLabel scenario, const GeneratorConfig& config);

// One sequence of n_steps index columns (links x steps), clamped to [0,1].
Eigen::MatrixXd generate_sequence(const GridNetwork& grid, ScenarioLabel scenario,
                                  const GeneratorConfig& config, std::uint64_t seq_seed);

// All sequences of all scenarios, manifest labels included.
Dataset generate_dataset(const GeneratorConfig& config);

// save_dataset plus ground_truth.csv (sequence_id,scenario).
void write_dataset(const Dataset& dataset, const std::filesystem::path& dir);

}  // namespace netstate
