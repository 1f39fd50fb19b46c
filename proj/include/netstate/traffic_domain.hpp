#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "netstate/errors.hpp"

namespace netstate {

// Dense 0-based link index. File-level identifiers are remapped on load; the
// originals live in NetworkTopology::original_ids.
using LinkId = std::int32_t;

// Directed link adjacency. Neighbor lists hold links sharing a junction with
// compatible flow orientation; a link never lists itself.
struct NetworkTopology {
  std::int32_t n_links = 0;
  std::vector<std::vector<LinkId>> upstream;
  std::vector<std::vector<LinkId>> downstream;
  std::vector<std::int64_t> original_ids;

  void validate() const;
};

enum class ScenarioLabel { ITD, ATD, ETD };

std::string to_string(ScenarioLabel label);
ScenarioLabel scenario_from_string(const std::string& s);

struct SequenceInfo {
  std::string id;
  ScenarioLabel scenario = ScenarioLabel::ITD;
  int steps = 0;
  std::string file;  // state CSV path, relative to the dataset directory
};

struct SequenceManifest {
  int step_minutes = 15;
  std::vector<SequenceInfo> sequences;

  const SequenceInfo* find(const std::string& id) const;
  void validate() const;
};

struct ColumnKey {
  std::string sequence_id;
  int time_step = 0;
};

// Network-level traffic states, one state per column. Columns of a sequence
// are contiguous and time-ordered; every entry is a traffic index in [0,1].
struct TrafficStateMatrix {
  Eigen::MatrixXd values;  // n_links x n_samples
  std::vector<ColumnKey> column_index;

  std::int32_t n() const { return static_cast<std::int32_t>(values.rows()); }
  std::int64_t m() const { return values.cols(); }

  // First column and length of a sequence's contiguous block.
  std::pair<std::int64_t, std::int64_t> sequence_span(const std::string& id) const;

  void validate() const;
};

struct Dataset {
  TrafficStateMatrix states;
  SequenceManifest manifest;
  NetworkTopology topology;
};

// Ratio of minimum to mean observed travel time, clamped into [0,1];
// 1 = free flow, lower = more congested. Throws DataError on non-positive
// inputs (invalid measurements).
double compute_traffic_index(double min_travel_time_s, double mean_travel_time_s);

// Loads and cross-validates the three dataset files. `data_dir` anchors the
// per-sequence state files named by the manifest. Errors name the offending
// file, line and invariant.
Dataset load_dataset(const std::filesystem::path& data_dir,
                     const std::filesystem::path& manifest_path,
                     const std::filesystem::path& topology_path);

// Writes topology.csv, manifest.json and sequences/<id>.csv under dir.
// Values are written with 17 significant digits, so a load round-trips
// bit-exactly.
void save_dataset(const Dataset& dataset, const std::filesystem::path& dir);

// Columns of one sequence in strict time order (n_links x steps).
Eigen::MatrixXd slice_sequence(const TrafficStateMatrix& matrix, const std::string& sequence_id);

}  // namespace netstate
