#include "netstate/traffic_domain.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <unordered_map>
#include <unordered_set>

#include <nlohmann/json.hpp>

#include "netstate/csv.hpp"

namespace netstate {

namespace {

using json = nlohmann::json;

constexpr char kTopologyHeader[] = "link_id,upstream,downstream";

std::vector<std::int64_t> parse_id_list(const CsvReader& reader, const std::string& field) {
  std::vector<std::int64_t> out;
  if (field.empty()) return out;
  for (const std::string& tok : split_fields(field, ';')) {
    if (tok.empty()) reader.fail("empty entry in neighbor list");
    out.push_back(reader.parse_int(tok));
  }
  return out;
}

}  // namespace

void NetworkTopology::validate() const {
  if (n_links < 0) throw DataError("topology: negative link count");
  const auto n = static_cast<std::size_t>(n_links);
  if (upstream.size() != n || downstream.size() != n)
    throw DataError("topology: neighbor list size does not match n_links");
  if (!original_ids.empty() && original_ids.size() != n)
    throw DataError("topology: original id table size does not match n_links");
  for (std::int32_t i = 0; i < n_links; ++i) {
    for (const auto* list : {&upstream[i], &downstream[i]}) {
      for (LinkId j : *list) {
        if (j < 0 || j >= n_links)
          throw DataError("topology: link " + std::to_string(i) +
                          " references out-of-range neighbor " + std::to_string(j));
        if (j == i)
          throw DataError("topology: link " + std::to_string(i) + " lists itself as neighbor");
      }
    }
  }
}

std::string to_string(ScenarioLabel label) {
  switch (label) {
    case ScenarioLabel::ITD: return "ITD";
    case ScenarioLabel::ATD: return "ATD";
    case ScenarioLabel::ETD: return "ETD";
  }
  throw DataError("unknown scenario label");
}

ScenarioLabel scenario_from_string(const std::string& s) {
  if (s == "ITD") return ScenarioLabel::ITD;
  if (s == "ATD") return ScenarioLabel::ATD;
  if (s == "ETD") return ScenarioLabel::ETD;
  throw DataError("unknown scenario '" + s + "' (expected ITD, ATD or ETD)");
}

const SequenceInfo* SequenceManifest::find(const std::string& id) const {
  for (const auto& seq : sequences)
    if (seq.id == id) return &seq;
  return nullptr;
}

void SequenceManifest::validate() const {
  if (step_minutes <= 0) throw DataError("manifest: step_minutes must be positive");
  if (sequences.empty()) throw DataError("manifest: no sequences");
  std::unordered_set<std::string> ids;
  const int steps = sequences.front().steps;
  for (const auto& seq : sequences) {
    if (seq.id.empty()) throw DataError("manifest: empty sequence id");
    if (!ids.insert(seq.id).second)
      throw DataError("manifest: duplicate sequence id '" + seq.id + "'");
    if (seq.steps <= 0)
      throw DataError("manifest: sequence '" + seq.id + "' has non-positive steps");
    if (seq.steps != steps)
      throw DataError("manifest: sequence '" + seq.id +
                      "' step count differs from the rest of the dataset");
  }
}

std::pair<std::int64_t, std::int64_t> TrafficStateMatrix::sequence_span(
    const std::string& id) const {
  std::int64_t start = -1, count = 0;
  for (std::int64_t c = 0; c < m(); ++c) {
    if (column_index[static_cast<std::size_t>(c)].sequence_id == id) {
      if (start < 0) start = c;
      ++count;
    } else if (start >= 0 && count > 0 && c == start + count) {
      break;  // contiguity invariant: block ended
    }
  }
  if (start < 0) throw DataError("unknown sequence id '" + id + "'");
  return {start, count};
}

void TrafficStateMatrix::validate() const {
  if (column_index.size() != static_cast<std::size_t>(values.cols()))
    throw DataError("state matrix: column index size does not match column count");
  for (std::int64_t c = 0; c < values.cols(); ++c) {
    for (std::int64_t r = 0; r < values.rows(); ++r) {
      const double v = values(r, c);
      if (!std::isfinite(v) || v < 0.0 || v > 1.0)
        throw DataError("state matrix: entry (" + std::to_string(r) + "," +
                        std::to_string(c) + ") = " + format_double(v) +
                        " outside [0,1]");
    }
  }
  std::set<std::pair<std::string, int>> seen;
  std::unordered_map<std::string, int> last_step;
  std::unordered_set<std::string> closed;
  std::string current;
  for (std::size_t c = 0; c < column_index.size(); ++c) {
    const auto& key = column_index[c];
    if (!seen.insert({key.sequence_id, key.time_step}).second)
      throw DataError("state matrix: duplicate column (" + key.sequence_id + "," +
                      std::to_string(key.time_step) + ")");
    if (key.sequence_id != current) {
      if (closed.count(key.sequence_id))
        throw DataError("state matrix: columns of sequence '" + key.sequence_id +
                        "' are not contiguous");
      if (!current.empty()) closed.insert(current);
      current = key.sequence_id;
      last_step[current] = key.time_step;
    } else if (key.time_step <= last_step[current] && c > 0 &&
               column_index[c - 1].sequence_id == current) {
      throw DataError("state matrix: sequence '" + current +
                      "' columns not ordered by time step");
    } else {
      last_step[current] = key.time_step;
    }
  }
}

double compute_traffic_index(double min_travel_time_s, double mean_travel_time_s) {
  if (!(min_travel_time_s > 0.0) || !(mean_travel_time_s > 0.0))
    throw DataError("traffic index: travel times must be positive");
  const double ratio = min_travel_time_s / mean_travel_time_s;
  return std::clamp(ratio, 0.0, 1.0);
}

namespace {

NetworkTopology load_topology(const std::filesystem::path& path) {
  CsvReader reader(path);
  std::vector<std::string> fields;
  if (!reader.next(fields)) reader.fail("empty topology file");
  if (fields.size() != 3 || fields[0] != "link_id" || fields[1] != "upstream" ||
      fields[2] != "downstream")
    reader.fail(std::string("expected header '") + kTopologyHeader + "'");

  std::vector<std::int64_t> ids;
  std::vector<std::vector<std::int64_t>> raw_up, raw_down;
  std::unordered_map<std::int64_t, LinkId> dense;
  while (reader.next(fields)) {
    if (fields.size() != 3) reader.fail("expected 3 fields");
    const std::int64_t id = reader.parse_int(fields[0]);
    if (id < 0) reader.fail("negative link id");
    if (dense.count(id)) reader.fail("duplicate link id " + std::to_string(id));
    dense[id] = static_cast<LinkId>(ids.size());
    ids.push_back(id);
    raw_up.push_back(parse_id_list(reader, fields[1]));
    raw_down.push_back(parse_id_list(reader, fields[2]));
  }

  NetworkTopology topo;
  topo.n_links = static_cast<std::int32_t>(ids.size());
  topo.original_ids = ids;
  topo.upstream.resize(ids.size());
  topo.downstream.resize(ids.size());
  for (std::size_t i = 0; i < ids.size(); ++i) {
    for (auto [raw, out] : {std::pair{&raw_up[i], &topo.upstream[i]},
                            std::pair{&raw_down[i], &topo.downstream[i]}}) {
      out->reserve(raw->size());
      for (std::int64_t nb : *raw) {
        auto it = dense.find(nb);
        if (it == dense.end())
          throw DataError(path.string() + ": link " + std::to_string(ids[i]) +
                          " references unknown neighbor " + std::to_string(nb));
        out->push_back(it->second);
      }
    }
  }
  topo.validate();
  return topo;
}

SequenceManifest load_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::exception& e) {
    throw DataError(path.string() + ": invalid JSON: " + e.what());
  }
  SequenceManifest manifest;
  try {
    manifest.step_minutes = doc.at("step_minutes").get<int>();
    for (const auto& entry : doc.at("sequences")) {
      SequenceInfo seq;
      seq.id = entry.at("id").get<std::string>();
      seq.scenario = scenario_from_string(entry.at("scenario").get<std::string>());
      seq.steps = entry.at("steps").get<int>();
      seq.file = entry.at("file").get<std::string>();
      manifest.sequences.push_back(std::move(seq));
    }
  } catch (const json::exception& e) {
    throw DataError(path.string() + ": manifest schema error: " + e.what());
  }
  manifest.validate();
  return manifest;
}

// One state CSV: header link_id,t000,...; one row per link, values in [0,1].
void load_sequence_file(const std::filesystem::path& path, const SequenceInfo& seq,
                        const NetworkTopology& topo,
                        const std::unordered_map<std::int64_t, LinkId>& dense,
                        Eigen::Ref<Eigen::MatrixXd> block) {
  CsvReader reader(path);
  std::vector<std::string> fields;
  if (!reader.next(fields)) reader.fail("empty state file");
  if (fields.size() != static_cast<std::size_t>(seq.steps) + 1 || fields[0] != "link_id")
    reader.fail("expected header 'link_id,t000,...' with " + std::to_string(seq.steps) +
                " time columns for sequence '" + seq.id + "'");
  std::vector<bool> filled(static_cast<std::size_t>(topo.n_links), false);
  std::int32_t rows = 0;
  while (reader.next(fields)) {
    if (fields.size() != static_cast<std::size_t>(seq.steps) + 1)
      reader.fail("expected " + std::to_string(seq.steps + 1) + " fields");
    const std::int64_t raw_id = reader.parse_int(fields[0]);
    auto it = dense.find(raw_id);
    if (it == dense.end()) reader.fail("unknown link id " + std::to_string(raw_id));
    const LinkId link = it->second;
    if (filled[static_cast<std::size_t>(link)])
      reader.fail("duplicate row for link id " + std::to_string(raw_id));
    filled[static_cast<std::size_t>(link)] = true;
    ++rows;
    for (int t = 0; t < seq.steps; ++t) {
      const double v = reader.parse_double(fields[static_cast<std::size_t>(t) + 1]);
      if (!std::isfinite(v) || v < 0.0 || v > 1.0)
        reader.fail("traffic index " + fields[static_cast<std::size_t>(t) + 1] +
                    " outside [0,1]");
      block(link, t) = v;
    }
  }
  if (rows != topo.n_links)
    throw DataError(path.string() + ": has " + std::to_string(rows) +
                    " link rows, topology has " + std::to_string(topo.n_links));
}

}  // namespace

Dataset load_dataset(const std::filesystem::path& data_dir,
                     const std::filesystem::path& manifest_path,
                     const std::filesystem::path& topology_path) {
  Dataset ds;
  ds.topology = load_topology(topology_path);
  ds.manifest = load_manifest(manifest_path);

  std::unordered_map<std::int64_t, LinkId> dense;
  for (std::size_t i = 0; i < ds.topology.original_ids.size(); ++i)
    dense[ds.topology.original_ids[i]] = static_cast<LinkId>(i);

  std::int64_t m = 0;
  for (const auto& seq : ds.manifest.sequences) m += seq.steps;
  ds.states.values.resize(ds.topology.n_links, m);
  ds.states.column_index.reserve(static_cast<std::size_t>(m));

  std::int64_t col = 0;
  for (const auto& seq : ds.manifest.sequences) {
    load_sequence_file(data_dir / seq.file, seq, ds.topology, dense,
                       ds.states.values.middleCols(col, seq.steps));
    for (int t = 0; t < seq.steps; ++t) ds.states.column_index.push_back({seq.id, t});
    col += seq.steps;
  }
  ds.states.validate();
  return ds;
}

void save_dataset(const Dataset& dataset, const std::filesystem::path& dir) {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(dir / "sequences", ec);
  if (ec) throw IoError("cannot create " + (dir / "sequences").string());

  const auto& topo = dataset.topology;
  {
    auto out = open_output(dir / "topology.csv");
    out << kTopologyHeader << "\n";
    auto original = [&](LinkId i) {
      return topo.original_ids.empty() ? static_cast<std::int64_t>(i)
                                       : topo.original_ids[static_cast<std::size_t>(i)];
    };
    for (LinkId i = 0; i < topo.n_links; ++i) {
      out << original(i) << ",";
      for (std::size_t k = 0; k < topo.upstream[i].size(); ++k)
        out << (k ? ";" : "") << original(topo.upstream[i][k]);
      out << ",";
      for (std::size_t k = 0; k < topo.downstream[i].size(); ++k)
        out << (k ? ";" : "") << original(topo.downstream[i][k]);
      out << "\n";
    }
  }

  nlohmann::json manifest;
  manifest["step_minutes"] = dataset.manifest.step_minutes;
  manifest["sequences"] = nlohmann::json::array();
  auto original = [&](LinkId i) {
    return topo.original_ids.empty() ? static_cast<std::int64_t>(i)
                                     : topo.original_ids[static_cast<std::size_t>(i)];
  };
  for (const auto& seq : dataset.manifest.sequences) {
    const std::string file =
        seq.file.empty() ? "sequences/" + seq.id + ".csv" : seq.file;
    manifest["sequences"].push_back({{"id", seq.id},
                                     {"scenario", to_string(seq.scenario)},
                                     {"steps", seq.steps},
                                     {"file", file}});
    auto [start, count] = dataset.states.sequence_span(seq.id);
    if (count != seq.steps)
      throw DataError("save: sequence '" + seq.id + "' has " + std::to_string(count) +
                      " columns, manifest says " + std::to_string(seq.steps));
    auto out = open_output(dir / file);
    out << "link_id";
    for (int t = 0; t < seq.steps; ++t) {
      char buf[16];
      std::snprintf(buf, sizeof(buf), ",t%03d", t);
      out << buf;
    }
    out << "\n";
    for (LinkId i = 0; i < topo.n_links; ++i) {
      out << original(i);
      for (int t = 0; t < seq.steps; ++t)
        out << "," << format_double(dataset.states.values(i, start + t));
      out << "\n";
    }
  }
  auto mout = open_output(dir / "manifest.json");
  mout << manifest.dump(2) << "\n";
}

Eigen::MatrixXd slice_sequence(const TrafficStateMatrix& matrix,
                               const std::string& sequence_id) {
  auto [start, count] = matrix.sequence_span(sequence_id);
  return matrix.values.middleCols(start, count);
}

}  // namespace netstate
