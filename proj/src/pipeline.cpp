#include "netstate/pipeline.hpp"

#include <unistd.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <set>

#include <nlohmann/json.hpp>

#include "netstate/csv.hpp"
#include "netstate/rng.hpp"

namespace netstate {

namespace {

using json = nlohmann::json;

// Stage tags for sub-seed derivation; stable across releases.
enum SeedStream : std::uint64_t {
  kSeedGenerator = 1,
  kSeedFactorization = 2,
  kSeedClustering = 3,
  kSeedTrajectory = 4,
};

struct IniFile {
  std::map<std::string, std::map<std::string, std::string>> sections;
  std::map<std::string, std::set<std::string>> consumed;
  std::string path;

  bool has(const std::string& section, const std::string& key) {
    auto s = sections.find(section);
    if (s == sections.end()) return false;
    return s->second.count(key) > 0;
  }

  std::optional<std::string> take(const std::string& section, const std::string& key) {
    auto s = sections.find(section);
    if (s == sections.end()) return std::nullopt;
    auto k = s->second.find(key);
    if (k == s->second.end()) return std::nullopt;
    consumed[section].insert(key);
    return k->second;
  }

  void reject_unknown(const std::set<std::string>& known_sections) {
    for (const auto& [section, keys] : sections) {
      if (!known_sections.count(section))
        throw ConfigError(path + ": unknown section [" + section + "]");
      for (const auto& [key, value] : keys)
        if (!consumed[section].count(key))
          throw ConfigError(path + ": unknown key '" + key + "' in [" + section + "]");
    }
  }
};

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

IniFile parse_ini(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config file " + path.string());
  IniFile ini;
  ini.path = path.string();
  std::string line, section;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#' || t[0] == ';') continue;
    if (t.front() == '[') {
      if (t.back() != ']')
        throw ConfigError(ini.path + ":" + std::to_string(line_no) + ": malformed section header");
      section = trim(t.substr(1, t.size() - 2));
      ini.sections[section];
      continue;
    }
    const auto eq = t.find('=');
    if (eq == std::string::npos)
      throw ConfigError(ini.path + ":" + std::to_string(line_no) + ": expected key = value");
    if (section.empty())
      throw ConfigError(ini.path + ":" + std::to_string(line_no) + ": key outside any section");
    ini.sections[section][trim(t.substr(0, eq))] = trim(t.substr(eq + 1));
  }
  return ini;
}

double to_double(const std::string& v, const std::string& what) {
  try {
    std::size_t pos = 0;
    const double d = std::stod(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return d;
  } catch (const std::exception&) {
    throw ConfigError("config: " + what + ": expected a number, got '" + v + "'");
  }
}

long long to_int(const std::string& v, const std::string& what) {
  try {
    std::size_t pos = 0;
    const long long d = std::stoll(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return d;
  } catch (const std::exception&) {
    throw ConfigError("config: " + what + ": expected an integer, got '" + v + "'");
  }
}

std::uint64_t to_u64(const std::string& v, const std::string& what) {
  try {
    std::size_t pos = 0;
    const std::uint64_t d = std::stoull(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return d;
  } catch (const std::exception&) {
    throw ConfigError("config: " + what + ": expected an unsigned integer, got '" + v + "'");
  }
}

bool to_bool(const std::string& v, const std::string& what) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw ConfigError("config: " + what + ": expected true/false, got '" + v + "'");
}

std::vector<int> to_int_list(const std::string& v, const std::string& what) {
  std::vector<int> out;
  if (trim(v).empty()) return out;
  for (const auto& tok : split_fields(v, ','))
    out.push_back(static_cast<int>(to_int(trim(tok), what)));
  return out;
}

}  // namespace

void PipelineConfig::finalize() {
  generator.seed = generator_seed.value_or(derive_seed(seed, kSeedGenerator));
  factorization.seed = factorization_seed.value_or(derive_seed(seed, kSeedFactorization));
  clustering.seed = clustering_seed.value_or(derive_seed(seed, kSeedClustering));
  trajectory.seed = trajectory_seed.value_or(derive_seed(seed, kSeedTrajectory));
  if (deterministic) {
    generator.threads = 1;
    similarity.threads = 1;
    clustering.threads = 1;
    trajectory.threads = 1;
  }
  if (peak_start < 0 || peak_end < peak_start)
    throw ConfigError("pipeline: invalid peak window");
}

PipelineConfig load_pipeline_config(const std::filesystem::path& path) {
  IniFile ini = parse_ini(path);
  PipelineConfig cfg;

  if (auto v = ini.take("dataset", "dir")) cfg.dataset_dir = *v;
  if (auto v = ini.take("output", "dir")) cfg.output_dir = *v;

  if (auto v = ini.take("pipeline", "seed")) cfg.seed = to_u64(*v, "pipeline.seed");
  if (auto v = ini.take("pipeline", "deterministic"))
    cfg.deterministic = to_bool(*v, "pipeline.deterministic");
  if (auto v = ini.take("pipeline", "peak_start"))
    cfg.peak_start = static_cast<int>(to_int(*v, "pipeline.peak_start"));
  if (auto v = ini.take("pipeline", "peak_end"))
    cfg.peak_end = static_cast<int>(to_int(*v, "pipeline.peak_end"));

  auto& g = cfg.generator;
  if (auto v = ini.take("generator", "grid_rows")) g.grid_rows = static_cast<int>(to_int(*v, "generator.grid_rows"));
  if (auto v = ini.take("generator", "grid_cols")) g.grid_cols = static_cast<int>(to_int(*v, "generator.grid_cols"));
  if (auto v = ini.take("generator", "n_steps")) g.n_steps = static_cast<int>(to_int(*v, "generator.n_steps"));
  if (auto v = ini.take("generator", "step_minutes")) g.step_minutes = static_cast<int>(to_int(*v, "generator.step_minutes"));
  if (auto v = ini.take("generator", "n_itd")) g.n_itd = static_cast<int>(to_int(*v, "generator.n_itd"));
  if (auto v = ini.take("generator", "n_atd")) g.n_atd = static_cast<int>(to_int(*v, "generator.n_atd"));
  if (auto v = ini.take("generator", "n_etd")) g.n_etd = static_cast<int>(to_int(*v, "generator.n_etd"));
  if (auto v = ini.take("generator", "seed")) cfg.generator_seed = to_u64(*v, "generator.seed");
  if (auto v = ini.take("generator", "noise_std")) g.noise_std = to_double(*v, "generator.noise_std");
  if (auto v = ini.take("generator", "depth_itd")) g.depth_itd = to_double(*v, "generator.depth_itd");
  if (auto v = ini.take("generator", "depth_atd")) g.depth_atd = to_double(*v, "generator.depth_atd");
  if (auto v = ini.take("generator", "depth_etd")) g.depth_etd = to_double(*v, "generator.depth_etd");
  if (auto v = ini.take("generator", "peak_step")) g.peak_step = static_cast<int>(to_int(*v, "generator.peak_step"));
  if (auto v = ini.take("generator", "etd_ramp_steps")) g.etd_ramp_steps = static_cast<int>(to_int(*v, "generator.etd_ramp_steps"));
  if (auto v = ini.take("generator", "atd_severity_min")) g.atd_severity_min = to_double(*v, "generator.atd_severity_min");
  if (auto v = ini.take("generator", "atd_severity_max")) g.atd_severity_max = to_double(*v, "generator.atd_severity_max");

  if (auto v = ini.take("similarity", "delta")) {
    if (*v != "auto") cfg.similarity.delta = to_double(*v, "similarity.delta");
  }
  if (auto v = ini.take("similarity", "knn")) {
    if (*v == "none") {
      cfg.similarity.auto_sparsify = false;
    } else if (*v != "auto") {
      cfg.similarity.knn = static_cast<int>(to_int(*v, "similarity.knn"));
    }
  }
  if (auto v = ini.take("similarity", "aggregation")) {
    if (*v == "mean") cfg.similarity.aggregation = VariationAggregation::kMean;
    else if (*v == "sum") cfg.similarity.aggregation = VariationAggregation::kSum;
    else throw ConfigError("config: similarity.aggregation must be mean or sum");
  }
  if (auto v = ini.take("similarity", "self_weight")) cfg.self_weight = to_double(*v, "similarity.self_weight");
  if (auto v = ini.take("similarity", "cache")) cfg.cache_similarity = to_bool(*v, "similarity.cache");

  auto& f = cfg.factorization;
  if (auto v = ini.take("factorization", "s")) f.s = static_cast<int>(to_int(*v, "factorization.s"));
  if (auto v = ini.take("factorization", "lambda")) f.lambda = to_double(*v, "factorization.lambda");
  if (auto v = ini.take("factorization", "max_iters")) f.max_iters = static_cast<int>(to_int(*v, "factorization.max_iters"));
  if (auto v = ini.take("factorization", "rel_tol")) f.rel_tol = to_double(*v, "factorization.rel_tol");
  if (auto v = ini.take("factorization", "epsilon")) f.epsilon = to_double(*v, "factorization.epsilon");
  if (auto v = ini.take("factorization", "seed")) cfg.factorization_seed = to_u64(*v, "factorization.seed");
  if (auto v = ini.take("factorization", "candidate_s")) cfg.candidate_s = to_int_list(*v, "factorization.candidate_s");
  if (auto v = ini.take("factorization", "elbow_drop")) cfg.s_drop_threshold = to_double(*v, "factorization.elbow_drop");

  auto& c = cfg.clustering;
  if (auto v = ini.take("clustering", "k")) c.k = static_cast<int>(to_int(*v, "clustering.k"));
  if (auto v = ini.take("clustering", "n_restarts")) c.n_restarts = static_cast<int>(to_int(*v, "clustering.n_restarts"));
  if (auto v = ini.take("clustering", "max_iters")) c.max_iters = static_cast<int>(to_int(*v, "clustering.max_iters"));
  if (auto v = ini.take("clustering", "seed")) cfg.clustering_seed = to_u64(*v, "clustering.seed");
  if (auto v = ini.take("clustering", "congestion_threshold")) c.congestion_threshold = to_double(*v, "clustering.congestion_threshold");
  if (auto v = ini.take("clustering", "exemplar_fraction")) c.exemplar_fraction = to_double(*v, "clustering.exemplar_fraction");
  if (auto v = ini.take("clustering", "candidate_k")) cfg.candidate_k = to_int_list(*v, "clustering.candidate_k");
  if (auto v = ini.take("clustering", "improvement_threshold")) cfg.k_improvement_threshold = to_double(*v, "clustering.improvement_threshold");
  if (auto v = ini.take("clustering", "normalize")) cfg.normalize_embedding = to_bool(*v, "clustering.normalize");

  if (auto v = ini.take("pca", "enabled")) cfg.pca_enabled = to_bool(*v, "pca.enabled");
  if (auto v = ini.take("pca", "components")) cfg.pca_components = static_cast<int>(to_int(*v, "pca.components"));

  if (auto v = ini.take("trajectory", "k")) cfg.trajectory_k = static_cast<int>(to_int(*v, "trajectory.k"));
  if (auto v = ini.take("trajectory", "n_restarts")) cfg.trajectory.n_restarts = static_cast<int>(to_int(*v, "trajectory.n_restarts"));
  if (auto v = ini.take("trajectory", "max_swaps")) cfg.trajectory.max_swaps = static_cast<int>(to_int(*v, "trajectory.max_swaps"));
  if (auto v = ini.take("trajectory", "seed")) cfg.trajectory_seed = to_u64(*v, "trajectory.seed");

  ini.reject_unknown({"dataset", "output", "pipeline", "generator", "similarity",
                      "factorization", "clustering", "pca", "trajectory"});
  return cfg;
}

std::vector<int> column_scenarios(const Dataset& dataset) {
  std::map<std::string, int> scenario_of;
  for (const auto& seq : dataset.manifest.sequences)
    scenario_of[seq.id] = static_cast<int>(seq.scenario);
  std::vector<int> out;
  out.reserve(dataset.states.column_index.size());
  for (const auto& key : dataset.states.column_index) {
    auto it = scenario_of.find(key.sequence_id);
    if (it == scenario_of.end())
      throw DataError("column references sequence '" + key.sequence_id +
                      "' missing from the manifest");
    out.push_back(it->second);
  }
  return out;
}

std::vector<std::int64_t> peak_columns(const Dataset& dataset, int peak_start, int peak_end) {
  std::vector<std::int64_t> cols;
  for (std::int64_t c = 0; c < dataset.states.m(); ++c) {
    const int t = dataset.states.column_index[static_cast<std::size_t>(c)].time_step;
    if (t >= peak_start && t <= peak_end) cols.push_back(c);
  }
  return cols;
}

AnalyzeResult run_analyze(const Dataset& dataset, const PipelineConfig& config) {
  AnalyzeResult res;
  const auto& X = dataset.states.values;

  const NeighborWeights weights = NeighborWeights::uniform(dataset.topology, config.self_weight);
  bool from_cache = false;
  const auto cache_path = config.output_dir / "similarity_cache.csv";
  std::uint64_t cache_key = 0;
  if (config.cache_similarity) {
    cache_key = similarity_content_hash(dataset.states, dataset.topology, weights,
                                        config.similarity);
    if (auto cached = load_similarity_cache(cache_path, cache_key)) {
      res.graph = std::move(*cached);
      from_cache = true;
    }
  }
  if (!from_cache)
    res.graph = pairwise_similarity(dataset.states, dataset.topology, weights, config.similarity);

  FactorizationConfig fconfig = config.factorization;
  if (!config.candidate_s.empty()) {
    res.dimension_selection = select_dimension(X, &res.graph, config.candidate_s, fconfig,
                                               config.s_drop_threshold);
    fconfig.s = res.dimension_selection->recommended;
  }
  res.chosen_s = fconfig.s;
  res.factorization = factorize(X, fconfig.lambda > 0 ? &res.graph : nullptr, fconfig);

  Eigen::MatrixXd embedding = res.factorization.projections;
  if (config.normalize_embedding) {
    for (std::int64_t j = 0; j < embedding.cols(); ++j) {
      const double norm = embedding.col(j).norm();
      if (norm > 0) embedding.col(j) /= norm;
    }
  }

  if (config.pca_enabled) {
    res.pca = fit_pca(X, config.pca_components);
    res.pca_projections = pca_project(*res.pca, X);
  }

  if (!config.candidate_k.empty()) {
    KSelection ks = select_k(X, embedding, config.candidate_k, config.clustering,
                             config.k_improvement_threshold);
    res.chosen_k = ks.recommended;
    for (std::size_t i = 0; i < ks.candidates.size(); ++i) {
      res.lpnmf_compactness.emplace_back(ks.candidates[i], ks.reports[i]);
      if (ks.candidates[i] == ks.recommended) res.assignment = ks.assignments[i];
    }
    if (config.pca_enabled) {
      KSelection ps = select_k(X, res.pca_projections, config.candidate_k, config.clustering,
                               config.k_improvement_threshold);
      for (std::size_t i = 0; i < ps.candidates.size(); ++i)
        res.pca_compactness.emplace_back(ps.candidates[i], ps.reports[i]);
    }
  } else {
    res.chosen_k = config.clustering.k;
    res.assignment = kmeans(embedding, config.clustering);
    res.lpnmf_compactness.emplace_back(res.chosen_k,
                                       compactness(X, res.assignment.labels));
    if (config.pca_enabled) {
      ClusterAssignment pa = kmeans(res.pca_projections, config.clustering);
      res.pca_compactness.emplace_back(res.chosen_k, compactness(X, pa.labels));
    }
  }

  for (int c = 0; c < res.chosen_k; ++c)
    res.exemplars.push_back(extract_exemplar(X, res.assignment.labels, c, config.clustering));

  res.basis_report = basis_importance(res.factorization);

  res.trajectories = build_trajectories(res.factorization.projections, dataset.states,
                                        dataset.manifest);
  res.trajectory_clustering =
      cluster_trajectories(res.trajectories, config.trajectory_k, config.trajectory);
  fill_mean_curves(res.trajectory_clustering, dataset.states, res.trajectories);

  // Purity against the manifest's scenario labels.
  const std::vector<int> scenarios = column_scenarios(dataset);
  const auto peak = peak_columns(dataset, config.peak_start, config.peak_end);
  if (!peak.empty()) {
    std::vector<int> peak_labels, peak_classes;
    for (std::int64_t c : peak) {
      peak_labels.push_back(res.assignment.labels[static_cast<std::size_t>(c)]);
      peak_classes.push_back(scenarios[static_cast<std::size_t>(c)]);
    }
    res.peak_purity = clustering_purity(peak_labels, peak_classes);
  }
  std::vector<int> traj_classes;
  for (const auto& t : res.trajectories) traj_classes.push_back(static_cast<int>(t.scenario));
  res.trajectory_purity = clustering_purity(res.trajectory_clustering.labels, traj_classes);

  if (config.cache_similarity && !from_cache)
    save_similarity_cache(cache_path, res.graph, cache_key);
  return res;
}

namespace {

std::string column_tag(const ColumnKey& key) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), ":%03d", key.time_step);
  return key.sequence_id + buf;
}

std::int64_t original_id(const NetworkTopology& topo, std::int64_t link) {
  return topo.original_ids.empty() ? link
                                   : topo.original_ids[static_cast<std::size_t>(link)];
}

void write_projection_table(const std::filesystem::path& path, const std::string& row_label,
                            const Eigen::MatrixXd& mat, const Dataset& dataset) {
  auto out = open_output(path);
  out << row_label;
  for (const auto& key : dataset.states.column_index) out << "," << column_tag(key);
  out << "\n";
  for (std::int64_t r = 0; r < mat.rows(); ++r) {
    out << r;
    for (std::int64_t c = 0; c < mat.cols(); ++c) out << "," << format_double(mat(r, c));
    out << "\n";
  }
}

}  // namespace

void write_analyze_outputs(const Dataset& dataset, const PipelineConfig& config,
                           const AnalyzeResult& result) {
  namespace fs = std::filesystem;
  const fs::path& dir = config.output_dir;
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create output dir " + dir.string());

  const auto& topo = dataset.topology;

  {
    auto out = open_output(dir / "M.csv");
    out << "link_id";
    for (int b = 0; b < result.chosen_s; ++b) out << ",b" << b;
    out << "\n";
    for (std::int64_t i = 0; i < result.factorization.basis.rows(); ++i) {
      out << original_id(topo, i);
      for (std::int64_t b = 0; b < result.factorization.basis.cols(); ++b)
        out << "," << format_double(result.factorization.basis(i, b));
      out << "\n";
    }
  }

  write_projection_table(dir / "V.csv", "basis", result.factorization.projections, dataset);

  {
    auto out = open_output(dir / "trace.csv");
    out << "iteration,objective,reconstruction_term,laplacian_term\n";
    for (std::size_t i = 0; i < result.factorization.objective_trace.size(); ++i)
      out << i << "," << format_double(result.factorization.objective_trace[i]) << ","
          << format_double(result.factorization.reconstruction_trace[i]) << ","
          << format_double(result.factorization.laplacian_trace[i]) << "\n";
  }

  if (result.dimension_selection) {
    auto out = open_output(dir / "dimension_selection.csv");
    out << "s,reconstruction_error,recommended\n";
    for (std::size_t i = 0; i < result.dimension_selection->candidates.size(); ++i) {
      const int s = result.dimension_selection->candidates[i];
      out << s << "," << format_double(result.dimension_selection->errors[i]) << ","
          << (s == result.dimension_selection->recommended ? 1 : 0) << "\n";
    }
  }

  if (result.pca)
    write_projection_table(dir / "pca_projections.csv", "component", result.pca_projections,
                           dataset);

  {
    auto out = open_output(dir / "assignments.csv");
    out << "column_index,sequence_id,time_step,cluster\n";
    for (std::size_t c = 0; c < dataset.states.column_index.size(); ++c) {
      const auto& key = dataset.states.column_index[c];
      out << c << "," << key.sequence_id << "," << key.time_step << ","
          << result.assignment.labels[c] << "\n";
    }
  }

  {
    auto out = open_output(dir / "compactness.csv");
    out << "embedding,K,c,variances\n";
    auto write_rows = [&](const char* name,
                          const std::vector<std::pair<int, CompactnessReport>>& rows) {
      for (const auto& [k, report] : rows) {
        out << name << "," << k << "," << format_double(report.compactness) << ",";
        for (std::size_t i = 0; i < report.cluster_variances.size(); ++i)
          out << (i ? ";" : "") << format_double(report.cluster_variances[i]);
        out << "\n";
      }
    };
    write_rows("lpnmf", result.lpnmf_compactness);
    write_rows("pca", result.pca_compactness);
  }

  for (const auto& exemplar : result.exemplars) {
    auto out = open_output(dir / ("exemplar_" + std::to_string(exemplar.cluster) + ".csv"));
    out << "link_id,exemplar_value,congested_flag\n";
    std::vector<bool> congested(static_cast<std::size_t>(exemplar.mean_state.size()), false);
    for (LinkId l : exemplar.congested_links) congested[static_cast<std::size_t>(l)] = true;
    for (std::int64_t i = 0; i < exemplar.mean_state.size(); ++i)
      out << original_id(topo, i) << "," << format_double(exemplar.mean_state(i)) << ","
          << (congested[static_cast<std::size_t>(i)] ? 1 : 0) << "\n";
  }

  {
    auto out = open_output(dir / "basis_importance.csv");
    out << "basis,importance,rank,top_links\n";
    std::vector<int> rank_of(result.basis_report.ranking.size());
    for (std::size_t r = 0; r < result.basis_report.ranking.size(); ++r)
      rank_of[static_cast<std::size_t>(result.basis_report.ranking[r])] = static_cast<int>(r);
    for (std::size_t b = 0; b < result.basis_report.importance.size(); ++b) {
      out << b << "," << format_double(result.basis_report.importance[b]) << "," << rank_of[b]
          << ",";
      const auto& links = result.basis_report.top_links[b];
      for (std::size_t i = 0; i < links.size(); ++i)
        out << (i ? ";" : "") << original_id(topo, links[i]);
      out << "\n";
    }
  }

  {
    auto out = open_output(dir / "trajectory_distances.csv");
    out << "seq_a,seq_b,distance\n";
    const Eigen::MatrixXd dist =
        trajectory_distance_matrix(result.trajectories, config.trajectory.threads);
    for (std::size_t i = 0; i < result.trajectories.size(); ++i)
      for (std::size_t j = i + 1; j < result.trajectories.size(); ++j)
        out << result.trajectories[i].sequence_id << "," << result.trajectories[j].sequence_id
            << ","
            << format_double(dist(static_cast<std::int64_t>(i), static_cast<std::int64_t>(j)))
            << "\n";
  }

  {
    auto out = open_output(dir / "trajectory_clusters.csv");
    out << "sequence_id,cluster,is_medoid\n";
    std::set<int> medoids(result.trajectory_clustering.medoids.begin(),
                          result.trajectory_clustering.medoids.end());
    for (std::size_t i = 0; i < result.trajectories.size(); ++i)
      out << result.trajectories[i].sequence_id << ","
          << result.trajectory_clustering.labels[i] << ","
          << (medoids.count(static_cast<int>(i)) ? 1 : 0) << "\n";
  }

  {
    auto out = open_output(dir / "dynamics_curves.csv");
    out << "cluster,step,mean_index\n";
    for (std::size_t c = 0; c < result.trajectory_clustering.mean_curves.size(); ++c)
      for (std::size_t t = 0; t < result.trajectory_clustering.mean_curves[c].size(); ++t)
        out << c << "," << t << ","
            << format_double(result.trajectory_clustering.mean_curves[c][t]) << "\n";
  }

  json summary;
  summary["chosen_s"] = result.chosen_s;
  summary["chosen_k"] = result.chosen_k;
  summary["lambda"] = config.factorization.lambda;
  summary["seed"] = config.seed;
  summary["deterministic"] = config.deterministic;
  summary["dataset"] = {{"links", dataset.topology.n_links},
                        {"samples", dataset.states.m()},
                        {"sequences", dataset.manifest.sequences.size()}};
  summary["similarity"] = {{"delta", result.graph.delta},
                           {"sparsified", result.graph.sparsified},
                           {"edges", result.graph.weights.nonZeros() / 2}};
  summary["factorization"] = {
      {"iters", result.factorization.iters_run},
      {"converged", result.factorization.converged},
      {"objective", result.factorization.objective_trace.back()},
      {"reconstruction_error",
       std::sqrt(std::max(result.factorization.reconstruction_trace.back(), 0.0))}};
  if (result.dimension_selection) {
    summary["dimension_selection"] = {
        {"candidates", result.dimension_selection->candidates},
        {"errors", result.dimension_selection->errors},
        {"recommended", result.dimension_selection->recommended}};
  }
  json compact;
  for (const auto& [k, report] : result.lpnmf_compactness)
    compact["lpnmf"][std::to_string(k)] = report.compactness;
  for (const auto& [k, report] : result.pca_compactness)
    compact["pca"][std::to_string(k)] = report.compactness;
  summary["compactness"] = compact;
  summary["purity"] = {{"sample_peak", result.peak_purity},
                       {"trajectory", result.trajectory_purity}};
  summary["peak_window"] = {{"start", config.peak_start}, {"end", config.peak_end}};
  json congested_counts = json::array();
  for (const auto& exemplar : result.exemplars)
    congested_counts.push_back(exemplar.congested_links.size());
  summary["exemplar_congested_link_counts"] = congested_counts;

  auto out = open_output(dir / "summary.json");
  out << summary.dump(2) << "\n";
}

void run_generate(const PipelineConfig& config, bool force) {
  namespace fs = std::filesystem;
  const fs::path target = config.dataset_dir;
  if (fs::exists(target)) {
    if (!fs::is_directory(target))
      throw IoError("dataset path " + target.string() + " exists and is not a directory");
    if (!fs::is_empty(target) && !force)
      throw ConfigError("dataset dir " + target.string() +
                        " is not empty; pass --force to overwrite");
  }

  const Dataset dataset = generate_dataset(config.generator);

  // Stage into a sibling temp dir, then swap in, so a failed run never leaves
  // a partial dataset behind.
  const fs::path parent = target.has_parent_path() ? target.parent_path() : fs::path(".");
  std::error_code ec;
  fs::create_directories(parent, ec);
  const fs::path staging =
      parent / (".tmp-" + target.filename().string() + "-" + std::to_string(::getpid()));
  fs::remove_all(staging, ec);
  try {
    write_dataset(dataset, staging);
    if (fs::exists(target)) fs::remove_all(target);
    fs::rename(staging, target);
  } catch (...) {
    fs::remove_all(staging, ec);
    throw;
  }
}

void run_export_viz(const Dataset& dataset, const PipelineConfig& config) {
  namespace fs = std::filesystem;
  const fs::path dir = config.output_dir;
  const fs::path assignments_path = dir / "assignments.csv";
  const fs::path traj_path = dir / "trajectory_clusters.csv";
  if (!fs::exists(assignments_path) || !fs::exists(traj_path))
    throw DataError("export-viz: analysis outputs missing in " + dir.string() +
                    " (run analyze first)");

  // Re-load the cluster tables written by analyze.
  std::vector<int> sample_cluster(static_cast<std::size_t>(dataset.states.m()), -1);
  {
    CsvReader reader(assignments_path);
    std::vector<std::string> fields;
    if (!reader.next(fields) || fields.size() != 4) reader.fail("bad assignments header");
    while (reader.next(fields)) {
      if (fields.size() != 4) reader.fail("expected 4 fields");
      const auto col = static_cast<std::size_t>(reader.parse_int(fields[0]));
      if (col >= sample_cluster.size()) reader.fail("column index out of range");
      sample_cluster[col] = static_cast<int>(reader.parse_int(fields[3]));
    }
  }
  std::map<std::string, int> seq_cluster;
  {
    CsvReader reader(traj_path);
    std::vector<std::string> fields;
    if (!reader.next(fields) || fields.size() != 3) reader.fail("bad trajectory header");
    while (reader.next(fields)) {
      if (fields.size() != 3) reader.fail("expected 3 fields");
      seq_cluster[fields[0]] = static_cast<int>(reader.parse_int(fields[1]));
    }
  }

  const PcaModel pca3 = fit_pca(dataset.states.values, 3);
  const Eigen::MatrixXd coords = pca_project(pca3, dataset.states.values);
  const std::vector<int> scenarios = column_scenarios(dataset);
  static const char* kScenarioNames[] = {"ITD", "ATD", "ETD"};

  {
    auto out = open_output(dir / "viz_samples.csv");
    out << "column_index,sequence_id,time_step,pc1,pc2,pc3,cluster,scenario\n";
    for (std::int64_t c = 0; c < dataset.states.m(); ++c) {
      const auto& key = dataset.states.column_index[static_cast<std::size_t>(c)];
      out << c << "," << key.sequence_id << "," << key.time_step << ","
          << format_double(coords(0, c)) << "," << format_double(coords(1, c)) << ","
          << format_double(coords(2, c)) << ","
          << sample_cluster[static_cast<std::size_t>(c)] << ","
          << kScenarioNames[scenarios[static_cast<std::size_t>(c)]] << "\n";
    }
  }
  {
    auto out = open_output(dir / "viz_trajectories.csv");
    out << "sequence_id,step,pc1,pc2,pc3,trajectory_cluster,scenario\n";
    for (const auto& seq : dataset.manifest.sequences) {
      auto [start, count] = dataset.states.sequence_span(seq.id);
      auto it = seq_cluster.find(seq.id);
      const int cluster = it == seq_cluster.end() ? -1 : it->second;
      for (std::int64_t t = 0; t < count; ++t)
        out << seq.id << "," << t << "," << format_double(coords(0, start + t)) << ","
            << format_double(coords(1, start + t)) << ","
            << format_double(coords(2, start + t)) << "," << cluster << ","
            << to_string(seq.scenario) << "\n";
    }
  }
}

}  // namespace netstate
