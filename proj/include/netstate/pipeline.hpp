#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "netstate/clustering.hpp"
#include "netstate/factorization.hpp"
#include "netstate/pca_baseline.hpp"
#include "netstate/scenario_generator.hpp"
#include "netstate/similarity_graph.hpp"
#include "netstate/trajectory_analysis.hpp"

namespace netstate {

// One config file drives every stage. Sections: [dataset], [output],
// [pipeline], [generator], [similarity], [factorization], [clustering],
// [pca], [trajectory]. Command-line flags override file values.
struct PipelineConfig {
  std::filesystem::path dataset_dir = "dataset";
  std::filesystem::path output_dir = "out";

  std::uint64_t seed = 42;  // master seed; stages derive sub-seeds from it
  bool deterministic = false;
  int peak_start = 18;  // peak-hour window (0-based, inclusive)
  int peak_end = 40;

  GeneratorConfig generator;

  double self_weight = 0.5;
  SimilarityConfig similarity;
  bool cache_similarity = false;

  FactorizationConfig factorization;
  std::vector<int> candidate_s;
  double s_drop_threshold = 0.20;

  ClusteringConfig clustering;
  std::vector<int> candidate_k;
  double k_improvement_threshold = 0.05;
  bool normalize_embedding = false;

  bool pca_enabled = true;
  int pca_components = 15;

  int trajectory_k = 3;
  TrajectoryConfig trajectory;

  // Derives per-stage seeds from the master seed (explicit section seeds
  // win) and applies the deterministic-mode thread pinning. Call once after
  // all overrides are in place.
  void finalize();

  // Explicit per-section seeds read from the config file, if any.
  std::optional<std::uint64_t> generator_seed;
  std::optional<std::uint64_t> factorization_seed;
  std::optional<std::uint64_t> clustering_seed;
  std::optional<std::uint64_t> trajectory_seed;
};

PipelineConfig load_pipeline_config(const std::filesystem::path& path);

struct AnalyzeResult {
  int chosen_s = 0;
  int chosen_k = 0;
  SimilarityGraph graph;
  FactorizationResult factorization;
  std::optional<DimensionSelection> dimension_selection;
  std::optional<PcaModel> pca;
  Eigen::MatrixXd pca_projections;
  ClusterAssignment assignment;
  std::vector<std::pair<int, CompactnessReport>> lpnmf_compactness;  // per K
  std::vector<std::pair<int, CompactnessReport>> pca_compactness;
  std::vector<ClusterExemplar> exemplars;
  BasisImportanceReport basis_report;
  std::vector<Trajectory> trajectories;
  TrajectoryClustering trajectory_clustering;
  double peak_purity = 0.0;
  double trajectory_purity = 0.0;
};

// Full analysis pass: similarity graph, LPNMF (with optional dimension
// selection), PCA baseline, K selection + clustering + exemplars + basis
// report, trajectory clustering and dynamics curves.
AnalyzeResult run_analyze(const Dataset& dataset, const PipelineConfig& config);

// Writes the analysis artifact bundle (CSV tables plus summary.json) into
// config.output_dir.
void write_analyze_outputs(const Dataset& dataset, const PipelineConfig& config,
                           const AnalyzeResult& result);

// Generates the synthetic dataset into config.dataset_dir. Refuses to touch a
// non-empty directory unless force is set; the directory appears atomically.
void run_generate(const PipelineConfig& config, bool force);

// Emits plot-ready tables (3-D PCA sample coordinates with cluster/scenario
// labels, and trajectory polylines) from a finished analysis bundle.
void run_export_viz(const Dataset& dataset, const PipelineConfig& config);

// Scenario label of each column's sequence, as dense class ids (ITD=0,
// ATD=1, ETD=2).
std::vector<int> column_scenarios(const Dataset& dataset);

// Column positions whose time step falls inside [peak_start, peak_end].
std::vector<std::int64_t> peak_columns(const Dataset& dataset, int peak_start, int peak_end);

}  // namespace netstate
