// netstate: spatial congestion patterns and temporal regimes from
// network-level traffic-state matrices.
//
// Subcommands: generate, analyze, export-viz, select-dim, select-k.
// Exit codes: 0 ok, 2 config error, 3 data error, 4 numerical failure, 5 I/O.

#include <cstdio>
#include <exception>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "netstate/csv.hpp"
#include "netstate/pipeline.hpp"

namespace {

using namespace netstate;

struct Overrides {
  std::optional<std::string> config_path;
  std::optional<std::string> out_dir;
  std::optional<std::uint64_t> seed;
  std::optional<double> lambda;
  std::optional<int> s;
  std::optional<int> k;
  bool force = false;
  bool deterministic = false;
};

PipelineConfig resolve_config(const Overrides& ov, bool out_is_dataset) {
  PipelineConfig cfg;
  if (ov.config_path) cfg = load_pipeline_config(*ov.config_path);
  if (ov.out_dir) {
    if (out_is_dataset)
      cfg.dataset_dir = *ov.out_dir;
    else
      cfg.output_dir = *ov.out_dir;
  }
  if (ov.seed) cfg.seed = *ov.seed;
  if (ov.lambda) cfg.factorization.lambda = *ov.lambda;
  if (ov.s) cfg.factorization.s = *ov.s;
  if (ov.k) cfg.clustering.k = *ov.k;
  if (ov.deterministic) cfg.deterministic = true;
  cfg.finalize();
  return cfg;
}

Dataset load_configured_dataset(const PipelineConfig& cfg) {
  return load_dataset(cfg.dataset_dir, cfg.dataset_dir / "manifest.json",
                      cfg.dataset_dir / "topology.csv");
}

void add_common_flags(CLI::App* cmd, Overrides& ov) {
  cmd->add_option("--config", ov.config_path, "pipeline config file (sectioned key=value)");
  cmd->add_option("--out", ov.out_dir, "output directory");
  cmd->add_option("--seed", ov.seed, "master seed override");
  cmd->add_flag("--deterministic", ov.deterministic,
                "single-threaded, bit-reproducible mode");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"network-level traffic state pattern extraction"};
  app.require_subcommand(1);

  Overrides ov;

  auto* generate = app.add_subcommand("generate", "write a synthetic dataset");
  add_common_flags(generate, ov);
  generate->add_flag("--force", ov.force, "overwrite a non-empty dataset directory");

  auto* analyze = app.add_subcommand("analyze", "run the full analysis pipeline");
  add_common_flags(analyze, ov);
  analyze->add_option("--lambda", ov.lambda, "locality-preserving regularization weight");
  analyze->add_option("--s", ov.s, "projection dimension");
  analyze->add_option("--k", ov.k, "cluster count");

  auto* export_viz = app.add_subcommand("export-viz", "emit plot-ready coordinate tables");
  add_common_flags(export_viz, ov);

  auto* select_dim = app.add_subcommand("select-dim", "reconstruction-error curve over candidate dimensions");
  add_common_flags(select_dim, ov);
  select_dim->add_option("--lambda", ov.lambda, "locality-preserving regularization weight");

  auto* select_k_cmd = app.add_subcommand("select-k", "compactness curve over candidate cluster counts");
  add_common_flags(select_k_cmd, ov);
  select_k_cmd->add_option("--lambda", ov.lambda, "locality-preserving regularization weight");
  select_k_cmd->add_option("--s", ov.s, "projection dimension");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (generate->parsed()) {
      PipelineConfig cfg = resolve_config(ov, /*out_is_dataset=*/true);
      run_generate(cfg, ov.force);
      std::cout << "dataset written to " << cfg.dataset_dir.string() << "\n";
    } else if (analyze->parsed()) {
      PipelineConfig cfg = resolve_config(ov, false);
      const Dataset dataset = load_configured_dataset(cfg);
      const AnalyzeResult result = run_analyze(dataset, cfg);
      write_analyze_outputs(dataset, cfg, result);
      std::cout << "analysis written to " << cfg.output_dir.string() << " (s=" << result.chosen_s
                << ", K=" << result.chosen_k << ", peak purity=" << result.peak_purity
                << ", trajectory purity=" << result.trajectory_purity << ")\n";
    } else if (export_viz->parsed()) {
      PipelineConfig cfg = resolve_config(ov, false);
      const Dataset dataset = load_configured_dataset(cfg);
      run_export_viz(dataset, cfg);
      std::cout << "viz tables written to " << cfg.output_dir.string() << "\n";
    } else if (select_dim->parsed()) {
      PipelineConfig cfg = resolve_config(ov, false);
      if (cfg.candidate_s.empty())
        throw ConfigError("select-dim: candidate_s missing from [factorization] config");
      const Dataset dataset = load_configured_dataset(cfg);
      const NeighborWeights weights =
          NeighborWeights::uniform(dataset.topology, cfg.self_weight);
      const SimilarityGraph graph =
          pairwise_similarity(dataset.states, dataset.topology, weights, cfg.similarity);
      const DimensionSelection sel =
          select_dimension(dataset.states.values, &graph, cfg.candidate_s, cfg.factorization,
                           cfg.s_drop_threshold);
      std::filesystem::create_directories(cfg.output_dir);
      auto out = open_output(cfg.output_dir / "dimension_selection.csv");
      out << "s,reconstruction_error,recommended\n";
      for (std::size_t i = 0; i < sel.candidates.size(); ++i)
        out << sel.candidates[i] << "," << format_double(sel.errors[i]) << ","
            << (sel.candidates[i] == sel.recommended ? 1 : 0) << "\n";
      std::cout << "recommended s = " << sel.recommended << "\n";
    } else if (select_k_cmd->parsed()) {
      PipelineConfig cfg = resolve_config(ov, false);
      if (cfg.candidate_k.empty())
        throw ConfigError("select-k: candidate_k missing from [clustering] config");
      const Dataset dataset = load_configured_dataset(cfg);
      const NeighborWeights weights =
          NeighborWeights::uniform(dataset.topology, cfg.self_weight);
      const SimilarityGraph graph =
          pairwise_similarity(dataset.states, dataset.topology, weights, cfg.similarity);
      const FactorizationResult fact = factorize(
          dataset.states.values, cfg.factorization.lambda > 0 ? &graph : nullptr,
          cfg.factorization);
      const KSelection sel = select_k(dataset.states.values, fact.projections, cfg.candidate_k,
                                      cfg.clustering, cfg.k_improvement_threshold);
      std::filesystem::create_directories(cfg.output_dir);
      auto out = open_output(cfg.output_dir / "compactness.csv");
      out << "embedding,K,c,variances\n";
      for (std::size_t i = 0; i < sel.candidates.size(); ++i) {
        out << "lpnmf," << sel.candidates[i] << ","
            << format_double(sel.reports[i].compactness) << ",";
        for (std::size_t v = 0; v < sel.reports[i].cluster_variances.size(); ++v)
          out << (v ? ";" : "") << format_double(sel.reports[i].cluster_variances[v]);
        out << "\n";
      }
      std::cout << "recommended K = " << sel.recommended << "\n";
    }
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 3;
  } catch (const NumericalError& e) {
    std::cerr << "numerical error: " << e.what() << "\n";
    return 4;
  } catch (const IoError& e) {
    std::cerr << "io error: " << e.what() << "\n";
    return 5;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
