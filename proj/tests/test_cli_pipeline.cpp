// End-to-end CLI checks: generate -> analyze -> export-viz on a small
// dataset, plus flag/exit-code behavior. The CLI binary path arrives as
// argv[1].

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace fs = std::filesystem;

namespace {

int g_failures = 0;

void check(bool ok, const std::string& what) {
  std::printf("%s %s\n", ok ? "[ok]" : "[FAIL]", what.c_str());
  if (!ok) ++g_failures;
}

int run(const std::string& cmd) {
  const int status = std::system((cmd + " > /dev/null 2>&1").c_str());
  return WEXITSTATUS(status);
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream out;
  out << in.rdbuf();
  return out.str();
}

int count_lines(const fs::path& path) {
  std::ifstream in(path);
  int n = 0;
  std::string line;
  while (std::getline(in, line))
    if (!line.empty()) ++n;
  return n;
}

}  // namespace

int main(int argc, char** argv) {
  if (argc < 2) {
    std::fprintf(stderr, "usage: %s <netstate-binary>\n", argv[0]);
    return 2;
  }
  const std::string bin = argv[1];
  const fs::path root = fs::temp_directory_path() / ("netstate-cli-" + std::to_string(::getpid()));
  fs::remove_all(root);
  fs::create_directories(root);

  const fs::path config_path = root / "pipeline.cfg";
  {
    std::ofstream cfg(config_path);
    cfg << "[dataset]\n"
           "dir = " << (root / "data").string() << "\n"
           "[output]\n"
           "dir = " << (root / "out").string() << "\n"
           "[pipeline]\n"
           "seed = 11\n"
           "peak_start = 8\n"
           "peak_end = 16\n"
           "[generator]\n"
           "grid_rows = 6\n"
           "grid_cols = 6\n"
           "n_steps = 24\n"
           "peak_step = 12\n"
           "etd_ramp_steps = 4\n"
           "n_itd = 5\n"
           "n_atd = 7\n"
           "n_etd = 3\n"
           "[factorization]\n"
           "s = 4\n"
           "lambda = 1\n"
           "max_iters = 300\n"
           "[clustering]\n"
           "k = 3\n"
           "candidate_k = 3,4,5\n"
           "[trajectory]\n"
           "k = 3\n";
  }
  const std::string base = bin + " --config " + config_path.string();

  // generate
  check(run(bin + " generate --config " + config_path.string()) == 0, "generate succeeds");
  check(fs::exists(root / "data/topology.csv"), "topology.csv written");
  check(fs::exists(root / "data/manifest.json"), "manifest.json written");
  check(fs::exists(root / "data/ground_truth.csv"), "ground_truth.csv written");
  check(count_lines(root / "data/ground_truth.csv") == 1 + 15, "ground truth rows = sequences");
  int seq_files = 0;
  for (const auto& entry : fs::directory_iterator(root / "data/sequences")) {
    (void)entry;
    ++seq_files;
  }
  check(seq_files == 15, "one state file per sequence");

  // refuses to overwrite without --force
  check(run(bin + " generate --config " + config_path.string()) == 2,
        "generate refuses non-empty dir without --force");
  check(run(bin + " generate --config " + config_path.string() + " --force") == 0,
        "generate --force overwrites");

  // seed override changes bytes deterministically
  const std::string seq0 = read_file(root / "data/sequences/itd_000.csv");
  check(run(bin + " generate --config " + config_path.string() + " --force --seed 12") == 0,
        "generate with --seed");
  const std::string seq0_reseeded = read_file(root / "data/sequences/itd_000.csv");
  check(seq0 != seq0_reseeded, "--seed changes file contents");
  check(run(bin + " generate --config " + config_path.string() + " --force") == 0,
        "regenerate with config seed");
  check(read_file(root / "data/sequences/itd_000.csv") == seq0, "same seed reproduces bytes");

  // analyze
  check(run(bin + " analyze --config " + config_path.string()) == 0, "analyze succeeds");
  for (const char* name :
       {"M.csv", "V.csv", "trace.csv", "pca_projections.csv", "assignments.csv",
        "compactness.csv", "basis_importance.csv", "trajectory_distances.csv",
        "trajectory_clusters.csv", "dynamics_curves.csv", "summary.json", "exemplar_0.csv"})
    check(fs::exists(root / "out" / name), std::string("analyze wrote ") + name);

  {
    nlohmann::json summary;
    std::ifstream in(root / "out/summary.json");
    in >> summary;
    check(summary["chosen_s"].get<int>() == 4, "summary chosen_s");
    check(summary["compactness"]["lpnmf"].contains("3") &&
              summary["compactness"]["lpnmf"].contains("5"),
          "summary has the compactness table");
    check(summary["purity"].contains("sample_peak") && summary["purity"].contains("trajectory"),
          "summary reports purity vs ground truth");
    const int rows = count_lines(root / "out/assignments.csv");
    check(rows == 1 + 15 * 24, "assignments cover every sample");
  }

  // export-viz
  check(run(bin + " export-viz --config " + config_path.string()) == 0, "export-viz succeeds");
  check(fs::exists(root / "out/viz_samples.csv"), "viz_samples.csv written");
  check(fs::exists(root / "out/viz_trajectories.csv"), "viz_trajectories.csv written");
  {
    std::ifstream in(root / "out/viz_samples.csv");
    std::string header;
    std::getline(in, header);
    check(header == "column_index,sequence_id,time_step,pc1,pc2,pc3,cluster,scenario",
          "viz_samples schema");
    check(count_lines(root / "out/viz_samples.csv") == 1 + 15 * 24, "viz_samples row count = m");
  }

  // select-dim / select-k need candidates in the config
  {
    std::ofstream cfg(config_path, std::ios::app);
    cfg << "[factorization]\ncandidate_s = 2,3,4\n";
  }
  check(run(bin + " select-dim --config " + config_path.string()) == 0, "select-dim succeeds");
  check(run(bin + " select-k --config " + config_path.string()) == 0, "select-k succeeds");

  // exit codes: missing dataset -> IoError(5); bad config -> 2; no args -> 2
  check(run(bin + " analyze --config " + config_path.string() + " --out " +
            (root / "out2").string() + " --seed 11") == 0,
        "analyze into a second dir");
  fs::remove_all(root / "data");
  check(run(bin + " analyze --config " + config_path.string()) == 5, "missing dataset exits 5");
  {
    std::ofstream bad(root / "bad.cfg");
    bad << "[nope]\nfoo = 1\n";
  }
  check(run(bin + " analyze --config " + (root / "bad.cfg").string()) == 2,
        "unknown config section exits 2");
  check(run(bin) == 2, "missing subcommand exits 2");
  check(run(bin + " --help") == 0, "--help exits 0");

  fs::remove_all(root);
  if (g_failures) {
    std::printf("%d failure(s)\n", g_failures);
    return 1;
  }
  std::printf("all CLI checks passed\n");
  return 0;
}
