#pragma once

#include <Eigen/Core>
#include <filesystem>
#include <string>

#include "netstate/rng.hpp"
#include "netstate/similarity_graph.hpp"
#include "netstate/traffic_domain.hpp"

namespace netstate::test {

// Temp directory that cleans up after itself.
struct TempDir {
  std::filesystem::path path;
  explicit TempDir(const std::string& tag) {
    path = std::filesystem::temp_directory_path() /
           ("netstate-" + tag + "-" + std::to_string(::getpid()));
    std::filesystem::remove_all(path);
    std::filesystem::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path, ec);
  }
};

inline Eigen::MatrixXd random_matrix(std::int64_t rows, std::int64_t cols, Rng& rng,
                                     double lo = 0.0, double hi = 1.0) {
  Eigen::MatrixXd m(rows, cols);
  for (std::int64_t j = 0; j < cols; ++j)
    for (std::int64_t i = 0; i < rows; ++i) m(i, j) = rng.uniform(lo, hi);
  return m;
}

// Random symmetric similarity matrix with entries in (0,1); the diagonal is
// ignored by graph assembly.
inline SimilarityGraph random_graph(std::int64_t m, Rng& rng) {
  Eigen::MatrixXd w(m, m);
  for (std::int64_t i = 0; i < m; ++i) {
    w(i, i) = 0.0;
    for (std::int64_t j = i + 1; j < m; ++j) w(i, j) = w(j, i) = rng.uniform(0.001, 1.0);
  }
  return graph_from_similarity(w);
}

// Independent oracle for Tr(V L V^T): 1/2 sum_ij W_ij ||V_:,i - V_:,j||^2
// over the full similarity matrix (diagonal terms vanish).
inline double pairwise_laplacian_form(const Eigen::MatrixXd& projections,
                                      const Eigen::MatrixXd& similarity) {
  double acc = 0.0;
  for (std::int64_t i = 0; i < similarity.rows(); ++i)
    for (std::int64_t j = 0; j < similarity.cols(); ++j) {
      if (i == j) continue;
      acc += similarity(i, j) * (projections.col(i) - projections.col(j)).squaredNorm();
    }
  return 0.5 * acc;
}

// Topology where every link is isolated: local variation degenerates to the
// plain link-wise difference.
inline NetworkTopology isolated_topology(std::int32_t n_links) {
  NetworkTopology topo;
  topo.n_links = n_links;
  topo.upstream.resize(static_cast<std::size_t>(n_links));
  topo.downstream.resize(static_cast<std::size_t>(n_links));
  return topo;
}

// Chain topology 0 -> 1 -> ... -> n-1 (upstream = previous, downstream = next).
inline NetworkTopology chain_topology(std::int32_t n_links) {
  NetworkTopology topo = isolated_topology(n_links);
  for (std::int32_t i = 0; i < n_links; ++i) {
    if (i > 0) topo.upstream[static_cast<std::size_t>(i)].push_back(i - 1);
    if (i + 1 < n_links) topo.downstream[static_cast<std::size_t>(i)].push_back(i + 1);
  }
  return topo;
}

// Minimal valid matrix wrapper around raw values; one synthetic sequence per
// `steps` block.
inline TrafficStateMatrix wrap_states(const Eigen::MatrixXd& values, int steps) {
  TrafficStateMatrix m;
  m.values = values;
  const auto n_seq = values.cols() / steps;
  for (std::int64_t s = 0; s < n_seq; ++s)
    for (int t = 0; t < steps; ++t)
      m.column_index.push_back({"seq_" + std::to_string(s), t});
  return m;
}

}  // namespace netstate::test
