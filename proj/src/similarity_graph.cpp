#include "netstate/similarity_graph.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <numeric>

#include "netstate/csv.hpp"
#include "netstate/parallel.hpp"

namespace netstate {

namespace {

constexpr double kWeightSumTol = 1e-12;

// Flat index of pair (i, j), i < j, in the packed upper triangle.
inline std::size_t pair_index(std::size_t i, std::size_t j, std::size_t m) {
  return i * m - i * (i + 1) / 2 + (j - i - 1);
}

}  // namespace

NeighborWeights NeighborWeights::uniform(const NetworkTopology& topology, double self_weight) {
  if (!(self_weight > 0.0) || !(self_weight < 1.0))
    throw ConfigError("neighbor weights: self weight must lie in (0,1)");
  NeighborWeights w;
  const auto n = static_cast<std::size_t>(topology.n_links);
  w.self.resize(n);
  w.upstream.resize(n);
  w.downstream.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t deg = topology.upstream[i].size() + topology.downstream[i].size();
    double self = self_weight;
    if (deg == 0) {
      self = 1.0;
    } else if ((1.0 - self) / static_cast<double>(deg) >= self) {
      // One neighbor at self_weight=0.5 would tie; keep self strictly largest.
      self = (1.0 + 1.0 / static_cast<double>(deg)) * 0.5 + 0.05;
      self = std::min(self, 0.9);
    }
    const double share = deg ? (1.0 - self) / static_cast<double>(deg) : 0.0;
    w.self[i] = self;
    w.upstream[i].assign(topology.upstream[i].size(), share);
    w.downstream[i].assign(topology.downstream[i].size(), share);
  }
  w.validate(topology);
  return w;
}

void NeighborWeights::validate(const NetworkTopology& topology) const {
  const auto n = static_cast<std::size_t>(topology.n_links);
  if (self.size() != n || upstream.size() != n || downstream.size() != n)
    throw DataError("neighbor weights: size does not match topology");
  for (std::size_t i = 0; i < n; ++i) {
    if (upstream[i].size() != topology.upstream[i].size() ||
        downstream[i].size() != topology.downstream[i].size())
      throw DataError("neighbor weights: neighbor count mismatch at link " + std::to_string(i));
    double sum = self[i];
    double max_neighbor = 0.0;
    for (double v : upstream[i]) {
      sum += v;
      max_neighbor = std::max(max_neighbor, v);
      if (v < 0.0) throw DataError("neighbor weights: negative weight");
    }
    for (double v : downstream[i]) {
      sum += v;
      max_neighbor = std::max(max_neighbor, v);
      if (v < 0.0) throw DataError("neighbor weights: negative weight");
    }
    if (self[i] < 0.0) throw DataError("neighbor weights: negative self weight");
    if (std::abs(sum - 1.0) > kWeightSumTol)
      throw DataError("neighbor weights: weights of link " + std::to_string(i) +
                      " sum to " + format_double(sum) + ", expected 1");
    if (!(self[i] > max_neighbor))
      throw DataError("neighbor weights: self weight of link " + std::to_string(i) +
                      " is not the strict maximum");
  }
}

void SimilarityConfig::validate(std::int64_t m) const {
  if (delta && !(*delta > 0.0)) throw ConfigError("similarity: delta must be positive");
  if (knn && (*knn < 1 || *knn > m - 1))
    throw ConfigError("similarity: knn must lie in [1, m-1]");
}

Eigen::MatrixXd SimilarityGraph::dense_similarity() const {
  Eigen::MatrixXd w = Eigen::MatrixXd(weights);
  w.diagonal().setOnes();
  return w;
}

Eigen::VectorXd linkwise_difference(const Eigen::VectorXd& state_a,
                                    const Eigen::VectorXd& state_b) {
  if (state_a.size() != state_b.size())
    throw DataError("linkwise difference: state lengths differ (" +
                    std::to_string(state_a.size()) + " vs " + std::to_string(state_b.size()) +
                    ")");
  return (state_a - state_b).cwiseAbs();
}

Eigen::VectorXd local_variation(const Eigen::VectorXd& diff, const NetworkTopology& topology,
                                const NeighborWeights& weights) {
  if (diff.size() != topology.n_links)
    throw DataError("local variation: difference length does not match topology");
  weights.validate(topology);
  Eigen::VectorXd v(topology.n_links);
  for (std::int32_t i = 0; i < topology.n_links; ++i) {
    const auto ui = static_cast<std::size_t>(i);
    double acc = weights.self[ui] * diff(i);
    for (std::size_t k = 0; k < topology.upstream[ui].size(); ++k)
      acc += weights.upstream[ui][k] * diff(topology.upstream[ui][k]);
    for (std::size_t k = 0; k < topology.downstream[ui].size(); ++k)
      acc += weights.downstream[ui][k] * diff(topology.downstream[ui][k]);
    v(i) = acc;
  }
  return v;
}

namespace {

// Column sums of the neighborhood weight matrix. Aggregating the local
// variation over links collapses to a weighted L1 distance:
//   agg_i v_i = sum_j (sum_i Wtop_ij) |a_j - b_j|,
// which avoids materializing per-link variations for every sample pair.
Eigen::VectorXd fusion_column_sums(const NetworkTopology& topology,
                                   const NeighborWeights& weights) {
  Eigen::VectorXd w = Eigen::VectorXd::Zero(topology.n_links);
  for (std::int32_t i = 0; i < topology.n_links; ++i) {
    const auto ui = static_cast<std::size_t>(i);
    w(i) += weights.self[ui];
    for (std::size_t k = 0; k < topology.upstream[ui].size(); ++k)
      w(topology.upstream[ui][k]) += weights.upstream[ui][k];
    for (std::size_t k = 0; k < topology.downstream[ui].size(); ++k)
      w(topology.downstream[ui][k]) += weights.downstream[ui][k];
  }
  return w;
}

void assemble_degrees_laplacian(SimilarityGraph& graph) {
  const std::int64_t m = graph.weights.rows();
  graph.degrees = graph.weights * Eigen::VectorXd::Ones(m);
  Eigen::SparseMatrix<double> d(m, m);
  d.reserve(Eigen::VectorXi::Constant(static_cast<int>(m), 1));
  for (std::int64_t i = 0; i < m; ++i) d.insert(i, i) = graph.degrees(i);
  graph.laplacian = d - graph.weights;
  graph.laplacian.makeCompressed();
}

}  // namespace

SimilarityGraph graph_from_similarity(const Eigen::MatrixXd& similarity) {
  if (similarity.rows() != similarity.cols())
    throw DataError("similarity graph: matrix must be square");
  const std::int64_t m = similarity.rows();
  std::vector<Eigen::Triplet<double>> triplets;
  for (std::int64_t j = 0; j < m; ++j)
    for (std::int64_t i = 0; i < m; ++i)
      if (i != j && similarity(i, j) != 0.0)
        triplets.emplace_back(static_cast<int>(i), static_cast<int>(j), similarity(i, j));
  SimilarityGraph graph;
  graph.weights.resize(m, m);
  graph.weights.setFromTriplets(triplets.begin(), triplets.end());
  graph.weights.makeCompressed();
  assemble_degrees_laplacian(graph);
  return graph;
}

SimilarityGraph pairwise_similarity(const TrafficStateMatrix& matrix,
                                    const NetworkTopology& topology,
                                    const NeighborWeights& weights,
                                    const SimilarityConfig& config) {
  const std::int64_t m = matrix.m();
  if (m < 2) throw DataError("pairwise similarity: need at least 2 samples");
  if (matrix.n() != topology.n_links)
    throw DataError("pairwise similarity: matrix rows do not match topology");
  config.validate(m);
  weights.validate(topology);

  const Eigen::VectorXd fusion = fusion_column_sums(topology, weights);
  const double scale =
      config.aggregation == VariationAggregation::kMean ? 1.0 / static_cast<double>(matrix.n()) : 1.0;

  const auto um = static_cast<std::size_t>(m);
  std::vector<double> variation(um * (um - 1) / 2);
  const auto& X = matrix.values;
  parallel_for(um - 1, config.threads, [&](std::size_t i) {
    const auto col_i = X.col(static_cast<std::int64_t>(i));
    double* out = variation.data() + pair_index(i, i + 1, um);
    for (std::size_t j = i + 1; j < um; ++j, ++out)
      *out = scale * (col_i - X.col(static_cast<std::int64_t>(j))).cwiseAbs().dot(fusion);
  });

  // nth_element reorders its input, so on the dense path the median works on
  // a copy; the knn path extracts its candidates first and then lets the
  // median consume the buffer.
  auto median_heuristic = [](std::vector<double>& values) {
    auto mid = values.begin() + static_cast<std::ptrdiff_t>(values.size() / 2);
    std::nth_element(values.begin(), mid, values.end());
    return std::max(*mid, 1e-12) / std::sqrt(2.0);
  };

  std::optional<int> effective_knn = config.knn;
  if (!effective_knn && config.auto_sparsify && m > 500) effective_knn = 10;

  SimilarityGraph graph;
  graph.sparsified = effective_knn.has_value();
  double delta = config.delta.value_or(0.0);

  if (effective_knn) {
    const int k = *effective_knn;
    // Smallest variation == largest similarity, independent of delta, so the
    // neighbor selection can run before the bandwidth is known.
    std::vector<std::vector<std::pair<std::size_t, double>>> row_candidates(um);
    parallel_for(um, config.threads, [&](std::size_t i) {
      std::vector<std::pair<double, std::size_t>> row;
      row.reserve(um - 1);
      for (std::size_t j = 0; j < um; ++j) {
        if (j == i) continue;
        const double v = i < j ? variation[pair_index(i, j, um)]
                               : variation[pair_index(j, i, um)];
        row.emplace_back(v, j);
      }
      const auto kth = row.begin() + std::min<std::ptrdiff_t>(k, static_cast<std::ptrdiff_t>(row.size()));
      std::partial_sort(row.begin(), kth, row.end());
      row_candidates[i].reserve(static_cast<std::size_t>(kth - row.begin()));
      for (auto it = row.begin(); it != kth; ++it)
        row_candidates[i].emplace_back(it->second, it->first);
    });
    if (!config.delta) delta = median_heuristic(variation);
    const double inv = 1.0 / (2.0 * delta * delta);
    std::vector<Eigen::Triplet<double>> triplets;
    triplets.reserve(um * static_cast<std::size_t>(k) * 2);
    for (std::size_t i = 0; i < um; ++i) {
      for (const auto& [j, v] : row_candidates[i]) {
        const double s = std::exp(-v * inv);
        triplets.emplace_back(static_cast<int>(i), static_cast<int>(j), s);
        triplets.emplace_back(static_cast<int>(j), static_cast<int>(i), s);
      }
    }
    graph.weights.resize(m, m);
    // Duplicates collapse via max: symmetrization keeps an edge if either
    // endpoint selected it.
    graph.weights.setFromTriplets(triplets.begin(), triplets.end(),
                                  [](double a, double b) { return std::max(a, b); });
    graph.weights.makeCompressed();
  } else {
    if (!config.delta) {
      std::vector<double> scratch = variation;
      delta = median_heuristic(scratch);
    }
    const double inv = 1.0 / (2.0 * delta * delta);
    std::vector<Eigen::Triplet<double>> triplets;
    triplets.reserve(um * (um - 1));
    for (std::size_t i = 0; i + 1 < um; ++i) {
      const double* v = variation.data() + pair_index(i, i + 1, um);
      for (std::size_t j = i + 1; j < um; ++j, ++v) {
        const double s = std::exp(-*v * inv);
        triplets.emplace_back(static_cast<int>(i), static_cast<int>(j), s);
        triplets.emplace_back(static_cast<int>(j), static_cast<int>(i), s);
      }
    }
    graph.weights.resize(m, m);
    graph.weights.setFromTriplets(triplets.begin(), triplets.end());
    graph.weights.makeCompressed();
  }

  graph.delta = delta;
  assemble_degrees_laplacian(graph);
  return graph;
}

double laplacian_quadratic(const Eigen::MatrixXd& projections,
                           const Eigen::SparseMatrix<double>& laplacian) {
  if (projections.cols() != laplacian.rows() || laplacian.rows() != laplacian.cols())
    throw DataError("laplacian quadratic: shape mismatch (V is " +
                    std::to_string(projections.rows()) + "x" + std::to_string(projections.cols()) +
                    ", L is " + std::to_string(laplacian.rows()) + "x" +
                    std::to_string(laplacian.cols()) + ")");
  return (projections * laplacian).cwiseProduct(projections).sum();
}

std::uint64_t similarity_content_hash(const TrafficStateMatrix& matrix,
                                      const NetworkTopology& topology,
                                      const NeighborWeights& weights,
                                      const SimilarityConfig& config) {
  std::uint64_t h = 0xcbf29ce484222325ULL;  // FNV-1a over 64-bit words
  auto mix = [&h](std::uint64_t v) {
    h ^= v;
    h *= 0x100000001b3ULL;
  };
  auto mix_double = [&](double v) {
    std::uint64_t bits;
    static_assert(sizeof(bits) == sizeof(v));
    std::memcpy(&bits, &v, sizeof(bits));
    mix(bits);
  };
  mix(static_cast<std::uint64_t>(matrix.values.rows()));
  mix(static_cast<std::uint64_t>(matrix.values.cols()));
  const double* data = matrix.values.data();
  for (std::int64_t i = 0; i < matrix.values.size(); ++i) mix_double(data[i]);
  for (std::int32_t i = 0; i < topology.n_links; ++i) {
    const auto ui = static_cast<std::size_t>(i);
    mix(static_cast<std::uint64_t>(topology.upstream[ui].size()));
    for (LinkId j : topology.upstream[ui]) mix(static_cast<std::uint64_t>(j));
    mix(static_cast<std::uint64_t>(topology.downstream[ui].size()));
    for (LinkId j : topology.downstream[ui]) mix(static_cast<std::uint64_t>(j));
    mix_double(weights.self[ui]);
    for (double v : weights.upstream[ui]) mix_double(v);
    for (double v : weights.downstream[ui]) mix_double(v);
  }
  mix_double(config.delta.value_or(-1.0));
  mix(static_cast<std::uint64_t>(config.knn.value_or(-1)));
  mix(config.auto_sparsify ? 1 : 0);
  mix(config.aggregation == VariationAggregation::kMean ? 0 : 1);
  return h;
}

void save_similarity_cache(const std::filesystem::path& path, const SimilarityGraph& graph,
                           std::uint64_t content_hash) {
  auto out = open_output(path);
  out << "# netstate similarity cache v1\n";
  out << "hash," << content_hash << "\n";
  out << "m," << graph.m() << "\n";
  out << "delta," << format_double(graph.delta) << "\n";
  out << "sparsified," << (graph.sparsified ? 1 : 0) << "\n";
  out << "i,j,value\n";
  for (int col = 0; col < graph.weights.outerSize(); ++col) {
    for (Eigen::SparseMatrix<double>::InnerIterator it(graph.weights, col); it; ++it) {
      if (it.row() < it.col())
        out << it.row() << "," << it.col() << "," << format_double(it.value()) << "\n";
    }
  }
}

std::optional<SimilarityGraph> load_similarity_cache(const std::filesystem::path& path,
                                                     std::uint64_t expected_hash) {
  if (!std::filesystem::exists(path)) return std::nullopt;
  std::ifstream in(path);
  if (!in) return std::nullopt;
  std::string line;
  if (!std::getline(in, line) || line.rfind("# netstate similarity cache", 0) != 0)
    return std::nullopt;

  auto read_kv = [&](const std::string& key) -> std::optional<std::string> {
    if (!std::getline(in, line)) return std::nullopt;
    auto fields = split_fields(line, ',');
    if (fields.size() != 2 || fields[0] != key) return std::nullopt;
    return fields[1];
  };
  auto hash_s = read_kv("hash");
  if (!hash_s || std::stoull(*hash_s) != expected_hash) return std::nullopt;
  auto m_s = read_kv("m");
  auto delta_s = read_kv("delta");
  auto sparse_s = read_kv("sparsified");
  if (!m_s || !delta_s || !sparse_s) return std::nullopt;
  if (!std::getline(in, line) || line != "i,j,value") return std::nullopt;

  const std::int64_t m = std::stoll(*m_s);
  std::vector<Eigen::Triplet<double>> triplets;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    auto fields = split_fields(line, ',');
    if (fields.size() != 3) return std::nullopt;
    const int i = std::stoi(fields[0]);
    const int j = std::stoi(fields[1]);
    const double v = std::stod(fields[2]);
    triplets.emplace_back(i, j, v);
    triplets.emplace_back(j, i, v);
  }
  SimilarityGraph graph;
  graph.weights.resize(m, m);
  graph.weights.setFromTriplets(triplets.begin(), triplets.end());
  graph.weights.makeCompressed();
  graph.delta = std::stod(*delta_s);
  graph.sparsified = *sparse_s == "1";
  assemble_degrees_laplacian(graph);
  return graph;
}

}  // namespace netstate
