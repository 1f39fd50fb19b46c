#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "netstate/similarity_graph.hpp"
#include "test_helpers.hpp"

using namespace netstate;

namespace {

Eigen::VectorXd vec(std::initializer_list<double> v) {
  Eigen::VectorXd out(static_cast<std::int64_t>(v.size()));
  std::int64_t i = 0;
  for (double x : v) out(i++) = x;
  return out;
}

}  // namespace

TEST_CASE("linkwise difference is the element-wise absolute difference") {
  CHECK(linkwise_difference(vec({0.2, 0.9}), vec({0.2, 0.9})) == vec({0.0, 0.0}));
  CHECK(linkwise_difference(vec({1.0, 0.0}), vec({0.0, 1.0})) == vec({1.0, 1.0}));
  const Eigen::VectorXd d = linkwise_difference(vec({0.5, 0.3}), vec({0.2, 0.7}));
  CHECK(d(0) == doctest::Approx(0.3));
  CHECK(d(1) == doctest::Approx(0.4));
  CHECK_THROWS_AS(linkwise_difference(vec({1.0}), vec({1.0, 0.0})), DataError);
}

TEST_CASE("uniform neighbor weights sum to 1 with strict self maximum") {
  const NetworkTopology chain = test::chain_topology(5);
  const NeighborWeights w = NeighborWeights::uniform(chain);
  w.validate(chain);
  // Interior links split 0.5 over 2 neighbors.
  CHECK(w.self[2] == doctest::Approx(0.5));
  CHECK(w.upstream[2][0] == doctest::Approx(0.25));
  // End links have a single neighbor; the split is adjusted to keep the self
  // weight strictly largest.
  CHECK(w.self[0] > w.downstream[0][0]);
  CHECK(w.self[0] + w.downstream[0][0] == doctest::Approx(1.0));

  const NetworkTopology isolated = test::isolated_topology(3);
  const NeighborWeights wi = NeighborWeights::uniform(isolated);
  CHECK(wi.self[1] == doctest::Approx(1.0));
}

TEST_CASE("local variation fuses neighborhood differences") {
  // One link with 1 upstream and 1 downstream neighbor, weights (0.5, 0.25, 0.25).
  NetworkTopology topo = test::isolated_topology(3);
  topo.upstream[1] = {0};
  topo.downstream[1] = {2};
  NeighborWeights w;
  w.self = {1.0, 0.5, 1.0};
  w.upstream = {{}, {0.25}, {}};
  w.downstream = {{}, {0.25}, {}};

  const Eigen::VectorXd diff = vec({0.4, 0.2, 0.0});  // up, self, down
  const Eigen::VectorXd v = local_variation(diff, topo, w);
  CHECK(v(1) == doctest::Approx(0.2));  // 0.25*0.4 + 0.5*0.2 + 0.25*0

  CHECK(local_variation(vec({0, 0, 0}), topo, w).isZero());
  const Eigen::VectorXd ones = local_variation(vec({1, 1, 1}), topo, w);
  for (int i = 0; i < 3; ++i) CHECK(ones(i) == doctest::Approx(1.0));  // weights sum to 1
}

TEST_CASE("pairwise similarity: kernel values, symmetry, Laplacian identities") {
  // Two identical columns and one maximally distant column.
  Eigen::MatrixXd X(2, 3);
  X.col(0) = vec({0.2, 0.8});
  X.col(1) = vec({0.2, 0.8});
  X.col(2) = vec({1.0, 0.0});
  TrafficStateMatrix m = test::wrap_states(X, 1);
  const NetworkTopology topo = test::isolated_topology(2);
  const NeighborWeights w = NeighborWeights::uniform(topo);

  SimilarityConfig config;
  config.delta = 0.5;
  const SimilarityGraph g = pairwise_similarity(m, topo, w, config);

  const Eigen::MatrixXd W = g.dense_similarity();
  CHECK(W(0, 1) == doctest::Approx(1.0));  // identical states
  CHECK(W(0, 0) == doctest::Approx(1.0));  // unit diagonal
  // v-bar between col0 and col2 = mean(|0.2-1.0|, |0.8-0.0|) = 0.8;
  // S = exp(-0.8 / (2 * 0.25)).
  CHECK(W(0, 2) == doctest::Approx(std::exp(-0.8 / 0.5)));
  CHECK(W == W.transpose());

  // v-bar = 2 delta^2 lands exactly on exp(-1).
  SimilarityConfig c2;
  c2.delta = std::sqrt(0.8 / 2.0);
  const SimilarityGraph g2 = pairwise_similarity(m, topo, w, c2);
  CHECK(g2.dense_similarity()(0, 2) == doctest::Approx(std::exp(-1.0)).epsilon(1e-12));

  // Laplacian row sums vanish and the degree vector matches the off-diagonal
  // row sums.
  const Eigen::MatrixXd L(g.laplacian);
  for (int i = 0; i < 3; ++i) CHECK(std::abs(L.row(i).sum()) < 1e-12);
  CHECK(g.degrees(0) == doctest::Approx(W(0, 1) + W(0, 2)));
}

TEST_CASE("hand-assembled W: degrees and Laplacian follow the zero-diagonal convention") {
  Eigen::MatrixXd W(3, 3);
  W << 1, 1, 0,
       1, 1, 0,
       0, 0, 1;
  const SimilarityGraph g = graph_from_similarity(W);
  CHECK(g.degrees(0) == doctest::Approx(1.0));
  CHECK(g.degrees(2) == doctest::Approx(0.0));
  const Eigen::MatrixXd L(g.laplacian);
  for (int i = 0; i < 3; ++i) CHECK(std::abs(L.row(i).sum()) < 1e-15);
  CHECK(L(0, 0) == doctest::Approx(1.0));
  CHECK(L(0, 1) == doctest::Approx(-1.0));
}

TEST_CASE("laplacian quadratic matches the pairwise form") {
  SUBCASE("identical columns lie in the null space") {
    Rng rng(1);
    const SimilarityGraph g = test::random_graph(6, rng);
    Eigen::MatrixXd V(3, 6);
    const Eigen::VectorXd col = vec({0.3, 0.7, 0.1});
    for (int j = 0; j < 6; ++j) V.col(j) = col;
    CHECK(std::abs(laplacian_quadratic(V, g.laplacian)) < 1e-12);
  }
  SUBCASE("frozen 2x2 example") {
    Eigen::MatrixXd W(2, 2);
    W << 0, 1, 1, 0;
    const SimilarityGraph g = graph_from_similarity(W);
    Eigen::MatrixXd V(2, 2);
    V << 1, 0, 0, 1;
    // Oracle: pairwise form 1/2 * (1*2 + 1*2) = 2.
    CHECK(laplacian_quadratic(V, g.laplacian) == doctest::Approx(2.0));
  }
  SUBCASE("lambda scaling is linear") {
    Rng rng(2);
    const SimilarityGraph g = test::random_graph(5, rng);
    const Eigen::MatrixXd V = test::random_matrix(3, 5, rng);
    const double q = laplacian_quadratic(V, g.laplacian);
    const Eigen::SparseMatrix<double> L2 = 2.0 * g.laplacian;
    CHECK(laplacian_quadratic(V, L2) == doctest::Approx(2.0 * q));
  }
  SUBCASE("random instances agree within 1e-9 relative") {
    Rng rng(3);
    for (int trial = 0; trial < 50; ++trial) {
      const std::int64_t m = 2 + static_cast<std::int64_t>(rng.uniform_index(10));
      const SimilarityGraph g = test::random_graph(m, rng);
      const Eigen::MatrixXd V = test::random_matrix(4, m, rng, -1.0, 1.0);
      const double trace_form = laplacian_quadratic(V, g.laplacian);
      const double pair_form = test::pairwise_laplacian_form(V, g.dense_similarity());
      CHECK(trace_form == doctest::Approx(pair_form).epsilon(1e-9));
    }
  }
  SUBCASE("shape mismatch throws") {
    Rng rng(4);
    const SimilarityGraph g = test::random_graph(5, rng);
    CHECK_THROWS_AS(laplacian_quadratic(Eigen::MatrixXd::Zero(2, 4), g.laplacian), DataError);
  }
}

TEST_CASE("positive semi-definiteness over random projections") {
  Rng rng(7);
  const SimilarityGraph g = test::random_graph(12, rng);
  for (int trial = 0; trial < 1000; ++trial) {
    const Eigen::MatrixXd V = test::random_matrix(3, 12, rng, -5.0, 5.0);
    const double q = laplacian_quadratic(V, g.laplacian);
    CHECK(q >= -1e-9 * V.squaredNorm());
  }
}

TEST_CASE("locality: dominated differences give larger similarity") {
  Rng rng(11);
  const NetworkTopology topo = test::chain_topology(6);
  const NeighborWeights w = NeighborWeights::uniform(topo);
  for (int trial = 0; trial < 100; ++trial) {
    Eigen::MatrixXd X(6, 3);
    const Eigen::VectorXd x = test::random_matrix(6, 1, rng);
    const Eigen::VectorXd d = test::random_matrix(6, 1, rng, 0.0, 0.4);
    const Eigen::VectorXd shrink = test::random_matrix(6, 1, rng);  // in [0,1]
    X.col(0) = x;
    X.col(2) = (x + d).cwiseMin(1.0);
    // Dominated column: |x - y| <= |x - z| element-wise by construction.
    X.col(1) = x + (X.col(2) - x).cwiseProduct(shrink);
    TrafficStateMatrix m = test::wrap_states(X, 1);
    SimilarityConfig config;
    config.delta = 0.3;
    const SimilarityGraph g = pairwise_similarity(m, topo, w, config);
    const Eigen::MatrixXd W = g.dense_similarity();
    CHECK(W(0, 1) >= W(0, 2) - 1e-12);
  }
}

TEST_CASE("knn sparsification keeps top neighbors and stays symmetric") {
  Rng rng(21);
  TrafficStateMatrix m = test::wrap_states(test::random_matrix(4, 30, rng), 1);
  const NetworkTopology topo = test::isolated_topology(4);
  const NeighborWeights w = NeighborWeights::uniform(topo);

  SimilarityConfig dense_cfg;
  dense_cfg.auto_sparsify = false;
  const SimilarityGraph dense = pairwise_similarity(m, topo, w, dense_cfg);

  SimilarityConfig knn_cfg;
  knn_cfg.knn = 5;
  const SimilarityGraph sparse = pairwise_similarity(m, topo, w, knn_cfg);
  CHECK(sparse.sparsified);
  CHECK(!dense.sparsified);
  CHECK(sparse.delta == doctest::Approx(dense.delta));  // same median heuristic

  const Eigen::MatrixXd Wd = Eigen::MatrixXd(dense.weights);
  const Eigen::MatrixXd Ws = Eigen::MatrixXd(sparse.weights);
  CHECK(Ws == Ws.transpose());
  int row_nnz_min = 30;
  for (int i = 0; i < 30; ++i) {
    int nnz = 0;
    for (int j = 0; j < 30; ++j) {
      if (Ws(i, j) != 0.0) {
        ++nnz;
        CHECK(Ws(i, j) == doctest::Approx(Wd(i, j)));  // values survive untouched
      }
    }
    row_nnz_min = std::min(row_nnz_min, nnz);
  }
  CHECK(row_nnz_min >= 5);  // max-symmetrization can only add entries
}

TEST_CASE("degenerate inputs are rejected") {
  Rng rng(31);
  const NetworkTopology topo = test::isolated_topology(4);
  const NeighborWeights w = NeighborWeights::uniform(topo);
  TrafficStateMatrix one = test::wrap_states(test::random_matrix(4, 1, rng), 1);
  CHECK_THROWS_AS(pairwise_similarity(one, topo, w, SimilarityConfig{}), DataError);

  TrafficStateMatrix m = test::wrap_states(test::random_matrix(4, 5, rng), 1);
  SimilarityConfig bad;
  bad.knn = 10;  // > m-1
  CHECK_THROWS_AS(pairwise_similarity(m, topo, w, bad), ConfigError);
}

TEST_CASE("similarity cache round-trips and rejects stale hashes") {
  test::TempDir dir("simcache");
  Rng rng(41);
  TrafficStateMatrix m = test::wrap_states(test::random_matrix(3, 12, rng), 1);
  const NetworkTopology topo = test::chain_topology(3);
  const NeighborWeights w = NeighborWeights::uniform(topo);
  SimilarityConfig config;

  const SimilarityGraph g = pairwise_similarity(m, topo, w, config);
  const std::uint64_t key = similarity_content_hash(m, topo, w, config);
  const auto path = dir.path / "w_cache.csv";
  save_similarity_cache(path, g, key);

  const auto back = load_similarity_cache(path, key);
  REQUIRE(back.has_value());
  CHECK(Eigen::MatrixXd(back->weights) == Eigen::MatrixXd(g.weights));
  CHECK(back->delta == g.delta);
  CHECK(back->degrees.isApprox(g.degrees, 1e-15));

  CHECK(!load_similarity_cache(path, key + 1).has_value());
  CHECK(!load_similarity_cache(dir.path / "missing.csv", key).has_value());

  // A different dataset changes the key.
  m.values(0, 0) = 0.5 * m.values(0, 0);
  CHECK(similarity_content_hash(m, topo, w, config) != key);
}

TEST_CASE("parallel similarity matches single-threaded bit-for-bit") {
  Rng rng(51);
  TrafficStateMatrix m = test::wrap_states(test::random_matrix(6, 40, rng), 1);
  const NetworkTopology topo = test::chain_topology(6);
  const NeighborWeights w = NeighborWeights::uniform(topo);
  SimilarityConfig seq_cfg;
  seq_cfg.threads = 1;
  SimilarityConfig par_cfg;
  par_cfg.threads = 4;
  const SimilarityGraph a = pairwise_similarity(m, topo, w, seq_cfg);
  const SimilarityGraph b = pairwise_similarity(m, topo, w, par_cfg);
  CHECK(Eigen::MatrixXd(a.weights) == Eigen::MatrixXd(b.weights));
}
