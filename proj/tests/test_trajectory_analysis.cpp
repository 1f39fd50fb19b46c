#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "netstate/trajectory_analysis.hpp"
#include "test_helpers.hpp"

using namespace netstate;

namespace {

Trajectory make_trajectory(const std::string& id, const Eigen::MatrixXd& points,
                           ScenarioLabel scenario = ScenarioLabel::ITD) {
  Trajectory t;
  t.sequence_id = id;
  t.scenario = scenario;
  t.points = points;
  return t;
}

// Three planted families with disjoint dominant axes plus noise.
std::vector<Trajectory> planted_families(Rng& rng, int per_family, int steps) {
  std::vector<Trajectory> out;
  for (int f = 0; f < 3; ++f) {
    for (int i = 0; i < per_family; ++i) {
      Eigen::MatrixXd points = test::random_matrix(3, steps, rng, 0.01, 0.15);
      for (int t = 0; t < steps; ++t) points(f, t) += 1.0 + 0.3 * rng.uniform();
      out.push_back(make_trajectory("f" + std::to_string(f) + "_" + std::to_string(i), points,
                                    static_cast<ScenarioLabel>(f)));
    }
  }
  return out;
}

}  // namespace

TEST_CASE("trajectory distance basics") {
  Rng rng(1);
  const Eigen::MatrixXd p = test::random_matrix(4, 10, rng, 0.1, 1.0);
  const Trajectory a = make_trajectory("a", p);
  const Trajectory b = make_trajectory("b", p);
  CHECK(trajectory_distance(a, b) == doctest::Approx(0.0));

  // Disjoint supports at every step: cosine 0, distance 1.
  Eigen::MatrixXd pa = Eigen::MatrixXd::Zero(4, 6);
  Eigen::MatrixXd pb = Eigen::MatrixXd::Zero(4, 6);
  for (int t = 0; t < 6; ++t) {
    pa(0, t) = 0.5 + 0.1 * t;
    pa(1, t) = 0.2;
    pb(2, t) = 0.9;
    pb(3, t) = 0.4 - 0.05 * t;
  }
  CHECK(trajectory_distance(make_trajectory("a", pa), make_trajectory("b", pb)) ==
        doctest::Approx(1.0));

  // Per-step positive rescaling leaves the distance unchanged.
  const Eigen::MatrixXd q = test::random_matrix(4, 10, rng, 0.1, 1.0);
  const Trajectory c = make_trajectory("c", q);
  Eigen::MatrixXd scaled = p;
  for (int t = 0; t < 10; ++t) scaled.col(t) *= rng.uniform(0.1, 7.0);
  CHECK(trajectory_distance(make_trajectory("a2", scaled), c) ==
        doctest::Approx(trajectory_distance(a, c)).epsilon(1e-12));

  // Symmetry and non-negativity on random pairs.
  for (int trial = 0; trial < 30; ++trial) {
    const Trajectory x = make_trajectory("x", test::random_matrix(4, 10, rng, 0.01, 1.0));
    const Trajectory y = make_trajectory("y", test::random_matrix(4, 10, rng, 0.01, 1.0));
    const double dxy = trajectory_distance(x, y);
    CHECK(dxy == trajectory_distance(y, x));
    CHECK(dxy >= 0.0);
    CHECK(dxy <= 1.0);
  }
}

TEST_CASE("trajectory distance error paths") {
  Rng rng(2);
  const Trajectory a = make_trajectory("a", test::random_matrix(3, 5, rng, 0.1, 1.0));
  const Trajectory shorter = make_trajectory("s", test::random_matrix(3, 4, rng, 0.1, 1.0));
  CHECK_THROWS_AS(trajectory_distance(a, shorter), DataError);

  Eigen::MatrixXd with_zero = test::random_matrix(3, 5, rng, 0.1, 1.0);
  with_zero.col(2).setZero();
  CHECK_THROWS_AS(trajectory_distance(a, make_trajectory("z", with_zero)), DataError);
}

TEST_CASE("k-medoids recovers planted families") {
  Rng rng(3);
  const std::vector<Trajectory> trajectories = planted_families(rng, 12, 8);
  TrajectoryConfig config;
  config.seed = 5;
  const TrajectoryClustering clustering = cluster_trajectories(trajectories, 3, config);

  std::vector<int> truth;
  for (const auto& t : trajectories) truth.push_back(static_cast<int>(t.scenario));
  // Purity against the planted families.
  std::vector<std::vector<int>> table(3, std::vector<int>(3, 0));
  for (std::size_t i = 0; i < truth.size(); ++i)
    ++table[static_cast<std::size_t>(clustering.labels[i])][static_cast<std::size_t>(truth[i])];
  int hit = 0;
  for (const auto& row : table) hit += *std::max_element(row.begin(), row.end());
  CHECK(static_cast<double>(hit) / static_cast<double>(truth.size()) >= 0.9);

  // Medoids belong to their own clusters.
  for (std::size_t c = 0; c < clustering.medoids.size(); ++c)
    CHECK(clustering.labels[static_cast<std::size_t>(clustering.medoids[c])] ==
          static_cast<int>(c));

  // Reported cost matches a recomputation from labels and medoids.
  const Eigen::MatrixXd dist = trajectory_distance_matrix(trajectories);
  double cost = 0.0;
  for (std::size_t i = 0; i < trajectories.size(); ++i)
    cost += dist(static_cast<std::int64_t>(i),
                 clustering.medoids[static_cast<std::size_t>(clustering.labels[i])]);
  CHECK(clustering.total_distance == doctest::Approx(cost).epsilon(1e-12));
}

TEST_CASE("k-medoids degenerate and invariance cases") {
  Rng rng(4);
  SUBCASE("K equal to the trajectory count") {
    const std::vector<Trajectory> trajectories = planted_families(rng, 2, 5);
    TrajectoryConfig config;
    config.seed = 3;
    const TrajectoryClustering clustering =
        cluster_trajectories(trajectories, static_cast<int>(trajectories.size()), config);
    CHECK(clustering.total_distance == doctest::Approx(0.0));
    std::vector<bool> seen(trajectories.size(), false);
    for (int m : clustering.medoids) seen[static_cast<std::size_t>(m)] = true;
    CHECK(std::count(seen.begin(), seen.end(), true) ==
          static_cast<std::ptrdiff_t>(trajectories.size()));
  }
  SUBCASE("duplicating every trajectory keeps the medoid set (by value)") {
    const std::vector<Trajectory> base = planted_families(rng, 4, 6);
    TrajectoryConfig config;
    config.seed = 11;
    const TrajectoryClustering a = cluster_trajectories(base, 3, config);

    std::vector<Trajectory> doubled = base;
    for (const auto& t : base) {
      Trajectory copy = t;
      copy.sequence_id += "_copy";
      doubled.push_back(copy);
    }
    const TrajectoryClustering b = cluster_trajectories(doubled, 3, config);
    // Compare medoid point sets by value (a medoid may land on a copy).
    auto medoid_points = [](const TrajectoryClustering& c, const std::vector<Trajectory>& ts) {
      std::vector<Eigen::MatrixXd> pts;
      for (int m : c.medoids) pts.push_back(ts[static_cast<std::size_t>(m)].points);
      return pts;
    };
    const auto pa = medoid_points(a, base);
    const auto pb = medoid_points(b, doubled);
    for (const auto& pb_mat : pb) {
      bool found = false;
      for (const auto& pa_mat : pa)
        if (pa_mat.rows() == pb_mat.rows() && pa_mat == pb_mat) found = true;
      CHECK(found);
    }
  }
  SUBCASE("K larger than the count throws") {
    const std::vector<Trajectory> trajectories = planted_families(rng, 1, 5);
    TrajectoryConfig config;
    CHECK_THROWS_AS(cluster_trajectories(trajectories, 4, config), DataError);
  }
}

TEST_CASE("mean index curves") {
  // Two sequences of 3 steps over 2 links.
  Eigen::MatrixXd values(2, 6);
  values << 1.0, 0.5, 0.3, 1.0, 0.9, 0.8,
            1.0, 0.3, 0.5, 1.0, 0.7, 0.6;
  TrafficStateMatrix m = test::wrap_states(values, 3);

  SUBCASE("single free-flow sequence is constant 1") {
    Eigen::MatrixXd ones = Eigen::MatrixXd::Ones(2, 3);
    TrafficStateMatrix free_flow = test::wrap_states(ones, 3);
    const std::vector<double> curve = mean_index_curve(free_flow, {"seq_0"});
    for (double v : curve) CHECK(v == doctest::Approx(1.0));
  }
  SUBCASE("averaging over sequences and links") {
    const std::vector<double> curve = mean_index_curve(m, {"seq_0", "seq_1"});
    REQUIRE(curve.size() == 3);
    CHECK(curve[0] == doctest::Approx(1.0));
    CHECK(curve[1] == doctest::Approx((0.5 + 0.3 + 0.9 + 0.7) / 4.0));
    CHECK(curve[2] == doctest::Approx((0.3 + 0.5 + 0.8 + 0.6) / 4.0));
    for (double v : curve) {
      CHECK(v >= 0.0);
      CHECK(v <= 1.0);
    }
  }
  SUBCASE("empty sequence list throws") {
    CHECK_THROWS_AS(mean_index_curve(m, {}), DataError);
  }
}

TEST_CASE("build_trajectories groups projection columns by sequence") {
  Rng rng(6);
  const Eigen::MatrixXd values = test::random_matrix(4, 6, rng);
  TrafficStateMatrix m = test::wrap_states(values, 3);
  SequenceManifest manifest;
  manifest.sequences = {{"seq_0", ScenarioLabel::ITD, 3, ""},
                        {"seq_1", ScenarioLabel::ETD, 3, ""}};
  const Eigen::MatrixXd projections = test::random_matrix(2, 6, rng, 0.1, 1.0);

  const std::vector<Trajectory> ts = build_trajectories(projections, m, manifest);
  REQUIRE(ts.size() == 2);
  CHECK(ts[0].points == projections.leftCols(3));
  CHECK(ts[1].points == projections.rightCols(3));
  CHECK(ts[1].scenario == ScenarioLabel::ETD);

  CHECK_THROWS_AS(build_trajectories(test::random_matrix(2, 5, rng), m, manifest), DataError);
}

TEST_CASE("fill_mean_curves attaches per-cluster dynamics") {
  Rng rng(7);
  Eigen::MatrixXd values(2, 6);
  values << 0.9, 0.8, 0.7, 0.3, 0.2, 0.1,
            0.9, 0.8, 0.7, 0.3, 0.2, 0.1;
  TrafficStateMatrix m = test::wrap_states(values, 3);
  std::vector<Trajectory> ts;
  ts.push_back(make_trajectory("seq_0", test::random_matrix(2, 3, rng, 0.1, 1.0)));
  ts.push_back(make_trajectory("seq_1", test::random_matrix(2, 3, rng, 0.1, 1.0)));

  TrajectoryClustering clustering;
  clustering.labels = {0, 1};
  clustering.medoids = {0, 1};
  fill_mean_curves(clustering, m, ts);
  REQUIRE(clustering.mean_curves.size() == 2);
  CHECK(clustering.mean_curves[0][0] == doctest::Approx(0.9));
  CHECK(clustering.mean_curves[1][2] == doctest::Approx(0.1));
}
