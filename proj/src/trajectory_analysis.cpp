#include "netstate/trajectory_analysis.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "netstate/parallel.hpp"
#include "netstate/rng.hpp"

namespace netstate {

std::vector<Trajectory> build_trajectories(const Eigen::MatrixXd& projections,
                                           const TrafficStateMatrix& matrix,
                                           const SequenceManifest& manifest) {
  if (projections.cols() != matrix.m())
    throw DataError("trajectories: projections have " + std::to_string(projections.cols()) +
                    " columns, dataset has " + std::to_string(matrix.m()));
  std::vector<Trajectory> out;
  out.reserve(manifest.sequences.size());
  for (const auto& seq : manifest.sequences) {
    auto [start, count] = matrix.sequence_span(seq.id);
    if (count != seq.steps)
      throw DataError("trajectories: sequence '" + seq.id + "' has " + std::to_string(count) +
                      " columns, manifest says " + std::to_string(seq.steps));
    Trajectory t;
    t.sequence_id = seq.id;
    t.scenario = seq.scenario;
    t.points = projections.middleCols(start, count);
    out.push_back(std::move(t));
  }
  return out;
}

double trajectory_distance(const Trajectory& a, const Trajectory& b) {
  if (a.points.cols() != b.points.cols() || a.points.rows() != b.points.rows())
    throw DataError("trajectory distance: '" + a.sequence_id + "' and '" + b.sequence_id +
                    "' have different shapes");
  const std::int64_t steps = a.points.cols();
  if (steps == 0) throw DataError("trajectory distance: empty trajectories");
  double cosine_sum = 0.0;
  for (std::int64_t t = 0; t < steps; ++t) {
    const double na = a.points.col(t).norm();
    const double nb = b.points.col(t).norm();
    if (na == 0.0 || nb == 0.0)
      throw DataError("trajectory distance: zero-norm projection at step " + std::to_string(t) +
                      " of '" + (na == 0.0 ? a.sequence_id : b.sequence_id) + "'");
    cosine_sum += a.points.col(t).dot(b.points.col(t)) / (na * nb);
  }
  const double d = 1.0 - cosine_sum / static_cast<double>(steps);
  return std::clamp(d, 0.0, 1.0);  // trims roundoff at the boundaries
}

Eigen::MatrixXd trajectory_distance_matrix(const std::vector<Trajectory>& trajectories,
                                           unsigned threads) {
  const auto t = trajectories.size();
  Eigen::MatrixXd dist = Eigen::MatrixXd::Zero(t, t);
  parallel_for(t, threads, [&](std::size_t i) {
    for (std::size_t j = i + 1; j < t; ++j) {
      const double d = trajectory_distance(trajectories[i], trajectories[j]);
      dist(static_cast<std::int64_t>(i), static_cast<std::int64_t>(j)) = d;
      dist(static_cast<std::int64_t>(j), static_cast<std::int64_t>(i)) = d;
    }
  });
  return dist;
}

namespace {

struct PamResult {
  std::vector<int> medoids;
  std::vector<int> labels;
  double cost = 0.0;
};

double assignment_cost(const Eigen::MatrixXd& dist, const std::vector<int>& medoids,
                       std::vector<int>& labels) {
  const std::int64_t n = dist.rows();
  labels.resize(static_cast<std::size_t>(n));
  double cost = 0.0;
  for (std::int64_t i = 0; i < n; ++i) {
    int best = 0;
    double best_d = dist(i, medoids[0]);
    for (std::size_t c = 1; c < medoids.size(); ++c) {
      const double d = dist(i, medoids[c]);
      if (d < best_d) {
        best_d = d;
        best = static_cast<int>(c);
      }
    }
    labels[static_cast<std::size_t>(i)] = best;
    cost += best_d;
  }
  return cost;
}

PamResult pam(const Eigen::MatrixXd& dist, int k, int max_swaps, Rng& rng) {
  const std::int64_t n = dist.rows();
  PamResult res;

  // Distance-weighted initialization over distinct points.
  std::vector<char> is_medoid(static_cast<std::size_t>(n), 0);
  res.medoids.push_back(static_cast<int>(rng.uniform_index(static_cast<std::size_t>(n))));
  is_medoid[static_cast<std::size_t>(res.medoids[0])] = 1;
  Eigen::VectorXd best_d = dist.col(res.medoids[0]);
  while (static_cast<int>(res.medoids.size()) < k) {
    const double total = best_d.sum();
    std::int64_t pick = -1;
    if (total > 0.0) {
      const double target = rng.uniform() * total;
      double acc = 0.0;
      for (std::int64_t i = 0; i < n; ++i) {
        acc += best_d(i);
        if (acc >= target && !is_medoid[static_cast<std::size_t>(i)]) {
          pick = i;
          break;
        }
      }
    }
    if (pick < 0) {
      for (std::int64_t i = 0; i < n; ++i)
        if (!is_medoid[static_cast<std::size_t>(i)]) {
          pick = i;
          break;
        }
    }
    is_medoid[static_cast<std::size_t>(pick)] = 1;
    res.medoids.push_back(static_cast<int>(pick));
    best_d = best_d.cwiseMin(dist.col(pick));
  }

  res.cost = assignment_cost(dist, res.medoids, res.labels);

  // Steepest-descent swap phase: apply the best strictly improving
  // (medoid, candidate) exchange until none remains.
  std::vector<int> trial_labels;
  for (int swap = 0; swap < max_swaps; ++swap) {
    double best_cost = res.cost - 1e-15;
    int best_slot = -1, best_candidate = -1;
    for (std::size_t slot = 0; slot < res.medoids.size(); ++slot) {
      const int original = res.medoids[slot];
      for (std::int64_t cand = 0; cand < n; ++cand) {
        if (is_medoid[static_cast<std::size_t>(cand)]) continue;
        res.medoids[slot] = static_cast<int>(cand);
        const double c = assignment_cost(dist, res.medoids, trial_labels);
        if (c < best_cost) {
          best_cost = c;
          best_slot = static_cast<int>(slot);
          best_candidate = static_cast<int>(cand);
        }
      }
      res.medoids[slot] = original;
    }
    if (best_slot < 0) break;
    is_medoid[static_cast<std::size_t>(res.medoids[static_cast<std::size_t>(best_slot)])] = 0;
    is_medoid[static_cast<std::size_t>(best_candidate)] = 1;
    res.medoids[static_cast<std::size_t>(best_slot)] = best_candidate;
    res.cost = assignment_cost(dist, res.medoids, res.labels);
  }
  return res;
}

}  // namespace

TrajectoryClustering cluster_trajectories(const std::vector<Trajectory>& trajectories, int k,
                                          const TrajectoryConfig& config) {
  const auto count = trajectories.size();
  if (k < 1) throw ConfigError("trajectory clustering: k must be >= 1");
  if (count < static_cast<std::size_t>(k))
    throw DataError("trajectory clustering: " + std::to_string(count) +
                    " trajectories cannot form " + std::to_string(k) + " clusters");

  const Eigen::MatrixXd dist = trajectory_distance_matrix(trajectories, config.threads);

  std::vector<PamResult> runs(static_cast<std::size_t>(config.n_restarts));
  parallel_for(runs.size(), config.threads, [&](std::size_t r) {
    Rng rng(derive_seed(config.seed, r));
    runs[r] = pam(dist, k, config.max_swaps, rng);
  });
  std::size_t best = 0;
  for (std::size_t r = 1; r < runs.size(); ++r)
    if (runs[r].cost < runs[best].cost) best = r;

  TrajectoryClustering out;
  out.labels = std::move(runs[best].labels);
  out.medoids = std::move(runs[best].medoids);
  out.total_distance = runs[best].cost;
  return out;
}

std::vector<double> mean_index_curve(const TrafficStateMatrix& matrix,
                                     const std::vector<std::string>& sequence_ids) {
  if (sequence_ids.empty()) throw DataError("mean index curve: no sequences");
  std::vector<double> curve;
  for (std::size_t s = 0; s < sequence_ids.size(); ++s) {
    const Eigen::MatrixXd block = slice_sequence(matrix, sequence_ids[s]);
    if (s == 0) {
      curve.assign(static_cast<std::size_t>(block.cols()), 0.0);
    } else if (curve.size() != static_cast<std::size_t>(block.cols())) {
      throw DataError("mean index curve: sequences have differing step counts");
    }
    for (std::int64_t t = 0; t < block.cols(); ++t)
      curve[static_cast<std::size_t>(t)] += block.col(t).mean();
  }
  for (double& v : curve) v /= static_cast<double>(sequence_ids.size());
  return curve;
}

void fill_mean_curves(TrajectoryClustering& clustering, const TrafficStateMatrix& matrix,
                      const std::vector<Trajectory>& trajectories) {
  if (clustering.labels.size() != trajectories.size())
    throw DataError("mean curves: clustering does not match trajectory list");
  const int k = clustering.medoids.empty()
                    ? 0
                    : static_cast<int>(clustering.medoids.size());
  clustering.mean_curves.clear();
  for (int c = 0; c < k; ++c) {
    std::vector<std::string> ids;
    for (std::size_t i = 0; i < trajectories.size(); ++i)
      if (clustering.labels[i] == c) ids.push_back(trajectories[i].sequence_id);
    clustering.mean_curves.push_back(mean_index_curve(matrix, ids));
  }
}

}  // namespace netstate
