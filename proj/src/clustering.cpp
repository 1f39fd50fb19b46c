#include "netstate/clustering.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "netstate/parallel.hpp"
#include "netstate/rng.hpp"

namespace netstate {

void ClusteringConfig::validate(std::int64_t m) const {
  if (k < 1) throw ConfigError("clustering: k must be >= 1");
  if (m < k)
    throw DataError("clustering: " + std::to_string(m) + " samples cannot form " +
                    std::to_string(k) + " clusters");
  if (n_restarts < 1) throw ConfigError("clustering: n_restarts must be >= 1");
  if (max_iters < 1) throw ConfigError("clustering: max_iters must be >= 1");
  if (!(exemplar_fraction > 0.0) || exemplar_fraction > 1.0)
    throw ConfigError("clustering: exemplar_fraction must lie in (0,1]");
  if (congestion_threshold < 0.0 || congestion_threshold > 1.0)
    throw ConfigError("clustering: congestion_threshold must lie in [0,1]");
}

namespace {

// Squared distances from every point to one centroid.
void squared_distances(const Eigen::MatrixXd& points, const Eigen::VectorXd& center,
                       Eigen::VectorXd& out) {
  out = (points.colwise() - center).colwise().squaredNorm();
}

Eigen::MatrixXd seed_centroids(const Eigen::MatrixXd& points, int k, Rng& rng) {
  const std::int64_t m = points.cols();
  Eigen::MatrixXd centroids(points.rows(), k);
  centroids.col(0) = points.col(static_cast<std::int64_t>(rng.uniform_index(
      static_cast<std::size_t>(m))));
  Eigen::VectorXd best_d2 = Eigen::VectorXd::Constant(m, std::numeric_limits<double>::max());
  Eigen::VectorXd d2(m);
  for (int c = 1; c < k; ++c) {
    squared_distances(points, centroids.col(c - 1), d2);
    best_d2 = best_d2.cwiseMin(d2);
    const double total = best_d2.sum();
    std::int64_t pick;
    if (total > 0.0) {
      const double target = rng.uniform() * total;
      double acc = 0.0;
      pick = m - 1;
      for (std::int64_t i = 0; i < m; ++i) {
        acc += best_d2(i);
        if (acc >= target) {
          pick = i;
          break;
        }
      }
    } else {
      pick = static_cast<std::int64_t>(rng.uniform_index(static_cast<std::size_t>(m)));
    }
    centroids.col(c) = points.col(pick);
  }
  return centroids;
}

struct LloydResult {
  std::vector<int> labels;
  Eigen::MatrixXd centroids;
  double inertia = 0.0;
  int iters = 0;
};

LloydResult lloyd(const Eigen::MatrixXd& points, int k, int max_iters, Rng& rng) {
  const std::int64_t m = points.cols();
  LloydResult res;
  res.centroids = seed_centroids(points, k, rng);
  res.labels.assign(static_cast<std::size_t>(m), -1);

  Eigen::MatrixXd dists(m, k);
  Eigen::VectorXd d2(m);
  std::vector<int> counts(static_cast<std::size_t>(k));

  for (int iter = 0; iter < max_iters; ++iter) {
    for (int c = 0; c < k; ++c) {
      squared_distances(points, res.centroids.col(c), d2);
      dists.col(c) = d2;
    }
    std::vector<int> labels(static_cast<std::size_t>(m));
    std::fill(counts.begin(), counts.end(), 0);
    for (std::int64_t i = 0; i < m; ++i) {
      int best = 0;
      double best_d = dists(i, 0);
      for (int c = 1; c < k; ++c) {
        if (dists(i, c) < best_d) {
          best_d = dists(i, c);
          best = c;
        }
      }
      labels[static_cast<std::size_t>(i)] = best;
      ++counts[static_cast<std::size_t>(best)];
    }

    // Empty-cluster repair: donate the point farthest from its centroid,
    // taken from a cluster that can spare one.
    for (int c = 0; c < k; ++c) {
      if (counts[static_cast<std::size_t>(c)] > 0) continue;
      std::int64_t worst = -1;
      double worst_d = -1.0;
      for (std::int64_t i = 0; i < m; ++i) {
        const int li = labels[static_cast<std::size_t>(i)];
        if (counts[static_cast<std::size_t>(li)] < 2) continue;
        if (dists(i, li) > worst_d) {
          worst_d = dists(i, li);
          worst = i;
        }
      }
      if (worst < 0) throw DataError("kmeans: cannot repair empty cluster");
      --counts[static_cast<std::size_t>(labels[static_cast<std::size_t>(worst)])];
      labels[static_cast<std::size_t>(worst)] = c;
      ++counts[static_cast<std::size_t>(c)];
    }

    const bool stable = labels == res.labels;
    res.labels = std::move(labels);
    res.iters = iter + 1;

    for (int c = 0; c < k; ++c) res.centroids.col(c).setZero();
    for (std::int64_t i = 0; i < m; ++i)
      res.centroids.col(res.labels[static_cast<std::size_t>(i)]) += points.col(i);
    for (int c = 0; c < k; ++c)
      res.centroids.col(c) /= static_cast<double>(counts[static_cast<std::size_t>(c)]);

    if (stable) break;
  }

  res.inertia = 0.0;
  for (std::int64_t i = 0; i < m; ++i)
    res.inertia +=
        (points.col(i) - res.centroids.col(res.labels[static_cast<std::size_t>(i)]))
            .squaredNorm();
  return res;
}

}  // namespace

ClusterAssignment kmeans(const Eigen::MatrixXd& points, const ClusteringConfig& config) {
  const std::int64_t m = points.cols();
  config.validate(m);
  if (!points.allFinite()) throw DataError("kmeans: non-finite input");

  std::vector<LloydResult> runs(static_cast<std::size_t>(config.n_restarts));
  parallel_for(runs.size(), config.threads, [&](std::size_t r) {
    Rng rng(derive_seed(config.seed, r));
    runs[r] = lloyd(points, config.k, config.max_iters, rng);
  });

  std::size_t best = 0;
  for (std::size_t r = 1; r < runs.size(); ++r)
    if (runs[r].inertia < runs[best].inertia) best = r;

  ClusterAssignment out;
  out.labels = std::move(runs[best].labels);
  out.centroids = std::move(runs[best].centroids);
  out.inertia = runs[best].inertia;
  out.iters_run = runs[best].iters;
  out.counts.assign(static_cast<std::size_t>(config.k), 0);
  for (int l : out.labels) ++out.counts[static_cast<std::size_t>(l)];
  return out;
}

CompactnessReport compactness(const Eigen::MatrixXd& original_states,
                              const std::vector<int>& labels) {
  const std::int64_t m = original_states.cols();
  if (labels.size() != static_cast<std::size_t>(m))
    throw DataError("compactness: labels do not cover all samples");
  int k = 0;
  for (int l : labels) {
    if (l < 0) throw DataError("compactness: label out of range");
    k = std::max(k, l + 1);
  }

  CompactnessReport report;
  report.counts.assign(static_cast<std::size_t>(k), 0);
  for (int l : labels) ++report.counts[static_cast<std::size_t>(l)];

  Eigen::MatrixXd means = Eigen::MatrixXd::Zero(original_states.rows(), k);
  for (std::int64_t i = 0; i < m; ++i) means.col(labels[static_cast<std::size_t>(i)]) += original_states.col(i);
  for (int c = 0; c < k; ++c)
    if (report.counts[static_cast<std::size_t>(c)] > 0)
      means.col(c) /= static_cast<double>(report.counts[static_cast<std::size_t>(c)]);

  report.cluster_variances.assign(static_cast<std::size_t>(k), 0.0);
  for (std::int64_t i = 0; i < m; ++i) {
    const int c = labels[static_cast<std::size_t>(i)];
    report.cluster_variances[static_cast<std::size_t>(c)] +=
        (original_states.col(i) - means.col(c)).squaredNorm();
  }
  int populated = 0;
  double sum = 0.0;
  for (int c = 0; c < k; ++c) {
    const int n_c = report.counts[static_cast<std::size_t>(c)];
    if (n_c == 0) continue;  // absent label: not a derived cluster
    ++populated;
    if (n_c > 1)
      report.cluster_variances[static_cast<std::size_t>(c)] /= static_cast<double>(n_c - 1);
    else
      report.cluster_variances[static_cast<std::size_t>(c)] = 0.0;
    sum += report.cluster_variances[static_cast<std::size_t>(c)];
  }
  report.compactness = populated > 0 ? sum / populated : 0.0;
  return report;
}

KSelection select_k(const Eigen::MatrixXd& original_states, const Eigen::MatrixXd& embeddings,
                    const std::vector<int>& candidate_k, const ClusteringConfig& config,
                    double improvement_threshold) {
  if (candidate_k.empty()) throw ConfigError("select k: no candidates");
  if (!std::is_sorted(candidate_k.begin(), candidate_k.end()))
    throw ConfigError("select k: candidates must be ascending");
  if (original_states.cols() != embeddings.cols())
    throw DataError("select k: original states and embeddings disagree on sample count");

  KSelection sel;
  sel.candidates = candidate_k;
  for (int k : candidate_k) {
    ClusteringConfig c = config;
    c.k = k;
    sel.assignments.push_back(kmeans(embeddings, c));
    sel.reports.push_back(compactness(original_states, sel.assignments.back().labels));
  }

  sel.recommended = candidate_k.back();
  for (std::size_t i = 0; i + 1 < candidate_k.size(); ++i) {
    const double cur = sel.reports[i].compactness;
    const double next = sel.reports[i + 1].compactness;
    const double improvement = cur > 0.0 ? (cur - next) / cur : 0.0;
    if (improvement < improvement_threshold) {
      sel.recommended = candidate_k[i];
      break;
    }
  }
  return sel;
}

ClusterExemplar extract_exemplar(const Eigen::MatrixXd& original_states,
                                 const std::vector<int>& labels, int cluster,
                                 const ClusteringConfig& config) {
  if (labels.size() != static_cast<std::size_t>(original_states.cols()))
    throw DataError("exemplar: labels do not cover all samples");
  std::vector<std::int64_t> members;
  for (std::size_t i = 0; i < labels.size(); ++i)
    if (labels[i] == cluster) members.push_back(static_cast<std::int64_t>(i));
  if (members.empty())
    throw DataError("exemplar: cluster " + std::to_string(cluster) + " has no members");

  // Most congested first: ascending mean traffic index.
  std::stable_sort(members.begin(), members.end(), [&](std::int64_t a, std::int64_t b) {
    return original_states.col(a).mean() < original_states.col(b).mean();
  });
  const auto take = std::clamp<std::size_t>(
      static_cast<std::size_t>(std::llround(config.exemplar_fraction *
                                            static_cast<double>(members.size()))),
      1, members.size());

  ClusterExemplar ex;
  ex.cluster = cluster;
  ex.mean_state = Eigen::VectorXd::Zero(original_states.rows());
  for (std::size_t i = 0; i < take; ++i) ex.mean_state += original_states.col(members[i]);
  ex.mean_state /= static_cast<double>(take);
  for (std::int64_t r = 0; r < ex.mean_state.size(); ++r)
    if (ex.mean_state(r) < config.congestion_threshold)
      ex.congested_links.push_back(static_cast<LinkId>(r));
  return ex;
}

double clustering_purity(const std::vector<int>& labels, const std::vector<int>& classes) {
  if (labels.size() != classes.size() || labels.empty())
    throw DataError("purity: label/class size mismatch");
  int k = 0, c = 0;
  for (int l : labels) k = std::max(k, l + 1);
  for (int l : classes) c = std::max(c, l + 1);
  std::vector<std::vector<int>> table(static_cast<std::size_t>(k),
                                      std::vector<int>(static_cast<std::size_t>(c), 0));
  for (std::size_t i = 0; i < labels.size(); ++i)
    ++table[static_cast<std::size_t>(labels[i])][static_cast<std::size_t>(classes[i])];
  long long hit = 0;
  for (const auto& row : table) hit += *std::max_element(row.begin(), row.end());
  return static_cast<double>(hit) / static_cast<double>(labels.size());
}

}  // namespace netstate
