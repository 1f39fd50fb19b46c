#include "netstate/factorization.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "netstate/rng.hpp"

namespace netstate {

void FactorizationConfig::validate(std::int64_t n, std::int64_t m) const {
  if (s < 1) throw ConfigError("factorization: s must be >= 1");
  if (s >= std::min(n, m))
    throw ConfigError("factorization: s = " + std::to_string(s) +
                      " must be smaller than min(n, m) = " +
                      std::to_string(std::min(n, m)));
  if (lambda < 0.0) throw ConfigError("factorization: lambda must be >= 0");
  if (max_iters < 1) throw ConfigError("factorization: max_iters must be >= 1");
  if (!(rel_tol > 0.0)) throw ConfigError("factorization: rel_tol must be positive");
  if (!(epsilon > 0.0)) throw ConfigError("factorization: epsilon must be positive");
}

namespace {

void fill_uniform_positive(Eigen::MatrixXd& mat, Rng& rng) {
  for (std::int64_t j = 0; j < mat.cols(); ++j)
    for (std::int64_t i = 0; i < mat.rows(); ++i) mat(i, j) = rng.uniform_pos();
}

}  // namespace

FactorizationResult factorize(const Eigen::MatrixXd& X, const SimilarityGraph* graph,
                              const FactorizationConfig& config) {
  const std::int64_t n = X.rows();
  const std::int64_t m = X.cols();
  config.validate(n, m);
  if (X.size() == 0) throw DataError("factorize: empty matrix");
  if (!(X.minCoeff() >= 0.0)) throw DataError("factorize: X has negative entries");
  if (!X.allFinite()) throw DataError("factorize: X has non-finite entries");
  if (config.lambda > 0.0) {
    if (!graph) throw DataError("factorize: lambda > 0 requires a similarity graph");
    if (graph->m() != m)
      throw DataError("factorize: graph has " + std::to_string(graph->m()) +
                      " samples, X has " + std::to_string(m));
  }

  const bool regularized = config.lambda > 0.0 && graph;
  const double lambda = config.lambda;
  const double eps = config.epsilon;
  const int s = config.s;

  FactorizationResult result;
  result.basis.resize(n, s);
  result.projections.resize(s, m);
  Rng rng(config.seed);
  fill_uniform_positive(result.basis, rng);
  fill_uniform_positive(result.projections, rng);

  Eigen::MatrixXd& M = result.basis;
  Eigen::MatrixXd& V = result.projections;

  auto objective = [&](double& rec_term, double& lap_term) {
    rec_term = (X - M * V).squaredNorm();
    lap_term = regularized ? lambda * laplacian_quadratic(V, graph->laplacian) : 0.0;
    return rec_term + lap_term;
  };

  double rec_term, lap_term;
  double prev = objective(rec_term, lap_term);
  result.objective_trace.push_back(prev);
  result.reconstruction_trace.push_back(rec_term);
  result.laplacian_trace.push_back(lap_term);

  int flat_streak = 0;
  for (int iter = 0; iter < config.max_iters; ++iter) {
    // M <- M .* (X V^T) ./ (M (V V^T) + eps)
    const Eigen::MatrixXd VVt = V * V.transpose();
    M.array() *= (X * V.transpose()).array() / ((M * VVt).array() + eps);

    // V <- V .* (M^T X + lambda V W) ./ ((M^T M) V + lambda V D + eps)
    const Eigen::MatrixXd MtM = M.transpose() * M;
    if (regularized) {
      Eigen::MatrixXd numer = M.transpose() * X + lambda * (V * graph->weights);
      Eigen::MatrixXd denom = MtM * V + lambda * (V * graph->degrees.asDiagonal());
      V.array() *= numer.array() / (denom.array() + eps);
    } else {
      V.array() *= (M.transpose() * X).array() / ((MtM * V).array() + eps);
    }

    const double cur = objective(rec_term, lap_term);
    if (!std::isfinite(cur))
      throw NumericalError("factorize: non-finite objective at iteration " +
                           std::to_string(iter + 1));
    result.objective_trace.push_back(cur);
    result.reconstruction_trace.push_back(rec_term);
    result.laplacian_trace.push_back(lap_term);
    result.iters_run = iter + 1;

    const double rel_decrease = (prev - cur) / std::max(std::abs(prev), 1e-300);
    prev = cur;
    if (rel_decrease < config.rel_tol) {
      if (++flat_streak >= 5) {
        result.converged = true;
        break;
      }
    } else {
      flat_streak = 0;
    }
  }
  return result;
}

double reconstruction_error(const Eigen::MatrixXd& X, const Eigen::MatrixXd& basis,
                            const Eigen::MatrixXd& projections) {
  if (basis.rows() != X.rows() || projections.cols() != X.cols() ||
      basis.cols() != projections.rows())
    throw DataError("reconstruction error: factor shapes do not match X");
  return (X - basis * projections).norm();
}

Eigen::VectorXd project(const Eigen::MatrixXd& basis, const Eigen::VectorXd& state,
                        const FactorizationConfig& config) {
  if (state.size() != basis.rows())
    throw DataError("project: state length " + std::to_string(state.size()) +
                    " does not match basis rows " + std::to_string(basis.rows()));
  const double eps = config.epsilon;
  const Eigen::MatrixXd MtM = basis.transpose() * basis;
  const Eigen::VectorXd Mtx = basis.transpose() * state;

  Eigen::VectorXd v = Eigen::VectorXd::Constant(basis.cols(), 0.5);
  const int iters = std::max(config.max_iters, 1000);
  for (int iter = 0; iter < iters; ++iter) {
    const Eigen::VectorXd next =
        v.array() * Mtx.array() / ((MtM * v).array() + eps);
    const double change = (next - v).cwiseAbs().maxCoeff();
    const double scale = std::max(v.cwiseAbs().maxCoeff(), 1e-300);
    v = next;
    if (change / scale < 1e-12) break;
  }
  return v;
}

DimensionSelection select_dimension(const Eigen::MatrixXd& X, const SimilarityGraph* graph,
                                    const std::vector<int>& candidate_s,
                                    const FactorizationConfig& config,
                                    double drop_fraction) {
  if (candidate_s.empty()) throw ConfigError("select dimension: no candidates");
  if (!std::is_sorted(candidate_s.begin(), candidate_s.end()))
    throw ConfigError("select dimension: candidates must be ascending");

  DimensionSelection sel;
  sel.candidates = candidate_s;
  sel.errors.reserve(candidate_s.size());
  for (int s : candidate_s) {
    FactorizationConfig c = config;
    c.s = s;
    const FactorizationResult r = factorize(X, graph, c);
    sel.errors.push_back(reconstruction_error(X, r.basis, r.projections));
  }

  // Elbow rule over marginal decreases d_i = e_{i-1} - e_i: recommend the
  // candidate just before the first decrease that falls under drop_fraction
  // of the mean of all earlier decreases.
  sel.recommended = candidate_s.back();
  if (candidate_s.size() >= 3) {
    std::vector<double> drops(candidate_s.size() - 1);
    for (std::size_t i = 1; i < candidate_s.size(); ++i)
      drops[i - 1] = std::max(sel.errors[i - 1] - sel.errors[i], 0.0);
    double earlier_sum = drops[0];
    for (std::size_t i = 1; i < drops.size(); ++i) {
      const double earlier_mean = earlier_sum / static_cast<double>(i);
      if (drops[i] < drop_fraction * earlier_mean) {
        sel.recommended = candidate_s[i];
        break;
      }
      earlier_sum += drops[i];
    }
  }
  return sel;
}

std::size_t top_entry_count(std::size_t n, double fraction) {
  if (!(fraction > 0.0) || fraction > 1.0)
    throw ConfigError("top fraction must lie in (0,1]");
  return std::max<std::size_t>(1, static_cast<std::size_t>(
                                      std::floor(static_cast<double>(n) * fraction)));
}

BasisImportanceReport basis_importance(const FactorizationResult& result,
                                       double top_fraction) {
  const auto s = static_cast<std::size_t>(result.projections.rows());
  const auto n = static_cast<std::size_t>(result.basis.rows());
  BasisImportanceReport report;
  report.top_fraction = top_fraction;
  report.importance.resize(s);
  for (std::size_t i = 0; i < s; ++i)
    report.importance[i] = result.projections.row(static_cast<std::int64_t>(i)).mean();

  report.ranking.resize(s);
  std::iota(report.ranking.begin(), report.ranking.end(), 0);
  std::stable_sort(report.ranking.begin(), report.ranking.end(), [&](int a, int b) {
    return report.importance[static_cast<std::size_t>(a)] >
           report.importance[static_cast<std::size_t>(b)];
  });

  const std::size_t count = top_entry_count(n, top_fraction);
  report.top_links.resize(s);
  std::vector<LinkId> order(n);
  for (std::size_t b = 0; b < s; ++b) {
    std::iota(order.begin(), order.end(), 0);
    const auto col = result.basis.col(static_cast<std::int64_t>(b));
    std::stable_sort(order.begin(), order.end(),
                     [&](LinkId a, LinkId c) { return col(a) > col(c); });
    report.top_links[b].assign(order.begin(),
                               order.begin() + static_cast<std::ptrdiff_t>(count));
  }
  return report;
}

}  // namespace netstate
