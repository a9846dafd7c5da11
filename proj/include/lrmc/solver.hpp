#pragma once

// Nuclear-norm + l1 recovery from a partially observed, sparsely corrupted
// matrix:
//
//   min |L|_* + lambda |S|_1   s.t.  P_O(M) = P_O(L) + S,  supp(S) in O,
//
// solved with an inexact augmented Lagrangian method. Unobserved entries of L
// are free; the L-step fills them from the previous iterate.

#include <algorithm>
#include <cmath>
#include <optional>
#include <vector>

#include "lrmc/linalg.hpp"
#include "lrmc/sampling.hpp"

namespace lrmc {

/// lambda = 1 / (24 sqrt(n ln n)).
inline double default_lambda(Index n) {
  if (n < 2) throw Error("default_lambda: n must be >= 2");
  const double nd = static_cast<double>(n);
  return 1.0 / (24.0 * std::sqrt(nd * std::log(nd)));
}

inline double shrink(double x, double tau) {
  return std::copysign(std::max(std::abs(x) - tau, 0.0), x);
}

struct SolverConfig {
  /// Unset means default_lambda(max(n1, n2)).
  std::optional<double> lambda;
  int max_iters = 500;
  double tol = 1e-7;
  /// Unset means 1.25 / |P_O(M)|_2.
  std::optional<double> penalty_init;
  double penalty_growth = 1.5;
  /// Unset means 1e7 * penalty_init.
  std::optional<double> penalty_cap;
  /// Sampling-bound constants; consumed by planners and validators only.
  double c_p = 32.0;
  double c_q = 0.1;

  void validate() const {
    if (lambda && !(*lambda > 0.0)) throw Error("SolverConfig: lambda must be positive");
    if (!(tol > 0.0)) throw Error("SolverConfig: tol must be positive");
    if (!(penalty_growth > 1.0)) throw Error("SolverConfig: penalty_growth must exceed 1");
    if (max_iters < 1) throw Error("SolverConfig: max_iters must be >= 1");
    if (penalty_init && !(*penalty_init > 0.0)) throw Error("SolverConfig: penalty_init must be positive");
    if (penalty_cap && !(*penalty_cap > 0.0)) throw Error("SolverConfig: penalty_cap must be positive");
  }
};

struct Solution {
  Matrix low_rank;  // L_hat
  Matrix sparse;    // S_hat, zero outside O
  int iters = 0;
  double feasibility_residual = 0.0;
  double objective = 0.0;
  bool converged = false;
  /// Objective changed by less than tol (relative) over the last iteration.
  bool objective_stagnated = false;
  double lambda = 0.0;
  std::vector<double> residual_history;
  /// Iteration (1-based) at which the penalty first hit its cap; 0 if never.
  int cap_reached_at = 0;
};

namespace detail {

struct SvtResult {
  Matrix value;
  double nuclear_norm = 0.0;
};

/// Singular-value soft-threshold at level tau.
inline SvtResult singular_value_threshold(const Matrix& b, double tau) {
  Eigen::BDCSVD<Matrix> svd(b, Eigen::ComputeThinU | Eigen::ComputeThinV);
  if (svd.info() != Eigen::Success) throw Error("solve: SVD did not converge in L-step");
  const Vector& s = svd.singularValues();
  Index keep = 0;
  while (keep < s.size() && s(keep) > tau) ++keep;
  SvtResult out;
  if (keep == 0) {
    out.value = Matrix::Zero(b.rows(), b.cols());
    return out;
  }
  const Vector shrunk = (s.head(keep).array() - tau).matrix();
  out.value = svd.matrixU().leftCols(keep) * shrunk.asDiagonal() *
              svd.matrixV().leftCols(keep).transpose();
  out.nuclear_norm = shrunk.sum();
  return out;
}

}  // namespace detail

inline Solution solve(const Matrix& data, const IndexMask& observed, const SolverConfig& cfg = {}) {
  cfg.validate();
  require_finite(data, "solve");
  require_same_shape(data, observed.rows(), observed.cols(), "solve");
  if (observed.empty()) throw Error("solve: observation set is empty");

  const Index n1 = data.rows();
  const Index n2 = data.cols();
  const BoolGrid& in = observed.grid();
  const double lambda = cfg.lambda.value_or(default_lambda(std::max<Index>(std::max(n1, n2), 2)));

  const Matrix pm = project_mask(observed, data);
  const double pm_fro = pm.norm();
  const double denom = std::max(1.0, pm_fro);
  const double pm_spec = spectral_norm(pm);
  double mu = cfg.penalty_init.value_or(pm_spec > 0.0 ? 1.25 / pm_spec : 1.25);
  const double cap = cfg.penalty_cap.value_or(1e7 * mu);
  mu = std::min(mu, cap);

  Solution sol;
  sol.lambda = lambda;
  Matrix L = Matrix::Zero(n1, n2);
  Matrix S = Matrix::Zero(n1, n2);
  Matrix Y = Matrix::Zero(n1, n2);
  double prev_objective = -1.0;

  for (int it = 1; it <= cfg.max_iters; ++it) {
    // S-step: entrywise shrink on O.
    const double s_tau = lambda / mu;
    const Matrix s_arg = pm - L + Y / mu;
    for (Index j = 0; j < n2; ++j)
      for (Index i = 0; i < n1; ++i) S(i, j) = in(i, j) ? shrink(s_arg(i, j), s_tau) : 0.0;

    // L-step: SVT of the observed residual, previous L off O.
    const Matrix b = in.select(pm - S + Y / mu, L);
    detail::SvtResult svt = detail::singular_value_threshold(b, 1.0 / mu);
    L = std::move(svt.value);

    // Dual ascent on O.
    const Matrix r = in.select(pm - L - S, 0.0);
    Y += mu * r;

    const double residual = r.norm() / denom;
    sol.residual_history.push_back(residual);
    sol.iters = it;
    sol.feasibility_residual = residual;
    sol.objective = svt.nuclear_norm + lambda * S.lpNorm<1>();
    sol.objective_stagnated =
        prev_objective >= 0.0 &&
        std::abs(sol.objective - prev_objective) <= cfg.tol * std::max(1.0, std::abs(prev_objective));
    prev_objective = sol.objective;

    if (residual <= cfg.tol) {
      sol.converged = true;
      break;
    }
    mu = std::min(cfg.penalty_growth * mu, cap);
    if (mu >= cap && sol.cap_reached_at == 0) sol.cap_reached_at = it;
  }

  sol.low_rank = std::move(L);
  sol.sparse = std::move(S);
  return sol;
}

inline Solution solve(const ObservationSet& obs, const SolverConfig& cfg = {}) {
  return solve(obs.data, obs.observed, cfg);
}

/// |L_hat - L|_F / |L|_F.
inline double relative_error(const Matrix& l_hat, const Matrix& l) {
  require_same_shape(l_hat, l.rows(), l.cols(), "relative_error");
  const double base = l.norm();
  if (base == 0.0) throw Error("undefined relative error: reference matrix is zero");
  return (l_hat - l).norm() / base;
}

/// |L|_* + lambda |S|_1.
inline double recovery_objective(const Matrix& l, const Matrix& s, double lambda) {
  Eigen::BDCSVD<Matrix> svd(l);
  return svd.singularValues().sum() + lambda * s.lpNorm<1>();
}

}  // namespace lrmc
