#pragma once

// Row/column leverage scores and the two leverage-weighted norms.

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "lrmc/linalg.hpp"

namespace lrmc {

/// Row scores mu_i = (n1/r)|U^T e_i|^2 and column scores nu_j = (n2/r)|V^T e_j|^2.
struct LeverageProfile {
  Vector mu;
  Vector nu;
  Index rank = 0;

  Index rows() const { return mu.size(); }
  Index cols() const { return nu.size(); }

  /// Standard incoherence parameter max{mu_i, nu_j}.
  double incoherence() const { return std::max(mu.maxCoeff(), nu.maxCoeff()); }

  static LeverageProfile uniform(Index rows, Index cols, Index rank) {
    return {Vector::Ones(rows), Vector::Ones(cols), rank};
  }
};

inline LeverageProfile leverage_scores(const SvdFactors& f) {
  const Index r = f.rank();
  if (r < 1) throw Error("leverage_scores: rank must be positive");
  const double n1 = static_cast<double>(f.rows());
  const double n2 = static_cast<double>(f.cols());
  return {(n1 / static_cast<double>(r)) * f.U.rowwise().squaredNorm(),
          (n2 / static_cast<double>(r)) * f.V.rowwise().squaredNorm(), r};
}

namespace detail {

// sqrt(n / (score * r)); infinite for a zero score.
inline Vector score_weights(const Vector& scores, double n, double r) {
  Vector w(scores.size());
  for (Index i = 0; i < scores.size(); ++i) {
    w(i) = scores(i) > 0.0 ? std::sqrt(n / (scores(i) * r))
                           : std::numeric_limits<double>::infinity();
  }
  return w;
}

// |value| * weight with the convention 0 * inf = 0.
inline double weighted(double value, double weight) {
  return value == 0.0 ? 0.0 : std::abs(value) * weight;
}

inline void check_profile_shape(const Matrix& z, const LeverageProfile& p,
                                std::string_view what) {
  require_same_shape(z, p.rows(), p.cols(), what);
  if (p.rank < 1) throw Error(std::string(what) + ": profile rank must be positive");
}

}  // namespace detail

/// |Z|_{mu(inf)} = max_{a,b} |Z_ab| sqrt(n1/(mu_a r)) sqrt(n2/(nu_b r)).
/// Entries on a zero score count as 0 if Z_ab = 0 and +inf otherwise.
inline double mu_inf_norm(const Matrix& z, const LeverageProfile& p) {
  detail::check_profile_shape(z, p, "mu_inf_norm");
  const double r = static_cast<double>(p.rank);
  const Vector wr = detail::score_weights(p.mu, static_cast<double>(p.rows()), r);
  const Vector wc = detail::score_weights(p.nu, static_cast<double>(p.cols()), r);
  double best = 0.0;
  for (Index b = 0; b < z.cols(); ++b)
    for (Index a = 0; a < z.rows(); ++a)
      best = std::max(best, detail::weighted(detail::weighted(z(a, b), wr(a)), wc(b)));
  return best;
}

/// |Z|_{mu(inf,2)}: largest leverage-weighted row or column 2-norm.
inline double mu_inf2_norm(const Matrix& z, const LeverageProfile& p) {
  detail::check_profile_shape(z, p, "mu_inf2_norm");
  const double r = static_cast<double>(p.rank);
  const Vector wr = detail::score_weights(p.mu, static_cast<double>(p.rows()), r);
  const Vector wc = detail::score_weights(p.nu, static_cast<double>(p.cols()), r);
  const Vector row_norms = z.rowwise().norm();
  const Vector col_norms = z.colwise().norm().transpose();
  double best = 0.0;
  for (Index a = 0; a < row_norms.size(); ++a)
    best = std::max(best, detail::weighted(row_norms(a), wr(a)));
  for (Index b = 0; b < col_norms.size(); ++b)
    best = std::max(best, detail::weighted(col_norms(b), wc(b)));
  return best;
}

struct LeverageEstimateOptions {
  /// Return mu_i = nu_j = 1 instead of failing on an all-zero observation.
  bool uniform_fallback = false;
  double rank_tol = kDefaultRankTol;
};

/// Approximate leverage scores from partial, possibly corrupted data: zero-fill
/// outside the mask, rescale by 1/p_hat, keep the best rank-r SVD.
inline LeverageProfile estimate_leverage(const Matrix& observed, const IndexMask& mask,
                                         Index r, double p_hat,
                                         const LeverageEstimateOptions& opts = {}) {
  require_finite(observed, "estimate_leverage");
  require_same_shape(observed, mask.rows(), mask.cols(), "estimate_leverage");
  if (mask.empty()) throw Error("estimate_leverage: observation mask is empty");
  if (r < 1) throw Error("estimate_leverage: rank must be >= 1");
  if (!(p_hat > 0.0 && p_hat <= 1.0)) throw Error("estimate_leverage: p_hat must be in (0,1]");

  const Matrix filled = project_mask(mask, observed) / p_hat;
  if (filled.isZero(0.0)) {
    if (opts.uniform_fallback) return LeverageProfile::uniform(mask.rows(), mask.cols(), r);
    throw Error("estimate_leverage: observed data is identically zero");
  }
  SvdFactors f = reduced_svd(filled, opts.rank_tol);
  if (f.rank() < r) {
    throw Error("estimate_leverage: requested rank " + std::to_string(r) +
                " exceeds numerical rank " + std::to_string(f.rank()) + " (deficit " +
                std::to_string(r - f.rank()) + ")");
  }
  return leverage_scores(truncated(std::move(f), r));
}

}  // namespace lrmc
