#pragma once

// Observation plans and the two equivalent corruption models, plus the
// batch partition used by the golfing construction.

#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "lrmc/leverage.hpp"
#include "lrmc/linalg.hpp"
#include "lrmc/random.hpp"

namespace lrmc {

/// Per-entry observation probabilities p_ij and corruption rate q.
struct SamplingPlan {
  Matrix P;
  double q = 0.0;

  Index rows() const { return P.rows(); }
  Index cols() const { return P.cols(); }
  /// Compensated (Neumaier) mean, exact for constant plans.
  double mean() const {
    double sum = 0.0, carry = 0.0;
    for (Index k = 0; k < P.size(); ++k) {
      const double v = P.data()[k];
      const double t = sum + v;
      carry += std::abs(sum) >= std::abs(v) ? (sum - t) + v : (v - t) + sum;
      sum = t;
    }
    return (sum + carry) / static_cast<double>(P.size());
  }

  void validate() const {
    require_finite(P, "SamplingPlan");
    if (P.size() == 0) throw Error("SamplingPlan: empty probability matrix");
    if (P.minCoeff() < 0.0 || P.maxCoeff() > 1.0) {
      throw Error("SamplingPlan: probabilities must lie in [0,1]");
    }
    if (!(q >= 0.0 && q < 0.5)) throw Error("SamplingPlan: q must lie in [0, 1/2)");
  }
};

inline void check_rate(double q) {
  if (!(q >= 0.0 && q < 0.5)) {
    throw Error("corruption rate q=" + std::to_string(q) + " outside [0, 1/2)");
  }
}

inline SamplingPlan plan_uniform(Index rows, Index cols, double p, double q) {
  if (rows <= 0 || cols <= 0) throw Error("plan_uniform: dimensions must be positive");
  if (!(p >= 0.0 && p <= 1.0)) {
    throw Error("plan_uniform: p=" + std::to_string(p) + " outside [0,1]");
  }
  check_rate(q);
  return {Matrix::Constant(rows, cols, p), q};
}

inline SamplingPlan plan_uniform(Index n, double p, double q) { return plan_uniform(n, n, p, q); }

struct LeveragedPlan {
  SamplingPlan plan;
  /// Sum of probability mass removed by clipping at 1.
  double clipped_mass = 0.0;
};

/// p_ij = p * n1 n2 sqrt(mu_i + nu_j) / sum_{ij} sqrt(mu_i + nu_j), clipped to [0,1].
inline LeveragedPlan plan_leveraged(double p, double q, const LeverageProfile& prof) {
  if (!(p > 0.0 && p <= 1.0)) {
    throw Error("plan_leveraged: p=" + std::to_string(p) + " outside (0,1]");
  }
  check_rate(q);
  const Index n1 = prof.rows();
  const Index n2 = prof.cols();
  if (n1 == 0 || n2 == 0) throw Error("plan_leveraged: empty profile");
  if (prof.mu.minCoeff() < 0.0 || prof.nu.minCoeff() < 0.0) {
    throw Error("plan_leveraged: negative leverage score");
  }

  Matrix w(n1, n2);
  for (Index j = 0; j < n2; ++j)
    for (Index i = 0; i < n1; ++i) w(i, j) = std::sqrt(prof.mu(i) + prof.nu(j));
  const double total = w.sum();
  if (!(total > 0.0)) throw Error("plan_leveraged: all leverage scores are zero");

  Matrix raw = (p * static_cast<double>(n1) * static_cast<double>(n2) / total) * w;
  Matrix clipped = raw.cwiseMin(1.0);
  LeveragedPlan out;
  out.clipped_mass = (raw - clipped).sum();
  out.plan = {std::move(clipped), q};
  return out;
}

/// p_ij = min(1, max(c_p (mu_i + nu_j) r log^2(n) / n, 1/n^5)) with n = max(n1, n2):
/// the lower bound of the exact-recovery guarantee, scaled by c_p.
inline SamplingPlan plan_from_bound(const LeverageProfile& prof, double c_p, double q) {
  if (!(c_p > 0.0)) throw Error("plan_from_bound: c_p must be positive");
  check_rate(q);
  const Index n1 = prof.rows();
  const Index n2 = prof.cols();
  const double n = static_cast<double>(std::max(n1, n2));
  const double logn = std::log(n);
  const double scale = c_p * static_cast<double>(prof.rank) * logn * logn / n;
  const double floor = std::pow(n, -5.0);
  Matrix P(n1, n2);
  for (Index j = 0; j < n2; ++j)
    for (Index i = 0; i < n1; ++i)
      P(i, j) = std::min(1.0, std::max(scale * (prof.mu(i) + prof.nu(j)), floor));
  return {std::move(P), q};
}

/// Internals of the second corruption model.
struct Model2Internals {
  IndexMask gamma_prime;   // Ber(p_ij (1 - 2q))
  IndexMask omega_prime;   // Ber(2 p_ij q / (1 - p_ij + 2 q p_ij))
  Matrix W;                // Rademacher signs
  IndexMask omega_dprime;  // {(i,j) in omega_prime : W_ij = K_ij}
};

/// Observed entries O, corrupted entries Omega and clean entries Gamma = O \ Omega.
struct ObservationSet {
  IndexMask observed;
  IndexMask corrupted;
  IndexMask clean;
  Matrix data;        // P_O(L) + S
  Matrix corruption;  // S, supported on `corrupted`
  std::optional<Model2Internals> model2;
};

namespace detail {

inline void check_signs(const Matrix& k, Index rows, Index cols, std::string_view what) {
  require_same_shape(k, rows, cols, what);
  if (!(k.array().abs() == 1.0).all()) {
    throw Error(std::string(what) + ": sign matrix entries must be +1 or -1");
  }
}

}  // namespace detail

/// Random +-1 matrix.
inline Matrix random_signs(Index rows, Index cols, Rng& rng) {
  Matrix k(rows, cols);
  for (Index i = 0; i < rows; ++i)
    for (Index j = 0; j < cols; ++j) k(i, j) = rademacher(rng);
  return k;
}

/// Model 1: O ~ Ber(p_ij), Omega drawn from O entrywise Ber(q),
/// S = amplitude * P_Omega(K), data = P_O(L) + S.
inline ObservationSet sample_model1(const SamplingPlan& plan, const Matrix& L, const Matrix& K,
                                    Rng& rng, double amplitude = 1.0) {
  plan.validate();
  const Index n1 = plan.rows();
  const Index n2 = plan.cols();
  require_same_shape(L, n1, n2, "sample_model1");
  require_finite(L, "sample_model1");
  detail::check_signs(K, n1, n2, "sample_model1");

  ObservationSet obs{IndexMask(n1, n2), IndexMask(n1, n2), IndexMask(n1, n2), Matrix(), Matrix(),
                     std::nullopt};
  for (Index i = 0; i < n1; ++i) {
    for (Index j = 0; j < n2; ++j) {
      const double u_obs = uniform01(rng);
      const double u_cor = uniform01(rng);
      if (u_obs < plan.P(i, j)) {
        obs.observed.insert(i, j);
        if (u_cor < plan.q) obs.corrupted.insert(i, j);
      }
    }
  }
  obs.clean = obs.observed - obs.corrupted;
  obs.corruption = amplitude * project_mask(obs.corrupted, K);
  obs.data = project_mask(obs.observed, L) + obs.corruption;
  return obs;
}

/// Probability of Omega' in Model 2; the p_ij = 1, q = 0 corner is taken as 0.
inline double omega_prime_probability(double p, double q) {
  const double num = 2.0 * p * q;
  if (num == 0.0) return 0.0;
  return num / (1.0 - p + 2.0 * q * p);
}

namespace detail {

inline Model2Internals draw_model2(const SamplingPlan& plan, const Matrix& K, Rng& rng,
                                   const IndexMask* gamma_prime) {
  plan.validate();
  const Index n1 = plan.rows();
  const Index n2 = plan.cols();
  check_signs(K, n1, n2, "sample_model2");

  Model2Internals m{IndexMask(n1, n2), IndexMask(n1, n2), Matrix(n1, n2), IndexMask(n1, n2)};
  if (gamma_prime != nullptr) {
    if (gamma_prime->rows() != n1 || gamma_prime->cols() != n2) {
      throw Error("sample_model2: gamma_prime dimension mismatch");
    }
    m.gamma_prime = *gamma_prime;
  }
  const double keep = 1.0 - 2.0 * plan.q;
  for (Index i = 0; i < n1; ++i) {
    for (Index j = 0; j < n2; ++j) {
      const double p = plan.P(i, j);
      const double u_gamma = uniform01(rng);
      const double u_omega = uniform01(rng);
      m.W(i, j) = rademacher(rng);
      if (gamma_prime == nullptr && u_gamma < p * keep) m.gamma_prime.insert(i, j);
      if (u_omega < omega_prime_probability(p, plan.q)) {
        m.omega_prime.insert(i, j);
        if (m.W(i, j) == K(i, j)) m.omega_dprime.insert(i, j);
      }
    }
  }
  return m;
}

}  // namespace detail

/// Model 2: O = Gamma' u Omega', Omega = Omega'' \ Gamma', Gamma = O \ Omega.
/// The returned set carries no data; see observe().
inline ObservationSet sample_model2(const SamplingPlan& plan, const Matrix& K, Rng& rng) {
  Model2Internals m = detail::draw_model2(plan, K, rng, nullptr);
  ObservationSet obs;
  obs.observed = m.gamma_prime | m.omega_prime;
  obs.corrupted = m.omega_dprime - m.gamma_prime;
  obs.clean = obs.observed - obs.corrupted;
  obs.model2 = std::move(m);
  return obs;
}

/// Model 2 with a caller-supplied Gamma' (e.g. the union of golfing batches).
inline ObservationSet sample_model2(const SamplingPlan& plan, const Matrix& K, Rng& rng,
                                    const IndexMask& gamma_prime) {
  Model2Internals m = detail::draw_model2(plan, K, rng, &gamma_prime);
  ObservationSet obs;
  obs.observed = m.gamma_prime | m.omega_prime;
  obs.corrupted = m.omega_dprime - m.gamma_prime;
  obs.clean = obs.observed - obs.corrupted;
  obs.model2 = std::move(m);
  return obs;
}

/// Fills data and corruption of a Model-2 set for the low-rank matrix L.
inline void observe(ObservationSet& obs, const Matrix& L, const Matrix& K, double amplitude = 1.0) {
  require_same_shape(L, obs.observed.rows(), obs.observed.cols(), "observe");
  detail::check_signs(K, L.rows(), L.cols(), "observe");
  obs.corruption = amplitude * project_mask(obs.corrupted, K);
  obs.data = project_mask(obs.observed, L) + obs.corruption;
}

// ---------------------------------------------------------------------------
// Golfing partition

/// Number of golfing batches, floor(5 ln n + 1).
inline int golfing_batch_count(Index n) {
  if (n < 2) throw Error("golfing_batch_count: n must be >= 2");
  return static_cast<int>(std::floor(5.0 * std::log(static_cast<double>(n)) + 1.0));
}

/// Solves 1 - p' = (1 - p'/6)^2 (1 - rho)^(t-2) for rho.
inline double golfing_rate(double p_prime, int t) {
  if (t < 3) throw Error("golfing_rate: need at least 3 batches");
  if (!(p_prime >= 0.0 && p_prime <= 1.0)) throw Error("golfing_rate: p' outside [0,1]");
  const double head = 1.0 - p_prime / 6.0;
  const double ratio = std::min(1.0, (1.0 - p_prime) / (head * head));
  return 1.0 - std::pow(ratio, 1.0 / static_cast<double>(t - 2));
}

/// Gamma' = Gamma_1 u ... u Gamma_t with Gamma_k ~ Ber(rho_k) independently;
/// rho_1 = rho_2 = p_ij (1 - 2q) / 6 and rho_3 = ... = rho_t = rho_ij.
struct GolfingPartition {
  int t = 0;
  std::vector<IndexMask> batches;
  Matrix first_rate;  // rho_1 = rho_2
  Matrix later_rate;  // rho_3 .. rho_t

  /// Entrywise rate of batch k (0-based).
  const Matrix& rate(int k) const { return k < 2 ? first_rate : later_rate; }

  IndexMask union_mask() const {
    IndexMask u(first_rate.rows(), first_rate.cols());
    for (const auto& b : batches) u = u | b;
    return u;
  }
};

/// Rates only, for batch count t.
inline GolfingPartition golfing_rates(const SamplingPlan& plan, int t) {
  plan.validate();
  GolfingPartition part;
  part.t = t;
  const Matrix p_prime = plan.P * (1.0 - 2.0 * plan.q);
  part.first_rate = p_prime / 6.0;
  part.later_rate = p_prime.unaryExpr([t](double v) { return golfing_rate(v, t); });
  return part;
}

/// Draws the batches; t defaults to floor(5 ln n + 1) with n = max(n1, n2).
inline GolfingPartition golfing_partition(const SamplingPlan& plan, Rng& rng,
                                          std::optional<int> t = std::nullopt) {
  const int batches = t.value_or(golfing_batch_count(std::max(plan.rows(), plan.cols())));
  GolfingPartition part = golfing_rates(plan, batches);
  const Index n1 = plan.rows();
  const Index n2 = plan.cols();
  part.batches.reserve(static_cast<std::size_t>(batches));
  for (int k = 0; k < batches; ++k) {
    const Matrix& rho = part.rate(k);
    IndexMask b(n1, n2);
    for (Index i = 0; i < n1; ++i)
      for (Index j = 0; j < n2; ++j)
        if (uniform01(rng) < rho(i, j)) b.insert(i, j);
    part.batches.push_back(std::move(b));
  }
  return part;
}

}  // namespace lrmc
