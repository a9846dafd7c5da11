#pragma once

// Golfing-scheme dual certificate and empirical checks of the concentration
// inequalities behind it.
//
// The certificate Y is built as
//
//   X_0 = P_T(UV^T - lambda P_{Omega'}(W))
//   X_k = (P_T - (1/rho_k) P_T P_{Gamma_k} P_T) X_{k-1}
//   Y   = sum_k (1/rho_k) P_{Gamma_k} X_{k-1}
//
// where (1/rho_k) P_{Gamma_k} weights each member (i,j) of batch k by
// 1/rho_k(i,j) and zeroes everything else.

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "lrmc/leverage.hpp"
#include "lrmc/linalg.hpp"
#include "lrmc/random.hpp"
#include "lrmc/sampling.hpp"

namespace lrmc {

struct GolfingTrace {
  std::vector<double> x_fro;      // |X_k|_F, k = 0..t
  std::vector<double> x_mu_inf;   // |X_k|_{mu(inf)}
  std::vector<double> x_mu_inf2;  // |X_k|_{mu(inf,2)}
  Matrix Y;
  /// max_k |X_k - P_T(X_k)|_F / |X_0|_F.
  double max_range_defect = 0.0;
};

namespace detail {

// (1/rho) P_batch(X), entrywise.
inline Matrix weighted_restriction(const IndexMask& batch, const Matrix& rho, const Matrix& x) {
  Matrix out = Matrix::Zero(x.rows(), x.cols());
  const BoolGrid& in = batch.grid();
  for (Index j = 0; j < x.cols(); ++j) {
    for (Index i = 0; i < x.rows(); ++i) {
      if (!in(i, j)) continue;
      if (!(rho(i, j) > 0.0)) {
        throw Error("construct_certificate: batch member (" + std::to_string(i) + "," +
                    std::to_string(j) + ") has zero rate");
      }
      out(i, j) = x(i, j) / rho(i, j);
    }
  }
  return out;
}

inline void record(GolfingTrace& trace, const SvdFactors& f, const LeverageProfile& prof,
                   const Matrix& x) {
  const double fro = x.norm();
  trace.x_fro.push_back(fro);
  trace.x_mu_inf.push_back(mu_inf_norm(x, prof));
  trace.x_mu_inf2.push_back(mu_inf2_norm(x, prof));
  const double scale = trace.x_fro.front();
  if (scale > 0.0) {
    trace.max_range_defect = std::max(trace.max_range_defect, (x - project_T(f, x)).norm() / scale);
  }
}

}  // namespace detail

inline GolfingTrace construct_certificate(const SvdFactors& f, const GolfingPartition& part,
                                          const IndexMask& omega_prime, const Matrix& W,
                                          double lambda) {
  const Index n1 = f.rows();
  const Index n2 = f.cols();
  require_same_shape(W, n1, n2, "construct_certificate");
  if (omega_prime.rows() != n1 || omega_prime.cols() != n2) {
    throw Error("construct_certificate: omega_prime dimension mismatch");
  }
  if (static_cast<int>(part.batches.size()) != part.t) {
    throw Error("construct_certificate: partition has " + std::to_string(part.batches.size()) +
                " batches, expected " + std::to_string(part.t));
  }
  for (const auto& b : part.batches) {
    if (b.rows() != n1 || b.cols() != n2) throw Error("construct_certificate: batch dimension mismatch");
  }

  const LeverageProfile prof = leverage_scores(f);
  GolfingTrace trace;
  trace.Y = Matrix::Zero(n1, n2);

  Matrix x = project_T(f, f.uv() - lambda * project_mask(omega_prime, W));
  detail::record(trace, f, prof, x);
  for (int k = 0; k < part.t; ++k) {
    const Matrix step = detail::weighted_restriction(part.batches[static_cast<std::size_t>(k)],
                                                     part.rate(k), x);
    trace.Y += step;
    const Matrix xt = project_T(f, x);
    x = xt - project_T(f, detail::weighted_restriction(part.batches[static_cast<std::size_t>(k)],
                                                       part.rate(k), xt));
    detail::record(trace, f, prof, x);
  }
  return trace;
}

struct CertificateThresholds {
  std::optional<double> cond1;  // default lambda / n^3
  std::optional<double> cond2;  // default 1/4
  std::optional<double> cond3;  // default lambda / 4
};

struct CertificateReport {
  double cond1_value = 0.0;  // |P_T(Y + lambda P_{Omega'}(W) - UV^T)|_F
  double cond1_bound = 0.0;
  double cond2_value = 0.0;  // |P_{T-perp}(Y + lambda P_{Omega'}(W))|, spectral
  double cond2_bound = 0.0;
  double cond3_value = 0.0;  // |P_{Gamma'}(Y)|_inf
  double cond3_bound = 0.0;
  double cond4_max_abs = 0.0;  // |P_{Gamma'^c}(Y)|_inf
  bool decay_ok = false;       // |X_k|_F <= 2^-k |X_0|_F for every k
  bool cond1_monotone = false; // |X_k|_F non-increasing in k
  bool cond1_pass = false;
  bool cond2_pass = false;
  bool cond3_pass = false;
  bool cond4_pass = false;
};

inline bool halving_decay(const std::vector<double>& fro) {
  if (fro.empty()) return true;
  double bound = fro.front();
  for (std::size_t k = 1; k < fro.size(); ++k) {
    bound *= 0.5;
    if (fro[k] > bound) return false;
  }
  return true;
}

inline bool non_increasing(const std::vector<double>& v) {
  return std::adjacent_find(v.begin(), v.end(), [](double a, double b) { return b > a * (1.0 + 1e-12); }) == v.end();
}

inline CertificateReport evaluate_conditions(const GolfingTrace& trace, const SvdFactors& f,
                                             const IndexMask& omega_prime, const Matrix& W,
                                             const IndexMask& gamma_prime, double lambda,
                                             const CertificateThresholds& thresholds = {}) {
  const Index n1 = f.rows();
  const Index n2 = f.cols();
  require_same_shape(trace.Y, n1, n2, "evaluate_conditions");
  require_same_shape(W, n1, n2, "evaluate_conditions");
  const double n = static_cast<double>(std::max(n1, n2));

  const Matrix corrupted = lambda * project_mask(omega_prime, W);
  const Matrix sum = trace.Y + corrupted;

  CertificateReport rep;
  rep.cond1_value = project_T(f, sum - f.uv()).norm();
  rep.cond2_value = spectral_norm(project_T_perp(f, sum));
  const Matrix on = project_mask(gamma_prime, trace.Y);
  const Matrix off = trace.Y - on;
  rep.cond3_value = on.size() ? on.cwiseAbs().maxCoeff() : 0.0;
  rep.cond4_max_abs = off.size() ? off.cwiseAbs().maxCoeff() : 0.0;

  rep.cond1_bound = thresholds.cond1.value_or(lambda / (n * n * n));
  rep.cond2_bound = thresholds.cond2.value_or(0.25);
  rep.cond3_bound = thresholds.cond3.value_or(lambda / 4.0);
  rep.cond1_pass = rep.cond1_value <= rep.cond1_bound;
  rep.cond2_pass = rep.cond2_value <= rep.cond2_bound;
  rep.cond3_pass = rep.cond3_value <= rep.cond3_bound;
  rep.cond4_pass = rep.cond4_max_abs == 0.0;
  rep.decay_ok = halving_decay(trace.x_fro);
  rep.cond1_monotone = non_increasing(trace.x_fro);
  return rep;
}

// ---------------------------------------------------------------------------
// Concentration checks

/// D_ij = 1 / ((1 - 2q) p_ij).
inline Matrix inverse_clean_rate(const SamplingPlan& plan) {
  plan.validate();
  const Matrix rate = plan.P * (1.0 - 2.0 * plan.q);
  if (!(rate.minCoeff() > 0.0)) throw Error("contraction check: zero sampling probability");
  return rate.cwiseInverse();
}

/// Z -> P_T(D o P_Gamma(P_T Z)) - P_T(Z). Self-adjoint under the trace inner product.
/// Holds a pointer to the factors, which must outlive the operator.
class SampledTangentOperator {
 public:
  SampledTangentOperator(const SvdFactors& f, Matrix weights, IndexMask gamma)
      : f_(&f), weights_(std::move(weights)), gamma_(std::move(gamma)) {
    require_same_shape(weights_, f.rows(), f.cols(), "SampledTangentOperator");
    if (gamma_.rows() != f.rows() || gamma_.cols() != f.cols()) {
      throw Error("SampledTangentOperator: mask dimension mismatch");
    }
  }

  Matrix operator()(const Matrix& z) const {
    const Matrix tz = project_T(*f_, z);
    return project_T(*f_, gamma_.grid().select(weights_.cwiseProduct(tz), 0.0)) - tz;
  }

  /// (P_T D o P_Gamma - I) Z for Z already in T.
  Matrix apply_in_range(const Matrix& z) const {
    return project_T(*f_, gamma_.grid().select(weights_.cwiseProduct(z), 0.0)) - z;
  }

 private:
  const SvdFactors* f_;
  Matrix weights_;
  IndexMask gamma_;
};

struct PowerIterationOptions {
  int iters = 300;
  double tol = 1e-7;
};

/// Draws Gamma ~ Ber(p_ij (1 - 2q)).
inline IndexMask sample_clean_set(const SamplingPlan& plan, Rng& rng) {
  const double keep = 1.0 - 2.0 * plan.q;
  IndexMask gamma(plan.rows(), plan.cols());
  for (Index i = 0; i < plan.rows(); ++i)
    for (Index j = 0; j < plan.cols(); ++j)
      if (uniform01(rng) < plan.P(i, j) * keep) gamma.insert(i, j);
  return gamma;
}

/// Operator norm of the sampled tangent operator for a given Gamma.
inline NormEstimate sampled_operator_norm(const SvdFactors& f, const SamplingPlan& plan,
                                          const IndexMask& gamma,
                                          const PowerIterationOptions& opts = {}) {
  const SampledTangentOperator op(f, inverse_clean_rate(plan), gamma);
  return operator_norm(op, f.rows(), f.cols(), opts.iters, opts.tol);
}

struct ContractionStats {
  std::vector<double> values;  // per-trial statistic
  double max = 0.0;
  double mean = 0.0;
  double pass_fraction = 0.0;
  /// Operator-norm checks: trials whose power iteration did not converge.
  int unconverged = 0;
};

inline ContractionStats check_operator_contraction(const SvdFactors& f, const SamplingPlan& plan,
                                                   int trials, Rng& rng,
                                                   const PowerIterationOptions& opts = {}) {
  if (trials < 1) throw Error("check_operator_contraction: trials must be >= 1");
  const Matrix weights = inverse_clean_rate(plan);
  ContractionStats st;
  int pass = 0;
  for (int k = 0; k < trials; ++k) {
    const SampledTangentOperator op(f, weights, sample_clean_set(plan, rng));
    const NormEstimate est = operator_norm(op, f.rows(), f.cols(), opts.iters, opts.tol);
    st.values.push_back(est.value);
    if (!est.converged) ++st.unconverged;
    if (est.value <= 0.5) ++pass;
  }
  st.max = *std::max_element(st.values.begin(), st.values.end());
  double total = 0.0;
  for (double v : st.values) total += v;
  st.mean = total / trials;
  st.pass_fraction = static_cast<double>(pass) / trials;
  return st;
}

/// Which weighted-norm contraction to test for R = (P_T D o P_Gamma - I) Z:
///   InfTwo:  |R|_{mu(inf,2)} <= (|Z|_{mu(inf)} + |Z|_{mu(inf,2)}) / 2
///   Inf:     |R|_{mu(inf)}   <= |Z|_{mu(inf)} / 2
///   Scaled:  |R|_{mu(inf)}   <= alpha |Z|_{mu(inf)} / 2
struct MuNormVariant {
  enum class Kind { InfTwo, Inf, Scaled };
  Kind kind = Kind::InfTwo;
  double alpha = 1.0;

  static MuNormVariant inf2() { return {Kind::InfTwo, 1.0}; }
  static MuNormVariant inf() { return {Kind::Inf, 1.0}; }
  static MuNormVariant scaled(double a) { return {Kind::Scaled, a}; }
};

struct MuNormSides {
  double lhs = 0.0;
  double rhs = 0.0;
};

inline MuNormSides mu_norm_sides(const SampledTangentOperator& op, const Matrix& z,
                                 const LeverageProfile& prof, MuNormVariant variant) {
  const Matrix r = op.apply_in_range(z);
  const double z_inf = mu_inf_norm(z, prof);
  switch (variant.kind) {
    case MuNormVariant::Kind::InfTwo:
      return {mu_inf2_norm(r, prof), 0.5 * (z_inf + mu_inf2_norm(z, prof))};
    case MuNormVariant::Kind::Inf:
      return {mu_inf_norm(r, prof), 0.5 * z_inf};
    case MuNormVariant::Kind::Scaled:
      return {mu_inf_norm(r, prof), 0.5 * variant.alpha * z_inf};
  }
  return {};
}

/// Per trial: values holds lhs / rhs (0 when both sides vanish).
inline ContractionStats check_mu_norm_contraction(const SvdFactors& f, const SamplingPlan& plan,
                                                  const Matrix& z, int trials,
                                                  MuNormVariant variant, Rng& rng) {
  if (trials < 1) throw Error("check_mu_norm_contraction: trials must be >= 1");
  require_same_shape(z, f.rows(), f.cols(), "check_mu_norm_contraction");
  if ((z - project_T(f, z)).norm() > 1e-10 * std::max(1.0, z.norm())) {
    throw Error("check_mu_norm_contraction: Z is not in the tangent space");
  }
  if (variant.kind == MuNormVariant::Kind::Scaled && !(variant.alpha > 0.0)) {
    throw Error("check_mu_norm_contraction: alpha must be positive");
  }
  const Matrix weights = inverse_clean_rate(plan);
  const LeverageProfile prof = leverage_scores(f);
  ContractionStats st;
  int pass = 0;
  for (int k = 0; k < trials; ++k) {
    const SampledTangentOperator op(f, weights, sample_clean_set(plan, rng));
    const MuNormSides s = mu_norm_sides(op, z, prof, variant);
    const double ratio = s.rhs > 0.0 ? s.lhs / s.rhs
                                     : (s.lhs > 0.0 ? std::numeric_limits<double>::infinity() : 0.0);
    st.values.push_back(ratio);
    if (s.lhs <= s.rhs) ++pass;
  }
  st.max = *std::max_element(st.values.begin(), st.values.end());
  double total = 0.0;
  for (double v : st.values) total += v;
  st.mean = total / trials;
  st.pass_fraction = static_cast<double>(pass) / trials;
  return st;
}

/// Matrix Bernstein tail bound 2 sqrt(c sigma2 ln(n1+n2)) + c B ln(n1+n2),
/// holding with probability at least 1 - (n1+n2)^(1-c).
inline double bernstein_bound(double sigma2, double B, Index n1, Index n2, double c) {
  if (sigma2 < 0.0 || B < 0.0) throw Error("bernstein_bound: sigma2 and B must be non-negative");
  if (n1 < 1 || n2 < 1) throw Error("bernstein_bound: dimensions must be positive");
  if (!(c > 0.0)) throw Error("bernstein_bound: c must be positive");
  const double logd = std::log(static_cast<double>(n1 + n2));
  return 2.0 * std::sqrt(c * sigma2 * logd) + c * B * logd;
}

inline double bernstein_failure_probability(Index n1, Index n2, double c) {
  return std::pow(static_cast<double>(n1 + n2), 1.0 - c);
}

}  // namespace lrmc
