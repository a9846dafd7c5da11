#pragma once

// Experiment harness: ground-truth generation, recovery sweeps over the
// sampling or corruption rate, and certificate studies. Each trial draws from
// its own seeded streams, so results do not depend on the worker count.

#include <atomic>
#include <chrono>
#include <cmath>
#include <exception>
#include <mutex>
#include <ostream>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "lrmc/certificate.hpp"
#include "lrmc/csv.hpp"
#include "lrmc/leverage.hpp"
#include "lrmc/linalg.hpp"
#include "lrmc/random.hpp"
#include "lrmc/sampling.hpp"
#include "lrmc/solver.hpp"

namespace lrmc {

enum class Model { Uniform, Leveraged };
enum class SweepAxis { P, Q };

inline const char* model_name(Model m) { return m == Model::Uniform ? "UU" : "LU"; }

/// How lambda is chosen per trial.
struct LambdaChoice {
  enum class Kind { Theorem, Rpca, Fixed };
  Kind kind = Kind::Rpca;
  double value = 0.0;

  static LambdaChoice theorem() { return {Kind::Theorem, 0.0}; }
  static LambdaChoice rpca() { return {Kind::Rpca, 0.0}; }
  static LambdaChoice fixed(double v) { return {Kind::Fixed, v}; }
};

/// Theorem: 1/(24 sqrt(n ln n)). Rpca: 1/sqrt(n * mean p_ij). Fixed: as given.
inline double resolve_lambda(const LambdaChoice& choice, Index n, double mean_p) {
  switch (choice.kind) {
    case LambdaChoice::Kind::Theorem:
      return default_lambda(n);
    case LambdaChoice::Kind::Rpca:
      if (!(mean_p > 0.0)) throw Error("resolve_lambda: mean sampling rate must be positive");
      return 1.0 / std::sqrt(static_cast<double>(n) * mean_p);
    case LambdaChoice::Kind::Fixed:
      if (!(choice.value > 0.0)) throw Error("resolve_lambda: lambda must be positive");
      return choice.value;
  }
  return 0.0;
}

struct GroundTruthOptions {
  /// Replace the Gaussian factors by orthonormal ones.
  bool orthogonal_factors = false;
};

/// L = X1 X2^T with X1, X2 in R^{n x r} having i.i.d. N(0, 1/n^2) entries.
inline Matrix generate_ground_truth(Index n, Index r, Rng& rng, const GroundTruthOptions& opts = {}) {
  if (n < 1 || r < 1) throw Error("generate_ground_truth: n and r must be positive");
  if (r > n) throw Error("generate_ground_truth: rank exceeds dimension");
  std::normal_distribution<double> normal(0.0, 1.0 / static_cast<double>(n));
  Matrix x1(n, r), x2(n, r);
  for (Index j = 0; j < r; ++j)
    for (Index i = 0; i < n; ++i) x1(i, j) = normal(rng);
  for (Index j = 0; j < r; ++j)
    for (Index i = 0; i < n; ++i) x2(i, j) = normal(rng);
  if (opts.orthogonal_factors) {
    x1 = Eigen::HouseholderQR<Matrix>(x1).householderQ() * Matrix::Identity(n, r);
    x2 = Eigen::HouseholderQR<Matrix>(x2).householderQ() * Matrix::Identity(n, r);
  }
  return x1 * x2.transpose();
}

/// Evenly spaced values "a:b:step", inclusive of b up to rounding.
inline std::vector<double> parse_grid(const std::string& spec) {
  double a = 0.0, b = 0.0, step = 0.0;
  char c1 = 0, c2 = 0;
  std::istringstream in(spec);
  if (!(in >> a >> c1 >> b >> c2 >> step) || c1 != ':' || c2 != ':' || !(in >> std::ws).eof()) {
    throw Error("grid '" + spec + "' is not of the form a:b:step");
  }
  if (!(step > 0.0) || b < a) throw Error("grid '" + spec + "' needs step > 0 and b >= a");
  std::vector<double> out;
  for (int k = 0;; ++k) {
    const double v = std::round((a + k * step) * 1e12) / 1e12;
    if (v > b + 1e-9 * step) break;
    out.push_back(v);
  }
  return out;
}

struct ExperimentConfig {
  Index n = 200;
  Index r = 5;
  std::vector<Model> models{Model::Uniform};
  SweepAxis sweep = SweepAxis::P;
  std::vector<double> grid;
  double fixed_value = 0.1;
  int trials = 20;
  std::uint64_t seed = 1;
  double success_threshold = 0.05;
  LambdaChoice lambda = LambdaChoice::rpca();
  int max_iters = 500;
  double tol = 1e-7;
  double amplitude = 1.0;
  int workers = 1;
  bool fixed_truth = false;
  bool estimated_leverage = false;
  bool uniform_fallback = false;
  bool record_time = false;

  void validate() const {
    if (n < 2) throw Error("experiment: n must be >= 2");
    if (r < 1 || r > n) throw Error("experiment: rank must lie in [1, n]");
    if (models.empty()) throw Error("experiment: no model selected");
    if (grid.empty()) throw Error("experiment: empty grid");
    for (std::size_t k = 0; k < grid.size(); ++k) {
      if (grid[k] < 0.0 || grid[k] > 1.0) throw Error("experiment: grid values must lie in [0,1]");
      if (k > 0 && !(grid[k] > grid[k - 1])) throw Error("experiment: grid must be strictly increasing");
    }
    if (trials < 1) throw Error("experiment: trials must be >= 1");
    if (workers < 1) throw Error("experiment: workers must be >= 1");
    if (!(success_threshold > 0.0)) throw Error("experiment: threshold must be positive");
  }

  double p_at(std::size_t g) const { return sweep == SweepAxis::P ? grid[g] : fixed_value; }
  double q_at(std::size_t g) const { return sweep == SweepAxis::Q ? grid[g] : fixed_value; }
};

struct TrialRecord {
  std::uint64_t seed = 0;
  Model model = Model::Uniform;
  double p = 0.0;
  double q = 0.0;
  double relative_error = 0.0;
  bool success = false;
  int solver_iters = 0;
  double wall_time_seconds = 0.0;
};

struct AggregateRow {
  Model model = Model::Uniform;
  double grid_value = 0.0;
  int trials = 0;
  int successes = 0;
  double success_ratio = 0.0;
};

struct SweepResult {
  std::vector<TrialRecord> records;  // model-major, then grid point, then trial
  std::vector<AggregateRow> aggregates;

  const AggregateRow& aggregate(Model m, std::size_t g, std::size_t grid_size) const {
    std::size_t block = 0;
    while (block < aggregates.size() / grid_size && aggregates[block * grid_size].model != m) ++block;
    return aggregates.at(block * grid_size + g);
  }
};

/// Runs tasks 0..count-1 on `workers` threads; results land at their index.
template <class Result, class Fn>
std::vector<Result> run_indexed(std::size_t count, int workers, Fn&& fn) {
  std::vector<Result> out(count);
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto worker = [&] {
    for (;;) {
      const std::size_t k = next.fetch_add(1);
      if (k >= count) return;
      try {
        out[k] = fn(k);
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
        next = count;
        return;
      }
    }
  };
  const int threads = std::max(1, std::min<int>(workers, static_cast<int>(count)));
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(threads));
    for (int k = 0; k < threads; ++k) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  if (failure) std::rethrow_exception(failure);
  return out;
}

/// Seed shared by every model at a given (grid point, trial), so UU and LU see
/// the same ground truth, signs and uniform draws.
inline std::uint64_t trial_seed(const ExperimentConfig& cfg, std::size_t g, int t) {
  return derive_seed(cfg.seed, static_cast<std::uint64_t>(g) * static_cast<std::uint64_t>(cfg.trials) +
                                   static_cast<std::uint64_t>(t),
                     "trial");
}

inline Matrix trial_truth(const ExperimentConfig& cfg, std::uint64_t tseed) {
  Rng rng = cfg.fixed_truth ? make_stream(cfg.seed, 0, "truth") : make_stream(tseed, 0, "truth");
  return generate_ground_truth(cfg.n, cfg.r, rng);
}

/// Exact leverage of L truncated to rank r.
inline LeverageProfile truth_leverage(const Matrix& L, Index r) {
  SvdFactors f = reduced_svd(L);
  if (f.rank() < r) throw Error("ground truth has numerical rank " + std::to_string(f.rank()) +
                                " below requested rank " + std::to_string(r));
  return leverage_scores(truncated(std::move(f), r));
}

inline SamplingPlan trial_plan(const ExperimentConfig& cfg, Model model, double p, double q,
                               const Matrix& L, const Matrix& K, std::uint64_t tseed) {
  if (model == Model::Uniform || p == 0.0) return plan_uniform(cfg.n, p, q);
  if (!cfg.estimated_leverage) return plan_leveraged(p, q, truth_leverage(L, cfg.r)).plan;

  // Pilot pass: a uniform observation at rate p, used only to estimate leverage.
  Rng pilot_rng = make_stream(tseed, 0, "pilot");
  const ObservationSet pilot = sample_model1(plan_uniform(cfg.n, p, q), L, K, pilot_rng, cfg.amplitude);
  LeverageEstimateOptions opts;
  opts.uniform_fallback = cfg.uniform_fallback;
  if (pilot.observed.empty()) {
    if (!cfg.uniform_fallback) throw Error("estimated leverage: pilot observation is empty");
    return plan_uniform(cfg.n, p, q);
  }
  return plan_leveraged(p, q, estimate_leverage(pilot.data, pilot.observed, cfg.r, p, opts)).plan;
}

inline TrialRecord run_trial(const ExperimentConfig& cfg, Model model, std::size_t g, int t) {
  const auto start = std::chrono::steady_clock::now();
  const std::uint64_t tseed = trial_seed(cfg, g, t);
  TrialRecord rec;
  rec.seed = tseed;
  rec.model = model;
  rec.p = cfg.p_at(g);
  rec.q = cfg.q_at(g);

  const Matrix L = trial_truth(cfg, tseed);
  Rng sign_rng = make_stream(tseed, 0, "signs");
  const Matrix K = random_signs(cfg.n, cfg.n, sign_rng);
  const SamplingPlan plan = trial_plan(cfg, model, rec.p, rec.q, L, K, tseed);
  Rng sample_rng = make_stream(tseed, 0, "sample");
  const ObservationSet obs = sample_model1(plan, L, K, sample_rng, cfg.amplitude);

  if (obs.observed.empty()) {
    rec.relative_error = 1.0;
    rec.solver_iters = 0;
  } else {
    SolverConfig sc;
    sc.lambda = resolve_lambda(cfg.lambda, cfg.n, plan.mean());
    sc.max_iters = cfg.max_iters;
    sc.tol = cfg.tol;
    const Solution sol = solve(obs, sc);
    rec.relative_error = relative_error(sol.low_rank, L);
    rec.solver_iters = sol.iters;
  }
  rec.success = rec.relative_error <= cfg.success_threshold;
  if (cfg.record_time) {
    rec.wall_time_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  }
  return rec;
}

inline SweepResult run_sweep(const ExperimentConfig& cfg) {
  cfg.validate();
  const std::size_t points = cfg.grid.size();
  const std::size_t per_model = points * static_cast<std::size_t>(cfg.trials);
  const std::size_t total = per_model * cfg.models.size();

  SweepResult res;
  res.records = run_indexed<TrialRecord>(total, cfg.workers, [&](std::size_t k) {
    const Model m = cfg.models[k / per_model];
    const std::size_t rem = k % per_model;
    return run_trial(cfg, m, rem / static_cast<std::size_t>(cfg.trials),
                     static_cast<int>(rem % static_cast<std::size_t>(cfg.trials)));
  });

  for (std::size_t mi = 0; mi < cfg.models.size(); ++mi) {
    for (std::size_t g = 0; g < points; ++g) {
      AggregateRow row;
      row.model = cfg.models[mi];
      row.grid_value = cfg.grid[g];
      row.trials = cfg.trials;
      for (int t = 0; t < cfg.trials; ++t) {
        if (res.records[mi * per_model + g * static_cast<std::size_t>(cfg.trials) +
                        static_cast<std::size_t>(t)].success) {
          ++row.successes;
        }
      }
      row.success_ratio = static_cast<double>(row.successes) / cfg.trials;
      res.aggregates.push_back(row);
    }
  }
  return res;
}

inline void write_trials_csv(std::ostream& out, const std::vector<TrialRecord>& records) {
  out << "seed,model,p,q,rel_error,success,iters,wall_s\n";
  for (const auto& r : records) {
    out << r.seed << ',' << model_name(r.model) << ',' << csv::num(r.p) << ',' << csv::num(r.q)
        << ',' << csv::num(r.relative_error) << ',' << (r.success ? 1 : 0) << ',' << r.solver_iters
        << ',' << csv::num(r.wall_time_seconds) << '\n';
  }
}

inline void write_aggregate_csv(std::ostream& out, const std::vector<AggregateRow>& rows) {
  out << "model,grid_value,trials,successes,success_ratio\n";
  for (const auto& r : rows) {
    out << model_name(r.model) << ',' << csv::num(r.grid_value) << ',' << r.trials << ','
        << r.successes << ',' << csv::num(r.success_ratio) << '\n';
  }
}

// ---------------------------------------------------------------------------
// Certificate studies

struct CertifyConfig {
  enum class PlanKind { Bound, Uniform };
  Index n = 100;
  Index r = 2;
  PlanKind plan = PlanKind::Bound;
  double c_p = 32.0;
  double p = 1.0;  // uniform plans only
  double q = 0.05;
  int trials = 100;
  std::uint64_t seed = 1;
  LambdaChoice lambda = LambdaChoice::theorem();
  CertificateThresholds thresholds;
  int workers = 1;

  void validate() const {
    if (n < 2) throw Error("certify: n must be >= 2");
    if (r < 1 || r > n) throw Error("certify: rank must lie in [1, n]");
    if (trials < 1) throw Error("certify: trials must be >= 1");
    if (workers < 1) throw Error("certify: workers must be >= 1");
    check_rate(q);
  }
};

struct CertifyRow {
  CertificateReport report;
  std::vector<double> x_fro;
  double max_range_defect = 0.0;
  std::uint64_t seed = 0;
  Index n = 0;
  Index r = 0;
  double p_mean = 0.0;
  double q = 0.0;
};

inline CertifyRow run_certify_trial(const CertifyConfig& cfg, int t) {
  const std::uint64_t tseed = derive_seed(cfg.seed, static_cast<std::uint64_t>(t), "certify");
  Rng truth_rng = make_stream(tseed, 0, "truth");
  const Matrix L = generate_ground_truth(cfg.n, cfg.r, truth_rng);
  const SvdFactors f = truncated(reduced_svd(L), cfg.r);

  const SamplingPlan plan = cfg.plan == CertifyConfig::PlanKind::Bound
                                ? plan_from_bound(leverage_scores(f), cfg.c_p, cfg.q)
                                : plan_uniform(cfg.n, cfg.p, cfg.q);
  Rng golf_rng = make_stream(tseed, 0, "golf");
  const GolfingPartition part = golfing_partition(plan, golf_rng);
  const IndexMask gamma_prime = part.union_mask();
  Rng sign_rng = make_stream(tseed, 0, "signs");
  const Matrix K = random_signs(cfg.n, cfg.n, sign_rng);
  Rng model_rng = make_stream(tseed, 0, "model2");
  const ObservationSet obs = sample_model2(plan, K, model_rng, gamma_prime);
  const Model2Internals& m2 = *obs.model2;

  const double lambda = resolve_lambda(cfg.lambda, cfg.n, plan.mean());
  const GolfingTrace trace = construct_certificate(f, part, m2.omega_prime, m2.W, lambda);

  CertifyRow row;
  row.report = evaluate_conditions(trace, f, m2.omega_prime, m2.W, gamma_prime, lambda, cfg.thresholds);
  row.x_fro = trace.x_fro;
  row.max_range_defect = trace.max_range_defect;
  row.seed = tseed;
  row.n = cfg.n;
  row.r = cfg.r;
  row.p_mean = plan.mean();
  row.q = cfg.q;
  return row;
}

inline std::vector<CertifyRow> run_certify(const CertifyConfig& cfg) {
  cfg.validate();
  return run_indexed<CertifyRow>(static_cast<std::size_t>(cfg.trials), cfg.workers,
                                 [&](std::size_t k) { return run_certify_trial(cfg, static_cast<int>(k)); });
}

inline void write_certify_csv(std::ostream& out, const std::vector<CertifyRow>& rows) {
  out << "cond1_value,cond1_bound,cond2_value,cond3_value,cond4_max_abs,decay_ok,seed,n,r,p_mean,q\n";
  for (const auto& row : rows) {
    const CertificateReport& rep = row.report;
    out << csv::num(rep.cond1_value) << ',' << csv::num(rep.cond1_bound) << ','
        << csv::num(rep.cond2_value) << ',' << csv::num(rep.cond3_value) << ','
        << csv::num(rep.cond4_max_abs) << ',' << (rep.decay_ok ? 1 : 0) << ',' << row.seed << ','
        << row.n << ',' << row.r << ',' << csv::num(row.p_mean) << ',' << csv::num(row.q) << '\n';
  }
}

}  // namespace lrmc
