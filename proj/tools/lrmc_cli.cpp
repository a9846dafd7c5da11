// Command-line harness for leveraged-sampling robust matrix completion.
//
//   lrmc gen       ground truth L = X1 X2^T to CSV
//   lrmc solve     one sampled, corrupted instance
//   lrmc sweep     success ratio over a p- or q-grid
//   lrmc certify   golfing dual-certificate study
//   lrmc leverage  leverage-score dump

#include <CLI11.hpp>

#include <cstdint>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <string>

#include "lrmc/lrmc.hpp"

namespace {

using namespace lrmc;

std::ofstream open_output(const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open '" + path + "' for writing");
  return out;
}

// "auto", "theorem", "rpca" or a positive number.
LambdaChoice parse_lambda(const std::string& text, LambdaChoice fallback) {
  if (text == "auto") return fallback;
  if (text == "theorem") return LambdaChoice::theorem();
  if (text == "rpca") return LambdaChoice::rpca();
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(text, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != text.size() || !(v > 0.0)) {
    throw Error("--lambda must be auto, theorem, rpca or a positive number, got '" + text + "'");
  }
  return LambdaChoice::fixed(v);
}

std::vector<Model> parse_models(const std::string& text) {
  if (text == "uu") return {Model::Uniform};
  if (text == "lu") return {Model::Leveraged};
  if (text == "both") return {Model::Uniform, Model::Leveraged};
  throw Error("--model must be uu, lu or both");
}

// Unsectioned keys belong to whichever subcommand was selected.
class SubcommandConfig : public CLI::ConfigINI {
 public:
  explicit SubcommandConfig(const CLI::App* app) : app_(app) {}

  std::vector<CLI::ConfigItem> from_config(std::istream& input) const override {
    auto items = CLI::ConfigINI::from_config(input);
    const auto chosen = app_->get_subcommands();
    if (chosen.empty()) return items;
    for (auto& item : items) {
      if (item.parents.empty() || (item.parents.size() == 1 && item.parents[0] == "default")) {
        item.parents = {chosen.front()->get_name()};
      }
    }
    return items;
  }

 private:
  const CLI::App* app_;
};

struct Common {
  Index n = 200;
  Index rank = 5;
  std::uint64_t seed = 1;
  int workers = 1;
  std::string out;
};

void add_common(CLI::App* cmd, Common& c, const std::string& out_help) {
  cmd->fallthrough();
  cmd->add_option("--n", c.n, "Matrix dimension")->check(CLI::PositiveNumber);
  cmd->add_option("--rank", c.rank, "Rank of the ground truth")->check(CLI::PositiveNumber);
  cmd->add_option("--seed", c.seed, "Master seed");
  cmd->add_option("--workers", c.workers, "Worker threads")->check(CLI::PositiveNumber);
  cmd->add_option("--out", c.out, out_help)->required();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Leveraged-sampling robust matrix completion experiments"};
  app.require_subcommand(1);
  app.set_config("--config", "", "Flat key=value file mirroring the subcommand flags; flags win");
  app.config_formatter(std::make_shared<SubcommandConfig>(&app));
  app.allow_config_extras(CLI::config_extras_mode::error);

  // gen
  Common gen_c;
  bool gen_orthogonal = false;
  auto* gen = app.add_subcommand("gen", "Write a ground-truth low-rank matrix");
  add_common(gen, gen_c, "Output CSV for L");
  gen->add_flag("--orthogonal", gen_orthogonal, "Use orthonormal factors");

  // solve
  Common solve_c;
  std::string solve_model = "uu", solve_lambda = "auto", lhat_path, shat_path;
  double solve_p = 0.4, solve_q = 0.1, solve_amp = 1.0, solve_tol = 1e-7;
  int solve_iters = 500;
  bool solve_est = false, solve_fallback = false;
  auto* solve_cmd = app.add_subcommand("solve", "Sample, corrupt and recover one instance");
  add_common(solve_cmd, solve_c, "Output CSV for solver diagnostics");
  solve_cmd->add_option("--model", solve_model, "uu or lu");
  solve_cmd->add_option("--p", solve_p, "Mean observation rate");
  solve_cmd->add_option("--q", solve_q, "Corruption rate among observed entries");
  solve_cmd->add_option("--lambda", solve_lambda, "auto, theorem, rpca or a number");
  solve_cmd->add_option("--amplitude", solve_amp, "Corruption magnitude");
  solve_cmd->add_option("--max-iters", solve_iters, "Solver iteration cap");
  solve_cmd->add_option("--tol", solve_tol, "Relative feasibility tolerance");
  solve_cmd->add_option("--lhat", lhat_path, "Write the recovered low-rank matrix here");
  solve_cmd->add_option("--shat", shat_path, "Write the recovered sparse matrix here");
  solve_cmd->add_flag("--estimated-leverage", solve_est, "LU plan from estimated leverage");
  solve_cmd->add_flag("--uniform-fallback", solve_fallback, "Uniform scores on degenerate pilots");

  // sweep
  Common sweep_c;
  std::string sweep_model = "both", sweep_axis = "p", sweep_grid = "0.2:0.7:0.1", sweep_lambda = "auto",
              aggregate_path;
  ExperimentConfig sweep_cfg;
  auto* sweep = app.add_subcommand("sweep", "Success ratio over a p- or q-grid");
  add_common(sweep, sweep_c, "Output CSV of per-trial records");
  sweep->add_option("--model", sweep_model, "uu, lu or both");
  sweep->add_option("--sweep", sweep_axis, "Swept variable: p or q");
  sweep->add_option("--grid", sweep_grid, "Grid a:b:step");
  sweep->add_option("--fixed", sweep_cfg.fixed_value, "Value of the variable not swept");
  sweep->add_option("--trials", sweep_cfg.trials, "Trials per grid point")->check(CLI::PositiveNumber);
  sweep->add_option("--lambda", sweep_lambda, "auto, theorem, rpca or a number");
  sweep->add_option("--threshold", sweep_cfg.success_threshold, "Relative-error success threshold");
  sweep->add_option("--amplitude", sweep_cfg.amplitude, "Corruption magnitude");
  sweep->add_option("--max-iters", sweep_cfg.max_iters, "Solver iteration cap");
  sweep->add_option("--tol", sweep_cfg.tol, "Relative feasibility tolerance");
  sweep->add_option("--aggregate", aggregate_path, "Aggregate CSV (default <out>.aggregate.csv)");
  sweep->add_flag("--fixed-truth", sweep_cfg.fixed_truth, "Share one ground truth across trials");
  sweep->add_flag("--estimated-leverage", sweep_cfg.estimated_leverage, "LU plan from a pilot sample");
  sweep->add_flag("--uniform-fallback", sweep_cfg.uniform_fallback, "Uniform scores on degenerate pilots");
  sweep->add_flag("--record-time", sweep_cfg.record_time, "Fill wall_s (output no longer reproducible)");

  // certify
  Common cert_c;
  cert_c.n = 100;
  cert_c.rank = 2;
  CertifyConfig cert_cfg;
  std::string cert_plan = "bound", cert_lambda = "auto";
  std::optional<double> cond1_thr, cond2_thr, cond3_thr;
  auto* certify = app.add_subcommand("certify", "Build golfing certificates and check the dual conditions");
  add_common(certify, cert_c, "Output CSV of certificate reports");
  certify->add_option("--trials", cert_cfg.trials, "Number of certificates")->check(CLI::PositiveNumber);
  certify->add_option("--plan", cert_plan, "bound (c_p scaled) or uniform");
  certify->add_option("--cp", cert_cfg.c_p, "Sampling-bound constant c_p");
  certify->add_option("--p", cert_cfg.p, "Observation rate for uniform plans");
  certify->add_option("--q", cert_cfg.q, "Corruption rate");
  certify->add_option("--lambda", cert_lambda, "auto (theorem), theorem, rpca or a number");
  certify->add_option("--cond1-threshold", cond1_thr, "Override the lambda/n^3 bound");
  certify->add_option("--cond2-threshold", cond2_thr, "Override the 1/4 bound");
  certify->add_option("--cond3-threshold", cond3_thr, "Override the lambda/4 bound");

  // leverage
  Common lev_c;
  std::string lev_input;
  std::optional<double> lev_sample;
  double lev_q = 0.0;
  bool lev_fallback = false;
  auto* leverage = app.add_subcommand("leverage", "Dump row/column leverage scores");
  add_common(leverage, lev_c, "Output CSV (index,mu,nu)");
  leverage->add_option("--input", lev_input, "Matrix CSV; a ground truth is generated when absent");
  leverage->add_option("--estimate-from", lev_sample,
                       "Estimate from a uniform sample at this rate instead of exact scores");
  leverage->add_option("--q", lev_q, "Corruption rate of the estimation sample");
  leverage->add_flag("--uniform-fallback", lev_fallback, "Uniform scores for all-zero samples");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*gen) {
      Rng rng = make_stream(gen_c.seed, 0, "truth");
      GroundTruthOptions opts;
      opts.orthogonal_factors = gen_orthogonal;
      const Matrix L = generate_ground_truth(gen_c.n, gen_c.rank, rng, opts);
      auto out = open_output(gen_c.out);
      csv::write_matrix(out, L);
    } else if (*solve_cmd) {
      ExperimentConfig cfg;
      cfg.n = solve_c.n;
      cfg.r = solve_c.rank;
      cfg.seed = solve_c.seed;
      cfg.models = parse_models(solve_model);
      if (cfg.models.size() != 1) throw Error("solve: --model must be uu or lu");
      cfg.grid = {solve_p};
      cfg.fixed_value = solve_q;
      cfg.trials = 1;
      cfg.lambda = parse_lambda(solve_lambda, LambdaChoice::rpca());
      cfg.amplitude = solve_amp;
      cfg.max_iters = solve_iters;
      cfg.tol = solve_tol;
      cfg.estimated_leverage = solve_est;
      cfg.uniform_fallback = solve_fallback;
      cfg.validate();

      const std::uint64_t tseed = trial_seed(cfg, 0, 0);
      const Matrix L = trial_truth(cfg, tseed);
      Rng sign_rng = make_stream(tseed, 0, "signs");
      const Matrix K = random_signs(cfg.n, cfg.n, sign_rng);
      const SamplingPlan plan = trial_plan(cfg, cfg.models[0], solve_p, solve_q, L, K, tseed);
      Rng sample_rng = make_stream(tseed, 0, "sample");
      const ObservationSet obs = sample_model1(plan, L, K, sample_rng, cfg.amplitude);
      SolverConfig sc;
      sc.lambda = resolve_lambda(cfg.lambda, cfg.n, plan.mean());
      sc.max_iters = cfg.max_iters;
      sc.tol = cfg.tol;
      const Solution sol = solve(obs, sc);

      auto out = open_output(solve_c.out);
      csv::write_diagnostics(out, sol);
      if (!lhat_path.empty()) {
        auto f = open_output(lhat_path);
        csv::write_matrix(f, sol.low_rank);
      }
      if (!shat_path.empty()) {
        auto f = open_output(shat_path);
        csv::write_matrix(f, sol.sparse);
      }
      std::cout << "rel_error=" << csv::num(relative_error(sol.low_rank, L)) << " iters=" << sol.iters
                << " converged=" << (sol.converged ? 1 : 0) << '\n';
    } else if (*sweep) {
      sweep_cfg.n = sweep_c.n;
      sweep_cfg.r = sweep_c.rank;
      sweep_cfg.seed = sweep_c.seed;
      sweep_cfg.workers = sweep_c.workers;
      sweep_cfg.models = parse_models(sweep_model);
      if (sweep_axis == "p") {
        sweep_cfg.sweep = SweepAxis::P;
      } else if (sweep_axis == "q") {
        sweep_cfg.sweep = SweepAxis::Q;
      } else {
        throw Error("--sweep must be p or q");
      }
      sweep_cfg.grid = parse_grid(sweep_grid);
      sweep_cfg.lambda = parse_lambda(sweep_lambda, LambdaChoice::rpca());
      const SweepResult res = run_sweep(sweep_cfg);

      auto out = open_output(sweep_c.out);
      write_trials_csv(out, res.records);
      auto agg = open_output(aggregate_path.empty() ? sweep_c.out + ".aggregate.csv" : aggregate_path);
      write_aggregate_csv(agg, res.aggregates);
      write_aggregate_csv(std::cout, res.aggregates);
    } else if (*certify) {
      cert_cfg.n = cert_c.n;
      cert_cfg.r = cert_c.rank;
      cert_cfg.seed = cert_c.seed;
      cert_cfg.workers = cert_c.workers;
      if (cert_plan == "bound") {
        cert_cfg.plan = CertifyConfig::PlanKind::Bound;
      } else if (cert_plan == "uniform") {
        cert_cfg.plan = CertifyConfig::PlanKind::Uniform;
      } else {
        throw Error("--plan must be bound or uniform");
      }
      cert_cfg.lambda = parse_lambda(cert_lambda, LambdaChoice::theorem());
      cert_cfg.thresholds = {cond1_thr, cond2_thr, cond3_thr};
      const auto rows = run_certify(cert_cfg);
      auto out = open_output(cert_c.out);
      write_certify_csv(out, rows);
    } else if (*leverage) {
      Matrix L;
      if (!lev_input.empty()) {
        std::ifstream in(lev_input);
        if (!in) throw Error("cannot open '" + lev_input + "'");
        L = csv::read_matrix(in);
      } else {
        Rng rng = make_stream(lev_c.seed, 0, "truth");
        L = generate_ground_truth(lev_c.n, lev_c.rank, rng);
      }
      LeverageProfile prof;
      if (lev_sample) {
        Rng sign_rng = make_stream(lev_c.seed, 0, "signs");
        const Matrix K = random_signs(L.rows(), L.cols(), sign_rng);
        Rng sample_rng = make_stream(lev_c.seed, 0, "sample");
        const ObservationSet obs =
            sample_model1(plan_uniform(L.rows(), L.cols(), *lev_sample, lev_q), L, K, sample_rng);
        LeverageEstimateOptions opts;
        opts.uniform_fallback = lev_fallback;
        prof = estimate_leverage(obs.data, obs.observed, lev_c.rank, *lev_sample, opts);
      } else {
        prof = leverage_scores(truncated(reduced_svd(L), lev_c.rank));
      }
      auto out = open_output(lev_c.out);
      csv::write_profile(out, prof);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
