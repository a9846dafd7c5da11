// Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any fail.
// Pass criterion numbers as arguments to run a subset.

#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <fmt/format.h>

#include "lrmc/lrmc.hpp"

namespace {

using namespace lrmc;
namespace fs = std::filesystem;

struct Outcome {
  bool pass = false;
  std::string detail;
};

struct Criterion {
  int id;
  const char* name;
  std::function<Outcome()> run;
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

int worker_count() { return static_cast<int>(std::max(1u, std::thread::hardware_concurrency())); }

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t m = v.size() / 2;
  return v.size() % 2 ? v[m] : 0.5 * (v[m - 1] + v[m]);
}

double fraction(int hits, int total) { return static_cast<double>(hits) / total; }

// Entry-wise binomial agreement: share of entries within 3 sigma.
double share_within(const Matrix& counts, const Matrix& target, double n) {
  Index ok = 0;
  for (Index k = 0; k < counts.size(); ++k) {
    const double p = target.data()[k];
    const double sigma = std::sqrt(p * (1.0 - p) / n);
    if (std::abs(counts.data()[k] / n - p) <= 3.0 * sigma + 1e-12) ++ok;
  }
  return static_cast<double>(ok) / static_cast<double>(counts.size());
}

// Two-sample version: share of entries whose frequencies differ by at most
// 3 sigma of the difference.
double share_agreeing(const Matrix& a, const Matrix& b, const Matrix& target, double n) {
  Index ok = 0;
  for (Index k = 0; k < a.size(); ++k) {
    const double p = target.data()[k];
    const double sigma = std::sqrt(2.0 * p * (1.0 - p) / n);
    if (std::abs(a.data()[k] - b.data()[k]) / n <= 3.0 * sigma + 1e-12) ++ok;
  }
  return static_cast<double>(ok) / static_cast<double>(a.size());
}

void add(Matrix& counts, const IndexMask& m) {
  for (const auto& [i, j] : m.members()) counts(i, j) += 1.0;
}

SvdFactors seeded_factors(Index n1, Index n2, Index r, std::uint64_t seed, std::uint64_t index) {
  Rng rng = make_stream(seed, index, "factors");
  std::normal_distribution<double> normal;
  Matrix a(n1, r), b(n2, r);
  for (Index k = 0; k < a.size(); ++k) a.data()[k] = normal(rng);
  for (Index k = 0; k < b.size(); ++k) b.data()[k] = normal(rng);
  return truncated(reduced_svd(a * b.transpose()), r);
}

Matrix seeded_gaussian(Index n1, Index n2, std::uint64_t seed, std::uint64_t index, std::string_view label) {
  Rng rng = make_stream(seed, index, label);
  std::normal_distribution<double> normal;
  Matrix z(n1, n2);
  for (Index k = 0; k < z.size(); ++k) z.data()[k] = normal(rng);
  return z;
}

// ---------------------------------------------------------------------------

Outcome noiseless_recovery() {
  const auto t0 = std::chrono::steady_clock::now();
  const Index n = 200, r = 5;
  const double lambda = default_lambda(n);
  std::vector<double> errors;
  int ok = 0;
  double truth_obj = 0.0, zero_obj = 0.0;
  for (int s = 0; s < 10; ++s) {
    Rng rng = make_stream(101, static_cast<std::uint64_t>(s), "truth");
    const Matrix L = generate_ground_truth(n, r, rng);
    SolverConfig cfg;
    cfg.lambda = lambda;
    const Solution sol = solve(L, IndexMask::full(n, n), cfg);
    const double err = relative_error(sol.low_rank, L);
    errors.push_back(err);
    if (err <= 1e-5) ++ok;
    if (s == 0) {
      truth_obj = recovery_objective(L, Matrix::Zero(n, n), lambda);
      zero_obj = recovery_objective(Matrix::Zero(n, n), L, lambda);
    }
  }
  const double elapsed = seconds_since(t0);
  const bool pass = ok == 10 && elapsed <= 120.0;
  return {pass, fmt::format("{}/10 seeds with rel_error <= 1e-5 (median {:.3g}, max {:.3g}), lambda={:.4g}, "
                            "objective at (L,0) {:.4g} vs at (0,M) {:.4g}, {:.1f}s",
                            ok, median(errors), *std::max_element(errors.begin(), errors.end()), lambda,
                            truth_obj, zero_obj, elapsed)};
}

ExperimentConfig figure_config() {
  ExperimentConfig cfg;
  cfg.n = 200;
  cfg.r = 5;
  cfg.models = {Model::Uniform, Model::Leveraged};
  cfg.trials = 20;
  cfg.seed = 2024;
  cfg.workers = worker_count();
  return cfg;
}

std::string ratio_table(const ExperimentConfig& cfg, const SweepResult& res) {
  std::string s;
  for (std::size_t g = 0; g < cfg.grid.size(); ++g) {
    s += fmt::format(" {}:{}/{}", cfg.grid[g], res.aggregate(Model::Uniform, g, cfg.grid.size()).success_ratio,
                     res.aggregate(Model::Leveraged, g, cfg.grid.size()).success_ratio);
  }
  return s;
}

bool lu_dominates(const ExperimentConfig& cfg, const SweepResult& res) {
  for (std::size_t g = 0; g < cfg.grid.size(); ++g) {
    if (res.aggregate(Model::Leveraged, g, cfg.grid.size()).success_ratio <
        res.aggregate(Model::Uniform, g, cfg.grid.size()).success_ratio) {
      return false;
    }
  }
  return true;
}

Outcome p_sweep_ordering() {
  const auto t0 = std::chrono::steady_clock::now();
  ExperimentConfig cfg = figure_config();
  cfg.sweep = SweepAxis::P;
  cfg.grid = parse_grid("0.2:0.7:0.1");
  cfg.fixed_value = 0.1;
  const SweepResult res = run_sweep(cfg);

  auto first_reaching = [&](Model m) {
    for (std::size_t g = 0; g < cfg.grid.size(); ++g)
      if (res.aggregate(m, g, cfg.grid.size()).success_ratio >= 0.9) return static_cast<int>(g);
    return static_cast<int>(cfg.grid.size());
  };
  const int lu = first_reaching(Model::Leveraged);
  const int uu = first_reaching(Model::Uniform);
  const double elapsed = seconds_since(t0);
  const bool pass = lu_dominates(cfg, res) && lu < uu && elapsed <= 1800.0;
  auto at = [&](int g) { return g < static_cast<int>(cfg.grid.size()) ? fmt::format("{}", cfg.grid[g]) : "never"; };
  return {pass, fmt::format("p:UU/LU{}; 0.9 reached at LU p={} UU p={}, {:.0f}s", ratio_table(cfg, res), at(lu),
                            at(uu), elapsed)};
}

Outcome q_sweep_ordering() {
  const auto t0 = std::chrono::steady_clock::now();
  ExperimentConfig cfg = figure_config();
  cfg.sweep = SweepAxis::Q;
  cfg.grid = parse_grid("0.02:0.2:0.02");
  cfg.fixed_value = 0.4;
  const SweepResult res = run_sweep(cfg);
  const double elapsed = seconds_since(t0);
  const bool pass = lu_dominates(cfg, res) && elapsed <= 1800.0;
  return {pass, fmt::format("q:UU/LU{}, {:.0f}s", ratio_table(cfg, res), elapsed)};
}

Outcome sampler_distributions() {
  constexpr int kSeeds = 2000;
  const Index n = 50;
  Rng prng = make_stream(404, 0, "truth");
  const LeverageProfile prof = leverage_scores(truncated(reduced_svd(generate_ground_truth(n, 2, prng)), 2));
  const SamplingPlan plan = plan_leveraged(0.4, 0.1, prof).plan;
  const Matrix zero = Matrix::Zero(n, n);

  Matrix o1 = zero, w1 = zero, o2 = zero, w2 = zero, golf = zero;
  for (int s = 0; s < kSeeds; ++s) {
    const auto idx = static_cast<std::uint64_t>(s);
    Rng sign_rng = make_stream(404, idx, "signs");
    const Matrix K = random_signs(n, n, sign_rng);
    Rng r1 = make_stream(404, idx, "model1");
    const ObservationSet a = sample_model1(plan, zero, K, r1);
    add(o1, a.observed);
    add(w1, a.corrupted);
    Rng r2 = make_stream(404, idx, "model2");
    const ObservationSet b = sample_model2(plan, K, r2);
    add(o2, b.observed);
    add(w2, b.corrupted);
    Rng rg = make_stream(404, idx, "golf");
    add(golf, golfing_partition(plan, rg).union_mask());
  }
  const Matrix pw = plan.P * plan.q;
  const double agree_o = share_agreeing(o1, o2, plan.P, kSeeds);
  const double agree_w = share_agreeing(w1, w2, pw, kSeeds);
  const double c1 = w1.sum() / o1.sum();
  const double c2 = w2.sum() / o2.sum();
  const double c_sigma = std::sqrt(plan.q * (1.0 - plan.q) * (1.0 / o1.sum() + 1.0 / o2.sum()));
  const bool cond_ok = std::abs(c1 - c2) <= 3.0 * c_sigma;
  const double golf_ok = share_within(golf, plan.P * (1.0 - 2.0 * plan.q), kSeeds);

  const GolfingPartition part = golfing_rates(plan, golfing_batch_count(n));
  double rho_residual = 0.0;
  for (Index k = 0; k < plan.P.size(); ++k) {
    const double pp = plan.P.data()[k] * (1.0 - 2.0 * plan.q);
    const double rhs = std::pow(1.0 - pp / 6.0, 2) * std::pow(1.0 - part.later_rate.data()[k], part.t - 2);
    rho_residual = std::max(rho_residual, std::abs((1.0 - pp) - rhs));
  }
  const bool pass = agree_o >= 0.99 && agree_w >= 0.99 && cond_ok && golf_ok >= 0.99 && rho_residual <= 1e-10;
  return {pass, fmt::format("P(O) agree {:.4f}, P(Omega) agree {:.4f}, P(Omega|O) {:.5f} vs {:.5f} "
                            "(3 sigma {:.5f}), golfing union within 3 sigma {:.4f}, max rate-equation "
                            "residual {:.2g}",
                            agree_o, agree_w, c1, c2, 3.0 * c_sigma, golf_ok, rho_residual)};
}

Outcome leverage_identities() {
  double sum_dev = 0.0, inf2_dev = 0.0, inf_max = 0.0;
  for (int s = 0; s < 100; ++s) {
    const Index n = 40 + 2 * (s % 30);
    const SvdFactors f = seeded_factors(n, n, 1 + s % 5, 505, static_cast<std::uint64_t>(s));
    const LeverageProfile p = leverage_scores(f);
    const double nn = static_cast<double>(n);
    sum_dev = std::max({sum_dev, std::abs(p.mu.sum() - nn) / nn, std::abs(p.nu.sum() - nn) / nn});
    inf2_dev = std::max(inf2_dev, std::abs(mu_inf2_norm(f.uv(), p) - 1.0));
    inf_max = std::max(inf_max, mu_inf_norm(f.uv(), p));
  }
  const bool pass = sum_dev <= 1e-8 && inf2_dev <= 1e-10 && inf_max <= 1.0 + 1e-10;
  return {pass, fmt::format("100 factor sets: max relative sum deviation {:.2g}, max |mu(inf,2) - 1| {:.2g}, "
                            "max mu(inf) {:.12f}",
                            sum_dev, inf2_dev, inf_max)};
}

Outcome projection_algebra() {
  double idem = 0.0, adj = 0.0, comp = 0.0, cross = 0.0;
  for (int s = 0; s < 100; ++s) {
    const auto idx = static_cast<std::uint64_t>(s);
    const Index n1 = 20 + s % 17, n2 = 15 + (3 * s) % 23, r = 1 + s % 4;
    const SvdFactors f = seeded_factors(n1, n2, r, 606, idx);
    const Matrix z1 = seeded_gaussian(n1, n2, 606, idx, "z1");
    const Matrix z2 = seeded_gaussian(n1, n2, 606, idx, "z2");
    const Matrix p1 = project_T(f, z1);
    idem = std::max(idem, (project_T(f, p1) - p1).cwiseAbs().maxCoeff());
    adj = std::max(adj, std::abs(inner(p1, z2) - inner(z1, project_T(f, z2))));
    comp = std::max(comp, (p1 + project_T_perp(f, z1) - z1).cwiseAbs().maxCoeff());
    cross = std::max(cross, project_T_perp(f, p1).cwiseAbs().maxCoeff());
  }
  const bool pass = idem <= 1e-10 && adj <= 1e-10 && comp <= 1e-10 && cross <= 1e-10;
  return {pass, fmt::format("100 inputs: idempotence {:.2g}, self-adjointness {:.2g}, complementarity {:.2g}, "
                            "P_Tperp P_T {:.2g}",
                            idem, adj, comp, cross)};
}

CertifyConfig bound_regime(Index n, Index r, int trials, std::uint64_t seed) {
  CertifyConfig cfg;
  cfg.n = n;
  cfg.r = r;
  cfg.plan = CertifyConfig::PlanKind::Bound;
  cfg.c_p = 32.0;
  cfg.q = 0.05;
  cfg.trials = trials;
  cfg.seed = seed;
  cfg.workers = worker_count();
  return cfg;
}

// First k at which |X_k|_F > 2^-k |X_0|_F, or -1.
int first_decay_violation(const std::vector<double>& fro) {
  double bound = fro.front();
  for (std::size_t k = 1; k < fro.size(); ++k) {
    bound *= 0.5;
    if (fro[k] > bound) return static_cast<int>(k);
  }
  return -1;
}

Outcome golfing_decay() {
  const auto rows = run_certify(bound_regime(200, 3, 100, 707));
  int decay = 0, support = 0;
  std::vector<double> first_bad, ratio1;
  double range = 0.0;
  for (const auto& row : rows) {
    if (row.report.decay_ok) ++decay;
    if (row.report.cond4_max_abs == 0.0) ++support;
    const int k = first_decay_violation(row.x_fro);
    if (k > 0) first_bad.push_back(k);
    ratio1.push_back(row.x_fro[1] / row.x_fro[0]);
    range = std::max(range, row.max_range_defect);
  }
  const bool pass = fraction(decay, 100) >= 0.95 && support == 100;
  return {pass, fmt::format("mean p_ij {:.3f}; decay in {}/100 seeds, Y off Gamma' zero in {}/100; "
                            "median first violating k {}, median |X_1|/|X_0| {:.3f}, max range defect {:.2g}",
                            rows.front().p_mean, decay, support,
                            first_bad.empty() ? std::string("-") : fmt::format("{}", median(first_bad)),
                            median(ratio1), range)};
}

Outcome operator_concentration() {
  const Index n = 200, r = 3;
  Rng truth_rng = make_stream(808, 0, "truth");
  const SvdFactors f = truncated(reduced_svd(generate_ground_truth(n, r, truth_rng)), r);
  const SamplingPlan plan = plan_from_bound(leverage_scores(f), 32.0, 0.05);
  Rng rng = make_stream(808, 0, "gamma");
  const ContractionStats st = check_operator_contraction(f, plan, 50, rng);
  const bool pass = st.pass_fraction >= 0.95;
  return {pass, fmt::format("fraction with norm <= 1/2: {} ({}/50), max {:.4f}, mean {:.4f}, unconverged {}",
                            st.pass_fraction, static_cast<int>(std::lround(st.pass_fraction * 50)), st.max,
                            st.mean, st.unconverged)};
}

Outcome dual_conditions() {
  const auto rows = run_certify(bound_regime(100, 2, 100, 909));
  int both = 0, c2 = 0, c3 = 0, mono = 0;
  std::vector<double> v1, v2, v3;
  for (const auto& row : rows) {
    const CertificateReport& rep = row.report;
    if (rep.cond2_pass) ++c2;
    if (rep.cond3_pass) ++c3;
    if (rep.cond2_pass && rep.cond3_pass) ++both;
    if (rep.cond1_monotone) ++mono;
    v1.push_back(rep.cond1_value);
    v2.push_back(rep.cond2_value);
    v3.push_back(rep.cond3_value);
  }
  const bool pass = fraction(both, 100) >= 0.9 && fraction(mono, 100) >= 0.95;
  return {pass, fmt::format("cond2 and cond3 hold in {}/100 (cond2 {}/100, median {:.3g} vs 0.25; cond3 {}/100, "
                            "median {:.3g} vs {:.3g}); cond1 median {:.3g} (bound {:.3g}, exempt), "
                            "|X_k| non-increasing in {}/100",
                            both, c2, median(v2), c3, median(v3), rows.front().report.cond3_bound, median(v1),
                            rows.front().report.cond1_bound, mono)};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Outcome cli_determinism() {
  const fs::path dir = fs::temp_directory_path() / "lrmc_acceptance_cli";
  fs::remove_all(dir);
  fs::create_directories(dir);

  struct Command {
    std::string name;
    std::string args;
    std::vector<std::string> outputs;  // first one is passed as --out
    std::string extra;                 // flags naming further outputs, with {} for the run tag
  };
  const std::vector<Command> commands{
      {"gen", "gen --n 40 --rank 3 --seed 5", {"gen.csv"}, ""},
      {"solve", "solve --n 40 --rank 2 --p 0.6 --q 0.1 --model lu --seed 5",
       {"solve.csv", "lhat.csv", "shat.csv"}, "--lhat {}lhat.csv --shat {}shat.csv"},
      {"sweep", "sweep --n 30 --rank 2 --grid 0.4:0.8:0.2 --fixed 0.1 --trials 3 --seed 5",
       {"sweep.csv", "sweep.csv.aggregate.csv"}, ""},
      {"sweep-q", "sweep --n 30 --rank 2 --sweep q --grid 0.05:0.15:0.05 --fixed 0.5 --trials 2 --seed 6",
       {"sweepq.csv", "sweepq.csv.aggregate.csv"}, ""},
      {"certify", "certify --n 40 --rank 2 --trials 6 --seed 5", {"certify.csv"}, ""},
      {"leverage", "leverage --n 40 --rank 2 --estimate-from 0.7 --q 0.05 --seed 5", {"leverage.csv"}, ""},
  };

  std::vector<std::string> mismatched;
  for (const auto& c : commands) {
    std::vector<std::string> contents[3];
    const std::pair<const char*, int> runs[3] = {{"a_", 1}, {"b_", 4}, {"c_", 1}};
    bool failed = false;
    for (int k = 0; k < 3; ++k) {
      const std::string tag = (dir / runs[k].first).string();
      std::string extra = c.extra;
      for (std::size_t pos; (pos = extra.find("{}")) != std::string::npos;) extra.replace(pos, 2, tag);
      const std::string cmd = fmt::format("{} {} --workers {} --out {}{} {} >/dev/null 2>&1", LRMC_CLI_PATH,
                                          c.args, runs[k].second, tag, c.outputs.front(), extra);
      if (std::system(cmd.c_str()) != 0) failed = true;
      for (const auto& o : c.outputs) contents[k].push_back(slurp(tag + o));
    }
    bool same = !failed;
    for (std::size_t o = 0; o < c.outputs.size(); ++o) {
      if (contents[0][o].empty() || contents[0][o] != contents[1][o] || contents[0][o] != contents[2][o]) {
        same = false;
      }
    }
    if (!same) mismatched.push_back(c.name);
  }
  fs::remove_all(dir);
  std::string names;
  for (const auto& c : commands) names += " " + c.name;
  return {mismatched.empty(),
          mismatched.empty() ? fmt::format("byte-identical across workers 1/4/1 for{}", names)
                             : fmt::format("differences or failures in {}", fmt::join(mismatched, ", "))};
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<Criterion> criteria{
      {1, "noiseless full-observation recovery", noiseless_recovery},
      {2, "p-sweep ordering LU vs UU", p_sweep_ordering},
      {3, "q-sweep ordering LU vs UU", q_sweep_ordering},
      {4, "sampler distributions", sampler_distributions},
      {5, "leverage identities", leverage_identities},
      {6, "projection algebra", projection_algebra},
      {7, "golfing decay and certificate support", golfing_decay},
      {8, "sampled tangent operator concentration", operator_concentration},
      {9, "dual conditions at desk scale", dual_conditions},
      {10, "CLI determinism", cli_determinism},
  };
  std::set<int> selected;
  for (int k = 1; k < argc; ++k) selected.insert(std::atoi(argv[k]));

  int failures = 0;
  for (const auto& c : criteria) {
    if (!selected.empty() && !selected.count(c.id)) continue;
    Outcome out;
    try {
      out = c.run();
    } catch (const std::exception& e) {
      out = {false, std::string("exception: ") + e.what()};
    }
    if (!out.pass) ++failures;
    std::cout << (out.pass ? "PASS" : "FAIL") << "  AC" << c.id << " " << c.name << ": " << out.detail
              << std::endl;
  }
  std::cout << (failures ? fmt::format("{} criteria failed", failures) : std::string("all criteria passed"))
            << std::endl;
  return failures ? 1 : 0;
}
