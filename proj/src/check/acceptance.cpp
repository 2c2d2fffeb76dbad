#include "bcomd/check/acceptance.hpp"

#include "bcomd/check/reference.hpp"
#include "bcomd/errors.hpp"
#include "bcomd/harness.hpp"
#include "bcomd/meta.hpp"
#include "bcomd/oracle.hpp"
#include "bcomd/policy.hpp"
#include "bcomd/simplex.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <sstream>
#include <thread>

#include <unistd.h>

namespace bcomd::check {

namespace fs = std::filesystem;

namespace {

class Timer
{
public:
  double seconds() const { return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count(); }

private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

int worker_count(const AcceptanceOptions &opts)
{
  if (opts.jobs > 0)
    return opts.jobs;
  return static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
}

CriterionResult finish(CriterionResult r, const Timer &timer)
{
  r.seconds = timer.seconds();
  if (r.budget_seconds > 0 && r.seconds > r.budget_seconds) {
    r.passed = false;
    r.detail += fmt::format("; over runtime budget ({:.1f} s > {:.0f} s)", r.seconds, r.budget_seconds);
  }
  return r;
}

ExperimentConfig seeded_config(PolicySpec policy, int seeds, const AcceptanceOptions &opts)
{
  ExperimentConfig cfg;
  cfg.policy = std::move(policy);
  cfg.seeds.clear();
  for (int s = 1; s <= seeds; ++s)
    cfg.seeds.push_back(static_cast<std::uint64_t>(s));
  cfg.jobs = worker_count(opts);
  return cfg;
}

// n = 3 stationary control: arm 0 is cheap but infeasible, so the optimum
// mixes arms 0 and 1 at g.x = 0.
Trace stationary_control(std::int64_t horizon)
{
  Eigen::VectorXd f(3), g(3);
  f << 0.2, 0.5, 0.8;
  g << 0.5, -0.5, -0.5;
  return generate_stationary_trace(f, g, horizon);
}

Trace shifting_trace(std::int64_t horizon, std::uint64_t seed = 1)
{
  TraceGenConfig cfg;
  cfg.horizon = horizon;
  return generate_shifting_trace(cfg, seed);
}

std::vector<std::uint64_t> seed_range(int count)
{
  std::vector<std::uint64_t> seeds;
  for (int s = 1; s <= count; ++s)
    seeds.push_back(static_cast<std::uint64_t>(s));
  return seeds;
}

} // namespace

CriterionResult check_estimator_unbiasedness(const AcceptanceOptions &)
{
  Timer timer;
  CriterionResult r{1, "estimator unbiasedness", false, "", 0, 1.0};
  Eigen::VectorXd x(3), v(3);
  x << 0.2, 0.3, 0.5;
  v << 0.4, 0.6, 0.8;
  const int draws = 100000;
  CounterRng rng(2024, 7);
  Eigen::VectorXd sum = Eigen::VectorXd::Zero(3), sumsq = Eigen::VectorXd::Zero(3);
  for (int i = 0; i < draws; ++i) {
    const int a = sample_arm(x, rng.uniform());
    const Eigen::VectorXd est = importance_weighted_estimate(x, a, v(a));
    sum += est;
    sumsq += est.cwiseProduct(est);
  }
  const Eigen::VectorXd mean = sum / draws;
  const Eigen::VectorXd var = (sumsq / draws - mean.cwiseProduct(mean)) * (static_cast<double>(draws) / (draws - 1));
  const Eigen::VectorXd se = (var / draws).cwiseSqrt();
  double worst = 0;
  for (int i = 0; i < 3; ++i)
    worst = std::max(worst, std::abs(mean(i) - v(i)) / se(i));
  r.passed = worst <= 4.0;
  r.detail = fmt::format("mean=({:.4f},{:.4f},{:.4f}) max |z|={:.2f} (limit 4)", mean(0), mean(1), mean(2), worst);
  return finish(r, timer);
}

CriterionResult check_projection_optimality(const AcceptanceOptions &)
{
  Timer timer;
  CriterionResult r{2, "KL projection optimality", true, "", 0, 30.0};
  CounterRng rng(99, 3);
  CounterRng dirichlet(99, 4);
  double worst_gap = -1e300, worst_kkt = 0;
  int failures = 0;
  const int cases = 1000;
  for (int c = 0; c < cases; ++c) {
    const int n = 2 + c % 3;
    Eigen::VectorXd y(n);
    for (int i = 0; i < n; ++i)
      y(i) = std::exp(-3.0 + 6.0 * rng.uniform());
    const double gamma = 0.999 * rng.uniform() / n;
    const Eigen::VectorXd x = project_kl(y, gamma);
    const double value = reference_kl(x, y);
    const GridMinimum ref =
        n <= 3 ? grid_kl_minimum(y, gamma, 1e-3) : sampled_kl_minimum(y, gamma, 100000, dirichlet);
    const double gap = value - ref.value;
    const double kkt = kkt_residual(x, y, gamma);
    worst_gap = std::max(worst_gap, gap);
    worst_kkt = std::max(worst_kkt, kkt);
    if (gap > 1e-4 || kkt > 1e-10)
      ++failures;
  }
  r.passed = failures == 0;
  r.detail = fmt::format("{} cases, {} failures, max(value - reference)={:.3g} (limit 1e-4), max KKT residual={:.3g} "
                         "(limit 1e-10)",
                         cases, failures, worst_gap, worst_kkt);
  return finish(r, timer);
}

CriterionResult check_dual_boundedness(const AcceptanceOptions &opts)
{
  Timer timer;
  CriterionResult r{3, "dual boundedness", true, "", 0, 120.0};
  const std::int64_t horizon = 10000;
  struct Family
  {
    std::string name;
    Trace trace;
  };
  std::vector<Family> families;
  families.push_back({"stationary", stationary_control(horizon)});
  families.push_back({"shifting", shifting_trace(horizon)});
  families.push_back({"fixture", generate_incomparability_fixture(FixtureKind::vt_small_pt_large, horizon, 3, 0.5)});

  std::string detail;
  for (Family &fam : families) {
    const PreparedTrace prepared = prepare_trace(std::move(fam.trace));
    ExperimentConfig cfg = seeded_config(PolicySpec{PolicyKind::bcomd_theorem1, std::nullopt, {}}, 20, opts);
    const ExperimentSummary s = run_experiment(cfg, prepared);
    double max_lambda = 0, omega = 0;
    std::int64_t exceed = 0;
    for (const RunResult &run : s.runs) {
      omega = run.params.omega;
      for (const RunRecord &rec : run.records) {
        max_lambda = std::max(max_lambda, rec.lambda);
        if (rec.lambda > run.params.omega)
          ++exceed;
      }
    }
    if (exceed > 0)
      r.passed = false;
    detail += fmt::format("{}{}: max lambda={:.3g}, Omega={:.4g}, rounds above Omega={}", detail.empty() ? "" : "; ",
                          fam.name, max_lambda, omega, exceed);
  }
  r.detail = detail;
  return finish(r, timer);
}

std::vector<CriterionResult> check_sublinear_slopes(const AcceptanceOptions &opts)
{
  Timer timer;
  CriterionResult regret{4, "sublinear regret slope", false, "", 0, 600.0};
  CriterionResult violation{5, "sublinear violation slope", false, "", 0, 600.0};
  const std::vector<int> exponents = {10, 11, 12, 13, 14};
  Eigen::VectorXd log_t(5), log_regret(5), log_violation(5);
  std::string points;
  for (std::size_t i = 0; i < exponents.size(); ++i) {
    const std::int64_t horizon = std::int64_t{1} << exponents[i];
    const PreparedTrace prepared = prepare_trace(stationary_control(horizon));
    ExperimentConfig cfg = seeded_config(PolicySpec{PolicyKind::bcomd_theorem1, std::nullopt, {}}, 20, opts);
    const ExperimentSummary s = run_experiment(cfg, prepared);
    const auto k = static_cast<Eigen::Index>(i);
    log_t(k) = std::log(static_cast<double>(horizon));
    log_regret(k) = std::log(std::max(s.mean_regret, 1e-12));
    log_violation(k) = std::log(std::max(1.0, s.mean_violation));
    points += fmt::format("{}T=2^{}: regret={:.1f} violation={:.1f}", points.empty() ? "" : ", ", exponents[i],
                          s.mean_regret, s.mean_violation);
  }
  const double regret_slope = ls_slope(log_t, log_regret);
  const double violation_slope = ls_slope(log_t, log_violation);
  regret.passed = regret_slope <= 0.80;
  violation.passed = violation_slope <= 0.75;
  regret.detail = fmt::format("slope={:.3f} (limit 0.80); {}", regret_slope, points);
  violation.detail = fmt::format("slope={:.3f} (limit 0.75); {}", violation_slope, points);
  // Both criteria come from the same runs and share the budget.
  return {finish(regret, timer), finish(violation, timer)};
}

CriterionResult check_constraint_control(const AcceptanceOptions &opts)
{
  Timer timer;
  CriterionResult r{6, "constraint control vs exp3", false, "", 0, 300.0};
  const TraceGenConfig gen; // n = 25, six shifts
  TraceSource source{gen, 1};
  const PreparedTrace prepared = prepare_trace(load_trace(source));

  // BCOMD hyperparameters come from the experiment grid: lowest regret among
  // configs without net violation, falling back to the lowest violation.
  std::vector<ExperimentConfig> grid;
  for (const ManualParams &m : experiment_grid(3)) {
    ExperimentConfig cfg = seeded_config(PolicySpec{PolicyKind::bcomd_manual, m, {}}, 20, opts);
    cfg.trace = source;
    cfg.label = fmt::format("eta={:.3g} gamma={:.3g}", m.eta, m.gamma);
    grid.push_back(cfg);
  }
  const SweepTable table = sweep(grid, 0.0);
  std::size_t pick = 0;
  if (table.best) {
    pick = *table.best;
  } else {
    for (std::size_t i = 1; i < table.aggregates.size(); ++i)
      if (table.aggregates[i].ok && table.aggregates[i].mean_violation < table.aggregates[pick].mean_violation)
        pick = i;
  }
  const SweepAggregate &best = table.aggregates[pick];

  ExperimentConfig exp3 = seeded_config(PolicySpec{PolicyKind::exp3, std::nullopt, {}}, 20, opts);
  const ExperimentSummary baseline = run_experiment(exp3, prepared);

  r.passed = best.ok && best.mean_violation < baseline.mean_violation &&
             best.mean_violation < 0.5 * baseline.mean_violation;
  // Both comparisons are taken literally. When exp3's violation is negative
  // the 0.5x clause is weaker than the first one; the detail says so.
  r.detail = fmt::format("BCOMD[{}] violation={:.1f} regret={:.1f}; exp3 violation={:.1f} regret={:.1f}; "
                         "below exp3: {}, below 0.5*exp3 ({:.1f}): {}{}",
                         best.label, best.mean_violation, best.mean_regret, baseline.mean_violation,
                         baseline.mean_regret, best.mean_violation < baseline.mean_violation ? "yes" : "no",
                         0.5 * baseline.mean_violation, best.mean_violation < 0.5 * baseline.mean_violation ? "yes" : "no",
                         baseline.mean_violation < 0 ? "; note: exp3 violation is negative on this trace" : "");
  return finish(r, timer);
}

CriterionResult check_meta_phase_regret(const AcceptanceOptions &)
{
  Timer timer;
  CriterionResult r{7, "meta-learner phase regret", true, "", 0, 120.0};
  const std::int64_t length = 4096;
  const int experts = 3;
  const Trace trace = shifting_trace(length);
  const int n = trace.n;

  std::vector<ActionDistribution> advice;
  advice.push_back(ActionDistribution::Constant(n, 1.0 / n));
  ActionDistribution low = ActionDistribution::Constant(n, 0.1 / (n - 1));
  low(0) = 0.9;
  advice.push_back(low);
  ActionDistribution mid = ActionDistribution::Constant(n, 0.5 / (n - 1));
  mid(n / 2) = 0.5;
  advice.push_back(mid);

  Eigen::VectorXd expert_loss = Eigen::VectorXd::Zero(experts);
  for (int k = 0; k < experts; ++k)
    for (std::int64_t t = 0; t < length; ++t)
      expert_loss(k) += trace.losses.row(t).dot(advice[k].transpose());
  const double best_expert = expert_loss.minCoeff();
  const double bound = 10.0 * std::sqrt(n * static_cast<double>(length) * std::log(static_cast<double>(experts)));

  double worst = -1e300;
  int failures = 0;
  for (std::uint64_t seed : seed_range(20)) {
    std::vector<Expert> pool;
    for (const ActionDistribution &x : advice)
      pool.emplace_back(FixedExpert{x});
    const double eta_meta = 1.0 / std::sqrt(static_cast<double>(length));
    const double gamma_meta = std::min(1.0 / experts, std::pow(static_cast<double>(length), -1.0 / 3.0));
    MetaPhase phase(std::move(pool), MetaMixer(experts, eta_meta, gamma_meta), seed);
    double meta_loss = 0;
    for (std::int64_t t = 0; t < length; ++t)
      meta_loss += phase.step([&](int a) { return Feedback{trace.losses(t, a), trace.constraints(t, a)}; }).loss;
    const double gap = meta_loss - best_expert;
    worst = std::max(worst, gap);
    if (gap > bound)
      ++failures;
  }
  r.passed = failures == 0;
  r.detail = fmt::format("worst gap over 20 seeds={:.1f}, bound 10*sqrt(nL log K)={:.1f}, best expert loss={:.1f}",
                         worst, bound, best_expert);
  return finish(r, timer);
}

CriterionResult check_mbcomd_end_to_end(const AcceptanceOptions &opts)
{
  Timer timer;
  CriterionResult r{8, "MBCOMD end-to-end", false, "", 0, 900.0};
  const std::int64_t horizon = std::int64_t{1} << 14;
  const PreparedTrace prepared = prepare_trace(shifting_trace(horizon));

  const ExperimentSummary meta =
      run_experiment(seeded_config(PolicySpec{PolicyKind::mbcomd, std::nullopt, {}}, 20, opts), prepared);
  const ExperimentSummary tuned =
      run_experiment(seeded_config(PolicySpec{PolicyKind::bcomd_theorem1, std::nullopt, {}}, 20, opts), prepared);

  // Violation slope over the prefixes t = 2^10 .. 2^14 of the same runs.
  Eigen::VectorXd log_t(5), log_v(5);
  for (int i = 0; i < 5; ++i) {
    const std::int64_t t = std::int64_t{1} << (10 + i);
    double mean = 0;
    for (const RunResult &run : meta.runs)
      mean += run.records[static_cast<std::size_t>(t - 1)].cum_violation;
    mean /= static_cast<double>(meta.runs.size());
    log_t(i) = std::log(static_cast<double>(t));
    log_v(i) = std::log(std::max(1.0, mean));
  }
  const double slope = ls_slope(log_t, log_v);
  const double ratio = meta.mean_regret / tuned.mean_regret;
  r.passed = ratio <= 3.0 && slope <= 0.75;
  r.detail = fmt::format("MBCOMD regret={:.1f} violation={:.1f}; theorem1 BCOMD regret={:.1f} violation={:.1f}; "
                         "regret ratio={:.3f} (limit 3), violation slope={:.3f} (limit 0.75)",
                         meta.mean_regret, meta.mean_violation, tuned.mean_regret, tuned.mean_violation, ratio, slope);
  return finish(r, timer);
}

CriterionResult check_oracle_equivalence(const AcceptanceOptions &)
{
  Timer timer;
  CriterionResult r{9, "comparator oracle equivalence", true, "", 0, 10.0};
  CounterRng rng(7, 11);
  double worst = 0;
  int failures = 0, infeasible = 0;
  for (int c = 0; c < 1000; ++c) {
    const int n = 1 + c % 6;
    Eigen::VectorXd f(n), g(n);
    for (int i = 0; i < n; ++i) {
      f(i) = rng.uniform();
      g(i) = 2 * rng.uniform() - 1;
    }
    // Every fourth slot is forced feasible so both branches are exercised.
    if (c % 4 == 0)
      g(static_cast<Eigen::Index>(rng.uniform() * n)) = -std::abs(g(0)) - 0.01;
    const std::optional<double> ref = lp_dual_value(f, g);
    try {
      const SlotOptimum opt = per_slot_optimum(f, g);
      const double err = ref ? std::abs(opt.value - *ref) : 1.0;
      const bool feasible_point = opt.x.dot(g) <= 1e-12 && std::abs(opt.x.sum() - 1) <= 1e-12 &&
                                  (opt.x.array() >= 0).all() && std::abs(opt.x.dot(f) - opt.value) <= 1e-12;
      worst = std::max(worst, err);
      if (err > 1e-6 || !feasible_point)
        ++failures;
    } catch (const InfeasibleError &) {
      ++infeasible;
      if (ref)
        ++failures;
    }
  }
  r.passed = failures == 0;
  r.detail = fmt::format("1000 slots (n<=6), {} infeasible, {} mismatches, max |value - dual value|={:.3g} "
                         "(limit 1e-6)",
                         infeasible, failures, worst);
  return finish(r, timer);
}

CriterionResult check_fixture_measures(const AcceptanceOptions &)
{
  Timer timer;
  CriterionResult r{10, "incomparability fixture measures", true, "", 0, 1.0};
  std::string detail;
  for (std::int64_t horizon : {std::int64_t{4}, std::int64_t{1024}}) {
    const double t = static_cast<double>(horizon);
    const RegularityResult small =
        regularity_measures(generate_incomparability_fixture(FixtureKind::vt_small_pt_large, horizon, 3));
    const RegularityResult large =
        regularity_measures(generate_incomparability_fixture(FixtureKind::vt_large_pt_small, horizon));
    // Exact forms: (2(T-1), (T-1)/T) and (0, (T-1)/2); dyadic T keeps them exact.
    const bool ok = small.measures.path_length == 2 * (t - 1) && small.measures.temporal_variation == (t - 1) / t &&
                    large.measures.path_length == 0 && large.measures.temporal_variation == (t - 1) / 2;
    if (!ok)
      r.passed = false;
    detail += fmt::format("{}T={}: small (P={}, V={}), large (P={}, V={})", detail.empty() ? "" : "; ", horizon,
                          small.measures.path_length, small.measures.temporal_variation, large.measures.path_length,
                          large.measures.temporal_variation);
  }
  r.detail = detail;
  return finish(r, timer);
}

CriterionResult check_determinism(const AcceptanceOptions &opts)
{
  Timer timer;
  CriterionResult r{11, "determinism", true, "", 0, 0};
  const fs::path root = fs::temp_directory_path() / fmt::format("bcomd_determinism_{}", ::getpid());
  fs::remove_all(root);

  auto slurp = [](const fs::path &p) {
    std::ifstream in(p, std::ios::binary);
    return std::string(std::istreambuf_iterator<char>(in), {});
  };

  TraceGenConfig gen;
  gen.horizon = 3000;
  std::vector<PolicySpec> policies = {
      {PolicyKind::bcomd_theorem1, std::nullopt, {}},
      {PolicyKind::bcomd_manual, experiment_preset(0.01, 1e-4), {}},
      {PolicyKind::mbcomd, std::nullopt, {}},
      {PolicyKind::exp3, std::nullopt, {}},
  };
  int files = 0, mismatches = 0;
  for (const PolicySpec &policy : policies) {
    ExperimentConfig cfg;
    cfg.trace = TraceSource{gen, 5};
    cfg.policy = policy;
    cfg.seeds = {1, 2, 3};
    cfg.emit_expected = true;
    cfg.output_dir = root / to_string(policy.kind) / "a";
    cfg.jobs = 1;
    run_experiment(cfg);
    // Second pass in parallel: scheduling must not leak into the output.
    cfg.output_dir = root / to_string(policy.kind) / "b";
    cfg.jobs = std::max(2, worker_count(opts));
    run_experiment(cfg);
    for (const auto &entry : fs::directory_iterator(root / to_string(policy.kind) / "a")) {
      if (entry.path().extension() != ".csv")
        continue;
      ++files;
      const fs::path twin = root / to_string(policy.kind) / "b" / entry.path().filename();
      if (!fs::exists(twin) || slurp(entry.path()) != slurp(twin))
        ++mismatches;
    }
  }
  fs::remove_all(root);
  r.passed = files > 0 && mismatches == 0;
  r.detail = fmt::format("{} CSV files compared across repeated runs, {} differ", files, mismatches);
  return finish(r, timer);
}

std::vector<CriterionResult> run_acceptance(const std::vector<int> &ids, const AcceptanceOptions &opts)
{
  auto wanted = [&](int id) { return ids.empty() || std::find(ids.begin(), ids.end(), id) != ids.end(); };
  std::vector<CriterionResult> out;
  auto guarded = [&](int id, const std::string &name, auto &&fn) {
    try {
      fn();
    } catch (const std::exception &e) {
      out.push_back(CriterionResult{id, name, false, fmt::format("error: {}", e.what()), 0, 0});
    }
  };
  if (wanted(1))
    guarded(1, "estimator unbiasedness", [&] { out.push_back(check_estimator_unbiasedness(opts)); });
  if (wanted(2))
    guarded(2, "KL projection optimality", [&] { out.push_back(check_projection_optimality(opts)); });
  if (wanted(3))
    guarded(3, "dual boundedness", [&] { out.push_back(check_dual_boundedness(opts)); });
  if (wanted(4) || wanted(5))
    guarded(4, "sublinear slopes", [&] {
      for (CriterionResult &c : check_sublinear_slopes(opts))
        if (wanted(c.id))
          out.push_back(std::move(c));
    });
  if (wanted(6))
    guarded(6, "constraint control vs exp3", [&] { out.push_back(check_constraint_control(opts)); });
  if (wanted(7))
    guarded(7, "meta-learner phase regret", [&] { out.push_back(check_meta_phase_regret(opts)); });
  if (wanted(8))
    guarded(8, "MBCOMD end-to-end", [&] { out.push_back(check_mbcomd_end_to_end(opts)); });
  if (wanted(9))
    guarded(9, "comparator oracle equivalence", [&] { out.push_back(check_oracle_equivalence(opts)); });
  if (wanted(10))
    guarded(10, "incomparability fixture measures", [&] { out.push_back(check_fixture_measures(opts)); });
  if (wanted(11))
    guarded(11, "determinism", [&] { out.push_back(check_determinism(opts)); });
  return out;
}

std::string format_result(const CriterionResult &r)
{
  const std::string budget = r.budget_seconds > 0 ? fmt::format(" / {:.0f} s", r.budget_seconds) : "";
  return fmt::format("{} {:>2} {}: {} [{:.2f} s{}]", r.passed ? "PASS" : "FAIL", r.id, r.name, r.detail, r.seconds,
                     budget);
}

} // namespace bcomd::check
