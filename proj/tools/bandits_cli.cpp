// bandits: command-line front end for traces, runs, sweeps and checks.
//
// Exit codes: 0 success, 1 validation failure (bad input, failed check),
// 2 infeasibility (no Slater point, margin too small).

#include "bcomd/check/acceptance.hpp"
#include "bcomd/errors.hpp"
#include "bcomd/harness.hpp"

#include <CLI11.hpp>
#include <fmt/format.h>

#include <fstream>
#include <iostream>
#include <map>
#include <regex>

using namespace bcomd;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int exit_ok = 0;
constexpr int exit_invalid = 1;
constexpr int exit_infeasible = 2;

json read_json(const fs::path &path)
{
  std::ifstream in(path);
  if (!in)
    throw ValidationError("cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::parse_error &e) {
    throw ValidationError(fmt::format("{}: {}", path.string(), e.what()));
  }
}

struct GenerateArgs
{
  fs::path out;
  std::uint64_t seed = 1;
  std::string fixture;
  TraceGenConfig gen;
  std::string clip = "clip";
  std::int64_t fixture_horizon = 1024;
  int fixture_n = 0;
  double fixture_rho = 0.5;
};

struct RunArgs
{
  fs::path config;
  std::string policy;
  fs::path trace;
  std::vector<std::uint64_t> seeds;
  fs::path out;
  std::optional<double> rho;
  std::optional<double> eta, mu, gamma, omega;
  std::optional<int> jobs;
  bool emit_expected = false;
};

struct SweepArgs
{
  fs::path config;
  fs::path out;
  double threshold = 0;
  int jobs = 1;
};

struct MeasureArgs
{
  fs::path trace;
  fs::path config;
};

struct CheckArgs
{
  std::vector<int> only;
  int jobs = 0;
};

struct PlotArgs
{
  fs::path run_dir;
  fs::path out;
};

int cmd_generate(const GenerateArgs &a)
{
  Trace trace;
  if (!a.fixture.empty()) {
    trace = generate_incomparability_fixture(parse_fixture_kind(a.fixture), a.fixture_horizon, a.fixture_n,
                                             a.fixture_rho);
  } else {
    TraceGenConfig gen = a.gen;
    if (a.clip == "clip")
      gen.clip = ClipMode::clip;
    else if (a.clip == "reject")
      gen.clip = ClipMode::reject;
    else
      throw ValidationError("--clip must be 'clip' or 'reject'");
    trace = generate_shifting_trace(gen, a.seed);
  }
  if (a.out.empty() || a.out == "-")
    write_trace(std::cout, trace);
  else
    write_trace(a.out, trace);
  for (const auto &[key, value] : trace.metadata)
    fmt::print(stderr, "{} = {}\n", key, value);
  return exit_ok;
}

ExperimentConfig run_config(const RunArgs &a)
{
  ExperimentConfig cfg = a.config.empty() ? config_from_json(json::object()) : config_from_json(read_json(a.config));
  if (!a.policy.empty())
    cfg.policy.kind = parse_policy_kind(a.policy);
  if (!a.trace.empty())
    cfg.trace.source = a.trace;
  if (!a.seeds.empty())
    cfg.seeds = a.seeds;
  if (!a.out.empty())
    cfg.output_dir = a.out;
  if (a.rho)
    cfg.rho = a.rho;
  if (a.jobs)
    cfg.jobs = *a.jobs;
  if (a.emit_expected)
    cfg.emit_expected = true;
  if (a.eta || a.gamma || a.mu || a.omega) {
    ManualParams m = cfg.policy.manual.value_or(ManualParams{});
    if (a.eta) {
      m.eta = *a.eta;
      if (!a.mu && !cfg.policy.manual)
        m.mu = m.eta / 2;
    }
    if (a.gamma)
      m.gamma = *a.gamma;
    if (a.mu)
      m.mu = *a.mu;
    if (a.omega)
      m.omega = *a.omega;
    cfg.policy.manual = m;
  }
  if (cfg.policy.kind == PolicyKind::bcomd_manual && !cfg.policy.manual)
    throw ValidationError("bcomd-manual needs --eta and --gamma (or a config with them)");
  if (cfg.output_dir.empty())
    cfg.output_dir = "out";
  return cfg;
}

int cmd_run(const RunArgs &a)
{
  const ExperimentConfig cfg = run_config(a);
  const ExperimentSummary s = run_experiment(cfg);
  fmt::print("policy {} on {} seeds: regret {:.4g} (se {:.3g}), violation {:.4g} (se {:.3g}), rho {:.4g}\n",
             to_string(cfg.policy.kind), s.runs.size(), s.mean_regret, s.se_regret, s.mean_violation,
             s.se_violation, s.rho);
  fmt::print("wrote {}\n", cfg.output_dir.string());
  return exit_ok;
}

int cmd_sweep(const SweepArgs &a)
{
  const json doc = read_json(a.config);
  std::vector<ExperimentConfig> grid = sweep_configs_from_json(doc);
  double threshold = a.threshold;
  if (doc.contains("violation_threshold"))
    threshold = doc.at("violation_threshold").get<double>();
  for (ExperimentConfig &cfg : grid)
    cfg.jobs = std::max(cfg.jobs, a.jobs);
  const SweepTable table = sweep(grid, threshold);
  const fs::path out = a.out.empty() ? fs::path("sweep.csv") : a.out;
  if (out.has_parent_path())
    fs::create_directories(out.parent_path());
  write_sweep_csv(out, table);
  std::size_t failed = 0;
  for (const SweepAggregate &agg : table.aggregates) {
    if (!agg.ok)
      ++failed;
    fmt::print("{:>4} {:<40} {} regret {:.4g} violation {:.4g}{}\n", agg.config_index, agg.label,
               agg.ok ? "ok    " : "failed", agg.mean_regret, agg.mean_violation, agg.ok ? "" : " (" + agg.error + ")");
  }
  if (table.best)
    fmt::print("best: {}\n", table.aggregates[*table.best].label);
  else
    fmt::print("best: none within violation threshold {}\n", threshold);
  fmt::print("wrote {}\n", out.string());
  return failed == table.aggregates.size() ? exit_invalid : exit_ok;
}

int cmd_measure(const MeasureArgs &a)
{
  TraceSource source;
  if (!a.trace.empty())
    source.source = a.trace;
  else if (!a.config.empty())
    source = config_from_json(read_json(a.config)).trace;
  else
    throw ValidationError("measure needs --trace or --config");
  const PreparedTrace p = prepare_trace(load_trace(source));
  const json out{{"n", p.trace.n},
                 {"T", p.trace.horizon},
                 {"P_T", p.measures.path_length},
                 {"V_T", p.measures.temporal_variation},
                 {"rho_hat", p.rho_hat},
                 {"comparator_total", p.comparator.values.sum()}};
  std::cout << out.dump(2) << "\n";
  return exit_ok;
}

int cmd_check(const CheckArgs &a)
{
  check::AcceptanceOptions opts;
  opts.jobs = a.jobs;
  bool all = true;
  for (const check::CriterionResult &r : check::run_acceptance(a.only, opts)) {
    fmt::print("{}\n", check::format_result(r));
    std::fflush(stdout);
    all = all && r.passed;
  }
  return all ? exit_ok : exit_invalid;
}

// Mean and standard error across seeds of the prefix series in a run directory.
int cmd_plot_data(const PlotArgs &a)
{
  const std::regex pattern("run_seed([0-9]+)\\.csv");
  std::map<std::uint64_t, std::vector<RunRecord>> runs;
  for (const auto &entry : fs::directory_iterator(a.run_dir)) {
    std::smatch m;
    const std::string name = entry.path().filename().string();
    if (std::regex_match(name, m, pattern))
      runs.emplace(std::stoull(m[1].str()), read_run_csv(entry.path()));
  }
  if (runs.empty())
    throw ValidationError("no run_seed<k>.csv files in " + a.run_dir.string());
  const std::size_t length = runs.begin()->second.size();
  for (const auto &[seed, recs] : runs)
    if (recs.size() != length)
      throw ValidationError(fmt::format("seed {} has {} rounds, expected {}", seed, recs.size(), length));

  std::ofstream file;
  std::ostream *out = &std::cout;
  if (!a.out.empty() && a.out != "-") {
    file.open(a.out, std::ios::binary);
    if (!file)
      throw ValidationError("cannot open " + a.out.string());
    out = &file;
  }
  *out << "t,seeds,mean_cum_loss,se_cum_loss,mean_cum_violation,se_cum_violation,mean_regret,se_regret\n";
  const double k = static_cast<double>(runs.size());
  for (std::size_t i = 0; i < length; ++i) {
    double sums[3] = {0, 0, 0}, squares[3] = {0, 0, 0};
    for (const auto &[seed, recs] : runs) {
      const double v[3] = {recs[i].cum_loss, recs[i].cum_violation, recs[i].regret_prefix};
      for (int j = 0; j < 3; ++j) {
        sums[j] += v[j];
        squares[j] += v[j] * v[j];
      }
    }
    std::string line = fmt::format("{},{}", runs.begin()->second[i].t, runs.size());
    for (int j = 0; j < 3; ++j) {
      const double mean = sums[j] / k;
      const double var = k > 1 ? std::max(0.0, (squares[j] - k * mean * mean) / (k - 1)) : 0.0;
      line += fmt::format(",{:.17g},{:.17g}", mean, std::sqrt(var / k));
    }
    *out << line << "\n";
  }
  return exit_ok;
}

} // namespace

int main(int argc, char **argv)
{
  CLI::App app{"bandits: trace generation, policy runs, sweeps and acceptance checks"};
  app.require_subcommand(1);

  GenerateArgs gen;
  auto *generate = app.add_subcommand("generate", "write a trace file");
  generate->add_option("--out", gen.out, "output path ('-' for stdout)");
  generate->add_option("--seed", gen.seed, "generator seed");
  generate->add_option("--fixture", gen.fixture, "vt_small_pt_large or vt_large_pt_small instead of the shifting trace");
  generate->add_option("--n", gen.gen.n, "arms");
  generate->add_option("--horizon", gen.gen.horizon, "rounds T");
  generate->add_option("--window", gen.gen.window, "rounds between shifts");
  generate->add_option("--shift", gen.gen.shift, "arms per shift");
  generate->add_option("--repetitions", gen.gen.repetitions, "number of shifts");
  generate->add_option("--noise-std", gen.gen.noise_std, "Gaussian noise standard deviation");
  generate->add_option("--rho-target", gen.gen.rho_target, "minimum acceptable Slater margin");
  generate->add_option("--clip", gen.clip, "clip or reject out-of-range noisy values");
  generate->add_flag("--zero-based-indicator", gen.gen.zero_based_indicator, "use a <= threshold instead of a+1");
  generate->add_flag("--allow-infeasible", gen.gen.allow_infeasible, "keep traces without a Slater point");
  generate->add_option("--fixture-horizon", gen.fixture_horizon, "fixture rounds");
  generate->add_option("--fixture-n", gen.fixture_n, "fixture arms (0: smallest)");
  generate->add_option("--fixture-rho", gen.fixture_rho, "fixture constraint slack");

  RunArgs run;
  auto *run_cmd = app.add_subcommand("run", "run a policy on a trace for each seed");
  run_cmd->add_option("--config", run.config, "experiment config (JSON)");
  run_cmd->add_option("--policy", run.policy, "bcomd-theorem1, bcomd-manual, mbcomd or exp3");
  run_cmd->add_option("--trace", run.trace, "trace file (overrides the config's trace)");
  run_cmd->add_option("--seed", run.seeds, "policy seeds (repeatable)");
  run_cmd->add_option("--out", run.out, "output directory");
  run_cmd->add_option("--rho", run.rho, "Slater margin (default min(1, measured))");
  run_cmd->add_option("--eta", run.eta, "manual primal step");
  run_cmd->add_option("--mu", run.mu, "manual dual step (default eta/2)");
  run_cmd->add_option("--gamma", run.gamma, "manual probability floor");
  run_cmd->add_option("--omega", run.omega, "manual stabilizer (default 0)");
  run_cmd->add_option("--jobs", run.jobs, "worker threads");
  run_cmd->add_flag("--emit-expected", run.emit_expected, "also write expected-value series");

  SweepArgs sw;
  auto *sweep_cmd = app.add_subcommand("sweep", "run a grid of configs and tabulate");
  sweep_cmd->add_option("--config", sw.config, "sweep spec (JSON)")->required();
  sweep_cmd->add_option("--out", sw.out, "summary CSV path");
  sweep_cmd->add_option("--threshold", sw.threshold, "violation threshold for picking the best config");
  sweep_cmd->add_option("--jobs", sw.jobs, "worker threads per config");

  MeasureArgs meas;
  auto *measure_cmd = app.add_subcommand("measure", "report P_T, V_T and the Slater margin of a trace");
  measure_cmd->add_option("--trace", meas.trace, "trace file");
  measure_cmd->add_option("--config", meas.config, "experiment config whose trace to measure");

  CheckArgs chk;
  auto *check_cmd = app.add_subcommand("check", "run the acceptance criteria");
  check_cmd->add_option("--only", chk.only, "criterion ids to run (default all)");
  check_cmd->add_option("--jobs", chk.jobs, "worker threads (0: all cores)");

  PlotArgs plot;
  auto *plot_cmd = app.add_subcommand("plot-data", "aggregate run CSVs into mean/se curves");
  plot_cmd->add_option("--run-dir", plot.run_dir, "directory with run_seed<k>.csv files")->required();
  plot_cmd->add_option("--out", plot.out, "output CSV ('-' for stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp &e) {
    return app.exit(e);
  } catch (const CLI::ParseError &e) {
    app.exit(e);
    return exit_invalid;
  }

  try {
    if (*generate)
      return cmd_generate(gen);
    if (*run_cmd)
      return cmd_run(run);
    if (*sweep_cmd)
      return cmd_sweep(sw);
    if (*measure_cmd)
      return cmd_measure(meas);
    if (*check_cmd)
      return cmd_check(chk);
    if (*plot_cmd)
      return cmd_plot_data(plot);
  } catch (const InfeasibleError &e) {
    fmt::print(stderr, "infeasible: {}\n", e.what());
    return exit_infeasible;
  } catch (const std::exception &e) {
    fmt::print(stderr, "error: {}\n", e.what());
    return exit_invalid;
  }
  return exit_invalid;
}
