#pragma once

// Experiment runner: configuration, per-seed simulation, CSV/JSON output and
// hyperparameter sweeps.

#include "bcomd/environment.hpp"
#include "bcomd/meta.hpp"
#include "bcomd/oracle.hpp"
#include "bcomd/policy.hpp"

#include <json.hpp>

#include <filesystem>
#include <optional>
#include <string>
#include <variant>
#include <vector>

namespace bcomd {

enum class PolicyKind
{
  bcomd_theorem1,
  bcomd_manual,
  mbcomd,
  exp3,
};

PolicyKind parse_policy_kind(const std::string &name);
std::string to_string(PolicyKind kind);

struct PolicySpec
{
  PolicyKind kind = PolicyKind::bcomd_theorem1;
  std::optional<ManualParams> manual; // required for bcomd-manual, optional for exp3
  MetaConstants meta;
};

struct FixtureSpec
{
  FixtureKind kind = FixtureKind::vt_large_pt_small;
  std::int64_t horizon = 1024;
  int n = 0;
  double rho = 0.5;
};

struct StationarySpec
{
  std::vector<double> losses;
  std::vector<double> constraints;
  std::int64_t horizon = 1024;
};

struct TraceSource
{
  std::variant<TraceGenConfig, std::filesystem::path, FixtureSpec, StationarySpec> source = TraceGenConfig{};
  std::uint64_t seed = 1; // generator seed
};

struct ExperimentConfig
{
  TraceSource trace;
  PolicySpec policy;
  std::optional<double> rho; // defaults to min(1, measured margin)
  std::vector<std::uint64_t> seeds;
  std::filesystem::path output_dir; // empty: keep results in memory only
  bool emit_expected = false;       // also write the x_t-based expected series
  int jobs = 1;
  std::string label;
};

/// Default seed list 1..20.
std::vector<std::uint64_t> default_seeds();

ExperimentConfig config_from_json(const nlohmann::json &doc);
nlohmann::json to_json(const ExperimentConfig &config);
nlohmann::json to_json(const TraceSource &source);

Trace load_trace(const TraceSource &source);

/// A validated trace with its comparator and measures, shared by every seed.
struct PreparedTrace
{
  Trace trace;
  ComparatorSequence comparator;
  RegularityMeasures measures;
  double rho_hat = 0;
};

PreparedTrace prepare_trace(Trace trace);

/// Round-level expectation under the policy's own distribution x_t.
struct ExpectedRecord
{
  std::int64_t t = 0;
  double loss = 0;       // f_t . x_t
  double constraint = 0; // g_t . x_t
  double cum_loss = 0;
  double cum_violation = 0;
  double regret_prefix = 0;
};

struct RunResult
{
  std::uint64_t seed = 0;
  std::vector<RunRecord> records;
  std::vector<ExpectedRecord> expected;
  BcomdParams params; // single-learner policies only
  double final_regret = 0;
  double final_violation = 0;
  double max_lambda = 0;
  double final_expected_regret = 0;
  double final_expected_violation = 0;
  int exponent_clamps = 0;
  double seconds = 0;
};

/// Slater margin used by a run: the configured rho, or min(1, rho_hat).
/// Throws InfeasibleError when the margin is not positive or exceeds rho_hat.
double effective_rho(const PreparedTrace &prepared, std::optional<double> rho, PolicyKind kind);

RunResult simulate(const PreparedTrace &prepared, const PolicySpec &policy, double rho, std::uint64_t seed);

struct ExperimentSummary
{
  std::string label;
  std::vector<RunResult> runs; // in seed-list order
  RegularityMeasures measures;
  double rho_hat = 0;
  double rho = 0;
  double seconds = 0;
  double mean_regret = 0, se_regret = 0;
  double mean_violation = 0, se_violation = 0;
};

inline constexpr const char *run_csv_header =
    "t,action,loss,constraint,lambda,cum_loss,cum_violation,comparator_value,regret_prefix";

/// CSV with the fixed header; actions are written one-based.
void write_run_csv(const std::filesystem::path &path, const std::vector<RunRecord> &records);
std::vector<RunRecord> read_run_csv(const std::filesystem::path &path);
void write_expected_csv(const std::filesystem::path &path, const std::vector<ExpectedRecord> &records);

std::filesystem::path run_csv_path(const std::filesystem::path &dir, std::uint64_t seed);

/// Runs every seed. With an output directory, writes run_seed<seed>.csv per
/// seed and summary.json.
ExperimentSummary run_experiment(const ExperimentConfig &config);
ExperimentSummary run_experiment(const ExperimentConfig &config, const PreparedTrace &prepared);

nlohmann::json to_json(const ExperimentSummary &summary);

struct SweepRow
{
  std::size_t config_index = 0;
  std::string label;
  std::uint64_t seed = 0;
  bool ok = true;
  std::string error;
  double final_regret = 0;
  double final_violation = 0;
  double max_lambda = 0;
};

struct SweepAggregate
{
  std::size_t config_index = 0;
  std::string label;
  bool ok = true;
  std::string error;
  std::size_t seeds = 0;
  double mean_regret = 0, se_regret = 0;
  double mean_violation = 0, se_violation = 0;
};

struct SweepTable
{
  std::vector<SweepRow> rows;
  std::vector<SweepAggregate> aggregates;
  std::optional<std::size_t> best; // index into aggregates
  double violation_threshold = 0;
};

/// Runs every config; a failing config yields failed rows and the sweep
/// continues. Best = lowest mean regret among configs whose mean violation
/// is at most the threshold.
SweepTable sweep(const std::vector<ExperimentConfig> &grid, double violation_threshold);

/// Either {"configs": [...]} or {"base": {...}, "grid": {"eta": [...], "gamma": [...]}}
/// where each grid point becomes the manual preset mu = eta/2, Omega = 0.
std::vector<ExperimentConfig> sweep_configs_from_json(const nlohmann::json &doc);

void write_sweep_csv(const std::filesystem::path &path, const SweepTable &table);

} // namespace bcomd
