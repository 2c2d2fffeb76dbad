#pragma once

// Acceptance criteria 1..11. Each check runs its own workload and reports
// a verdict with the measured numbers.

#include <string>
#include <vector>

namespace bcomd::check {

struct CriterionResult
{
  int id = 0;
  std::string name;
  bool passed = false;
  std::string detail;
  double seconds = 0;
  double budget_seconds = 0; // 0: no runtime budget
};

struct AcceptanceOptions
{
  int jobs = 0; // worker threads for multi-seed runs; 0 = hardware concurrency
};

CriterionResult check_estimator_unbiasedness(const AcceptanceOptions &opts = {});
CriterionResult check_projection_optimality(const AcceptanceOptions &opts = {});
CriterionResult check_dual_boundedness(const AcceptanceOptions &opts = {});
/// Criteria 4 and 5 share their runs.
std::vector<CriterionResult> check_sublinear_slopes(const AcceptanceOptions &opts = {});
CriterionResult check_constraint_control(const AcceptanceOptions &opts = {});
CriterionResult check_meta_phase_regret(const AcceptanceOptions &opts = {});
CriterionResult check_mbcomd_end_to_end(const AcceptanceOptions &opts = {});
CriterionResult check_oracle_equivalence(const AcceptanceOptions &opts = {});
CriterionResult check_fixture_measures(const AcceptanceOptions &opts = {});
CriterionResult check_determinism(const AcceptanceOptions &opts = {});

/// Runs the selected criteria (all when empty) in id order.
std::vector<CriterionResult> run_acceptance(const std::vector<int> &ids = {}, const AcceptanceOptions &opts = {});

/// One line: "PASS 4 <name>: <detail> [12.3 s / 600 s]".
std::string format_result(const CriterionResult &result);

} // namespace bcomd::check
