#pragma once

// Bandit-feedback primal-dual mirror descent with a time-varying soft
// constraint (BCOMD), its parameter schedule, and the unconstrained
// EXP3-style configuration used as a baseline.

#include "bcomd/random.hpp"
#include "bcomd/simplex.hpp"

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <variant>
#include <vector>

namespace bcomd {

/// Path length P_T and temporal variation V_T of a trace.
struct Regularity
{
  double path_length = 0;
  double temporal_variation = 0;
};

/// Hand-picked step sizes. Omega = 0 disables the stabilizer.
struct ManualParams
{
  double eta = 0;
  double mu = 0;
  double gamma = 0;
  double omega = 0;
};

struct Theorem1Schedule
{
};

using Schedule = std::variant<Theorem1Schedule, ManualParams>;

enum class ScheduleMode
{
  theorem1,
  manual
};

struct BcomdParams
{
  int n = 0;
  std::int64_t horizon = 0;
  double rho = 1;
  double scale_m = 0;   // M = 4((3n + 2)/rho + 1)^2
  double c_t = 0;       // regularity mix min{sqrt(P_T), V_T^(1/3) T^(1/6)}
  double eta = 0;       // primal step
  double mu = 0;        // dual step
  double gamma = 0;     // probability floor
  double omega = 0;     // stabilizer; in theorem1 mode also the dual ceiling
  ScheduleMode mode = ScheduleMode::manual;
};

/// M = 4((3n + 2)/rho + 1)^2.
double theorem1_scale(int n, double rho);

/// Dual ceiling
///   log(1/gamma)/rho * mu/eta + 3n/(2 rho) eta + mu/(2 rho) + 3n/rho + 2/rho + 1.
double dual_bound(int n, double rho, double eta, double mu, double gamma);

/// Tuned schedule (needs the regularity measures) or a validated
/// passthrough of manual values.
BcomdParams compute_parameters(int n, std::int64_t horizon, double rho, std::optional<Regularity> regularity,
                               const Schedule &schedule);

/// Manual preset from the experimental grid: mu = eta / 2, Omega = 0.
ManualParams experiment_preset(double eta, double gamma);

/// Log-spaced grid over eta in [1e-3, 4e-2] and gamma in [1e-5, 1e-3]
/// with `per_axis` points per axis, each with mu = eta / 2 and Omega = 0.
std::vector<ManualParams> experiment_grid(int per_axis);

void validate(const BcomdParams &params);

struct Feedback
{
  double loss = 0;       // f_t(a_t) in [0, 1]
  double constraint = 0; // g_t(a_t) in [-1, 1]
};

/// Reveals the played arm's values only.
using FeedbackOracle = std::function<Feedback(int arm)>;

void validate_feedback(const Feedback &feedback);

/// (value / x_a) e_a. Unbiased for the dense value vector when a ~ x.
Eigen::VectorXd importance_weighted_estimate(const Eigen::Ref<const Eigen::VectorXd> &x, int arm, double value);

/// Inverse-CDF draw of an arm from x given u in [0, 1).
int sample_arm(const Eigen::Ref<const Eigen::VectorXd> &x, double u);

struct RoundRecord
{
  int action = 0;          // zero-based arm
  double loss = 0;
  double constraint = 0;
  double lambda = 0;       // dual variable after the update
  double pseudo_cost = 0;  // nonzero entry of the stabilized pseudo-cost estimate
  ActionDistribution next; // distribution after projection
};

/// One BCOMD learner. Single-stepper: do not call step() concurrently on the
/// same instance.
class BcomdPolicy
{
public:
  BcomdPolicy(const BcomdParams &params, std::uint64_t seed);

  const BcomdParams &params() const { return params_; }
  const ActionDistribution &distribution() const { return x_; }
  double lambda() const { return lambda_; }
  std::int64_t round() const { return round_; }
  bool exp3() const { return exp3_; }
  int exponent_clamps() const { return clamps_; }
  const CounterRng &rng() const { return rng_; }

  /// Sample, query the oracle once, update.
  RoundRecord step(const FeedbackOracle &oracle);

  /// Update after `action` was played with probability `denominator`
  /// (x_a for a stand-alone learner, the mixture probability inside the
  /// meta-learner).
  RoundRecord update(int action, const Feedback &feedback, double denominator);

  /// Back to x = uniform, lambda = 0; the generator keeps its position.
  void reset();

  /// Used by tests to start from a chosen iterate.
  void set_state(const ActionDistribution &x, double lambda);

  friend BcomdPolicy exp3_mode(BcomdPolicy state);

private:
  BcomdParams params_;
  ActionDistribution x_;
  double lambda_ = 0;
  std::int64_t round_ = 0;
  CounterRng rng_;
  bool exp3_ = false;
  int clamps_ = 0;
};

/// Same learner with the dual frozen at zero, no stabilizer, and pseudo-costs
/// built from losses only.
BcomdPolicy exp3_mode(BcomdPolicy state);

} // namespace bcomd
