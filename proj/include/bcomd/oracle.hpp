#pragma once

// Ground truth for a finished trace: the per-slot constrained optimum,
// the comparator sequence, P_T / V_T, and regret/violation accounting.

#include "bcomd/environment.hpp"
#include "bcomd/simplex.hpp"

#include <span>
#include <vector>

namespace bcomd {

struct SlotOptimum
{
  ActionDistribution x;
  double value = 0; // f . x
};

/// min f.x over {x in simplex : g.x <= 0}. The optimum sits on a vertex of
/// that polytope: a pure arm with g_a <= 0, or the point on edge (a, b) with
/// g_a > 0 > g_b where g.x = 0. Ties go to the lowest arm index, then the
/// lowest second index. Throws InfeasibleError if every g_a > 0.
SlotOptimum per_slot_optimum(const Eigen::Ref<const Eigen::VectorXd> &f, const Eigen::Ref<const Eigen::VectorXd> &g);

struct ComparatorSequence
{
  TraceMatrix points;     // horizon x n
  Eigen::VectorXd values; // f_t . x*_t
};

struct RegularityMeasures
{
  double path_length = 0;        // sum_{t<T} |x*_t - x*_{t+1}|_1
  double temporal_variation = 0; // sum_{t<T} |f_t - f_{t+1}|_inf
};

ComparatorSequence comparator_sequence(const Trace &trace);
RegularityMeasures measure(const Trace &trace, const ComparatorSequence &comparator);

struct RegularityResult
{
  ComparatorSequence comparator;
  RegularityMeasures measures;
};

RegularityResult regularity_measures(const Trace &trace);

/// Per-round outcome of a played round.
struct PlayedRound
{
  int action = 0; // zero-based
  double loss = 0;
  double constraint = 0;
  double lambda = 0;
};

/// Row of the run CSV.
struct RunRecord
{
  std::int64_t t = 0; // one-based round
  int action = 0;     // zero-based
  double loss = 0;
  double constraint = 0;
  double lambda = 0;
  double cum_loss = 0;
  double cum_violation = 0;
  double comparator_value = 0;
  double regret_prefix = 0; // cum_loss - sum of comparator values so far
};

/// Prefix series of realized loss, violation and dynamic regret. The observed
/// loss/constraint of each round must match the trace entry of the played arm.
std::vector<RunRecord> evaluate_run(const Trace &trace, const ComparatorSequence &comparator,
                                    std::span<const PlayedRound> rounds);
std::vector<RunRecord> evaluate_run(const Trace &trace, std::span<const PlayedRound> rounds);

} // namespace bcomd
