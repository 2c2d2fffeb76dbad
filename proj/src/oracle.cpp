#include "bcomd/oracle.hpp"

#include "bcomd/errors.hpp"

#include <fmt/format.h>

namespace bcomd {

namespace {

// Values closer than this are treated as ties so that the lexicographic
// tie-break is not decided by rounding noise.
constexpr double tie_tolerance = 1e-12;

} // namespace

SlotOptimum per_slot_optimum(const Eigen::Ref<const Eigen::VectorXd> &f, const Eigen::Ref<const Eigen::VectorXd> &g)
{
  const Eigen::Index n = f.size();
  if (g.size() != n || n == 0)
    throw ValidationError("per_slot_optimum: f and g must be nonempty and of equal length");

  bool found = false;
  double best = 0;
  Eigen::Index best_a = -1;
  Eigen::Index best_b = -1;
  double best_p = 1; // weight on best_a

  auto offer = [&](double value, Eigen::Index a, Eigen::Index b, double p) {
    if (!found || value < best - tie_tolerance) {
      found = true;
      best = value;
      best_a = a;
      best_b = b;
      best_p = p;
    }
  };

  // Candidates visited in key order (a, pure), (a, a+1), (a, a+2), ...
  for (Eigen::Index a = 0; a < n; ++a) {
    if (g(a) <= 0)
      offer(f(a), a, -1, 1.0);
    for (Eigen::Index b = a + 1; b < n; ++b) {
      Eigen::Index pos = -1, neg = -1;
      if (g(a) > 0 && g(b) < 0) {
        pos = a;
        neg = b;
      } else if (g(b) > 0 && g(a) < 0) {
        pos = b;
        neg = a;
      } else {
        continue;
      }
      const double p = -g(neg) / (g(pos) - g(neg)); // weight on the positive arm
      const double value = p * f(pos) + (1 - p) * f(neg);
      offer(value, a, b, pos == a ? p : 1 - p);
    }
  }
  if (!found)
    throw InfeasibleError("slot is infeasible: every arm has a positive constraint value");

  SlotOptimum opt;
  opt.x = ActionDistribution::Zero(n);
  opt.x(best_a) = best_p;
  if (best_b >= 0)
    opt.x(best_b) = 1 - best_p;
  opt.value = best;
  return opt;
}

ComparatorSequence comparator_sequence(const Trace &trace)
{
  ComparatorSequence seq;
  seq.points.resize(trace.horizon, trace.n);
  seq.values.resize(trace.horizon);
  for (std::int64_t t = 0; t < trace.horizon; ++t) {
    try {
      const SlotOptimum opt = per_slot_optimum(trace.losses.row(t).transpose(), trace.constraints.row(t).transpose());
      seq.points.row(t) = opt.x.transpose();
      seq.values(t) = opt.value;
    } catch (const InfeasibleError &) {
      throw InfeasibleError(fmt::format("slot t={} is infeasible: every arm has g > 0", t));
    }
  }
  return seq;
}

RegularityMeasures measure(const Trace &trace, const ComparatorSequence &comparator)
{
  RegularityMeasures m;
  for (std::int64_t t = 0; t + 1 < trace.horizon; ++t) {
    m.path_length += (comparator.points.row(t) - comparator.points.row(t + 1)).lpNorm<1>();
    m.temporal_variation += (trace.losses.row(t) - trace.losses.row(t + 1)).lpNorm<Eigen::Infinity>();
  }
  return m;
}

RegularityResult regularity_measures(const Trace &trace)
{
  RegularityResult r;
  r.comparator = comparator_sequence(trace);
  r.measures = measure(trace, r.comparator);
  return r;
}

std::vector<RunRecord> evaluate_run(const Trace &trace, const ComparatorSequence &comparator,
                                    std::span<const PlayedRound> rounds)
{
  if (static_cast<std::int64_t>(rounds.size()) > trace.horizon)
    throw ValidationError(
        fmt::format("run has {} rounds but the trace only {}", rounds.size(), trace.horizon));
  if (comparator.values.size() != trace.horizon)
    throw ValidationError("comparator length does not match the trace");

  std::vector<RunRecord> out;
  out.reserve(rounds.size());
  double cum_loss = 0, cum_violation = 0, cum_comparator = 0;
  for (std::size_t i = 0; i < rounds.size(); ++i) {
    const PlayedRound &r = rounds[i];
    const auto t = static_cast<std::int64_t>(i);
    if (r.action < 0 || r.action >= trace.n)
      throw ValidationError(fmt::format("round {}: action {} out of range", t, r.action));
    if (r.loss != trace.losses(t, r.action) || r.constraint != trace.constraints(t, r.action))
      throw ValidationError(fmt::format("round {}: observed feedback does not match the trace", t));
    cum_loss += r.loss;
    cum_violation += r.constraint;
    cum_comparator += comparator.values(t);
    out.push_back(RunRecord{t + 1, r.action, r.loss, r.constraint, r.lambda, cum_loss, cum_violation,
                            comparator.values(t), cum_loss - cum_comparator});
  }
  return out;
}

std::vector<RunRecord> evaluate_run(const Trace &trace, std::span<const PlayedRound> rounds)
{
  return evaluate_run(trace, comparator_sequence(trace), rounds);
}

} // namespace bcomd
