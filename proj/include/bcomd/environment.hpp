#pragma once

// Oblivious-adversary traces: full loss and constraint matrices fixed before
// any policy runs, their generators, and the text interchange format.

#include <Eigen/Dense>

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>

namespace bcomd {

using TraceMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct Trace
{
  int n = 0;
  std::int64_t horizon = 0;
  TraceMatrix losses;      // horizon x n, entries in [0, 1]
  TraceMatrix constraints; // horizon x n, entries in [-1, 1]
  std::string generator = "custom";
  std::uint64_t seed = 0;
  std::map<std::string, std::string> metadata; // not serialized

  bool operator==(const Trace &other) const;
};

/// Bounds and shape check over every entry; throws ValidationError naming
/// the first offending (t, a), both zero-based.
void validate(const Trace &trace);

/// min_t max_a (-g_{t,a}): the largest uniform slack any fixed point can have
/// is bounded by this, and a pure arm attains it per slot.
double slater_margin(const Trace &trace);

enum class ClipMode
{
  clip,   // clip noisy values into range
  reject, // throw if noise pushes a value out of range
};

struct TraceGenConfig
{
  int n = 25;
  std::int64_t horizon = 14000;
  std::int64_t window = 2000;  // rounds between shifts
  int shift = 5;               // arms per shift
  int repetitions = 6;         // number of shifts applied
  double noise_std = 0.1;
  double rho_target = 0;       // reject traces whose margin is not above this
  ClipMode clip = ClipMode::clip;
  bool zero_based_indicator = false; // arm index convention in the g threshold
  bool allow_infeasible = false;
};

void validate(const TraceGenConfig &cfg);

/// Cyclically shifting sine/step profile with i.i.d. Gaussian noise.
/// Loss profile 1 + sin(pi a/(n-1)) is mapped affinely from [1, 2] onto
/// [0, 1]; the constraint profile is 0.5 * 1(a <= floor(n/1.5)) - 1/4.
/// Noise is added after the profile, then values are clipped into range.
/// Throws InfeasibleError when the achieved Slater margin is not positive
/// (unless allow_infeasible).
Trace generate_shifting_trace(const TraceGenConfig &cfg, std::uint64_t seed);

/// Same loss and constraint vectors in every round.
Trace generate_stationary_trace(const Eigen::Ref<const Eigen::VectorXd> &losses,
                                const Eigen::Ref<const Eigen::VectorXd> &constraints, std::int64_t horizon);

enum class FixtureKind
{
  vt_small_pt_large, // (0, 1/T, 1, ..., 1) / (1/T, 0, 1, ..., 1)
  vt_large_pt_small, // (0, 1) / (0, 1/2)
};

FixtureKind parse_fixture_kind(const std::string &name);
std::string to_string(FixtureKind kind);

/// Alternating sequences separating P_T from V_T; every arm has g = -rho.
/// Metadata holds the analytic measures under "analytic_P_T" / "analytic_V_T".
Trace generate_incomparability_fixture(FixtureKind kind, std::int64_t horizon, int n = 0, double rho = 0.5);

/// Header `n T generator seed`, then one line per round with the n losses
/// followed by the n constraints, 17 significant digits.
void write_trace(std::ostream &out, const Trace &trace);
void write_trace(const std::filesystem::path &path, const Trace &trace);
Trace read_trace(std::istream &in);
Trace read_trace(const std::filesystem::path &path);

/// Write then read back.
Trace trace_roundtrip(const Trace &trace, const std::filesystem::path &path);

} // namespace bcomd
