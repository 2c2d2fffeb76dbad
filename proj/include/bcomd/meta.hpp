#pragma once

// Parameter-free meta-learner (MBCOMD): doubling phases, a geometric grid of
// BCOMD experts per phase, and an entropic mixer over the experts.

#include "bcomd/policy.hpp"

#include <cstdint>
#include <variant>
#include <vector>

namespace bcomd {

/// Multipliers on the order-only per-phase parameters, plus the optional cap
/// of the expert grid at sqrt(L).
struct MetaConstants
{
  double eta_meta = 1;   // eta_meta = eta_meta * L^(-1/2)
  double gamma_meta = 1; // gamma_meta = min{1/K, gamma_meta * L^(-1/3)}
  double gamma = 1;      // gamma = min{1/n, gamma * L^(-1)}
  bool cap_grid_at_sqrt_length = false;
  bool expert_stabilizer = true; // experts use their computed Omega
};

struct PhaseSpec
{
  std::int64_t start = 0;  // zero-based first round
  std::int64_t length = 0; // L_m
  int experts = 1;         // K_m
  double eta_meta = 0;
  double gamma_meta = 0;
  double gamma = 0;        // expert probability floor
};

struct PhasePlan
{
  std::vector<PhaseSpec> phases;
};

/// ceil(log2 L), floored at 1.
int expert_count(std::int64_t length);

/// Phases of length 1, 2, 4, ... with the last one truncated so the lengths
/// sum to T.
PhasePlan phase_schedule(std::int64_t horizon, int n, const MetaConstants &constants = {});

/// Expert k = 1..K: c_k = 2^k (c = 1 when K = 1), eta_k = c_k/(M sqrt(L)),
/// mu = 1/(M sqrt(L)), Omega_k from dual_bound (or 0 without stabilizer).
std::vector<BcomdParams> expert_grid(std::int64_t length, int n, double rho, double gamma,
                                     const MetaConstants &constants = {});

/// (x_expert[a] / x_meta[a]) * loss.
double expert_loss_estimate(double expert_prob, double mixture_prob, double loss);

/// Entropic weights over K experts, kept in the gamma_meta-truncated simplex.
class MetaMixer
{
public:
  MetaMixer(int experts, double eta_meta, double gamma_meta);

  const Eigen::VectorXd &weights() const { return weights_; }
  double eta() const { return eta_; }
  double gamma() const { return gamma_; }

  /// sum_k w_k x^(k), accumulated in expert order.
  ActionDistribution mixture(const std::vector<const ActionDistribution *> &experts) const;

  /// Multiplicative update with per-expert loss estimates, then projection.
  void update(const Eigen::Ref<const Eigen::VectorXd> &expert_losses);

private:
  Eigen::VectorXd weights_;
  double eta_;
  double gamma_;
};

/// An expert that never learns; its advice is a fixed distribution.
struct FixedExpert
{
  ActionDistribution x;
};

using Expert = std::variant<BcomdPolicy, FixedExpert>;

const ActionDistribution &expert_distribution(const Expert &expert);

struct MetaRoundRecord
{
  int action = 0;
  double loss = 0;
  double constraint = 0;
  double mixture_prob = 0;    // x_meta[a_t]
  double lambda_max = 0;      // largest expert dual after the update
  Eigen::VectorXd expert_losses; // m~^(k)
  Eigen::VectorXd weights;       // meta weights after the update
};

/// One phase of the meta-learner: experts, mixer, and the sampling stream.
class MetaPhase
{
public:
  MetaPhase(std::vector<Expert> experts, MetaMixer mixer, std::uint64_t seed);
  MetaPhase(std::vector<Expert> experts, MetaMixer mixer, CounterRng rng);

  ActionDistribution mixture() const;
  const std::vector<Expert> &experts() const { return experts_; }
  const MetaMixer &mixer() const { return mixer_; }
  const CounterRng &rng() const { return rng_; }
  int exponent_clamps() const;

  MetaRoundRecord step(const FeedbackOracle &oracle);

private:
  std::vector<Expert> experts_;
  MetaMixer mixer_;
  CounterRng rng_;
};

/// The full doubling meta-learner over a known horizon T.
class MbcomdPolicy
{
public:
  MbcomdPolicy(int n, std::int64_t horizon, double rho, std::uint64_t seed, const MetaConstants &constants = {});

  const PhasePlan &plan() const { return plan_; }
  std::size_t phase_index() const { return phase_; }
  std::int64_t round() const { return round_; }
  const MetaPhase &current() const { return current_; }
  ActionDistribution distribution() const { return current_.mixture(); }
  int exponent_clamps() const { return clamps_ + current_.exponent_clamps(); }

  MetaRoundRecord step(const FeedbackOracle &oracle);

private:
  MetaPhase make_phase(std::size_t index, CounterRng rng) const;

  int n_;
  double rho_;
  MetaConstants constants_;
  PhasePlan plan_;
  std::size_t phase_ = 0;
  std::int64_t in_phase_ = 0;
  std::int64_t round_ = 0;
  int clamps_ = 0;
  MetaPhase current_;
};

} // namespace bcomd
