#include "bcomd/policy.hpp"

#include <fmt/format.h>

#include <cmath>

namespace bcomd {

double theorem1_scale(int n, double rho)
{
  const double k = (3.0 * n + 2.0) / rho + 1.0;
  return 4.0 * k * k;
}

double dual_bound(int n, double rho, double eta, double mu, double gamma)
{
  return std::log(1.0 / gamma) / rho * (mu / eta) + 3.0 * n / (2.0 * rho) * eta + mu / (2.0 * rho) +
         3.0 * n / rho + 2.0 / rho + 1.0;
}

void validate(const BcomdParams &p)
{
  if (p.n < 2)
    throw ValidationError(fmt::format("arm count n = {} must be at least 2", p.n));
  if (p.horizon < 1)
    throw ValidationError(fmt::format("horizon T = {} must be at least 1", p.horizon));
  if (!(p.rho > 0 && p.rho <= 1))
    throw ValidationError(fmt::format("Slater margin rho = {} must lie in (0, 1]", p.rho));
  if (!(p.eta > 0) || !std::isfinite(p.eta))
    throw ValidationError(fmt::format("eta = {} must be positive", p.eta));
  if (!(p.mu >= 0) || !std::isfinite(p.mu))
    throw ValidationError(fmt::format("mu = {} must be nonnegative", p.mu));
  if (p.mode == ScheduleMode::theorem1 && !(p.mu > 0))
    throw ValidationError("mu must be positive under the tuned schedule");
  if (!(p.gamma >= 0) || p.gamma * p.n > 1.0 + Tolerances::normalization)
    throw ValidationError(fmt::format("gamma = {} violates 0 <= gamma <= 1/n", p.gamma));
  if (!(p.omega >= 0) || !std::isfinite(p.omega))
    throw ValidationError(fmt::format("Omega = {} must be finite and nonnegative", p.omega));
}

BcomdParams compute_parameters(int n, std::int64_t horizon, double rho, std::optional<Regularity> regularity,
                               const Schedule &schedule)
{
  BcomdParams p;
  p.n = n;
  p.horizon = horizon;
  p.rho = rho;
  if (n < 2)
    throw ValidationError(fmt::format("arm count n = {} must be at least 2", n));
  if (horizon < 1)
    throw ValidationError(fmt::format("horizon T = {} must be at least 1", horizon));
  if (!(rho > 0 && rho <= 1))
    throw ValidationError(fmt::format("Slater margin rho = {} must lie in (0, 1]", rho));
  p.scale_m = theorem1_scale(n, rho);

  if (const auto *manual = std::get_if<ManualParams>(&schedule)) {
    p.mode = ScheduleMode::manual;
    p.eta = manual->eta;
    p.mu = manual->mu;
    p.gamma = manual->gamma;
    p.omega = manual->omega;
    validate(p);
    return p;
  }

  if (!regularity)
    throw ValidationError("tuned schedule needs the regularity measures P_T and V_T");
  if (!(regularity->path_length >= 0) || !(regularity->temporal_variation >= 0))
    throw ValidationError("regularity measures must be nonnegative");

  const double t = static_cast<double>(horizon);
  const double root_t = std::sqrt(t);
  p.mode = ScheduleMode::theorem1;
  p.c_t = std::min(std::sqrt(regularity->path_length),
                   std::cbrt(regularity->temporal_variation) * std::pow(t, 1.0 / 6.0));
  p.mu = 1.0 / (p.scale_m * root_t);
  p.eta = std::max(1.0, p.c_t) / (p.scale_m * root_t);
  p.gamma = std::min(1.0 / n, 1.0 / root_t);
  p.omega = dual_bound(n, rho, p.eta, p.mu, p.gamma);
  validate(p);
  if (p.eta > 1.0 / (p.omega * p.omega))
    throw ValidationError(fmt::format("schedule violated: eta = {} exceeds 1/Omega^2 = {}", p.eta,
                                      1.0 / (p.omega * p.omega)));
  return p;
}

ManualParams experiment_preset(double eta, double gamma) { return ManualParams{eta, eta / 2.0, gamma, 0.0}; }

std::vector<ManualParams> experiment_grid(int per_axis)
{
  if (per_axis < 1)
    throw ValidationError("experiment_grid needs at least one point per axis");
  auto axis = [per_axis](double lo, double hi) {
    std::vector<double> v;
    for (int i = 0; i < per_axis; ++i) {
      const double s = per_axis == 1 ? 1.0 : static_cast<double>(i) / (per_axis - 1);
      v.push_back(std::exp(std::log(lo) + s * (std::log(hi) - std::log(lo))));
    }
    return v;
  };
  std::vector<ManualParams> grid;
  for (double eta : axis(1e-3, 4e-2))
    for (double gamma : axis(1e-5, 1e-3))
      grid.push_back(experiment_preset(eta, gamma));
  return grid;
}

void validate_feedback(const Feedback &fb)
{
  if (!(fb.loss >= 0.0 && fb.loss <= 1.0))
    throw ValidationError(fmt::format("loss {} out of [0,1]", fb.loss));
  if (!(fb.constraint >= -1.0 && fb.constraint <= 1.0))
    throw ValidationError(fmt::format("constraint {} out of [-1,1]", fb.constraint));
}

Eigen::VectorXd importance_weighted_estimate(const Eigen::Ref<const Eigen::VectorXd> &x, int arm, double value)
{
  if (arm < 0 || arm >= x.size())
    throw ValidationError(fmt::format("arm {} out of range for {} arms", arm, x.size()));
  if (!(x(arm) > 0))
    throw ValidationError(fmt::format("importance weight undefined: x[{}] = {}", arm, x(arm)));
  Eigen::VectorXd v = Eigen::VectorXd::Zero(x.size());
  v(arm) = value / x(arm);
  return v;
}

int sample_arm(const Eigen::Ref<const Eigen::VectorXd> &x, double u)
{
  double cumulative = 0;
  int last_positive = -1;
  for (Eigen::Index a = 0; a < x.size(); ++a) {
    if (x(a) <= 0)
      continue;
    last_positive = static_cast<int>(a);
    cumulative += x(a);
    if (u < cumulative)
      return static_cast<int>(a);
  }
  if (last_positive < 0)
    throw ValidationError("cannot sample from a vector without positive mass");
  return last_positive; // rounding left u above the final partial sum
}

BcomdPolicy::BcomdPolicy(const BcomdParams &params, std::uint64_t seed)
    : params_(params), x_(ActionDistribution::Constant(params.n, 1.0 / params.n)), rng_(seed)
{
  validate(params_);
}

void BcomdPolicy::reset()
{
  x_ = ActionDistribution::Constant(params_.n, 1.0 / params_.n);
  lambda_ = 0;
}

void BcomdPolicy::set_state(const ActionDistribution &x, double lambda)
{
  if (x.size() != params_.n || !is_distribution(x, params_.gamma))
    throw ValidationError("set_state: x is not in the truncated simplex");
  if (!(lambda >= 0))
    throw ValidationError("set_state: lambda must be nonnegative");
  x_ = x;
  lambda_ = lambda;
}

RoundRecord BcomdPolicy::step(const FeedbackOracle &oracle)
{
  const CounterRng saved = rng_;
  try {
    const int arm = sample_arm(x_, rng_.uniform());
    return update(arm, oracle(arm), x_(arm));
  } catch (...) {
    rng_ = saved; // rejected round leaves the state untouched
    throw;
  }
}

RoundRecord BcomdPolicy::update(int action, const Feedback &fb, double denominator)
{
  validate_feedback(fb);
  if (action < 0 || action >= params_.n)
    throw ValidationError(fmt::format("action {} out of range for {} arms", action, params_.n));
  if (!(denominator > 0))
    throw ValidationError(fmt::format("sampling probability {} of arm {} must be positive", denominator, action));

  const double value = exp3_ ? fb.loss : params_.omega + fb.loss + lambda_ * fb.constraint;
  Eigen::VectorXd pseudo_cost = Eigen::VectorXd::Zero(params_.n);
  pseudo_cost(action) = value / denominator;

  StepReport report;
  const PositiveVector y = multiplicative_step(x_, pseudo_cost, params_.eta, &report);
  clamps_ += report.clamped; // callers log the count
  x_ = project_kl(y, params_.gamma);
  if (!exp3_)
    lambda_ = std::max(0.0, lambda_ + params_.mu * fb.constraint);
  ++round_;

  return RoundRecord{action, fb.loss, fb.constraint, lambda_, pseudo_cost(action), x_};
}

BcomdPolicy exp3_mode(BcomdPolicy state)
{
  state.exp3_ = true;
  state.lambda_ = 0;
  state.params_.omega = 0;
  return state;
}

} // namespace bcomd
