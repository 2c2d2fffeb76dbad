#include "bcomd/meta.hpp"

#include <fmt/format.h>

#include <bit>
#include <cmath>

namespace bcomd {

int expert_count(std::int64_t length)
{
  if (length < 1)
    throw ValidationError("phase length must be positive");
  const auto l = static_cast<std::uint64_t>(length);
  return std::max(1, static_cast<int>(std::bit_width(l - 1)));
}

PhasePlan phase_schedule(std::int64_t horizon, int n, const MetaConstants &constants)
{
  if (horizon < 1)
    throw ValidationError("phase_schedule: horizon must be at least 1");
  if (n < 2)
    throw ValidationError("phase_schedule: need at least 2 arms");
  PhasePlan plan;
  std::int64_t start = 0;
  std::int64_t nominal = 1;
  while (start < horizon) {
    PhaseSpec phase;
    phase.start = start;
    phase.length = std::min(nominal, horizon - start);
    phase.experts = expert_count(phase.length);
    const double l = static_cast<double>(phase.length);
    phase.eta_meta = constants.eta_meta / std::sqrt(l);
    phase.gamma_meta = std::min(1.0 / phase.experts, constants.gamma_meta * std::pow(l, -1.0 / 3.0));
    phase.gamma = std::min(1.0 / n, constants.gamma / l);
    plan.phases.push_back(phase);
    start += phase.length;
    nominal *= 2;
  }
  return plan;
}

std::vector<BcomdParams> expert_grid(std::int64_t length, int n, double rho, double gamma,
                                     const MetaConstants &constants)
{
  const int k_count = expert_count(length);
  const double m = theorem1_scale(n, rho);
  const double root_l = std::sqrt(static_cast<double>(length));
  std::vector<BcomdParams> grid;
  for (int k = 1; k <= k_count; ++k) {
    double c = k_count == 1 ? 1.0 : std::ldexp(1.0, k);
    if (constants.cap_grid_at_sqrt_length)
      c = std::min(c, std::max(1.0, root_l));
    BcomdParams p;
    p.n = n;
    p.horizon = length;
    p.rho = rho;
    p.scale_m = m;
    p.c_t = c;
    p.eta = c / (m * root_l);
    p.mu = 1.0 / (m * root_l);
    p.gamma = gamma;
    p.omega = constants.expert_stabilizer ? dual_bound(n, rho, p.eta, p.mu, gamma) : 0.0;
    p.mode = ScheduleMode::manual;
    validate(p);
    grid.push_back(p);
  }
  return grid;
}

double expert_loss_estimate(double expert_prob, double mixture_prob, double loss)
{
  if (!(mixture_prob > 0))
    throw ValidationError(fmt::format("mixture probability {} must be positive", mixture_prob));
  return expert_prob / mixture_prob * loss;
}

MetaMixer::MetaMixer(int experts, double eta_meta, double gamma_meta)
    : weights_(Eigen::VectorXd::Constant(experts, 1.0 / experts)), eta_(eta_meta), gamma_(gamma_meta)
{
  if (experts < 1)
    throw ValidationError("meta-learner needs at least one expert");
  if (!(eta_meta > 0))
    throw ValidationError("eta_meta must be positive");
  if (!(gamma_meta >= 0) || gamma_meta * experts > 1.0 + Tolerances::normalization)
    throw ValidationError(fmt::format("gamma_meta = {} violates gamma_meta * K <= 1", gamma_meta));
}

ActionDistribution MetaMixer::mixture(const std::vector<const ActionDistribution *> &experts) const
{
  if (static_cast<Eigen::Index>(experts.size()) != weights_.size())
    throw ValidationError("mixture: expert count does not match the meta weights");
  const Eigen::Index n = experts.front()->size();
  ActionDistribution mix = ActionDistribution::Zero(n);
  for (std::size_t k = 0; k < experts.size(); ++k) {
    if (experts[k]->size() != n)
      throw ValidationError("mixture: experts disagree on the arm count");
    for (Eigen::Index a = 0; a < n; ++a)
      mix(a) += weights_(static_cast<Eigen::Index>(k)) * (*experts[k])(a);
  }
  return mix;
}

void MetaMixer::update(const Eigen::Ref<const Eigen::VectorXd> &expert_losses)
{
  if (expert_losses.size() != weights_.size())
    throw ValidationError("meta update: loss vector has the wrong length");
  weights_ = project_kl(multiplicative_step(weights_, expert_losses, eta_), gamma_);
}

const ActionDistribution &expert_distribution(const Expert &expert)
{
  return std::visit(
      [](const auto &e) -> const ActionDistribution & {
        if constexpr (std::is_same_v<std::decay_t<decltype(e)>, FixedExpert>)
          return e.x;
        else
          return e.distribution();
      },
      expert);
}

MetaPhase::MetaPhase(std::vector<Expert> experts, MetaMixer mixer, std::uint64_t seed)
    : MetaPhase(std::move(experts), std::move(mixer), CounterRng(seed))
{
}

MetaPhase::MetaPhase(std::vector<Expert> experts, MetaMixer mixer, CounterRng rng)
    : experts_(std::move(experts)), mixer_(std::move(mixer)), rng_(rng)
{
  if (experts_.empty() || static_cast<Eigen::Index>(experts_.size()) != mixer_.weights().size())
    throw ValidationError("meta phase: expert count does not match the mixer");
}

ActionDistribution MetaPhase::mixture() const
{
  std::vector<const ActionDistribution *> xs;
  xs.reserve(experts_.size());
  for (const auto &e : experts_)
    xs.push_back(&expert_distribution(e));
  return mixer_.mixture(xs);
}

int MetaPhase::exponent_clamps() const
{
  int total = 0;
  for (const auto &e : experts_)
    if (const auto *p = std::get_if<BcomdPolicy>(&e))
      total += p->exponent_clamps();
  return total;
}

MetaRoundRecord MetaPhase::step(const FeedbackOracle &oracle)
{
  const ActionDistribution mix = mixture();
  const CounterRng saved = rng_;
  const int arm = sample_arm(mix, rng_.uniform());
  Feedback fb;
  try {
    fb = oracle(arm);
    validate_feedback(fb);
  } catch (...) {
    rng_ = saved;
    throw;
  }

  MetaRoundRecord rec;
  rec.action = arm;
  rec.loss = fb.loss;
  rec.constraint = fb.constraint;
  rec.mixture_prob = mix(arm);
  rec.expert_losses.resize(static_cast<Eigen::Index>(experts_.size()));
  for (std::size_t k = 0; k < experts_.size(); ++k)
    rec.expert_losses(static_cast<Eigen::Index>(k)) =
        expert_loss_estimate(expert_distribution(experts_[k])(arm), mix(arm), fb.loss);

  // Experts see the shared estimates built with the mixture probability.
  for (auto &e : experts_)
    if (auto *p = std::get_if<BcomdPolicy>(&e)) {
      p->update(arm, fb, mix(arm));
      rec.lambda_max = std::max(rec.lambda_max, p->lambda());
    }
  mixer_.update(rec.expert_losses);
  rec.weights = mixer_.weights();
  return rec;
}

MbcomdPolicy::MbcomdPolicy(int n, std::int64_t horizon, double rho, std::uint64_t seed,
                           const MetaConstants &constants)
    : n_(n), rho_(rho), constants_(constants), plan_(phase_schedule(horizon, n, constants)),
      current_(make_phase(0, CounterRng(seed)))
{
}

MetaPhase MbcomdPolicy::make_phase(std::size_t index, CounterRng rng) const
{
  const PhaseSpec &spec = plan_.phases.at(index);
  std::vector<Expert> experts;
  for (const BcomdParams &p : expert_grid(spec.length, n_, rho_, spec.gamma, constants_))
    experts.emplace_back(BcomdPolicy(p, 0));
  return MetaPhase(std::move(experts), MetaMixer(spec.experts, spec.eta_meta, spec.gamma_meta), rng);
}

MetaRoundRecord MbcomdPolicy::step(const FeedbackOracle &oracle)
{
  if (phase_ >= plan_.phases.size())
    throw ValidationError("meta-learner stepped past its horizon");
  if (in_phase_ >= plan_.phases[phase_].length)
    throw std::logic_error("phase bookkeeping mismatch");
  MetaRoundRecord rec = current_.step(oracle);
  ++round_;
  ++in_phase_;
  const PhaseSpec &spec = plan_.phases[phase_];
  if (in_phase_ == spec.length && phase_ + 1 < plan_.phases.size()) {
    clamps_ += current_.exponent_clamps();
    ++phase_;
    in_phase_ = 0;
    current_ = make_phase(phase_, current_.rng());
  } else if (in_phase_ == spec.length) {
    ++phase_; // horizon exhausted
  }
  return rec;
}

} // namespace bcomd
