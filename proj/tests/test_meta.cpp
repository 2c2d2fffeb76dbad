#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "bcomd/errors.hpp"
#include "bcomd/meta.hpp"

#include <cmath>

using namespace bcomd;
using Eigen::VectorXd;

namespace {

std::vector<std::int64_t> lengths(const PhasePlan &plan)
{
  std::vector<std::int64_t> out;
  for (const PhaseSpec &p : plan.phases)
    out.push_back(p.length);
  return out;
}

std::vector<int> counts(const PhasePlan &plan)
{
  std::vector<int> out;
  for (const PhaseSpec &p : plan.phases)
    out.push_back(p.experts);
  return out;
}

Feedback wavy(std::int64_t t, int arm)
{
  const double loss = 0.5 + 0.4 * std::sin(0.01 * static_cast<double>(t) + arm);
  return Feedback{loss, arm % 3 == 0 ? 0.4 : -0.3};
}

} // namespace

TEST_CASE("phase schedule examples")
{
  CHECK(lengths(phase_schedule(10, 2)) == std::vector<std::int64_t>{1, 2, 4, 3});
  const PhasePlan one = phase_schedule(1, 2);
  CHECK(lengths(one) == std::vector<std::int64_t>{1});
  CHECK(counts(one) == std::vector<int>{1});
  const PhasePlan fifteen = phase_schedule(15, 2);
  CHECK(lengths(fifteen) == std::vector<std::int64_t>{1, 2, 4, 8});
  CHECK(counts(fifteen) == std::vector<int>{1, 1, 2, 3});
}

TEST_CASE("phase lengths tile the horizon")
{
  for (std::int64_t horizon : {1, 2, 3, 7, 8, 9, 100, 1000, 16384}) {
    const PhasePlan plan = phase_schedule(horizon, 5);
    std::int64_t total = 0;
    for (const PhaseSpec &p : plan.phases) {
      CHECK(p.start == total);
      CHECK(p.experts == std::max(1, static_cast<int>(std::ceil(std::log2(static_cast<double>(p.length))))));
      CHECK(p.gamma <= 1.0 / 5);
      CHECK(p.gamma_meta * p.experts <= 1.0 + 1e-12);
      total += p.length;
    }
    CHECK(total == horizon);
  }
}

TEST_CASE("expert grid examples")
{
  const auto grid = expert_grid(8, 2, 1.0, 0.125);
  REQUIRE(grid.size() == 3);
  CHECK(grid[0].c_t == 2.0);
  CHECK(grid[1].c_t == 4.0);
  CHECK(grid[2].c_t == 8.0);
  for (const BcomdParams &p : grid) {
    CHECK(p.mu == doctest::Approx(1.0 / (324.0 * std::sqrt(8.0))));
    CHECK(p.eta == doctest::Approx(p.c_t / (324.0 * std::sqrt(8.0))));
  }
  const auto single = expert_grid(1, 2, 1.0, 0.5);
  REQUIRE(single.size() == 1);
  CHECK(single[0].c_t == 1.0);

  MetaConstants capped;
  capped.cap_grid_at_sqrt_length = true;
  CHECK(expert_grid(8, 2, 1.0, 0.125, capped)[2].c_t == doctest::Approx(std::sqrt(8.0)));
}

TEST_CASE("expert loss estimate examples")
{
  CHECK(expert_loss_estimate(0.5, 0.25, 0.8) == doctest::Approx(1.6));
  CHECK(expert_loss_estimate(0.3, 0.3, 0.7) == doctest::Approx(0.7));
  CHECK(expert_loss_estimate(0.3, 0.1, 0.0) == 0.0);
  CHECK_THROWS_AS(expert_loss_estimate(0.3, 0.0, 0.5), ValidationError);
}

TEST_CASE("a single expert collapses to the plain policy")
{
  const BcomdParams p = compute_parameters(4, 300, 1.0, std::nullopt, ManualParams{0.05, 0.02, 0.01, 0.5});
  std::vector<Expert> experts;
  experts.emplace_back(BcomdPolicy(p, 0));
  MetaPhase phase(std::move(experts), MetaMixer(1, 0.1, 1.0), 77);
  BcomdPolicy plain(p, 77);
  for (std::int64_t t = 0; t < 300; ++t) {
    auto oracle = [t](int arm) { return wavy(t, arm); };
    const MetaRoundRecord m = phase.step(oracle);
    const RoundRecord r = plain.step(oracle);
    REQUIRE(m.action == r.action);
    REQUIRE(m.lambda_max == r.lambda);
    REQUIRE(phase.mixture() == plain.distribution());
  }
}

TEST_CASE("identical experts keep uniform meta weights")
{
  VectorXd x(3);
  x << 0.1, 0.6, 0.3;
  std::vector<Expert> experts{FixedExpert{x}, FixedExpert{x}};
  MetaPhase phase(std::move(experts), MetaMixer(2, 0.2, 0.01), 5);
  for (std::int64_t t = 0; t < 500; ++t) {
    phase.step([t](int arm) { return wavy(t, arm); });
    REQUIRE(std::abs(phase.mixer().weights()(0) - 0.5) <= 1e-9);
  }
}

TEST_CASE("the better expert gains weight until the floor binds")
{
  MetaMixer mixer(2, 0.1, 0.05);
  VectorXd losses(2);
  losses << 0.0, 0.5;
  double previous = mixer.weights()(0);
  for (int t = 0; t < 50; ++t) {
    mixer.update(losses);
    const double w = mixer.weights()(0);
    if (mixer.weights()(1) <= 0.05 + 1e-12) {
      CHECK(w == doctest::Approx(0.95));
    } else {
      CHECK(w > previous);
    }
    previous = w;
  }
  CHECK(mixer.weights()(0) > 0.5);
}

TEST_CASE("meta learner resets experts at phase boundaries")
{
  MbcomdPolicy policy(3, 40, 0.5, 9);
  std::size_t phase = policy.phase_index();
  for (std::int64_t t = 0; t < 40; ++t) {
    policy.step([t](int arm) { return Feedback{0.2 + 0.2 * arm, arm == 0 ? 0.5 : -0.5}; });
    if (t + 1 < 40 && policy.phase_index() != phase) {
      phase = policy.phase_index();
      const PhaseSpec &spec = policy.plan().phases[phase];
      CHECK(spec.start == t + 1);
      CHECK(policy.current().experts().size() == static_cast<std::size_t>(spec.experts));
      for (const Expert &e : policy.current().experts()) {
        const auto &expert = std::get<BcomdPolicy>(e);
        CHECK(expert.lambda() == 0.0);
        CHECK(expert.round() == 0);
        CHECK(expert.distribution().isApprox(VectorXd::Constant(3, 1.0 / 3)));
      }
      CHECK(policy.current().mixer().weights().isApprox(
          VectorXd::Constant(spec.experts, 1.0 / spec.experts)));
    }
  }
  CHECK(policy.round() == 40);
  CHECK_THROWS_AS(policy.step([](int) { return Feedback{0.0, 0.0}; }), ValidationError);
}

TEST_CASE("meta learner is deterministic per seed")
{
  MbcomdPolicy a(4, 200, 0.5, 3), b(4, 200, 0.5, 3);
  for (std::int64_t t = 0; t < 200; ++t) {
    auto oracle = [t](int arm) { return wavy(t, arm); };
    const MetaRoundRecord ra = a.step(oracle), rb = b.step(oracle);
    REQUIRE(ra.action == rb.action);
    REQUIRE(ra.weights == rb.weights);
  }
}

TEST_CASE("mixture stays in the simplex")
{
  MbcomdPolicy policy(5, 300, 0.4, 12);
  for (std::int64_t t = 0; t < 300; ++t) {
    REQUIRE(is_distribution(policy.distribution()));
    policy.step([t](int arm) { return wavy(t, arm); });
  }
}

TEST_CASE("mixer validates its inputs")
{
  CHECK_THROWS_AS(MetaMixer(0, 0.1, 0.0), ValidationError);
  CHECK_THROWS_AS(MetaMixer(2, 0.0, 0.1), ValidationError);
  CHECK_THROWS_AS(MetaMixer(2, 0.1, 0.6), ValidationError);
}
