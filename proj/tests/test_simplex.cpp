#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "bcomd/check/reference.hpp"
#include "bcomd/errors.hpp"
#include "bcomd/random.hpp"
#include "bcomd/simplex.hpp"

#include <cmath>

using namespace bcomd;
using Eigen::VectorXd;

namespace {

VectorXd vec(std::initializer_list<double> v)
{
  VectorXd out(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double x : v)
    out(i++) = x;
  return out;
}

VectorXd random_positive(CounterRng &rng, int n)
{
  VectorXd y(n);
  for (int i = 0; i < n; ++i)
    y(i) = std::exp(-4.0 + 8.0 * rng.uniform());
  return y;
}

VectorXd random_truncated(CounterRng &rng, int n, double gamma)
{
  VectorXd z(n);
  for (int i = 0; i < n; ++i)
    z(i) = -std::log(1.0 - rng.uniform());
  return (gamma + (1.0 - n * gamma) * (z / z.sum()).array()).matrix();
}

} // namespace

TEST_CASE("kl divergence examples")
{
  CHECK(kl_divergence(vec({0.5, 0.5}), vec({0.5, 0.5})) == doctest::Approx(0.0));
  CHECK(kl_divergence(vec({1.0, 0.0}), vec({0.5, 0.5})) == doctest::Approx(std::log(2.0)).epsilon(1e-12));
}

TEST_CASE("kl divergence over the truncated simplex is at most log(1/gamma)")
{
  const double gamma = 0.1;
  const double cap = std::log(1.0 / gamma);
  double worst = 0;
  for (int i = 0; i <= 400; ++i)
    for (int j = 0; j <= 400; ++j) {
      const double p = gamma + (1 - 2 * gamma) * i / 400.0;
      const double q = gamma + (1 - 2 * gamma) * j / 400.0;
      worst = std::max(worst, kl_divergence(vec({p, 1 - p}), vec({q, 1 - q})));
    }
  CHECK(worst <= cap);
}

TEST_CASE("kl divergence rejects bad input")
{
  CHECK_THROWS_AS(kl_divergence(vec({0.5, 0.5}), vec({1.0, 0.0})), ValidationError);
  CHECK_THROWS_AS(kl_divergence(vec({0.5, 0.5}), vec({0.2, 0.3, 0.5})), ValidationError);
  CHECK_THROWS_AS(kl_divergence(vec({-0.1, 1.1}), vec({0.5, 0.5})), ValidationError);
  CHECK_THROWS_AS(kl_divergence(vec({NAN, 0.5}), vec({0.5, 0.5})), ValidationError);
}

TEST_CASE("multiplicative step examples")
{
  CHECK(multiplicative_step(vec({0.5, 0.5}), vec({0, 0}), 0.7).isApprox(vec({0.5, 0.5})));
  const VectorXd y = multiplicative_step(vec({0.5, 0.5}), vec({std::log(2.0), 0}), 1.0);
  CHECK(y(0) == doctest::Approx(0.25).epsilon(1e-14));
  CHECK(y(1) == doctest::Approx(0.5).epsilon(1e-14));
  CHECK(multiplicative_step(vec({0.2, 0.3, 0.5}), vec({0, 0, 0}), 123.0).isApprox(vec({0.2, 0.3, 0.5})));
}

TEST_CASE("multiplicative step clamps extreme exponents and counts them")
{
  StepReport report;
  const VectorXd y = multiplicative_step(vec({0.5, 0.5}), vec({1e6, -1e6}), 1.0, &report);
  CHECK(report.clamped == 2);
  CHECK(std::isfinite(y(0)));
  CHECK(std::isfinite(y(1)));
  CHECK(y(0) > 0);
}

TEST_CASE("projection examples")
{
  CHECK(project_kl(vec({0.3, 0.3}), 0.1).isApprox(vec({0.5, 0.5}), 1e-14));
  const VectorXd a = project_kl(vec({0.05, 0.95}), 0.1);
  CHECK(a(0) == doctest::Approx(0.1).epsilon(1e-12));
  CHECK(a(1) == doctest::Approx(0.9).epsilon(1e-12));
  const VectorXd b = project_kl(vec({0.01, 0.04, 0.95}), 0.1);
  CHECK(b(0) == doctest::Approx(0.1).epsilon(1e-12));
  CHECK(b(1) == doctest::Approx(0.1).epsilon(1e-12));
  CHECK(b(2) == doctest::Approx(0.8).epsilon(1e-12));
}

TEST_CASE("projection examples agree with the grid oracle")
{
  const auto ref = check::grid_kl_minimum(vec({0.05, 0.95}), 0.1, 1e-4);
  CHECK(ref.x(0) == doctest::Approx(0.1).epsilon(1e-3));
  const auto ref3 = check::grid_kl_minimum(vec({0.01, 0.04, 0.95}), 0.1, 1e-3);
  CHECK(ref3.x(2) == doctest::Approx(0.8).epsilon(1e-3));
}

TEST_CASE("projection rejects gamma above 1/n and nonpositive input")
{
  CHECK_THROWS_AS(project_kl(vec({0.5, 0.5}), 0.6), ValidationError);
  CHECK_THROWS_AS(project_kl(vec({0.5, 0.5}), -0.1), ValidationError);
  CHECK_THROWS_AS(project_kl(vec({0.5, 0.0}), 0.1), ValidationError);
}

TEST_CASE("projection at gamma = 1/n is uniform")
{
  const VectorXd x = project_kl(vec({1e-3, 0.5, 7.0, 2.0}), 0.25);
  CHECK(x.isApprox(VectorXd::Constant(4, 0.25), 1e-14));
}

TEST_CASE("projection properties on random inputs")
{
  CounterRng rng(17);
  for (int trial = 0; trial < 500; ++trial) {
    CAPTURE(trial);
    const int n = 2 + trial % 9;
    const VectorXd y = random_positive(rng, n);
    const double gamma = rng.uniform() / n;
    const VectorXd x = project_kl(y, gamma);

    REQUIRE(is_distribution(x, gamma));
    CHECK(check::kkt_residual(x, y, gamma) <= 1e-10);

    // Idempotence.
    CHECK((project_kl(x, gamma) - x).lpNorm<Eigen::Infinity>() <= 1e-12);

    // Sort-and-scan and bisection agree.
    CHECK((project_kl_bisection(y, gamma) - x).lpNorm<Eigen::Infinity>() <= 1e-9);

    // Generalized Pythagorean inequality for any u in the truncated simplex,
    // and the three-point identity behind it.
    const VectorXd u = random_truncated(rng, n, gamma);
    const double duy = kl_divergence(u, y), dux = kl_divergence(u, x), dxy = kl_divergence(x, y);
    CHECK(duy >= dux + dxy - 1e-10);
    const double inner = ((y.array().log() - x.array().log()) * (u - x).array()).sum();
    CHECK(dux + dxy - duy == doctest::Approx(inner).epsilon(1e-9).scale(1.0));
  }
}

TEST_CASE("kl between distributions dominates half the squared l1 distance")
{
  CounterRng rng(5);
  for (int trial = 0; trial < 200; ++trial) {
    const int n = 2 + trial % 6;
    const VectorXd p = random_truncated(rng, n, 0.0);
    const VectorXd q = random_truncated(rng, n, 0.0);
    CHECK(kl_divergence(p, q) >= 0.5 * std::pow((p - q).lpNorm<1>(), 2) - 1e-12);
  }
}

TEST_CASE("distribution predicate")
{
  CHECK(is_distribution(vec({0.2, 0.8})));
  CHECK_FALSE(is_distribution(vec({0.2, 0.7})));
  CHECK_FALSE(is_distribution(vec({0.05, 0.95}), 0.1));
  CHECK_FALSE(is_distribution(vec({-0.1, 1.1})));
}

TEST_CASE("generic scalar type")
{
  Eigen::VectorXf y(3);
  y << 0.2f, 0.3f, 0.5f;
  const Eigen::VectorXf x = project_kl(y, 0.0);
  CHECK(x.sum() == doctest::Approx(1.0f));
}
