#include "bcomd/check/reference.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

namespace bcomd::check {

double reference_kl(const Eigen::VectorXd &x, const Eigen::VectorXd &y)
{
  double s = 0;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    if (x(i) > 0)
      s += x(i) * (std::log(x(i)) - std::log(y(i)));
    s += y(i) - x(i);
  }
  return s;
}

GridMinimum grid_kl_minimum(const Eigen::VectorXd &y, double gamma, double resolution)
{
  const auto n = static_cast<int>(y.size());
  if (n != 2 && n != 3)
    throw std::invalid_argument("grid_kl_minimum supports n = 2 or 3");
  const int steps = static_cast<int>(std::lround(1.0 / resolution));
  const double free_mass = 1.0 - n * gamma;

  // x log x and x for every lattice level; the objective is separable.
  std::vector<double> level(steps + 1), xlogx(steps + 1);
  for (int k = 0; k <= steps; ++k) {
    level[k] = gamma + free_mass * k / steps;
    xlogx[k] = level[k] > 0 ? level[k] * std::log(level[k]) : 0.0;
  }
  Eigen::VectorXd logy = y.array().log();
  auto term = [&](int i, int k) { return xlogx[k] - level[k] * logy(i); };

  GridMinimum best;
  best.value = std::numeric_limits<double>::infinity();
  std::vector<int> arg(n);
  if (n == 2) {
    for (int k = 0; k <= steps; ++k) {
      const double v = term(0, k) + term(1, steps - k);
      if (v < best.value) {
        best.value = v;
        arg = {k, steps - k};
      }
    }
  } else {
    for (int k0 = 0; k0 <= steps; ++k0) {
      const double v0 = term(0, k0);
      for (int k1 = 0; k0 + k1 <= steps; ++k1) {
        const double v = v0 + term(1, k1) + term(2, steps - k0 - k1);
        if (v < best.value) {
          best.value = v;
          arg = {k0, k1, steps - k0 - k1};
        }
      }
    }
  }
  best.x.resize(n);
  for (int i = 0; i < n; ++i)
    best.x(i) = level[arg[i]];
  best.value = reference_kl(best.x, y);
  return best;
}

GridMinimum sampled_kl_minimum(const Eigen::VectorXd &y, double gamma, int samples, CounterRng &rng)
{
  const Eigen::Index n = y.size();
  const double free_mass = 1.0 - static_cast<double>(n) * gamma;
  GridMinimum best;
  best.value = std::numeric_limits<double>::infinity();
  Eigen::VectorXd z(n);
  for (int s = 0; s < samples; ++s) {
    for (Eigen::Index i = 0; i < n; ++i)
      z(i) = -std::log(1.0 - rng.uniform());
    Eigen::VectorXd x = (gamma + free_mass * (z / z.sum()).array()).matrix();
    const double v = reference_kl(x, y);
    if (v < best.value) {
      best.value = v;
      best.x = x;
    }
  }
  return best;
}

double kkt_residual(const Eigen::VectorXd &x, const Eigen::VectorXd &y, double gamma)
{
  // Free coordinates are those strictly above the floor; fit c on them.
  double xs = 0, ys = 0;
  for (Eigen::Index i = 0; i < x.size(); ++i)
    if (x(i) > gamma + 1e-12) {
      xs += x(i);
      ys += y(i);
    }
  const double c = ys > 0 ? xs / ys : 0.0;
  double r = std::abs(x.sum() - 1.0);
  for (Eigen::Index i = 0; i < x.size(); ++i)
    r = std::max(r, std::abs(x(i) - std::max(gamma, c * y(i))));
  return r;
}

std::optional<double> lp_dual_value(const Eigen::VectorXd &f, const Eigen::VectorXd &g)
{
  const Eigen::Index n = f.size();
  if ((g.array() > 0).all())
    return std::nullopt;
  auto h = [&](double lambda) { return (f.array() + lambda * g.array()).minCoeff(); };
  double best = h(0.0);
  for (Eigen::Index a = 0; a < n; ++a)
    for (Eigen::Index b = a + 1; b < n; ++b) {
      if (g(a) == g(b))
        continue;
      const double lambda = (f(b) - f(a)) / (g(a) - g(b));
      if (lambda > 0)
        best = std::max(best, h(lambda));
    }
  return best;
}

double ls_slope(const Eigen::VectorXd &xs, const Eigen::VectorXd &ys)
{
  const double mx = xs.mean(), my = ys.mean();
  const double sxy = ((xs.array() - mx) * (ys.array() - my)).sum();
  const double sxx = (xs.array() - mx).square().sum();
  return sxy / sxx;
}

} // namespace bcomd::check
