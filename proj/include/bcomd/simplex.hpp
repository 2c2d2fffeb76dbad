#pragma once

// Negative-entropy geometry on the probability simplex: generalized KL
// divergence, the multiplicative mirror step, and the KL projection onto the
// truncated simplex {x : sum(x) = 1, x >= gamma}.

#include "bcomd/errors.hpp"
#include "bcomd/tolerances.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>
#include <vector>

namespace bcomd {

template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

/// Probability vector over arms (primal iterate).
using ActionDistribution = Vector<double>;
/// Strictly positive, unnormalized iterate produced by the mirror step.
using PositiveVector = Vector<double>;

struct StepReport
{
  int clamped = 0; // exponents that hit +/- Tolerances::exponent_clamp
};

namespace detail {

template <typename Derived>
void require_finite(const Eigen::MatrixBase<Derived> &v, const char *what)
{
  for (Eigen::Index i = 0; i < v.size(); ++i)
    if (!std::isfinite(static_cast<double>(v(i))))
      throw ValidationError(std::string(what) + ": non-finite entry at index " + std::to_string(i));
}

template <typename Derived>
void require_positive(const Eigen::MatrixBase<Derived> &v, const char *what)
{
  require_finite(v, what);
  for (Eigen::Index i = 0; i < v.size(); ++i)
    if (!(v(i) > 0))
      throw ValidationError(std::string(what) + ": nonpositive entry at index " + std::to_string(i));
}

} // namespace detail

/// True when x is a probability vector whose entries are all >= gamma
/// (up to the normalization tolerance).
template <typename Derived>
bool is_distribution(const Eigen::MatrixBase<Derived> &x, double gamma = 0.0,
                     double tol = Tolerances::normalization)
{
  if (x.size() == 0)
    return false;
  double sum = 0;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double v = x(i);
    if (!std::isfinite(v) || v < gamma - tol || v < 0)
      return false;
    sum += v;
  }
  return std::abs(sum - 1.0) <= tol * std::max<double>(1.0, static_cast<double>(x.size()));
}

/// Bregman divergence of the negative entropy,
///   sum_a x_a log(x_a / y_a) - sum_a x_a + sum_a y_a,
/// which is the KL divergence when both arguments are distributions.
/// Zero entries are allowed in x only (0 log 0 = 0).
template <typename DerivedX, typename DerivedY>
typename DerivedX::Scalar kl_divergence(const Eigen::MatrixBase<DerivedX> &x,
                                        const Eigen::MatrixBase<DerivedY> &y)
{
  using Scalar = typename DerivedX::Scalar;
  if (x.size() != y.size())
    throw ValidationError("kl_divergence: dimension mismatch (" + std::to_string(x.size()) + " vs " +
                          std::to_string(y.size()) + ")");
  detail::require_finite(x, "kl_divergence x");
  detail::require_positive(y, "kl_divergence y");
  Scalar total = 0;
  for (Eigen::Index a = 0; a < x.size(); ++a) {
    if (x(a) < 0)
      throw ValidationError("kl_divergence: negative entry in x at index " + std::to_string(a));
    if (x(a) > 0)
      total += x(a) * std::log(x(a) / y(a));
    total += y(a) - x(a);
  }
  return total;
}

/// y_a = x_a exp(-eta b_a), with the exponent clamped to
/// [-exponent_clamp, exponent_clamp]. Clamps are counted in `report`.
template <typename DerivedX, typename DerivedB>
Vector<typename DerivedX::Scalar> multiplicative_step(const Eigen::MatrixBase<DerivedX> &x,
                                                      const Eigen::MatrixBase<DerivedB> &b,
                                                      typename DerivedX::Scalar eta,
                                                      StepReport *report = nullptr)
{
  using Scalar = typename DerivedX::Scalar;
  if (x.size() != b.size())
    throw ValidationError("multiplicative_step: dimension mismatch");
  if (!(eta > 0) || !std::isfinite(static_cast<double>(eta)))
    throw ValidationError("multiplicative_step: eta must be positive and finite");
  detail::require_positive(x, "multiplicative_step x");
  detail::require_finite(b, "multiplicative_step b");

  const Scalar bound = static_cast<Scalar>(Tolerances::exponent_clamp);
  Vector<Scalar> y(x.size());
  for (Eigen::Index a = 0; a < x.size(); ++a) {
    Scalar exponent = -eta * b(a);
    if (exponent > bound || exponent < -bound) {
      exponent = std::clamp(exponent, -bound, bound);
      if (report)
        ++report->clamped;
    }
    y(a) = x(a) * std::exp(exponent);
  }
  return y;
}

namespace detail {

inline void check_projection_input(Eigen::Index n, double gamma)
{
  if (n == 0)
    throw ValidationError("project_kl: empty vector");
  if (!(gamma >= 0) || !std::isfinite(gamma))
    throw ValidationError("project_kl: gamma must be a finite nonnegative number");
  if (gamma * static_cast<double>(n) > 1.0 + Tolerances::normalization)
    throw ValidationError("project_kl: gamma * n = " + std::to_string(gamma * static_cast<double>(n)) +
                          " > 1, truncated simplex is empty");
}

} // namespace detail

/// KL projection onto the truncated simplex by bisection on the scale c in
/// x_a = max(gamma, c y_a). Slower than project_kl; kept as its fallback and as
/// a cross-check.
template <typename Derived>
Vector<typename Derived::Scalar> project_kl_bisection(const Eigen::MatrixBase<Derived> &y_in, double gamma)
{
  using Scalar = typename Derived::Scalar;
  detail::check_projection_input(y_in.size(), gamma);
  detail::require_positive(y_in, "project_kl y");
  const Vector<Scalar> y = y_in / y_in.maxCoeff();
  const Scalar g = static_cast<Scalar>(gamma);

  auto mass = [&](Scalar c) { return y.unaryExpr([&](Scalar v) { return std::max(g, c * v); }).sum(); };

  Scalar lo = 0;
  Scalar hi = 1 / y.sum();
  // mass(lo) = n gamma <= 1 <= mass(hi)
  for (int it = 0; it < 2000; ++it) {
    const Scalar mid = lo + (hi - lo) / 2;
    if (!(mid > lo && mid < hi))
      break;
    if (mass(mid) < 1)
      lo = mid;
    else
      hi = mid;
  }
  Vector<Scalar> x = y.unaryExpr([&](Scalar v) { return std::max(g, hi * v); });
  return x / x.sum();
}

/// KL (Bregman) projection of a positive vector onto the truncated simplex.
///
/// Fast path: if y / sum(y) already has every entry >= gamma it is the answer.
/// Otherwise the minimizer has the form x_a = max(gamma, c y_a); the smallest
/// entries are the ones clamped, so sorting y ascending and scanning for the
/// first index whose scaled value clears gamma gives c in closed form.
template <typename Derived>
Vector<typename Derived::Scalar> project_kl(const Eigen::MatrixBase<Derived> &y_in, double gamma)
{
  using Scalar = typename Derived::Scalar;
  detail::check_projection_input(y_in.size(), gamma);
  detail::require_positive(y_in, "project_kl y");

  const Eigen::Index n = y_in.size();
  const Scalar g = static_cast<Scalar>(gamma);
  Vector<Scalar> y = y_in / y_in.maxCoeff();

  Vector<Scalar> normalized = y / y.sum();
  if (normalized.minCoeff() >= g)
    return normalized;

  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::sort(order.begin(), order.end(), [&](Eigen::Index l, Eigen::Index r) { return y(l) < y(r); });

  // suffix[k] = sum of the n - k largest entries
  std::vector<Scalar> suffix(static_cast<std::size_t>(n) + 1, Scalar{0});
  for (Eigen::Index k = n - 1; k >= 0; --k)
    suffix[static_cast<std::size_t>(k)] = suffix[static_cast<std::size_t>(k) + 1] + y(order[static_cast<std::size_t>(k)]);

  for (Eigen::Index k = 0; k < n; ++k) {
    const Scalar free_mass = 1 - static_cast<Scalar>(k) * g;
    const Scalar c = free_mass / suffix[static_cast<std::size_t>(k)];
    if (!std::isfinite(static_cast<double>(c)) || !(free_mass > 0))
      break;
    if (c * y(order[static_cast<std::size_t>(k)]) >= g) {
      Vector<Scalar> x(n);
      for (Eigen::Index a = 0; a < n; ++a)
        x(a) = std::max(g, c * y(a));
      return x;
    }
  }
  if (std::abs(static_cast<double>(n) * gamma - 1.0) <= Tolerances::normalization)
    return Vector<Scalar>::Constant(n, Scalar{1} / static_cast<Scalar>(n));
  return project_kl_bisection(y, gamma);
}

} // namespace bcomd
