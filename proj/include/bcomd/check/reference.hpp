#pragma once

// Brute-force reference solvers. They share no code with the production
// solvers and are only meant for small n.

#include "bcomd/random.hpp"

#include <Eigen/Dense>

#include <optional>

namespace bcomd::check {

/// sum_i x_i log(x_i / y_i) - x_i + y_i, written out independently.
double reference_kl(const Eigen::VectorXd &x, const Eigen::VectorXd &y);

struct GridMinimum
{
  Eigen::VectorXd x;
  double value = 0;
};

/// Minimum of KL(x, y) over x = gamma + (1 - n gamma) z, z on the lattice
/// {k * resolution} of the probability simplex. n must be 2 or 3.
GridMinimum grid_kl_minimum(const Eigen::VectorXd &y, double gamma, double resolution);

/// Same objective, z drawn from a flat Dirichlet.
GridMinimum sampled_kl_minimum(const Eigen::VectorXd &y, double gamma, int samples, CounterRng &rng);

/// Largest |x_i - max(gamma, c y_i)| over i, with c fitted from the free
/// coordinates. Also folds in |sum x - 1|.
double kkt_residual(const Eigen::VectorXd &x, const Eigen::VectorXd &y, double gamma);

/// LP value min{f.x : x in simplex, g.x <= 0} via its dual
/// max_{lambda >= 0} min_a f_a + lambda g_a, evaluated at every breakpoint.
/// Empty when no feasible point exists.
std::optional<double> lp_dual_value(const Eigen::VectorXd &f, const Eigen::VectorXd &g);

/// Least-squares slope of ys against xs.
double ls_slope(const Eigen::VectorXd &xs, const Eigen::VectorXd &ys);

} // namespace bcomd::check
