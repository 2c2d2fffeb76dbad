#pragma once

namespace bcomd {

// Shared by the library checks and the test suites.
struct Tolerances
{
  static constexpr double normalization = 1e-12; // |sum(x) - 1| on a distribution
  static constexpr double identity = 1e-9;       // Bregman identities and certificates
  static constexpr double kkt = 1e-10;           // projection KKT form and solver agreement
  static constexpr double exponent_clamp = 700;  // |exponent| bound in the multiplicative step
  static constexpr double feasibility = 1e-9;    // g . x <= feasibility for comparator points
};

} // namespace bcomd
