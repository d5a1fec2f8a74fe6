#pragma once

// Yield, error rate and key rate when both parties emit exactly one photon,
// including channel loss, dark counts and misalignment.

#include <algorithm>

#include "mdiqkd/numerics.hpp"
#include "mdiqkd/params.hpp"

namespace mdiqkd::single_photon {

/// Joint single-click probabilities for each (r, s) detector pair when the
/// encoded phases agree (theta_a - theta_b = 0). For a phase difference of pi
/// the correlated and anticorrelated entries swap roles.
struct PairYields {
  double y_r0s0;
  double y_r1s1;
  double y_r0s1;
  double y_r1s0;

  double total() const { return y_r0s0 + y_r1s1 + y_r0s1 + y_r1s0; }
};

inline PairYields pair_yields(const ExperimentParams& p) {
  const double silent = (1.0 - p.p_d) * (1.0 - p.p_d);
  const double one_dark =
      ((p.eta_a + p.eta_b) / 2.0 - 3.0 * p.eta_a * p.eta_b / 4.0) * p.p_d;
  const double two_dark = (1.0 - p.eta_a) * (1.0 - p.eta_b) * p.p_d * p.p_d;
  const double correlated = silent * (p.eta_a * p.eta_b / 4.0 + one_dark + two_dark);
  const double anticorrelated = silent * (one_dark + two_dark);
  return PairYields{correlated, correlated, anticorrelated, anticorrelated};
}

/// Y11: probability of a successful partial BSM given single photons from
/// both sides in matching bases.
inline double yield_11(const ExperimentParams& p) {
  const double silent = (1.0 - p.p_d) * (1.0 - p.p_d);
  return silent * (p.eta_a * p.eta_b / 2.0 +
                   (2.0 * p.eta_a + 2.0 * p.eta_b - 3.0 * p.eta_a * p.eta_b) * p.p_d +
                   4.0 * (1.0 - p.eta_a) * (1.0 - p.eta_b) * p.p_d * p.p_d);
}

struct ErrorRate {
  double e11;
  double e11_times_y11;
};

/// e11 Y11 = e0 Y11 - (e0 - e_d)(1 - p_d)^2 eta_a eta_b / 2. When Y11 is zero
/// the ratio is reported as e0.
inline ErrorRate error_11(const ExperimentParams& p) {
  const double y11 = yield_11(p);
  // Nonnegative analytically; the clamp only absorbs cancellation roundoff.
  const double product = std::max(
      0.0, p.e_0 * y11 -
               (p.e_0 - p.e_d) * (1.0 - p.p_d) * (1.0 - p.p_d) * p.eta_a * p.eta_b / 2.0);
  return ErrorRate{y11 > 0.0 ? product / y11 : p.e_0, product};
}

/// sift * Y11 [1 - f H(e11) - H(e11)], unclamped.
inline double key_rate_single_photon(const ExperimentParams& p) {
  const double h = numerics::binary_entropy(error_11(p).e11);
  return p.sift_factor * yield_11(p) * (1.0 - p.f * h - h);
}

}  // namespace mdiqkd::single_photon
