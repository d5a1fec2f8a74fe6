#pragma once

// Gains, QBERs and key rates for phase-randomized coherent-state sources:
// full randomization of the overall phase, the idealized equal-phase case,
// and the original X-Z encoding.

#include <algorithm>
#include <cmath>

#include "mdiqkd/numerics.hpp"
#include "mdiqkd/params.hpp"
#include "mdiqkd/single_photon.hpp"

namespace mdiqkd::decoy {

/// Click probabilities of the four relay detectors for overall-phase
/// difference delta_phi = phi_b - phi_a and encoded phase difference
/// theta_diff = theta_a - theta_b.
struct DetectionProbs {
  double d_r0;
  double d_r1;
  double d_s0;
  double d_s1;
  double theta_diff;
  double delta_phi;
};

inline DetectionProbs detection_probs(const DerivedIntensity& di, double delta_phi,
                                      double theta_diff) {
  const double cr = di.x * std::cos(delta_phi);
  const double cs = di.x * std::cos(delta_phi + theta_diff);
  return DetectionProbs{1.0 - di.y * std::exp(-cr), 1.0 - di.y * std::exp(cr),
                        1.0 - di.y * std::exp(-cs), 1.0 - di.y * std::exp(cs), theta_diff,
                        delta_phi};
}

/// Successful-BSM probability at a fixed overall-phase difference, for
/// matching bases: y^2 (e^{-x cos} + e^{x cos} - 2y)^2.
inline double gain_at_phase(const DerivedIntensity& di, double delta_phi) {
  const double c = di.x * std::cos(delta_phi);
  const double s = std::exp(-c) + std::exp(c) - 2.0 * di.y;
  return di.y * di.y * s * s;
}

/// Intrinsic (no misalignment) error product at a fixed overall-phase
/// difference: 2 y^2 (y - e^{x cos})(y - e^{-x cos}).
inline double intrinsic_error_at_phase(const DerivedIntensity& di, double delta_phi) {
  const double c = di.x * std::cos(delta_phi);
  return 2.0 * di.y * di.y * (di.y - std::exp(c)) * (di.y - std::exp(-c));
}

/// Gain averaged over a uniform overall-phase difference:
/// 2 y^2 [1 + 2 y^2 - 4 y I0(x) + I0(2x)].
inline double gain_full_random(const DerivedIntensity& di) {
  const double y = di.y;
  return 2.0 * y * y *
         (1.0 + 2.0 * y * y - 4.0 * y * numerics::bessel_i0(di.x) + numerics::bessel_i0(2.0 * di.x));
}

/// Phase-averaged intrinsic error product: 2 y^2 [1 + y^2 - 2 y I0(x)].
inline double intrinsic_error_full_random(const DerivedIntensity& di) {
  const double y = di.y;
  return 2.0 * y * y * (1.0 + y * y - 2.0 * y * numerics::bessel_i0(di.x));
}

/// Folds misalignment into an intrinsic error product. The interference part
/// e0 Q - E'Q is erroneous with probability e_d instead of never; the rest
/// stays random at e0.
inline double total_error_product(double gain, double intrinsic, double e_0, double e_d) {
  return e_0 * gain - (e_0 - e_d) * (e_0 * gain - intrinsic) / e_0;
}

/// QBER and the QBER-gain product. The ratio is e0 when the gain vanishes.
struct Qber {
  double e_mu;
  double e_mu_times_q;
};

inline Qber make_qber(double gain, double error_product, double e_0) {
  const double product = std::clamp(error_product, 0.0, std::max(gain, 0.0));
  return Qber{gain > 0.0 ? product / gain : e_0, product};
}

/// Full-randomization QBER: E Q = e0 Q - 2 (e0 - e_d) y^2 [I0(2x) - 1].
inline Qber qber_full_random(const DerivedIntensity& di, double e_0, double e_d) {
  const double q = gain_full_random(di);
  const double product =
      e_0 * q - 2.0 * (e_0 - e_d) * di.y * di.y * (numerics::bessel_i0(2.0 * di.x) - 1.0);
  return make_qber(q, product, e_0);
}

/// Which party's vacuum contribution enters the key rate. Forward (Alice to
/// Bob) post-processing credits Q'_{0 mu_b}; reverse credits Q'_{mu_a 0}.
enum class Reconciliation { forward, reverse };

/// Probability that the credited party sent vacuum and the BSM still
/// succeeded. Forward: 4 (1-p_d)^2 e^{-eta_b mu_b / 2 - mu_a}
/// [1 - (1-p_d) e^{-eta_b mu_b / 4}]^2.
inline double gain_q0_prime(const ExperimentParams& p, const SourceIntensities& src,
                            Reconciliation direction = Reconciliation::forward) {
  const bool forward = direction == Reconciliation::forward;
  const double silent_mu = forward ? src.mu_a : src.mu_b;
  const double arriving = forward ? p.eta_b * src.mu_b : p.eta_a * src.mu_a;
  const double miss = 1.0 - (1.0 - p.p_d) * std::exp(-arriving / 4.0);
  return 4.0 * (1.0 - p.p_d) * (1.0 - p.p_d) * std::exp(-arriving / 2.0 - silent_mu) * miss * miss;
}

/// Q11 = mu_a mu_b e^{-mu_a - mu_b} Y11.
inline double gain_q11(const ExperimentParams& p, const SourceIntensities& src) {
  return src.mu_a * src.mu_b * std::exp(-src.mu_a - src.mu_b) * single_photon::yield_11(p);
}

/// Every term of a key-rate evaluation at one parameter setting.
struct RatePoint {
  double q_11 = 0.0;
  double e_11 = 0.0;
  double q_mu = 0.0;
  double e_mu = 0.0;
  double q0_prime = 0.0;
  double i_ec = 0.0;
  double rate = 0.0;
};

namespace detail {

inline RatePoint assemble(const ExperimentParams& p, const SourceIntensities& src,
                          double single_photon_share, double q_mu, double e_mu,
                          double q0_prime) {
  RatePoint rp;
  rp.q_11 = gain_q11(p, src);
  rp.e_11 = single_photon::error_11(p).e11;
  rp.q_mu = q_mu;
  rp.e_mu = e_mu;
  rp.q0_prime = q0_prime;
  rp.i_ec = q_mu * p.f * numerics::binary_entropy(e_mu);
  rp.rate = p.sift_factor * (single_photon_share * rp.q_11 *
                                 (1.0 - numerics::binary_entropy(rp.e_11)) +
                             q0_prime - rp.i_ec);
  return rp;
}

}  // namespace detail

/// R = sift [Q11 (1 - H(e11)) + Q'_0 - Q f H(E)] with the overall phase fully
/// randomized. e11 comes from the single-photon model (infinite decoys).
inline RatePoint key_rate_full_random(const ExperimentParams& p, const SourceIntensities& src,
                                      Reconciliation direction = Reconciliation::forward) {
  const DerivedIntensity di = derive_intensity(p, src);
  const Qber qber = qber_full_random(di, p.e_0, p.e_d);
  return detail::assemble(p, src, 1.0, gain_full_random(di), qber.e_mu,
                          gain_q0_prime(p, src, direction));
}

/// Gain and QBER when both overall phases coincide (delta_phi = 0).
inline Qber qber_equal_phase(const DerivedIntensity& di, double e_0, double e_d) {
  const double q = gain_at_phase(di, 0.0);
  const double split = std::exp(di.x) - std::exp(-di.x);
  return make_qber(q, e_0 * q - (e_0 - e_d) * di.y * di.y * split * split, e_0);
}

/// Rate for the delta_phi = 0 case, taking the lower bound Q'_0 = 0.
inline RatePoint key_rate_equal_phase(const ExperimentParams& p, const SourceIntensities& src) {
  const DerivedIntensity di = derive_intensity(p, src);
  const Qber qber = qber_equal_phase(di, p.e_0, p.e_d);
  return detail::assemble(p, src, 1.0, gain_at_phase(di, 0.0), qber.e_mu, 0.0);
}

/// Rectilinear-basis gain of the X-Z scheme. correct: the parties used
/// different modes; error: same mode, with a dark count completing the
/// two-click event.
struct RectGain {
  double q_rect;
  double q_rect_correct;
  double q_rect_error;
};

inline RectGain gain_rect(const ExperimentParams& p, const SourceIntensities& src) {
  const DerivedIntensity di = derive_intensity(p, src);
  const double silent = (1.0 - p.p_d) * (1.0 - p.p_d);
  const double vacuum = std::exp(-di.mu_prime / 2.0);
  const double correct = 2.0 * silent * vacuum *
                         (1.0 - (1.0 - p.p_d) * std::exp(-p.eta_a * src.mu_a / 2.0)) *
                         (1.0 - (1.0 - p.p_d) * std::exp(-p.eta_b * src.mu_b / 2.0));
  const double error = 2.0 * p.p_d * silent * vacuum *
                       (numerics::bessel_i0(2.0 * di.x) - (1.0 - p.p_d) * vacuum);
  return RectGain{correct + error, correct, error};
}

/// R = sift [Q11 (1 - H(e11)) - Q_rect f H(E_rect)], with
/// E_rect Q_rect = e_d Q_rect^C + (1 - e_d) Q_rect^E and a constant f.
inline RatePoint key_rate_original_xz(const ExperimentParams& p, const SourceIntensities& src) {
  const RectGain rect = gain_rect(p, src);
  const Qber qber = make_qber(
      rect.q_rect, p.e_d * rect.q_rect_correct + (1.0 - p.e_d) * rect.q_rect_error, p.e_0);
  return detail::assemble(p, src, 1.0, rect.q_rect, qber.e_mu, 0.0);
}

}  // namespace mdiqkd::decoy
