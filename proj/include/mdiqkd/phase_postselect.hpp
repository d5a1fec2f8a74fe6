#pragma once

// Overall-phase postselection. [0, 2 pi) is cut into N bands
//   band m = [m pi/N, (m+1) pi/N) U [(m+N) pi/N, (m+N+1) pi/N),
// the parties announce their bands, and the error-correction cost is paid
// per band pair. Bob's band is fixed to 0 by symmetry; Alice's band is m.
//
// Normalization: Q^m here is the joint probability that Alice drew band m
// (Bob band 0) AND the BSM succeeded, so sum_m Q^m equals the fully
// randomized gain. The gain conditioned on the band pair is N * Q^m.

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <vector>

#include "mdiqkd/decoy_coherent.hpp"
#include "mdiqkd/numerics.hpp"
#include "mdiqkd/params.hpp"

namespace mdiqkd::postselect {

struct PhasePartition {
  int n_partitions = 1;
  int m = 0;

  void validate() const {
    if (n_partitions < 1) throw std::invalid_argument("PhasePartition: N must be >= 1");
    if (m < 0 || m >= n_partitions)
      throw std::invalid_argument("PhasePartition: m must lie in [0, N-1]");
  }

  double width() const { return std::numbers::pi / n_partitions; }
  double lower() const { return m * width(); }
};

/// Quadrature settings used when callers do not supply their own.
inline constexpr numerics::QuadratureSpec kDefaultQuadrature{1e-10, 500};

namespace detail {

// (N / pi) int_0^{pi/N} dphi_b (1/pi) int_{m pi/N}^{(m+1) pi/N} dphi_a g(phi_b - phi_a)
template <class G>
double band_average(const G& integrand, const PhasePartition& part,
                    const numerics::QuadratureSpec& spec) {
  part.validate();
  const double w = part.width();
  const double scale = part.n_partitions / (std::numbers::pi * std::numbers::pi);
  numerics::QuadratureSpec raw = spec;
  raw.absolute_tolerance = spec.absolute_tolerance / scale;
  const numerics::Rectangle region{0.0, w, part.lower(), part.lower() + w};
  return scale * numerics::integrate_2d(
                     [&](double phi_b, double phi_a) { return integrand(phi_b - phi_a); },
                     region, raw);
}

}  // namespace detail

/// Q^m by 2-D quadrature of the per-phase gain over Alice's band m and Bob's
/// band 0.
inline double conditional_gain(const DerivedIntensity& di, const PhasePartition& part,
                               const numerics::QuadratureSpec& spec = kDefaultQuadrature) {
  return detail::band_average([&](double d) { return decoy::gain_at_phase(di, d); }, part, spec);
}

/// E'^m Q^m, the intrinsic error product over the same band pair.
inline double conditional_intrinsic_error(const DerivedIntensity& di, const PhasePartition& part,
                                          const numerics::QuadratureSpec& spec =
                                              kDefaultQuadrature) {
  return detail::band_average([&](double d) { return decoy::intrinsic_error_at_phase(di, d); },
                              part, spec);
}

struct ConditionalQber {
  double q_m;             // joint gain Q^m
  double eq_m_intrinsic;  // E'^m Q^m
  double eq_m;            // E^m Q^m including misalignment
  double e_m;             // E^m
};

/// Conditional QBER for band m, with misalignment folded in the same way as
/// for single photons and the fully randomized case.
inline ConditionalQber conditional_qber(const DerivedIntensity& di, double e_0, double e_d,
                                        const PhasePartition& part,
                                        const numerics::QuadratureSpec& spec =
                                            kDefaultQuadrature) {
  const double q = conditional_gain(di, part, spec);
  const double intrinsic = conditional_intrinsic_error(di, part, spec);
  const decoy::Qber total =
      decoy::make_qber(q, decoy::total_error_product(q, intrinsic, e_0, e_d), e_0);
  return ConditionalQber{q, intrinsic, total.e_mu_times_q, total.e_mu};
}

/// Per-band conditional quantities for m = 0 .. N-1.
struct ConditionalRates {
  std::vector<double> q_m;
  std::vector<double> eq_m;  // intrinsic
  std::vector<double> e_m;   // total QBER
};

inline ConditionalRates conditional_rates(const DerivedIntensity& di, double e_0, double e_d,
                                          int n_partitions,
                                          const numerics::QuadratureSpec& spec =
                                              kDefaultQuadrature) {
  ConditionalRates out;
  for (int m = 0; m < n_partitions; ++m) {
    const ConditionalQber c = conditional_qber(di, e_0, e_d, PhasePartition{n_partitions, m}, spec);
    out.q_m.push_back(c.q_m);
    out.eq_m.push_back(c.eq_m_intrinsic);
    out.e_m.push_back(c.e_m);
  }
  return out;
}

/// A_{m,N} = -cos(2(m-1)pi/N) + 2 cos(2m pi/N) - cos(2(m+1)pi/N).
inline double a_coefficient(const PhasePartition& part) {
  part.validate();
  const double n = part.n_partitions;
  const double m = part.m;
  const double pi = std::numbers::pi;
  return -std::cos(2.0 * (m - 1.0) * pi / n) + 2.0 * std::cos(2.0 * m * pi / n) -
         std::cos(2.0 * (m + 1.0) * pi / n);
}

struct ApproxRates {
  double q_m;
  double eq_m;
  bool in_regime;  // p_d < mu' <= 0.2
};

/// Weak-intensity expansions of Q^m and E'^m Q^m, valid for p_d < mu' << 1:
///   Q^m      ~ (4/N) y^2 (1-y)^2
///   E'^m Q^m ~ (2/N) y^2 (1-y)^2 - x^2 y^3 / N - x^2 y^3 N A_{m,N} / (4 pi^2)
inline ApproxRates approx_conditional_rates(const DerivedIntensity& di, double p_d,
                                            const PhasePartition& part) {
  const double n = part.n_partitions;
  const double y = di.y;
  const double x2y3 = di.x * di.x * y * y * y;
  const double base = y * y * (1.0 - y) * (1.0 - y);
  ApproxRates r;
  r.q_m = 4.0 / n * base;
  r.eq_m = 2.0 / n * base - x2y3 / n -
           x2y3 * n * a_coefficient(part) / (4.0 * std::numbers::pi * std::numbers::pi);
  r.in_regime = p_d < di.mu_prime && di.mu_prime <= 0.2;
  return r;
}

/// I_ec = sum_m Q^m f H(E^m), summed in band order.
inline double i_ec_postselected(const ExperimentParams& p, const SourceIntensities& src,
                                int n_partitions,
                                const numerics::QuadratureSpec& spec = kDefaultQuadrature) {
  const DerivedIntensity di = derive_intensity(p, src);
  const ConditionalRates rates = conditional_rates(di, p.e_0, p.e_d, n_partitions, spec);
  double cost = 0.0;
  for (int m = 0; m < n_partitions; ++m) {
    cost += rates.q_m[static_cast<std::size_t>(m)] * p.f *
            numerics::binary_entropy(rates.e_m[static_cast<std::size_t>(m)]);
  }
  return cost;
}

/// R = sift [ (1/N) Q11 (1 - H(e11)) - Q^0 f H(E^0) ]. Single-photon events are
/// taken as evenly spread over the bands, only the aligned band pair (m = 0)
/// is kept, and Q'_0 is lower-bounded by zero.
inline decoy::RatePoint key_rate_postselected(const ExperimentParams& p,
                                              const SourceIntensities& src, int n_partitions,
                                              const numerics::QuadratureSpec& spec =
                                                  kDefaultQuadrature) {
  if (n_partitions < 1) throw std::invalid_argument("key_rate_postselected: N must be >= 1");
  const DerivedIntensity di = derive_intensity(p, src);
  const ConditionalQber aligned = conditional_qber(di, p.e_0, p.e_d, PhasePartition{n_partitions, 0}, spec);
  return decoy::detail::assemble(p, src, 1.0 / n_partitions, aligned.q_m, aligned.e_m, 0.0);
}

}  // namespace mdiqkd::postselect
