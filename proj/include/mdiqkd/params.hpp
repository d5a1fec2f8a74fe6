#pragma once

#include <cmath>
#include <stdexcept>
#include <string>

namespace mdiqkd {

/// Random-noise error rate; a click with no usable interference is a coin flip.
inline constexpr double kRandomNoiseError = 0.5;

/// Reference detector setup used as the default everywhere.
namespace reference {
inline constexpr double detector_efficiency = 0.145;
inline constexpr double dark_count = 3.0e-6;
inline constexpr double ec_inefficiency = 1.16;
inline constexpr double misalignment = 0.015;
}  // namespace reference

/// Detector, channel and post-processing constants. eta_a and eta_b are total
/// path transmittances and already include detector efficiency.
struct ExperimentParams {
  double eta_a = reference::detector_efficiency;
  double eta_b = reference::detector_efficiency;
  double p_d = reference::dark_count;  // per detector, per gate
  double f = reference::ec_inefficiency;
  double e_d = reference::misalignment;
  double e_0 = kRandomNoiseError;
  double sift_factor = 1.0;

  void validate() const {
    auto require = [](bool ok, const char* what) {
      if (!ok) throw std::invalid_argument(std::string("ExperimentParams: ") + what);
    };
    require(eta_a >= 0.0 && eta_a <= 1.0, "eta_a must lie in [0, 1]");
    require(eta_b >= 0.0 && eta_b <= 1.0, "eta_b must lie in [0, 1]");
    require(p_d >= 0.0 && p_d < 1.0, "p_d must lie in [0, 1)");
    require(e_d >= 0.0 && e_d <= 0.5, "e_d must lie in [0, 1/2]");
    require(e_0 == kRandomNoiseError, "e_0 is fixed at 1/2");
    require(std::isfinite(f) && f > 0.0, "f must be positive and finite");
    require(sift_factor > 0.0 && sift_factor <= 1.0, "sift_factor must lie in (0, 1]");
  }
};

/// Mean photon numbers of Alice's and Bob's coherent sources.
struct SourceIntensities {
  double mu_a = 0.0;
  double mu_b = 0.0;

  void validate() const {
    if (!(mu_a >= 0.0 && std::isfinite(mu_a)) || !(mu_b >= 0.0 && std::isfinite(mu_b)))
      throw std::invalid_argument("SourceIntensities: mu_a and mu_b must be finite and >= 0");
  }
};

/// Shorthand quantities of the coherent-state analysis:
///   mu_prime = eta_a mu_a + eta_b mu_b     (mean photons reaching the relay)
///   x        = sqrt(eta_a mu_a eta_b mu_b) / 2
///   y        = (1 - p_d) exp(-mu_prime / 4)
struct DerivedIntensity {
  double mu_prime = 0.0;
  double x = 0.0;
  double y = 1.0;
};

inline DerivedIntensity derive_intensity(const ExperimentParams& params,
                                         const SourceIntensities& src) {
  const double arriving_a = params.eta_a * src.mu_a;
  const double arriving_b = params.eta_b * src.mu_b;
  DerivedIntensity di;
  di.mu_prime = arriving_a + arriving_b;
  di.x = std::sqrt(arriving_a * arriving_b) / 2.0;
  di.y = (1.0 - params.p_d) * std::exp(-di.mu_prime / 4.0);
  return di;
}

struct ChannelTransmittance {
  double eta_a;
  double eta_b;
};

/// Splits a total channel loss (dB) between the two arms. asymmetry is the
/// fraction of the loss on Alice's side; 0.5 puts the relay in the middle.
inline ChannelTransmittance channel_from_loss(double total_loss_db, double detector_efficiency,
                                              double asymmetry = 0.5) {
  if (!(total_loss_db >= 0.0) || !std::isfinite(total_loss_db))
    throw std::domain_error("channel_from_loss: loss must be finite and >= 0 dB");
  if (!(detector_efficiency > 0.0 && detector_efficiency <= 1.0))
    throw std::domain_error("channel_from_loss: detector efficiency must lie in (0, 1]");
  if (!(asymmetry >= 0.0 && asymmetry <= 1.0))
    throw std::domain_error("channel_from_loss: asymmetry must lie in [0, 1]");
  return ChannelTransmittance{
      detector_efficiency * std::pow(10.0, -asymmetry * total_loss_db / 10.0),
      detector_efficiency * std::pow(10.0, -(1.0 - asymmetry) * total_loss_db / 10.0)};
}

}  // namespace mdiqkd
