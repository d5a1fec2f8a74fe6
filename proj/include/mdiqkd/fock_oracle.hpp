#pragma once

// Independent verification engine.
//
// Single photons: the lossy input is the four-branch mixture over which
// photons survive the channel. Each branch is evolved exactly through the
// relay beam splitters in a truncated Fock space. Threshold detectors with
// independent dark counts then turn photon-number statistics into the 16
// click-pattern probabilities.
//
// Coherent states: per-phase click probabilities are exact, so only the
// average over the random overall phases is sampled (seeded Monte Carlo).

#include <array>
#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <map>
#include <numbers>
#include <random>
#include <stdexcept>
#include <thread>
#include <vector>

#include "mdiqkd/params.hpp"

namespace mdiqkd::oracle {

// Input modes (Alice reference/signal, Bob reference/signal) and relay output
// modes (detectors r0, r1, s0, s1) share the index range 0..3.
enum InputMode : int { kAliceRef = 0, kAliceSig = 1, kBobRef = 2, kBobSig = 3 };
enum OutputMode : int { kR0 = 0, kR1 = 1, kS0 = 2, kS1 = 3 };

inline constexpr int kModes = 4;
inline constexpr int kPhotonCutoff = 2;

using Occupation = std::array<int, kModes>;
using Amplitude = std::complex<double>;

/// Sparse four-mode Fock-space vector keyed by photon-number tuples.
class FockState {
 public:
  FockState() = default;

  static FockState vacuum(Amplitude amplitude = 1.0) {
    FockState s;
    s.amplitudes_[Occupation{0, 0, 0, 0}] = amplitude;
    return s;
  }

  void add(const Occupation& n, Amplitude amplitude) {
    if (total_photons(n) > kPhotonCutoff)
      throw std::logic_error("FockState: photon-number cutoff exceeded");
    amplitudes_[n] += amplitude;
  }

  /// Applies sum_j coeff_j * c_j^dagger, where c_j are output modes.
  FockState create(const std::array<Amplitude, kModes>& coeffs) const {
    FockState out;
    for (const auto& [n, amp] : amplitudes_) {
      for (int j = 0; j < kModes; ++j) {
        if (coeffs[static_cast<std::size_t>(j)] == Amplitude{0.0}) continue;
        Occupation m = n;
        const double bosonic = std::sqrt(static_cast<double>(m[static_cast<std::size_t>(j)] + 1));
        ++m[static_cast<std::size_t>(j)];
        out.add(m, amp * coeffs[static_cast<std::size_t>(j)] * bosonic);
      }
    }
    return out;
  }

  double squared_norm() const {
    double s = 0.0;
    for (const auto& [n, amp] : amplitudes_) s += std::norm(amp);
    return s;
  }

  const std::map<Occupation, Amplitude>& amplitudes() const { return amplitudes_; }

  static int total_photons(const Occupation& n) { return n[0] + n[1] + n[2] + n[3]; }

 private:
  std::map<Occupation, Amplitude> amplitudes_;
};

/// Relay beam splitters, one per mode pair:
///   a_r -> (r0 + r1)/sqrt2    b_r -> (r1 - r0)/sqrt2
///   a_s -> (s0 + s1)/sqrt2    b_s -> (s1 - s0)/sqrt2
inline std::array<Amplitude, kModes> relay_row(int input) {
  const double h = 1.0 / std::numbers::sqrt2;
  switch (input) {
    case kAliceRef: return {h, h, 0.0, 0.0};
    case kBobRef: return {-h, h, 0.0, 0.0};
    case kAliceSig: return {0.0, 0.0, h, h};
    case kBobSig: return {0.0, 0.0, -h, h};
    default: throw std::out_of_range("relay_row: bad input mode");
  }
}

/// Sends an input-mode Fock state through the relay. Input occupations must
/// be 0 or 1 per mode, which is all the single-photon analysis needs.
inline FockState through_relay(const FockState& input) {
  FockState out;
  for (const auto& [n, amp] : input.amplitudes()) {
    FockState term = FockState::vacuum(amp);
    for (int k = 0; k < kModes; ++k) {
      if (n[static_cast<std::size_t>(k)] > 1)
        throw std::logic_error("through_relay: multi-photon input modes are not supported");
      if (n[static_cast<std::size_t>(k)] == 1) term = term.create(relay_row(k));
    }
    for (const auto& [m, a] : term.amplitudes()) out.add(m, a);
  }
  return out;
}

/// Which photons survived the channel.
enum class LossBranch { both, alice_only, bob_only, none };

struct PhotonOutcome {
  LossBranch branch;
  Occupation detectors;  // photons per output mode
  double probability;
};

/// Photon-number statistics at the four detectors, before dark counts. The
/// branch states are left unnormalized with the mixture weights
/// eta_a eta_b / 4, eta_a (1 - eta_b) / 2, (1 - eta_a) eta_b / 2 and
/// (1 - eta_a)(1 - eta_b).
inline std::vector<PhotonOutcome> photon_statistics(double theta_a, double theta_b, double eta_a,
                                                    double eta_b) {
  const Amplitude ea = std::polar(1.0, theta_a);
  const Amplitude eb = std::polar(1.0, theta_b);

  struct Branch {
    LossBranch kind;
    double weight;
    FockState state;
  };
  std::vector<Branch> branches;

  FockState both;
  both.add({1, 0, 1, 0}, 1.0);
  both.add({0, 1, 1, 0}, ea);
  both.add({1, 0, 0, 1}, eb);
  both.add({0, 1, 0, 1}, ea * eb);
  branches.push_back({LossBranch::both, eta_a * eta_b / 4.0, both});

  FockState alice;
  alice.add({1, 0, 0, 0}, 1.0);
  alice.add({0, 1, 0, 0}, ea);
  branches.push_back({LossBranch::alice_only, eta_a * (1.0 - eta_b) / 2.0, alice});

  FockState bob;
  bob.add({0, 0, 1, 0}, 1.0);
  bob.add({0, 0, 0, 1}, eb);
  branches.push_back({LossBranch::bob_only, (1.0 - eta_a) * eta_b / 2.0, bob});

  branches.push_back({LossBranch::none, (1.0 - eta_a) * (1.0 - eta_b), FockState::vacuum()});

  std::vector<PhotonOutcome> out;
  for (const Branch& b : branches) {
    if (b.weight == 0.0) continue;
    const FockState out_state = through_relay(b.state);
    for (const auto& [n, amp] : out_state.amplitudes()) {
      const double p = b.weight * std::norm(amp);
      if (p > 0.0) out.push_back({b.kind, n, p});
    }
  }
  return out;
}

/// One of the 16 click patterns with its probability.
struct ClickPattern {
  std::array<bool, kModes> clicks;  // r0, r1, s0, s1
  double probability;

  /// One click among the r detectors and one among the s detectors.
  bool successful() const { return (clicks[kR0] != clicks[kR1]) && (clicks[kS0] != clicks[kS1]); }
  /// Correlated pairs r0-s0 or r1-s1.
  bool correlated() const { return successful() && clicks[kR0] == clicks[kS0]; }
};

inline std::array<bool, kModes> pattern_bits(unsigned index) {
  return {(index & 1u) != 0, (index & 2u) != 0, (index & 4u) != 0, (index & 8u) != 0};
}

/// Probability that threshold detectors with dark-count probability p_d show
/// exactly the given clicks for the given photon numbers. An occupied
/// detector always clicks; an empty one clicks with probability p_d.
inline double click_likelihood(const Occupation& photons, const std::array<bool, kModes>& clicks,
                               double p_d) {
  double p = 1.0;
  for (std::size_t i = 0; i < kModes; ++i) {
    const bool lit = photons[i] > 0;
    if (clicks[i])
      p *= lit ? 1.0 : p_d;
    else
      p *= lit ? 0.0 : 1.0 - p_d;
  }
  return p;
}

/// Full 16-pattern distribution for single photons encoded with phases
/// theta_a, theta_b, pattern index bits (r0, r1, s0, s1) = (1, 2, 4, 8).
inline std::array<ClickPattern, 16> evolve_single_photon_pair(double theta_a, double theta_b,
                                                              double eta_a, double eta_b,
                                                              double p_d) {
  if (!std::isfinite(theta_a) || !std::isfinite(theta_b))
    throw std::invalid_argument("evolve_single_photon_pair: angles must be finite");
  if (!(eta_a >= 0.0 && eta_a <= 1.0 && eta_b >= 0.0 && eta_b <= 1.0))
    throw std::invalid_argument("evolve_single_photon_pair: transmittances must lie in [0, 1]");
  const std::vector<PhotonOutcome> stats = photon_statistics(theta_a, theta_b, eta_a, eta_b);
  std::array<ClickPattern, 16> patterns{};
  for (unsigned idx = 0; idx < 16; ++idx) {
    patterns[idx].clicks = pattern_bits(idx);
    double p = 0.0;
    for (const PhotonOutcome& o : stats) p += o.probability * click_likelihood(o.detectors, patterns[idx].clicks, p_d);
    patterns[idx].probability = p;
  }
  return patterns;
}

struct OracleYield {
  double y11;
  double e11y11;
};

/// Y11 and e11 Y11 read off the exact pattern distribution at
/// theta_a = theta_b = 0. Misalignment flips a fraction e_d of the
/// interference-driven successes: both photons arrived, one in each detector
/// group, and the two empty detectors stayed dark. All other successes keep
/// whatever correlation the simulation produced.
inline OracleYield oracle_yield_and_error(double eta_a, double eta_b, double p_d, double e_d) {
  const auto patterns = evolve_single_photon_pair(0.0, 0.0, eta_a, eta_b, p_d);
  double success = 0.0;
  double anticorrelated = 0.0;
  for (const ClickPattern& c : patterns) {
    if (!c.successful()) continue;
    success += c.probability;
    if (!c.correlated()) anticorrelated += c.probability;
  }

  double interference_right = 0.0;
  double interference_wrong = 0.0;
  for (const PhotonOutcome& o : photon_statistics(0.0, 0.0, eta_a, eta_b)) {
    if (o.branch != LossBranch::both) continue;
    const auto& n = o.detectors;
    if (n[kR0] + n[kR1] != 1 || n[kS0] + n[kS1] != 1) continue;
    const double p = o.probability * (1.0 - p_d) * (1.0 - p_d);
    const bool same = (n[kR0] == 1) == (n[kS0] == 1);
    (same ? interference_right : interference_wrong) += p;
  }
  const double errors =
      anticorrelated - interference_wrong + (1.0 - e_d) * interference_wrong + e_d * interference_right;
  return OracleYield{success, errors};
}

// ---------------------------------------------------------------------------
// Monte Carlo phase averaging for coherent states.

inline constexpr std::uint64_t kSamplesPerBlock = 4096;

/// Uniform overall phases for one block of samples. Alice draws from band m,
/// Bob from band 0; each band is the union of two arcs pi apart. A block's
/// stream depends only on (seed, block), so results do not depend on how
/// blocks are spread over workers.
class PhaseSampler {
 public:
  PhaseSampler(std::uint64_t seed, std::uint64_t block, int n_partitions, int m)
      : width_(std::numbers::pi / n_partitions), alice_lower_(m * width_) {
    if (n_partitions < 1 || m < 0 || m >= n_partitions)
      throw std::invalid_argument("PhaseSampler: invalid partition");
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(block), static_cast<std::uint32_t>(block >> 32)};
    rng_.seed(seq);
  }

  struct Phases {
    double phi_a;
    double phi_b;
  };

  Phases next() {
    const double phi_a = band_draw(alice_lower_);
    const double phi_b = band_draw(0.0);
    return {phi_a, phi_b};
  }

 private:
  double uniform() { return static_cast<double>(rng_() >> 11) * 0x1.0p-53; }

  double band_draw(double lower) {
    const double arc = uniform() < 0.5 ? 0.0 : std::numbers::pi;
    return lower + arc + width_ * uniform();
  }

  double width_;
  double alice_lower_;
  std::mt19937_64 rng_;
};

struct PhaseSample {
  double gain;
  double intrinsic_error;
};

/// Exact success and intrinsic-error probabilities at fixed overall phases,
/// from the coherent amplitudes at the four detectors. Averages the encoded
/// phase differences 0 (errors are anticorrelated clicks) and pi (errors are
/// correlated clicks).
inline PhaseSample evaluate_phases(const ExperimentParams& p, const SourceIntensities& src,
                                   double phi_a, double phi_b) {
  const double amp_a = std::sqrt(p.eta_a * src.mu_a / 2.0);
  const double amp_b = std::sqrt(p.eta_b * src.mu_b / 2.0);
  const double h = 1.0 / std::numbers::sqrt2;

  PhaseSample acc{0.0, 0.0};
  for (const double theta_a : {0.0, std::numbers::pi}) {
    const Amplitude a_r = std::polar(amp_a, phi_a);
    const Amplitude a_s = std::polar(amp_a, phi_a + theta_a);
    const Amplitude b_r = std::polar(amp_b, phi_b);
    const Amplitude b_s = std::polar(amp_b, phi_b);
    // Coherent amplitudes map like the creation operators in relay_row.
    const std::array<Amplitude, kModes> out = {h * (a_r - b_r), h * (a_r + b_r), h * (a_s - b_s),
                                               h * (a_s + b_s)};
    std::array<double, kModes> click{};
    for (std::size_t i = 0; i < kModes; ++i) click[i] = 1.0 - (1.0 - p.p_d) * std::exp(-std::norm(out[i]));

    const double r0_only = click[kR0] * (1.0 - click[kR1]);
    const double r1_only = (1.0 - click[kR0]) * click[kR1];
    const double s0_only = click[kS0] * (1.0 - click[kS1]);
    const double s1_only = (1.0 - click[kS0]) * click[kS1];
    const double correlated = r0_only * s0_only + r1_only * s1_only;
    const double anticorrelated = r0_only * s1_only + r1_only * s0_only;
    acc.gain += 0.5 * (correlated + anticorrelated);
    acc.intrinsic_error += 0.5 * (theta_a == 0.0 ? anticorrelated : correlated);
  }
  return acc;
}

namespace detail {

// Streaming means and co-moments, mergeable in a fixed order (Chan et al.).
struct Moments {
  double n = 0.0;
  double mean_q = 0.0;
  double mean_e = 0.0;
  double m2_q = 0.0;
  double m2_e = 0.0;
  double c_qe = 0.0;

  void push(double q, double e) {
    n += 1.0;
    const double dq = q - mean_q;
    const double de = e - mean_e;
    mean_q += dq / n;
    mean_e += de / n;
    m2_q += dq * (q - mean_q);
    m2_e += de * (e - mean_e);
    c_qe += dq * (e - mean_e);
  }

  void merge(const Moments& o) {
    if (o.n == 0.0) return;
    const double total = n + o.n;
    const double dq = o.mean_q - mean_q;
    const double de = o.mean_e - mean_e;
    const double w = n * o.n / total;
    m2_q += o.m2_q + dq * dq * w;
    m2_e += o.m2_e + de * de * w;
    c_qe += o.c_qe + dq * de * w;
    mean_q += dq * o.n / total;
    mean_e += de * o.n / total;
    n = total;
  }
};

}  // namespace detail

struct McEstimate {
  std::uint64_t samples;
  double q_hat;         // mean gain given the band pair
  double eq_hat;        // mean intrinsic error product given the band pair
  double q_std_error;
  double eq_std_error;
  double qber_hat;      // eq_hat / q_hat
  double qber_std_error;  // delta method
};

/// Monte Carlo average of the per-phase gain and intrinsic error product over
/// Alice's band m and Bob's band 0. The estimates are conditional on the band
/// pair, i.e. N times the joint quantities Q^m and E'^m Q^m. Standard errors
/// are NaN for a single sample. Deterministic for a fixed (seed, samples,
/// partition) regardless of the worker count.
inline McEstimate mc_coherent_estimate(const ExperimentParams& p, const SourceIntensities& src,
                                       int n_partitions, int m, std::uint64_t samples,
                                       std::uint64_t seed, unsigned workers = 1) {
  if (samples < 1) throw std::invalid_argument("mc_coherent_estimate: samples must be >= 1");
  if (n_partitions < 1 || m < 0 || m >= n_partitions)
    throw std::invalid_argument("mc_coherent_estimate: invalid partition");
  const std::uint64_t blocks = (samples + kSamplesPerBlock - 1) / kSamplesPerBlock;
  std::vector<detail::Moments> per_block(blocks);

  auto run_block = [&](std::uint64_t b) {
    PhaseSampler sampler(seed, b, n_partitions, m);
    const std::uint64_t begin = b * kSamplesPerBlock;
    const std::uint64_t end = std::min(samples, begin + kSamplesPerBlock);
    detail::Moments acc;
    for (std::uint64_t i = begin; i < end; ++i) {
      const auto [phi_a, phi_b] = sampler.next();
      const PhaseSample s = evaluate_phases(p, src, phi_a, phi_b);
      acc.push(s.gain, s.intrinsic_error);
    }
    per_block[b] = acc;
  };

  workers = std::max(1u, std::min<unsigned>(workers, static_cast<unsigned>(blocks)));
  if (workers == 1) {
    for (std::uint64_t b = 0; b < blocks; ++b) run_block(b);
  } else {
    std::vector<std::jthread> pool;
    for (unsigned w = 0; w < workers; ++w) {
      pool.emplace_back([&, w] {
        for (std::uint64_t b = w; b < blocks; b += workers) run_block(b);
      });
    }
  }

  detail::Moments total;
  for (const detail::Moments& block : per_block) total.merge(block);

  const double n = total.n;
  McEstimate est{};
  est.samples = samples;
  est.q_hat = total.mean_q;
  est.eq_hat = total.mean_e;
  est.qber_hat = total.mean_q > 0.0 ? total.mean_e / total.mean_q : kRandomNoiseError;
  if (samples < 2) {
    est.q_std_error = est.eq_std_error = est.qber_std_error = std::nan("");
    return est;
  }
  const double var_q = total.m2_q / (n - 1.0);
  const double var_e = total.m2_e / (n - 1.0);
  const double cov = total.c_qe / (n - 1.0);
  est.q_std_error = std::sqrt(var_q / n);
  est.eq_std_error = std::sqrt(var_e / n);
  const double r = est.qber_hat;
  const double var_ratio = (var_e - 2.0 * r * cov + r * r * var_q) / (total.mean_q * total.mean_q);
  est.qber_std_error = std::sqrt(std::max(var_ratio, 0.0) / n);
  return est;
}

}  // namespace mdiqkd::oracle
