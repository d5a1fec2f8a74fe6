#pragma once

// Cross-checks of the closed forms against independent computations: the
// Fock-space oracle, brute-force quadrature and seeded Monte Carlo.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <numbers>
#include <string>
#include <thread>
#include <vector>

#include "mdiqkd/decoy_coherent.hpp"
#include "mdiqkd/fock_oracle.hpp"
#include "mdiqkd/numerics.hpp"
#include "mdiqkd/params.hpp"
#include "mdiqkd/phase_postselect.hpp"
#include "mdiqkd/single_photon.hpp"

namespace mdiqkd::verify {

struct Check {
  std::string name;
  double discrepancy;
  double tolerance;
  bool passed;
};

struct Report {
  std::vector<Check> checks;

  bool passed() const {
    return std::all_of(checks.begin(), checks.end(), [](const Check& c) { return c.passed; });
  }

  /// Fixed-width text, one check per line, then an overall verdict.
  std::string render() const {
    std::string out;
    char line[256];
    for (const Check& c : checks) {
      std::snprintf(line, sizeof line, "%-44s discrepancy %.6e  tolerance %.6e  %s\n", c.name.c_str(),
                    c.discrepancy, c.tolerance, c.passed ? "PASS" : "FAIL");
      out += line;
    }
    out += passed() ? "overall PASS\n" : "overall FAIL\n";
    return out;
  }
};

struct Options {
  std::uint64_t seed = 1;
  std::uint64_t samples = 1000000;
  double tolerance_scale = 1.0;  // test hook; 1 keeps the stated tolerances
  unsigned workers = 0;          // 0: hardware concurrency
};

namespace detail {

constexpr double kEtaGrid[] = {0.0, 0.01, 0.145, 0.5, 1.0};
constexpr double kDarkGrid[] = {0.0, 1e-6, 1e-3};
constexpr double kMisalignmentGrid[] = {0.0, 0.015};

inline void add(Report& r, const std::string& name, double discrepancy, double tolerance, double scale) {
  const double tol = tolerance * scale;
  r.checks.push_back({name, discrepancy, tol, std::isfinite(discrepancy) && discrepancy <= tol});
}

}  // namespace detail

/// Runs every check. The Monte Carlo settings are built from base's
/// detector and post-processing constants.
inline Report run_verify(const ExperimentParams& base, const Options& opt = {}) {
  using namespace detail;
  Report report;
  const double k = opt.tolerance_scale;
  const unsigned workers = opt.workers ? opt.workers : std::max(1u, std::thread::hardware_concurrency());

  // Fock oracle vs single-photon closed forms.
  double yield_gap = 0.0;
  double error_gap = 0.0;
  for (double ea : kEtaGrid)
    for (double eb : kEtaGrid)
      for (double pd : kDarkGrid)
        for (double ed : kMisalignmentGrid) {
          ExperimentParams p = base;
          p.eta_a = ea;
          p.eta_b = eb;
          p.p_d = pd;
          p.e_d = ed;
          const oracle::OracleYield o = oracle::oracle_yield_and_error(ea, eb, pd, ed);
          yield_gap = std::max(yield_gap, std::abs(o.y11 - single_photon::yield_11(p)));
          error_gap = std::max(error_gap, std::abs(o.e11y11 - single_photon::error_11(p).e11_times_y11));
        }
  add(report, "oracle: Y11", yield_gap, 1e-12, k);
  add(report, "oracle: e11 Y11", error_gap, 1e-12, k);

  // Pattern normalization and the party-swap relabeling.
  double norm_gap = 0.0;
  double swap_gap = 0.0;
  for (double ea : kEtaGrid)
    for (double eb : kEtaGrid)
      for (double pd : kDarkGrid)
        for (double ta : {0.0, 0.9, std::numbers::pi}) {
          const auto c = oracle::evolve_single_photon_pair(ta, 0.4, ea, eb, pd);
          const auto d = oracle::evolve_single_photon_pair(0.4, ta, eb, ea, pd);
          double total = 0.0;
          for (unsigned i = 0; i < 16; ++i) {
            total += c[i].probability;
            const unsigned mirrored = ((i & 1u) << 1) | ((i & 2u) >> 1) | ((i & 4u) << 1) | ((i & 8u) >> 1);
            swap_gap = std::max(swap_gap, std::abs(c[i].probability - d[mirrored].probability));
          }
          norm_gap = std::max(norm_gap, std::abs(total - 1.0));
        }
  add(report, "oracle: pattern normalization", norm_gap, 1e-12, k);
  add(report, "oracle: party swap", swap_gap, 1e-14, k);

  // I0 series vs its integral form.
  double bessel_gap = 0.0;
  for (double x : {0.0, 0.5, 1.0, 2.0, 5.0, 10.0}) {
    const double integral =
        numerics::integrate_1d([x](double t) { return std::exp(x * std::cos(t)); }, 0.0, std::numbers::pi,
                               {1e-13, 2000}) /
        std::numbers::pi;
    bessel_gap = std::max(bessel_gap, std::abs(integral - numerics::bessel_i0(x)));
  }
  add(report, "bessel: series vs integral", bessel_gap, 1e-10, k);

  // Phase-averaged closed forms vs 1-D quadrature.
  double gain_gap = 0.0;
  double intrinsic_gap = 0.0;
  for (double x : {0.0, 0.05, 0.2, 1.0})
    for (double y : {0.5, 0.9, 0.99}) {
      const DerivedIntensity di{0.0, x, y};
      auto average = [&](auto g) {
        return numerics::integrate_1d([&](double d) { return g(di, d); }, 0.0, 2.0 * std::numbers::pi,
                                      {1e-12, 500}) /
               (2.0 * std::numbers::pi);
      };
      gain_gap = std::max(gain_gap, std::abs(decoy::gain_full_random(di) - average(decoy::gain_at_phase)));
      intrinsic_gap = std::max(intrinsic_gap, std::abs(decoy::intrinsic_error_full_random(di) -
                                                       average(decoy::intrinsic_error_at_phase)));
    }
  add(report, "full randomization: gain", gain_gap, 1e-9, k);
  add(report, "full randomization: intrinsic error", intrinsic_gap, 1e-9, k);

  // Band sums vs full randomization.
  double band_gain_gap = 0.0;
  double band_error_gap = 0.0;
  for (const DerivedIntensity di : {DerivedIntensity{0.0, 0.05, 0.9}, DerivedIntensity{0.0, 0.5, 0.6}})
    for (int n : {2, 4, 8}) {
      double q = 0.0;
      double e = 0.0;
      for (int m = 0; m < n; ++m) {
        q += postselect::conditional_gain(di, {n, m});
        e += postselect::conditional_intrinsic_error(di, {n, m});
      }
      band_gain_gap = std::max(band_gain_gap, std::abs(q - decoy::gain_full_random(di)));
      band_error_gap = std::max(band_error_gap, std::abs(e - decoy::intrinsic_error_full_random(di)));
    }
  add(report, "partitions: gain sum", band_gain_gap, 1e-9, k);
  add(report, "partitions: intrinsic error sum", band_error_gap, 1e-9, k);

  // Monte Carlo phase averages, in units of standard errors.
  struct Setting {
    const char* name;
    double eta_a, eta_b, mu_a, mu_b;
    int n, m;
  };
  const Setting settings[] = {
      {"mc: N=1 gain", 0.145, 0.145, 0.5, 0.5, 1, 0},
      {"mc: N=8 m=0 qber", 0.145, 0.145, 0.4, 0.4, 8, 0},
      {"mc: N=4 m=1 qber (asymmetric)", 0.3, 0.02, 0.2, 1.5, 4, 1},
  };
  std::uint64_t stream = 0;
  for (const Setting& s : settings) {
    ExperimentParams p = base;
    p.eta_a = s.eta_a;
    p.eta_b = s.eta_b;
    const SourceIntensities src{s.mu_a, s.mu_b};
    const DerivedIntensity di = derive_intensity(p, src);
    const oracle::McEstimate est =
        oracle::mc_coherent_estimate(p, src, s.n, s.m, opt.samples, opt.seed + stream++, workers);
    const double q_target = s.n * postselect::conditional_gain(di, {s.n, s.m});
    const double e_target = s.n * postselect::conditional_intrinsic_error(di, {s.n, s.m});
    add(report, std::string(s.name) + " gain [se]", std::abs(est.q_hat - q_target) / est.q_std_error, 3.0, k);
    add(report, std::string(s.name) + " ratio [se]",
        std::abs(est.qber_hat - e_target / q_target) / est.qber_std_error, 3.0, k);
  }

  // Standard error at 4x samples is half.
  {
    ExperimentParams p = base;
    const SourceIntensities src{0.5, 0.5};
    const std::uint64_t n = std::max<std::uint64_t>(opt.samples / 4, 1000);
    const auto small = oracle::mc_coherent_estimate(p, src, 4, 1, n, opt.seed + stream, workers);
    const auto large = oracle::mc_coherent_estimate(p, src, 4, 1, 4 * n, opt.seed + stream + 1, workers);
    add(report, "mc: standard error at 4x samples / 0.5 - 1",
        std::abs(large.q_std_error / small.q_std_error / 0.5 - 1.0), 0.2, k);
  }
  return report;
}

}  // namespace mdiqkd::verify
