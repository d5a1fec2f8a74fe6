// Acceptance run: one PASS/FAIL line per criterion, nonzero exit if any fail.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <string>
#include <thread>
#include <vector>

#include "mdiqkd/mdiqkd.hpp"

using namespace mdiqkd;

namespace {

int failures = 0;

void report(const char* id, bool ok, const std::string& detail) {
  std::printf("criterion %-3s %s  %s\n", id, ok ? "PASS" : "FAIL", detail.c_str());
  std::fflush(stdout);
  if (!ok) ++failures;
}

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

DerivedIntensity balanced(double s) {
  // eta = 1, no dark counts, eta_a mu_a = eta_b mu_b = s
  ExperimentParams p;
  p.eta_a = p.eta_b = 1.0;
  p.p_d = 0.0;
  p.e_d = 0.0;
  return derive_intensity(p, {s, s});
}

constexpr double kEta[] = {0.0, 0.01, 0.145, 0.5, 1.0};
constexpr double kDark[] = {0.0, 1e-6, 1e-3};
constexpr double kMis[] = {0.0, 0.015};

void criterion_1() {
  const auto t0 = std::chrono::steady_clock::now();
  double worst = 0.0;
  for (double ea : kEta)
    for (double eb : kEta)
      for (double pd : kDark)
        for (double ed : kMis) {
          ExperimentParams p;
          p.eta_a = ea;
          p.eta_b = eb;
          p.p_d = pd;
          p.e_d = ed;
          const auto o = oracle::oracle_yield_and_error(ea, eb, pd, ed);
          worst = std::max(worst, std::abs(o.y11 - single_photon::yield_11(p)));
          worst = std::max(worst, std::abs(o.e11y11 - single_photon::error_11(p).e11_times_y11));
        }
  const double t = seconds_since(t0);
  report("1", worst <= 1e-12 && t < 1.0, fmt("max |oracle - closed form| = %.3e (tol 1e-12), %.3f s", worst, t));
}

void criterion_2() {
  double worst = 0.0;
  for (double x : {0.0, 0.05, 0.2, 1.0})
    for (double y : {0.5, 0.9, 0.99}) {
      const DerivedIntensity di{0.0, x, y};
      auto average = [&](auto g) {
        return numerics::integrate_1d([&](double d) { return g(di, d); }, 0.0, 2.0 * std::numbers::pi,
                                      {1e-13, 1000}) /
               (2.0 * std::numbers::pi);
      };
      const double q_quad = average(decoy::gain_at_phase);
      const double eq_quad = average(decoy::intrinsic_error_at_phase);
      worst = std::max(worst, std::abs(decoy::gain_full_random(di) - q_quad));
      worst = std::max(worst, std::abs(decoy::intrinsic_error_full_random(di) - eq_quad));
      // QBER with misalignment, both paths through the same fold.
      const auto closed = decoy::qber_full_random(di, 0.5, 0.015);
      const auto quad =
          decoy::make_qber(q_quad, decoy::total_error_product(q_quad, eq_quad, 0.5, 0.015), 0.5);
      worst = std::max(worst, std::abs(closed.e_mu - quad.e_mu));
    }
  report("2", worst <= 1e-9, fmt("max |closed form - quadrature| = %.3e (tol 1e-9)", worst));
}

void criterion_3() {
  const auto t0 = std::chrono::steady_clock::now();
  double worst = 0.0;
  for (const DerivedIntensity& di :
       {DerivedIntensity{0.0, 0.05, 0.9}, DerivedIntensity{0.0, 0.5, 0.6}, balanced(0.01), balanced(0.5)})
    for (int n : {2, 4, 8}) {
      double q = 0.0;
      double e = 0.0;
      for (int m = 0; m < n; ++m) {
        // conditional (per-band-pair) values are N times the joint ones
        q += n * postselect::conditional_gain(di, {n, m});
        e += n * postselect::conditional_intrinsic_error(di, {n, m});
      }
      worst = std::max(worst, std::abs(q / n - decoy::gain_full_random(di)));
      worst = std::max(worst, std::abs(e / n - decoy::intrinsic_error_full_random(di)));
    }
  report("3", worst <= 1e-9, fmt("max |band average - full| = %.3e (tol 1e-9), %.2f s", worst, seconds_since(t0)));
}

void criterion_4() {
  bool ok = true;
  std::string detail;
  for (double s : {1e-4, 1e-3}) {
    const DerivedIntensity di = balanced(s);
    const double full = decoy::qber_full_random(di, 0.5, 0.0).e_mu;
    const double n4 = postselect::conditional_qber(di, 0.5, 0.0, {4, 0}).e_m;
    const double n8 = postselect::conditional_qber(di, 0.5, 0.0, {8, 0}).e_m;
    ok = ok && std::abs(full - 0.25) <= 0.005 && n4 < 0.05 && n8 < 0.013 * 1.05;
    detail += fmt("[eta mu=%g: full %.5f, N=4 %.5f, N=8 %.5f] ", s, full, n4, n8);
  }
  report("4", ok, detail + "(need 0.25+-0.005, <0.05, <0.01365)");
}

void criterion_5() {
  // Weak-light expansions vs quadrature, halving mu' from 0.05 and 0.02.
  double q_lo = 1e300, q_hi = 0.0, e_lo = 1e300, e_hi = 0.0;
  for (int n : {4, 8})
    for (int m : {0, 1})
      for (double mu_prime : {0.05, 0.02}) {
        auto residuals = [&](double mp) {
          const DerivedIntensity di = balanced(mp / 2.0);
          const auto approx = postselect::approx_conditional_rates(di, 0.0, {n, m});
          const auto exact = postselect::conditional_qber(di, 0.5, 0.0, {n, m}, {1e-15, 2000});
          return std::pair{std::abs(approx.q_m - exact.q_m), std::abs(approx.eq_m - exact.eq_m_intrinsic)};
        };
        const auto [qb, eb] = residuals(mu_prime);
        const auto [qs, es] = residuals(mu_prime / 2.0);
        q_lo = std::min(q_lo, qb / qs);
        q_hi = std::max(q_hi, qb / qs);
        e_lo = std::min(e_lo, eb / es);
        e_hi = std::max(e_hi, eb / es);
      }
  report("5a", q_lo >= 6.0 && q_hi <= 10.0,
         fmt("gain residual ratio on halving mu' in [%.3f, %.3f] (need [6, 10])", q_lo, q_hi));
  report("5b", e_lo >= 6.0 && e_hi <= 10.0,
         fmt("error-product residual ratio on halving mu' in [%.3f, %.3f] (need [6, 10])", e_lo, e_hi));
}

struct Optimized {
  double rate;
  double mu;
};

Optimized optimized(sweep::Scheme s, const ExperimentParams& p) {
  const auto best = sweep::optimize_mu_at(p, s, 8);
  return {best.rate, best.mu};
}

void criterion_6() {
  bool ok = true;
  std::string detail;
  for (double loss : {0.0, 10.0}) {
    const ExperimentParams p = ParamSettings{}.resolve(loss);
    const auto xy = optimized(sweep::Scheme::xy_postselect, p);
    const auto xz = optimized(sweep::Scheme::xz_original, p);
    ok = ok && xy.mu >= 0.1 && xy.mu <= 3.0 && xy.mu < xz.mu;
    detail += fmt("[%g dB: xy mu %.4f, xz mu %.4f] ", loss, xy.mu, xz.mu);
  }
  report("6", ok, detail + "(need xy mu in [0.1, 3] and below xz)");
}

void criterion_7() {
  bool ok = true;
  std::string detail;
  for (double loss : {0.0, 10.0, 20.0}) {
    const ExperimentParams p = ParamSettings{}.resolve(loss);
    const double single = single_photon::key_rate_single_photon(p);
    const double xz = optimized(sweep::Scheme::xz_original, p).rate;
    const double xy = optimized(sweep::Scheme::xy_postselect, p).rate;
    ok = ok && single >= xz && xz >= xy && xy > 0.0;
    detail += fmt("[%g dB: %.3e >= %.3e >= %.3e > 0] ", loss, single, xz, xy);
  }
  double cutoff = -1.0;
  for (double loss = 0.0; loss <= 100.0; loss += 1.0)
    if (optimized(sweep::Scheme::xy_postselect, ParamSettings{}.resolve(loss)).rate <= 0.0) {
      cutoff = loss;
      break;
    }
  ok = ok && cutoff > 0.0;
  detail += cutoff > 0.0 ? fmt("xy-postselect <= 0 from %g dB", cutoff) : std::string("no sign change up to 100 dB");
  report("7", ok, detail);
}

void criterion_8() {
  struct Setting {
    double eta_a, eta_b, mu_a, mu_b;
    int n, m;
  };
  const Setting settings[] = {
      {0.145, 0.145, 0.5, 0.5, 1, 0},
      {0.145, 0.145, 0.4, 0.4, 8, 0},
      {0.3, 0.02, 0.2, 1.5, 4, 1},
  };
  const unsigned workers = std::max(1u, std::thread::hardware_concurrency());
  const std::uint64_t samples = 1000000;
  bool ok = true;
  std::string detail;
  std::uint64_t seed = 2024;
  for (const Setting& s : settings) {
    ExperimentParams p;
    p.eta_a = s.eta_a;
    p.eta_b = s.eta_b;
    const SourceIntensities src{s.mu_a, s.mu_b};
    const DerivedIntensity di = derive_intensity(p, src);
    const auto est = oracle::mc_coherent_estimate(p, src, s.n, s.m, samples, seed++, workers);
    const double q = s.n * postselect::conditional_gain(di, {s.n, s.m});
    const double eq = s.n * postselect::conditional_intrinsic_error(di, {s.n, s.m});
    const double zq = std::abs(est.q_hat - q) / est.q_std_error;
    const double ze = std::abs(est.qber_hat - eq / q) / est.qber_std_error;
    ok = ok && zq <= 3.0 && ze <= 3.0;
    detail += fmt("[N=%d m=%d: %.2f, %.2f se] ", s.n, s.m, zq, ze);
  }
  ExperimentParams p;
  const SourceIntensities src{0.5, 0.5};
  const auto one = oracle::mc_coherent_estimate(p, src, 4, 1, samples, seed, workers);
  const auto two = oracle::mc_coherent_estimate(p, src, 4, 1, 2 * samples, seed + 1, workers);
  const double ratio = two.q_std_error / one.q_std_error;
  const double target = 1.0 / std::numbers::sqrt2;
  ok = ok && ratio >= 0.8 * target && ratio <= 1.2 * target;
  detail += fmt("se ratio on doubling %.4f (need %.4f +-20%%)", ratio, target);
  report("8", ok, detail);
}

void criterion_9() {
  std::vector<std::string> failed;
  auto check = [&](const char* name, bool ok) {
    if (!ok) failed.push_back(name);
  };

  bool sym = true, concave = true;
  for (double x = 0.0; x <= 1.0; x += 1.0 / 64)
    sym = sym && std::abs(numerics::binary_entropy(x) - numerics::binary_entropy(1.0 - x)) <= 1e-15;
  for (double a = 0.0; a <= 1.0; a += 1.0 / 16)
    for (double b = 0.0; b <= 1.0; b += 1.0 / 16)
      concave = concave && numerics::binary_entropy((a + b) / 2) + 1e-15 >=
                               (numerics::binary_entropy(a) + numerics::binary_entropy(b)) / 2;
  check("entropy symmetry", sym);
  check("entropy concavity", concave);

  double bessel = 0.0;
  for (double x : {0.0, 0.1, 0.5, 1.0, 2.0, 5.0, 10.0, 20.0}) {
    const double integral =
        numerics::integrate_1d([x](double t) { return std::exp(x * std::cos(t)); }, 0.0, std::numbers::pi,
                               {1e-13, 2000}) /
        std::numbers::pi;
    bessel = std::max(bessel, std::abs(integral / numerics::bessel_i0(x) - 1.0));
  }
  check("bessel series vs integral", bessel <= 1e-10);

  bool swap = true;
  for (double ea : kEta)
    for (double eb : kEta)
      for (double pd : kDark) {
        ExperimentParams p, q;
        p.eta_a = q.eta_b = ea;
        p.eta_b = q.eta_a = eb;
        p.p_d = q.p_d = pd;
        const double y = single_photon::yield_11(p);
        swap = swap && std::abs(y - single_photon::yield_11(q)) <= 1e-13 * std::max(y, 1e-300);
        const double e = single_photon::error_11(p).e11_times_y11;
        swap = swap && std::abs(e - single_photon::error_11(q).e11_times_y11) <= 1e-13 * std::max(y, 1e-300);
        const auto c = oracle::evolve_single_photon_pair(0.0, std::numbers::pi, ea, eb, pd);
        const auto d = oracle::evolve_single_photon_pair(std::numbers::pi, 0.0, eb, ea, pd);
        for (unsigned i = 0; i < 16; ++i) {
          const unsigned mirrored = ((i & 1u) << 1) | ((i & 2u) >> 1) | ((i & 4u) << 1) | ((i & 8u) >> 1);
          swap = swap && std::abs(c[i].probability - d[mirrored].probability) <= 1e-14;
        }
        ExperimentParams r = p;
        r.eta_a = std::max(ea, 1e-3);
        r.eta_b = std::max(eb, 1e-3);
        ExperimentParams rs = r;
        std::swap(rs.eta_a, rs.eta_b);
        const double g = decoy::gain_full_random(derive_intensity(r, {0.3, 0.7}));
        swap = swap && std::abs(g - decoy::gain_full_random(derive_intensity(rs, {0.7, 0.3}))) <= 1e-13 * g;
      }
  check("swap symmetry", swap);

  bool monotone = true;
  for (double mu_prime : {0.01, 0.1, 1.0, 3.0}) {
    const double y = std::exp(-mu_prime / 4.0);
    double prev = INFINITY;
    for (int k = 0; k <= 50; ++k) {
      const double x = mu_prime / 4.0 * k / 50.0;  // x <= mu'/4 at fixed mu'
      const double v = decoy::intrinsic_error_full_random({mu_prime, x, y});
      monotone = monotone && v <= prev * (1.0 + 1e-12);
      prev = v;
    }
  }
  check("intrinsic error decreasing in x", monotone);

  bool balanced_min = true;
  for (double mu_prime : {0.01, 0.3, 1.0})
    for (int n : {1, 8}) {
      auto qber = [&](double t) {
        ExperimentParams p;
        p.eta_a = p.eta_b = 1.0;
        const auto di = derive_intensity(p, {t * mu_prime, (1.0 - t) * mu_prime});
        return n == 1 ? decoy::qber_full_random(di, p.e_0, p.e_d).e_mu
                      : postselect::conditional_qber(di, p.e_0, p.e_d, {n, 0}).e_m;
      };
      const double at_half = qber(0.5);
      for (double t : {0.05, 0.2, 0.4, 0.6, 0.8, 0.95}) balanced_min = balanced_min && qber(t) >= at_half - 1e-12;
    }
  check("balanced intensities minimize QBER", balanced_min);

  double norm = 0.0;
  for (double ea : kEta)
    for (double eb : kEta)
      for (double pd : kDark)
        for (double ta : {0.0, 0.7, std::numbers::pi})
          for (double tb : {0.0, 2.1}) {
            double total = 0.0;
            for (const auto& c : oracle::evolve_single_photon_pair(ta, tb, ea, eb, pd)) total += c.probability;
            norm = std::max(norm, std::abs(total - 1.0));
          }
  check("16-pattern normalization", norm <= 1e-12);

  std::string detail = "8 properties";
  if (!failed.empty()) {
    detail += "; failed:";
    for (const auto& f : failed) detail += " " + f + ";";
  }
  report("9", failed.empty(), detail);
}

}  // namespace

int main() {
  criterion_1();
  criterion_2();
  criterion_3();
  criterion_4();
  criterion_5();
  criterion_6();
  criterion_7();
  criterion_8();
  criterion_9();
  std::printf("%s: %d criteria failed\n", failures ? "FAIL" : "PASS", failures);
  return failures ? 1 : 0;
}
