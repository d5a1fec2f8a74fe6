#pragma once

// Scheme dispatch, mean-photon-number optimization and loss sweeps.

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <exception>
#include <optional>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include "mdiqkd/decoy_coherent.hpp"
#include "mdiqkd/numerics.hpp"
#include "mdiqkd/params.hpp"
#include "mdiqkd/params_file.hpp"
#include "mdiqkd/phase_postselect.hpp"
#include "mdiqkd/single_photon.hpp"

namespace mdiqkd::sweep {

enum class Scheme { single_photon, xy_full_random, xy_postselect, xy_equal_phase, xz_original };

inline constexpr Scheme kAllSchemes[] = {Scheme::single_photon, Scheme::xy_full_random,
                                         Scheme::xy_postselect, Scheme::xy_equal_phase,
                                         Scheme::xz_original};

inline std::string_view scheme_name(Scheme s) {
  switch (s) {
    case Scheme::single_photon: return "single-photon";
    case Scheme::xy_full_random: return "xy-full-random";
    case Scheme::xy_postselect: return "xy-postselect";
    case Scheme::xy_equal_phase: return "xy-equal-phase";
    case Scheme::xz_original: return "xz-original";
  }
  return "?";
}

inline std::optional<Scheme> parse_scheme(std::string_view name) {
  for (Scheme s : kAllSchemes)
    if (scheme_name(s) == name) return s;
  return std::nullopt;
}

inline bool uses_coherent_source(Scheme s) { return s != Scheme::single_photon; }

/// Thrown when a rate cannot be evaluated; carries the offending point.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct SweepSpec {
  std::vector<Scheme> schemes{Scheme::xy_postselect};
  std::vector<double> loss_grid;
  int n_partitions = 8;
  bool optimize_mu = false;
  std::optional<double> fixed_mu;
  std::uint64_t seed = 1;
  decoy::Reconciliation reconciliation = decoy::Reconciliation::forward;
  unsigned workers = 0;  // 0: hardware concurrency

  void validate() const {
    if (schemes.empty()) throw std::invalid_argument("at least one scheme is required");
    if (loss_grid.empty()) throw std::invalid_argument("loss grid is empty");
    for (std::size_t i = 0; i < loss_grid.size(); ++i) {
      if (!(loss_grid[i] >= 0.0) || !std::isfinite(loss_grid[i]))
        throw std::invalid_argument("loss grid values must be finite and >= 0");
      if (i > 0 && !(loss_grid[i] > loss_grid[i - 1]))
        throw std::invalid_argument("loss grid must be strictly increasing");
    }
    if (optimize_mu && fixed_mu) throw std::invalid_argument("--mu and --optimize-mu are mutually exclusive");
    if (fixed_mu && !(*fixed_mu >= 0.0 && std::isfinite(*fixed_mu)))
      throw std::invalid_argument("mu must be finite and >= 0");
    if (n_partitions < 1) throw std::invalid_argument("partitions must be >= 1");
  }
};

/// One output row. Fields a scheme does not define stay empty.
struct SweepRow {
  Scheme scheme = Scheme::single_photon;
  std::optional<double> loss_db;
  double eta_a = 0.0;
  double eta_b = 0.0;
  std::optional<double> mu_opt;
  std::optional<double> q11;
  std::optional<double> e11;
  std::optional<double> q_mu;
  std::optional<double> e_mu;
  std::optional<double> q0_prime;
  std::optional<double> i_ec;
  double rate_raw = 0.0;
  double rate_clamped = 0.0;
};

namespace detail {

inline std::string describe(Scheme scheme, const ExperimentParams& p, const SourceIntensities& src) {
  std::ostringstream os;
  os.precision(9);
  os << scheme_name(scheme) << " at eta_a=" << p.eta_a << " eta_b=" << p.eta_b << " p_d=" << p.p_d
     << " mu_a=" << src.mu_a << " mu_b=" << src.mu_b;
  return os.str();
}

inline decoy::RatePoint rate_point(Scheme scheme, const ExperimentParams& p, const SourceIntensities& src,
                                   int n_partitions, decoy::Reconciliation direction) {
  switch (scheme) {
    case Scheme::xy_full_random: return decoy::key_rate_full_random(p, src, direction);
    case Scheme::xy_postselect: return postselect::key_rate_postselected(p, src, n_partitions);
    case Scheme::xy_equal_phase: return decoy::key_rate_equal_phase(p, src);
    case Scheme::xz_original: return decoy::key_rate_original_xz(p, src);
    case Scheme::single_photon: break;
  }
  throw std::logic_error("rate_point: single-photon scheme has no coherent source");
}

}  // namespace detail

/// Evaluates one scheme at one parameter setting.
inline SweepRow evaluate_point(Scheme scheme, const ExperimentParams& p, const SourceIntensities& src,
                               int n_partitions = 8,
                               decoy::Reconciliation direction = decoy::Reconciliation::forward) {
  p.validate();
  SweepRow row;
  row.scheme = scheme;
  row.eta_a = p.eta_a;
  row.eta_b = p.eta_b;
  try {
    if (scheme == Scheme::single_photon) {
      const auto err = single_photon::error_11(p);
      row.q11 = single_photon::yield_11(p);
      row.e11 = err.e11;
      row.rate_raw = single_photon::key_rate_single_photon(p);
    } else {
      src.validate();
      const decoy::RatePoint rp = detail::rate_point(scheme, p, src, n_partitions, direction);
      row.q11 = rp.q_11;
      row.e11 = rp.e_11;
      row.q_mu = rp.q_mu;
      row.e_mu = rp.e_mu;
      if (scheme != Scheme::xz_original) row.q0_prime = rp.q0_prime;
      row.i_ec = rp.i_ec;
      row.rate_raw = rp.rate;
    }
  } catch (const numerics::ConvergenceError& e) {
    throw NumericalError(std::string(e.what()) + " (" + detail::describe(scheme, p, src) + ")");
  }
  if (!std::isfinite(row.rate_raw))
    throw NumericalError("non-finite key rate (" + detail::describe(scheme, p, src) + ")");
  row.rate_clamped = std::max(0.0, row.rate_raw);
  return row;
}

/// Intensities for a common mu with eta_a mu_a = eta_b mu_b and mu_a mu_b = mu^2.
/// Symmetric channels get mu_a = mu_b = mu.
inline SourceIntensities balanced_intensities(const ExperimentParams& p, double mu) {
  if (p.eta_a == p.eta_b || p.eta_a == 0.0 || p.eta_b == 0.0) return {mu, mu};
  const double r = std::sqrt(p.eta_b / p.eta_a);
  return {mu * r, mu / r};
}

inline constexpr double kMuLower = 1e-4;
inline constexpr double kMuUpper = 10.0;
inline constexpr double kMuTolerance = 1e-6;

struct MuOptimum {
  double mu = 0.0;
  double rate = 0.0;
};

/// Maximizes the unclamped rate over mu in [1e-4, 10].
inline MuOptimum optimize_mu_at(const ExperimentParams& p, Scheme scheme, int n_partitions = 8,
                                decoy::Reconciliation direction = decoy::Reconciliation::forward) {
  if (!uses_coherent_source(scheme))
    throw std::invalid_argument("optimize_mu_at: single-photon scheme has no mean photon number");
  auto rate = [&](double mu) {
    return evaluate_point(scheme, p, balanced_intensities(p, mu), n_partitions, direction).rate_raw;
  };
  const numerics::Maximum best = numerics::maximize_scalar(rate, kMuLower, kMuUpper, kMuTolerance);
  return MuOptimum{best.argmax, best.value};
}

/// Rows for one scheme at one loss, honoring the requested mu choice. mu_a/mu_b
/// from the settings file win when neither --mu nor optimization is asked for.
inline SweepRow sweep_point(Scheme scheme, const ExperimentParams& p, const SweepSpec& spec,
                            const ParamSettings& settings) {
  if (!uses_coherent_source(scheme)) return evaluate_point(scheme, p, {}, spec.n_partitions, spec.reconciliation);
  SourceIntensities src;
  std::optional<double> mu;
  if (spec.fixed_mu) {
    mu = *spec.fixed_mu;
    src = balanced_intensities(p, *mu);
  } else if (!spec.optimize_mu && settings.mu_a) {
    src = {*settings.mu_a, *settings.mu_b};
  } else {
    mu = optimize_mu_at(p, scheme, spec.n_partitions, spec.reconciliation).mu;
    src = balanced_intensities(p, *mu);
  }
  SweepRow row = evaluate_point(scheme, p, src, spec.n_partitions, spec.reconciliation);
  row.mu_opt = mu;
  return row;
}

/// Every (scheme, loss) pair, scheme-major, loss in grid order. Points are
/// computed concurrently; the output order never depends on scheduling.
inline std::vector<SweepRow> run_sweep(const SweepSpec& spec, const ParamSettings& settings) {
  spec.validate();
  struct Job {
    Scheme scheme;
    double loss;
  };
  std::vector<Job> jobs;
  for (Scheme s : spec.schemes)
    for (double loss : spec.loss_grid) jobs.push_back({s, loss});

  std::vector<SweepRow> rows(jobs.size());
  std::vector<std::exception_ptr> errors(jobs.size());
  auto run = [&](std::size_t i) {
    try {
      rows[i] = sweep_point(jobs[i].scheme, settings.resolve(jobs[i].loss), spec, settings);
      rows[i].loss_db = jobs[i].loss;
    } catch (...) {
      errors[i] = std::current_exception();
    }
  };

  unsigned workers = spec.workers ? spec.workers : std::max(1u, std::thread::hardware_concurrency());
  workers = std::min<unsigned>(workers, static_cast<unsigned>(jobs.size()));
  {
    std::vector<std::jthread> pool;
    for (unsigned w = 0; w < workers; ++w)
      pool.emplace_back([&, w] {
        for (std::size_t i = w; i < jobs.size(); i += workers) run(i);
      });
  }
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);
  return rows;
}

inline constexpr const char* kCsvHeader =
    "scheme,loss_db,eta_a,eta_b,mu_opt,q11,e11,q_mu,e_mu,q0_prime,i_ec,rate_raw,rate_clamped";

inline std::string format_number(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

inline std::string format_field(const std::optional<double>& v) { return v ? format_number(*v) : std::string(); }

inline void write_csv(std::ostream& out, const std::vector<SweepRow>& rows) {
  out << kCsvHeader << '\n';
  for (const SweepRow& r : rows) {
    out << scheme_name(r.scheme) << ',' << format_field(r.loss_db) << ',' << format_number(r.eta_a) << ','
        << format_number(r.eta_b) << ',' << format_field(r.mu_opt) << ',' << format_field(r.q11) << ','
        << format_field(r.e11) << ',' << format_field(r.q_mu) << ',' << format_field(r.e_mu) << ','
        << format_field(r.q0_prime) << ',' << format_field(r.i_ec) << ',' << format_number(r.rate_raw) << ','
        << format_number(r.rate_clamped) << '\n';
  }
}

// QBER against the balanced arriving intensity s = eta_a mu_a = eta_b mu_b.

inline constexpr int kQberCurvePartitions[] = {1, 4, 8};

struct QberRow {
  double intensity;
  double x;
  std::vector<double> qber;  // aligned band m = 0 for each N in kQberCurvePartitions
};

inline std::vector<QberRow> qber_curve(const std::vector<double>& intensities, double p_d, double e_d) {
  std::vector<QberRow> rows;
  ExperimentParams p;
  p.eta_a = p.eta_b = 1.0;
  p.p_d = p_d;
  p.e_d = e_d;
  p.validate();
  for (double s : intensities) {
    if (!(s >= 0.0) || !std::isfinite(s)) throw std::invalid_argument("intensities must be finite and >= 0");
    const DerivedIntensity di = derive_intensity(p, {s, s});
    QberRow row{s, di.x, {}};
    for (int n : kQberCurvePartitions) {
      try {
        row.qber.push_back(postselect::conditional_qber(di, p.e_0, p.e_d, {n, 0}).e_m);
      } catch (const numerics::ConvergenceError& e) {
        throw NumericalError(std::string(e.what()) + " (qber at intensity " + format_number(s) + ")");
      }
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

inline void write_qber_csv(std::ostream& out, const std::vector<QberRow>& rows) {
  out << "intensity,x";
  for (int n : kQberCurvePartitions) out << ",qber_n" << n;
  out << '\n';
  for (const QberRow& r : rows) {
    out << format_number(r.intensity) << ',' << format_number(r.x);
    for (double q : r.qber) out << ',' << format_number(q);
    out << '\n';
  }
}

}  // namespace mdiqkd::sweep
