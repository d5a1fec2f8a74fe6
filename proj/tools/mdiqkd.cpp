// Command-line front end: key-rate sweeps, QBER curves, mu optimization,
// single points and the verification suite.
//
// Exit status: 0 ok, 1 usage or parse error, 2 numerical failure,
// 3 verification failure.

#include <cmath>
#include <cstdint>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "mdiqkd/mdiqkd.hpp"

namespace {

using namespace mdiqkd;
using sweep::Scheme;

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitNumerical = 2;
constexpr int kExitVerify = 3;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// "start:stop:step" (stop included) or "a,b,c".
std::vector<double> parse_grid(const std::string& text, const char* what) {
  auto number = [&](const std::string& s) {
    const auto v = mdiqkd::detail::to_double(mdiqkd::detail::trim(s));
    if (!v) throw UsageError(std::string(what) + ": not a number: '" + s + "'");
    return *v;
  };
  std::vector<double> out;
  if (text.find(':') != std::string::npos) {
    std::vector<std::string> parts;
    std::stringstream ss(text);
    for (std::string part; std::getline(ss, part, ':');) parts.push_back(part);
    if (parts.size() != 3) throw UsageError(std::string(what) + ": expected start:stop:step");
    const double start = number(parts[0]);
    const double stop = number(parts[1]);
    const double step = number(parts[2]);
    if (!(step > 0.0)) throw UsageError(std::string(what) + ": step must be > 0");
    if (start > stop) throw UsageError(std::string(what) + ": start exceeds stop");
    const auto count = static_cast<long>(std::floor((stop - start) / step + 1e-9)) + 1;
    if (count > 100000) throw UsageError(std::string(what) + ": too many grid points");
    for (long i = 0; i < count; ++i) out.push_back(start + static_cast<double>(i) * step);
  } else {
    std::stringstream ss(text);
    for (std::string part; std::getline(ss, part, ',');) out.push_back(number(part));
  }
  if (out.empty()) throw UsageError(std::string(what) + ": empty grid");
  return out;
}

std::vector<Scheme> parse_schemes(const std::string& text) {
  std::vector<Scheme> out;
  std::stringstream ss(text);
  for (std::string part; std::getline(ss, part, ',');) {
    const auto s = sweep::parse_scheme(mdiqkd::detail::trim(part));
    if (!s) throw UsageError("unknown scheme '" + part + "'");
    out.push_back(*s);
  }
  if (out.empty()) throw UsageError("no scheme given");
  return out;
}

nlohmann::json optional_json(const std::optional<double>& v) { return v ? nlohmann::json(*v) : nlohmann::json(); }

nlohmann::json rows_json(const std::vector<sweep::SweepRow>& rows) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& r : rows) {
    arr.push_back({{"scheme", std::string(sweep::scheme_name(r.scheme))},
                   {"loss_db", optional_json(r.loss_db)},
                   {"eta_a", r.eta_a},
                   {"eta_b", r.eta_b},
                   {"mu_opt", optional_json(r.mu_opt)},
                   {"q11", optional_json(r.q11)},
                   {"e11", optional_json(r.e11)},
                   {"q_mu", optional_json(r.q_mu)},
                   {"e_mu", optional_json(r.e_mu)},
                   {"q0_prime", optional_json(r.q0_prime)},
                   {"i_ec", optional_json(r.i_ec)},
                   {"rate_raw", r.rate_raw},
                   {"rate_clamped", r.rate_clamped}});
  }
  return arr;
}

struct Common {
  std::string params_path;
  std::string out_path;
  std::string format = "csv";
  std::optional<double> sift_factor;
  std::string reconciliation = "forward";
};

struct RateOptions {
  std::string schemes;
  std::string loss = "0:40:5";
  int partitions = 8;
  std::optional<double> mu;
  bool optimize_mu = false;
  unsigned workers = 0;
};

ParamSettings load_settings(const Common& c) {
  ParamSettings s = c.params_path.empty() ? ParamSettings{} : load_params(c.params_path);
  if (c.sift_factor) {
    s.sift_factor = *c.sift_factor;
    s.resolve();  // range check
  }
  return s;
}

decoy::Reconciliation reconciliation_of(const Common& c) {
  return c.reconciliation == "reverse" ? decoy::Reconciliation::reverse : decoy::Reconciliation::forward;
}

void emit(const Common& c, const std::string& text) {
  if (c.out_path.empty()) {
    std::cout << text;
    return;
  }
  std::ofstream out(c.out_path);
  if (!out) throw UsageError("cannot write '" + c.out_path + "'");
  out << text;
  if (!out) throw UsageError("write failed for '" + c.out_path + "'");
}

std::string render_rows(const Common& c, const std::vector<sweep::SweepRow>& rows) {
  std::ostringstream os;
  if (c.format == "json") os << rows_json(rows).dump(2) << '\n';
  else sweep::write_csv(os, rows);
  return os.str();
}

sweep::SweepSpec make_spec(const RateOptions& r, const Common& c, std::optional<bool> force_optimize) {
  sweep::SweepSpec spec;
  spec.schemes = parse_schemes(r.schemes);
  spec.loss_grid = parse_grid(r.loss, "--loss-db");
  spec.n_partitions = r.partitions;
  spec.fixed_mu = r.mu;
  spec.optimize_mu = force_optimize.value_or(r.optimize_mu);
  spec.reconciliation = reconciliation_of(c);
  spec.workers = r.workers;
  try {
    spec.validate();
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  return spec;
}

void add_common(CLI::App* app, Common& c) {
  app->add_option("--params", c.params_path, "Parameter file (key = value)")->check(CLI::ExistingFile);
  app->add_option("--out", c.out_path, "Write output here instead of stdout");
  app->add_option("--format", c.format, "Output format")->check(CLI::IsMember({"csv", "json"}));
  app->add_option("--sift-factor", c.sift_factor, "Multiplier on every key rate, in (0, 1]");
  app->add_option("--reconciliation", c.reconciliation, "Direction of classical post-processing")
      ->check(CLI::IsMember({"forward", "reverse"}));
}

void add_rate(CLI::App* app, RateOptions& r, bool single_loss) {
  app->add_option("--scheme", r.schemes,
                  "single-photon, xy-full-random, xy-postselect, xy-equal-phase, xz-original "
                  "(comma-separated)");
  app->add_option("--loss-db", r.loss,
                  single_loss ? "Total channel loss in dB" : "Loss grid: start:stop:step or a,b,c");
  app->add_option("--partitions", r.partitions, "Phase partitions N for xy-postselect")
      ->check(CLI::IsMember({1, 2, 4, 8, 16}));
  app->add_option("--workers", r.workers, "Worker threads (0: all cores)");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"MDI-QKD key-rate simulator"};
  app.require_subcommand(1);

  Common common;
  RateOptions keyrate_opt;
  keyrate_opt.schemes = "xy-postselect,xz-original";
  RateOptions optmu_opt = keyrate_opt;
  RateOptions point_opt;
  point_opt.schemes = "xy-postselect";
  point_opt.loss.clear();
  std::string intensities = "0.0001,0.0002,0.0005,0.001,0.002,0.005,0.01,0.02,0.05,0.1,0.2,0.5,1";
  std::uint64_t seed = 1;
  std::uint64_t samples = 1000000;
  double tolerance_scale = 1.0;

  auto* keyrate = app.add_subcommand("keyrate", "Key rate against channel loss");
  add_common(keyrate, common);
  add_rate(keyrate, keyrate_opt, false);
  auto* mu_flag = keyrate->add_option("--mu", keyrate_opt.mu, "Fixed mean photon number");
  keyrate->add_flag("--optimize-mu", keyrate_opt.optimize_mu, "Optimize mu at each loss")->excludes(mu_flag);

  auto* optmu = app.add_subcommand("optmu", "Optimal mean photon number against channel loss");
  add_common(optmu, common);
  add_rate(optmu, optmu_opt, false);

  auto* point = app.add_subcommand("point", "One row at one parameter setting");
  add_common(point, common);
  add_rate(point, point_opt, true);
  auto* point_mu = point->add_option("--mu", point_opt.mu, "Fixed mean photon number");
  point->add_flag("--optimize-mu", point_opt.optimize_mu, "Optimize mu")->excludes(point_mu);

  auto* qber = app.add_subcommand("qber", "QBER against balanced arriving intensity, N = 1, 4, 8");
  add_common(qber, common);
  qber->add_option("--intensity", intensities, "eta_a mu_a = eta_b mu_b grid: start:stop:step or a,b,c");

  auto* verify_cmd = app.add_subcommand("verify", "Cross-check closed forms against independent oracles");
  add_common(verify_cmd, common);
  verify_cmd->add_option("--seed", seed, "Monte Carlo seed");
  verify_cmd->add_option("--samples", samples, "Monte Carlo samples per setting")->check(CLI::PositiveNumber);
  verify_cmd->add_option("--tolerance-scale", tolerance_scale)->group("");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (keyrate->parsed() || optmu->parsed()) {
      const bool is_optmu = optmu->parsed();
      const RateOptions& r = is_optmu ? optmu_opt : keyrate_opt;
      const sweep::SweepSpec spec = make_spec(r, common, is_optmu ? std::optional<bool>(true) : std::nullopt);
      if (is_optmu)
        for (Scheme s : spec.schemes)
          if (!sweep::uses_coherent_source(s)) throw UsageError("optmu needs coherent-source schemes");
      emit(common, render_rows(common, sweep::run_sweep(spec, load_settings(common))));
    } else if (point->parsed()) {
      const ParamSettings settings = load_settings(common);
      RateOptions one = point_opt;
      one.loss = "0";  // the real loss is resolved below
      one.workers = 1;
      sweep::SweepSpec spec = make_spec(one, common, std::nullopt);
      if (spec.schemes.size() != 1) throw UsageError("point takes exactly one scheme");
      std::optional<double> loss;
      if (!point_opt.loss.empty()) {
        const auto grid = parse_grid(point_opt.loss, "--loss-db");
        if (grid.size() != 1) throw UsageError("point takes a single --loss-db value");
        loss = grid.front();
      }
      const ExperimentParams p = settings.resolve(loss);
      if (sweep::uses_coherent_source(spec.schemes.front()) && !spec.fixed_mu && !spec.optimize_mu &&
          !settings.mu_a)
        spec.optimize_mu = true;
      sweep::SweepRow row = sweep::sweep_point(spec.schemes.front(), p, spec, settings);
      if (loss) row.loss_db = loss;
      else if (!settings.has_direct_channel()) row.loss_db = settings.loss_db.value_or(0.0);
      emit(common, render_rows(common, {row}));
    } else if (qber->parsed()) {
      ParamSettings settings = load_settings(common);
      // The curve is defined without background noise or misalignment unless
      // a parameter file says otherwise.
      const double p_d = common.params_path.empty() ? 0.0 : settings.p_d;
      const double e_d = common.params_path.empty() ? 0.0 : settings.e_d;
      const auto rows = sweep::qber_curve(parse_grid(intensities, "--intensity"), p_d, e_d);
      std::ostringstream os;
      if (common.format == "json") {
        nlohmann::json arr = nlohmann::json::array();
        for (const auto& r : rows) {
          nlohmann::json obj{{"intensity", r.intensity}, {"x", r.x}};
          for (std::size_t i = 0; i < r.qber.size(); ++i)
            obj["qber_n" + std::to_string(sweep::kQberCurvePartitions[i])] = r.qber[i];
          arr.push_back(obj);
        }
        os << arr.dump(2) << '\n';
      } else {
        sweep::write_qber_csv(os, rows);
      }
      emit(common, os.str());
    } else if (verify_cmd->parsed()) {
      const ParamSettings settings = load_settings(common);
      verify::Options opt;
      opt.seed = seed;
      opt.samples = samples;
      opt.tolerance_scale = tolerance_scale;
      const verify::Report report = verify::run_verify(settings.resolve(), opt);
      emit(common, report.render());
      return report.passed() ? kExitOk : kExitVerify;
    }
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const ParseError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::domain_error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const sweep::NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << '\n';
    return kExitNumerical;
  } catch (const numerics::ConvergenceError& e) {
    std::cerr << "numerical failure: " << e.what() << '\n';
    return kExitNumerical;
  } catch (const std::exception& e) {
    std::cerr << "numerical failure: " << e.what() << '\n';
    return kExitNumerical;
  }
  return kExitOk;
}
