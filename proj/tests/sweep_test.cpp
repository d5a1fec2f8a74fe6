#include <gtest/gtest.h>

#include <cmath>
#include <sstream>
#include <string>

#include "mdiqkd/sweep.hpp"

using namespace mdiqkd;
using namespace mdiqkd::sweep;

namespace {

ExperimentParams at_loss(double loss_db, double p_d = reference::dark_count) {
  ParamSettings s;
  s.p_d = p_d;
  return s.resolve(loss_db);
}

}  // namespace

TEST(Scheme, NamesRoundTrip) {
  for (Scheme s : kAllSchemes) {
    const auto back = parse_scheme(scheme_name(s));
    ASSERT_TRUE(back.has_value());
    EXPECT_EQ(*back, s);
  }
  EXPECT_FALSE(parse_scheme("xy").has_value());
}

TEST(SweepSpec, Validation) {
  SweepSpec spec;
  spec.schemes = {Scheme::xz_original};
  spec.loss_grid = {0.0, 10.0};
  EXPECT_NO_THROW(spec.validate());
  spec.loss_grid = {10.0, 0.0};
  EXPECT_THROW(spec.validate(), std::invalid_argument);
  spec.loss_grid = {0.0, 10.0};
  spec.n_partitions = 0;
  EXPECT_THROW(spec.validate(), std::invalid_argument);
  spec.n_partitions = 8;
  spec.fixed_mu = -1.0;
  EXPECT_THROW(spec.validate(), std::invalid_argument);
}

TEST(BalancedIntensities, EqualArrivingPhotons) {
  ParamSettings settings;
  settings.asymmetry = 0.2;
  const ExperimentParams p = settings.resolve(20.0);
  const SourceIntensities src = balanced_intensities(p, 0.4);
  EXPECT_NEAR(p.eta_a * src.mu_a, p.eta_b * src.mu_b, 1e-15);
  EXPECT_NEAR(src.mu_a * src.mu_b, 0.16, 1e-15);
}

TEST(EvaluatePoint, ColumnsPerScheme) {
  const ExperimentParams p = at_loss(10.0);
  const SweepRow sp = evaluate_point(Scheme::single_photon, p, {});
  EXPECT_TRUE(sp.q11 && sp.e11);
  EXPECT_FALSE(sp.q_mu || sp.e_mu || sp.q0_prime || sp.i_ec || sp.mu_opt);

  const SweepRow xz = evaluate_point(Scheme::xz_original, p, balanced_intensities(p, 0.5));
  EXPECT_TRUE(xz.q11 && xz.q_mu && xz.e_mu && xz.i_ec);
  EXPECT_FALSE(xz.q0_prime.has_value());

  const SweepRow xy = evaluate_point(Scheme::xy_postselect, p, balanced_intensities(p, 0.2));
  EXPECT_TRUE(xy.q0_prime.has_value());
  EXPECT_EQ(xy.rate_clamped, std::max(0.0, xy.rate_raw));
}

TEST(EvaluatePoint, ClampAtHighLoss) {
  const ExperimentParams p = at_loss(60.0);
  for (Scheme s : {Scheme::xy_postselect, Scheme::xz_original, Scheme::xy_full_random}) {
    const SweepRow row = evaluate_point(s, p, balanced_intensities(p, 0.5));
    EXPECT_LE(row.rate_raw, 0.0) << scheme_name(s);
    EXPECT_EQ(row.rate_clamped, 0.0) << scheme_name(s);
  }
}

TEST(EvaluatePoint, ZeroIntensityIsFinite) {
  const ExperimentParams p = at_loss(0.0);
  const SweepRow row = evaluate_point(Scheme::xz_original, p, {0.0, 0.0});
  EXPECT_TRUE(std::isfinite(row.rate_raw));
  EXPECT_EQ(row.rate_clamped, 0.0);
}

TEST(OptimizeMu, AgreesWithCoarseGrid) {
  // Guards against a multimodal rate curve fooling the bracket search.
  for (Scheme s : {Scheme::xy_postselect, Scheme::xz_original})
    for (double loss : {0.0, 20.0}) {
      const ExperimentParams p = at_loss(loss);
      const MuOptimum best = optimize_mu_at(p, s);
      double grid_best = -1.0;
      for (double mu = 0.01; mu <= 3.0; mu += 0.01)
        grid_best = std::max(grid_best, evaluate_point(s, p, balanced_intensities(p, mu)).rate_raw);
      EXPECT_GE(best.rate, grid_best * (1.0 - 1e-9)) << scheme_name(s) << " at " << loss;
      EXPECT_LE(std::abs(best.rate - grid_best), 0.05 * grid_best) << scheme_name(s) << " at " << loss;
    }
}

TEST(OptimizeMu, RateHalvesPerThreeDecibels) {
  // Without background noise the optimized rate falls linearly with
  // transmittance, so 3 dB more loss roughly halves it.
  for (Scheme s : {Scheme::xy_postselect, Scheme::xz_original})
    for (double loss : {10.0, 20.0}) {
      const double r0 = optimize_mu_at(at_loss(loss, 0.0), s).rate;
      const double r1 = optimize_mu_at(at_loss(loss + 3.0, 0.0), s).rate;
      ASSERT_GT(r0, 0.0);
      EXPECT_GE(r1 / r0, 0.4) << scheme_name(s);
      EXPECT_LE(r1 / r0, 0.6) << scheme_name(s);
    }
}

TEST(RunSweep, OrderAndDeterminism) {
  SweepSpec spec;
  spec.schemes = {Scheme::xz_original, Scheme::single_photon};
  spec.loss_grid = {0.0, 5.0, 10.0};
  spec.fixed_mu = 0.5;
  spec.workers = 3;
  const auto rows = run_sweep(spec, ParamSettings{});
  ASSERT_EQ(rows.size(), 6u);
  EXPECT_EQ(rows[0].scheme, Scheme::xz_original);
  EXPECT_EQ(rows[3].scheme, Scheme::single_photon);
  EXPECT_EQ(*rows[4].loss_db, 5.0);
  EXPECT_EQ(*rows[0].mu_opt, 0.5);
  EXPECT_FALSE(rows[3].mu_opt.has_value());

  spec.workers = 1;
  const auto serial = run_sweep(spec, ParamSettings{});
  for (std::size_t i = 0; i < rows.size(); ++i) EXPECT_EQ(rows[i].rate_raw, serial[i].rate_raw);
}

TEST(RunSweep, FileIntensitiesUsedWithoutMuFlag) {
  SweepSpec spec;
  spec.schemes = {Scheme::xz_original};
  spec.loss_grid = {10.0};
  ParamSettings settings;
  settings.mu_a = 0.3;
  settings.mu_b = 0.6;
  const auto rows = run_sweep(spec, settings);
  const ExperimentParams p = settings.resolve(10.0);
  EXPECT_EQ(rows[0].rate_raw, evaluate_point(Scheme::xz_original, p, {0.3, 0.6}).rate_raw);
  EXPECT_FALSE(rows[0].mu_opt.has_value());
}

TEST(Csv, HeaderAndFormatting) {
  SweepRow row;
  row.scheme = Scheme::single_photon;
  row.loss_db = 0.0;
  row.eta_a = row.eta_b = 0.145;
  row.q11 = 1.0 / 3.0;
  row.rate_raw = -1e-7;
  std::ostringstream os;
  write_csv(os, {row});
  EXPECT_EQ(os.str(), std::string(kCsvHeader) + "\nsingle-photon,0,0.145,0.145,,0.333333333,,,,,,-1e-07,0\n");
}

TEST(QberCurve, WeakLightAndColumns) {
  const auto rows = qber_curve({1e-4, 0.5}, 0.0, 0.0);
  ASSERT_EQ(rows.size(), 2u);
  ASSERT_EQ(rows[0].qber.size(), 3u);
  EXPECT_NEAR(rows[0].qber[0], 0.25, 1e-3);
  EXPECT_LT(rows[0].qber[2], rows[0].qber[1]);
  EXPECT_LT(rows[0].qber[1], rows[0].qber[0]);
  EXPECT_THROW(qber_curve({-1.0}, 0.0, 0.0), std::invalid_argument);
  std::ostringstream os;
  write_qber_csv(os, rows);
  EXPECT_EQ(os.str().substr(0, os.str().find('\n')), "intensity,x,qber_n1,qber_n4,qber_n8");
}
