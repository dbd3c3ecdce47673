#include <gtest/gtest.h>

#include <monopsono/monopsono.hpp>

using namespace monopsono;

namespace {

SynthConfig small() {
  SynthConfig c;
  c.n_industries = 12;
  c.n_zones = 10;
  c.n_years = 8;
  return c;
}

Ingested run(const SynthOutput& d, bool strict = false) {
  PipelineInputs in;
  in.records = &d.records;
  in.delineation = d.delineation;
  in.sectors = d.sectors;
  in.minwage = d.minwage;
  in.controls = d.controls;
  in.strict_zone_count = strict;
  return ingest(in);
}

}  // namespace

TEST(Synth, DeterministicInSeedAndThreads) {
  auto c = small();
  const auto a = synth_panel(c);
  c.threads = 3;
  const auto b = synth_panel(c);
  EXPECT_EQ(snapshots_csv(a.records), snapshots_csv(b.records));
  c.seed = 2;
  EXPECT_NE(snapshots_csv(synth_panel(c).records), snapshots_csv(a.records));
}

TEST(Synth, OutputsParseBack) {
  const auto d = synth_panel(small());
  EXPECT_EQ(parse_snapshots(csv::parse_string(snapshots_csv(d.records))).size(), d.records.size());
  EXPECT_EQ(parse_sectors(csv::parse_string(sectors_csv(d.sectors))), d.sectors);
  EXPECT_EQ(parse_minwage(csv::parse_string(minwage_csv(d.minwage))).spells().size(), d.minwage.spells().size());
  EXPECT_EQ(parse_controls(csv::parse_string(controls_csv(d.controls))).akm_premium, d.controls.akm_premium);
  EXPECT_EQ(parse_delineation(csv::parse_string(delineation_csv(d.delineation))), d.delineation);
  const auto fm = parse_flows(csv::parse_string(flows_csv(d.districts, d.flows)));
  EXPECT_EQ(fm.size(), d.districts.size());
}

TEST(Synth, CommutingZonesAreRecoverable) {
  const auto d = synth_panel(small());
  const auto fm = d.flow_matrix();
  std::vector<double> grid;
  for (int t = 1; t <= 50; ++t) grid.push_back(t / 100.0);
  const auto res = sweep_thresholds(fm, grid);
  EXPECT_EQ(zone_labels(fm, res.partition), d.delineation);
}

TEST(Synth, RejectsBadConfig) {
  auto c = small();
  c.n_zones = 1;
  EXPECT_THROW(synth_panel(c), DomainError);
  c = small();
  c.n_regulated = 99;
  EXPECT_THROW(synth_panel(c), DomainError);
}

TEST(Pipeline, NoiseFreePanelRecoversThetaExactly) {
  auto c = small();
  c.without_noise();
  c.lambda = 0.0;
  const auto d = synth_panel(c);
  const auto ing = run(d);
  const auto ols_fit = fit_frame(assemble_spec(ing.estab, named_spec("eq2_zone_year")).frame, false);
  EXPECT_NEAR(ols_fit.coef("log_hhi"), c.theta, 1e-8);
  const auto iv = fit_frame(assemble_spec(ing.estab, named_spec("eq2_iv")).frame, true);
  EXPECT_NEAR(iv.coef("log_hhi"), c.theta, 1e-8);
}

TEST(Pipeline, LocalShockBiasesOlsButNotIv) {
  auto c = small();
  c.n_industries = 30;
  c.n_zones = 30;
  c.lambda = 0.6;
  c.local_size_loading = 3.0;
  const auto ing = run(synth_panel(c));
  const auto o = fit_frame(assemble_spec(ing.estab, named_spec("eq2_zone_year")).frame, false);
  const auto iv = fit_frame(assemble_spec(ing.estab, named_spec("eq2_iv")).frame, true);
  EXPECT_GT(o.coef("log_hhi"), c.theta + 3.0 * o.se("log_hhi"));
  EXPECT_LT(std::abs(iv.coef("log_hhi") - c.theta), 3.0 * iv.se("log_hhi"));
  EXPECT_GT(*iv.first_stage_f, 10.0);
}

TEST(Pipeline, NoiseFreeWageEffectsOfMinimumWage) {
  auto c = small();
  c.without_noise();
  c.theta = 0.0;
  c.lambda = 0.0;
  const auto ing = run(synth_panel(c));
  auto s = named_spec("eq4_zone_year");
  s.outcome = "mean_wage";
  const auto f = fit_frame(assemble_spec(ing.estab, s).frame, false, {1e-12, 100000, {}});
  EXPECT_NEAR(f.coef("log_minwage"), c.alpha_w, 1e-8);
  EXPECT_NEAR(f.coef("log_minwage_x_hhi"), c.beta_w, 1e-8);
}

TEST(Pipeline, EmploymentEffectsWithoutEntryShocks) {
  auto c = small();
  c.n_industries = 16;
  c.without_noise();
  c.sigma_industry_year = 0.0;
  c.sigma_firm_size = 0.0;
  c.heads_at_base = 300;
  c.n_regulated = c.n_sectors;
  const auto ing = run(synth_panel(c));
  const auto f = fit_frame(assemble_spec(ing.estab, named_spec("eq4_zone_year")).frame, false);
  EXPECT_NEAR(f.coef("log_minwage"), c.alpha_l, 0.02);
  EXPECT_NEAR(f.coef("log_minwage_x_hhi"), c.beta_l, 0.05);
}

TEST(Pipeline, StrictDivisorScalesInstrument) {
  const auto d = synth_panel(small());
  const auto a = run(d, false);
  const auto b = run(d, true);
  ASSERT_EQ(a.instrument.size(), b.instrument.size());
  // Every industry is present in every zone, so both divisors agree.
  for (const auto& [k, v] : a.instrument) EXPECT_NEAR(b.instrument.at(k), v, 1e-12);
}
