#include <gtest/gtest.h>

#include <monopsono/econometrics.hpp>

#include "support.hpp"

using namespace monopsono;
using namespace monopsono::econ;

TEST(Absorb, SingleFactorIsOneSweep) {
  std::mt19937_64 rng(1);
  auto rf = oracle::random_fe_frame(rng, 200, 10, 4, 2);
  rf.frame.fe.resize(1);
  const auto a = absorb_fixed_effects(rf.frame);
  EXPECT_EQ(a.iterations, 1);
  std::vector<double> sum(10, 0.0);
  for (Eigen::Index i = 0; i < a.frame.rows(); ++i) sum[static_cast<std::size_t>(rf.frame.fe[0].codes[i])] += a.frame.y[i];
  for (double s : sum) EXPECT_NEAR(s, 0.0, 1e-12);
}

TEST(Absorb, MatchesDummyRegression) {
  std::mt19937_64 rng(2);
  for (int rep = 0; rep < 10; ++rep) {
    const auto rf = oracle::random_fe_frame(rng, 300, 15, 8, 3);
    const auto fit = ols(absorb_fixed_effects(rf.frame, 1e-13, 100000).frame);
    const auto ref = oracle::dummy_ols(rf.frame);
    EXPECT_LT((fit.beta - ref).cwiseAbs().maxCoeff(), 1e-8);
  }
}

TEST(Absorb, NonConvergenceIsAnEstimationError) {
  std::mt19937_64 rng(3);
  const auto rf = oracle::random_fe_frame(rng, 300, 15, 8, 1);
  EXPECT_THROW(absorb_fixed_effects(rf.frame, 1e-14, 1), EstimationError);
  auto none = rf.frame;
  none.fe.clear();
  EXPECT_THROW(absorb_fixed_effects(none), DomainError);
}

TEST(Ols, ClusterVcovMatchesNaiveSandwich) {
  std::mt19937_64 rng(4);
  auto rf = oracle::random_fe_frame(rng, 150, 12, 3, 2);
  auto& f = rf.frame;
  f.fe.clear();
  f.X = hcat(Eigen::MatrixXd::Ones(150, 1), f.X, 150);
  f.x_names.insert(f.x_names.begin(), "const");
  const auto fit = ols(f);
  const auto naive = oracle::naive_cluster_vcov(f.X, fit.residuals, f.cluster.codes, f.cluster.levels);
  EXPECT_LT((fit.vcov - naive).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_EQ(fit.dof, f.cluster.levels - 1);
  EXPECT_EQ(fit.vcov_kind, VcovKind::cluster);
}

TEST(Ols, Hc1AndClassical) {
  std::mt19937_64 rng(5);
  auto rf = oracle::random_fe_frame(rng, 120, 5, 3, 1);
  auto& f = rf.frame;
  f.fe.clear();
  f.X = hcat(Eigen::MatrixXd::Ones(120, 1), f.X, 120);
  f.x_names.insert(f.x_names.begin(), "const");
  VcovOptions hc;
  hc.kind = VcovKind::hc1;
  const auto fit = ols(f, hc);
  const Eigen::MatrixXd bread = (f.X.transpose() * f.X).inverse();
  Eigen::MatrixXd meat = Eigen::MatrixXd::Zero(2, 2);
  for (Eigen::Index i = 0; i < 120; ++i) meat += fit.residuals[i] * fit.residuals[i] * f.X.row(i).transpose() * f.X.row(i);
  const Eigen::MatrixXd ref = 120.0 / 118.0 * bread * meat * bread;
  EXPECT_LT((fit.vcov - ref).cwiseAbs().maxCoeff(), 1e-13);
  VcovOptions cl;
  cl.kind = VcovKind::classical;
  const auto c = ols(f, cl);
  const double s2 = c.residuals.squaredNorm() / 118.0;
  EXPECT_LT((c.vcov - s2 * bread).cwiseAbs().maxCoeff(), 1e-13);
  EXPECT_EQ(c.dof, 118);
}

TEST(Ols, RankDeficiencyIsReported) {
  std::mt19937_64 rng(6);
  auto rf = oracle::random_fe_frame(rng, 50, 5, 3, 1);
  auto& f = rf.frame;
  f.fe.clear();
  f.X = hcat(f.X, 2.0 * f.X, 50);
  f.x_names.push_back("x0_twice");
  EXPECT_THROW(ols(f), EstimationError);
}

TEST(Ols, ValidationCatchesBadFrames) {
  RegressionFrame f;
  f.y = Eigen::VectorXd::Ones(3);
  f.X = Eigen::MatrixXd::Ones(2, 1);
  f.x_names = {"x"};
  EXPECT_THROW(ols(f), DomainError);
  f.X = Eigen::MatrixXd::Ones(3, 1);
  f.y[1] = std::nan("");
  EXPECT_THROW(ols(f), DomainError);
}

TEST(Tsls, JustIdentifiedIsCovarianceRatio) {
  std::mt19937_64 rng(7);
  const auto f = oracle::iv_frame(rng, 30, 10, -0.05, 0.0);
  const auto fit = tsls(f);
  const double ratio = oracle::cov(f.Z.col(0), f.y) / oracle::cov(f.Z.col(0), f.endog.col(0));
  EXPECT_NEAR(fit.coef("x"), ratio, 1e-10);
}

TEST(Tsls, FirstStageFIsSquaredClusterT) {
  std::mt19937_64 rng(8);
  const auto f = oracle::iv_frame(rng, 30, 10, -0.05, 0.0);
  const auto fit = tsls(f);
  RegressionFrame fs = f;
  fs.y = f.endog.col(0);
  fs.endog.resize(0, 0);
  fs.endog_names.clear();
  fs.X = hcat(f.X, f.Z, f.rows());
  fs.x_names = {"const", "z"};
  fs.Z.resize(0, 0);
  fs.z_names.clear();
  const auto first = ols(fs);
  const double t = first.t(first.index_of("z"));
  EXPECT_NEAR(*fit.first_stage_f, t * t, 1e-8 * t * t);
  EXPECT_NEAR(fit.first_stage_coef[0][0], first.coef("z"), 1e-12);
}

TEST(Tsls, IrrelevantInstrumentIsRankDeficient) {
  std::mt19937_64 rng(9);
  auto f = oracle::iv_frame(rng, 20, 5, -0.05, 0.0);
  f.Z = f.X;
  EXPECT_THROW(tsls(f), EstimationError);
  f.endog.resize(0, 0);
  f.endog_names.clear();
  EXPECT_THROW(tsls(f), EstimationError);
}

TEST(Conley, DegenerateRangeIsTheIvInterval) {
  std::mt19937_64 rng(10);
  const auto f = oracle::iv_frame(rng, 40, 10, -0.05, 0.0);
  const auto fit = tsls(f);
  const auto [lo, hi] = fit.ci(fit.index_of("x"), 0.90);
  const auto b = conley_bounds(f, 0.0, 0.0);
  EXPECT_EQ(b.points.size(), 1u);
  EXPECT_EQ(b.theta_lo, lo);
  EXPECT_EQ(b.theta_hi, hi);
}

TEST(Conley, WidensWithTheRangeAndShiftsWithPhi) {
  std::mt19937_64 rng(11);
  const auto f = oracle::iv_frame(rng, 40, 10, -0.05, 0.0);
  const auto a = conley_bounds(f, -0.01, 0.0, 11);
  const auto b = conley_bounds(f, -0.03, 0.0, 31);
  EXPECT_LE(b.theta_lo, a.theta_lo);
  EXPECT_GE(b.theta_hi, a.theta_hi);
  // A negative direct effect raises the implied theta through y - phi z.
  EXPECT_GT(b.points.front().beta, b.points.back().beta);
  EXPECT_THROW(conley_bounds(f, 0.1, 0.0), DomainError);
}

TEST(Bootstrap, DeterministicAcrossThreadCounts) {
  std::mt19937_64 rng(12);
  const auto f = oracle::iv_frame(rng, 25, 8, -0.05, 0.0);
  auto stat = [](const RegressionFrame& g) -> std::optional<double> { return tsls(g).coef("x"); };
  const auto a = cluster_bootstrap(f, stat, 40, 99, 1);
  const auto b = cluster_bootstrap(f, stat, 40, 99, 3);
  EXPECT_EQ(a.draws, b.draws);
  EXPECT_EQ(a.se, b.se);
  const auto c = cluster_bootstrap(f, stat, 40, 100, 1);
  EXPECT_NE(a.draws, c.draws);
  EXPECT_GT(a.se, 0.0);
}

TEST(Bootstrap, FailedReplicatesAreDroppedUpToTwentyPercent) {
  int calls = 0;
  auto some_fail = [&](std::span<const int>) -> std::optional<double> {
    ++calls;
    if (calls % 10 == 0) throw EstimationError("singular");
    return static_cast<double>(calls);
  };
  const auto r = bootstrap_clusters(5, 50, 1, some_fail);
  EXPECT_EQ(r.failed, 5);
  EXPECT_EQ(r.draws.size(), 45u);
  auto many_fail = [](std::span<const int> d) -> std::optional<double> {
    if (d[0] % 2 == 0) return std::nullopt;
    return 1.0;
  };
  EXPECT_THROW(bootstrap_clusters(4, 50, 1, many_fail), EstimationError);
}

TEST(Bootstrap, ResampledFrameRelabelsClusters) {
  std::mt19937_64 rng(13);
  const auto f = oracle::iv_frame(rng, 3, 2, -0.05, 0.0);
  const auto rows = cluster_rows(f.cluster);
  const std::vector<int> draw{2, 2, 0};
  const auto g = resample_clusters(f, rows, draw);
  EXPECT_EQ(g.rows(), 6);
  EXPECT_EQ(g.cluster.levels, 3);
  EXPECT_EQ(g.y[0], f.y[4]);
  EXPECT_EQ(g.y[2], f.y[4]);
  EXPECT_EQ(g.cluster.codes, (std::vector<int>{0, 0, 1, 1, 2, 2}));
}

TEST(Output, FitCsvListsTermsAndDiagnostics) {
  std::mt19937_64 rng(14);
  const auto f = oracle::iv_frame(rng, 20, 5, -0.05, 0.0);
  const auto text = fit_result_csv(tsls(f));
  EXPECT_EQ(text.rfind("term,coefficient,se,t,p\n", 0), 0u);
  EXPECT_NE(text.find("\nx,"), std::string::npos);
  EXPECT_NE(text.find("first_stage_f"), std::string::npos);
}
