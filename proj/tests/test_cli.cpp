#include <gtest/gtest.h>

#include <fstream>
#include <sstream>

#include <monopsono/cli.hpp>

using namespace monopsono;
namespace fs = std::filesystem;

namespace {

struct Result {
  int rc;
  std::string out, err;
};

Result run(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int rc = cli::run(args, out, err);
  return {rc, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir = fs::temp_directory_path() /
          ("monopsono_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir);
    fs::create_directories(dir);
    cfg = dir / "run.ini";
    std::ofstream(cfg) << "seed = 5\n[synth]\nn_industries = 10\nn_zones = 8\nn_years = 10\n";
    out = (dir / "out").string();
  }
  void TearDown() override { fs::remove_all(dir); }
  Result sub(const std::string& s, std::vector<std::string> extra = {}) {
    std::vector<std::string> a{s, "--config", cfg.string(), "--out", out};
    a.insert(a.end(), extra.begin(), extra.end());
    return run(a);
  }
  fs::path dir, cfg;
  std::string out;
};

}  // namespace

TEST(Grid, EllipsisExpansion) {
  const auto g = cli::parse_grid("0,0.05,...,1");
  ASSERT_EQ(g.size(), 21u);
  EXPECT_EQ(g[0], 0.0);
  EXPECT_EQ(g[1], 0.05);
  EXPECT_EQ(g[20], 1.0);
  EXPECT_EQ(cli::parse_grid("0.1, 0.3"), (std::vector<double>{0.1, 0.3}));
  EXPECT_EQ(cli::parse_grid("1,2,...,2.5"), (std::vector<double>{1.0, 2.0, 2.5}));
  EXPECT_THROW(cli::parse_grid("0,...,1"), ParseError);
  EXPECT_THROW(cli::parse_grid("1,0.5,...,0"), ParseError);
  EXPECT_THROW(cli::parse_grid("a,b"), ParseError);
}

TEST(Usage, UnknownSubcommandExitsTwo) {
  const auto r = run({"frobnicate"});
  EXPECT_EQ(r.rc, 2);
  EXPECT_NE(r.err.find("unknown subcommand"), std::string::npos);
  EXPECT_NE(r.err.find("Usage"), std::string::npos);
  EXPECT_EQ(run({}).rc, 2);
  EXPECT_EQ(run({"synth", "--digits", "7"}).rc, 2);
  EXPECT_EQ(run({"synth", "--object", "stock"}).rc, 2);
  EXPECT_EQ(run({"--help"}).rc, 0);
}

TEST_F(CliTest, MissingInputIsAParseError) {
  const auto r = sub("ingest");
  EXPECT_EQ(r.rc, 1);
  EXPECT_EQ(r.err.rfind("monopsono: parse error: missing input", 0), 0u);
  EXPECT_EQ(std::count(r.err.begin(), r.err.end(), '\n'), 1);
}

TEST_F(CliTest, DomainAndEstimationErrorsAreOneLine) {
  ASSERT_EQ(sub("synth").rc, 0);
  ASSERT_EQ(sub("ingest").rc, 0);
  std::ofstream(cfg, std::ios::app) << "[regress]\nspec = eq4_linear\niv = true\n";
  auto r = sub("regress");
  EXPECT_EQ(r.rc, 1);
  EXPECT_EQ(r.err.rfind("monopsono: domain error:", 0), 0u);
  r = sub("elasticity", {"--spec", "eq2_estab"});
  EXPECT_EQ(r.rc, 1);
  EXPECT_EQ(r.err.rfind("monopsono: domain error:", 0), 0u);
  // Instrument required but never attached.
  fs::remove(fs::path(out) / "instrument.csv");
  r = sub("regress", {"--spec", "eq2_iv"});
  EXPECT_EQ(r.rc, 1);
  EXPECT_EQ(r.err.rfind("monopsono: estimation error: empty estimation sample", 0), 0u);
  EXPECT_EQ(std::count(r.err.begin(), r.err.end(), '\n'), 1);
}

TEST_F(CliTest, BadConfigValueIsAParseError) {
  std::ofstream(cfg, std::ios::app) << "[simulate]\nc = ten\n";
  const auto r = sub("simulate");
  EXPECT_EQ(r.rc, 1);
  EXPECT_NE(r.err.find("parse error: config key 'c'"), std::string::npos);
  EXPECT_EQ(run({"simulate", "--config", (dir / "nope.ini").string()}).rc, 1);
}

TEST_F(CliTest, FullChainWritesArtifactsAndManifests) {
  for (const auto& s : cli::subcommands()) {
    const auto r = sub(s);
    ASSERT_EQ(r.rc, 0) << s << ": " << r.err;
    EXPECT_TRUE(fs::exists(fs::path(out) / ("manifest_" + s + ".json"))) << s;
  }
  const fs::path o(out);
  for (const char* f : {"snapshots.csv", "delineation_sweep.csv", "concentration.csv", "instrument.csv",
                        "estab_panel.csv", "regression_eq2_iv.csv", "elasticities.csv", "bounds.csv",
                        "response_curves.csv", "report.md"})
    EXPECT_TRUE(fs::exists(o / f)) << f;
  for (const auto& e : fs::directory_iterator(o)) EXPECT_NE(e.path().extension(), ".tmp");

  const auto m = nlohmann::json::parse(slurp(o / "manifest_regress.json"));
  EXPECT_EQ(m["subcommand"], "regress");
  EXPECT_EQ(m["parameters"]["spec"], "eq2_iv");
  ASSERT_EQ(m["outputs"].size(), 1u);
  EXPECT_EQ(m["outputs"][0]["sha256"], cli::sha256_file(o / "regression_eq2_iv.csv"));
  EXPECT_EQ(m["inputs"][0]["path"], cfg.generic_string());

  const auto el = csv::read(o / "elasticities.csv");
  EXPECT_EQ(el.rows.size(), 21u);
}

TEST_F(CliTest, ReportReadsArtifactsOnly) {
  ASSERT_EQ(sub("simulate").rc, 0);
  ASSERT_EQ(sub("report").rc, 0);
  const auto first = slurp(fs::path(out) / "report.md");
  EXPECT_NE(first.find("## equilibria"), std::string::npos);
  // Tampering with an artifact changes the report verbatim: nothing is recomputed.
  std::ofstream(fs::path(out) / "equilibria.csv") << "j,cournot_wage\n1,123.456\n";
  ASSERT_EQ(sub("report").rc, 0);
  EXPECT_NE(slurp(fs::path(out) / "report.md").find("| 1 | 123.456 |"), std::string::npos);
  fs::remove_all(dir / "empty");
  EXPECT_EQ(run({"report", "--out", (dir / "empty").string()}).rc, 1);
}

TEST_F(CliTest, FlagsOverrideSectionsOverrideGlobals) {
  std::ofstream(cfg, std::ios::app) << "[simulate]\nseed = 9\nfirms = 1,3\n";
  ASSERT_EQ(sub("simulate").rc, 0);
  auto m = nlohmann::json::parse(slurp(fs::path(out) / "manifest_simulate.json"));
  EXPECT_EQ(m["parameters"]["seed"], 9);
  EXPECT_EQ(m["parameters"]["firms"], "1,3");
  ASSERT_EQ(sub("simulate", {"--seed", "12"}).rc, 0);
  m = nlohmann::json::parse(slurp(fs::path(out) / "manifest_simulate.json"));
  EXPECT_EQ(m["parameters"]["seed"], 12);
  ASSERT_EQ(sub("synth").rc, 0);
  m = nlohmann::json::parse(slurp(fs::path(out) / "manifest_synth.json"));
  EXPECT_EQ(m["parameters"]["seed"], 5);
}

TEST_F(CliTest, ElasticityGridFlagAndComputedDelineation) {
  ASSERT_EQ(sub("synth").rc, 0);
  std::ofstream(cfg, std::ios::app) << "[ingest]\ndelineation_source = computed\n";
  ASSERT_EQ(sub("ingest").rc, 0);
  const auto m = nlohmann::json::parse(slurp(fs::path(out) / "manifest_ingest.json"));
  EXPECT_EQ(m["parameters"]["delineation_source"], "computed");
  ASSERT_EQ(sub("elasticity", {"--spec", "eq4_linear", "--grid", "0,0.25,...,1"}).rc, 0);
  const auto t = csv::read(fs::path(out) / "elasticities.csv");
  ASSERT_EQ(t.rows.size(), 5u);
  EXPECT_EQ(t.rows[4][0], "1");
}

TEST_F(CliTest, DigitsAndHiresChangeConcentration) {
  ASSERT_EQ(sub("synth").rc, 0);
  ASSERT_EQ(sub("concentration").rc, 0);
  const auto base = csv::read(fs::path(out) / "concentration.csv").rows.size();
  ASSERT_EQ(sub("concentration", {"--digits", "5"}).rc, 0);
  EXPECT_GT(csv::read(fs::path(out) / "concentration.csv").rows.size(), base);
  ASSERT_EQ(sub("concentration", {"--object", "hires"}).rc, 0);
  const auto s = csv::read(fs::path(out) / "concentration_summary.csv");
  EXPECT_EQ(s.rows.back()[0], "omitted_years");
  EXPECT_EQ(s.rows.back()[1], "2011");
}
