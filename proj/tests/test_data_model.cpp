#include <gtest/gtest.h>

#include <monopsono/data_model.hpp>

using namespace monopsono;

namespace {

// Two establishments in one 4-digit industry and one zone, two years.
// w1 holds a side job in 2012 and moves E1 -> E2 in 2013; w4 is an apprentice.
std::vector<SnapshotRecord> tiny() {
  return {
      {"w1", "E1", "123451", "05111", 2012, 100.0, Contract::regular_ft},
      {"w1", "E2", "123462", "05112", 2012, 80.0, Contract::regular_ft},
      {"w2", "E1", "123451", "05111", 2012, 120.0, Contract::regular_ft},
      {"w3", "E2", "123462", "05112", 2012, 50.0, Contract::regular_pt},
      {"w4", "E1", "123451", "05111", 2012, 20.0, Contract::apprentice},
      {"w1", "E2", "123462", "05112", 2013, 90.0, Contract::regular_ft},
      {"w2", "E1", "123451", "05111", 2013, 130.0, Contract::regular_ft},
      {"w3", "E2", "123462", "05112", 2013, 55.0, Contract::regular_pt},
  };
}

Delineation one_zone() { return {{"05111", "zA"}, {"05112", "zA"}}; }

}  // namespace

TEST(Snapshots, CsvRoundTrip) {
  const auto recs = tiny();
  const auto back = parse_snapshots(csv::parse_string(snapshots_csv(recs)));
  ASSERT_EQ(back.size(), recs.size());
  EXPECT_EQ(back[4].contract, Contract::apprentice);
  EXPECT_EQ(*back[6].daily_wage, 130.0);
  EXPECT_EQ(back[1].industry, "123462");
}

TEST(Snapshots, ParseErrorsNameRowAndColumn) {
  const std::string head = "worker_id,estab_id,industry,region,year,daily_wage,contract\n";
  try {
    parse_snapshots(csv::parse_string(head + "w,e,12a45,05111,2012,10,regular_ft\n", "s.csv"));
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_NE(std::string(e.what()).find("s.csv: row 1, column industry"), std::string::npos);
  }
  EXPECT_THROW(parse_snapshots(csv::parse_string(head + "w,e,12345,05111,2012,10,freelance\n")), ParseError);
  EXPECT_THROW(parse_snapshots(csv::parse_string(head + "w,e,12345,05111,2012,,regular_ft\n")), ParseError);
  EXPECT_NO_THROW(parse_snapshots(csv::parse_string(head + "w,e,12345,05111,2012,,marginal\n")));
  EXPECT_THROW(parse_snapshots(csv::parse_string(head + "w,e,12345,05111,x,10,regular_ft\n")), ParseError);
}

TEST(Territory, FromDistrictCode) {
  EXPECT_EQ(territory_of_district("11000"), Territory::berlin);
  EXPECT_EQ(territory_of_district("12054"), Territory::east);
  EXPECT_EQ(territory_of_district("16077"), Territory::east);
  EXPECT_EQ(territory_of_district("09162"), Territory::west);
}

TEST(MainJobs, HighestWageWins) {
  const auto recs = tiny();
  const auto jobs = main_jobs(recs);
  // Apprentice dropped, w1's 2012 side job at E2 dropped.
  EXPECT_EQ(jobs, (std::vector<std::size_t>{0, 2, 3, 5, 6, 7}));
}

TEST(MarketPanel, EmploymentShares) {
  const auto p = build_market_panel(tiny(), one_zone(), 4, ObjectKind::employment);
  ASSERT_EQ(p.cells.size(), 2u);
  const auto& c12 = p.cells.at({"1234", "zA", 2012});
  ASSERT_EQ(c12.firm_count(), 2u);
  EXPECT_EQ(c12.firms[0].estab_id, "E1");
  EXPECT_EQ(c12.firms[0].count, 2);
  EXPECT_DOUBLE_EQ(c12.firms[0].share, 2.0 / 3.0);
  EXPECT_DOUBLE_EQ(hhi(ShareVector(c12.shares())), 5.0 / 9.0);
  const auto& c13 = p.cells.at({"1234", "zA", 2013});
  EXPECT_EQ(c13.firms[1].count, 2);
}

TEST(MarketPanel, DigitsSplitMarkets) {
  const auto p = build_market_panel(tiny(), one_zone(), 5, ObjectKind::employment);
  EXPECT_EQ(p.cells.size(), 4u);
  EXPECT_EQ(p.cells.at({"12346", "zA", 2013}).firm_count(), 1u);
  EXPECT_THROW(build_market_panel(tiny(), one_zone(), 2, ObjectKind::employment), DomainError);
}

TEST(MarketPanel, HiresSkipYearsWithoutPredecessor) {
  const auto p = build_market_panel(tiny(), one_zone(), 4, ObjectKind::hires);
  EXPECT_EQ(p.omitted_years, (std::vector<int>{2012}));
  ASSERT_EQ(p.cells.size(), 1u);
  const auto& c = p.cells.at({"1234", "zA", 2013});
  ASSERT_EQ(c.firm_count(), 1u);
  EXPECT_EQ(c.firms[0].estab_id, "E2");
  EXPECT_EQ(c.total, 1);
}

TEST(MarketPanel, UnknownDistrictIsADomainError) {
  EXPECT_THROW(build_market_panel(tiny(), {{"05111", "zA"}}, 4, ObjectKind::employment), DomainError);
}

TEST(MarketPanel, CsvRoundTrip) {
  const auto p = build_market_panel(tiny(), one_zone(), 4, ObjectKind::employment);
  const auto back = read_market_panel_csv(csv::parse_string(market_panel_csv(p)));
  ASSERT_EQ(back.cells.size(), p.cells.size());
  EXPECT_EQ(back.cells.at({"1234", "zA", 2012}).total, 3);
}

TEST(Mobility, SwitchWithinMarketIsAStay) {
  const auto m = outward_mobility(tiny(), one_zone(), 4);
  ASSERT_EQ(m.size(), 1u);
  const auto& s = m.at({"1234", "zA", 2012});
  EXPECT_EQ(s.stayers, 1);
  EXPECT_EQ(s.movers, 0);
  const auto m5 = outward_mobility(tiny(), one_zone(), 5);
  EXPECT_EQ(m5.at({"12345", "zA", 2012}).movers, 1);
}

TEST(Sectors, LongestPrefix) {
  const SectorMap m{{"12", "A"}, {"1234", "B"}};
  EXPECT_EQ(*sector_of(m, "123451"), "B");
  EXPECT_EQ(*sector_of(m, "129999"), "A");
  EXPECT_FALSE(sector_of(m, "999999"));
}

TEST(MinWage, InForceOnJuneThirtieth) {
  const MinWageSchedule s({{"S1", Territory::west, "2013-07-01", "2014-06-30", 8.5},
                           {"S1", Territory::west, "2014-07-01", "2015-12-31", 9.0}});
  EXPECT_FALSE(s.in_force("S1", Territory::west, 2013));
  EXPECT_EQ(*s.in_force("S1", Territory::west, 2014), 8.5);
  EXPECT_EQ(*s.in_force("S1", Territory::west, 2015), 9.0);
  EXPECT_FALSE(s.in_force("S1", Territory::east, 2014));
  EXPECT_THROW(MinWageSchedule({{"S1", Territory::west, "2013/07/01", "2014-06-30", 8.5}}), ParseError);
  EXPECT_THROW(MinWageSchedule({{"S1", Territory::west, "2014-07-01", "2014-06-30", 8.5}}), ParseError);
}

TEST(Kaitz, HourlyConversionAndGroups) {
  EXPECT_DOUBLE_EQ(kaitz_index(8.75, 100.0), 8.75 / 17.5);
  EXPECT_THROW(kaitz_index(0.0, 100.0), DomainError);
  const auto cuts = default_kaitz_cuts();
  EXPECT_EQ(group_of(0.5, cuts), 0);
  EXPECT_EQ(group_of(0.68, cuts), 1);
  EXPECT_EQ(group_of(2.0, cuts), 4);
}

TEST(EstabPanel, Attributes) {
  const auto recs = tiny();
  const auto market = build_market_panel(recs, one_zone(), 4, ObjectKind::employment);
  const MinWageSchedule mw({{"S1", Territory::west, "2013-01-01", "2013-12-31", 8.5}});
  EstabPanelOptions opt;
  opt.delineation = one_zone();
  const auto p = build_estab_panel(recs, {{"1234", "S1"}}, mw, market, opt);
  ASSERT_EQ(p.rows.size(), 4u);
  const auto& e1a = p.rows[0];
  EXPECT_EQ(e1a.estab_id, "E1");
  EXPECT_EQ(e1a.year, 2012);
  EXPECT_EQ(e1a.emp_ft, 2);
  EXPECT_DOUBLE_EQ(*e1a.mean_wage, 110.0);
  EXPECT_DOUBLE_EQ(*e1a.hhi_current, 5.0 / 9.0);
  EXPECT_DOUBLE_EQ(*e1a.hhi_avg, 5.0 / 9.0);
  EXPECT_FALSE(e1a.minwage);
  EXPECT_DOUBLE_EQ(*e1a.implicit_minwage, 17.5);
  EXPECT_EQ(*e1a.first_regulated_year, 2013);
  const auto& e1b = p.rows[1];
  EXPECT_EQ(*e1b.minwage, 8.5);
  EXPECT_DOUBLE_EQ(*e1b.kaitz, 8.5 / 22.75);
  EXPECT_FALSE(e1b.closure);
  const auto& e2a = p.rows[2];
  EXPECT_EQ(e2a.emp_ft, 0);
  EXPECT_EQ(e2a.emp_pt, 1);
  EXPECT_FALSE(e2a.mean_wage);
  EXPECT_EQ(e2a.market_id(), "1234|zA");
}

TEST(EstabPanel, ClosureAndUnmappedSectors) {
  auto recs = tiny();
  recs.push_back({"w5", "E3", "777771", "05111", 2012, 60.0, Contract::regular_ft});
  recs.push_back({"w6", "E4", "123451", "05111", 2012, 60.0, Contract::regular_ft});
  const auto market = build_market_panel(recs, one_zone(), 4, ObjectKind::employment);
  EstabPanelOptions opt;
  opt.delineation = one_zone();
  const auto p = build_estab_panel(recs, {{"1234", "S1"}}, MinWageSchedule{}, market, opt);
  EXPECT_EQ(p.skipped_unmapped.at("777771"), 1u);
  const auto e4 = std::find_if(p.rows.begin(), p.rows.end(), [](const EstabRow& r) { return r.estab_id == "E4"; });
  ASSERT_NE(e4, p.rows.end());
  EXPECT_TRUE(e4->closure);
}

TEST(EstabPanel, CsvRoundTrip) {
  const auto recs = tiny();
  const auto market = build_market_panel(recs, one_zone(), 4, ObjectKind::employment);
  const MinWageSchedule mw({{"S1", Territory::west, "2013-01-01", "2013-12-31", 8.5}});
  EstabPanelOptions opt;
  opt.delineation = one_zone();
  const auto p = build_estab_panel(recs, {{"1234", "S1"}}, mw, market, opt);
  const auto text = estab_panel_csv(p);
  const auto back = read_estab_panel_csv(csv::parse_string(text));
  EXPECT_EQ(estab_panel_csv(back), text);
}
