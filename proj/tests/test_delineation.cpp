#include <gtest/gtest.h>

#include <monopsono/delineation.hpp>

using namespace monopsono;

namespace {

FlowMatrix two_pairs() {
  // r0 <-> r1 and r2 <-> r3 commute heavily; r1's largest outflow goes to r2.
  return FlowMatrix({"r0", "r1", "r2", "r3"}, {{100, 60, 0, 0},
                                               {40, 100, 45, 0},
                                               {0, 0, 100, 50},
                                               {0, 0, 70, 100}});
}

}  // namespace

TEST(FlowMatrix, Validates) {
  EXPECT_THROW(FlowMatrix({"a", "b"}, {{1, 0}}), DomainError);
  EXPECT_THROW(FlowMatrix({"a", "b"}, {{1, -1}, {0, 1}}), DomainError);
  EXPECT_THROW(FlowMatrix({"a", "b"}, {{0, 0}, {0, 1}}), DomainError);
}

TEST(FlowMatrix, ParseSumsDuplicatesAndSortsRegions) {
  const auto t = csv::parse_string(
      "origin,destination,commuters\nb,a,5\na,a,10\nb,a,3\nb,b,7\n");
  const auto fm = parse_flows(t);
  ASSERT_EQ(fm.size(), 2u);
  EXPECT_EQ(fm.regions()[0], "a");
  EXPECT_DOUBLE_EQ(fm(1, 0), 8.0);
  EXPECT_DOUBLE_EQ(fm.row_sum(1), 15.0);
}

TEST(Links, DominantFlowThreshold) {
  const auto fm = two_pairs();
  // Shares: r0 -> r1 0.375, r1 -> r2 0.243, r2 -> r3 0.333, r3 -> r2 0.412.
  auto links = dominant_flow_links(fm, 0.3);
  ASSERT_EQ(links.size(), 3u);
  EXPECT_EQ(links[0], (Link{0, 1}));
  EXPECT_EQ(links[1], (Link{2, 3}));
  EXPECT_EQ(links[2], (Link{3, 2}));
  EXPECT_EQ(dominant_flow_links(fm, 0.5).size(), 0u);
}

TEST(Zones, UnionFindIsDenseAndOrdered) {
  const auto p = merge_zones(5, {{3, 4}, {1, 0}});
  EXPECT_EQ(p.zone_count, 3);
  EXPECT_EQ(p.assignment, (std::vector<int>{0, 0, 1, 2, 2}));
  EXPECT_THROW(merge_zones(2, {{0, 3}}), DomainError);
}

TEST(Modularity, HandValue) {
  const auto fm = two_pairs();
  Partition p;
  p.assignment = {0, 0, 1, 1};
  p.zone_count = 2;
  const double m = 665.0;
  const double q = 300.0 / m - (345.0 / m) * (300.0 / m) + 320.0 / m - (320.0 / m) * (365.0 / m);
  EXPECT_NEAR(modularity(fm, p), q, 1e-15);
  EXPECT_NEAR(cross_zone_share(fm, p), 45.0 / 265.0, 1e-15);
}

TEST(Modularity, SingleZoneIsZero) {
  Partition p;
  p.assignment = {0, 0, 0, 0};
  p.zone_count = 1;
  EXPECT_EQ(modularity(two_pairs(), p), 0.0);
  EXPECT_EQ(cross_zone_share(two_pairs(), p), 0.0);
}

TEST(Sweep, PicksMaximizerAndBreaksTiesUpward) {
  const auto fm = two_pairs();
  const auto res = sweep_thresholds(fm, {0.05, 0.2, 0.25, 0.3, 0.45});
  ASSERT_EQ(res.points.size(), 5u);
  EXPECT_EQ(res.partition.zone_count, 2);
  // 0.25 and 0.3 give the same two pairs; the larger tau is kept.
  EXPECT_DOUBLE_EQ(res.tau_star, 0.3);
  for (const auto& pt : res.points) EXPECT_LE(pt.q, res.q_star);
  EXPECT_EQ(res.points[0].zone_count, 1);
  EXPECT_EQ(res.points[1].zone_count, 1);
  EXPECT_EQ(res.points[4].zone_count, 4);
  EXPECT_LT(res.cross_zone_share, res.cross_zone_share_initial);
  EXPECT_THROW(sweep_thresholds(fm, {}), DomainError);
}

TEST(Sweep, LabelsUseLowestDistrict) {
  const auto fm = two_pairs();
  const auto res = sweep_thresholds(fm, {0.25});
  const auto labels = zone_labels(fm, res.partition);
  EXPECT_EQ(labels.at("r1"), "czr0");
  EXPECT_EQ(labels.at("r3"), "czr2");
}
