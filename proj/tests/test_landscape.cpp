#include <gtest/gtest.h>

#include <algorithm>

#include "bidscape/error.hpp"
#include "bidscape/landscape.hpp"
#include "support.hpp"

using namespace bidscape;

namespace {

const RangeObservation* find(const std::vector<RangeObservation>& obs, const std::string& adv, int position) {
  for (const auto& o : obs) {
    if (o.advertiser_id == adv && o.position == position) return &o;
  }
  return nullptr;
}

void expect_rel(double actual, double expected, double rel) {
  EXPECT_LE(std::abs(actual - expected), rel * std::max(std::abs(expected), 1e-300)) << actual << " vs " << expected;
}

}  // namespace

TEST(DeriveRanges, WorkedAuctionListedTuples) {
  const auto obs = derive_ecpm_ranges(test::worked_auction());
  EXPECT_EQ(obs.size(), 7u);
  for (const auto& t : test::worked_auction_tuples()) {
    const auto* o = find(obs, t.advertiser, t.position);
    ASSERT_NE(o, nullptr) << t.advertiser << " @" << t.position;
    EXPECT_EQ(o->context, t.context);
    EXPECT_TRUE(test::agrees(o->ecpm_up, t.up)) << t.advertiser << " @" << t.position << " up " << o->ecpm_up;
    EXPECT_TRUE(test::agrees(o->ecpm_dn, t.dn)) << t.advertiser << " @" << t.position << " dn " << o->ecpm_dn;
    EXPECT_TRUE(test::agrees(o->ecpm_cost, t.cost)) << t.advertiser << " @" << t.position << " cost " << o->ecpm_cost;
  }
  for (const auto& [adv, position] : test::worked_auction_absences()) {
    EXPECT_EQ(find(obs, adv, position), nullptr) << adv << " @" << position;
  }
}

TEST(DeriveRanges, FilteredTopAdvertiserAtThirdPosition) {
  // At j=3 the top advertiser would sit below everyone: up is the old third
  // score in its units, dn its own eCPM.
  const auto s = test::worked_auction();
  const double own = 5.0 * 0.002588;
  const double up = s.participants[2].ranking_score / s.participants[0].ranking_score * own;
  EXPECT_NEAR(up, 0.0096, 0.00005);
  EXPECT_NEAR(own, 0.01294, 1e-12);
  EXPECT_LT(up, own);
}

TEST(DeriveRanges, MatchesReRankingOracle) {
  const auto s = test::worked_auction();
  const auto got = derive_ecpm_ranges(s);
  const auto want = test::oracle_ranges(s, 9.99);
  ASSERT_EQ(got.size(), want.size());
  for (const auto& w : want) {
    const auto* o = find(got, w.advertiser_id, w.position);
    ASSERT_NE(o, nullptr);
    expect_rel(o->ecpm_up, w.ecpm_up, 1e-12);
    expect_rel(o->ecpm_dn, w.ecpm_dn, 1e-12);
    expect_rel(o->ecpm_cost, w.ecpm_cost, 1e-12);
  }
}

TEST(DeriveRanges, SingleParticipant) {
  AuctionSnapshot s;
  s.auction_id = "solo";
  s.participants = {{"only", "ctx", 1, 0.01, Micros{5'000'000}, Micros{310'000}, 0.002}};
  const auto obs = derive_ecpm_ranges(s);
  ASSERT_EQ(obs.size(), 1u);
  EXPECT_EQ(obs[0].position, 1);
  EXPECT_DOUBLE_EQ(obs[0].ecpm_up, 9.99);
  EXPECT_DOUBLE_EQ(obs[0].ecpm_dn, 0.01);
  EXPECT_DOUBLE_EQ(obs[0].ecpm_cost, 0.00062);
}

TEST(DeriveRanges, MaxPositionAndMaxEcpm) {
  const auto obs = derive_ecpm_ranges(test::worked_auction(), RangeOptions{5.0, 1});
  EXPECT_EQ(obs.size(), 3u);
  for (const auto& o : obs) {
    EXPECT_EQ(o.position, 1);
    EXPECT_DOUBLE_EQ(o.ecpm_up, 5.0);
  }
  EXPECT_THROW(derive_ecpm_ranges(test::worked_auction(), RangeOptions{0.0, 0}), std::invalid_argument);
}

TEST(DeriveRanges, MemberSubset) {
  const std::vector<std::size_t> members{1};
  const auto obs = derive_ecpm_ranges(test::worked_auction(), members);
  ASSERT_EQ(obs.size(), 2u);
  for (const auto& o : obs) EXPECT_EQ(o.advertiser_id, "9620472854");
}

TEST(BinIndex, ExactMultiplesLandInTheirBin) {
  EXPECT_EQ(bin_index(0.03, 0.01), 3);
  EXPECT_EQ(bin_index(0.05, 0.01), 5);
  EXPECT_EQ(bin_index(0.0299, 0.01), 2);
  EXPECT_EQ(bin_index(0.004, 0.01), 0);
}

TEST(BuildLandscape, ReferenceWinRateRows) {
  const auto l = test::reference_landscape();
  const auto& d = l.dist;
  EXPECT_EQ(d.pdf_dn, (std::map<std::int64_t, double>{{1, 1}, {2, 1}, {3, 1}}));
  EXPECT_EQ(d.pdf_up, (std::map<std::int64_t, double>{{4, 1}, {5, 2}}));
  EXPECT_EQ(d.max_index, 5);
  EXPECT_EQ(std::vector<double>(d.cdf_dn.begin() + 1, d.cdf_dn.end()), (std::vector<double>{1, 2, 3, 3, 3}));
  EXPECT_EQ(std::vector<double>(d.cdf_up.begin() + 1, d.cdf_up.end()), (std::vector<double>{0, 0, 0, 1, 3}));
  EXPECT_EQ(d.n, 3.0);
  EXPECT_EQ(d.n_observations, 3.0);
}

TEST(BuildLandscape, ReferenceCostRows) {
  const auto& d = test::reference_landscape().dist;
  const std::vector<double> dn{0.008, 0.023, 0.043, 0.043, 0.043};
  const std::vector<double> up{0, 0, 0, 0.008, 0.043};
  for (std::size_t k = 1; k <= 5; ++k) {
    EXPECT_NEAR(d.cdf_cost_dn[k], dn[k - 1], 1e-9);
    EXPECT_NEAR(d.cdf_cost_up[k], up[k - 1], 1e-9);
  }
}

TEST(BuildLandscape, SkippedObservationStillCounts) {
  auto obs = test::reference_observations();
  obs.push_back({"d", "c", "", 1, 0.04, 0.004, 0.001});
  const auto l = build_landscape(obs);
  EXPECT_EQ(l.dist.n, 4.0);
  EXPECT_EQ(l.dist.n_observations, 4.0);
  EXPECT_EQ(l.dist.accepted(), 3.0);
  EXPECT_EQ(l.dist.pdf_dn.count(0), 0u);
}

TEST(BuildLandscape, Errors) {
  EXPECT_THROW(build_landscape({}), DataError);
  try {
    build_landscape({{"a", "c", "", 1, 0.005, 0.001, 0.0}});
    FAIL();
  } catch (const DataError& e) {
    EXPECT_STREQ(e.what(), "no observations in range");
  }
  EXPECT_THROW(build_landscape({{"a", "c", "", 1, 0.01, 0.02, 0.0}}), std::invalid_argument);
  EXPECT_THROW(build_landscape(test::reference_observations(), BuildOptions{0.0}), std::invalid_argument);
}

TEST(BuildLandscape, CampaignDivisorCountsAuctionAdvertiserPairs) {
  std::vector<RangeObservation> obs{
      {"a", "c", "x1", 1, 0.05, 0.02, 0.01},
      {"a", "c", "x1", 2, 0.02, 0.01, 0.01},
      {"b", "c", "x1", 1, 0.05, 0.02, 0.01},
      {"a", "c", "x2", 1, 0.05, 0.02, 0.01},
  };
  EXPECT_EQ(build_landscape(obs).dist.n, 3.0);
  EXPECT_EQ(build_landscape(obs, BuildOptions{0.01, BuildOptions::Divisor::kObservations}).dist.n, 4.0);
}

TEST(BuildLandscape, OrderDoesNotMatter) {
  std::vector<RangeObservation> obs;
  for (int k = 0; k < 40; ++k) {
    const double dn = 0.001 * (k % 13 + 1);
    obs.push_back({"a" + std::to_string(k), "c", "", 1, dn + 0.0007 * (k % 7 + 1), dn, 0.1 / (k + 3)});
  }
  const auto forward = build_landscape(obs, BuildOptions{0.001});
  std::reverse(obs.begin(), obs.end());
  std::rotate(obs.begin(), obs.begin() + 11, obs.end());
  EXPECT_EQ(build_landscape(obs, BuildOptions{0.001}), forward);
}

TEST(QueryWinrate, ReferenceModel) {
  const auto l = test::reference_landscape();
  EXPECT_DOUBLE_EQ(query_winrate(l, 0.01), 1.0 / 3.0);
  EXPECT_DOUBLE_EQ(query_winrate(l, 0.02), 2.0 / 3.0);
  EXPECT_DOUBLE_EQ(query_winrate(l, 0.03), 1.0);
  EXPECT_DOUBLE_EQ(query_winrate(l, 0.04), 2.0 / 3.0);
  EXPECT_DOUBLE_EQ(query_winrate(l, 0.05), 0.0);
  EXPECT_DOUBLE_EQ(query_winrate(l, 0.001), 0.0);
  EXPECT_DOUBLE_EQ(query_winrate(l, 0.0), 0.0);
  // Above max_index the last bin's value applies.
  EXPECT_DOUBLE_EQ(query_winrate(l, 3.0), 0.0);
}

TEST(QueryWinrate, MonotoneVariant) {
  const auto l = test::reference_landscape();
  EXPECT_DOUBLE_EQ(query_winrate_monotone(l, 0.05), 1.0);
  EXPECT_DOUBLE_EQ(query_winrate_monotone(l, 0.02), 2.0 / 3.0);
  EXPECT_DOUBLE_EQ(query_winrate_monotone(l, 0.001), 0.0);
}

TEST(QueryCost, ReferenceModel) {
  const auto l = test::reference_landscape();
  EXPECT_NEAR(query_cost(l, 0.01), 0.008, 1e-12);
  EXPECT_NEAR(query_cost(l, 0.02), 0.0115, 1e-12);
  EXPECT_NEAR(query_cost(l, 0.03), 0.043 / 3.0, 1e-12);
  EXPECT_NEAR(query_cost(l, 0.04), 0.0175, 1e-12);
  EXPECT_NEAR(query_cost(l, 0.05), 0.0175, 1e-12);  // falls back to bin 4
  EXPECT_FALSE(cost_defined(l, 0.005));
  try {
    query_cost(l, 0.005);
    FAIL();
  } catch (const DataError& e) {
    EXPECT_STREQ(e.what(), "cost undefined below bid");
  }
}

TEST(QueryCost, AgreesWithDirectOracle) {
  std::vector<RangeObservation> obs;
  for (int k = 0; k < 25; ++k) {
    const double dn = 0.002 * (k % 9) + 0.0005;
    obs.push_back({"a", "c", "", 1, dn + 0.003 * (k % 4), dn, 0.0001 * (k + 1)});
  }
  const auto l = build_landscape(obs, BuildOptions{0.002, BuildOptions::Divisor::kObservations});
  const test::OracleModel oracle(obs, 0.002, static_cast<double>(obs.size()));
  for (int k = 0; k < 30; ++k) {
    const double bid = 0.002 * k;
    EXPECT_NEAR(query_winrate(l, bid), oracle.winrate(bid), 1e-12) << bid;
    const auto want = oracle.cost(bid);
    ASSERT_EQ(cost_defined(l, bid), want.has_value()) << bid;
    if (want) EXPECT_NEAR(query_cost(l, bid), *want, 1e-12) << bid;
  }
}

TEST(Merge, IdentityWithEmpty) {
  const auto l = test::reference_landscape();
  const auto merged = merge_landscapes(l, BidLandscape::empty("reference", 0.01), 1.0);
  EXPECT_EQ(merged.dist, l.dist);
}

TEST(Merge, SplitsEqualBatch) {
  auto obs = test::reference_observations();
  const BuildOptions opts{0.01};
  const auto a = build_landscape({obs[0]}, opts, "g");
  const auto b = build_landscape({obs[1], obs[2]}, opts, "g");
  const auto merged = merge_landscapes(a, b, 1.0);
  const auto batch = build_landscape(obs, opts, "g");
  EXPECT_EQ(merged.dist.pdf_dn, batch.dist.pdf_dn);
  EXPECT_EQ(merged.dist.pdf_up, batch.dist.pdf_up);
  EXPECT_EQ(merged.dist.n, batch.dist.n);
  for (double bid = 0.0; bid < 0.07; bid += 0.01) {
    EXPECT_DOUBLE_EQ(query_winrate(merged, bid), query_winrate(batch, bid));
  }
}

TEST(Merge, SelfDecayKeepsWinRates) {
  const auto l = test::reference_landscape();
  const auto m = merge_landscapes(l, l, 0.5);
  EXPECT_DOUBLE_EQ(m.dist.n, 4.5);
  for (double bid : {0.01, 0.02, 0.03, 0.04, 0.05}) {
    EXPECT_NEAR(query_winrate(m, bid), query_winrate(l, bid), 1e-12);
    EXPECT_NEAR(query_cost(m, bid), query_cost(l, bid), 1e-12);
  }
}

TEST(Merge, Errors) {
  const auto l = test::reference_landscape();
  EXPECT_THROW(merge_landscapes(l, l, 0.0), std::invalid_argument);
  EXPECT_THROW(merge_landscapes(l, l, 1.5), std::invalid_argument);
  EXPECT_THROW(merge_landscapes(l, BidLandscape::empty("reference", 0.02), 1.0), std::invalid_argument);
  EXPECT_THROW(merge_landscapes(l, BidLandscape::empty("other", 0.01), 1.0), std::invalid_argument);
}

TEST(Pipeline, GroupsByContext) {
  const auto r = build_group_landscapes({test::worked_auction()}, PipelineOptions{});
  // Per-impression eCPMs here are far below one 0.01 bin, so every range is skipped.
  EXPECT_TRUE(r.landscapes.empty());
  EXPECT_EQ(r.empty_groups.size(), 2u);

  PipelineOptions fine;
  fine.build.bin_size = 0.0001;
  const auto g = build_group_landscapes({test::worked_auction()}, fine);
  ASSERT_EQ(g.landscapes.size(), 2u);
  EXPECT_EQ(g.landscapes.at("1_mobile").dist.n, 2.0);
  EXPECT_EQ(g.landscapes.at("1_desktop").dist.n, 1.0);
  EXPECT_EQ(g.landscapes.at("1_desktop").group, "1_desktop");
}
