#include <gtest/gtest.h>

#include <fstream>
#include <sstream>

#include "bidscape/auction_log.hpp"
#include "support.hpp"

using namespace bidscape;

namespace {

ParseResult parse_text(const std::string& text, LogFormat format) {
  std::istringstream in(text);
  return parse_log(in, format);
}

ParseResult parse_file(const std::string& name, LogFormat format) {
  std::ifstream in(test::fixture(name));
  return parse_log(in, format);
}

AuctionSnapshot two_slot(const std::string& id) {
  AuctionSnapshot s;
  s.auction_id = id;
  s.timestamp = 7;
  s.participants = {{"x", "ctx", 1, 0.5, Micros{1'000'000}, Micros{400'000}, 0.5},
                    {"y", "ctx", 2, 0.4, Micros{900'000}, Micros{0}, 0.45}};
  return s;
}

}  // namespace

TEST(ParseLog, EmptyStreamGivesNothing) {
  auto r = parse_text("", LogFormat::kJsonl);
  EXPECT_TRUE(r.snapshots.empty());
  EXPECT_TRUE(r.issues.empty());
  r = parse_text("", LogFormat::kCsv);
  EXPECT_TRUE(r.snapshots.empty());
}

TEST(ParseLog, WorkedAuctionJsonl) {
  auto r = parse_file("worked_auction.jsonl", LogFormat::kJsonl);
  ASSERT_TRUE(r.issues.empty());
  ASSERT_EQ(r.snapshots.size(), 1u);
  const auto& s = r.snapshots[0];
  ASSERT_EQ(s.size(), 3u);
  EXPECT_DOUBLE_EQ(s.participants[0].ranking_score, 3.117e-4);
  EXPECT_DOUBLE_EQ(s.participants[1].ranking_score, 2.387e-4);
  EXPECT_DOUBLE_EQ(s.participants[2].ranking_score, 2.312e-4);
  EXPECT_EQ(s, test::worked_auction());
}

TEST(ParseLog, CsvMatchesJsonl) {
  auto csv = parse_file("worked_auction.csv", LogFormat::kCsv);
  ASSERT_TRUE(csv.issues.empty());
  ASSERT_EQ(csv.snapshots.size(), 1u);
  EXPECT_EQ(csv.snapshots[0], test::worked_auction());
}

TEST(ParseLog, GapInPositionsIsRejected) {
  auto r = parse_text(
      R"({"auction_id":"g","ts":1,"participants":[)"
      R"({"advertiser":"a","context":"c","position":1,"score":0.5,"bid_micro":10,"cost_micro":1,"pctr":0.1},)"
      R"({"advertiser":"b","context":"c","position":3,"score":0.4,"bid_micro":10,"cost_micro":0,"pctr":0.1}]})",
      LogFormat::kJsonl);
  EXPECT_TRUE(r.snapshots.empty());
  ASSERT_EQ(r.issues.size(), 1u);
  EXPECT_EQ(r.issues[0].message, "positions not contiguous");
  EXPECT_EQ(r.issues[0].auction_id, "g");
  EXPECT_EQ(r.issues[0].line, 1u);
}

TEST(ParseLog, BadLinesAreReportedAndParsingContinues) {
  auto r = parse_file("mixed_quality.jsonl", LogFormat::kJsonl);
  ASSERT_EQ(r.snapshots.size(), 2u);
  EXPECT_EQ(r.snapshots[0].auction_id, "ok-1");
  EXPECT_EQ(r.snapshots[1].auction_id, "ok-2");
  ASSERT_EQ(r.issues.size(), 2u);
  EXPECT_EQ(r.issues[0].line, 2u);
  EXPECT_EQ(r.issues[0].message, "positions not contiguous");
  EXPECT_EQ(r.issues[1].line, 3u);
  EXPECT_NE(r.issues[1].message.find("parse error"), std::string::npos);
}

TEST(ParseLog, ParticipantsAreSortedByPosition) {
  auto r = parse_text(
      R"({"auction_id":"s","ts":1,"participants":[)"
      R"({"advertiser":"b","context":"c","position":2,"score":0.4,"bid_micro":10,"cost_micro":0,"pctr":0.1},)"
      R"({"advertiser":"a","context":"c","position":1,"score":0.5,"bid_micro":10,"cost_micro":1,"pctr":0.1}]})",
      LogFormat::kJsonl);
  ASSERT_EQ(r.snapshots.size(), 1u);
  EXPECT_EQ(r.snapshots[0].participants[0].advertiser_id, "a");
}

TEST(ParseLog, CsvGroupsRowsByAuction) {
  const std::string csv =
      "auction_id,ts,advertiser,context,position,score,bid_micro,cost_micro,pctr\n"
      "a1,5,x,k,1,0.5,100,50,0.5\n"
      "a2,6,y,k,1,0.3,100,10,0.3\n"
      "a1,5,y,k,2,0.2,100,0,0.2\n";
  auto r = parse_text(csv, LogFormat::kCsv);
  ASSERT_TRUE(r.issues.empty());
  ASSERT_EQ(r.snapshots.size(), 2u);
  EXPECT_EQ(r.snapshots[0].auction_id, "a1");
  EXPECT_EQ(r.snapshots[0].size(), 2u);
  EXPECT_EQ(r.snapshots[1].size(), 1u);
}

TEST(ParseLog, CsvMissingColumn) {
  auto r = parse_text("auction_id,ts\nx,1\n", LogFormat::kCsv);
  EXPECT_TRUE(r.snapshots.empty());
  ASSERT_FALSE(r.issues.empty());
  EXPECT_NE(r.issues[0].message.find("missing column"), std::string::npos);
}

TEST(ParseLog, FormatNames) {
  EXPECT_EQ(parse_log_format("jsonl"), LogFormat::kJsonl);
  EXPECT_EQ(parse_log_format("csv"), LogFormat::kCsv);
  EXPECT_THROW(parse_log_format("xml"), std::invalid_argument);
}

TEST(Validate, Invariants) {
  EXPECT_FALSE(validate(two_slot("ok")).has_value());

  AuctionSnapshot empty;
  EXPECT_EQ(validate(empty), "no participants");

  auto s = two_slot("dup");
  s.participants[1].position = 1;
  EXPECT_EQ(validate(s), "duplicate position 1");

  s = two_slot("cost");
  s.participants[0].cpc_cost = Micros{2'000'000};
  EXPECT_EQ(validate(s), "cpc cost exceeds cpc bid");

  s = two_slot("order");
  s.participants[1].ranking_score = 0.9;
  EXPECT_EQ(validate(s), "ranking scores increase with position");

  s = two_slot("pctr");
  s.participants[0].pctr = 1.5;
  EXPECT_TRUE(validate(s).has_value());

  s = two_slot("score");
  s.participants[0].ranking_score = 0.0;
  EXPECT_TRUE(validate(s).has_value());

  s = two_slot("bid");
  s.participants[1].cpc_bid = Micros{0};
  EXPECT_TRUE(validate(s).has_value());

  s = two_slot("utf8");
  s.participants[0].advertiser_id = std::string("\xC3", 1);
  EXPECT_EQ(validate(s), "invalid UTF-8");
}

TEST(Validate, SingleParticipantIsAccepted) {
  auto s = two_slot("one");
  s.participants.pop_back();
  EXPECT_FALSE(validate(s).has_value());
}

TEST(WriteLog, RoundTripBothFormats) {
  std::vector<AuctionSnapshot> snaps{test::worked_auction(), two_slot("b,\"quoted\"")};
  for (auto format : {LogFormat::kJsonl, LogFormat::kCsv}) {
    std::stringstream buf;
    write_log(buf, snaps, format);
    auto r = parse_log(buf, format);
    ASSERT_TRUE(r.issues.empty());
    EXPECT_EQ(r.snapshots, snaps);
  }
}

TEST(GroupSnapshots, Global) {
  std::vector<AuctionSnapshot> snaps{two_slot("1"), two_slot("2"), two_slot("3")};
  auto g = group_snapshots(snaps, GroupingKey::kGlobal);
  ASSERT_EQ(g.size(), 1u);
  EXPECT_EQ(g.at("global").size(), 3u);
  EXPECT_EQ(g.at("global")[0].participants.size(), 2u);
}

TEST(GroupSnapshots, ByContextSplitsMixedAuction) {
  auto g = group_snapshots({test::worked_auction()}, GroupingKey::kByContext);
  ASSERT_EQ(g.size(), 2u);
  const auto& mobile = g.at("1_mobile");
  ASSERT_EQ(mobile.size(), 1u);
  ASSERT_EQ(mobile[0].participants.size(), 2u);
  EXPECT_EQ(mobile[0].snapshot->participants[mobile[0].participants[0]].advertiser_id, "9192982670");
  EXPECT_EQ(mobile[0].snapshot->participants[mobile[0].participants[1]].advertiser_id, "9575604786");
  const auto& desktop = g.at("1_desktop");
  ASSERT_EQ(desktop[0].participants.size(), 1u);
  EXPECT_EQ(desktop[0].snapshot->participants[desktop[0].participants[0]].advertiser_id, "9620472854");
  // The full auction stays available for neighbour scores.
  EXPECT_EQ(desktop[0].snapshot->size(), 3u);
}

TEST(GroupSnapshots, EmptyAndOtherKeys) {
  EXPECT_TRUE(group_snapshots({}, GroupingKey::kByContext).empty());
  auto g = group_snapshots({test::worked_auction()}, GroupingKey::kByAdvertiserContext);
  EXPECT_EQ(g.size(), 3u);
  EXPECT_TRUE(g.count("9620472854@1_desktop"));
  EXPECT_EQ(group_snapshots({test::worked_auction()}, GroupingKey::kByAdvertiser).size(), 3u);
}

TEST(GroupingKeyNames, ParseAndPrint) {
  for (auto k : {GroupingKey::kGlobal, GroupingKey::kByContext, GroupingKey::kByAdvertiser,
                 GroupingKey::kByAdvertiserContext}) {
    EXPECT_EQ(parse_grouping_key(to_string(k)), k);
  }
  EXPECT_EQ(parse_grouping_key("context"), GroupingKey::kByContext);
  EXPECT_THROW(parse_grouping_key("campaign"), std::invalid_argument);
}

TEST(EstimateRates, Smoothing) {
  auto r = estimate_rates({{0, 0, 0}});
  EXPECT_DOUBLE_EQ(r.pctr, 0.5);
  EXPECT_DOUBLE_EQ(r.pcvr, 0.5);
  r = estimate_rates({{998, 8, 2}});
  EXPECT_DOUBLE_EQ(r.pctr, 9.0 / 1000.0);
  EXPECT_DOUBLE_EQ(r.pcvr, 3.0 / 10.0);
  auto pooled = estimate_rates({{500, 5, 1}, {498, 3, 1}});
  EXPECT_DOUBLE_EQ(pooled.pctr, r.pctr);
  EXPECT_DOUBLE_EQ(pooled.pcvr, r.pcvr);
  EXPECT_THROW(estimate_rates({{1, 2, 0}}), std::invalid_argument);
}
