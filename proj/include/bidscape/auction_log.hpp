#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "bidscape/money.hpp"

namespace bidscape {

struct ParticipantRecord {
  std::string advertiser_id;
  std::string context;
  int position = 0;            // 1-based slot rank
  double ranking_score = 0.0;  // opaque, dimensionless
  Micros cpc_bid;
  Micros cpc_cost;
  double pctr = 0.0;

  friend bool operator==(const ParticipantRecord&, const ParticipantRecord&) = default;
};

/// One logged auction. Participants are ordered by position (winner first).
struct AuctionSnapshot {
  std::string auction_id;
  std::int64_t timestamp = 0;
  std::vector<ParticipantRecord> participants;

  std::size_t size() const { return participants.size(); }

  friend bool operator==(const AuctionSnapshot&, const AuctionSnapshot&) = default;
};

/// Returns the first invariant the snapshot violates, or nullopt when valid.
/// Expects participants already sorted by position.
std::optional<std::string> validate(const AuctionSnapshot& snapshot);

enum class LogFormat { kJsonl, kCsv };

LogFormat parse_log_format(std::string_view name);

struct ParseIssue {
  std::size_t line = 0;  // 1-based line in the source; 0 when not line-bound
  std::string auction_id;
  std::string message;
};

struct ParseResult {
  std::vector<AuctionSnapshot> snapshots;
  std::vector<ParseIssue> issues;
};

/// Reads every well-formed snapshot in input order. Malformed lines and
/// invariant violations are collected into `issues`; parsing continues.
ParseResult parse_log(std::istream& source, LogFormat format);

void write_log(std::ostream& out, const std::vector<AuctionSnapshot>& snapshots, LogFormat format);

enum class GroupingKey { kGlobal, kByContext, kByAdvertiser, kByAdvertiserContext };

GroupingKey parse_grouping_key(std::string_view name);
std::string_view to_string(GroupingKey key);

/// Group label for one participant under `key`.
std::string group_label(const ParticipantRecord& participant, GroupingKey key);

/// A snapshot as seen from one group: the full auction (needed for the
/// neighbouring scores) plus the participants that belong to the group.
struct GroupMember {
  std::shared_ptr<const AuctionSnapshot> snapshot;
  std::vector<std::size_t> participants;  // indices into snapshot->participants
};

using SnapshotGroups = std::map<std::string, std::vector<GroupMember>>;

SnapshotGroups group_snapshots(const std::vector<AuctionSnapshot>& snapshots, GroupingKey key);

struct EngagementCounts {
  std::int64_t impressions = 0;
  std::int64_t clicks = 0;
  std::int64_t conversions = 0;
};

struct RateEstimate {
  double pctr = 0.0;
  double pcvr = 0.0;
};

/// Add-one smoothed click and conversion rates over pooled counts.
RateEstimate estimate_rates(const std::vector<EngagementCounts>& events);

}  // namespace bidscape
