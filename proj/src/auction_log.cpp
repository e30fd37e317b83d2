#include "bidscape/auction_log.hpp"

#include <algorithm>
#include <charconv>
#include <istream>
#include <ostream>
#include <set>
#include <stdexcept>
#include <system_error>
#include <unordered_map>

#include "json.hpp"

namespace bidscape {

namespace {

using nlohmann::json;

bool valid_utf8(std::string_view s) {
  std::size_t i = 0;
  while (i < s.size()) {
    auto c = static_cast<unsigned char>(s[i]);
    std::size_t extra = 0;
    if (c < 0x80) {
      ++i;
      continue;
    } else if ((c & 0xE0) == 0xC0 && c >= 0xC2) {
      extra = 1;
    } else if ((c & 0xF0) == 0xE0) {
      extra = 2;
    } else if ((c & 0xF8) == 0xF0 && c <= 0xF4) {
      extra = 3;
    } else {
      return false;
    }
    if (i + extra >= s.size()) return false;
    for (std::size_t k = 1; k <= extra; ++k) {
      if ((static_cast<unsigned char>(s[i + k]) & 0xC0) != 0x80) return false;
    }
    i += extra + 1;
  }
  return true;
}

void sort_by_position(AuctionSnapshot& snapshot) {
  std::stable_sort(snapshot.participants.begin(), snapshot.participants.end(),
                   [](const ParticipantRecord& a, const ParticipantRecord& b) {
                     return a.position < b.position;
                   });
}

std::string format_double(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  if (ec != std::errc()) throw std::runtime_error("cannot format number");
  return std::string(buf, ptr);
}

ParticipantRecord participant_from_json(const json& j) {
  if (!j.is_object()) throw std::invalid_argument("participant must be an object");
  auto require_int = [&](const char* key) {
    const auto& v = j.at(key);
    if (!v.is_number_integer()) throw std::invalid_argument(std::string(key) + " must be an integer");
    return v.get<std::int64_t>();
  };
  auto require_number = [&](const char* key) {
    const auto& v = j.at(key);
    if (!v.is_number()) throw std::invalid_argument(std::string(key) + " must be a number");
    return v.get<double>();
  };
  auto require_string = [&](const char* key) {
    const auto& v = j.at(key);
    if (!v.is_string()) throw std::invalid_argument(std::string(key) + " must be a string");
    return v.get<std::string>();
  };
  ParticipantRecord p;
  p.advertiser_id = require_string("advertiser");
  p.context = require_string("context");
  p.position = static_cast<int>(require_int("position"));
  p.ranking_score = require_number("score");
  p.cpc_bid = Micros{require_int("bid_micro")};
  p.cpc_cost = Micros{require_int("cost_micro")};
  p.pctr = require_number("pctr");
  return p;
}

json participant_to_json(const ParticipantRecord& p) {
  return json{{"advertiser", p.advertiser_id}, {"context", p.context},
              {"position", p.position},        {"score", p.ranking_score},
              {"bid_micro", p.cpc_bid.value},  {"cost_micro", p.cpc_cost.value},
              {"pctr", p.pctr}};
}

void parse_jsonl(std::istream& source, ParseResult& result) {
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(source, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    AuctionSnapshot snapshot;
    try {
      json j = json::parse(line);
      if (!j.is_object()) throw std::invalid_argument("line is not a JSON object");
      const auto& id = j.at("auction_id");
      if (!id.is_string()) throw std::invalid_argument("auction_id must be a string");
      snapshot.auction_id = id.get<std::string>();
      const auto& ts = j.at("ts");
      if (!ts.is_number_integer()) throw std::invalid_argument("ts must be an integer");
      snapshot.timestamp = ts.get<std::int64_t>();
      const auto& parts = j.at("participants");
      if (!parts.is_array()) throw std::invalid_argument("participants must be an array");
      for (const auto& p : parts) snapshot.participants.push_back(participant_from_json(p));
    } catch (const std::exception& e) {
      result.issues.push_back({line_no, snapshot.auction_id, std::string("parse error: ") + e.what()});
      continue;
    }
    sort_by_position(snapshot);
    if (auto reason = validate(snapshot)) {
      result.issues.push_back({line_no, snapshot.auction_id, *reason});
      continue;
    }
    result.snapshots.push_back(std::move(snapshot));
  }
}

std::vector<std::string> split_csv(std::string_view line) {
  std::vector<std::string> fields;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          cur.push_back('"');
          ++i;
        } else {
          quoted = false;
        }
      } else {
        cur.push_back(c);
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      fields.push_back(std::move(cur));
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  if (quoted) throw std::invalid_argument("unterminated quoted field");
  fields.push_back(std::move(cur));
  return fields;
}

std::string quote_csv(std::string_view field) {
  if (field.find_first_of(",\"\n\r") == std::string_view::npos) return std::string(field);
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out.push_back('"');
    out.push_back(c);
  }
  out.push_back('"');
  return out;
}

template <typename T>
T parse_number(const std::string& text, const char* column) {
  T value{};
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc() || ptr != text.data() + text.size()) {
    throw std::invalid_argument(std::string("bad ") + column + " '" + text + "'");
  }
  return value;
}

constexpr const char* kCsvColumns[] = {"auction_id", "ts",         "advertiser", "context", "position",
                                       "score",      "bid_micro",  "cost_micro", "pctr"};

void parse_csv(std::istream& source, ParseResult& result) {
  std::string line;
  std::size_t line_no = 0;
  std::unordered_map<std::string, std::size_t> column;
  bool have_header = false;

  struct Pending {
    AuctionSnapshot snapshot;
    std::size_t first_line = 0;
    std::optional<std::string> error;
  };
  std::vector<Pending> pending;
  std::unordered_map<std::string, std::size_t> by_id;

  while (std::getline(source, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    if (!valid_utf8(line)) {
      result.issues.push_back({line_no, "", "parse error: invalid UTF-8"});
      continue;
    }
    std::vector<std::string> fields;
    try {
      fields = split_csv(line);
    } catch (const std::exception& e) {
      result.issues.push_back({line_no, "", std::string("parse error: ") + e.what()});
      continue;
    }
    if (!have_header) {
      for (std::size_t i = 0; i < fields.size(); ++i) column[fields[i]] = i;
      for (const char* name : kCsvColumns) {
        if (!column.contains(name)) {
          result.issues.push_back({line_no, "", std::string("parse error: missing column ") + name});
          return;
        }
      }
      have_header = true;
      continue;
    }
    if (fields.size() != column.size()) {
      result.issues.push_back({line_no, "", "parse error: expected " + std::to_string(column.size()) +
                                                " fields, got " + std::to_string(fields.size())});
      continue;
    }
    auto field = [&](const char* name) -> const std::string& { return fields[column.at(name)]; };
    const std::string& id = field("auction_id");
    auto [it, inserted] = by_id.try_emplace(id, pending.size());
    if (inserted) {
      pending.push_back({});
      pending.back().snapshot.auction_id = id;
      pending.back().first_line = line_no;
    }
    Pending& target = pending[it->second];
    try {
      auto ts = parse_number<std::int64_t>(field("ts"), "ts");
      if (inserted) {
        target.snapshot.timestamp = ts;
      } else if (ts != target.snapshot.timestamp) {
        throw std::invalid_argument("ts differs between rows of one auction");
      }
      ParticipantRecord p;
      p.advertiser_id = field("advertiser");
      p.context = field("context");
      p.position = parse_number<int>(field("position"), "position");
      p.ranking_score = parse_number<double>(field("score"), "score");
      p.cpc_bid = Micros{parse_number<std::int64_t>(field("bid_micro"), "bid_micro")};
      p.cpc_cost = Micros{parse_number<std::int64_t>(field("cost_micro"), "cost_micro")};
      p.pctr = parse_number<double>(field("pctr"), "pctr");
      target.snapshot.participants.push_back(std::move(p));
    } catch (const std::exception& e) {
      if (!target.error) target.error = std::string("parse error at line ") + std::to_string(line_no) + ": " + e.what();
    }
  }

  for (auto& entry : pending) {
    if (entry.error) {
      result.issues.push_back({entry.first_line, entry.snapshot.auction_id, *entry.error});
      continue;
    }
    sort_by_position(entry.snapshot);
    if (auto reason = validate(entry.snapshot)) {
      result.issues.push_back({entry.first_line, entry.snapshot.auction_id, *reason});
      continue;
    }
    result.snapshots.push_back(std::move(entry.snapshot));
  }
}

}  // namespace

std::optional<std::string> validate(const AuctionSnapshot& snapshot) {
  const auto& ps = snapshot.participants;
  if (ps.empty()) return "no participants";
  for (std::size_t i = 0; i < ps.size(); ++i) {
    const auto& p = ps[i];
    if (p.position < 1) return "position must be >= 1";
    if (p.position != static_cast<int>(i) + 1) {
      for (std::size_t k = 0; k < i; ++k) {
        if (ps[k].position == p.position) return "duplicate position " + std::to_string(p.position);
      }
      return "positions not contiguous";
    }
    if (!(p.ranking_score > 0.0)) return "ranking score must be positive";
    if (!(p.pctr >= 0.0 && p.pctr <= 1.0)) return "pctr must be in [0,1]";
    if (p.cpc_bid.value <= 0) return "cpc bid must be positive";
    if (p.cpc_cost.value < 0) return "cpc cost must be non-negative";
    if (p.cpc_cost > p.cpc_bid) return "cpc cost exceeds cpc bid";
    if (i > 0 && p.ranking_score > ps[i - 1].ranking_score) return "ranking scores increase with position";
    if (!valid_utf8(p.advertiser_id) || !valid_utf8(p.context)) return "invalid UTF-8";
  }
  if (!valid_utf8(snapshot.auction_id)) return "invalid UTF-8";
  return std::nullopt;
}

LogFormat parse_log_format(std::string_view name) {
  if (name == "jsonl") return LogFormat::kJsonl;
  if (name == "csv") return LogFormat::kCsv;
  throw std::invalid_argument("unknown log format '" + std::string(name) + "'");
}

ParseResult parse_log(std::istream& source, LogFormat format) {
  ParseResult result;
  if (format == LogFormat::kJsonl) {
    parse_jsonl(source, result);
  } else {
    parse_csv(source, result);
  }
  return result;
}

void write_log(std::ostream& out, const std::vector<AuctionSnapshot>& snapshots, LogFormat format) {
  if (format == LogFormat::kJsonl) {
    for (const auto& s : snapshots) {
      json parts = json::array();
      for (const auto& p : s.participants) parts.push_back(participant_to_json(p));
      json line{{"auction_id", s.auction_id}, {"ts", s.timestamp}, {"participants", std::move(parts)}};
      out << line.dump() << '\n';
    }
    return;
  }
  bool first = true;
  for (const char* name : kCsvColumns) {
    out << (first ? "" : ",") << name;
    first = false;
  }
  out << '\n';
  for (const auto& s : snapshots) {
    for (const auto& p : s.participants) {
      out << quote_csv(s.auction_id) << ',' << s.timestamp << ',' << quote_csv(p.advertiser_id) << ','
          << quote_csv(p.context) << ',' << p.position << ',' << format_double(p.ranking_score) << ','
          << p.cpc_bid.value << ',' << p.cpc_cost.value << ',' << format_double(p.pctr) << '\n';
    }
  }
}

GroupingKey parse_grouping_key(std::string_view name) {
  if (name == "global") return GroupingKey::kGlobal;
  if (name == "by_context" || name == "context") return GroupingKey::kByContext;
  if (name == "by_advertiser" || name == "advertiser") return GroupingKey::kByAdvertiser;
  if (name == "by_advertiser_context" || name == "advertiser_context") return GroupingKey::kByAdvertiserContext;
  throw std::invalid_argument("unknown grouping key '" + std::string(name) + "'");
}

std::string_view to_string(GroupingKey key) {
  switch (key) {
    case GroupingKey::kGlobal:
      return "global";
    case GroupingKey::kByContext:
      return "by_context";
    case GroupingKey::kByAdvertiser:
      return "by_advertiser";
    case GroupingKey::kByAdvertiserContext:
      return "by_advertiser_context";
  }
  return "global";
}

std::string group_label(const ParticipantRecord& participant, GroupingKey key) {
  switch (key) {
    case GroupingKey::kGlobal:
      return "global";
    case GroupingKey::kByContext:
      return participant.context;
    case GroupingKey::kByAdvertiser:
      return participant.advertiser_id;
    case GroupingKey::kByAdvertiserContext:
      return participant.advertiser_id + "@" + participant.context;
  }
  return "global";
}

SnapshotGroups group_snapshots(const std::vector<AuctionSnapshot>& snapshots, GroupingKey key) {
  SnapshotGroups groups;
  for (const auto& s : snapshots) {
    auto shared = std::make_shared<const AuctionSnapshot>(s);
    // Labels in order of first appearance within the auction.
    std::vector<std::pair<std::string, std::vector<std::size_t>>> local;
    for (std::size_t i = 0; i < s.participants.size(); ++i) {
      std::string label = group_label(s.participants[i], key);
      auto it = std::find_if(local.begin(), local.end(), [&](const auto& e) { return e.first == label; });
      if (it == local.end()) {
        local.push_back({std::move(label), {i}});
      } else {
        it->second.push_back(i);
      }
    }
    for (auto& [label, members] : local) {
      groups[label].push_back(GroupMember{shared, std::move(members)});
    }
  }
  return groups;
}

RateEstimate estimate_rates(const std::vector<EngagementCounts>& events) {
  std::int64_t impressions = 0, clicks = 0, conversions = 0;
  for (const auto& e : events) {
    if (e.impressions < e.clicks || e.clicks < e.conversions || e.conversions < 0) {
      throw std::invalid_argument("counts must satisfy impressions >= clicks >= conversions >= 0");
    }
    impressions += e.impressions;
    clicks += e.clicks;
    conversions += e.conversions;
  }
  return RateEstimate{static_cast<double>(clicks + 1) / static_cast<double>(impressions + 2),
                      static_cast<double>(conversions + 1) / static_cast<double>(clicks + 2)};
}

}  // namespace bidscape
