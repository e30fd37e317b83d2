#include "bidscape/json_io.hpp"

#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "bidscape/error.hpp"

namespace bidscape {

namespace {

// Integral values are written without a fractional part so counts read as
// counts ({"1": 1} rather than {"1": 1.0}).
Json number(double x) {
  if (std::isfinite(x) && std::trunc(x) == x && std::abs(x) < 9007199254740992.0) {
    return static_cast<std::int64_t>(x);
  }
  return x;
}

Json pdf_to_json(const std::map<std::int64_t, double>& pdf) {
  Json j = Json::object();
  for (const auto& [index, mass] : pdf) j[std::to_string(index)] = number(mass);
  return j;
}

std::uint64_t fnv1a(std::string_view text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

[[noreturn]] void corrupt(std::string_view source, const std::string& what) {
  throw IntegrityError(std::string(source) + ": " + what);
}

double get_number(const Json& j, const char* key, std::string_view source) {
  auto it = j.find(key);
  if (it == j.end() || !it->is_number()) corrupt(source, std::string("missing or non-numeric field '") + key + "'");
  return it->get<double>();
}

std::map<std::int64_t, double> pdf_from_json(const Json& j, const char* key, std::string_view source) {
  auto it = j.find(key);
  if (it == j.end() || !it->is_object()) corrupt(source, std::string("missing object field '") + key + "'");
  std::map<std::int64_t, double> pdf;
  for (const auto& [k, v] : it->items()) {
    std::int64_t index = 0;
    auto [ptr, ec] = std::from_chars(k.data(), k.data() + k.size(), index);
    if (ec != std::errc() || ptr != k.data() + k.size()) corrupt(source, std::string(key) + ": bad bin index '" + k + "'");
    if (!v.is_number()) corrupt(source, std::string(key) + ": non-numeric mass at bin " + k);
    pdf[index] = v.get<double>();
  }
  return pdf;
}

template <typename T>
T field_or(const Json& j, const char* key, T fallback) {
  auto it = j.find(key);
  if (it == j.end() || it->is_null()) return fallback;
  return it->get<T>();
}

Json optional_number(const std::optional<double>& v) { return v ? Json(*v) : Json(nullptr); }

}  // namespace

ValidationError::ValidationError(std::map<std::string, std::string> fields)
    : std::invalid_argument(fields.empty() ? std::string("invalid request") : fields.begin()->second),
      fields_(std::move(fields)) {}

ValidationError::ValidationError(const std::string& field, const std::string& message)
    : ValidationError(std::map<std::string, std::string>{{field, message}}) {}

Json to_json(const BidLandscape& landscape) {
  const BinnedDistribution& d = landscape.dist;
  Json j;
  j["group"] = landscape.group;
  j["bin_size"] = d.bin_size;
  j["n"] = number(d.n);
  j["n_observations"] = number(d.n_observations);
  j["max_index"] = d.max_index;
  j["pdf_dn"] = pdf_to_json(d.pdf_dn);
  j["pdf_up"] = pdf_to_json(d.pdf_up);
  j["pdf_cost_dn"] = pdf_to_json(d.pdf_cost_dn);
  j["pdf_cost_up"] = pdf_to_json(d.pdf_cost_up);
  j["built_at"] = landscape.built_at;
  return j;
}

BidLandscape landscape_from_json(const Json& j, std::string_view source) {
  if (!j.is_object()) corrupt(source, "landscape must be a JSON object");
  auto group = j.find("group");
  if (group == j.end() || !group->is_string()) corrupt(source, "missing string field 'group'");
  BidLandscape l;
  l.group = group->get<std::string>();
  BinnedDistribution& d = l.dist;
  d.bin_size = get_number(j, "bin_size", source);
  if (!(d.bin_size > 0.0)) corrupt(source, "bin_size must be positive");
  d.n = get_number(j, "n", source);
  d.pdf_dn = pdf_from_json(j, "pdf_dn", source);
  d.pdf_up = pdf_from_json(j, "pdf_up", source);
  d.pdf_cost_dn = pdf_from_json(j, "pdf_cost_dn", source);
  d.pdf_cost_up = pdf_from_json(j, "pdf_cost_up", source);

  std::int64_t highest = 0;
  for (const auto* pdf : {&d.pdf_dn, &d.pdf_up, &d.pdf_cost_dn, &d.pdf_cost_up}) {
    if (!pdf->empty()) {
      if (pdf->begin()->first < 0) corrupt(source, "negative bin index");
      highest = std::max(highest, pdf->rbegin()->first);
    }
  }
  auto max_index = j.find("max_index");
  if (max_index != j.end()) {
    if (!max_index->is_number_integer()) corrupt(source, "max_index must be an integer");
    d.max_index = max_index->get<std::int64_t>();
    if (d.max_index < highest) corrupt(source, "max_index below the highest populated bin");
  } else {
    d.max_index = highest;
  }
  d.n_observations = j.contains("n_observations") ? get_number(j, "n_observations", source) : d.n;
  auto built_at = j.find("built_at");
  if (built_at != j.end()) {
    if (!built_at->is_number_integer()) corrupt(source, "built_at must be an integer");
    l.built_at = built_at->get<std::int64_t>();
  }
  d.recompute_cdfs();
  return l;
}

std::string dump_landscape(const BidLandscape& landscape) {
  Json j = to_json(landscape);
  const std::string body = j.dump();
  j["checksum"] = hex64(fnv1a(body));
  return j.dump() + "\n";
}

BidLandscape parse_landscape(std::string_view text, std::string_view source) {
  Json j;
  try {
    j = Json::parse(text);
  } catch (const Json::parse_error& e) {
    corrupt(source, std::string("invalid JSON: ") + e.what());
  }
  if (!j.is_object()) corrupt(source, "landscape must be a JSON object");
  if (auto it = j.find("checksum"); it != j.end()) {
    if (!it->is_string()) corrupt(source, "checksum must be a string");
    const std::string stored = it->get<std::string>();
    j.erase("checksum");
    if (hex64(fnv1a(j.dump())) != stored) corrupt(source, "checksum mismatch");
  }
  return landscape_from_json(j, source);
}

RecommendRequest parse_recommend_request(const Json& body) {
  if (!body.is_object()) throw ValidationError("body", "request body must be a JSON object");
  std::map<std::string, std::string> errors;
  RecommendRequest req;

  auto positive = [&](const char* key, const char* label, double& out) {
    auto it = body.find(key);
    if (it == body.end() || it->is_null()) {
      errors[key] = std::string(key) + " is required";
    } else if (!it->is_number()) {
      errors[key] = std::string(key) + " must be a number";
    } else {
      out = it->get<double>();
      if (!(out > 0.0)) errors[key] = std::string(label) + " must be positive";
    }
  };

  if (auto it = body.find("group"); it != body.end() && !it->is_null()) {
    if (it->is_string() && !it->get<std::string>().empty()) {
      req.group = it->get<std::string>();
    } else {
      errors["group"] = "group must be a non-empty string";
    }
  } else {
    errors["group"] = "group is required";
  }
  positive("impressions", "impressions", req.inputs.impressions);
  positive("pctr", "pctr", req.inputs.pctr);
  positive("pcvr", "pcvr", req.inputs.pcvr);
  positive("cpa_goal", "cpa_goal", req.goal.target_cpa);
  positive("budget", "budget", req.goal.budget);
  if (!errors.count("pctr") && req.inputs.pctr > 1.0) errors["pctr"] = "pctr must be at most 1";
  if (!errors.count("pcvr") && req.inputs.pcvr > 1.0) errors["pcvr"] = "pcvr must be at most 1";
  if (auto it = body.find("tolerance"); it != body.end() && !it->is_null()) {
    if (!it->is_number() || !(it->get<double>() >= 0.0)) {
      errors["tolerance"] = "tolerance must be a non-negative number";
    } else {
      req.goal.tolerance = it->get<double>();
    }
  }
  if (!errors.empty()) throw ValidationError(std::move(errors));
  req.inputs.group = req.group;
  return req;
}

Json to_json(const Recommendation& rec) {
  Json j;
  j["bid"] = rec.bid;
  j["clicks"] = rec.clicks;
  j["conversions"] = rec.conversions;
  j["spend"] = rec.spend;
  j["cpa"] = rec.cpa;
  j["status"] = std::string(to_string(rec.status));
  j["adjusted_budget"] = optional_number(rec.adjusted_budget);
  j["adjusted_cpa"] = optional_number(rec.adjusted_cpa);
  return j;
}

Json to_json(const CurvePoint& p) {
  Json j;
  j["bid"] = p.bid;
  j["winrate"] = p.winrate;
  j["cost"] = optional_number(p.cost);
  j["cpa"] = optional_number(p.cpa);
  j["clicks"] = p.clicks;
  j["conversions"] = p.conversions;
  j["spend"] = p.spend;
  return j;
}

Json curves_to_json(const std::string& group, const std::vector<CurvePoint>& points) {
  Json j;
  j["group"] = group;
  Json arr = Json::array();
  for (const auto& p : points) arr.push_back(to_json(p));
  j["points"] = std::move(arr);
  return j;
}

void write_curves_csv(std::ostream& out, const std::vector<CurvePoint>& points) {
  auto fmt = [](double v) {
    char buf[32];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, ptr);
  };
  out << "bid,winrate,cost,cpa,clicks,conversions,spend\n";
  for (const auto& p : points) {
    out << fmt(p.bid) << ',' << fmt(p.winrate) << ',' << (p.cost ? fmt(*p.cost) : "") << ','
        << (p.cpa ? fmt(*p.cpa) : "") << ',' << fmt(p.clicks) << ',' << fmt(p.conversions) << ',' << fmt(p.spend)
        << '\n';
  }
}

Json to_json(const RangeObservation& o) {
  Json j;
  j["advertiser"] = o.advertiser_id;
  j["context"] = o.context;
  j["auction_id"] = o.auction_id;
  j["position"] = o.position;
  j["ecpm_up"] = o.ecpm_up;
  j["ecpm_dn"] = o.ecpm_dn;
  j["ecpm_cost"] = o.ecpm_cost;
  return j;
}

RangeObservation observation_from_json(const Json& j) {
  if (!j.is_object()) throw DataError("observation must be a JSON object");
  RangeObservation o;
  try {
    o.advertiser_id = field_or<std::string>(j, "advertiser", "");
    o.context = field_or<std::string>(j, "context", "");
    o.auction_id = field_or<std::string>(j, "auction_id", "");
    o.position = field_or<int>(j, "position", 0);
    o.ecpm_up = j.at("ecpm_up").get<double>();
    o.ecpm_dn = j.at("ecpm_dn").get<double>();
    o.ecpm_cost = j.at("ecpm_cost").get<double>();
  } catch (const Json::exception& e) {
    throw DataError(std::string("bad observation: ") + e.what());
  }
  return o;
}

std::vector<RangeObservation> read_observations(std::istream& in) {
  std::vector<RangeObservation> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      out.push_back(observation_from_json(Json::parse(line)));
    } catch (const Json::exception& e) {
      throw DataError("line " + std::to_string(line_no) + ": " + e.what());
    } catch (const DataError& e) {
      throw DataError("line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

void write_observations(std::ostream& out, const std::vector<RangeObservation>& observations) {
  for (const auto& o : observations) out << to_json(o).dump() << '\n';
}

Json to_json(const MarketConfig& market) {
  Json j;
  j["slots"] = market.slots;
  j["reserve_cpc"] = market.reserve_cpc;
  j["seed"] = market.seed;
  Json advertisers = Json::array();
  for (const auto& a : market.advertisers) {
    Json x;
    x["advertiser_id"] = a.advertiser_id;
    x["context"] = a.context;
    x["base_bid"] = a.base_bid;
    x["bid_jitter"] = a.bid_jitter;
    x["quality"] = a.quality;
    x["pctr_by_position"] = a.pctr_by_position;
    x["participation_rate"] = a.participation_rate;
    x["pcvr"] = a.pcvr;
    x["budget"] = a.budget;
    advertisers.push_back(std::move(x));
  }
  j["advertisers"] = std::move(advertisers);
  return j;
}

MarketConfig market_from_json(const Json& j) {
  if (!j.is_object()) throw DataError("market config must be a JSON object");
  MarketConfig m;
  try {
    m.slots = field_or<int>(j, "slots", 1);
    m.reserve_cpc = field_or<double>(j, "reserve_cpc", 0.0);
    m.seed = field_or<std::uint64_t>(j, "seed", 0);
    for (const auto& x : j.at("advertisers")) {
      SimAdvertiser a;
      a.advertiser_id = x.at("advertiser_id").get<std::string>();
      a.context = field_or<std::string>(x, "context", a.context);
      a.base_bid = x.at("base_bid").get<double>();
      a.bid_jitter = field_or<double>(x, "bid_jitter", a.bid_jitter);
      a.quality = field_or<double>(x, "quality", a.quality);
      a.pctr_by_position = field_or<std::vector<double>>(x, "pctr_by_position", a.pctr_by_position);
      a.participation_rate = field_or<double>(x, "participation_rate", a.participation_rate);
      a.pcvr = field_or<double>(x, "pcvr", a.pcvr);
      a.budget = field_or<double>(x, "budget", a.budget);
      m.advertisers.push_back(std::move(a));
    }
  } catch (const Json::exception& e) {
    throw DataError(std::string("bad market config: ") + e.what());
  }
  try {
    validate(m);
  } catch (const std::invalid_argument& e) {
    throw DataError(std::string("bad market config: ") + e.what());
  }
  return m;
}

Json to_json(const CpaDataset& dataset) {
  Json cases = Json::array();
  for (const auto& c : dataset.cases) {
    Json x;
    x["campaign_id"] = c.campaign_id;
    x["group"] = c.group;
    x["current_bid"] = c.current_bid;
    x["true_cpa"] = c.true_cpa;
    x["pctr"] = c.pctr;
    x["pcvr"] = c.pcvr;
    Json history = Json::array();
    for (const auto& h : c.history) history.push_back({{"bid", h.bid}, {"cpa", h.cpa}});
    x["history"] = std::move(history);
    cases.push_back(std::move(x));
  }
  Json j;
  j["cases"] = std::move(cases);
  return j;
}

CpaDataset cpa_dataset_from_json(const Json& j) {
  CpaDataset d;
  try {
    for (const auto& x : j.at("cases")) {
      CpaCase c;
      c.campaign_id = x.at("campaign_id").get<std::string>();
      c.group = field_or<std::string>(x, "group", c.campaign_id);
      c.current_bid = x.at("current_bid").get<double>();
      c.true_cpa = x.at("true_cpa").get<double>();
      c.pctr = field_or<double>(x, "pctr", 0.0);
      c.pcvr = field_or<double>(x, "pcvr", 0.0);
      if (auto it = x.find("history"); it != x.end()) {
        for (const auto& h : *it) c.history.push_back({h.at("bid").get<double>(), h.at("cpa").get<double>()});
      }
      d.cases.push_back(std::move(c));
    }
  } catch (const Json::exception& e) {
    throw DataError(std::string("bad dataset: ") + e.what());
  }
  return d;
}

std::map<std::string, double> predictions_from_json(const Json& j) {
  if (!j.is_object()) throw DataError("predictions must be a JSON object of campaign_id to CPA");
  std::map<std::string, double> out;
  for (const auto& [k, v] : j.items()) {
    if (!v.is_number()) throw DataError("prediction for '" + k + "' is not a number");
    out[k] = v.get<double>();
  }
  return out;
}

Json to_json(const ForecastReport& r) {
  Json j;
  j["mape"] = r.mape;
  j["rmspe"] = r.rmspe;
  j["n"] = r.n;
  return j;
}

Json to_json(const WinrateEvaluation& e) {
  Json j;
  j["campaigns"] = e.campaigns;
  j["ours"] = to_json(e.ours);
  Json flat = Json::object();
  for (const auto& [level, report] : e.flat) {
    char key[32];
    std::snprintf(key, sizeof(key), "%g", level);
    flat[key] = to_json(report);
  }
  j["flat"] = std::move(flat);
  j["nns"] = to_json(e.nns);
  j["survival"] = to_json(e.survival);
  j["lognormal"] = to_json(e.lognormal);
  return j;
}

Json to_json(const AbReport& r) {
  Json j;
  j["bir"] = r.bir;
  j["cir"] = r.cir;
  j["rir"] = r.rir;
  Json records = Json::array();
  for (const auto& x : r.records) {
    records.push_back({{"campaign_id", x.campaign_id},
                       {"bid_current", x.bid_current},
                       {"bid_recommended", x.bid_recommended},
                       {"spend", x.spend},
                       {"clicks_current", x.clicks_current},
                       {"clicks_recommended", x.clicks_recommended},
                       {"roi_current", x.roi_current},
                       {"roi_recommended", x.roi_recommended}});
  }
  j["records"] = std::move(records);
  return j;
}

Json parse_json_document(std::string_view text, std::string_view source) {
  try {
    return Json::parse(text);
  } catch (const Json::parse_error& e) {
    throw DataError(std::string(source) + ": invalid JSON: " + e.what());
  }
}

Json read_json_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_json_document(buf.str(), path);
}

}  // namespace bidscape
