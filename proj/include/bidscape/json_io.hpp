#pragma once

// JSON encodings shared by the model store, the CLI and the HTTP API.
// Field names here are the external contract; see docs/.

#include <iosfwd>
#include <map>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "bidscape/evalkit.hpp"
#include "bidscape/gsp_sim.hpp"
#include "bidscape/landscape.hpp"
#include "bidscape/optimizer.hpp"

namespace bidscape {

using Json = nlohmann::ordered_json;

/// Request body rejected field by field. what() is the first message.
class ValidationError : public std::invalid_argument {
 public:
  explicit ValidationError(std::map<std::string, std::string> fields);
  ValidationError(const std::string& field, const std::string& message);

  const std::map<std::string, std::string>& fields() const { return fields_; }

 private:
  std::map<std::string, std::string> fields_;
};

// -- landscape ---------------------------------------------------------------

Json to_json(const BidLandscape& landscape);

/// Throws IntegrityError mentioning `source` when fields are missing or
/// malformed, or when a stored checksum does not match.
BidLandscape landscape_from_json(const Json& j, std::string_view source = "landscape");

/// Serialized form with a trailing "checksum" field (FNV-1a 64 over the
/// document without it).
std::string dump_landscape(const BidLandscape& landscape);
BidLandscape parse_landscape(std::string_view text, std::string_view source = "landscape");

// -- optimizer ---------------------------------------------------------------

struct RecommendRequest {
  std::string group;
  CampaignInputs inputs;
  CpaGoal goal;
};

/// Collects every invalid field before throwing ValidationError.
RecommendRequest parse_recommend_request(const Json& body);

Json to_json(const Recommendation& rec);
Json to_json(const CurvePoint& point);
Json curves_to_json(const std::string& group, const std::vector<CurvePoint>& points);
void write_curves_csv(std::ostream& out, const std::vector<CurvePoint>& points);

// -- observations ------------------------------------------------------------

Json to_json(const RangeObservation& obs);
RangeObservation observation_from_json(const Json& j);

/// One observation object per line; blank lines are skipped. Throws
/// DataError naming the line on malformed input.
std::vector<RangeObservation> read_observations(std::istream& in);
void write_observations(std::ostream& out, const std::vector<RangeObservation>& observations);

// -- simulator and evaluation --------------------------------------------------

Json to_json(const MarketConfig& market);
/// Missing advertiser fields take the SimAdvertiser defaults. Validates.
MarketConfig market_from_json(const Json& j);

Json to_json(const CpaDataset& dataset);
CpaDataset cpa_dataset_from_json(const Json& j);

/// Flat object of campaign_id -> predicted CPA.
std::map<std::string, double> predictions_from_json(const Json& j);

Json to_json(const ForecastReport& report);
Json to_json(const WinrateEvaluation& evaluation);
Json to_json(const AbReport& report);

/// Parses a whole document, mapping syntax errors to DataError.
Json parse_json_document(std::string_view text, std::string_view source);
Json read_json_file(const std::string& path);

}  // namespace bidscape
