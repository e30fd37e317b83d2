#pragma once

// Forecast metrics, the offline CPA and landscape evaluation protocols, and a
// simulated A/B comparison of bidding policies.

#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "bidscape/baselines.hpp"
#include "bidscape/gsp_sim.hpp"
#include "bidscape/landscape.hpp"

namespace bidscape {

struct ForecastPair {
  double actual = 0.0;
  double predicted = 0.0;
};

/// Mean absolute percentage error, normalised by the number of pairs.
double mape(std::span<const ForecastPair> pairs);

/// Root mean squared percentage error.
double rmspe(std::span<const ForecastPair> pairs);

struct ForecastReport {
  double mape = 0.0;
  double rmspe = 0.0;
  std::size_t n = 0;
};

ForecastReport forecast_report(std::span<const ForecastPair> pairs);

struct GroundTruth {
  double winrate = 0.0;
  double ecpm_cost = 0.0;  // per impression
};

/// Observed win rate and per-impression cost at a campaign's current bid.
GroundTruth ground_truth_landscape(double impressions, double clicks, double spend, double ctr);

// -- CPA forecast protocol ---------------------------------------------------

/// One campaign with its true CPA at the current CPC bid and CPA history at
/// other CPC bids.
struct CpaCase {
  std::string campaign_id;
  std::string group;
  double current_bid = 0.0;  // CPC
  double true_cpa = 0.0;
  double pctr = 0.0;
  double pcvr = 0.0;
  std::vector<CpaHistoryPoint> history;
};

struct CpaDataset {
  std::vector<CpaCase> cases;
};

enum class ForecastMethod { kOurs, kNns, kLi, kExternal };

ForecastMethod parse_forecast_method(std::string_view name);
std::string_view to_string(ForecastMethod method);

/// Predicts each campaign's CPA at its current bid and scores the forecasts.
/// kOurs queries landscapes[case.group] at the eCPM bid current_bid × pctr;
/// kExternal reads predictions keyed by campaign_id.
ForecastReport eval_cpa_forecast(const CpaDataset& dataset, ForecastMethod method,
                                 const std::map<std::string, BidLandscape>& landscapes = {},
                                 const std::map<std::string, double>* external = nullptr);

struct CpaDatasetOptions {
  std::vector<double> history_multipliers{0.6, 0.8, 1.2, 1.4};
};

/// Builds a CPA dataset from a simulated log: truth and history come from
/// counterfactual replay; groups are advertiser ids.
CpaDataset make_cpa_dataset(const MarketConfig& market, const std::vector<AuctionSnapshot>& log,
                            const CpaDatasetOptions& options = {});

// -- Win-rate forecast protocol on simulated markets --------------------------

struct WinrateEvalOptions {
  double bin_size = 0.001;
  std::vector<double> flat_levels{0.1, 0.2, 0.3};
};

struct WinrateEvaluation {
  ForecastReport ours;
  std::map<double, ForecastReport> flat;  // keyed by level
  ForecastReport nns;
  ForecastReport survival;
  ForecastReport lognormal;
  std::size_t campaigns = 0;  // advertisers with positive true win rate
};

/// Compares win-rate forecasts at each advertiser's base bid against the
/// counterfactual replay truth. The landscape is built per advertiser from
/// its own ranges over the paid slots. NNS uses the nearest other
/// advertiser's (eCPM bid, observed win share) from the log.
WinrateEvaluation evaluate_winrate_forecasts(const MarketConfig& market, const std::vector<AuctionSnapshot>& log,
                                             const WinrateEvalOptions& options = {});

// -- Simulated A/B -------------------------------------------------------------

/// CPC bid per advertiser id. Missing advertisers keep their base bid.
using BidPolicy = std::map<std::string, double>;

struct AbRecord {
  std::string campaign_id;
  double bid_current = 0.0;
  double bid_recommended = 0.0;
  double spend = 0.0;  // baseline arm; sets the campaign weight
  double clicks_current = 0.0;
  double clicks_recommended = 0.0;
  double roi_current = 0.0;
  double roi_recommended = 0.0;
};

struct AbReport {
  double bir = 0.0;
  double cir = 0.0;
  double rir = 0.0;
  std::vector<AbRecord> records;
};

/// Spend-weighted relative increases in bid, clicks and ROI.
AbReport ab_lift(std::vector<AbRecord> records);

/// Runs both arms through the simulator on the same random streams.
AbReport simulated_ab(const MarketConfig& market, const BidPolicy& baseline, const BidPolicy& optimized,
                      std::size_t n_auctions);

BidPolicy base_bid_policy(const MarketConfig& market);

struct CpaPolicyOptions {
  double bin_size = 0.001;
  double impressions = 0.0;  // supply the recommendation plans for
  double tolerance = 0.05;
};

/// Per advertiser with a budget: the CPA goal is the CPA at the bid whose
/// spend comes closest to the budget, then recommend_bid picks the bid.
/// Advertisers without a budget or without a usable landscape keep their
/// base bid.
BidPolicy cpa_goal_policy(const MarketConfig& market, const std::vector<AuctionSnapshot>& log,
                          const CpaPolicyOptions& options);

}  // namespace bidscape
