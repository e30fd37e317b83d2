#pragma once

// Reference estimators the landscape is compared against.

#include <vector>

namespace bidscape {

/// One auction outcome seen by a bidder: the winning price when it won,
/// its own (losing) bid when it lost.
struct PricedOutcome {
  double price = 0.0;
  bool won = false;
};

struct CpaHistoryPoint {
  double bid = 0.0;
  double cpa = 0.0;
};

struct LogNormalParams {
  double mu = 0.0;
  double sigma = 0.0;
};

/// Kaplan-Meier estimate of P(winning price < query_bid). Prices are
/// discretised to cents; losses are right-censored at the losing bid.
double survival_winrate(const std::vector<PricedOutcome>& outcomes, double query_bid);

/// Mean and population standard deviation of the log prices.
LogNormalParams lognormal_fit(const std::vector<double>& winning_prices);

/// Log-normal CDF at the bid; a unit step at e^mu when sigma is 0.
double lognormal_winrate(const LogNormalParams& params, double bid);

struct FlatEstimate {
  double winrate = 0.0;
  double cpc_cost = 0.0;
  double ecpm_cost = 0.0;  // per impression: cpc_cost × pctr
};

/// Constant win rate and cost at a fixed fraction of the CPC bid.
FlatEstimate flat_curves(double winrate_level, double cost_ratio, double bid, double pctr = 1.0);

/// CPA of the history point nearest in bid (ties: the lower bid).
double nns_predict_cpa(const std::vector<CpaHistoryPoint>& history, double bid);

/// Linear interpolation between the tightest bracketing history bids,
/// clamped to the end points outside the observed range.
double li_predict_cpa(const std::vector<CpaHistoryPoint>& history, double bid);

}  // namespace bidscape
