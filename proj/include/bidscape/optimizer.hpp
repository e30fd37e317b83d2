#pragma once

// CPA-goal bid optimisation over a learned landscape.
//
// Bids here are eCPM bids in landscape units (expected cost per impression),
// the same axis the landscape is indexed on.

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "bidscape/landscape.hpp"

namespace bidscape {

struct CampaignInputs {
  double impressions = 0.0;  // available supply
  double pctr = 0.0;
  double pcvr = 0.0;
  std::string group;
};

struct CpaGoal {
  double target_cpa = 0.0;
  double budget = 0.0;
  double tolerance = 0.05;  // relative slack on the CPA cap
};

enum class RecommendationStatus { kFeasible, kBudgetLimited, kInfeasible };

std::string_view to_string(RecommendationStatus status);

struct Recommendation {
  double bid = 0.0;
  double clicks = 0.0;
  double conversions = 0.0;
  double spend = 0.0;
  double cpa = 0.0;
  RecommendationStatus status = RecommendationStatus::kInfeasible;
  std::optional<double> adjusted_budget;  // B': spend needed at the CPA-optimal bid
  std::optional<double> adjusted_cpa;     // C': CPA reachable with the given budget
};

void validate(const CampaignInputs& inputs);
void validate(const CpaGoal& goal);

double predict_clicks(const BidLandscape& landscape, const CampaignInputs& inputs, double bid);
double predict_conversions(double clicks, double pcvr);

/// Per-impression cost divided by pctr × pcvr. Throws DataError when the
/// landscape has no cost at or below the bid.
double predict_cpa(const BidLandscape& landscape, const CampaignInputs& inputs, double bid);
double predict_spend(const BidLandscape& landscape, const CampaignInputs& inputs, double bid);

/// One row of the bid/metric table used by the optimiser, the CLI and the
/// HTTP curves endpoint. cost and cpa are absent where the cost is undefined.
struct CurvePoint {
  double bid = 0.0;
  double winrate = 0.0;
  std::optional<double> cost;
  std::optional<double> cpa;
  double clicks = 0.0;
  double conversions = 0.0;
  double spend = 0.0;
};

CurvePoint evaluate_bid(const BidLandscape& landscape, const CampaignInputs& inputs, double bid);

/// Grid from..to inclusive in `step` increments.
std::vector<CurvePoint> curve_table(const BidLandscape& landscape, const CampaignInputs& inputs, double from,
                                    double to, double step);

/// Candidate bids k × bin_size for k = 1..max_index+1.
std::vector<double> candidate_bids(const BidLandscape& landscape);

/// Maximises conversions subject to the CPA cap and the budget.
///
/// bid* is the conversion maximiser among bids whose CPA is within
/// target × (1 + tolerance). If Spend(bid*) fits the budget the result is
/// feasible. Otherwise it is budget-limited: the returned bid maximises
/// conversions within budget, B' = Spend(bid*) and C' = CPA at the bid whose
/// spend comes closest to the budget from below. With no bid under the CPA
/// cap the result is infeasible: bid 0 (stop bidding) and C' = the smallest
/// achievable CPA. Conversion ties go to the lower bid.
Recommendation recommend_bid(const BidLandscape& landscape, const CampaignInputs& inputs, const CpaGoal& goal);

}  // namespace bidscape
