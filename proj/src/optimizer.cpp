#include "bidscape/optimizer.hpp"

#include <cmath>
#include <stdexcept>

#include "bidscape/error.hpp"

namespace bidscape {

std::string_view to_string(RecommendationStatus status) {
  switch (status) {
    case RecommendationStatus::kFeasible:
      return "feasible";
    case RecommendationStatus::kBudgetLimited:
      return "budget_limited";
    case RecommendationStatus::kInfeasible:
      return "infeasible";
  }
  return "infeasible";
}

void validate(const CampaignInputs& inputs) {
  if (!(inputs.impressions >= 0.0)) throw std::invalid_argument("impressions must be non-negative");
  if (!(inputs.pctr > 0.0 && inputs.pctr <= 1.0)) throw std::invalid_argument("pctr must be positive");
  if (!(inputs.pcvr > 0.0 && inputs.pcvr <= 1.0)) throw std::invalid_argument("pcvr must be positive");
}

void validate(const CpaGoal& goal) {
  if (!(goal.target_cpa > 0.0)) throw std::invalid_argument("cpa_goal must be positive");
  if (!(goal.budget > 0.0)) throw std::invalid_argument("budget must be positive");
  if (!(goal.tolerance >= 0.0)) throw std::invalid_argument("tolerance must be non-negative");
}

double predict_clicks(const BidLandscape& landscape, const CampaignInputs& inputs, double bid) {
  return inputs.impressions * query_winrate(landscape, bid) * inputs.pctr;
}

double predict_conversions(double clicks, double pcvr) { return clicks * pcvr; }

double predict_cpa(const BidLandscape& landscape, const CampaignInputs& inputs, double bid) {
  return query_cost(landscape, bid) / (inputs.pctr * inputs.pcvr);
}

double predict_spend(const BidLandscape& landscape, const CampaignInputs& inputs, double bid) {
  return predict_clicks(landscape, inputs, bid) * query_cost(landscape, bid) / inputs.pctr;
}

CurvePoint evaluate_bid(const BidLandscape& landscape, const CampaignInputs& inputs, double bid) {
  CurvePoint p;
  p.bid = bid;
  p.winrate = query_winrate(landscape, bid);
  p.clicks = predict_clicks(landscape, inputs, bid);
  p.conversions = predict_conversions(p.clicks, inputs.pcvr);
  if (cost_defined(landscape, bid)) {
    p.cost = query_cost(landscape, bid);
    p.cpa = *p.cost / (inputs.pctr * inputs.pcvr);
    p.spend = p.clicks * *p.cost / inputs.pctr;
  }
  return p;
}

std::vector<CurvePoint> curve_table(const BidLandscape& landscape, const CampaignInputs& inputs, double from,
                                    double to, double step) {
  if (!(step > 0.0)) throw std::invalid_argument("step must be positive");
  if (!(from >= 0.0) || !(to >= from)) throw std::invalid_argument("require 0 <= from <= to");
  const auto count = static_cast<std::size_t>(std::floor((to - from) / step + 1e-9)) + 1;
  if (count > 1'000'000) throw std::invalid_argument("grid too large");
  std::vector<CurvePoint> out;
  out.reserve(count);
  for (std::size_t k = 0; k < count; ++k) {
    out.push_back(evaluate_bid(landscape, inputs, from + static_cast<double>(k) * step));
  }
  return out;
}

std::vector<double> candidate_bids(const BidLandscape& landscape) {
  const auto& d = landscape.dist;
  std::vector<double> bids;
  bids.reserve(static_cast<std::size_t>(d.max_index) + 1);
  for (std::int64_t k = 1; k <= d.max_index + 1; ++k) bids.push_back(static_cast<double>(k) * d.bin_size);
  return bids;
}

Recommendation recommend_bid(const BidLandscape& landscape, const CampaignInputs& inputs, const CpaGoal& goal) {
  validate(inputs);
  validate(goal);

  std::vector<CurvePoint> rows;
  for (double bid : candidate_bids(landscape)) {
    CurvePoint p = evaluate_bid(landscape, inputs, bid);
    if (p.cost) rows.push_back(p);
  }
  if (rows.empty()) throw DataError("empty landscape");

  const double cap = goal.target_cpa * (1.0 + goal.tolerance);
  // Rows are in ascending bid order, so strict comparisons keep the lowest bid on ties.
  const CurvePoint* best_capped = nullptr;
  for (const auto& r : rows) {
    if (*r.cpa <= cap && (!best_capped || r.conversions > best_capped->conversions)) best_capped = &r;
  }

  auto fill = [](Recommendation& rec, const CurvePoint& p) {
    rec.bid = p.bid;
    rec.clicks = p.clicks;
    rec.conversions = p.conversions;
    rec.spend = p.spend;
    rec.cpa = *p.cpa;
  };

  Recommendation rec;
  if (best_capped && best_capped->spend <= goal.budget) {
    rec.status = RecommendationStatus::kFeasible;
    fill(rec, *best_capped);
    return rec;
  }

  if (best_capped) {
    const CurvePoint* best_in_budget = nullptr;
    const CurvePoint* closest_to_budget = nullptr;
    for (const auto& r : rows) {
      if (r.spend > goal.budget) continue;
      if (!best_in_budget || r.conversions > best_in_budget->conversions) best_in_budget = &r;
      if (!closest_to_budget || r.spend >= closest_to_budget->spend) closest_to_budget = &r;
    }
    if (best_in_budget) {
      rec.status = RecommendationStatus::kBudgetLimited;
      fill(rec, *best_in_budget);
      rec.adjusted_budget = best_capped->spend;
      rec.adjusted_cpa = *closest_to_budget->cpa;
      return rec;
    }
  }

  rec.status = RecommendationStatus::kInfeasible;
  const CurvePoint* cheapest = nullptr;
  bool any_converting = false;
  for (const auto& r : rows) any_converting = any_converting || r.conversions > 0.0;
  for (const auto& r : rows) {
    if (any_converting && !(r.conversions > 0.0)) continue;
    if (!cheapest || *r.cpa < *cheapest->cpa ||
        (*r.cpa == *cheapest->cpa && r.conversions > cheapest->conversions)) {
      cheapest = &r;
    }
  }
  rec.adjusted_cpa = *cheapest->cpa;
  rec.adjusted_budget = cheapest->spend;
  if (best_capped) rec.adjusted_budget = best_capped->spend;
  return rec;
}

}  // namespace bidscape
