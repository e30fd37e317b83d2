#include "bidscape/evalkit.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "bidscape/error.hpp"
#include "bidscape/optimizer.hpp"

namespace bidscape {

namespace {

void check_pairs(std::span<const ForecastPair> pairs) {
  if (pairs.empty()) throw std::invalid_argument("forecast metrics need at least one pair");
  for (const auto& p : pairs) {
    if (!(p.actual > 0.0)) throw std::invalid_argument("actual values must be positive");
  }
}

double relative_change(double to, double from) { return from > 0.0 ? (to - from) / from : 0.0; }

struct ArmTotals {
  double spend = 0.0;
  double clicks = 0.0;
  double conversions = 0.0;

  double roi() const { return spend > 0.0 ? conversions / spend : 0.0; }
};

std::map<std::string, ArmTotals> run_arm(const MarketConfig& market, const BidPolicy& policy, std::size_t n_auctions) {
  MarketConfig arm = market;
  for (auto& a : arm.advertisers) {
    if (auto it = policy.find(a.advertiser_id); it != policy.end()) a.base_bid = it->second;
  }
  std::map<std::string, ArmTotals> totals;
  for (const auto& a : arm.advertisers) totals[a.advertiser_id];
  for (const auto& snapshot : generate_log(arm, n_auctions)) {
    for (const auto& p : snapshot.participants) {
      if (p.position > arm.slots) break;
      const SimAdvertiser& a = arm.advertiser(p.advertiser_id);
      const double ctr = a.pctr_by_position[static_cast<std::size_t>(p.position - 1)];
      auto& t = totals[p.advertiser_id];
      t.clicks += ctr;
      t.spend += ctr * p.cpc_cost.currency();
      t.conversions += ctr * a.pcvr;
    }
  }
  return totals;
}

PipelineOptions per_advertiser_pipeline(const MarketConfig& market, double bin_size) {
  PipelineOptions opts;
  opts.grouping = GroupingKey::kByAdvertiser;
  opts.ranges.max_position = market.slots;
  opts.build.bin_size = bin_size;
  return opts;
}

}  // namespace

double mape(std::span<const ForecastPair> pairs) {
  check_pairs(pairs);
  double sum = 0.0;
  for (const auto& p : pairs) sum += std::abs(p.actual - p.predicted) / p.actual;
  return sum / static_cast<double>(pairs.size());
}

double rmspe(std::span<const ForecastPair> pairs) {
  check_pairs(pairs);
  double sum = 0.0;
  for (const auto& p : pairs) {
    const double e = (p.predicted - p.actual) / p.actual;
    sum += e * e;
  }
  return std::sqrt(sum / static_cast<double>(pairs.size()));
}

ForecastReport forecast_report(std::span<const ForecastPair> pairs) {
  return ForecastReport{mape(pairs), rmspe(pairs), pairs.size()};
}

GroundTruth ground_truth_landscape(double impressions, double clicks, double spend, double ctr) {
  if (!(clicks > 0.0)) throw DataError("ground truth undefined: no clicks");
  if (!(impressions > 0.0) || !(ctr > 0.0)) throw DataError("ground truth undefined: impressions and ctr must be positive");
  return GroundTruth{clicks / (impressions * ctr), spend / clicks * ctr};
}

ForecastMethod parse_forecast_method(std::string_view name) {
  if (name == "ours") return ForecastMethod::kOurs;
  if (name == "nns") return ForecastMethod::kNns;
  if (name == "li") return ForecastMethod::kLi;
  if (name == "external") return ForecastMethod::kExternal;
  throw std::invalid_argument("unknown method '" + std::string(name) + "'");
}

std::string_view to_string(ForecastMethod method) {
  switch (method) {
    case ForecastMethod::kOurs:
      return "ours";
    case ForecastMethod::kNns:
      return "nns";
    case ForecastMethod::kLi:
      return "li";
    case ForecastMethod::kExternal:
      return "external";
  }
  return "ours";
}

ForecastReport eval_cpa_forecast(const CpaDataset& dataset, ForecastMethod method,
                                 const std::map<std::string, BidLandscape>& landscapes,
                                 const std::map<std::string, double>* external) {
  if (method == ForecastMethod::kExternal && external == nullptr) {
    throw std::invalid_argument("method external requires a predictions file");
  }
  std::vector<ForecastPair> pairs;
  pairs.reserve(dataset.cases.size());
  for (const auto& c : dataset.cases) {
    double predicted = 0.0;
    switch (method) {
      case ForecastMethod::kOurs: {
        auto it = landscapes.find(c.group);
        if (it == landscapes.end()) throw NotFoundError("no landscape for group '" + c.group + "'");
        const CampaignInputs inputs{0.0, c.pctr, c.pcvr, c.group};
        const double ecpm_bid = c.current_bid * c.pctr;
        // A bid below every observed range has no cost estimate; score it as a miss.
        if (cost_defined(it->second, ecpm_bid)) predicted = predict_cpa(it->second, inputs, ecpm_bid);
        break;
      }
      case ForecastMethod::kNns:
        if (!c.history.empty()) predicted = nns_predict_cpa(c.history, c.current_bid);
        break;
      case ForecastMethod::kLi:
        if (c.history.size() >= 2) {
          predicted = li_predict_cpa(c.history, c.current_bid);
        } else if (!c.history.empty()) {
          predicted = c.history.front().cpa;
        }
        break;
      case ForecastMethod::kExternal: {
        auto it = external->find(c.campaign_id);
        if (it == external->end()) throw DataError("no external prediction for campaign '" + c.campaign_id + "'");
        predicted = it->second;
        break;
      }
    }
    pairs.push_back(ForecastPair{c.true_cpa, predicted});
  }
  return forecast_report(pairs);
}

CpaDataset make_cpa_dataset(const MarketConfig& market, const std::vector<AuctionSnapshot>& log,
                            const CpaDatasetOptions& options) {
  CpaDataset dataset;
  for (const auto& a : market.advertisers) {
    const double pctr = a.pctr_by_position.front();
    std::vector<double> grid{a.base_bid};
    for (double m : options.history_multipliers) grid.push_back(m * a.base_bid);
    const auto truth = counterfactual_curve(market, log, a.advertiser_id, grid);
    auto cpa_at = [&](const TruthPoint& t) { return t.true_ecpm_cost / (pctr * a.pcvr); };
    if (!(truth[0].true_winrate > 0.0) || !(cpa_at(truth[0]) > 0.0)) continue;

    CpaCase c;
    c.campaign_id = a.advertiser_id;
    c.group = a.advertiser_id;
    c.current_bid = a.base_bid;
    c.true_cpa = cpa_at(truth[0]);
    c.pctr = pctr;
    c.pcvr = a.pcvr;
    for (std::size_t k = 1; k < truth.size(); ++k) {
      if (truth[k].true_winrate > 0.0 && cpa_at(truth[k]) > 0.0) c.history.push_back({truth[k].bid, cpa_at(truth[k])});
    }
    dataset.cases.push_back(std::move(c));
  }
  return dataset;
}

WinrateEvaluation evaluate_winrate_forecasts(const MarketConfig& market, const std::vector<AuctionSnapshot>& log,
                                             const WinrateEvalOptions& options) {
  const auto built = build_group_landscapes(log, per_advertiser_pipeline(market, options.bin_size));

  struct Observed {
    double participations = 0.0;
    double wins = 0.0;
    double ecpm_bid_sum = 0.0;
    std::vector<PricedOutcome> outcomes;  // CPC paid when won, own bid when lost
    std::vector<double> paid;
  };
  std::map<std::string, Observed> observed;
  for (const auto& snapshot : log) {
    for (const auto& p : snapshot.participants) {
      auto& o = observed[p.advertiser_id];
      const bool won = p.position <= market.slots;
      o.participations += 1.0;
      o.wins += won ? 1.0 : 0.0;
      o.ecpm_bid_sum += p.cpc_bid.currency() * p.pctr;
      if (won && p.cpc_cost.value > 0) {
        o.outcomes.push_back({p.cpc_cost.currency(), true});
        o.paid.push_back(p.cpc_cost.currency());
      } else if (!won) {
        o.outcomes.push_back({p.cpc_bid.currency(), false});
      }
    }
  }

  std::vector<ForecastPair> ours, nns, survival, lognormal;
  std::map<double, std::vector<ForecastPair>> flat;
  for (const auto& a : market.advertisers) {
    const double truth = counterfactual_curve(market, log, a.advertiser_id, {a.base_bid})[0].true_winrate;
    if (!(truth > 0.0)) continue;
    const double ecpm_bid = a.base_bid * a.pctr_by_position.front();

    auto landscape = built.landscapes.find(a.advertiser_id);
    ours.push_back({truth, landscape == built.landscapes.end() ? 0.0 : query_winrate(landscape->second, ecpm_bid)});

    for (double level : options.flat_levels) flat[level].push_back({truth, flat_curves(level, 1.0, a.base_bid).winrate});

    std::vector<CpaHistoryPoint> history;
    for (const auto& [id, o] : observed) {
      if (id == a.advertiser_id || o.participations == 0.0) continue;
      history.push_back({o.ecpm_bid_sum / o.participations, o.wins / o.participations});
    }
    nns.push_back({truth, history.empty() ? 0.0 : nns_predict_cpa(history, ecpm_bid)});

    auto own = observed.find(a.advertiser_id);
    const bool has_outcomes = own != observed.end() && !own->second.outcomes.empty();
    survival.push_back({truth, has_outcomes ? survival_winrate(own->second.outcomes, a.base_bid) : 0.0});
    const bool has_paid = own != observed.end() && !own->second.paid.empty();
    lognormal.push_back({truth, has_paid ? lognormal_winrate(lognormal_fit(own->second.paid), a.base_bid) : 0.0});
  }
  if (ours.empty()) throw DataError("no advertiser has a positive true win rate");

  WinrateEvaluation out;
  out.campaigns = ours.size();
  out.ours = forecast_report(ours);
  for (const auto& [level, pairs] : flat) out.flat[level] = forecast_report(pairs);
  out.nns = forecast_report(nns);
  out.survival = forecast_report(survival);
  out.lognormal = forecast_report(lognormal);
  return out;
}

AbReport ab_lift(std::vector<AbRecord> records) {
  double total = 0.0;
  for (const auto& r : records) {
    if (!(r.spend >= 0.0)) throw std::invalid_argument("spend must be non-negative");
    total += r.spend;
  }
  if (!(total > 0.0)) throw DataError("zero total spend");
  AbReport report;
  for (const auto& r : records) {
    if (r.spend <= 0.0) continue;
    const double w = r.spend / total;
    report.bir += w * relative_change(r.bid_recommended, r.bid_current);
    report.cir += w * relative_change(r.clicks_recommended, r.clicks_current);
    report.rir += w * relative_change(r.roi_recommended, r.roi_current);
  }
  report.records = std::move(records);
  return report;
}

AbReport simulated_ab(const MarketConfig& market, const BidPolicy& baseline, const BidPolicy& optimized,
                      std::size_t n_auctions) {
  const auto current = run_arm(market, baseline, n_auctions);
  const auto recommended = run_arm(market, optimized, n_auctions);
  auto bid_of = [](const BidPolicy& policy, const SimAdvertiser& a) {
    auto it = policy.find(a.advertiser_id);
    return it == policy.end() ? a.base_bid : it->second;
  };
  std::vector<AbRecord> records;
  for (const auto& a : market.advertisers) {
    const auto& cur = current.at(a.advertiser_id);
    const auto& rec = recommended.at(a.advertiser_id);
    records.push_back(AbRecord{a.advertiser_id, bid_of(baseline, a), bid_of(optimized, a), cur.spend, cur.clicks,
                               rec.clicks, cur.roi(), rec.roi()});
  }
  return ab_lift(std::move(records));
}

BidPolicy base_bid_policy(const MarketConfig& market) {
  BidPolicy policy;
  for (const auto& a : market.advertisers) policy[a.advertiser_id] = a.base_bid;
  return policy;
}

BidPolicy cpa_goal_policy(const MarketConfig& market, const std::vector<AuctionSnapshot>& log,
                          const CpaPolicyOptions& options) {
  const auto built = build_group_landscapes(log, per_advertiser_pipeline(market, options.bin_size));
  BidPolicy policy = base_bid_policy(market);
  for (const auto& a : market.advertisers) {
    if (!(a.budget > 0.0)) continue;
    auto it = built.landscapes.find(a.advertiser_id);
    if (it == built.landscapes.end()) continue;
    const BidLandscape& landscape = it->second;
    const double pctr = a.pctr_by_position.front();
    const CampaignInputs inputs{options.impressions, pctr, a.pcvr, a.advertiser_id};

    std::optional<CurvePoint> exhausting;
    for (double bid : candidate_bids(landscape)) {
      CurvePoint p = evaluate_bid(landscape, inputs, bid);
      if (!p.cost || p.spend > a.budget) continue;
      if (!exhausting || p.spend >= exhausting->spend) exhausting = p;
    }
    if (!exhausting || !(*exhausting->cpa > 0.0)) continue;

    const Recommendation rec = recommend_bid(landscape, inputs, CpaGoal{*exhausting->cpa, a.budget, options.tolerance});
    if (rec.status != RecommendationStatus::kInfeasible && rec.bid > 0.0) policy[a.advertiser_id] = rec.bid / pctr;
  }
  return policy;
}

}  // namespace bidscape
