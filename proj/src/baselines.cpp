#include "bidscape/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <numbers>
#include <stdexcept>

namespace bidscape {

namespace {

std::int64_t to_cents(double price) { return std::llround(price * 100.0); }

}  // namespace

double survival_winrate(const std::vector<PricedOutcome>& outcomes, double query_bid) {
  if (outcomes.empty()) throw std::invalid_argument("survival model needs at least one outcome");

  struct Tally {
    std::int64_t events = 0;    // wins at this price
    std::int64_t censored = 0;  // losses at this bid
  };
  std::map<std::int64_t, Tally> by_price;
  for (const auto& o : outcomes) {
    if (!(o.price > 0.0)) throw std::invalid_argument("outcome price must be positive");
    auto& t = by_price[to_cents(o.price)];
    (o.won ? t.events : t.censored) += 1;
  }

  // Walk prices upwards; at_risk counts outcomes priced at or above the
  // current price (censored losses stay at risk through their own bid).
  auto at_risk = static_cast<std::int64_t>(outcomes.size());
  double survival = 1.0;
  for (const auto& [cents, tally] : by_price) {
    if (static_cast<double>(cents) / 100.0 >= query_bid) break;
    if (tally.events > 0) {
      survival *= static_cast<double>(at_risk - tally.events) / static_cast<double>(at_risk);
    }
    at_risk -= tally.events + tally.censored;
  }
  return std::clamp(1.0 - survival, 0.0, 1.0);
}

LogNormalParams lognormal_fit(const std::vector<double>& winning_prices) {
  if (winning_prices.empty()) throw std::invalid_argument("log-normal fit needs at least one price");
  double sum = 0.0;
  for (double p : winning_prices) {
    if (!(p > 0.0)) throw std::invalid_argument("log-normal fit needs positive prices");
    sum += std::log(p);
  }
  const double n = static_cast<double>(winning_prices.size());
  const double mu = sum / n;
  double ss = 0.0;
  for (double p : winning_prices) {
    const double d = std::log(p) - mu;
    ss += d * d;
  }
  return LogNormalParams{mu, std::sqrt(ss / n)};
}

double lognormal_winrate(const LogNormalParams& params, double bid) {
  if (!(bid > 0.0)) return 0.0;
  const double z = std::log(bid) - params.mu;
  if (params.sigma <= 0.0) return z >= 0.0 ? 1.0 : 0.0;
  return 0.5 * std::erfc(-z / (params.sigma * std::numbers::sqrt2));
}

FlatEstimate flat_curves(double winrate_level, double cost_ratio, double bid, double pctr) {
  const double cpc_cost = cost_ratio * bid;
  return FlatEstimate{winrate_level, cpc_cost, cpc_cost * pctr};
}

double nns_predict_cpa(const std::vector<CpaHistoryPoint>& history, double bid) {
  if (history.empty()) throw std::invalid_argument("nearest-neighbour search needs history");
  const CpaHistoryPoint* best = nullptr;
  double best_distance = 0.0;
  for (const auto& h : history) {
    const double distance = std::abs(bid - h.bid);
    if (!best || distance < best_distance || (distance == best_distance && h.bid < best->bid)) {
      best = &h;
      best_distance = distance;
    }
  }
  return best->cpa;
}

double li_predict_cpa(const std::vector<CpaHistoryPoint>& history, double bid) {
  if (history.size() < 2) throw std::invalid_argument("linear interpolation needs at least two history points");
  std::vector<CpaHistoryPoint> sorted = history;
  std::stable_sort(sorted.begin(), sorted.end(),
                   [](const CpaHistoryPoint& a, const CpaHistoryPoint& b) { return a.bid < b.bid; });
  if (bid <= sorted.front().bid) return sorted.front().cpa;
  if (bid >= sorted.back().bid) return sorted.back().cpa;
  auto hi = std::lower_bound(sorted.begin(), sorted.end(), bid,
                             [](const CpaHistoryPoint& h, double b) { return h.bid < b; });
  if (hi->bid == bid) return hi->cpa;
  auto lo = std::prev(hi);
  return lo->cpa + (bid - lo->bid) * (hi->cpa - lo->cpa) / (hi->bid - lo->bid);
}

}  // namespace bidscape
