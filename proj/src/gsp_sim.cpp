#include "bidscape/gsp_sim.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <set>
#include <stdexcept>

#include "bidscape/error.hpp"

namespace bidscape {

namespace {

constexpr int kMaxParticipationDraws = 10'000;

struct Entry {
  const SimAdvertiser* advertiser;
  Micros bid;
  double score;
};

bool ranks_before(const Entry& a, const Entry& b) {
  if (a.score != b.score) return a.score > b.score;
  return a.advertiser->advertiser_id < b.advertiser->advertiser_id;
}

double ranking_pctr(const SimAdvertiser& a) { return a.pctr_by_position.front(); }

double score_of(const SimAdvertiser& a, Micros bid) { return a.quality * ranking_pctr(a) * bid.currency(); }

// CPC needed to keep a slot above a competitor with `next_score`.
Micros next_price(const SimAdvertiser& a, Micros bid, double next_score, Micros reserve) {
  const Micros price = Micros::from_currency(next_score / (a.quality * ranking_pctr(a)));
  return std::min(std::max(price, reserve), bid);
}

}  // namespace

const SimAdvertiser& MarketConfig::advertiser(const std::string& id) const {
  for (const auto& a : advertisers) {
    if (a.advertiser_id == id) return a;
  }
  throw std::invalid_argument("unknown advertiser '" + id + "'");
}

void validate(const MarketConfig& market) {
  if (market.slots < 1) throw std::invalid_argument("slots must be >= 1");
  if (!(market.reserve_cpc >= 0.0)) throw std::invalid_argument("reserve_cpc must be >= 0");
  if (market.advertisers.empty()) throw std::invalid_argument("market needs at least one advertiser");
  std::set<std::string> ids;
  for (const auto& a : market.advertisers) {
    const std::string who = "advertiser '" + a.advertiser_id + "': ";
    if (a.advertiser_id.empty()) throw std::invalid_argument("advertiser_id must be non-empty");
    if (!ids.insert(a.advertiser_id).second) throw std::invalid_argument(who + "duplicate id");
    if (!(a.base_bid > 0.0)) throw std::invalid_argument(who + "base_bid must be positive");
    if (!(a.bid_jitter >= 0.0)) throw std::invalid_argument(who + "bid_jitter must be >= 0");
    if (!(a.quality > 0.0)) throw std::invalid_argument(who + "quality must be positive");
    if (!(a.participation_rate > 0.0 && a.participation_rate <= 1.0)) {
      throw std::invalid_argument(who + "participation_rate must be in (0, 1]");
    }
    if (!(a.pcvr > 0.0 && a.pcvr <= 1.0)) throw std::invalid_argument(who + "pcvr must be in (0, 1]");
    if (!(a.budget >= 0.0)) throw std::invalid_argument(who + "budget must be >= 0");
    if (a.pctr_by_position.size() != static_cast<std::size_t>(market.slots)) {
      throw std::invalid_argument(who + "pctr_by_position must have one entry per slot");
    }
    for (std::size_t k = 0; k < a.pctr_by_position.size(); ++k) {
      const double p = a.pctr_by_position[k];
      if (!(p > 0.0 && p <= 1.0)) throw std::invalid_argument(who + "pctr_by_position entries must be in (0, 1]");
      if (k > 0 && p > a.pctr_by_position[k - 1]) {
        throw std::invalid_argument(who + "pctr_by_position must be non-increasing");
      }
    }
  }
}

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

SimRng::SimRng(std::uint64_t seed, std::uint64_t stream) : engine_(splitmix64(seed ^ splitmix64(stream))) {}

double SimRng::uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

double SimRng::normal() {
  const double u1 = 1.0 - uniform();  // (0, 1]
  const double u2 = uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

AuctionSnapshot run_auction(const MarketConfig& market, SimRng& rng, std::string auction_id, std::int64_t timestamp) {
  const Micros reserve = Micros::from_currency(market.reserve_cpc);
  std::vector<Entry> entries;
  for (int attempt = 0; entries.empty(); ++attempt) {
    if (attempt == kMaxParticipationDraws) throw DataError("no advertiser can clear the reserve price");
    for (const auto& a : market.advertisers) {
      if (rng.uniform() >= a.participation_rate) continue;
      const double multiplier = a.bid_jitter > 0.0 ? std::exp(a.bid_jitter * rng.normal()) : 1.0;
      const Micros bid{std::max<std::int64_t>(1, Micros::from_currency(a.base_bid * multiplier).value)};
      if (bid < reserve) continue;
      entries.push_back(Entry{&a, bid, score_of(a, bid)});
    }
  }
  std::sort(entries.begin(), entries.end(), ranks_before);

  AuctionSnapshot snapshot;
  snapshot.auction_id = std::move(auction_id);
  snapshot.timestamp = timestamp;
  snapshot.participants.reserve(entries.size());
  for (std::size_t r = 0; r < entries.size(); ++r) {
    const Entry& e = entries[r];
    Micros cost{0};
    if (r < static_cast<std::size_t>(market.slots)) {
      cost = r + 1 < entries.size() ? next_price(*e.advertiser, e.bid, entries[r + 1].score, reserve)
                                    : std::min(reserve, e.bid);
    }
    snapshot.participants.push_back(ParticipantRecord{e.advertiser->advertiser_id, e.advertiser->context,
                                                      static_cast<int>(r) + 1, e.score, e.bid, cost,
                                                      ranking_pctr(*e.advertiser)});
  }
  return snapshot;
}

std::vector<AuctionSnapshot> generate_log(const MarketConfig& market, std::size_t n_auctions) {
  if (n_auctions == 0) throw std::invalid_argument("n_auctions must be >= 1");
  validate(market);
  std::vector<AuctionSnapshot> log;
  log.reserve(n_auctions);
  for (std::size_t k = 0; k < n_auctions; ++k) {
    SimRng rng(market.seed, k);
    log.push_back(run_auction(market, rng, "a" + std::to_string(k), static_cast<std::int64_t>(k)));
  }
  return log;
}

ReplayOutcome replay_auction(const MarketConfig& market, const AuctionSnapshot& snapshot,
                             const SimAdvertiser& advertiser, Micros bid) {
  const Micros reserve = Micros::from_currency(market.reserve_cpc);
  ReplayOutcome out;
  if (bid.value <= 0 || bid < reserve) return out;
  out.participated = true;

  const double own_score = score_of(advertiser, bid);
  const std::string& id = advertiser.advertiser_id;
  // Logged participants are already in rank order; find the first rival
  // that ranks below us.
  int rank = 1;
  const ParticipantRecord* next = nullptr;
  for (const auto& p : snapshot.participants) {
    if (p.advertiser_id == id) continue;
    const bool above = p.ranking_score > own_score || (p.ranking_score == own_score && p.advertiser_id < id);
    if (above) {
      ++rank;
    } else if (!next) {
      next = &p;
    }
  }
  out.position = rank;
  out.won = rank <= market.slots;
  if (out.won) {
    out.cost = next ? next_price(advertiser, bid, next->ranking_score, reserve) : std::min(reserve, bid);
  }
  return out;
}

std::vector<TruthPoint> counterfactual_curve(const MarketConfig& market, const std::vector<AuctionSnapshot>& log,
                                             const std::string& advertiser_id, const std::vector<double>& bid_grid) {
  const SimAdvertiser& adv = market.advertiser(advertiser_id);
  std::vector<TruthPoint> out;
  out.reserve(bid_grid.size());
  for (double bid : bid_grid) {
    const Micros bid_micros = Micros::from_currency(bid);
    std::size_t wins = 0;
    double cost_sum = 0.0;
    for (const auto& snapshot : log) {
      const ReplayOutcome r = replay_auction(market, snapshot, adv, bid_micros);
      if (!r.won) continue;
      ++wins;
      cost_sum += r.cost.currency() * ranking_pctr(adv);
    }
    TruthPoint t;
    t.bid = bid;
    t.true_winrate = log.empty() ? 0.0 : static_cast<double>(wins) / static_cast<double>(log.size());
    t.true_ecpm_cost = wins > 0 ? cost_sum / static_cast<double>(wins) : 0.0;
    out.push_back(t);
  }
  return out;
}

MarketConfig random_market(const RandomMarketSpec& spec) {
  if (spec.advertisers < 1 || spec.slots < 1 || spec.contexts < 1) {
    throw std::invalid_argument("random market needs advertisers, slots and contexts >= 1");
  }
  // Stream id far from auction indices used by generate_log.
  SimRng rng(spec.seed, 0xFFFF'FFFF'0000'0001ULL);
  MarketConfig m;
  m.slots = spec.slots;
  m.reserve_cpc = spec.reserve_cpc;
  m.seed = spec.seed;
  for (int i = 0; i < spec.advertisers; ++i) {
    SimAdvertiser a;
    char id[16];
    std::snprintf(id, sizeof(id), "adv%02d", i);
    a.advertiser_id = id;
    a.context = "ctx" + std::to_string(i % spec.contexts);
    a.base_bid = std::exp(0.5 * rng.normal());
    a.bid_jitter = spec.bid_jitter;
    a.quality = std::exp(spec.quality_sigma * rng.normal());
    const double top_pctr = 0.02 + 0.08 * rng.uniform();
    a.pctr_by_position.clear();
    for (int s = 0; s < spec.slots; ++s) a.pctr_by_position.push_back(top_pctr * std::pow(0.8, s));
    a.participation_rate = 0.5 + 0.5 * rng.uniform();
    a.pcvr = 0.02 + 0.08 * rng.uniform();
    m.advertisers.push_back(std::move(a));
  }
  return m;
}

}  // namespace bidscape
