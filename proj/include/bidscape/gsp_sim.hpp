#pragma once

// Quality-weighted GSP marketplace simulator with a counterfactual replay
// oracle. Generated logs follow the auction_log data model: winners take
// positions 1..slots, losers continue below them with zero cost.

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "bidscape/auction_log.hpp"

namespace bidscape {

struct SimAdvertiser {
  std::string advertiser_id;
  std::string context = "default";
  double base_bid = 1.0;    // CPC, currency
  double bid_jitter = 0.0;  // sigma of the per-auction log-normal multiplier
  double quality = 1.0;
  std::vector<double> pctr_by_position{0.05};  // index 0 is slot 1; ranks use it
  double participation_rate = 1.0;
  double pcvr = 0.05;
  double budget = 0.0;  // 0: no budget
};

struct MarketConfig {
  std::vector<SimAdvertiser> advertisers;
  int slots = 1;
  double reserve_cpc = 0.0;
  std::uint64_t seed = 0;

  const SimAdvertiser& advertiser(const std::string& id) const;
};

/// Throws std::invalid_argument naming the first broken invariant.
void validate(const MarketConfig& market);

/// Portable random stream. Stream `k` of seed `s` is an mt19937_64 seeded
/// with splitmix64(s ^ splitmix64(k)); uniforms take the top 53 bits and
/// normals use Box-Muller, so draws do not depend on the standard library's
/// distribution implementations.
class SimRng {
 public:
  SimRng(std::uint64_t seed, std::uint64_t stream);

  double uniform();  // [0, 1)
  double normal();   // standard normal

 private:
  std::mt19937_64 engine_;
};

std::uint64_t splitmix64(std::uint64_t x);

AuctionSnapshot run_auction(const MarketConfig& market, SimRng& rng, std::string auction_id = "",
                            std::int64_t timestamp = 0);

/// Auction k draws from stream k of market.seed, so any prefix of the log is
/// reproducible on its own.
std::vector<AuctionSnapshot> generate_log(const MarketConfig& market, std::size_t n_auctions);

struct ReplayOutcome {
  bool participated = false;
  bool won = false;
  int position = 0;  // 0 when not participating
  Micros cost;       // CPC paid; zero unless won
};

/// Re-runs one logged auction with `advertiser` bidding `bid` and every other
/// participant keeping its logged score.
ReplayOutcome replay_auction(const MarketConfig& market, const AuctionSnapshot& snapshot,
                             const SimAdvertiser& advertiser, Micros bid);

struct TruthPoint {
  double bid = 0.0;             // CPC
  double true_winrate = 0.0;    // share of logged auctions won
  double true_ecpm_cost = 0.0;  // mean CPC cost × ranking pctr over wins
};

std::vector<TruthPoint> counterfactual_curve(const MarketConfig& market, const std::vector<AuctionSnapshot>& log,
                                             const std::string& advertiser_id, const std::vector<double>& bid_grid);

struct RandomMarketSpec {
  int advertisers = 20;
  int slots = 5;
  int contexts = 1;
  double reserve_cpc = 0.01;
  double bid_jitter = 0.3;
  double quality_sigma = 0.2;
  std::uint64_t seed = 1;
};

/// A heterogeneous market: log-normal base bids and quality, ranking pCTR in
/// [0.02, 0.1) decaying by 0.8 per slot, participation in [0.5, 1).
MarketConfig random_market(const RandomMarketSpec& spec);

}  // namespace bidscape
