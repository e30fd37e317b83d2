#pragma once

// Shared fixtures and independent oracles for the test binaries.

#include <filesystem>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "bidscape/auction_log.hpp"
#include "bidscape/landscape.hpp"
#include "bidscape/optimizer.hpp"

namespace bidscape::test {

/// Three advertisers in one auction, two contexts, scores given as logged.
AuctionSnapshot worked_auction();

/// Three ranges (up, dn, cost): (0.04, 0.01, 0.008), (0.05, 0.02, 0.015),
/// (0.05, 0.03, 0.02).
std::vector<RangeObservation> reference_observations();

/// A reference value printed with `figures` significant figures.
struct Printed {
  double value;
  int figures;
};

/// Agreement with a printed value: within 1% relative when printed with at
/// least three figures, otherwise within half a unit of the last digit.
bool agrees(double computed, Printed printed);

struct ExpectedTuple {
  std::string advertiser;
  std::string context;
  int position;
  Printed up;
  Printed dn;
  Printed cost;
};

/// Listed ranges for worked_auction() with max_ecpm 9.99.
std::vector<ExpectedTuple> worked_auction_tuples();

/// (advertiser, position) pairs the range filter must drop.
std::vector<std::pair<std::string, int>> worked_auction_absences();
BidLandscape reference_landscape();

/// Ranges computed by re-ranking: remove the participant, re-insert it at
/// position j, and read the neighbours' scores in its own eCPM units.
std::vector<RangeObservation> oracle_ranges(const AuctionSnapshot& snapshot, double max_ecpm, int max_position = 0);

/// Direct evaluation over raw observations: share of observations whose
/// [dn bin, up bin) covers the bid's bin, and their mean cost (falling back
/// to lower bins). Uses floor with the same 1e-9 slack as the library.
struct OracleModel {
  double bin_size = 0.01;
  double n = 0.0;
  std::int64_t max_index = 0;
  struct Entry {
    std::int64_t dn;
    std::int64_t up;
    double cost;
  };
  std::vector<Entry> accepted;

  OracleModel(const std::vector<RangeObservation>& observations, double bin_size, double n);
  std::int64_t index_of(double bid) const;
  double winrate(double bid) const;
  std::optional<double> cost(double bid) const;
};

/// Brute-force recommendation over an OracleModel: every candidate bin is
/// scored from the raw observations and the selection rules are applied
/// directly.
struct OracleRecommendation {
  double bid = 0.0;
  RecommendationStatus status = RecommendationStatus::kInfeasible;
  std::optional<double> adjusted_budget;
  std::optional<double> adjusted_cpa;
};

OracleRecommendation oracle_recommend(const OracleModel& model, const CampaignInputs& inputs, const CpaGoal& goal);

/// Random range observations on a grid of `bins` bins of width bin_size.
/// Costs lie below dn. Auction ids are distinct unless `shared_auctions`.
std::vector<RangeObservation> random_observations(std::mt19937_64& rng, std::size_t count, int bins,
                                                  double bin_size, bool shared_auctions = false);

/// Fresh empty directory under the system temp dir.
std::filesystem::path temp_dir(const std::string& name);

std::string fixture(const std::string& name);
std::string read_text(const std::filesystem::path& path);

}  // namespace bidscape::test
