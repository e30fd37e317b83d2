#pragma once

// Non-parametric bid landscape: eCPM bid ranges derived from ranked auction
// logs, binned into win-rate and eCPM-cost distributions over the eCPM bid.
//
// All eCPM quantities are per impression (cpc × pctr, in currency). The
// per-mille presentation is left to callers.

#include <cstddef>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "bidscape/auction_log.hpp"

namespace bidscape {

struct RangeObservation {
  std::string advertiser_id;
  std::string context;
  std::string auction_id;  // empty: observation is its own campaign
  int position = 0;        // candidate position j the range refers to
  double ecpm_up = 0.0;
  double ecpm_dn = 0.0;
  double ecpm_cost = 0.0;

  friend bool operator==(const RangeObservation&, const RangeObservation&) = default;
};

struct RangeOptions {
  double max_ecpm = 9.99;  // upper bound used for the top position
  int max_position = 0;    // only emit candidate positions <= this; 0 = all
};

/// eCPM bid ranges for every participant at every candidate position.
/// For participant i and candidate position j the range is bounded by the
/// scores of the neighbours i would have at j, scaled into i's own eCPM
/// (bid × pctr). Ranges with up < dn are dropped. O(n²) per snapshot.
std::vector<RangeObservation> derive_ecpm_ranges(const AuctionSnapshot& snapshot,
                                                 const RangeOptions& options = {});

/// Same, restricted to the participants at `members` (0-based indices).
std::vector<RangeObservation> derive_ecpm_ranges(const AuctionSnapshot& snapshot,
                                                 std::span<const std::size_t> members,
                                                 const RangeOptions& options = {});

/// Histogram index of an eCPM value. Tolerates representation error so that
/// exact multiples of the bin size land in their own bin (0.03/0.01 -> 3).
std::int64_t bin_index(double value, double bin_size);

/// Paired histograms over eCPM-bid bins. Masses are doubles so that decayed
/// merges stay representable; without decay the counts are integer-valued.
struct BinnedDistribution {
  double bin_size = 0.01;
  std::map<std::int64_t, double> pdf_dn;
  std::map<std::int64_t, double> pdf_up;
  std::map<std::int64_t, double> pdf_cost_dn;
  std::map<std::int64_t, double> pdf_cost_up;
  // Dense cumulative sums over indices 0..max_index; recomputed from the pdfs.
  std::vector<double> cdf_dn;
  std::vector<double> cdf_up;
  std::vector<double> cdf_cost_dn;
  std::vector<double> cdf_cost_up;
  double n = 0.0;                 // win-rate divisor
  double n_observations = 0.0;    // every input observation, accepted or not
  std::int64_t max_index = 0;

  double accepted() const { return cdf_dn.empty() ? 0.0 : cdf_dn.back(); }
  void recompute_cdfs();
};

struct BidLandscape {
  std::string group;
  BinnedDistribution dist;
  std::int64_t built_at = 0;

  /// A landscape with no mass, the identity for merge_landscapes.
  static BidLandscape empty(std::string group, double bin_size, std::int64_t built_at = 0);
};

bool operator==(const BinnedDistribution& a, const BinnedDistribution& b);
inline bool operator==(const BidLandscape& a, const BidLandscape& b) {
  return a.group == b.group && a.built_at == b.built_at && a.dist == b.dist;
}

struct BuildOptions {
  enum class Divisor {
    kCampaigns,     // distinct (auction, advertiser) pairs among the inputs
    kObservations,  // every input tuple
  };
  double bin_size = 0.01;
  Divisor divisor = Divisor::kCampaigns;
};

/// Bins the observations into the win-rate and cost distributions.
/// Observations whose dn or up index is not positive are skipped but still
/// count towards the divisor. Throws DataError when nothing is accepted.
BidLandscape build_landscape(const std::vector<RangeObservation>& observations,
                             const BuildOptions& options = {}, std::string group = "global",
                             std::int64_t built_at = 0);

/// Fraction of observed campaigns whose eCPM range covers the bid's bin.
double query_winrate(const BidLandscape& landscape, double bid);

/// Running maximum of query_winrate over bins 1..index(bid). Opt-in smoothing
/// for callers that need a non-decreasing curve.
double query_winrate_monotone(const BidLandscape& landscape, double bid);

/// Average eCPM cost of the observations covering the bid's bin, falling back
/// to the nearest lower bin with coverage. Throws DataError if none exists.
double query_cost(const BidLandscape& landscape, double bid);

/// True when query_cost(landscape, bid) would succeed.
bool cost_defined(const BidLandscape& landscape, double bid);

/// decay × a + b on every pdf family and on the divisor.
BidLandscape merge_landscapes(const BidLandscape& a, const BidLandscape& b, double decay = 1.0);

struct PipelineOptions {
  GroupingKey grouping = GroupingKey::kByContext;
  RangeOptions ranges;
  BuildOptions build;
  std::int64_t built_at = 0;
};

struct PipelineResult {
  std::map<std::string, BidLandscape> landscapes;
  std::vector<std::string> empty_groups;  // groups with no accepted observation
};

/// Derives ranges for every group member and builds one landscape per group.
PipelineResult build_group_landscapes(const std::vector<AuctionSnapshot>& snapshots,
                                      const PipelineOptions& options = {});

}  // namespace bidscape
