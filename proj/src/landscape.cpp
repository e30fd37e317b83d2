#include "bidscape/landscape.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <unordered_set>
#include <utility>

#include "bidscape/error.hpp"

namespace bidscape {

namespace {

// Masses below this (relative to the accepted count) are treated as zero so
// that decayed merges do not produce cost ratios of rounding noise.
constexpr double kRelativeMassEpsilon = 1e-9;

double mass_epsilon(const BinnedDistribution& d) {
  return kRelativeMassEpsilon * std::max(1.0, d.accepted());
}

std::vector<double> cumulative(const std::map<std::int64_t, double>& pdf, std::int64_t max_index) {
  std::vector<double> cdf(static_cast<std::size_t>(max_index) + 1, 0.0);
  double running = 0.0;
  auto it = pdf.begin();
  for (std::int64_t i = 0; i <= max_index; ++i) {
    if (it != pdf.end() && it->first == i) {
      running += it->second;
      ++it;
    }
    cdf[static_cast<std::size_t>(i)] = running;
  }
  return cdf;
}

// Sums each bin's cost values in ascending order so the result does not
// depend on the order observations arrived in.
std::map<std::int64_t, double> sum_per_bin(std::vector<std::pair<std::int64_t, double>>& entries) {
  std::sort(entries.begin(), entries.end());
  std::map<std::int64_t, double> out;
  for (const auto& [index, cost] : entries) out[index] += cost;
  return out;
}

void check_observation(const RangeObservation& o) {
  if (!(o.ecpm_dn >= 0.0) || !(o.ecpm_cost >= 0.0) || !(o.ecpm_up >= o.ecpm_dn)) {
    throw std::invalid_argument("range observation must satisfy 0 <= ecpm_dn <= ecpm_up and ecpm_cost >= 0");
  }
}

std::int64_t clamp_index(const BinnedDistribution& d, double bid) {
  return std::min(bin_index(bid, d.bin_size), d.max_index);
}

std::map<std::int64_t, double> blend(const std::map<std::int64_t, double>& a, const std::map<std::int64_t, double>& b,
                                     double decay) {
  std::map<std::int64_t, double> out;
  for (const auto& [k, v] : a) out[k] = decay * v;
  for (const auto& [k, v] : b) out[k] += v;
  return out;
}

}  // namespace

std::vector<RangeObservation> derive_ecpm_ranges(const AuctionSnapshot& snapshot, const RangeOptions& options) {
  std::vector<std::size_t> all(snapshot.participants.size());
  std::iota(all.begin(), all.end(), std::size_t{0});
  return derive_ecpm_ranges(snapshot, all, options);
}

std::vector<RangeObservation> derive_ecpm_ranges(const AuctionSnapshot& snapshot,
                                                 std::span<const std::size_t> members,
                                                 const RangeOptions& options) {
  if (!(options.max_ecpm > 0.0)) throw std::invalid_argument("max_ecpm must be positive");
  const auto& ps = snapshot.participants;
  const int n = static_cast<int>(ps.size());
  const int last = options.max_position > 0 ? std::min(n, options.max_position) : n;
  // 1-based score lookup, matching positions.
  auto score = [&](int position) { return ps[static_cast<std::size_t>(position - 1)].ranking_score; };

  std::vector<RangeObservation> out;
  out.reserve(members.size() * static_cast<std::size_t>(std::max(last, 0)));
  for (std::size_t member : members) {
    const auto& p = ps.at(member);
    const int i = static_cast<int>(member) + 1;
    const double own_score = score(i);
    const double ecpm_bid = p.cpc_bid.currency() * p.pctr;
    const double ecpm_cost = p.cpc_cost.currency() * p.pctr;
    auto scaled = [&](int position) { return score(position) / own_score * ecpm_bid; };

    for (int j = 1; j <= last; ++j) {
      double up = 0.0;
      double dn = 0.0;
      if (j == i) {
        up = j > 1 ? scaled(j - 1) : options.max_ecpm;
        dn = j < n ? scaled(j + 1) : ecpm_bid;
      } else if (j > i) {
        // i drops to j: the current holder of j moves above it.
        up = j > 1 ? scaled(j) : options.max_ecpm;
        dn = j < n ? scaled(j + 1) : ecpm_bid;
      } else {
        // i climbs to j: the current holder of j moves below it.
        up = j > 1 ? scaled(j - 1) : options.max_ecpm;
        dn = j < n ? scaled(j) : ecpm_bid;
      }
      if (up >= dn) {
        out.push_back(RangeObservation{p.advertiser_id, p.context, snapshot.auction_id, j, up, dn, ecpm_cost});
      }
    }
  }
  return out;
}

std::int64_t bin_index(double value, double bin_size) {
  return static_cast<std::int64_t>(std::floor(value / bin_size + 1e-9));
}

void BinnedDistribution::recompute_cdfs() {
  cdf_dn = cumulative(pdf_dn, max_index);
  cdf_up = cumulative(pdf_up, max_index);
  cdf_cost_dn = cumulative(pdf_cost_dn, max_index);
  cdf_cost_up = cumulative(pdf_cost_up, max_index);
}

bool operator==(const BinnedDistribution& a, const BinnedDistribution& b) {
  return a.bin_size == b.bin_size && a.n == b.n && a.n_observations == b.n_observations &&
         a.max_index == b.max_index && a.pdf_dn == b.pdf_dn && a.pdf_up == b.pdf_up &&
         a.pdf_cost_dn == b.pdf_cost_dn && a.pdf_cost_up == b.pdf_cost_up;
}

BidLandscape BidLandscape::empty(std::string group, double bin_size, std::int64_t built_at) {
  if (!(bin_size > 0.0)) throw std::invalid_argument("bin_size must be positive");
  BidLandscape l;
  l.group = std::move(group);
  l.built_at = built_at;
  l.dist.bin_size = bin_size;
  l.dist.recompute_cdfs();
  return l;
}

BidLandscape build_landscape(const std::vector<RangeObservation>& observations, const BuildOptions& options,
                             std::string group, std::int64_t built_at) {
  if (!(options.bin_size > 0.0)) throw std::invalid_argument("bin_size must be positive");

  BidLandscape out;
  out.group = std::move(group);
  out.built_at = built_at;
  BinnedDistribution& d = out.dist;
  d.bin_size = options.bin_size;

  std::vector<std::pair<std::int64_t, double>> cost_dn;
  std::vector<std::pair<std::int64_t, double>> cost_up;
  std::unordered_set<std::string> campaigns;
  std::size_t anonymous = 0;

  for (const auto& o : observations) {
    check_observation(o);
    if (o.auction_id.empty()) {
      ++anonymous;
    } else {
      campaigns.insert(o.auction_id + '\x1f' + o.advertiser_id);
    }
    const std::int64_t lo = bin_index(o.ecpm_dn, d.bin_size);
    const std::int64_t hi = bin_index(o.ecpm_up, d.bin_size);
    d.max_index = std::max(d.max_index, hi);
    if (lo > 0 && hi > 0) {
      d.pdf_dn[lo] += 1.0;
      d.pdf_up[hi] += 1.0;
      cost_dn.emplace_back(lo, o.ecpm_cost);
      cost_up.emplace_back(hi, o.ecpm_cost);
    }
  }
  if (d.pdf_dn.empty()) throw DataError("no observations in range");

  d.pdf_cost_dn = sum_per_bin(cost_dn);
  d.pdf_cost_up = sum_per_bin(cost_up);
  d.n_observations = static_cast<double>(observations.size());
  d.n = options.divisor == BuildOptions::Divisor::kObservations
            ? d.n_observations
            : static_cast<double>(campaigns.size() + anonymous);
  d.recompute_cdfs();
  return out;
}

double query_winrate(const BidLandscape& landscape, double bid) {
  const BinnedDistribution& d = landscape.dist;
  if (d.n <= 0.0 || d.cdf_dn.empty()) return 0.0;
  const std::int64_t index = clamp_index(d, bid);
  if (index <= 0) return 0.0;
  const auto k = static_cast<std::size_t>(index);
  const double covered = d.cdf_dn[k] - d.cdf_up[k];
  if (covered <= mass_epsilon(d)) return 0.0;
  return std::min(1.0, covered / d.n);
}

double query_winrate_monotone(const BidLandscape& landscape, double bid) {
  const BinnedDistribution& d = landscape.dist;
  const std::int64_t index = clamp_index(d, bid);
  double best = 0.0;
  for (std::int64_t k = 1; k <= index; ++k) {
    best = std::max(best, query_winrate(landscape, static_cast<double>(k) * d.bin_size));
  }
  return best;
}

bool cost_defined(const BidLandscape& landscape, double bid) {
  const BinnedDistribution& d = landscape.dist;
  if (d.cdf_dn.empty()) return false;
  const double eps = mass_epsilon(d);
  for (std::int64_t k = clamp_index(d, bid); k >= 1; --k) {
    const auto i = static_cast<std::size_t>(k);
    if (d.cdf_dn[i] - d.cdf_up[i] > eps) return true;
  }
  return false;
}

double query_cost(const BidLandscape& landscape, double bid) {
  const BinnedDistribution& d = landscape.dist;
  if (!d.cdf_dn.empty()) {
    const double eps = mass_epsilon(d);
    for (std::int64_t k = clamp_index(d, bid); k >= 1; --k) {
      const auto i = static_cast<std::size_t>(k);
      const double covered = d.cdf_dn[i] - d.cdf_up[i];
      if (covered > eps) return (d.cdf_cost_dn[i] - d.cdf_cost_up[i]) / covered;
    }
  }
  throw DataError("cost undefined below bid");
}

BidLandscape merge_landscapes(const BidLandscape& a, const BidLandscape& b, double decay) {
  if (!(decay > 0.0 && decay <= 1.0)) throw std::invalid_argument("decay must be in (0, 1]");
  if (a.dist.bin_size != b.dist.bin_size) throw std::invalid_argument("cannot merge landscapes with different bin sizes");
  if (a.group != b.group) throw std::invalid_argument("cannot merge landscapes of different groups");

  BidLandscape out;
  out.group = a.group;
  out.built_at = std::max(a.built_at, b.built_at);
  BinnedDistribution& d = out.dist;
  d.bin_size = a.dist.bin_size;
  d.pdf_dn = blend(a.dist.pdf_dn, b.dist.pdf_dn, decay);
  d.pdf_up = blend(a.dist.pdf_up, b.dist.pdf_up, decay);
  d.pdf_cost_dn = blend(a.dist.pdf_cost_dn, b.dist.pdf_cost_dn, decay);
  d.pdf_cost_up = blend(a.dist.pdf_cost_up, b.dist.pdf_cost_up, decay);
  d.n = decay * a.dist.n + b.dist.n;
  d.n_observations = decay * a.dist.n_observations + b.dist.n_observations;
  d.max_index = std::max(a.dist.max_index, b.dist.max_index);
  d.recompute_cdfs();
  return out;
}

PipelineResult build_group_landscapes(const std::vector<AuctionSnapshot>& snapshots, const PipelineOptions& options) {
  PipelineResult result;
  for (const auto& [label, members] : group_snapshots(snapshots, options.grouping)) {
    std::vector<RangeObservation> observations;
    for (const auto& m : members) {
      auto part = derive_ecpm_ranges(*m.snapshot, m.participants, options.ranges);
      observations.insert(observations.end(), std::make_move_iterator(part.begin()),
                          std::make_move_iterator(part.end()));
    }
    try {
      result.landscapes.emplace(label, build_landscape(observations, options.build, label, options.built_at));
    } catch (const DataError&) {
      result.empty_groups.push_back(label);
    }
  }
  return result;
}

}  // namespace bidscape
