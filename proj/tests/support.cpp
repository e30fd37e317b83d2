#include "support.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <unistd.h>

namespace bidscape::test {

AuctionSnapshot worked_auction() {
  AuctionSnapshot s;
  s.auction_id = "worked-1";
  s.timestamp = 1500000000;
  s.participants = {
      {"9192982670", "1_mobile", 1, 3.117e-4, Micros{5'000'000}, Micros{310'000}, 0.002588},
      {"9620472854", "1_desktop", 2, 2.387e-4, Micros{1'581'000}, Micros{500'000}, 8.0119e-4},
      {"9575604786", "1_mobile", 3, 2.312e-4, Micros{500'000}, Micros{450'000}, 5.7167e-4},
  };
  return s;
}

std::vector<RangeObservation> reference_observations() {
  return {
      {"a", "c", "", 1, 0.04, 0.01, 0.008},
      {"b", "c", "", 1, 0.05, 0.02, 0.015},
      {"c", "c", "", 1, 0.05, 0.03, 0.02},
  };
}

bool agrees(double computed, Printed printed) {
  const double p = printed.value;
  if (printed.figures >= 3) return std::abs(computed - p) <= 0.01 * std::abs(p);
  const double exponent = std::floor(std::log10(std::abs(p)));
  const double unit = std::pow(10.0, exponent - printed.figures + 1);
  return std::abs(computed - p) <= 0.5 * unit + 1e-15;
}

std::vector<ExpectedTuple> worked_auction_tuples() {
  return {
      {"9192982670", "1_mobile", 1, {9.99, 3}, {0.0099, 2}, {0.00080, 2}},
      {"9620472854", "1_desktop", 1, {9.99, 3}, {0.001654, 4}, {0.0004, 1}},
      {"9575604786", "1_mobile", 1, {9.99, 3}, {0.0003852, 4}, {0.00026, 2}},
      {"9192982670", "1_mobile", 2, {0.0099, 2}, {0.00960, 3}, {0.000802, 3}},
      {"9620472854", "1_desktop", 2, {0.00165, 3}, {0.00122, 3}, {0.000400, 3}},
      {"9575604786", "1_mobile", 2, {0.000385, 3}, {0.000294, 3}, {0.000257, 3}},
      {"9575604786", "1_mobile", 3, {0.000294, 3}, {0.000285, 3}, {0.000257, 3}},
  };
}

std::vector<std::pair<std::string, int>> worked_auction_absences() {
  return {{"9192982670", 3}, {"9620472854", 3}};
}

BidLandscape reference_landscape() {
  return build_landscape(reference_observations(), BuildOptions{0.01, BuildOptions::Divisor::kCampaigns}, "reference",
                         1700000000);
}

std::vector<RangeObservation> oracle_ranges(const AuctionSnapshot& snapshot, double max_ecpm, int max_position) {
  std::vector<RangeObservation> out;
  const auto& ps = snapshot.participants;
  const int n = static_cast<int>(ps.size());
  const int last = max_position > 0 ? std::min(n, max_position) : n;
  for (int self = 0; self < n; ++self) {
    std::vector<double> others;
    for (int k = 0; k < n; ++k) {
      if (k != self) others.push_back(ps[k].ranking_score);
    }
    const double own_ecpm = ps[self].cpc_bid.currency() * ps[self].pctr;
    const double unit = own_ecpm / ps[self].ranking_score;
    for (int j = 1; j <= last; ++j) {
      // Slot j puts `self` between others[j-2] (above) and others[j-1] (below).
      const double up = j >= 2 ? others[j - 2] * unit : max_ecpm;
      const double dn = j - 1 < static_cast<int>(others.size()) ? others[j - 1] * unit : own_ecpm;
      if (up < dn) continue;
      out.push_back(RangeObservation{ps[self].advertiser_id, ps[self].context, snapshot.auction_id, j, up, dn,
                                     ps[self].cpc_cost.currency() * ps[self].pctr});
    }
  }
  return out;
}

OracleModel::OracleModel(const std::vector<RangeObservation>& observations, double bin, double divisor)
    : bin_size(bin), n(divisor) {
  for (const auto& o : observations) {
    const auto dn = static_cast<std::int64_t>(std::floor(o.ecpm_dn / bin + 1e-9));
    const auto up = static_cast<std::int64_t>(std::floor(o.ecpm_up / bin + 1e-9));
    max_index = std::max(max_index, up);
    if (dn > 0 && up > 0) accepted.push_back({dn, up, o.ecpm_cost});
  }
}

std::int64_t OracleModel::index_of(double bid) const {
  return std::min(static_cast<std::int64_t>(std::floor(bid / bin_size + 1e-9)), max_index);
}

double OracleModel::winrate(double bid) const {
  const std::int64_t k = index_of(bid);
  if (k <= 0) return 0.0;
  double covered = 0.0;
  for (const auto& e : accepted) {
    if (e.dn <= k && k < e.up) covered += 1.0;
  }
  return std::min(1.0, covered / n);
}

std::optional<double> OracleModel::cost(double bid) const {
  for (std::int64_t k = index_of(bid); k >= 1; --k) {
    double covered = 0.0;
    double mass = 0.0;
    for (const auto& e : accepted) {
      if (e.dn <= k && k < e.up) {
        covered += 1.0;
        mass += e.cost;
      }
    }
    if (covered > 0.0) return mass / covered;
  }
  return std::nullopt;
}

OracleRecommendation oracle_recommend(const OracleModel& model, const CampaignInputs& inputs, const CpaGoal& goal) {
  struct Row {
    double bid, conversions, cpa, spend;
  };
  std::vector<Row> rows;
  for (std::int64_t k = 1; k <= model.max_index + 1; ++k) {
    const double bid = static_cast<double>(k) * model.bin_size;
    const auto cost = model.cost(bid);
    if (!cost) continue;
    const double w = model.winrate(bid);
    const double conversions = inputs.impressions * w * inputs.pctr * inputs.pcvr;
    rows.push_back({bid, conversions, *cost / (inputs.pctr * inputs.pcvr), inputs.impressions * w * *cost});
  }
  OracleRecommendation out;
  if (rows.empty()) return out;

  const double cap = goal.target_cpa * (1.0 + goal.tolerance);
  std::optional<Row> star;
  for (const auto& r : rows) {
    if (r.cpa > cap) continue;
    if (!star || r.conversions > star->conversions) star = r;
  }
  if (star && star->spend <= goal.budget) {
    out.bid = star->bid;
    out.status = RecommendationStatus::kFeasible;
    return out;
  }
  std::optional<Row> in_budget, fullest;
  for (const auto& r : rows) {
    if (r.spend > goal.budget) continue;
    if (!in_budget || r.conversions > in_budget->conversions) in_budget = r;
    if (!fullest || r.spend >= fullest->spend) fullest = r;
  }
  if (star && in_budget) {
    out.bid = in_budget->bid;
    out.status = RecommendationStatus::kBudgetLimited;
    out.adjusted_budget = star->spend;
    out.adjusted_cpa = fullest->cpa;
    return out;
  }
  bool converting = false;
  for (const auto& r : rows) converting = converting || r.conversions > 0.0;
  std::optional<Row> cheapest;
  for (const auto& r : rows) {
    if (converting && r.conversions <= 0.0) continue;
    if (!cheapest || r.cpa < cheapest->cpa || (r.cpa == cheapest->cpa && r.conversions > cheapest->conversions)) {
      cheapest = r;
    }
  }
  out.adjusted_cpa = cheapest->cpa;
  out.adjusted_budget = star ? star->spend : cheapest->spend;
  return out;
}

std::vector<RangeObservation> random_observations(std::mt19937_64& rng, std::size_t count, int bins, double bin_size,
                                                  bool shared_auctions) {
  std::uniform_int_distribution<int> lo(1, bins - 1);
  std::uniform_real_distribution<double> frac(0.0, 1.0);
  std::vector<RangeObservation> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    const int a = lo(rng);
    std::uniform_int_distribution<int> hi(a + 1, bins);
    const int b = hi(rng);
    // Offsets inside the bin keep the values off the exact boundaries.
    const double dn = (a + 0.1 + 0.8 * frac(rng)) * bin_size;
    const double up = (b + 0.1 + 0.8 * frac(rng)) * bin_size;
    const double cost = dn * (0.2 + 0.75 * frac(rng));
    const std::string auction = shared_auctions ? "a" + std::to_string(i / 3) : "a" + std::to_string(i);
    out.push_back({"adv" + std::to_string(i % 7), "ctx", auction, 1 + static_cast<int>(i % 3), up, dn, cost});
  }
  return out;
}

std::filesystem::path temp_dir(const std::string& name) {
  static int counter = 0;
  auto p = std::filesystem::temp_directory_path() /
           ("bidscape-" + name + "-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

std::string fixture(const std::string& name) { return std::string(BIDSCAPE_FIXTURES) + "/" + name; }

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

}  // namespace bidscape::test
