#include "bidscape/cli.hpp"

#include <csignal>
#include <ctime>
#include <fstream>
#include <iostream>
#include <optional>
#include <set>
#include <sstream>

#include <CLI11.hpp>

#include "bidscape/error.hpp"
#include "bidscape/evalkit.hpp"
#include "bidscape/json_io.hpp"
#include "bidscape/model_store.hpp"
#include "bidscape/optimizer.hpp"
#include "bidscape/service.hpp"

namespace bidscape {

namespace {

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

std::ifstream open_input(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open '" + path + "'");
  return in;
}

// Writes to `path`, or to `out` when path is empty or "-".
void emit(std::ostream& out, const std::string& path, const std::string& content) {
  if (path.empty() || path == "-") {
    out << content;
    return;
  }
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw DataError("cannot write '" + path + "'");
  f << content;
}

BuildOptions::Divisor parse_divisor(const std::string& name) {
  if (name == "campaigns") return BuildOptions::Divisor::kCampaigns;
  if (name == "observations") return BuildOptions::Divisor::kObservations;
  throw UsageError("--divisor must be 'campaigns' or 'observations'");
}

MarketConfig load_market(const std::string& path, std::optional<std::uint64_t> seed) {
  MarketConfig m = market_from_json(read_json_file(path));
  if (seed) m.seed = *seed;
  return m;
}

std::string issue_line(const ParseIssue& i) {
  std::string s = "line " + std::to_string(i.line);
  if (!i.auction_id.empty()) s += " (auction " + i.auction_id + ")";
  return s + ": " + i.message;
}

Service* g_service = nullptr;

extern "C" void stop_service(int) {
  if (g_service) g_service->stop();
}

}  // namespace

int cli_main(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Bid landscape learning and CPA-goal bid recommendation", "bidscape"};
  app.require_subcommand(1);
  std::string store_path;
  app.add_option("--store", store_path, "Model store directory (default: $BIDSCAPE_STORE or ./bidscape_store)");

  // ingest
  auto* ingest = app.add_subcommand("ingest", "Validate an auction log and add it to the store");
  std::string ingest_file;
  std::string ingest_format = "jsonl";
  ingest->add_option("file", ingest_file, "Log file")->required();
  ingest->add_option("--format", ingest_format, "jsonl or csv")->check(CLI::IsMember({"jsonl", "csv"}));

  // build
  auto* build = app.add_subcommand("build", "Build landscapes from stored logs or from an observation file");
  double bin_size = 0.01;
  std::string group_by = "by_context";
  double max_ecpm = 9.99;
  int max_position = 0;
  std::string divisor = "campaigns";
  std::string observations_file;
  std::string build_group = "global";
  std::optional<std::int64_t> built_at;
  build->add_option("--bin-size", bin_size, "Histogram bin width in per-impression eCPM")->check(CLI::PositiveNumber);
  build->add_option("--group-by", group_by, "global, by_context, by_advertiser or by_advertiser_context");
  build->add_option("--max-ecpm", max_ecpm, "Upper range bound for the top position")->check(CLI::PositiveNumber);
  build->add_option("--max-position", max_position, "Only use candidate positions up to this (0: all)")
      ->check(CLI::NonNegativeNumber);
  build->add_option("--divisor", divisor, "campaigns or observations");
  build->add_option("--observations", observations_file, "JSONL range observations instead of stored logs");
  build->add_option("--group", build_group, "Group name for --observations");
  build->add_option("--built-at", built_at, "Timestamp recorded in the model (default: now)");

  // curves
  auto* curves = app.add_subcommand("curves", "Tabulate win rate, cost, CPA, clicks and spend over a bid grid");
  std::string curves_group;
  std::optional<double> from, to, step;
  double pctr = 0.0, pcvr = 0.0, impressions = 1.0;
  std::string curves_format = "csv";
  std::string curves_out;
  curves->add_option("--group", curves_group)->required();
  curves->add_option("--from", from);
  curves->add_option("--to", to);
  curves->add_option("--step", step);
  curves->add_option("--pctr", pctr)->required();
  curves->add_option("--pcvr", pcvr)->required();
  curves->add_option("--impressions", impressions);
  curves->add_option("--format", curves_format)->check(CLI::IsMember({"csv", "json"}));
  curves->add_option("--out", curves_out);

  // recommend
  auto* recommend = app.add_subcommand("recommend", "Recommend a bid for a CPA goal and budget");
  std::string rec_group;
  double cpa_goal = 0.0, budget = 0.0, rec_impressions = 0.0, rec_pctr = 0.0, rec_pcvr = 0.0;
  std::optional<double> tolerance;
  recommend->add_option("--group", rec_group)->required();
  recommend->add_option("--cpa-goal", cpa_goal)->required();
  recommend->add_option("--budget", budget)->required();
  recommend->add_option("--impressions", rec_impressions)->required();
  recommend->add_option("--pctr", rec_pctr)->required();
  recommend->add_option("--pcvr", rec_pcvr)->required();
  recommend->add_option("--tolerance", tolerance);

  // simulate
  auto* simulate = app.add_subcommand("simulate", "Generate an auction log from a market config");
  std::string config_file;
  std::size_t auctions = 10000;
  std::optional<std::uint64_t> seed;
  std::string sim_out;
  std::string sim_format = "jsonl";
  simulate->add_option("--config", config_file)->required();
  simulate->add_option("--auctions", auctions)->check(CLI::PositiveNumber);
  simulate->add_option("--seed", seed);
  simulate->add_option("--out", sim_out);
  simulate->add_option("--format", sim_format)->check(CLI::IsMember({"jsonl", "csv"}));

  // dataset
  auto* dataset_cmd = app.add_subcommand("dataset", "Build a CPA evaluation dataset from a simulated market");
  std::string dataset_out, log_out;
  dataset_cmd->add_option("--config", config_file)->required();
  dataset_cmd->add_option("--auctions", auctions)->check(CLI::PositiveNumber);
  dataset_cmd->add_option("--seed", seed);
  dataset_cmd->add_option("--out", dataset_out);
  dataset_cmd->add_option("--log-out", log_out, "Also write the generated log");

  // eval
  auto* eval = app.add_subcommand("eval", "Evaluate forecasts (cpa), simulated win rates (winrate) or an A/B run (ab)");
  std::string mode = "cpa";
  std::string method = "ours";
  std::string dataset_file, predictions_file, eval_out;
  double eval_bin = 0.001;
  double tol = 0.05;
  eval->add_option("--mode", mode)->check(CLI::IsMember({"cpa", "winrate", "ab"}));
  eval->add_option("--method", method)->check(CLI::IsMember({"ours", "nns", "li", "external"}));
  eval->add_option("--dataset", dataset_file);
  eval->add_option("--predictions", predictions_file, "JSON object of campaign_id to predicted CPA");
  eval->add_option("--config", config_file);
  eval->add_option("--auctions", auctions)->check(CLI::PositiveNumber);
  eval->add_option("--seed", seed);
  eval->add_option("--bin-size", eval_bin)->check(CLI::PositiveNumber);
  eval->add_option("--tolerance", tol)->check(CLI::NonNegativeNumber);
  eval->add_option("--out", eval_out);

  // serve
  auto* serve = app.add_subcommand("serve", "Run the HTTP API");
  int port = 8080;
  std::string host = "127.0.0.1";
  std::string static_dir;
  serve->add_option("--port", port)->check(CLI::Range(0, 65535));
  serve->add_option("--host", host);
  serve->add_option("--static", static_dir, "Directory served at /");

  std::vector<std::string> rev(args.rbegin(), args.rend());
  if (!rev.empty()) rev.pop_back();  // program name
  try {
    app.parse(rev);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    app.exit(e, out, err);
    return kExitUsage;
  }

  auto store = [&] { return ModelStore(store_path.empty() ? ModelStore::resolve_root() : std::filesystem::path(store_path)); };

  try {
    if (ingest->parsed()) {
      std::ifstream in = open_input(ingest_file);
      ParseResult parsed = parse_log(in, parse_log_format(ingest_format));
      for (const auto& i : parsed.issues) err << ingest_file << ": " << issue_line(i) << '\n';
      if (parsed.snapshots.empty()) throw DataError("no valid auctions in " + ingest_file);
      const std::string batch = store().append_logs(parsed.snapshots);
      out << Json{{"accepted", parsed.snapshots.size()}, {"rejected", parsed.issues.size()}, {"batch", batch}}.dump()
          << '\n';
    } else if (build->parsed()) {
      BuildOptions bopts;
      bopts.bin_size = bin_size;
      bopts.divisor = parse_divisor(divisor);
      const std::int64_t stamp = built_at.value_or(static_cast<std::int64_t>(std::time(nullptr)));
      ModelStore s = store();
      std::map<std::string, BidLandscape> built;
      std::vector<std::string> empty;
      if (!observations_file.empty()) {
        std::ifstream in = open_input(observations_file);
        built.emplace(build_group, build_landscape(read_observations(in), bopts, build_group, stamp));
      } else {
        PipelineOptions popts;
        try {
          popts.grouping = parse_grouping_key(group_by);
        } catch (const std::invalid_argument& e) {
          throw UsageError(e.what());
        }
        popts.ranges.max_ecpm = max_ecpm;
        popts.ranges.max_position = max_position;
        popts.build = bopts;
        popts.built_at = stamp;
        const auto logs = s.load_logs();
        if (logs.empty()) throw DataError("no logs in store " + s.root().string());
        PipelineResult r = build_group_landscapes(logs, popts);
        built = std::move(r.landscapes);
        empty = std::move(r.empty_groups);
      }
      Json groups = Json::array();
      for (const auto& [group, l] : built) {
        s.save(l);
        groups.push_back({{"group", group},
                          {"n", l.dist.n},
                          {"n_observations", l.dist.n_observations},
                          {"max_index", l.dist.max_index}});
      }
      out << Json{{"groups", std::move(groups)}, {"empty_groups", empty}}.dump() << '\n';
    } else if (curves->parsed()) {
      if (!(pctr > 0.0)) throw UsageError("pctr must be positive");
      if (!(pcvr > 0.0)) throw UsageError("pcvr must be positive");
      if (!(impressions > 0.0)) throw UsageError("impressions must be positive");
      if (step && !(*step > 0.0)) throw UsageError("step must be positive");
      const BidLandscape l = store().load(curves_group);
      const double bin = l.dist.bin_size;
      const double lo = from.value_or(bin);
      const double hi = to.value_or(static_cast<double>(std::max<std::int64_t>(l.dist.max_index, 1)) * bin);
      if (hi < lo) throw UsageError("--to must not be below --from");
      const auto points = curve_table(l, CampaignInputs{impressions, pctr, pcvr, curves_group}, lo, hi, step.value_or(bin));
      std::ostringstream buf;
      if (curves_format == "csv") {
        write_curves_csv(buf, points);
      } else {
        buf << curves_to_json(curves_group, points).dump(2) << '\n';
      }
      emit(out, curves_out, buf.str());
    } else if (recommend->parsed()) {
      Json body{{"group", rec_group},     {"impressions", rec_impressions}, {"pctr", rec_pctr},
                {"pcvr", rec_pcvr},       {"cpa_goal", cpa_goal},           {"budget", budget}};
      if (tolerance) body["tolerance"] = *tolerance;
      const RecommendRequest req = parse_recommend_request(body);
      const BidLandscape l = store().load(req.group);
      out << to_json(recommend_bid(l, req.inputs, req.goal)).dump(2) << '\n';
    } else if (simulate->parsed()) {
      const MarketConfig m = load_market(config_file, seed);
      std::ostringstream buf;
      write_log(buf, generate_log(m, auctions), parse_log_format(sim_format));
      emit(out, sim_out, buf.str());
    } else if (dataset_cmd->parsed()) {
      const MarketConfig m = load_market(config_file, seed);
      const auto log = generate_log(m, auctions);
      if (!log_out.empty()) {
        std::ostringstream buf;
        write_log(buf, log, LogFormat::kJsonl);
        emit(out, log_out, buf.str());
      }
      emit(out, dataset_out, to_json(make_cpa_dataset(m, log)).dump(2) + "\n");
    } else if (eval->parsed()) {
      Json result;
      if (mode == "cpa") {
        if (dataset_file.empty()) throw UsageError("--dataset is required for --mode cpa");
        const ForecastMethod fm = parse_forecast_method(method);
        const CpaDataset d = cpa_dataset_from_json(read_json_file(dataset_file));
        std::map<std::string, BidLandscape> landscapes;
        std::optional<std::map<std::string, double>> external;
        if (fm == ForecastMethod::kOurs) {
          ModelStore s = store();
          for (const auto& c : d.cases) {
            if (!landscapes.count(c.group)) landscapes.emplace(c.group, s.load(c.group));
          }
        } else if (fm == ForecastMethod::kExternal) {
          if (predictions_file.empty()) throw UsageError("--method external requires --predictions");
          external = predictions_from_json(read_json_file(predictions_file));
        }
        result = to_json(eval_cpa_forecast(d, fm, landscapes, external ? &*external : nullptr));
        result["method"] = method;
      } else {
        if (config_file.empty()) throw UsageError("--config is required for --mode " + mode);
        const MarketConfig m = load_market(config_file, seed);
        const auto log = generate_log(m, auctions);
        if (mode == "winrate") {
          WinrateEvalOptions wopts;
          wopts.bin_size = eval_bin;
          result = to_json(evaluate_winrate_forecasts(m, log, wopts));
        } else {
          CpaPolicyOptions popts;
          popts.bin_size = eval_bin;
          popts.impressions = static_cast<double>(auctions);
          popts.tolerance = tol;
          const BidPolicy optimized = cpa_goal_policy(m, log, popts);
          MarketConfig held_out = m;
          held_out.seed = m.seed + 1;
          result = to_json(simulated_ab(held_out, base_bid_policy(m), optimized, auctions));
        }
      }
      emit(out, eval_out, result.dump(2) + "\n");
    } else if (serve->parsed()) {
      ServiceConfig cfg;
      cfg.store_root = store_path.empty() ? ModelStore::resolve_root() : std::filesystem::path(store_path);
      cfg.host = host;
      cfg.port = port;
      cfg.static_dir = static_dir;
      Service service(cfg);
      g_service = &service;
      std::signal(SIGINT, stop_service);
      std::signal(SIGTERM, stop_service);
      err << "listening on " << host << ':' << port << std::endl;
      const bool ok = service.listen();
      g_service = nullptr;
      if (!ok) throw DataError("cannot listen on " + host + ":" + std::to_string(port));
    }
  } catch (const ValidationError& e) {
    for (const auto& [field, message] : e.fields()) err << "error: " << message << '\n';
    return kExitUsage;
  } catch (const UsageError& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::invalid_argument& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitData;
  }
  return kExitOk;
}

int cli_main(int argc, const char* const* argv) {
  return cli_main(std::vector<std::string>(argv, argv + argc), std::cout, std::cerr);
}

}  // namespace bidscape
