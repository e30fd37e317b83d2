#include "bidscape/service.hpp"

#include <charconv>
#include <ctime>
#include <map>
#include <mutex>
#include <optional>
#include <sstream>

#include <httplib.h>

#include "bidscape/error.hpp"
#include "bidscape/json_io.hpp"
#include "bidscape/landscape.hpp"
#include "bidscape/model_store.hpp"
#include "bidscape/optimizer.hpp"

namespace bidscape {

namespace {

using LandscapeMap = std::map<std::string, std::shared_ptr<const BidLandscape>>;

void send(httplib::Response& res, int status, const Json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

void send_error(httplib::Response& res, int status, const std::string& message) {
  send(res, status, Json{{"error", message}});
}

void send_validation(httplib::Response& res, const ValidationError& e) {
  Json fields = Json::object();
  for (const auto& [k, v] : e.fields()) fields[k] = v;
  send(res, 400, Json{{"error", e.what()}, {"fields", std::move(fields)}});
}

std::optional<double> query_number(const httplib::Request& req, const char* key,
                                   std::map<std::string, std::string>& errors) {
  if (!req.has_param(key)) return std::nullopt;
  const std::string raw = req.get_param_value(key);
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(raw.data(), raw.data() + raw.size(), v);
  if (ec != std::errc() || ptr != raw.data() + raw.size()) {
    errors[key] = std::string(key) + " must be a number";
    return std::nullopt;
  }
  return v;
}

Json parse_body(const std::string& body) {
  try {
    return Json::parse(body);
  } catch (const Json::parse_error& e) {
    throw ValidationError("body", std::string("invalid JSON: ") + e.what());
  }
}

}  // namespace

struct Service::Impl {
  ServiceConfig config;
  ModelStore store;
  httplib::Server server;

  // Readers copy the pointer under the mutex and then work on an immutable
  // map; rebuilds publish a fresh map.
  mutable std::mutex snapshot_mutex;
  std::shared_ptr<const LandscapeMap> snapshot = std::make_shared<LandscapeMap>();
  std::mutex build_mutex;

  explicit Impl(ServiceConfig c) : config(std::move(c)), store(config.store_root) { routes(); }

  std::shared_ptr<const LandscapeMap> current() const {
    std::lock_guard guard(snapshot_mutex);
    return snapshot;
  }

  void publish(const std::map<std::string, BidLandscape>& built) {
    std::lock_guard guard(snapshot_mutex);
    auto next = std::make_shared<LandscapeMap>(*snapshot);
    for (const auto& [group, l] : built) (*next)[group] = std::make_shared<const BidLandscape>(l);
    snapshot = std::move(next);
  }

  // Falls back to the store for groups built by another process.
  std::shared_ptr<const BidLandscape> landscape(const std::string& group) {
    const auto snap = current();
    if (auto it = snap->find(group); it != snap->end()) return it->second;
    BidLandscape loaded = store.load(group);  // NotFoundError -> 404
    publish({{group, loaded}});
    return current()->at(group);
  }

  void routes() {
    server.set_exception_handler([](const httplib::Request&, httplib::Response& res, std::exception_ptr ep) {
      try {
        std::rethrow_exception(ep);
      } catch (const ValidationError& e) {
        send_validation(res, e);
      } catch (const NotFoundError& e) {
        send_error(res, 404, e.what());
      } catch (const DataError& e) {
        send_error(res, 422, e.what());
      } catch (const std::invalid_argument& e) {
        send_error(res, 400, e.what());
      } catch (const std::exception& e) {
        send_error(res, 500, e.what());
      } catch (...) {
        send_error(res, 500, "internal error");
      }
    });

    server.Get("/v1/health", [](const httplib::Request&, httplib::Response& res) {
      send(res, 200, Json{{"status", "ok"}});
    });

    server.Post("/v1/logs", [this](const httplib::Request& req, httplib::Response& res) {
      std::istringstream in(req.body);
      ParseResult parsed = parse_log(in, LogFormat::kJsonl);
      Json issues = Json::array();
      for (const auto& i : parsed.issues) {
        issues.push_back({{"line", i.line}, {"auction_id", i.auction_id}, {"message", i.message}});
      }
      if (parsed.snapshots.empty()) {
        send(res, 400, Json{{"error", "no valid auctions in body"}, {"issues", std::move(issues)}});
        return;
      }
      const std::string batch = store.append_logs(parsed.snapshots);
      send(res, 200,
           Json{{"accepted", parsed.snapshots.size()},
                {"rejected", parsed.issues.size()},
                {"batch", batch},
                {"issues", std::move(issues)}});
    });

    server.Post("/v1/landscape/build", [this](const httplib::Request& req, httplib::Response& res) {
      const Json body = req.body.empty() ? Json::object() : parse_body(req.body);
      if (!body.is_object()) throw ValidationError("body", "request body must be a JSON object");
      PipelineOptions opts;
      std::map<std::string, std::string> errors;
      try {
        if (body.contains("group_by")) opts.grouping = parse_grouping_key(body.at("group_by").get<std::string>());
      } catch (const std::exception& e) {
        errors["group_by"] = e.what();
      }
      auto number = [&](const char* key, double& out, bool positive) {
        auto it = body.find(key);
        if (it == body.end() || it->is_null()) return;
        if (!it->is_number() || (positive && !(it->get<double>() > 0.0))) {
          errors[key] = std::string(key) + " must be a positive number";
        } else {
          out = it->get<double>();
        }
      };
      number("bin_size", opts.build.bin_size, true);
      number("max_ecpm", opts.ranges.max_ecpm, true);
      if (auto it = body.find("max_position"); it != body.end() && !it->is_null()) {
        if (!it->is_number_integer() || it->get<int>() < 0) {
          errors["max_position"] = "max_position must be a non-negative integer";
        } else {
          opts.ranges.max_position = it->get<int>();
        }
      }
      if (auto it = body.find("divisor"); it != body.end() && !it->is_null()) {
        const std::string d = it->is_string() ? it->get<std::string>() : "";
        if (d == "campaigns") {
          opts.build.divisor = BuildOptions::Divisor::kCampaigns;
        } else if (d == "observations") {
          opts.build.divisor = BuildOptions::Divisor::kObservations;
        } else {
          errors["divisor"] = "divisor must be 'campaigns' or 'observations'";
        }
      }
      if (!errors.empty()) throw ValidationError(std::move(errors));
      opts.built_at = static_cast<std::int64_t>(std::time(nullptr));

      std::lock_guard guard(build_mutex);
      const auto logs = store.load_logs();
      if (logs.empty()) throw DataError("no logs ingested");
      PipelineResult result = build_group_landscapes(logs, opts);
      for (const auto& [group, l] : result.landscapes) store.save(l);
      publish(result.landscapes);

      Json groups = Json::array();
      for (const auto& [group, l] : result.landscapes) {
        groups.push_back({{"group", group},
                          {"n", l.dist.n},
                          {"n_observations", l.dist.n_observations},
                          {"max_index", l.dist.max_index}});
      }
      send(res, 200, Json{{"groups", std::move(groups)}, {"empty_groups", result.empty_groups}});
    });

    server.Get("/v1/landscape", [this](const httplib::Request&, httplib::Response& res) {
      send(res, 200, Json{{"groups", store.groups()}});
    });

    server.Get(R"(/v1/landscape/(.+)/curves)", [this](const httplib::Request& req, httplib::Response& res) {
      const std::string group = req.matches[1];
      std::map<std::string, std::string> errors;
      const auto from = query_number(req, "from", errors);
      const auto to = query_number(req, "to", errors);
      const auto step = query_number(req, "step", errors);
      const auto pctr = query_number(req, "pctr", errors);
      const auto pcvr = query_number(req, "pcvr", errors);
      const auto impressions = query_number(req, "impressions", errors);
      if (!errors.count("pctr") && !(pctr && *pctr > 0.0)) errors["pctr"] = "pctr must be positive";
      if (!errors.count("pcvr") && !(pcvr && *pcvr > 0.0)) errors["pcvr"] = "pcvr must be positive";
      if (impressions && !(*impressions > 0.0)) errors["impressions"] = "impressions must be positive";
      if (step && !(*step > 0.0)) errors["step"] = "step must be positive";
      if (!errors.empty()) throw ValidationError(std::move(errors));

      const auto l = landscape(group);
      const double bin = l->dist.bin_size;
      const double lo = from.value_or(bin);
      const double hi = to.value_or(static_cast<double>(std::max<std::int64_t>(l->dist.max_index, 1)) * bin);
      if (hi < lo) throw ValidationError("to", "to must not be below from");
      const CampaignInputs inputs{impressions.value_or(1.0), *pctr, *pcvr, group};
      send(res, 200, curves_to_json(group, curve_table(*l, inputs, lo, hi, step.value_or(bin))));
    });

    server.Get(R"(/v1/landscape/(.+))", [this](const httplib::Request& req, httplib::Response& res) {
      send(res, 200, to_json(*landscape(req.matches[1])));
    });

    server.Post("/v1/recommend", [this](const httplib::Request& req, httplib::Response& res) {
      const RecommendRequest r = parse_recommend_request(parse_body(req.body));
      const auto l = landscape(r.group);
      send(res, 200, to_json(recommend_bid(*l, r.inputs, r.goal)));
    });

    if (!config.static_dir.empty()) server.set_mount_point("/", config.static_dir);
  }
};

Service::Service(ServiceConfig config) : impl_(std::make_unique<Impl>(std::move(config))) {}

Service::~Service() { stop(); }

bool Service::listen() { return impl_->server.listen(impl_->config.host, impl_->config.port); }

int Service::bind_to_any_port() { return impl_->server.bind_to_any_port(impl_->config.host); }

bool Service::listen_after_bind() { return impl_->server.listen_after_bind(); }

void Service::stop() {
  if (impl_) impl_->server.stop();
}

void Service::wait_until_ready() const { impl_->server.wait_until_ready(); }

}  // namespace bidscape
