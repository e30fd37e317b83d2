#pragma once

// HTTP/JSON service over a ModelStore. Routes are under /v1; see
// docs/http_api.md.

#include <filesystem>
#include <memory>
#include <string>

namespace bidscape {

struct ServiceConfig {
  std::filesystem::path store_root;
  std::string host = "127.0.0.1";
  int port = 8080;
  std::string static_dir;  // served at / when non-empty
};

class Service {
 public:
  explicit Service(ServiceConfig config);
  ~Service();
  Service(const Service&) = delete;
  Service& operator=(const Service&) = delete;

  /// Binds config.host:config.port and serves until stop(). False when the
  /// socket cannot be bound.
  bool listen();

  /// Binds an ephemeral port on config.host and returns it (-1 on failure).
  /// Follow with listen_after_bind().
  int bind_to_any_port();
  bool listen_after_bind();

  void stop();
  void wait_until_ready() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace bidscape
