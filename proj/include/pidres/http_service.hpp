#pragma once

#include <filesystem>
#include <memory>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <json.hpp>

#include "pidres/catalog.hpp"
#include "pidres/error.hpp"
#include "pidres/resolver.hpp"

namespace httplib {
class Server;
}

namespace pidres {

struct ServiceConfig {
  std::string listen = "127.0.0.1";
  int port = 8080;
  std::vector<std::string> naans;
  std::vector<DataSource> sources;
  std::filesystem::path state_dir;
  std::string base_url;
};

/// Relative `state_dir` and local source roots are resolved against
/// `base_dir`.
ServiceConfig config_from_json(const nlohmann::json& j, const std::filesystem::path& base_dir);
ServiceConfig load_config(const std::filesystem::path& path);

struct HttpResponse {
  int status = 200;
  std::string content_type = "text/plain; charset=utf-8";
  std::string body;
  std::vector<std::pair<std::string, std::string>> headers;
};

/// HTTP status for a library error kind.
int status_for(ErrorKind kind);

/// Owns the catalog, minter and resolver for one configuration and maps HTTP
/// requests onto them. The handle_* members are transport independent; the
/// socket side is httplib.
class Service {
 public:
  explicit Service(ServiceConfig config, Clock clock = [] { return std::chrono::system_clock::now(); });
  ~Service();

  Service(const Service&) = delete;
  Service& operator=(const Service&) = delete;

  const ServiceConfig& config() const { return config_; }
  Catalog& catalog() { return *catalog_; }
  Minter& minter() { return *minter_; }
  Resolver& resolver() { return *resolver_; }

  /// `target` is the raw request target (path plus optional query).
  HttpResponse handle(std::string_view method, std::string_view target, std::string_view body);

  HttpResponse handle_resolve(std::string_view raw_path, std::string_view query_string);
  HttpResponse handle_mint(std::string_view body);
  HttpResponse handle_search(std::string_view query_string);
  HttpResponse handle_crawl();

  /// Binds the configured address; port 0 picks a free port. Returns the
  /// bound port.
  int bind();
  /// Serves until stop() is called. bind() must have succeeded.
  void listen();
  void stop();

 private:
  ServiceConfig config_;
  std::unique_ptr<Catalog> catalog_;
  std::unique_ptr<Minter> minter_;
  std::unique_ptr<Resolver> resolver_;
  std::unique_ptr<httplib::Server> server_;
};

/// Value of `key` in an application/x-www-form-urlencoded query string.
std::optional<std::string> query_param(std::string_view query_string, std::string_view key);

}  // namespace pidres
