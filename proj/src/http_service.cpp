#include "pidres/http_service.hpp"

#include <fstream>
#include <iostream>
#include <sstream>

#include <httplib.h>

#include "pidres/error.hpp"

namespace pidres {
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

HttpResponse text(int status, std::string body) {
  for (auto& c : body) {
    if (c == '\n' || c == '\r') c = ' ';
  }
  return {status, "text/plain; charset=utf-8", body + "\n", {}};
}

HttpResponse json_response(int status, const json& j) {
  return {status, "application/json", j.dump(2) + "\n", {}};
}

HttpResponse error_response(const Error& e) { return text(status_for(e.kind()), e.what()); }

fs::path resolve_against(const fs::path& base, const std::string& p) {
  fs::path path(p);
  return path.is_absolute() ? path : (base / path).lexically_normal();
}

}  // namespace

int status_for(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::MalformedPid:
    case ErrorKind::InvalidRange:
    case ErrorKind::DuplicateName:
    case ErrorKind::BadNaan:
    case ErrorKind::InvalidTarget:
    case ErrorKind::InvalidArgument:
    case ErrorKind::TooFewRows:
      return 400;
    case ErrorKind::UnknownNaan:
    case ErrorKind::NotFound:
    case ErrorKind::UnknownSensor:
    case ErrorKind::UnknownMeasurement:
      return 404;
    default:
      return 500;
  }
}

ServiceConfig config_from_json(const json& j, const fs::path& base_dir) {
  ServiceConfig c;
  try {
    c.listen = j.value("listen", c.listen);
    c.port = j.value("port", c.port);
    c.naans = j.at("naans").get<std::vector<std::string>>();
    c.base_url = j.at("base_url").get<std::string>();
    c.state_dir = resolve_against(base_dir, j.at("state_dir").get<std::string>());
    for (const auto& s : j.value("sources", json::array())) {
      DataSource src;
      src.id = s.at("id").get<std::string>();
      const auto kind = s.value("kind", "local_directory");
      if (kind == "local_directory") {
        src.kind = SourceKind::local_directory;
        src.root = resolve_against(base_dir, s.at("root").get<std::string>()).string();
      } else if (kind == "remote_http") {
        src.kind = SourceKind::remote_http;
        src.root = s.at("root").get<std::string>();
      } else {
        throw Error(ErrorKind::InvalidArgument, "unknown source kind '" + kind + "'");
      }
      c.sources.push_back(std::move(src));
    }
  } catch (const json::exception& e) {
    throw Error(ErrorKind::InvalidArgument, std::string("bad config: ") + e.what());
  }
  if (c.naans.empty()) throw Error(ErrorKind::InvalidArgument, "bad config: at least one NAAN is required");
  return c;
}

ServiceConfig load_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::InvalidArgument, "cannot open config file " + path.string());
  json j = json::parse(in, nullptr, false);
  if (j.is_discarded()) throw Error(ErrorKind::InvalidArgument, "config file is not valid JSON: " + path.string());
  return config_from_json(j, fs::absolute(path).parent_path());
}

std::optional<std::string> query_param(std::string_view qs, std::string_view key) {
  while (!qs.empty()) {
    auto amp = qs.find('&');
    auto pair = qs.substr(0, amp);
    auto eq = pair.find('=');
    std::string k(pair.substr(0, eq));
    if (percent_decode(k) == key) {
      std::string v(eq == std::string_view::npos ? std::string_view{} : pair.substr(eq + 1));
      for (auto& c : v) {
        if (c == '+') c = ' ';
      }
      return percent_decode(v);
    }
    if (amp == std::string_view::npos) break;
    qs.remove_prefix(amp + 1);
  }
  return std::nullopt;
}

Service::Service(ServiceConfig config, Clock clock) : config_(std::move(config)) {
  Catalog::Options options;
  options.state_dir = config_.state_dir;
  options.sources = config_.sources;
  options.clock = clock;
  options.on_event = [](const ChangeEvent& e) { std::clog << "catalog event: " << to_json(e).dump() << '\n'; };
  catalog_ = std::make_unique<Catalog>(std::move(options));
  minter_ = std::make_unique<Minter>(config_.state_dir / "mints.log", clock);
  resolver_ = std::make_unique<Resolver>(config_.naans, config_.base_url, *catalog_, *minter_);
}

Service::~Service() = default;

HttpResponse Service::handle(std::string_view method, std::string_view target, std::string_view body) {
  auto q = target.find('?');
  auto path = target.substr(0, q);
  auto query = q == std::string_view::npos ? std::string_view{} : target.substr(q + 1);
  auto decoded = percent_decode(path);

  auto only = [&](std::string_view allowed) -> std::optional<HttpResponse> {
    if (method == allowed) return std::nullopt;
    auto r = text(405, "method not allowed");
    r.headers.emplace_back("Allow", std::string(allowed));
    return r;
  };

  if (decoded.starts_with("/ark:/")) {
    if (auto r = only("GET")) return *r;
    return handle_resolve(path, query);
  }
  if (decoded == "/mint") {
    if (auto r = only("POST")) return *r;
    return handle_mint(body);
  }
  if (decoded == "/catalog") {
    if (auto r = only("GET")) return *r;
    return handle_search(query);
  }
  if (decoded == "/crawl") {
    if (auto r = only("POST")) return *r;
    return handle_crawl();
  }
  if (decoded == "/health") {
    if (auto r = only("GET")) return *r;
    return {200, "text/plain; charset=utf-8", "ok", {}};
  }
  return text(404, "no such endpoint: " + decoded);
}

HttpResponse Service::handle_resolve(std::string_view raw_path, std::string_view query_string) {
  try {
    std::string pid(raw_path.substr(raw_path.starts_with('/') ? 1 : 0));
    if (query_param(query_string, "info")) pid += "?info";
    auto resolution = resolver_->resolve_text(pid);
    if (auto* r = std::get_if<Redirect>(&resolution)) {
      HttpResponse resp{r->status, "text/plain; charset=utf-8", "", {}};
      resp.headers.emplace_back("Location", r->location);
      return resp;
    }
    if (auto* d = std::get_if<DataResult>(&resolution)) {
      return {200, "text/csv; charset=utf-8", render_csv(d->slice), {}};
    }
    return json_response(200, std::get<InfoResult>(resolution).document);
  } catch (const Error& e) {
    return error_response(e);
  } catch (const std::exception& e) {
    return text(500, std::string("internal error: ") + e.what());
  }
}

HttpResponse Service::handle_mint(std::string_view body) {
  json j = json::parse(body, nullptr, false);
  if (j.is_discarded() || !j.is_object()) return text(400, "request body must be a JSON object");
  auto it = j.find("target");
  if (it == j.end() || !it->is_string()) return text(400, "field 'target' must be a string");
  try {
    auto b = resolver_->mint(it->get<std::string>());
    return json_response(201, {{"noid", b.noid}, {"ark", resolver_->ark_for(b.noid)}, {"url", resolver_->url_for(b.noid)}});
  } catch (const Error& e) {
    return error_response(e);
  } catch (const std::exception& e) {
    return text(500, std::string("internal error: ") + e.what());
  }
}

HttpResponse Service::handle_search(std::string_view query_string) {
  json out = json::array();
  for (const auto& s : catalog_->search(query_param(query_string, "q").value_or(""))) out.push_back(to_json(s));
  return json_response(200, out);
}

HttpResponse Service::handle_crawl() {
  try {
    json out = json::array();
    for (const auto& e : catalog_->crawl()) out.push_back(to_json(e));
    return json_response(200, out);
  } catch (const Error& e) {
    return error_response(e);
  }
}

int Service::bind() {
  server_ = std::make_unique<httplib::Server>();
  auto dispatch = [this](const httplib::Request& req, httplib::Response& res) {
    auto r = handle(req.method, req.target, req.body);
    res.status = r.status;
    for (const auto& [k, v] : r.headers) res.set_header(k, v);
    res.set_content(r.body, r.content_type);
  };
  server_->Get(".*", dispatch);
  server_->Post(".*", dispatch);
  server_->Put(".*", dispatch);
  server_->Delete(".*", dispatch);
  int port = config_.port == 0 ? server_->bind_to_any_port(config_.listen)
                               : (server_->bind_to_port(config_.listen, config_.port) ? config_.port : -1);
  if (port < 0) {
    throw Error(ErrorKind::IoError, "cannot bind " + config_.listen + ":" + std::to_string(config_.port));
  }
  return port;
}

void Service::listen() {
  if (!server_) throw Error(ErrorKind::InvariantViolation, "listen() called before bind()");
  server_->listen_after_bind();
}

void Service::stop() {
  if (server_) server_->stop();
}

}  // namespace pidres
