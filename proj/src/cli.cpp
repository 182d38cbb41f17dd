#include "pidres/cli.hpp"

#include <csignal>
#include <cstdlib>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>

#include "pidres/error.hpp"
#include "pidres/http_service.hpp"

namespace pidres {
namespace {

Service* g_serving = nullptr;

void on_signal(int) {
  if (g_serving) g_serving->stop();
}

std::vector<std::string> split_names(const std::vector<std::string>& raw) {
  std::vector<std::string> out;
  for (const auto& r : raw) {
    std::size_t begin = 0;
    while (begin <= r.size()) {
      auto end = r.find_first_of(",+", begin);
      if (end == std::string::npos) end = r.size();
      if (end > begin) out.push_back(r.substr(begin, end - begin));
      begin = end + 1;
    }
  }
  return out;
}

DatasetMetadata read_metadata(const std::string& path) {
  if (path.empty()) return {};
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::InvalidArgument, "cannot open metadata file " + path);
  auto j = nlohmann::json::parse(in, nullptr, false);
  if (j.is_discarded()) throw Error(ErrorKind::InvalidArgument, "metadata file is not valid JSON: " + path);
  try {
    return metadata_from_json(j);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::InvalidArgument, std::string("bad metadata: ") + e.what());
  }
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Persistent-identifier resolver for time-series dataset slices", "pidres"};
  app.require_subcommand(1);

  std::string config_path = "pidres.json";
  if (const char* env = std::getenv("PIDRES_CONFIG")) config_path = env;
  app.add_option("--config", config_path, "Service configuration file (JSON)");

  auto* serve = app.add_subcommand("serve", "Run the HTTP resolver");

  auto* ingest = app.add_subcommand("ingest", "Register a dataset from a configured source");
  std::string source_id, dataset, location, metadata_path;
  std::vector<std::string> remote_sensors;
  ingest->add_option("--source", source_id, "Source id from the config")->required();
  ingest->add_option("--dataset", dataset, "Dataset name")->required();
  ingest->add_option("--metadata", metadata_path, "Catalog metadata (JSON)");
  ingest->add_option("--sensors", remote_sensors, "Sensor files to fetch (remote sources)");
  ingest->add_option("location", location, "Dataset directory or URL (default: <root>/<dataset>)");

  auto* resolve = app.add_subcommand("resolve", "Print the CSV slice (or redirect) for a PID");
  std::string pid;
  resolve->add_option("pid", pid, "ark:/NAAN/... or a full URL")->required();

  auto* info = app.add_subcommand("info", "Print catalog metadata for a PID");
  info->add_option("pid", pid, "ark:/NAAN/... or a full URL")->required();

  auto* mint = app.add_subcommand("mint", "Mint an opaque identifier");
  std::string target;
  mint->add_option("--target", target, "URL or ark:/ PID to bind")->required();

  auto* crossfold = app.add_subcommand("crossfold", "Print k-fold train/test PID pairs");
  std::vector<std::string> sensors, measurements;
  std::size_t k = 0;
  crossfold->add_option("--dataset", dataset, "Dataset name")->required();
  crossfold->add_option("--sensors", sensors, "Sensor names")->required();
  crossfold->add_option("--measurements", measurements, "Measurement names")->required();
  crossfold->add_option("-k", k, "Number of folds")->required();

  auto* crawl = app.add_subcommand("crawl", "Re-scan sources and print change events");

  auto* search = app.add_subcommand("search", "Search the catalog");
  std::string query;
  search->add_option("query", query, "Case-insensitive substring");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e, out, err);
    return code == 0 ? 0 : 1;
  }

  try {
    Service service(load_config(config_path));
    auto& resolver = service.resolver();

    if (*serve) {
      int port = service.bind();
      err << "pidres listening on " << service.config().listen << ":" << port << std::endl;
      g_serving = &service;
      std::signal(SIGINT, on_signal);
      std::signal(SIGTERM, on_signal);
      service.listen();
      g_serving = nullptr;
    } else if (*ingest) {
      auto meta = read_metadata(metadata_path);
      for (auto& s : split_names(remote_sensors)) meta.sensors.push_back(std::move(s));
      auto entry = service.catalog().register_dataset(
          source_id, dataset, std::move(meta), location.empty() ? std::nullopt : std::optional(location));
      out << to_json(entry).dump(2) << '\n';
    } else if (*resolve || *info) {
      auto text = *info ? pid + "?info" : pid;
      auto r = resolver.resolve_text(text);
      if (auto* d = std::get_if<DataResult>(&r)) {
        out << render_csv(d->slice);
      } else if (auto* red = std::get_if<Redirect>(&r)) {
        out << red->location << '\n';
      } else {
        out << std::get<InfoResult>(r).document.dump(2) << '\n';
      }
    } else if (*mint) {
      auto b = resolver.mint(target);
      out << b.noid << ' ' << resolver.url_for(b.noid) << '\n';
    } else if (*crossfold) {
      auto folds = resolver.crossfold_pids(dataset, split_names(sensors), split_names(measurements), k);
      for (std::size_t i = 0; i < folds.size(); ++i) {
        out << i << '\t' << folds[i].train << '\t' << folds[i].test << '\n';
      }
    } else if (*crawl) {
      for (const auto& e : service.catalog().crawl()) out << to_json(e).dump() << '\n';
    } else if (*search) {
      nlohmann::json list = nlohmann::json::array();
      for (const auto& s : service.catalog().search(query)) list.push_back(to_json(s));
      out << list.dump(2) << '\n';
    }
    out.flush();
    return 0;
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return is_user_error(e.kind()) ? 1 : 2;
  } catch (const std::exception& e) {
    err << "internal error: " << e.what() << '\n';
    return 2;
  }
}

}  // namespace pidres
