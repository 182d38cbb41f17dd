#include "pidres/catalog.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <ctime>
#include <fstream>
#include <set>
#include <sstream>

#include <httplib.h>

#include "pidres/error.hpp"

namespace pidres {
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw Error(ErrorKind::IoError, "cannot open " + p.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_file_atomic(const fs::path& p, const std::string& content) {
  std::error_code ec;
  fs::create_directories(p.parent_path(), ec);
  if (ec) throw Error(ErrorKind::PersistenceError, "cannot create " + p.parent_path().string() + ": " + ec.message());
  auto tmp = p;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    out << content;
    out.flush();
    if (!out) throw Error(ErrorKind::PersistenceError, "cannot write " + tmp.string());
  }
  fs::rename(tmp, p, ec);
  if (ec) throw Error(ErrorKind::PersistenceError, "cannot replace " + p.string() + ": " + ec.message());
}

std::string lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

using FileSet = std::map<std::string, std::string>;

std::optional<FileSet> fetch_local(const fs::path& dir) {
  std::error_code ec;
  if (!fs::is_directory(dir, ec)) return std::nullopt;
  FileSet files;
  fs::directory_iterator it(dir, ec);
  if (ec) throw Error(ErrorKind::IoError, "cannot list " + dir.string() + ": " + ec.message());
  for (const auto& e : it) {
    if (e.is_regular_file() && e.path().extension() == ".csv") {
      files.emplace(e.path().filename().string(), read_file(e.path()));
    }
  }
  return files;
}

struct HttpLocation {
  std::string origin;  // scheme://host[:port]
  std::string path;    // without trailing '/'
};

HttpLocation split_url(const std::string& url) {
  if (!url.starts_with("http://")) {
    throw Error(ErrorKind::IoError, "remote sources must use http:// URLs: " + url);
  }
  auto slash = url.find('/', 7);
  HttpLocation loc{url.substr(0, slash), slash == std::string::npos ? "" : url.substr(slash)};
  while (!loc.path.empty() && loc.path.back() == '/') loc.path.pop_back();
  return loc;
}

std::optional<FileSet> fetch_remote(const std::string& location, const std::vector<std::string>& sensors) {
  auto loc = split_url(location);
  httplib::Client client(loc.origin);
  client.set_connection_timeout(5);
  client.set_read_timeout(30);
  FileSet files;
  for (const auto& s : sensors) {
    auto res = client.Get(loc.path + "/" + s + ".csv");
    if (!res) {
      throw Error(ErrorKind::IoError, "fetch failed for " + location + "/" + s + ".csv: " + httplib::to_string(res.error()));
    }
    if (res->status == 404) continue;
    if (res->status != 200) {
      throw Error(ErrorKind::IoError, "fetch of " + location + "/" + s + ".csv returned HTTP " + std::to_string(res->status));
    }
    files.emplace(s + ".csv", res->body);
  }
  if (files.empty()) return std::nullopt;
  return files;
}

std::optional<FileSet> fetch(const DataSource& src, const std::string& location, const DatasetMetadata& meta) {
  if (src.kind == SourceKind::local_directory) return fetch_local(location);
  return fetch_remote(location, meta.sensors);
}

std::string default_location(const DataSource& src, const std::string& dataset) {
  if (src.kind == SourceKind::local_directory) return (fs::path(src.root) / dataset).string();
  auto root = src.root;
  while (!root.empty() && root.back() == '/') root.pop_back();
  return root + "/" + dataset;
}

std::shared_ptr<Catalog::Record> build_record(const std::string& source_id, const std::string& dataset,
                                              const std::string& location, DatasetMetadata metadata,
                                              const FileSet& files) {
  if (files.empty()) throw Error(ErrorKind::LoadError, "no sensor CSV files for dataset '" + dataset + "'");
  auto data = std::make_shared<Dataset>();
  data->name = dataset;
  auto record = std::make_shared<Catalog::Record>();
  auto& entry = record->entry;
  entry.dataset = dataset;
  entry.source_id = source_id;
  entry.location = location;

  std::size_t annotations_used = 0;
  for (const auto& [file, bytes] : files) {
    auto sensor = file.substr(0, file.size() - 4);
    if (!is_valid_name(sensor)) {
      throw Error(ErrorKind::LoadError, "sensor file name '" + file + "' is not a valid PID name");
    }
    std::shared_ptr<const SensorTable> table;
    try {
      table = std::make_shared<const SensorTable>(SensorTable::parse_csv(bytes, sensor));
    } catch (const Error& e) {
      throw Error(ErrorKind::LoadError, dataset + "/" + file + ": " + std::string(to_string(e.kind())) + ": " + e.what());
    }

    SensorInfo info;
    info.name = sensor;
    info.file = file;
    info.row_count = table->row_count();
    info.key_header = table->key_header();
    info.key_type = table->key_type();
    for (const auto& col : table->columns()) {
      ColumnInfo ci{col.name, col.type, std::nullopt};
      if (auto it = metadata.annotations.find(sensor + "." + col.name); it != metadata.annotations.end()) {
        ci.type = make_type(it->second);
        ++annotations_used;
      }
      auto values = numeric_values(col.cells);
      if (!values.empty()) ci.properties = compute_properties(values);
      info.columns.push_back(std::move(ci));
    }
    entry.sensors.push_back(std::move(info));
    data->sensors.emplace(sensor, std::move(table));
  }
  if (annotations_used != metadata.annotations.size()) {
    throw Error(ErrorKind::InvalidArgument, "annotation names a column that does not exist in '" + dataset + "'");
  }
  entry.metadata = std::move(metadata);
  entry.content_hash = content_hash(files);
  record->data = std::move(data);
  return record;
}

json optional_string(const std::optional<std::string>& s) { return s ? json(*s) : json(nullptr); }

std::optional<std::string> optional_string(const json& j) {
  if (j.is_null()) return std::nullopt;
  return j.get<std::string>();
}

std::string to_hex(const unsigned char* digest, unsigned int len) {
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out += kHex[digest[i] >> 4];
    out += kHex[digest[i] & 0xF];
  }
  return out;
}

}  // namespace

std::string format_time(std::chrono::system_clock::time_point t) {
  std::time_t tt = std::chrono::system_clock::to_time_t(t);
  std::tm tm{};
  gmtime_r(&tt, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::string_view to_string(ChangeKind k) {
  switch (k) {
    case ChangeKind::added: return "added";
    case ChangeKind::removed: return "removed";
    case ChangeKind::modified: return "modified";
    case ChangeKind::source_error: return "source_error";
  }
  return "added";
}

const SensorInfo* CatalogEntry::find_sensor(std::string_view name) const {
  for (const auto& s : sensors) {
    if (s.name == name) return &s;
  }
  return nullptr;
}

std::string sha256_hex(std::string_view bytes) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
    throw Error(ErrorKind::IoError, "SHA-256 failed");
  }
  return to_hex(digest, len);
}

std::string content_hash(const std::map<std::string, std::string>& files) {
  std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), EVP_MD_CTX_free);
  if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) != 1) {
    throw Error(ErrorKind::IoError, "SHA-256 init failed");
  }
  auto feed = [&](std::string_view s) { EVP_DigestUpdate(ctx.get(), s.data(), s.size()); };
  for (const auto& [name, bytes] : files) {
    feed(name);
    feed(std::string_view("\0", 1));
    feed(std::to_string(bytes.size()));
    feed(std::string_view("\0", 1));
    feed(bytes);
  }
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_DigestFinal_ex(ctx.get(), digest, &len);
  return to_hex(digest, len);
}

json to_json(const DatasetMetadata& m) {
  json dict = json::array();
  for (const auto& d : m.dictionary) dict.push_back({{"term", d.term}, {"definition", d.definition}});
  return {{"core", m.core},
          {"domain",
           {{"environmental", m.domain.environmental},
            {"object_class", m.domain.object_class},
            {"object_format", m.domain.object_format}}},
          {"relation", optional_string(m.relation)},
          {"model", m.model},
          {"dictionary", std::move(dict)},
          {"schema_name", m.schema_name},
          {"annotations", m.annotations},
          {"sensors", m.sensors}};
}

DatasetMetadata metadata_from_json(const json& j) {
  DatasetMetadata m;
  if (!j.is_object()) throw Error(ErrorKind::InvalidArgument, "metadata must be a JSON object");
  m.core = j.value("core", "");
  if (auto it = j.find("domain"); it != j.end()) {
    m.domain.environmental = it->value("environmental", "");
    m.domain.object_class = it->value("object_class", "");
    m.domain.object_format = it->value("object_format", "");
  }
  if (auto it = j.find("relation"); it != j.end()) m.relation = optional_string(*it);
  m.model = j.value("model", "");
  if (auto it = j.find("dictionary"); it != j.end()) {
    for (const auto& d : *it) m.dictionary.push_back({d.at("term").get<std::string>(), d.value("definition", "")});
  }
  m.schema_name = j.value("schema_name", "");
  if (auto it = j.find("annotations"); it != j.end()) {
    m.annotations = it->get<std::map<std::string, std::string>>();
  }
  if (auto it = j.find("sensors"); it != j.end()) m.sensors = it->get<std::vector<std::string>>();
  return m;
}

json to_json(const CatalogEntry& e) {
  json sensors = json::array();
  for (const auto& s : e.sensors) {
    json cols = json::array();
    for (const auto& c : s.columns) {
      cols.push_back({{"name", c.name},
                      {"type", to_json(c.type)},
                      {"properties", c.properties ? to_json(*c.properties) : json(nullptr)}});
    }
    sensors.push_back({{"name", s.name},
                       {"file", s.file},
                       {"row_count", s.row_count},
                       {"key", {{"name", s.key_header}, {"type", to_json(s.key_type)}}},
                       {"columns", std::move(cols)}});
  }
  return {{"dataset", e.dataset},
          {"source_id", e.source_id},
          {"location", e.location},
          {"sensors", std::move(sensors)},
          {"metadata", to_json(e.metadata)},
          {"content_hash", e.content_hash},
          {"registered_at", e.registered_at},
          {"updated_at", e.updated_at}};
}

CatalogEntry entry_from_json(const json& j) {
  CatalogEntry e;
  e.dataset = j.at("dataset").get<std::string>();
  e.source_id = j.at("source_id").get<std::string>();
  e.location = j.at("location").get<std::string>();
  for (const auto& s : j.at("sensors")) {
    SensorInfo info;
    info.name = s.at("name").get<std::string>();
    info.file = s.at("file").get<std::string>();
    info.row_count = s.at("row_count").get<std::size_t>();
    info.key_header = s.at("key").at("name").get<std::string>();
    info.key_type = type_from_json(s.at("key").at("type"));
    for (const auto& c : s.at("columns")) {
      ColumnInfo ci{c.at("name").get<std::string>(), type_from_json(c.at("type")), std::nullopt};
      if (!c.at("properties").is_null()) ci.properties = properties_from_json(c.at("properties"));
      info.columns.push_back(std::move(ci));
    }
    e.sensors.push_back(std::move(info));
  }
  e.metadata = metadata_from_json(j.at("metadata"));
  e.content_hash = j.at("content_hash").get<std::string>();
  e.registered_at = j.at("registered_at").get<std::string>();
  e.updated_at = j.at("updated_at").get<std::string>();
  return e;
}

json to_json(const CatalogSummary& s) {
  return {{"dataset", s.dataset},
          {"source_id", s.source_id},
          {"sensors", s.sensors},
          {"core", s.core},
          {"content_hash", s.content_hash}};
}

json to_json(const ChangeEvent& e) {
  json j = {{"kind", std::string(to_string(e.kind))},
            {"dataset", e.dataset},
            {"source_id", e.source_id},
            {"observed_at", e.observed_at},
            {"old_hash", optional_string(e.old_hash)},
            {"new_hash", optional_string(e.new_hash)}};
  if (e.kind == ChangeKind::source_error) j["message"] = e.message;
  return j;
}

Catalog::Catalog(Options options) : options_(std::move(options)) {
  std::set<std::string> ids;
  for (const auto& s : options_.sources) {
    if (!is_valid_name(s.id)) throw Error(ErrorKind::InvalidArgument, "invalid source id '" + s.id + "'");
    if (!ids.insert(s.id).second) throw Error(ErrorKind::InvalidArgument, "duplicate source id '" + s.id + "'");
  }

  auto snap = std::make_shared<Snapshot>();
  const auto index_path = options_.state_dir / "catalog" / "index.json";
  std::error_code ec;
  if (fs::exists(index_path, ec)) {
    json index;
    try {
      index = json::parse(read_file(index_path));
    } catch (const json::exception& e) {
      throw Error(ErrorKind::PersistenceError, "corrupt catalog index: " + std::string(e.what()));
    }
    for (const auto& item : index.at("datasets")) {
      const auto name = item.at("dataset").get<std::string>();
      auto record = std::make_shared<Record>();
      try {
        record->entry = entry_from_json(json::parse(read_file(options_.state_dir / "catalog" / (name + ".json"))));
      } catch (const json::exception& e) {
        throw Error(ErrorKind::PersistenceError, "corrupt catalog entry '" + name + "': " + e.what());
      }
      // Data is reloaded from the current bytes; the stored hash is kept so
      // the next crawl reports any drift.
      auto src = std::find_if(options_.sources.begin(), options_.sources.end(),
                              [&](const DataSource& s) { return s.id == record->entry.source_id; });
      if (src != options_.sources.end()) {
        try {
          if (auto files = fetch(*src, record->entry.location, record->entry.metadata)) {
            auto fresh = build_record(src->id, name, record->entry.location, record->entry.metadata, *files);
            record->data = std::move(fresh->data);
          }
        } catch (const Error&) {
          record->data = nullptr;
        }
      }
      snap->emplace(name, std::move(record));
    }
  }
  snapshot_ = std::move(snap);
}

std::shared_ptr<const Catalog::Snapshot> Catalog::snapshot() const {
  std::lock_guard lock(snapshot_mutex_);
  return snapshot_;
}

void Catalog::publish(std::shared_ptr<const Snapshot> next) {
  std::lock_guard lock(snapshot_mutex_);
  snapshot_ = std::move(next);
}

const DataSource& Catalog::source(const std::string& id) const {
  for (const auto& s : options_.sources) {
    if (s.id == id) return s;
  }
  throw Error(ErrorKind::NotFound, "source not found: " + id);
}

std::string Catalog::now() const { return format_time(options_.clock()); }

void Catalog::persist_entry(const CatalogEntry& e) const {
  write_file_atomic(options_.state_dir / "catalog" / (e.dataset + ".json"), to_json(e).dump(2) + "\n");
}

void Catalog::remove_entry_file(const std::string& dataset) const {
  std::error_code ec;
  fs::remove(options_.state_dir / "catalog" / (dataset + ".json"), ec);
}

void Catalog::persist_index(const Snapshot& snap) const {
  json list = json::array();
  for (const auto& [name, rec] : snap) list.push_back({{"dataset", name}, {"source_id", rec->entry.source_id}});
  write_file_atomic(options_.state_dir / "catalog" / "index.json", json{{"datasets", list}}.dump(2) + "\n");
}

void Catalog::append_events(const std::vector<ChangeEvent>& events) const {
  if (events.empty()) return;
  std::error_code ec;
  fs::create_directories(options_.state_dir, ec);
  std::ofstream out(options_.state_dir / "events.log", std::ios::binary | std::ios::app);
  for (const auto& e : events) out << to_json(e).dump() << '\n';
  out.flush();
  if (!out) throw Error(ErrorKind::PersistenceError, "cannot append to events.log");
  if (options_.on_event) {
    for (const auto& e : events) options_.on_event(e);
  }
}

CatalogEntry Catalog::register_dataset(const std::string& source_id, const std::string& dataset_name,
                                       DatasetMetadata metadata, std::optional<std::string> location) {
  std::lock_guard lock(write_mutex_);
  if (!is_valid_name(dataset_name)) {
    throw Error(ErrorKind::InvalidArgument, "dataset name '" + dataset_name + "' is not a valid PID name");
  }
  const auto& src = source(source_id);
  auto current = snapshot();
  std::string registered_at = now();
  if (auto it = current->find(dataset_name); it != current->end()) {
    if (it->second->entry.source_id != source_id) {
      throw Error(ErrorKind::DuplicateDataset, "dataset '" + dataset_name + "' is already registered from source '" +
                                                   it->second->entry.source_id + "'");
    }
    registered_at = it->second->entry.registered_at;
  }
  if (src.kind == SourceKind::remote_http && metadata.sensors.empty()) {
    throw Error(ErrorKind::InvalidArgument, "remote dataset registration needs a sensor list");
  }

  const auto loc = location.value_or(default_location(src, dataset_name));
  std::optional<FileSet> files;
  try {
    files = fetch(src, loc, metadata);
  } catch (const Error& e) {
    throw Error(ErrorKind::LoadError, e.what());
  }
  if (!files) throw Error(ErrorKind::LoadError, "dataset location not found: " + loc);
  auto record = build_record(source_id, dataset_name, loc, std::move(metadata), *files);
  record->entry.registered_at = registered_at;
  record->entry.updated_at = now();

  auto next = std::make_shared<Snapshot>(*current);
  (*next)[dataset_name] = record;
  persist_entry(record->entry);
  persist_index(*next);
  publish(std::move(next));
  return record->entry;
}

CatalogEntry Catalog::lookup(const std::string& dataset_name) const {
  auto snap = snapshot();
  auto it = snap->find(dataset_name);
  if (it == snap->end()) throw Error(ErrorKind::NotFound, "dataset not found: " + dataset_name);
  return it->second->entry;
}

std::shared_ptr<const Catalog::Record> Catalog::record(const std::string& dataset_name) const {
  auto snap = snapshot();
  auto it = snap->find(dataset_name);
  if (it == snap->end() || !it->second->data) {
    throw Error(ErrorKind::NotFound, "dataset not found: " + dataset_name);
  }
  return it->second;
}

std::vector<CatalogEntry> Catalog::entries() const {
  std::vector<CatalogEntry> out;
  for (const auto& [name, rec] : *snapshot()) out.push_back(rec->entry);
  return out;
}

std::vector<CatalogSummary> Catalog::search(const std::string& query) const {
  const auto needle = lower(query);
  auto hit = [&](std::string_view hay) { return lower(hay).find(needle) != std::string::npos; };
  std::vector<CatalogSummary> out;
  for (const auto& [name, rec] : *snapshot()) {
    const auto& e = rec->entry;
    const auto& m = e.metadata;
    bool match = needle.empty() || hit(e.dataset) || hit(m.core) || hit(m.domain.environmental) ||
                 hit(m.domain.object_class) || hit(m.domain.object_format);
    for (const auto& s : e.sensors) match = match || hit(s.name);
    for (const auto& d : m.dictionary) match = match || hit(d.term) || hit(d.definition);
    if (!match) continue;
    CatalogSummary summary{e.dataset, e.source_id, {}, m.core, e.content_hash};
    for (const auto& s : e.sensors) summary.sensors.push_back(s.name);
    out.push_back(std::move(summary));
  }
  return out;
}

std::vector<ChangeEvent> Catalog::crawl() {
  std::lock_guard lock(write_mutex_);
  auto current = snapshot();
  auto next = std::make_shared<Snapshot>(*current);
  std::vector<ChangeEvent> events;
  std::vector<CatalogEntry> changed;
  std::vector<std::string> removed;
  const auto observed = now();

  auto source_error = [&](const std::string& source_id, const std::string& message) {
    ChangeEvent ev;
    ev.kind = ChangeKind::source_error;
    ev.source_id = source_id;
    ev.observed_at = observed;
    ev.message = message;
    events.push_back(std::move(ev));
  };

  for (const auto& [name, rec] : *current) {
    const auto& entry = rec->entry;
    const DataSource* src = nullptr;
    for (const auto& s : options_.sources) {
      if (s.id == entry.source_id) src = &s;
    }
    if (!src) {
      source_error(entry.source_id, "source '" + entry.source_id + "' is not configured");
      continue;
    }
    std::optional<FileSet> files;
    try {
      files = fetch(*src, entry.location, entry.metadata);
    } catch (const Error& e) {
      source_error(src->id, e.what());
      continue;
    }
    if (!files || files->empty()) {
      events.push_back({ChangeKind::removed, name, src->id, observed, entry.content_hash, std::nullopt, {}});
      next->erase(name);
      removed.push_back(name);
      continue;
    }
    const auto hash = content_hash(*files);
    if (hash == entry.content_hash && rec->data) continue;
    std::shared_ptr<Record> fresh;
    try {
      fresh = build_record(src->id, name, entry.location, entry.metadata, *files);
    } catch (const Error& e) {
      source_error(src->id, e.what());
      continue;
    }
    fresh->entry.registered_at = entry.registered_at;
    if (hash == entry.content_hash) {
      // Data was unloadable at startup but the bytes match the entry again.
      fresh->entry.updated_at = entry.updated_at;
      (*next)[name] = std::move(fresh);
      continue;
    }
    fresh->entry.updated_at = observed;
    events.push_back({ChangeKind::modified, name, src->id, observed, entry.content_hash, hash, {}});
    changed.push_back(fresh->entry);
    (*next)[name] = std::move(fresh);
  }

  for (const auto& src : options_.sources) {
    if (src.kind != SourceKind::local_directory) continue;
    std::error_code ec;
    if (!fs::is_directory(src.root, ec)) {
      source_error(src.id, "source root is not a directory: " + src.root);
      continue;
    }
    std::set<fs::path> known_locations;
    for (const auto& [name, rec] : *next) {
      known_locations.insert(fs::weakly_canonical(rec->entry.location, ec));
    }
    std::vector<fs::path> dirs;
    for (const auto& e : fs::directory_iterator(src.root, ec)) {
      if (e.is_directory()) dirs.push_back(e.path());
    }
    if (ec) {
      source_error(src.id, "cannot list " + src.root + ": " + ec.message());
      continue;
    }
    std::sort(dirs.begin(), dirs.end());
    for (const auto& dir : dirs) {
      const auto name = dir.filename().string();
      if (!is_valid_name(name) || next->count(name) || known_locations.count(fs::weakly_canonical(dir, ec))) {
        continue;
      }
      try {
        auto files = fetch_local(dir);
        if (!files || files->empty()) continue;
        auto fresh = build_record(src.id, name, dir.string(), DatasetMetadata{}, *files);
        fresh->entry.registered_at = observed;
        fresh->entry.updated_at = observed;
        events.push_back({ChangeKind::added, name, src.id, observed, std::nullopt, fresh->entry.content_hash, {}});
        changed.push_back(fresh->entry);
        (*next)[name] = std::move(fresh);
      } catch (const Error& e) {
        source_error(src.id, e.what());
      }
    }
  }

  for (const auto& e : changed) persist_entry(e);
  for (const auto& name : removed) remove_entry_file(name);
  if (!changed.empty() || !removed.empty()) persist_index(*next);
  append_events(events);
  publish(std::move(next));
  return events;
}

}  // namespace pidres
