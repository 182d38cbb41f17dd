#pragma once

// Federated catalog: datasets from several sources (local directories or
// HTTP roots) behind one lookup/search surface, with crawl-based change
// tracking. State lives under <state_dir>/catalog/ and <state_dir>/events.log.

#include <chrono>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "pidres/timeseries_store.hpp"
#include "pidres/type_registry.hpp"

namespace pidres {

using Clock = std::function<std::chrono::system_clock::time_point()>;

/// ISO-8601 UTC with second precision, e.g. 2024-01-31T12:00:00Z.
std::string format_time(std::chrono::system_clock::time_point t);

enum class SourceKind { local_directory, remote_http };

struct DataSource {
  std::string id;
  std::string root;  // directory path or base URL
  SourceKind kind = SourceKind::local_directory;
};

struct DomainFields {
  std::string environmental;
  std::string object_class;
  std::string object_format;
};

struct DictionaryTerm {
  std::string term;
  std::string definition;
};

/// Descriptive metadata supplied at registration.
struct DatasetMetadata {
  std::string core;
  DomainFields domain;
  std::optional<std::string> relation;  // URI of a related resource
  std::string model;
  std::vector<DictionaryTerm> dictionary;
  std::string schema_name;
  // "SENSOR.MEASUREMENT" -> derived type name; overrides inference. This is
  // the only way a column gets the calculated basic type.
  std::map<std::string, std::string> annotations;
  // Sensor files to fetch from remote_http sources (<root>/<dataset>/<s>.csv).
  std::vector<std::string> sensors;
};

struct ColumnInfo {
  std::string name;
  TypeDescriptor type;
  std::optional<BasicProperties> properties;  // absent for non-numeric columns
};

struct SensorInfo {
  std::string name;
  std::string file;
  std::size_t row_count = 0;
  std::string key_header;
  TypeDescriptor key_type;
  std::vector<ColumnInfo> columns;
};

struct CatalogEntry {
  std::string dataset;
  std::string source_id;
  std::string location;
  std::vector<SensorInfo> sensors;
  DatasetMetadata metadata;
  std::string content_hash;  // hex SHA-256
  std::string registered_at;
  std::string updated_at;

  const SensorInfo* find_sensor(std::string_view name) const;
};

struct CatalogSummary {
  std::string dataset;
  std::string source_id;
  std::vector<std::string> sensors;
  std::string core;
  std::string content_hash;
};

enum class ChangeKind { added, removed, modified, source_error };

struct ChangeEvent {
  ChangeKind kind = ChangeKind::added;
  std::string dataset;  // empty for source_error
  std::string source_id;
  std::string observed_at;
  std::optional<std::string> old_hash;
  std::optional<std::string> new_hash;
  std::string message;  // source_error only

  bool operator==(const ChangeEvent&) const = default;
};

std::string_view to_string(ChangeKind k);

nlohmann::json to_json(const DatasetMetadata& m);
DatasetMetadata metadata_from_json(const nlohmann::json& j);
nlohmann::json to_json(const CatalogEntry& e);
CatalogEntry entry_from_json(const nlohmann::json& j);
nlohmann::json to_json(const CatalogSummary& s);
nlohmann::json to_json(const ChangeEvent& e);

/// Content hash over sensor files in lexicographic filename order. Each file
/// contributes its name, its byte length and its bytes, so moving bytes
/// between files also changes the digest.
std::string content_hash(const std::map<std::string, std::string>& files);

/// Hex SHA-256 of `bytes`.
std::string sha256_hex(std::string_view bytes);

class Catalog {
 public:
  struct Options {
    std::filesystem::path state_dir;
    std::vector<DataSource> sources;
    Clock clock = [] { return std::chrono::system_clock::now(); };
    /// Called once per crawl event after it has been logged to disk.
    std::function<void(const ChangeEvent&)> on_event;
  };

  /// One registered dataset as seen by readers. `data` is null when the
  /// dataset's files could not be loaded (it is then unresolvable).
  struct Record {
    CatalogEntry entry;
    std::shared_ptr<const Dataset> data;
  };

  /// Restores previously registered datasets from the state directory. Does
  /// not write anything.
  explicit Catalog(Options options);

  Catalog(const Catalog&) = delete;
  Catalog& operator=(const Catalog&) = delete;

  /// Loads, types and hashes the dataset at `location` (default
  /// <root>/<dataset_name>) and publishes it. Re-registering a name from the
  /// same source replaces it.
  CatalogEntry register_dataset(const std::string& source_id, const std::string& dataset_name,
                                DatasetMetadata metadata,
                                std::optional<std::string> location = std::nullopt);

  CatalogEntry lookup(const std::string& dataset_name) const;

  /// Loaded data for resolution; throws NotFound if unknown or unloadable.
  std::shared_ptr<const Record> record(const std::string& dataset_name) const;

  std::vector<CatalogSummary> search(const std::string& query) const;
  std::vector<CatalogEntry> entries() const;

  /// Re-hashes every dataset, reloads changed ones, drops vanished ones and
  /// auto-registers new dataset directories under local source roots.
  std::vector<ChangeEvent> crawl();

  const std::vector<DataSource>& sources() const { return options_.sources; }
  const std::filesystem::path& state_dir() const { return options_.state_dir; }

 private:
  using Snapshot = std::map<std::string, std::shared_ptr<const Record>>;

  std::shared_ptr<const Snapshot> snapshot() const;
  void publish(std::shared_ptr<const Snapshot> next);
  const DataSource& source(const std::string& id) const;
  std::string now() const;

  void persist_entry(const CatalogEntry& e) const;
  void remove_entry_file(const std::string& dataset) const;
  void persist_index(const Snapshot& snap) const;
  void append_events(const std::vector<ChangeEvent>& events) const;

  Options options_;
  std::mutex write_mutex_;
  mutable std::mutex snapshot_mutex_;
  std::shared_ptr<const Snapshot> snapshot_;
};

}  // namespace pidres
