#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "pidres/pid_grammar.hpp"
#include "pidres/type_registry.hpp"

namespace pidres {

struct Column {
  std::string name;
  std::vector<std::string> cells;  // original lexical text, one per row
  TypeDescriptor type;
};

/// One sensor's time series. Immutable once built; rows are ordered by the
/// integer timestamp key, which is unique.
class SensorTable {
 public:
  /// Parses CSV bytes. The first column is the key whatever its header says.
  /// Cells are kept verbatim (including any quotes) so output bytes can match
  /// input bytes. Blank lines are ignored.
  static SensorTable parse_csv(std::string_view bytes, std::string sensor_name);

  const std::string& sensor_name() const { return sensor_name_; }
  const std::string& key_header() const { return key_header_; }
  const std::vector<Timestamp>& key() const { return key_; }
  /// Lexical text of each key cell, parallel to key().
  const std::vector<std::string>& key_text() const { return key_text_; }
  const TypeDescriptor& key_type() const { return key_type_; }
  const std::vector<Column>& columns() const { return columns_; }
  std::size_t row_count() const { return key_.size(); }

  const Column* find_column(std::string_view name) const;
  /// Row index holding timestamp `t`, if any.
  std::optional<std::size_t> row_of(Timestamp t) const;

 private:
  SensorTable() = default;

  std::string sensor_name_;
  std::string key_header_;
  std::vector<Timestamp> key_;
  std::vector<std::string> key_text_;
  TypeDescriptor key_type_;
  std::vector<Column> columns_;
};

SensorTable load_sensor_csv(const std::filesystem::path& path, std::string sensor_name);

struct Dataset {
  std::string name;
  std::map<std::string, std::shared_ptr<const SensorTable>> sensors;

  const SensorTable* find_sensor(std::string_view sensor) const;
};

struct ResultRow {
  Timestamp timestamp = 0;
  std::string timestamp_text;
  std::vector<std::optional<std::string>> cells;

  bool operator==(const ResultRow&) const = default;
};

struct ResultSlice {
  std::vector<std::string> header;
  std::vector<ResultRow> rows;

  bool operator==(const ResultSlice&) const = default;
};

/// Wide join of the requested sensors on the timestamp key. Single-sensor
/// queries label columns by measurement; multi-sensor ones by
/// SENSOR.MEASUREMENT in PID order, sensor-major.
ResultSlice select(const Dataset& dataset, const PidQuery& q);

/// Header line then one line per row, comma separated, each terminated by
/// exactly one '\n'. Absent cells render empty.
std::string render_csv(const ResultSlice& slice);

}  // namespace pidres
