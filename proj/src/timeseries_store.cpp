#include "pidres/timeseries_store.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>

#include "pidres/error.hpp"

namespace pidres {
namespace {

// Splits on commas outside double quotes; fields keep their raw text.
std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> fields;
  bool quoted = false;
  std::size_t begin = 0;
  for (std::size_t i = 0; i < line.size(); ++i) {
    if (line[i] == '"') {
      quoted = !quoted;
    } else if (line[i] == ',' && !quoted) {
      fields.push_back(line.substr(begin, i - begin));
      begin = i + 1;
    }
  }
  fields.push_back(line.substr(begin));
  return fields;
}

std::string unquote(std::string_view field) {
  if (field.size() < 2 || field.front() != '"' || field.back() != '"') return std::string(field);
  std::string out;
  field = field.substr(1, field.size() - 2);
  for (std::size_t i = 0; i < field.size(); ++i) {
    out += field[i];
    if (field[i] == '"' && i + 1 < field.size() && field[i + 1] == '"') ++i;
  }
  return out;
}

std::optional<Timestamp> parse_key(std::string_view s) {
  if (s.empty()) return std::nullopt;
  Timestamp v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size()) return std::nullopt;
  return v;
}

struct Line {
  std::size_t number;  // 1-based
  std::string_view text;
};

std::vector<Line> non_blank_lines(std::string_view bytes) {
  std::vector<Line> lines;
  std::size_t number = 0;
  std::size_t begin = 0;
  while (begin < bytes.size()) {
    auto end = bytes.find('\n', begin);
    if (end == std::string_view::npos) end = bytes.size();
    auto text = bytes.substr(begin, end - begin);
    if (!text.empty() && text.back() == '\r') text.remove_suffix(1);
    ++number;
    if (!text.empty()) lines.push_back({number, text});
    begin = end + 1;
  }
  return lines;
}

}  // namespace

SensorTable SensorTable::parse_csv(std::string_view bytes, std::string sensor_name) {
  const std::string where = "sensor '" + sensor_name + "'";
  auto lines = non_blank_lines(bytes);
  if (lines.empty()) throw Error(ErrorKind::EmptyFile, where + ": no header line");

  auto header = split_fields(lines.front().text);
  const std::size_t width = header.size();

  SensorTable table;
  table.sensor_name_ = std::move(sensor_name);
  table.key_header_ = unquote(header[0]);
  std::set<std::string> seen;
  for (std::size_t c = 1; c < width; ++c) {
    auto name = unquote(header[c]);
    if (!seen.insert(name).second) {
      throw Error(ErrorKind::DuplicateColumn, where + ": duplicate column '" + name + "'");
    }
    table.columns_.push_back(Column{std::move(name), {}, {}});
  }

  const std::size_t rows = lines.size() - 1;
  std::vector<Timestamp> keys(rows);
  std::vector<std::vector<std::string_view>> parsed(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    const auto& line = lines[r + 1];
    parsed[r] = split_fields(line.text);
    if (parsed[r].size() != width) {
      throw Error(ErrorKind::RaggedRow, where + ": line " + std::to_string(line.number) + " has " +
                                            std::to_string(parsed[r].size()) + " fields, header has " +
                                            std::to_string(width));
    }
    auto key = parse_key(parsed[r][0]);
    if (!key) {
      throw Error(ErrorKind::NonIntegerTimestamp, where + ": line " + std::to_string(line.number) +
                                                      ": timestamp '" + std::string(parsed[r][0]) +
                                                      "' is not an integer");
    }
    keys[r] = *key;
  }

  std::vector<std::size_t> order(rows);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return keys[a] < keys[b]; });
  for (std::size_t i = 1; i < rows; ++i) {
    if (keys[order[i]] == keys[order[i - 1]]) {
      throw Error(ErrorKind::DuplicateTimestamp,
                  where + ": duplicate timestamp " + std::to_string(keys[order[i]]));
    }
  }

  table.key_.reserve(rows);
  table.key_text_.reserve(rows);
  for (auto& col : table.columns_) col.cells.reserve(rows);
  for (auto r : order) {
    table.key_.push_back(keys[r]);
    table.key_text_.emplace_back(parsed[r][0]);
    for (std::size_t c = 1; c < width; ++c) table.columns_[c - 1].cells.emplace_back(parsed[r][c]);
  }

  table.key_type_ = infer_column_type(table.key_text_, true);
  for (auto& col : table.columns_) col.type = infer_column_type(col.cells);
  return table;
}

const Column* SensorTable::find_column(std::string_view name) const {
  for (const auto& c : columns_) {
    if (c.name == name) return &c;
  }
  return nullptr;
}

std::optional<std::size_t> SensorTable::row_of(Timestamp t) const {
  auto it = std::lower_bound(key_.begin(), key_.end(), t);
  if (it == key_.end() || *it != t) return std::nullopt;
  return static_cast<std::size_t>(it - key_.begin());
}

SensorTable load_sensor_csv(const std::filesystem::path& path, std::string sensor_name) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::IoError, "cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  if (in.bad()) throw Error(ErrorKind::IoError, "read failed: " + path.string());
  return SensorTable::parse_csv(buf.str(), std::move(sensor_name));
}

const SensorTable* Dataset::find_sensor(std::string_view sensor) const {
  auto it = sensors.find(std::string(sensor));
  return it == sensors.end() ? nullptr : it->second.get();
}

ResultSlice select(const Dataset& dataset, const PidQuery& q) {
  if (q.dataset != dataset.name) {
    throw Error(ErrorKind::NotFound, "dataset not found: " + q.dataset);
  }
  struct Source {
    const SensorTable* table;
    std::vector<const Column*> columns;
  };
  std::vector<Source> sources;
  for (const auto& s : q.sensors) {
    const auto* table = dataset.find_sensor(s);
    if (!table) throw Error(ErrorKind::UnknownSensor, "sensor not found: " + q.dataset + "." + s);
    Source src{table, {}};
    for (const auto& m : q.measurements) {
      const auto* col = table->find_column(m);
      if (!col) {
        throw Error(ErrorKind::UnknownMeasurement, "measurement not found: " + q.dataset + "." + s + "." + m);
      }
      src.columns.push_back(col);
    }
    sources.push_back(std::move(src));
  }

  ResultSlice slice;
  slice.header.push_back("timestamp");
  const bool prefixed = sources.size() > 1;
  for (const auto& s : q.sensors) {
    for (const auto& m : q.measurements) slice.header.push_back(prefixed ? s + "." + m : m);
  }

  // Selection is pointwise, so a timestamp picked from any sensor is picked
  // for every sensor that has a row there.
  std::vector<Timestamp> keys;
  for (const auto& src : sources) {
    auto picked = effective_key_set(q.selector, src.table->key());
    std::vector<Timestamp> merged;
    merged.reserve(keys.size() + picked.size());
    std::set_union(keys.begin(), keys.end(), picked.begin(), picked.end(), std::back_inserter(merged));
    keys = std::move(merged);
  }

  slice.rows.reserve(keys.size());
  for (Timestamp t : keys) {
    ResultRow row;
    row.timestamp = t;
    row.cells.reserve(slice.header.size() - 1);
    for (const auto& src : sources) {
      auto r = src.table->row_of(t);
      if (r && row.timestamp_text.empty()) row.timestamp_text = src.table->key_text()[*r];
      for (const auto* col : src.columns) {
        row.cells.push_back(r ? std::optional<std::string>(col->cells[*r]) : std::nullopt);
      }
    }
    slice.rows.push_back(std::move(row));
  }
  return slice;
}

std::string render_csv(const ResultSlice& slice) {
  std::string out;
  for (std::size_t i = 0; i < slice.header.size(); ++i) {
    if (i) out += ',';
    out += slice.header[i];
  }
  out += '\n';
  for (const auto& row : slice.rows) {
    out += row.timestamp_text.empty() ? std::to_string(row.timestamp) : row.timestamp_text;
    for (const auto& cell : row.cells) {
      out += ',';
      if (cell) out += *cell;
    }
    out += '\n';
  }
  return out;
}

}  // namespace pidres
