#pragma once

// Types Metadata Registry: column type inference over the basic/derived type
// table, and the basic statistical properties attached to numeric columns.

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace pidres {

class SensorTable;

enum class BasicType { text, number, currency, boolean, date_time, blob, calculated, pointer };

std::string_view to_string(BasicType t);

struct DerivedTypeEntry {
  BasicType basic;
  std::string_view derived;
};

/// The full basic -> derived table. Every derived name appears exactly once.
std::span<const DerivedTypeEntry> derived_type_table();

/// Parent of a derived type name, if the name is in the table.
std::optional<BasicType> basic_type_of(std::string_view derived);

struct TypeDescriptor {
  BasicType basic = BasicType::text;
  std::string derived = "varchar";

  bool operator==(const TypeDescriptor&) const = default;
};

/// Builds a descriptor from a derived name; throws InvalidArgument if the
/// name is not in the table.
TypeDescriptor make_type(std::string_view derived);

/// Classifies a column by the first rule all non-empty cells satisfy:
/// boolean pair, integer/long, scientific, real, percentage, currency,
/// hyperlink, character, varchar. `key_column` enables the timestamp rule
/// (all integers >= 1e9), which is tried before the integer rule.
TypeDescriptor infer_column_type(std::span<const std::string> cells, bool key_column = false);

enum class ShapeClass { constant, boolean_like, approx_symmetric, moderately_skewed, highly_skewed };

std::string_view to_string(ShapeClass s);

struct BasicProperties {
  std::size_t count = 0;
  double min = 0, max = 0;
  double mean = 0;
  double median = 0;
  double stddev = 0;  // sample (n - 1); 0 when n == 1
  double q1 = 0, q3 = 0, iqr = 0;
  double skewness = 0;  // population g1 = m3 / m2^1.5; 0 when m2 == 0
  std::size_t outlier_count = 0;  // outside the 1.5 * IQR fences
  ShapeClass shape = ShapeClass::constant;
};

/// Strict decimal parse of a whole cell (no surrounding space, no suffix).
std::optional<double> parse_number(std::string_view cell);

/// Numeric cells of a column; empty and non-numeric cells are dropped.
std::vector<double> numeric_values(std::span<const std::string> cells);

/// Linear interpolation at position p * (n - 1) of sorted data.
double quantile_sorted(std::span<const double> sorted, double p);

/// Throws EmptyColumn when `values` is empty.
BasicProperties compute_properties(std::span<const double> values);

/// Pearson correlations; entries are nullopt where a pair (or a diagonal
/// column) has zero variance or fewer than two shared numeric rows.
struct CorrelationMatrix {
  std::vector<std::string> labels;
  std::vector<std::optional<double>> values;  // row-major, labels.size()^2

  std::optional<double> at(std::size_t i, std::size_t j) const {
    return values[i * labels.size() + j];
  }
};

struct NamedColumn {
  std::string name;
  std::span<const std::string> cells;
};

/// Uses only columns with at least one numeric cell; each pair uses the rows
/// where both cells are numeric.
CorrelationMatrix compute_correlation(std::span<const NamedColumn> columns);
CorrelationMatrix compute_correlation(const SensorTable& table);

nlohmann::json to_json(const TypeDescriptor& t);
nlohmann::json to_json(const BasicProperties& p);
nlohmann::json to_json(const CorrelationMatrix& m);
TypeDescriptor type_from_json(const nlohmann::json& j);
BasicProperties properties_from_json(const nlohmann::json& j);

}  // namespace pidres
