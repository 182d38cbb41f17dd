#include "pidres/type_registry.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <limits>
#include <set>

#include "pidres/error.hpp"
#include "pidres/timeseries_store.hpp"

namespace pidres {
namespace {

using B = BasicType;

constexpr std::array<DerivedTypeEntry, 31> kTable{{
    {B::text, "character"},       {B::text, "varchar"},
    {B::number, "integer"},       {B::number, "long"},
    {B::number, "real"},          {B::number, "float"},
    {B::number, "double"},        {B::number, "percentage"},
    {B::number, "scientific"},    {B::currency, "USD"},
    {B::currency, "RMB"},         {B::currency, "$"},
    {B::currency, "Euro"},        {B::currency, "Yen"},
    {B::boolean, "check box"},    {B::boolean, "yes/no"},
    {B::boolean, "true/false"},   {B::boolean, "on/off"},
    {B::date_time, "timestamp"},  {B::date_time, "short date"},
    {B::date_time, "medium date"}, {B::date_time, "long date"},
    {B::date_time, "time am/pm"}, {B::date_time, "medium time"},
    {B::date_time, "time 24 hour"}, {B::blob, "rich text"},
    {B::blob, "attachment"},      {B::blob, "memo"},
    {B::calculated, "lambda function"}, {B::calculated, "imaginary number"},
    {B::pointer, "hyperlink"},
}};
// "lookup" is the one pointer type that has no lexical signature; it is still
// a valid annotation.
constexpr DerivedTypeEntry kLookup{B::pointer, "lookup"};

bool is_digit(char c) { return c >= '0' && c <= '9'; }

std::size_t digits_at(std::string_view s, std::size_t i) {
  std::size_t n = 0;
  while (i + n < s.size() && is_digit(s[i + n])) ++n;
  return n;
}

struct NumberShape {
  bool valid = false;
  bool has_point = false;
  bool has_exponent = false;
};

// [+-]? (D+ (. D*)? | . D+) ([eE] [+-]? D+)?
NumberShape number_shape(std::string_view s) {
  NumberShape shape;
  std::size_t i = 0;
  if (i < s.size() && (s[i] == '+' || s[i] == '-')) ++i;
  std::size_t int_digits = digits_at(s, i);
  i += int_digits;
  std::size_t frac_digits = 0;
  if (i < s.size() && s[i] == '.') {
    shape.has_point = true;
    ++i;
    frac_digits = digits_at(s, i);
    i += frac_digits;
  }
  if (int_digits + frac_digits == 0) return shape;
  if (i < s.size() && (s[i] == 'e' || s[i] == 'E')) {
    shape.has_exponent = true;
    ++i;
    if (i < s.size() && (s[i] == '+' || s[i] == '-')) ++i;
    std::size_t exp_digits = digits_at(s, i);
    if (exp_digits == 0) return shape;
    i += exp_digits;
  }
  shape.valid = i == s.size();
  return shape;
}

bool is_integer_text(std::string_view s) {
  auto shape = number_shape(s);
  return shape.valid && !shape.has_point && !shape.has_exponent;
}

std::optional<std::int64_t> parse_int(std::string_view s) {
  if (!is_integer_text(s)) return std::nullopt;
  if (s.front() == '+') s.remove_prefix(1);
  std::int64_t v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size()) return std::nullopt;
  return v;
}

std::string lower(std::string_view s) {
  std::string out(s);
  for (auto& c : out) {
    if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
  }
  return out;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && s.front() == ' ') s.remove_prefix(1);
  while (!s.empty() && s.back() == ' ') s.remove_suffix(1);
  return s;
}

// Currency label of one cell, or empty when the cell is not a currency amount.
std::string_view currency_of(std::string_view cell) {
  struct Marker {
    std::string_view text;
    std::string_view label;
  };
  static constexpr std::array<Marker, 10> kMarkers{{
      {"$", "$"}, {"USD", "USD"}, {"\xE2\x82\xAC", "Euro"}, {"EUR", "Euro"},
      {"\xC2\xA5", "Yen"}, {"JPY", "Yen"}, {"RMB", "RMB"}, {"CNY", "RMB"},
      {"\xEF\xBF\xA5", "Yen"}, {"Euro", "Euro"},
  }};
  for (const auto& m : kMarkers) {
    std::string_view amount;
    if (cell.starts_with(m.text)) {
      amount = trim(cell.substr(m.text.size()));
    } else if (cell.ends_with(m.text)) {
      amount = trim(cell.substr(0, cell.size() - m.text.size()));
    } else {
      continue;
    }
    auto shape = number_shape(amount);
    if (shape.valid && !shape.has_exponent) return m.label;
  }
  return {};
}

template <typename Pred>
bool all_of_cells(const std::vector<std::string_view>& cells, Pred pred) {
  return std::all_of(cells.begin(), cells.end(), pred);
}

}  // namespace

std::string_view to_string(BasicType t) {
  switch (t) {
    case B::text: return "text";
    case B::number: return "number";
    case B::currency: return "currency";
    case B::boolean: return "boolean";
    case B::date_time: return "date/time";
    case B::blob: return "blob";
    case B::calculated: return "calculated";
    case B::pointer: return "pointer";
  }
  return "text";
}

std::string_view to_string(ShapeClass s) {
  switch (s) {
    case ShapeClass::constant: return "constant";
    case ShapeClass::boolean_like: return "boolean_like";
    case ShapeClass::approx_symmetric: return "approx_symmetric";
    case ShapeClass::moderately_skewed: return "moderately_skewed";
    case ShapeClass::highly_skewed: return "highly_skewed";
  }
  return "constant";
}

std::span<const DerivedTypeEntry> derived_type_table() {
  static const auto table = [] {
    std::vector<DerivedTypeEntry> t(kTable.begin(), kTable.end());
    t.push_back(kLookup);
    return t;
  }();
  return table;
}

std::optional<BasicType> basic_type_of(std::string_view derived) {
  for (const auto& e : derived_type_table()) {
    if (e.derived == derived) return e.basic;
  }
  return std::nullopt;
}

TypeDescriptor make_type(std::string_view derived) {
  auto basic = basic_type_of(derived);
  if (!basic) throw Error(ErrorKind::InvalidArgument, "unknown derived type '" + std::string(derived) + "'");
  return TypeDescriptor{*basic, std::string(derived)};
}

TypeDescriptor infer_column_type(std::span<const std::string> column, bool key_column) {
  std::vector<std::string_view> cells;
  for (const auto& c : column) {
    if (!c.empty()) cells.emplace_back(c);
  }
  if (cells.empty()) return make_type("varchar");

  if (key_column && all_of_cells(cells, [](std::string_view c) {
        auto v = parse_int(c);
        return v && *v >= 1'000'000'000;
      })) {
    return make_type("timestamp");
  }

  static constexpr std::array<std::array<std::string_view, 3>, 3> kPairs{{
      {"yes", "no", "yes/no"}, {"true", "false", "true/false"}, {"on", "off", "on/off"}}};
  for (const auto& pair : kPairs) {
    if (all_of_cells(cells, [&](std::string_view c) {
          auto l = lower(c);
          return l == pair[0] || l == pair[1];
        })) {
      return make_type(pair[2]);
    }
  }

  if (all_of_cells(cells, is_integer_text)) {
    bool fits32 = all_of_cells(cells, [](std::string_view c) {
      auto v = parse_int(c);
      return v && *v >= std::numeric_limits<std::int32_t>::min() &&
             *v <= std::numeric_limits<std::int32_t>::max();
    });
    if (fits32) return make_type("integer");
    if (all_of_cells(cells, [](std::string_view c) { return parse_int(c).has_value(); })) {
      return make_type("long");
    }
  }
  if (all_of_cells(cells, [](std::string_view c) {
        auto s = number_shape(c);
        return s.valid && s.has_exponent;
      })) {
    return make_type("scientific");
  }
  if (all_of_cells(cells, [](std::string_view c) { return number_shape(c).valid; })) {
    return make_type("real");
  }
  if (all_of_cells(cells, [](std::string_view c) {
        return c.size() > 1 && c.back() == '%' && number_shape(trim(c.substr(0, c.size() - 1))).valid;
      })) {
    return make_type("percentage");
  }
  auto first_currency = currency_of(cells.front());
  if (!first_currency.empty() &&
      all_of_cells(cells, [&](std::string_view c) { return currency_of(c) == first_currency; })) {
    return make_type(first_currency);
  }
  if (all_of_cells(cells, [](std::string_view c) {
        auto l = lower(c.substr(0, std::min<std::size_t>(c.size(), 8)));
        return l.starts_with("http://") || l.starts_with("https://");
      })) {
    return make_type("hyperlink");
  }
  if (all_of_cells(cells, [](std::string_view c) { return c.size() == 1; })) {
    return make_type("character");
  }
  return make_type("varchar");
}

std::optional<double> parse_number(std::string_view cell) {
  if (!number_shape(cell).valid) return std::nullopt;
  if (cell.front() == '+') cell.remove_prefix(1);
  double v = 0;
  auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
  if (ec != std::errc{} || ptr != cell.data() + cell.size() || !std::isfinite(v)) {
    return std::nullopt;
  }
  return v;
}

std::vector<double> numeric_values(std::span<const std::string> cells) {
  std::vector<double> out;
  out.reserve(cells.size());
  for (const auto& c : cells) {
    if (auto v = parse_number(c)) out.push_back(*v);
  }
  return out;
}

double quantile_sorted(std::span<const double> sorted, double p) {
  if (sorted.empty()) return 0.0;
  double pos = p * static_cast<double>(sorted.size() - 1);
  auto lo = static_cast<std::size_t>(std::floor(pos));
  auto hi = std::min(lo + 1, sorted.size() - 1);
  double frac = pos - static_cast<double>(lo);
  return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

BasicProperties compute_properties(std::span<const double> values) {
  if (values.empty()) throw Error(ErrorKind::EmptyColumn, "no numeric values in column");
  std::vector<double> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());

  BasicProperties p;
  const auto n = static_cast<double>(sorted.size());
  p.count = sorted.size();
  p.min = sorted.front();
  p.max = sorted.back();

  double sum = 0;
  for (double v : sorted) sum += v;
  p.mean = sum / n;

  double m2 = 0, m3 = 0;
  for (double v : sorted) {
    double d = v - p.mean;
    m2 += d * d;
    m3 += d * d * d;
  }
  p.stddev = sorted.size() > 1 ? std::sqrt(m2 / (n - 1)) : 0.0;
  m2 /= n;
  m3 /= n;

  p.median = quantile_sorted(sorted, 0.5);
  p.q1 = quantile_sorted(sorted, 0.25);
  p.q3 = quantile_sorted(sorted, 0.75);
  p.iqr = std::max(0.0, p.q3 - p.q1);

  const bool constant = p.min == p.max;
  p.skewness = constant || m2 == 0 ? 0.0 : m3 / std::pow(m2, 1.5);
  if (constant) p.stddev = 0;

  const double lo_fence = p.q1 - 1.5 * p.iqr;
  const double hi_fence = p.q3 + 1.5 * p.iqr;
  p.outlier_count = static_cast<std::size_t>(std::count_if(
      sorted.begin(), sorted.end(), [&](double v) { return v < lo_fence || v > hi_fence; }));

  std::size_t distinct = std::unique(sorted.begin(), sorted.end()) - sorted.begin();
  const double g = std::abs(p.skewness);
  if (constant) {
    p.shape = ShapeClass::constant;
  } else if (distinct <= 2) {
    p.shape = ShapeClass::boolean_like;
  } else if (g < 0.5) {
    p.shape = ShapeClass::approx_symmetric;
  } else if (g < 1.0) {
    p.shape = ShapeClass::moderately_skewed;
  } else {
    p.shape = ShapeClass::highly_skewed;
  }
  return p;
}

CorrelationMatrix compute_correlation(std::span<const NamedColumn> columns) {
  std::vector<const NamedColumn*> numeric;
  std::vector<std::vector<std::optional<double>>> parsed;
  for (const auto& col : columns) {
    std::vector<std::optional<double>> vals;
    vals.reserve(col.cells.size());
    bool any = false;
    for (const auto& c : col.cells) {
      vals.push_back(parse_number(c));
      any = any || vals.back().has_value();
    }
    if (any) {
      numeric.push_back(&col);
      parsed.push_back(std::move(vals));
    }
  }

  CorrelationMatrix m;
  const std::size_t k = numeric.size();
  for (const auto* c : numeric) m.labels.push_back(c->name);
  m.values.assign(k * k, std::nullopt);

  auto pearson = [&](std::size_t a, std::size_t b) -> std::optional<double> {
    const auto& x = parsed[a];
    const auto& y = parsed[b];
    const std::size_t rows = std::min(x.size(), y.size());
    double sx = 0, sy = 0;
    std::size_t n = 0;
    for (std::size_t r = 0; r < rows; ++r) {
      if (x[r] && y[r]) {
        sx += *x[r];
        sy += *y[r];
        ++n;
      }
    }
    if (n < 2) return std::nullopt;
    const double mx = sx / static_cast<double>(n), my = sy / static_cast<double>(n);
    double sxx = 0, syy = 0, sxy = 0;
    for (std::size_t r = 0; r < rows; ++r) {
      if (x[r] && y[r]) {
        double dx = *x[r] - mx, dy = *y[r] - my;
        sxx += dx * dx;
        syy += dy * dy;
        sxy += dx * dy;
      }
    }
    if (sxx == 0 || syy == 0) return std::nullopt;
    return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
  };

  for (std::size_t i = 0; i < k; ++i) {
    if (pearson(i, i)) m.values[i * k + i] = 1.0;
    for (std::size_t j = i + 1; j < k; ++j) {
      auto r = pearson(i, j);
      m.values[i * k + j] = r;
      m.values[j * k + i] = r;
    }
  }
  return m;
}

CorrelationMatrix compute_correlation(const SensorTable& table) {
  std::vector<NamedColumn> cols;
  for (const auto& c : table.columns()) cols.push_back({c.name, c.cells});
  return compute_correlation(cols);
}

nlohmann::json to_json(const TypeDescriptor& t) {
  return {{"basic", std::string(to_string(t.basic))}, {"derived", t.derived}};
}

nlohmann::json to_json(const BasicProperties& p) {
  return {{"count", p.count},   {"min", p.min},       {"max", p.max},
          {"mean", p.mean},     {"median", p.median}, {"stddev", p.stddev},
          {"q1", p.q1},         {"q3", p.q3},         {"iqr", p.iqr},
          {"skewness", p.skewness}, {"outlier_count", p.outlier_count},
          {"shape_class", std::string(to_string(p.shape))}};
}

nlohmann::json to_json(const CorrelationMatrix& m) {
  nlohmann::json rows = nlohmann::json::array();
  const std::size_t k = m.labels.size();
  for (std::size_t i = 0; i < k; ++i) {
    nlohmann::json row = nlohmann::json::array();
    for (std::size_t j = 0; j < k; ++j) {
      auto v = m.at(i, j);
      row.push_back(v ? nlohmann::json(*v) : nlohmann::json(nullptr));
    }
    rows.push_back(std::move(row));
  }
  return {{"labels", m.labels}, {"values", std::move(rows)}};
}

TypeDescriptor type_from_json(const nlohmann::json& j) {
  return make_type(j.at("derived").get<std::string>());
}

BasicProperties properties_from_json(const nlohmann::json& j) {
  BasicProperties p;
  p.count = j.at("count").get<std::size_t>();
  p.min = j.at("min").get<double>();
  p.max = j.at("max").get<double>();
  p.mean = j.at("mean").get<double>();
  p.median = j.at("median").get<double>();
  p.stddev = j.at("stddev").get<double>();
  p.q1 = j.at("q1").get<double>();
  p.q3 = j.at("q3").get<double>();
  p.iqr = j.at("iqr").get<double>();
  p.skewness = j.at("skewness").get<double>();
  p.outlier_count = j.at("outlier_count").get<std::size_t>();
  const auto shape = j.at("shape_class").get<std::string>();
  for (auto s : {ShapeClass::constant, ShapeClass::boolean_like, ShapeClass::approx_symmetric,
                 ShapeClass::moderately_skewed, ShapeClass::highly_skewed}) {
    if (to_string(s) == shape) p.shape = s;
  }
  return p;
}

}  // namespace pidres
