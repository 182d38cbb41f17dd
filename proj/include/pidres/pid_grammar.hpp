#pragma once

// Surface syntax of semantic time-series PIDs:
//
//   pid       := "ark:/" NAAN "/" body
//   body      := NAME "." NAMELIST "." NAMELIST "@" SELECTOR
//   NAMELIST  := NAME ("+" NAME)*
//   SELECTOR  := "*" | TERM ("+" TERM)*
//   TERM      := ["_"] INT ["~" INT]
//
// NAME is [A-Za-z0-9_-]+, NAAN is [0-9]+, INT is [0-9]+ (no sign). A leading
// underscore marks an exclusion term. `@t` is shorthand for `@t~t`.

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace pidres {

using Timestamp = std::int64_t;

struct RangeTerm {
  Timestamp start = 0;
  Timestamp end = 0;
  bool exclude = false;

  bool operator==(const RangeTerm&) const = default;
};

/// Either a wildcard (`*`) or an ordered, nonempty list of terms.
class RangeSelector {
 public:
  RangeSelector() = default;  // wildcard

  static RangeSelector wildcard() { return RangeSelector{}; }
  static RangeSelector of(std::vector<RangeTerm> terms);

  bool is_wildcard() const { return terms_.empty(); }
  const std::vector<RangeTerm>& terms() const { return terms_; }

  /// Pointwise membership: in some inclusive term (or there are none) and in
  /// no exclusive term.
  bool selects(Timestamp t) const;

  bool operator==(const RangeSelector&) const = default;

 private:
  explicit RangeSelector(std::vector<RangeTerm> terms)
      : terms_(std::move(terms)) {}

  std::vector<RangeTerm> terms_;
};

struct PidQuery {
  std::string naan;
  std::string dataset;
  std::vector<std::string> sensors;
  std::vector<std::string> measurements;
  RangeSelector selector;

  bool operator==(const PidQuery&) const = default;
};

bool is_valid_name(std::string_view s);
bool is_valid_naan(std::string_view s);

/// Parses a full `ark:/NAAN/body` string. Scheme and host must already be
/// stripped.
PidQuery parse_pid(std::string_view text);

/// Parses only the part after `ark:/NAAN/`.
PidQuery parse_pid_body(std::string_view naan, std::string_view body);

RangeSelector parse_selector(std::string_view text);

std::string serialize_pid(const PidQuery& q);
std::string serialize_selector(const RangeSelector& sel);

/// Throws InvariantViolation when `q` could not have come out of parse_pid.
void validate(const PidQuery& q);

/// Keys of the strictly increasing `domain` picked by `sel`.
std::vector<Timestamp> effective_key_set(const RangeSelector& sel,
                                         std::span<const Timestamp> domain);

}  // namespace pidres
