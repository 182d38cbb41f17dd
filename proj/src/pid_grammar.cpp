#include "pidres/pid_grammar.hpp"

#include <algorithm>
#include <charconv>
#include <set>

#include "pidres/error.hpp"

namespace pidres {
namespace {

constexpr std::string_view kArkPrefix = "ark:/";

[[noreturn]] void fail(ErrorKind kind, const std::string& what) {
  throw Error(kind, what);
}

bool is_name_char(char c) {
  return (c >= 'A' && c <= 'Z') || (c >= 'a' && c <= 'z') ||
         (c >= '0' && c <= '9') || c == '_' || c == '-';
}

bool is_body_char(char c) {
  return is_name_char(c) || c == '.' || c == '+' || c == '@' || c == '~' ||
         c == '*';
}

bool all_digits(std::string_view s) {
  return !s.empty() &&
         std::all_of(s.begin(), s.end(), [](char c) { return c >= '0' && c <= '9'; });
}

std::vector<std::string_view> split(std::string_view s, char sep) {
  std::vector<std::string_view> parts;
  std::size_t begin = 0;
  for (;;) {
    auto pos = s.find(sep, begin);
    if (pos == std::string_view::npos) {
      parts.push_back(s.substr(begin));
      return parts;
    }
    parts.push_back(s.substr(begin, pos - begin));
    begin = pos + 1;
  }
}

Timestamp parse_bound(std::string_view text, std::string_view term) {
  if (text.empty()) {
    fail(ErrorKind::MalformedPid, "empty bound in range term '" + std::string(term) + "'");
  }
  if (!all_digits(text)) {
    fail(ErrorKind::InvalidRange, "non-integer bound '" + std::string(text) + "'");
  }
  Timestamp value = 0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc{} || ptr != text.data() + text.size()) {
    fail(ErrorKind::InvalidRange, "bound out of range '" + std::string(text) + "'");
  }
  return value;
}

RangeTerm parse_term(std::string_view text) {
  if (text.empty()) fail(ErrorKind::MalformedPid, "empty range term");
  RangeTerm term;
  std::string_view rest = text;
  if (rest.front() == '_') {
    term.exclude = true;
    rest.remove_prefix(1);
  }
  auto bounds = split(rest, '~');
  if (bounds.size() > 2) {
    fail(ErrorKind::MalformedPid, "too many '~' in range term '" + std::string(text) + "'");
  }
  term.start = parse_bound(bounds[0], text);
  term.end = bounds.size() == 2 ? parse_bound(bounds[1], text) : term.start;
  if (term.start > term.end) {
    fail(ErrorKind::InvalidRange, "range start exceeds end in '" + std::string(text) + "'");
  }
  return term;
}

std::vector<std::string> parse_name_list(std::string_view text, std::string_view what) {
  std::vector<std::string> names;
  for (auto part : split(text, '+')) {
    if (part.empty()) fail(ErrorKind::MalformedPid, "empty " + std::string(what) + " name");
    if (!is_valid_name(part)) {
      fail(ErrorKind::MalformedPid, "illegal " + std::string(what) + " name '" + std::string(part) + "'");
    }
    names.emplace_back(part);
  }
  return names;
}

template <typename Range>
const std::string* first_duplicate(const Range& names) {
  std::set<std::string_view> seen;
  for (const auto& n : names) {
    if (!seen.insert(n).second) return &n;
  }
  return nullptr;
}

struct Interval {
  Timestamp lo, hi;
};

// Sorted, non-overlapping, non-adjacent cover of the given terms.
std::vector<Interval> merged(const std::vector<RangeTerm>& terms, bool exclude) {
  std::vector<Interval> out;
  for (const auto& t : terms) {
    if (t.exclude == exclude) out.push_back({t.start, t.end});
  }
  std::sort(out.begin(), out.end(), [](const Interval& a, const Interval& b) { return a.lo < b.lo; });
  std::vector<Interval> result;
  for (const auto& iv : out) {
    if (!result.empty() && (iv.lo <= result.back().hi ||
                            (result.back().hi < iv.lo && iv.lo - result.back().hi == 1))) {
      result.back().hi = std::max(result.back().hi, iv.hi);
    } else {
      result.push_back(iv);
    }
  }
  return result;
}

// Advances `cursor` past intervals ending before `t` and reports whether t is
// covered. Callers feed nondecreasing t.
bool covered(const std::vector<Interval>& ivs, std::size_t& cursor, Timestamp t) {
  while (cursor < ivs.size() && ivs[cursor].hi < t) ++cursor;
  return cursor < ivs.size() && ivs[cursor].lo <= t;
}

}  // namespace

RangeSelector RangeSelector::of(std::vector<RangeTerm> terms) {
  if (terms.empty()) throw Error(ErrorKind::InvariantViolation, "range selector needs at least one term");
  for (const auto& t : terms) {
    if (t.start > t.end || t.start < 0) {
      throw Error(ErrorKind::InvariantViolation, "range term bounds must satisfy 0 <= start <= end");
    }
  }
  return RangeSelector(std::move(terms));
}

bool RangeSelector::selects(Timestamp t) const {
  bool any_include = false;
  bool included = false;
  for (const auto& term : terms_) {
    bool inside = term.start <= t && t <= term.end;
    if (term.exclude) {
      if (inside) return false;
    } else {
      any_include = true;
      included = included || inside;
    }
  }
  return !any_include || included;
}

bool is_valid_name(std::string_view s) {
  return !s.empty() && std::all_of(s.begin(), s.end(), is_name_char);
}

bool is_valid_naan(std::string_view s) { return all_digits(s); }

PidQuery parse_pid(std::string_view text) {
  if (!text.starts_with(kArkPrefix)) {
    fail(ErrorKind::MalformedPid, "PID must start with 'ark:/'");
  }
  text.remove_prefix(kArkPrefix.size());
  auto slash = text.find('/');
  if (slash == std::string_view::npos) {
    fail(ErrorKind::MalformedPid, "missing '/' after NAAN");
  }
  return parse_pid_body(text.substr(0, slash), text.substr(slash + 1));
}

PidQuery parse_pid_body(std::string_view naan, std::string_view body) {
  if (naan.empty()) fail(ErrorKind::MalformedPid, "empty NAAN");
  if (!is_valid_naan(naan)) fail(ErrorKind::BadNaan, "NAAN must be decimal digits: '" + std::string(naan) + "'");

  for (char c : body) {
    if (!is_body_char(c)) {
      fail(ErrorKind::MalformedPid, std::string("illegal character '") + c + "' in PID");
    }
  }
  auto at = body.find('@');
  if (at == std::string_view::npos) fail(ErrorKind::MalformedPid, "missing '@' selector");
  if (body.find('@', at + 1) != std::string_view::npos) {
    fail(ErrorKind::MalformedPid, "more than one '@' in PID");
  }

  auto parts = split(body.substr(0, at), '.');
  if (parts.size() != 3) {
    fail(ErrorKind::MalformedPid, "expected DATASET.SENSORS.MEASUREMENTS before '@'");
  }
  if (parts[0].empty()) fail(ErrorKind::MalformedPid, "empty dataset name");
  if (!is_valid_name(parts[0])) fail(ErrorKind::MalformedPid, "illegal dataset name '" + std::string(parts[0]) + "'");

  PidQuery q;
  q.naan = std::string(naan);
  q.dataset = std::string(parts[0]);
  q.sensors = parse_name_list(parts[1], "sensor");
  q.measurements = parse_name_list(parts[2], "measurement");
  q.selector = parse_selector(body.substr(at + 1));

  if (auto* dup = first_duplicate(q.sensors)) fail(ErrorKind::DuplicateName, "duplicate sensor '" + *dup + "'");
  if (auto* dup = first_duplicate(q.measurements)) fail(ErrorKind::DuplicateName, "duplicate measurement '" + *dup + "'");
  return q;
}

RangeSelector parse_selector(std::string_view text) {
  if (text.empty()) fail(ErrorKind::MalformedPid, "empty range selector");
  if (text == "*") return RangeSelector::wildcard();
  if (text.find('*') != std::string_view::npos) {
    fail(ErrorKind::MalformedPid, "'*' must be the whole selector");
  }
  std::vector<RangeTerm> terms;
  for (auto part : split(text, '+')) terms.push_back(parse_term(part));
  return RangeSelector::of(std::move(terms));
}

void validate(const PidQuery& q) {
  auto bad = [](const std::string& what) { throw Error(ErrorKind::InvariantViolation, what); };
  if (!is_valid_naan(q.naan)) bad("invalid NAAN '" + q.naan + "'");
  if (!is_valid_name(q.dataset)) bad("invalid dataset name '" + q.dataset + "'");
  if (q.sensors.empty()) bad("sensor list is empty");
  if (q.measurements.empty()) bad("measurement list is empty");
  for (const auto& s : q.sensors) {
    if (!is_valid_name(s)) bad("invalid sensor name '" + s + "'");
  }
  for (const auto& m : q.measurements) {
    if (!is_valid_name(m)) bad("invalid measurement name '" + m + "'");
  }
  if (first_duplicate(q.sensors)) bad("duplicate sensor");
  if (first_duplicate(q.measurements)) bad("duplicate measurement");
  for (const auto& t : q.selector.terms()) {
    if (t.start < 0 || t.start > t.end) bad("range term bounds must satisfy 0 <= start <= end");
  }
}

std::string serialize_selector(const RangeSelector& sel) {
  if (sel.is_wildcard()) return "*";
  std::string out;
  for (const auto& t : sel.terms()) {
    if (!out.empty()) out += '+';
    if (t.exclude) out += '_';
    out += std::to_string(t.start);
    out += '~';
    out += std::to_string(t.end);
  }
  return out;
}

std::string serialize_pid(const PidQuery& q) {
  validate(q);
  std::string out(kArkPrefix);
  out += q.naan;
  out += '/';
  out += q.dataset;
  char sep = '.';
  for (const auto* list : {&q.sensors, &q.measurements}) {
    out += sep;
    for (std::size_t i = 0; i < list->size(); ++i) {
      if (i) out += '+';
      out += (*list)[i];
    }
  }
  out += '@';
  out += serialize_selector(q.selector);
  return out;
}

std::vector<Timestamp> effective_key_set(const RangeSelector& sel,
                                         std::span<const Timestamp> domain) {
  if (sel.is_wildcard()) return {domain.begin(), domain.end()};
  auto include = merged(sel.terms(), false);
  auto exclude = merged(sel.terms(), true);
  std::size_t ic = 0, ec = 0;
  std::vector<Timestamp> out;
  for (Timestamp t : domain) {
    bool picked = include.empty() || covered(include, ic, t);
    if (picked && !covered(exclude, ec, t)) out.push_back(t);
  }
  return out;
}

}  // namespace pidres
