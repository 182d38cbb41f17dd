#include "pidres/resolver.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <algorithm>
#include <cctype>
#include <cerrno>
#include <cstring>
#include <fstream>

#include "pidres/error.hpp"

namespace pidres {
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

bool is_scheme_char(char c) {
  return std::isalnum(static_cast<unsigned char>(c)) || c == '+' || c == '.' || c == '-';
}

bool is_absolute_url(std::string_view s) {
  auto sep = s.find("://");
  if (sep == std::string_view::npos || sep == 0) return false;
  if (!std::isalpha(static_cast<unsigned char>(s[0]))) return false;
  if (!std::all_of(s.begin(), s.begin() + static_cast<std::ptrdiff_t>(sep), is_scheme_char)) return false;
  auto rest = s.substr(sep + 3);
  if (rest.empty() || rest.front() == '/') return false;
  return std::none_of(s.begin(), s.end(), [](char c) {
    return static_cast<unsigned char>(c) <= 0x20 || c == 0x7f;
  });
}

int hex_value(char c) {
  if (c >= '0' && c <= '9') return c - '0';
  if (c >= 'a' && c <= 'f') return c - 'a' + 10;
  if (c >= 'A' && c <= 'F') return c - 'A' + 10;
  return -1;
}

}  // namespace

std::string encode_noid(std::uint64_t counter, std::size_t min_width) {
  const auto base = kNoidAlphabet.size();
  std::string out;
  do {
    out += kNoidAlphabet[counter % base];
    counter /= base;
  } while (counter > 0);
  while (out.size() < min_width) out += kNoidAlphabet[0];
  std::reverse(out.begin(), out.end());
  return out;
}

std::optional<std::uint64_t> decode_noid(std::string_view noid) {
  if (noid.empty()) return std::nullopt;
  std::uint64_t value = 0;
  for (char c : noid) {
    auto digit = kNoidAlphabet.find(c);
    if (digit == std::string_view::npos) return std::nullopt;
    if (value > (UINT64_MAX - digit) / kNoidAlphabet.size()) return std::nullopt;
    value = value * kNoidAlphabet.size() + digit;
  }
  return value;
}

void validate_target(std::string_view target) {
  if (target.empty()) throw Error(ErrorKind::InvalidTarget, "target is empty");
  if (target.starts_with("ark:/")) {
    try {
      parse_pid(target);
    } catch (const Error& e) {
      throw Error(ErrorKind::InvalidTarget, "target PID does not parse: " + std::string(e.what()));
    }
    return;
  }
  if (!is_absolute_url(target)) {
    throw Error(ErrorKind::InvalidTarget, "target must be an ark:/ PID or an absolute URL: " + std::string(target));
  }
}

std::string percent_decode(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] == '%' && i + 2 < s.size()) {
      int hi = hex_value(s[i + 1]), lo = hex_value(s[i + 2]);
      if (hi >= 0 && lo >= 0) {
        out += static_cast<char>(hi * 16 + lo);
        i += 2;
        continue;
      }
    }
    out += s[i];
  }
  return out;
}

std::string strip_to_ark(std::string_view text) {
  auto pos = text.find("ark:/");
  if (pos == std::string_view::npos) return std::string(text);
  return std::string(text.substr(pos));
}

// ---------------------------------------------------------------------------

Minter::Minter(fs::path log_path, Clock clock) : log_path_(std::move(log_path)), clock_(std::move(clock)) {
  std::error_code ec;
  if (!fs::exists(log_path_, ec)) return;
  std::ifstream in(log_path_, std::ios::binary);
  if (!in) throw Error(ErrorKind::PersistenceError, "cannot read " + log_path_.string());
  std::string line;
  std::size_t number = 0;
  bool saw_partial = false;
  while (std::getline(in, line)) {
    ++number;
    if (line.empty()) continue;
    if (saw_partial) throw Error(ErrorKind::PersistenceError, "corrupt mint log before line " + std::to_string(number));
    json j = json::parse(line, nullptr, false);
    if (j.is_discarded()) {
      // A torn final append is tolerated; anything earlier is corruption.
      saw_partial = true;
      continue;
    }
    MintBinding b;
    b.noid = j.at("noid").get<std::string>();
    if (!j.at("target").is_null()) b.target = j.at("target").get<std::string>();
    b.created_at = j.at("created_at").get<std::string>();
    auto value = decode_noid(b.noid);
    if (!value) throw Error(ErrorKind::PersistenceError, "mint log line " + std::to_string(number) + " has a bad noid");
    counter_ = std::max(counter_, *value + 1);
    if (auto it = bindings_.find(b.noid); it != bindings_.end()) b.created_at = it->second.created_at;
    bindings_[b.noid] = std::move(b);
  }
}

Minter::~Minter() {
  if (fd_ >= 0) ::close(fd_);
}

void Minter::append(const MintBinding& b) {
  if (fd_ < 0) {
    std::error_code ec;
    if (log_path_.has_parent_path()) fs::create_directories(log_path_.parent_path(), ec);
    fd_ = ::open(log_path_.c_str(), O_WRONLY | O_APPEND | O_CREAT | O_CLOEXEC, 0644);
    if (fd_ < 0) {
      throw Error(ErrorKind::PersistenceError, "cannot open " + log_path_.string() + ": " + std::strerror(errno));
    }
  }
  json j = {{"noid", b.noid},
            {"target", b.target ? json(*b.target) : json(nullptr)},
            {"created_at", b.created_at}};
  const auto line = j.dump() + "\n";
  std::size_t written = 0;
  while (written < line.size()) {
    auto n = ::write(fd_, line.data() + written, line.size() - written);
    if (n < 0) {
      if (errno == EINTR) continue;
      throw Error(ErrorKind::PersistenceError, "mint log write failed: " + std::string(std::strerror(errno)));
    }
    written += static_cast<std::size_t>(n);
  }
  if (::fdatasync(fd_) != 0) {
    throw Error(ErrorKind::PersistenceError, "mint log sync failed: " + std::string(std::strerror(errno)));
  }
}

MintBinding Minter::mint(const std::string& target) {
  validate_target(target);
  std::lock_guard lock(mutex_);
  MintBinding b{encode_noid(counter_), target, format_time(clock_())};
  append(b);
  ++counter_;
  bindings_[b.noid] = b;
  return b;
}

MintBinding Minter::rebind(const std::string& noid, const std::string& target) {
  validate_target(target);
  std::lock_guard lock(mutex_);
  auto it = bindings_.find(noid);
  if (it == bindings_.end() || !it->second.target) throw Error(ErrorKind::NotFound, "noid not found: " + noid);
  MintBinding b{noid, target, it->second.created_at};
  append(b);
  it->second = b;
  return b;
}

void Minter::retire(const std::string& noid) {
  std::lock_guard lock(mutex_);
  auto it = bindings_.find(noid);
  if (it == bindings_.end() || !it->second.target) throw Error(ErrorKind::NotFound, "noid not found: " + noid);
  MintBinding b{noid, std::nullopt, it->second.created_at};
  append(b);
  it->second = b;
}

std::optional<MintBinding> Minter::find(std::string_view noid) const {
  std::lock_guard lock(mutex_);
  auto it = bindings_.find(noid);
  if (it == bindings_.end()) return std::nullopt;
  return it->second;
}

std::uint64_t Minter::next_counter() const {
  std::lock_guard lock(mutex_);
  return counter_;
}

// ---------------------------------------------------------------------------

Resolver::Resolver(std::vector<std::string> naans, std::string base_url, Catalog& catalog, Minter& minter)
    : naans_(std::move(naans)), base_url_(std::move(base_url)), catalog_(catalog), minter_(minter) {
  if (naans_.empty()) throw Error(ErrorKind::InvalidArgument, "at least one NAAN must be configured");
  for (const auto& n : naans_) {
    if (!is_valid_naan(n)) throw Error(ErrorKind::BadNaan, "NAAN must be decimal digits: '" + n + "'");
  }
  while (!base_url_.empty() && base_url_.back() == '/') base_url_.pop_back();
  if (!is_absolute_url(base_url_)) throw Error(ErrorKind::InvalidArgument, "base_url must be absolute: " + base_url_);
}

bool Resolver::serves(std::string_view naan) const {
  return std::find(naans_.begin(), naans_.end(), naan) != naans_.end();
}

std::string Resolver::ark_for(std::string_view noid) const {
  return "ark:/" + primary_naan() + "/" + std::string(noid);
}

std::string Resolver::url_for(std::string_view noid) const { return base_url_ + "/" + ark_for(noid); }

MintBinding Resolver::mint(const std::string& target) { return minter_.mint(target); }

Resolution Resolver::resolve(std::string_view naan, std::string_view remainder, bool info) const {
  if (!serves(naan)) throw Error(ErrorKind::UnknownNaan, "NAAN not served here: " + std::string(naan));
  auto head = remainder.substr(0, remainder.find('/'));
  if (head.find('.') == std::string_view::npos) return resolve_minted(remainder, info);
  return resolve_semantic(naan, remainder, info);
}

Resolution Resolver::resolve_minted(std::string_view remainder, bool info) const {
  auto slash = remainder.find('/');
  auto noid = remainder.substr(0, slash);
  auto suffix = slash == std::string_view::npos ? std::string_view{} : remainder.substr(slash);
  if (noid.empty()) throw Error(ErrorKind::MalformedPid, "empty identifier");
  auto binding = minter_.find(noid);
  if (!binding || !binding->target) throw Error(ErrorKind::NotFound, "identifier not found: " + std::string(noid));
  if (info) {
    return InfoResult{{{"noid", binding->noid},
                       {"ark", ark_for(binding->noid)},
                       {"url", url_for(binding->noid)},
                       {"target", *binding->target},
                       {"created_at", binding->created_at}}};
  }
  std::string location = binding->target->starts_with("ark:/") ? base_url_ + "/" + *binding->target
                                                                : *binding->target;
  location += suffix;
  return Redirect{std::move(location)};
}

Resolution Resolver::resolve_semantic(std::string_view naan, std::string_view body, bool info) const {
  auto query = parse_pid_body(naan, body);
  auto record = catalog_.record(query.dataset);
  auto slice = select(*record->data, query);
  if (!info) return DataResult{std::move(query), std::move(slice)};

  const auto& entry = record->entry;
  json sensors = json::array();
  for (const auto& s : query.sensors) {
    const auto* si = entry.find_sensor(s);
    const auto* table = record->data->find_sensor(s);
    json columns = json::array();
    std::vector<NamedColumn> picked;
    for (const auto& m : query.measurements) {
      for (const auto& c : si->columns) {
        if (c.name != m) continue;
        columns.push_back({{"name", c.name},
                           {"type", to_json(c.type)},
                           {"properties", c.properties ? to_json(*c.properties) : json(nullptr)}});
      }
      picked.push_back({m, table->find_column(m)->cells});
    }
    sensors.push_back({{"name", si->name},
                       {"file", si->file},
                       {"row_count", si->row_count},
                       {"key", {{"name", si->key_header}, {"type", to_json(si->key_type)}}},
                       {"columns", std::move(columns)},
                       {"correlation", to_json(compute_correlation(picked))}});
  }
  json doc = to_json(entry.metadata);
  doc.erase("annotations");
  doc.erase("sensors");
  doc["pid"] = serialize_pid(query);
  doc["dataset"] = entry.dataset;
  doc["source_id"] = entry.source_id;
  doc["content_hash"] = entry.content_hash;
  doc["registered_at"] = entry.registered_at;
  doc["updated_at"] = entry.updated_at;
  doc["sensors"] = std::move(sensors);
  doc["selected_rows"] = slice.rows.size();
  return InfoResult{std::move(doc)};
}

Resolution Resolver::resolve_text(std::string_view text) const {
  bool info = false;
  if (auto q = text.find('?'); q != std::string_view::npos) {
    auto query = text.substr(q + 1);
    info = query == "info" || query.starts_with("info=") || query.starts_with("info&");
    text = text.substr(0, q);
  }
  auto ark = percent_decode(strip_to_ark(text));
  if (!ark.starts_with("ark:/")) throw Error(ErrorKind::MalformedPid, "PID must start with 'ark:/'");
  std::string_view rest(ark);
  rest.remove_prefix(5);
  auto slash = rest.find('/');
  if (slash == std::string_view::npos) throw Error(ErrorKind::MalformedPid, "missing '/' after NAAN");
  auto naan = rest.substr(0, slash);
  if (naan.empty()) throw Error(ErrorKind::MalformedPid, "empty NAAN");
  if (!is_valid_naan(naan)) throw Error(ErrorKind::BadNaan, "NAAN must be decimal digits: '" + std::string(naan) + "'");
  return resolve(naan, rest.substr(slash + 1), info);
}

std::vector<FoldPids> Resolver::crossfold_pids(const std::string& dataset, const std::vector<std::string>& sensors,
                                               const std::vector<std::string>& measurements, std::size_t k) const {
  if (k < 2) throw Error(ErrorKind::InvalidArgument, "k must be at least 2");
  PidQuery base{primary_naan(), dataset, sensors, measurements, RangeSelector::wildcard()};
  try {
    validate(base);
  } catch (const Error& e) {
    throw Error(ErrorKind::InvalidArgument, e.what());
  }
  auto record = catalog_.record(dataset);
  auto all = select(*record->data, base);
  const std::size_t n = all.rows.size();
  if (n < k) {
    throw Error(ErrorKind::TooFewRows, "cannot split " + std::to_string(n) + " timestamps into " + std::to_string(k) + " folds");
  }

  std::vector<FoldPids> folds;
  std::size_t begin = 0;
  for (std::size_t i = 0; i < k; ++i) {
    const std::size_t size = n / k + (i < n % k ? 1 : 0);
    const Timestamp first = all.rows[begin].timestamp;
    const Timestamp last = all.rows[begin + size - 1].timestamp;
    PidQuery test = base;
    test.selector = RangeSelector::of({{first, last, false}});
    PidQuery train = base;
    train.selector = RangeSelector::of({{first, last, true}});
    folds.push_back({serialize_pid(train), serialize_pid(test), first, last, size});
    begin += size;
  }
  return folds;
}

}  // namespace pidres
