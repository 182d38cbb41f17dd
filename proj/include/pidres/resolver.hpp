#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <json.hpp>

#include "pidres/catalog.hpp"
#include "pidres/pid_grammar.hpp"
#include "pidres/timeseries_store.hpp"

namespace pidres {

/// Vowel-free base-29 digits used for NOIDs.
inline constexpr std::string_view kNoidAlphabet = "0123456789bcdfghjkmnpqrstvwxz";

/// Counter value in the NOID alphabet, left-padded with '0' to `min_width`.
std::string encode_noid(std::uint64_t counter, std::size_t min_width = 4);
std::optional<std::uint64_t> decode_noid(std::string_view noid);

struct MintBinding {
  std::string noid;
  std::optional<std::string> target;  // nullopt once retired
  std::string created_at;
};

/// Rejects empty targets, unparseable `ark:/` targets and anything that is
/// not an absolute URL. Throws InvalidTarget.
void validate_target(std::string_view target);

/// Issues NOIDs from a monotonically increasing counter and keeps bindings in
/// an append-only JSON-lines log that is replayed on construction. A NOID is
/// never issued twice, including after it is retired.
class Minter {
 public:
  Minter(std::filesystem::path log_path, Clock clock = [] { return std::chrono::system_clock::now(); });
  ~Minter();

  Minter(const Minter&) = delete;
  Minter& operator=(const Minter&) = delete;

  MintBinding mint(const std::string& target);
  /// Points an existing NOID at a new location; the latest entry wins.
  MintBinding rebind(const std::string& noid, const std::string& target);
  void retire(const std::string& noid);

  std::optional<MintBinding> find(std::string_view noid) const;
  std::uint64_t next_counter() const;

 private:
  void append(const MintBinding& b);

  std::filesystem::path log_path_;
  Clock clock_;
  mutable std::mutex mutex_;
  std::map<std::string, MintBinding, std::less<>> bindings_;
  std::uint64_t counter_ = 0;
  int fd_ = -1;
};

struct Redirect {
  std::string location;
  int status = 302;
};

struct DataResult {
  PidQuery query;
  ResultSlice slice;
};

struct InfoResult {
  nlohmann::json document;
};

using Resolution = std::variant<Redirect, DataResult, InfoResult>;

struct FoldPids {
  std::string train;
  std::string test;
  Timestamp first = 0;
  Timestamp last = 0;
  std::size_t size = 0;
};

class Resolver {
 public:
  /// The first NAAN is the one minted identifiers and fold PIDs are issued
  /// under. `base_url` has no trailing slash.
  Resolver(std::vector<std::string> naans, std::string base_url, Catalog& catalog, Minter& minter);

  /// Minted NOIDs (no '.') redirect, with any "/suffix" appended to the
  /// target; everything else is parsed as a semantic PID body and executed.
  Resolution resolve(std::string_view naan, std::string_view path_remainder, bool info = false) const;

  /// Accepts "ark:/NAAN/rest", "/ark:/..." or a full URL; a trailing "?info"
  /// selects the metadata view.
  Resolution resolve_text(std::string_view text) const;

  MintBinding mint(const std::string& target);

  /// k contiguous folds over the sorted union of the sensors' keys; earlier
  /// folds take the remainder.
  std::vector<FoldPids> crossfold_pids(const std::string& dataset, const std::vector<std::string>& sensors,
                                       const std::vector<std::string>& measurements, std::size_t k) const;

  const std::string& primary_naan() const { return naans_.front(); }
  const std::string& base_url() const { return base_url_; }
  std::string ark_for(std::string_view noid) const;
  std::string url_for(std::string_view noid) const;
  bool serves(std::string_view naan) const;

 private:
  Resolution resolve_minted(std::string_view remainder, bool info) const;
  Resolution resolve_semantic(std::string_view naan, std::string_view body, bool info) const;

  std::vector<std::string> naans_;
  std::string base_url_;
  Catalog& catalog_;
  Minter& minter_;
};

/// Strips "scheme://host" and a leading '/' so the result starts at "ark:/".
std::string strip_to_ark(std::string_view text);

/// Decodes %XX escapes only; '+' stays literal.
std::string percent_decode(std::string_view s);

}  // namespace pidres
