#pragma once

// Operator knowledge loaded from versioned data files: the server-ID pattern
// profile and the list of known anycast sites.

#include <array>
#include <istream>
#include <ostream>
#include <optional>
#include <regex>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "rootspoof/model.hpp"

namespace rootspoof {

/// One legitimate server-ID format. Matching is full-string and
/// case-insensitive. When the expression has a capture group, group 1 is the
/// site label used to spot catchment changes.
class ServerIdPattern {
 public:
  explicit ServerIdPattern(std::string source);

  const std::string& source() const { return source_; }
  bool matches(std::string_view server_id) const;
  /// Site label when `server_id` matches; the lower-cased id itself when the
  /// pattern has no capture group.
  std::optional<std::string> site_of(std::string_view server_id) const;

 private:
  std::string source_;
  std::regex regex_;
  bool has_site_group_;
};

class PatternProfile {
 public:
  PatternProfile() = default;

  const std::string& version() const { return version_; }
  const std::vector<ServerIdPattern>& patterns(Letter letter) const { return patterns_[letter_index(letter)]; }

  /// True when some pattern for the letter accepts the id.
  bool is_legitimate(Letter letter, std::string_view server_id) const;
  /// Site label from the first accepting pattern.
  std::optional<std::string> site_of(Letter letter, std::string_view server_id) const;

  /// Adds a pattern; throws ProfileError if it does not compile.
  void add(Letter letter, std::string pattern);
  void set_version(std::string version) { version_ = std::move(version); }
  /// Throws ProfileError naming every letter without a pattern.
  void validate() const;

 private:
  std::string version_;
  std::array<std::vector<ServerIdPattern>, kLetterCount> patterns_;
};

/// Text format, one directive per line ('#' starts a comment):
///
///     version 2020-05
///     A ^nnn1-([a-z]{3})[0-9]+$
///
/// Letters may repeat to list several patterns, tried in file order.
/// Throws ProfileError on an empty file, a bad line or a missing letter.
PatternProfile load_pattern_profile(std::istream& in);

struct KnownSites {
  std::set<std::string> sites;
  std::set<Ipv4> penultimate_hops;
};

struct KnownSiteList {
  std::string source_date;
  std::array<KnownSites, kLetterCount> letters;

  const KnownSites& at(Letter letter) const { return letters[letter_index(letter)]; }
};

/// Text format:
///
///     source_date 2019-08-24
///     A sites lax lon nrt
///     A hops 192.0.2.1 192.0.2.9
///
/// Every letter needs at least a "sites" line; "hops" lines are optional.
KnownSiteList load_known_sites(std::istream& in);

/// Writes the format load_known_sites() reads.
void write_known_sites(std::ostream& out, const KnownSiteList& list);

}  // namespace rootspoof
