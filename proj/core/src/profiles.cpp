#include "rootspoof/profiles.hpp"

#include <algorithm>
#include <cctype>
#include <sstream>

namespace rootspoof {

namespace {

std::string lower(std::string_view s) {
  std::string out(s);
  for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

std::vector<std::string> split_ws(const std::string& line) {
  std::istringstream in(line);
  std::vector<std::string> parts;
  std::string part;
  while (in >> part) parts.push_back(part);
  return parts;
}

std::string strip_comment(std::string line) {
  // Patterns may legitimately contain '#', so comments must start the line
  // or follow whitespace.
  for (std::size_t i = 0; i < line.size(); ++i) {
    if (line[i] == '#' && (i == 0 || line[i - 1] == ' ' || line[i - 1] == '\t')) {
      line.erase(i);
      break;
    }
  }
  return line;
}

}  // namespace

ServerIdPattern::ServerIdPattern(std::string source) : source_(std::move(source)) {
  try {
    regex_ = std::regex(source_, std::regex::ECMAScript | std::regex::icase);
  } catch (const std::regex_error& e) {
    throw ProfileError("pattern '" + source_ + "' does not compile: " + e.what());
  }
  has_site_group_ = regex_.mark_count() >= 1;
}

bool ServerIdPattern::matches(std::string_view server_id) const {
  return std::regex_match(server_id.begin(), server_id.end(), regex_);
}

std::optional<std::string> ServerIdPattern::site_of(std::string_view server_id) const {
  std::match_results<std::string_view::const_iterator> m;
  if (!std::regex_match(server_id.begin(), server_id.end(), m, regex_)) return std::nullopt;
  if (has_site_group_ && m[1].matched) return lower(std::string(m[1].first, m[1].second));
  return lower(server_id);
}

bool PatternProfile::is_legitimate(Letter letter, std::string_view server_id) const {
  const auto& list = patterns(letter);
  return std::any_of(list.begin(), list.end(), [&](const ServerIdPattern& p) { return p.matches(server_id); });
}

std::optional<std::string> PatternProfile::site_of(Letter letter, std::string_view server_id) const {
  for (const auto& p : patterns(letter)) {
    if (auto site = p.site_of(server_id)) return site;
  }
  return std::nullopt;
}

void PatternProfile::add(Letter letter, std::string pattern) {
  patterns_[letter_index(letter)].emplace_back(std::move(pattern));
}

void PatternProfile::validate() const {
  std::string missing;
  for (auto letter : all_letters()) {
    if (patterns(letter).empty()) {
      if (!missing.empty()) missing += ", ";
      missing += letter_char(letter);
    }
  }
  if (!missing.empty()) throw ProfileError("pattern profile has no pattern for letter(s): " + missing);
}

PatternProfile load_pattern_profile(std::istream& in) {
  PatternProfile profile;
  std::string line;
  int line_no = 0;
  bool any = false;
  while (std::getline(in, line)) {
    ++line_no;
    line = strip_comment(line);
    auto parts = split_ws(line);
    if (parts.empty()) continue;
    any = true;
    if (parts[0] == "version") {
      if (parts.size() != 2) throw ProfileError("profile line " + std::to_string(line_no) + ": version takes one value");
      profile.set_version(parts[1]);
      continue;
    }
    auto letter = parts[0].size() == 1 ? parse_letter(parts[0]) : std::nullopt;
    if (!letter || parts.size() != 2) {
      throw ProfileError("profile line " + std::to_string(line_no) + ": expected '<letter> <pattern>'");
    }
    profile.add(*letter, parts[1]);
  }
  if (!any) throw ProfileError("pattern profile is empty");
  profile.validate();
  return profile;
}

KnownSiteList load_known_sites(std::istream& in) {
  KnownSiteList list;
  std::array<bool, kLetterCount> seen{};
  std::string line;
  int line_no = 0;
  bool any = false;
  while (std::getline(in, line)) {
    ++line_no;
    auto parts = split_ws(strip_comment(line));
    if (parts.empty()) continue;
    any = true;
    auto where = [&] { return "known-sites line " + std::to_string(line_no) + ": "; };
    if (parts[0] == "source_date") {
      if (parts.size() != 2) throw ProfileError(where() + "source_date takes one value");
      list.source_date = parts[1];
      continue;
    }
    auto letter = parts[0].size() == 1 ? parse_letter(parts[0]) : std::nullopt;
    if (!letter || parts.size() < 2 || (parts[1] != "sites" && parts[1] != "hops")) {
      throw ProfileError(where() + "expected '<letter> sites|hops ...'");
    }
    auto& entry = list.letters[letter_index(*letter)];
    if (parts[1] == "sites") {
      seen[letter_index(*letter)] = true;
      for (std::size_t i = 2; i < parts.size(); ++i) entry.sites.insert(lower(parts[i]));
    } else {
      for (std::size_t i = 2; i < parts.size(); ++i) {
        auto ip = Ipv4::parse(parts[i]);
        if (!ip) throw ProfileError(where() + "'" + parts[i] + "' is not an IPv4 address");
        entry.penultimate_hops.insert(*ip);
      }
    }
  }
  if (!any) throw ProfileError("known-sites list is empty");
  std::string missing;
  for (auto letter : all_letters()) {
    if (!seen[letter_index(letter)]) {
      if (!missing.empty()) missing += ", ";
      missing += letter_char(letter);
    }
  }
  if (!missing.empty()) throw ProfileError("known-sites list has no entry for letter(s): " + missing);
  return list;
}

void write_known_sites(std::ostream& out, const KnownSiteList& list) {
  if (!list.source_date.empty()) out << "source_date " << list.source_date << '\n';
  for (auto letter : all_letters()) {
    const auto& entry = list.at(letter);
    out << letter_char(letter) << " sites";
    for (const auto& s : entry.sites) out << ' ' << s;
    out << '\n';
    if (entry.penultimate_hops.empty()) continue;
    out << letter_char(letter) << " hops";
    for (const auto& h : entry.penultimate_hops) out << ' ' << h.str();
    out << '\n';
  }
}

}  // namespace rootspoof
