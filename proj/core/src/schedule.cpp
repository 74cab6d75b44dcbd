#include "rootspoof/schedule.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cstdio>

#include "rootspoof/random.hpp"

namespace rootspoof {

namespace {

using namespace std::chrono;

std::optional<int> read_int(std::string_view text, std::size_t pos, std::size_t len) {
  if (pos + len > text.size()) return std::nullopt;
  int value = 0;
  auto [p, ec] = std::from_chars(text.data() + pos, text.data() + pos + len, value);
  if (ec != std::errc() || p != text.data() + pos + len) return std::nullopt;
  return value;
}

std::optional<Timestamp> civil_seconds(int y, int m, int d, int hh, int mm, int ss) {
  const year_month_day ymd{year{y}, month{static_cast<unsigned>(m)}, day{static_cast<unsigned>(d)}};
  if (!ymd.ok() || hh < 0 || hh > 23 || mm < 0 || mm > 59 || ss < 0 || ss > 60) return std::nullopt;
  const auto days = sys_days{ymd}.time_since_epoch().count();
  return static_cast<Timestamp>(days) * 86400 + hh * 3600 + mm * 60 + ss;
}

year_month_day civil(Timestamp t) {
  return year_month_day{sys_days{days{static_cast<int>(t >= 0 ? t / 86400 : (t - 86399) / 86400)}}};
}

std::optional<year_month> parse_month(std::string_view text) {
  if (text.size() != 7 || text[4] != '-') return std::nullopt;
  auto y = read_int(text, 0, 4);
  auto m = read_int(text, 5, 2);
  if (!y || !m || *m < 1 || *m > 12) return std::nullopt;
  return year{*y} / month{static_cast<unsigned>(*m)};
}

}  // namespace

std::optional<Timestamp> parse_time(std::string_view text) {
  if (text.empty()) return std::nullopt;
  if (std::all_of(text.begin(), text.end(), [](char c) { return (c >= '0' && c <= '9') || c == '-'; }) &&
      text.find('-', 1) == std::string_view::npos) {
    Timestamp value = 0;
    auto [p, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
    if (ec == std::errc() && p == text.data() + text.size()) return value;
    return std::nullopt;
  }
  if (text.size() < 10 || text[4] != '-' || text[7] != '-') return std::nullopt;
  auto y = read_int(text, 0, 4);
  auto mo = read_int(text, 5, 2);
  auto d = read_int(text, 8, 2);
  if (!y || !mo || !d) return std::nullopt;
  if (text.size() == 10) return civil_seconds(*y, *mo, *d, 0, 0, 0);
  std::string_view rest = text.substr(10);
  if (rest.back() == 'Z') rest.remove_suffix(1);
  if (rest.size() != 9 || (rest[0] != 'T' && rest[0] != ' ') || rest[3] != ':' || rest[6] != ':') return std::nullopt;
  auto hh = read_int(rest, 1, 2);
  auto mm = read_int(rest, 4, 2);
  auto ss = read_int(rest, 7, 2);
  if (!hh || !mm || !ss) return std::nullopt;
  return civil_seconds(*y, *mo, *d, *hh, *mm, *ss);
}

std::string format_time(Timestamp t) {
  const auto ymd = civil(t);
  const Timestamp sod = ((t % 86400) + 86400) % 86400;
  char buf[32];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02uT%02lld:%02lld:%02lldZ", static_cast<int>(ymd.year()),
                static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()),
                static_cast<long long>(sod / 3600), static_cast<long long>(sod / 60 % 60),
                static_cast<long long>(sod % 60));
  return buf;
}

std::string format_date(Timestamp t) { return format_time(t).substr(0, 10); }

std::vector<Timestamp> read_schedule(std::istream& in) {
  std::vector<Timestamp> out;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos) continue;
    auto last = line.find_last_not_of(" \t\r");
    auto t = parse_time(std::string_view(line).substr(first, last - first + 1));
    if (!t) throw InputError("schedule line " + std::to_string(line_no) + ": cannot parse '" + line + "'");
    out.push_back(*t);
  }
  std::sort(out.begin(), out.end());
  for (std::size_t i = 1; i < out.size(); ++i) {
    if (out[i] < out[i - 1] + kWindowLength) {
      throw ScheduleConflict("schedule hours " + format_time(out[i - 1]) + " and " + format_time(out[i]) + " overlap");
    }
  }
  return out;
}

std::vector<Timestamp> monthly_sampling_schedule(std::string_view first_month, std::string_view last_month,
                                                 std::uint64_t seed) {
  auto first = parse_month(first_month);
  auto last = parse_month(last_month);
  if (!first || !last) throw ConfigError("months must be YYYY-MM");
  if (*last < *first) throw ConfigError("last month precedes first month");

  Rng rng(seed);
  std::vector<Timestamp> out;
  for (auto ym = *first; ym <= *last; ym += months{1}) {
    const unsigned month_days = static_cast<unsigned>((ym / std::chrono::last).day());
    const unsigned starts[] = {1, 8, 15, 22};
    for (int w = 0; w < 4; ++w) {
      const unsigned end_day = w == 3 ? month_days : starts[w] + 6;
      const Timestamp lo = *civil_seconds(static_cast<int>(ym.year()), static_cast<int>(static_cast<unsigned>(ym.month())),
                                          static_cast<int>(starts[w]), 0, 0, 0);
      const Timestamp span = static_cast<Timestamp>(end_day - starts[w] + 1) * 86400 - kWindowLength;
      out.push_back(lo + static_cast<Timestamp>(rng.below(static_cast<std::uint64_t>(span) + 1)));
    }
  }
  return out;
}

std::vector<Timestamp> daily_sampling_schedule(Timestamp first_day, int days, int per_day, std::uint64_t seed) {
  if (days <= 0 || per_day <= 0) throw ConfigError("days and per_day must be positive");
  if (per_day > 24) throw ConfigError("at most 24 full hours fit in a day");
  Rng rng(seed);
  std::vector<Timestamp> out;
  const Timestamp day0 = first_day - ((first_day % 86400) + 86400) % 86400;
  for (int d = 0; d < days; ++d) {
    // Split the day into per_day equal slots and place one hour in each so
    // the hours never overlap.
    const Timestamp slot = 86400 / per_day;
    for (int k = 0; k < per_day; ++k) {
      const Timestamp lo = day0 + static_cast<Timestamp>(d) * 86400 + k * slot;
      out.push_back(lo + static_cast<Timestamp>(rng.below(static_cast<std::uint64_t>(slot - kWindowLength) + 1)));
    }
  }
  return out;
}

}  // namespace rootspoof
