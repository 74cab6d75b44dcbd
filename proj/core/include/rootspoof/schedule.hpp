#pragma once

#include <cstdint>
#include <istream>
#include <string>
#include <string_view>
#include <vector>

#include "rootspoof/model.hpp"

namespace rootspoof {

/// Parses "2019-01-10T03:52:49Z", "2019-01-10 03:52:49", "2019-01-10" or a
/// plain integer count of seconds. Returns nullopt on anything else.
std::optional<Timestamp> parse_time(std::string_view text);

/// "2019-01-10T03:52:49Z"
std::string format_time(Timestamp t);

/// "2019-01-10"
std::string format_date(Timestamp t);

/// Reads one window start per line; blank lines and '#' comments ignored.
/// Throws InputError on an unparseable line and ScheduleConflict on overlap.
std::vector<Timestamp> read_schedule(std::istream& in);

/// Four sampled hours per month, one in each of the day ranges 1-7, 8-14,
/// 15-21 and 22-end. Each hour starts at a random second inside its range and
/// every hour fits inside the range. Months are "YYYY-MM", inclusive.
std::vector<Timestamp> monthly_sampling_schedule(std::string_view first_month, std::string_view last_month,
                                                 std::uint64_t seed);

/// `per_day` non-overlapping full hours per day, each starting at a random
/// offset within the day. Used for validation weeks.
std::vector<Timestamp> daily_sampling_schedule(Timestamp first_day, int days, int per_day, std::uint64_t seed);

}  // namespace rootspoof
