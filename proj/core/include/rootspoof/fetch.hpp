#pragma once

// Client for a paged measurement-results archive.
//
// Protocol: GET <base>/measurements/<id>/results?start=<s>&stop=<e>[&cursor=<c>]
// answers {"results": [record, ...], "count": <n>, "next": <cursor or null>}.
// Each record is one object in the canonical record format, so the fetched
// stream can go straight into parse_dns_results() and friends.

#include <chrono>
#include <cstdint>
#include <ostream>
#include <string>

#include "rootspoof/model.hpp"

namespace rootspoof {

struct FetchConfig {
  std::string base_url;  // e.g. "https://archive.example.net/api/v2"
  /// Environment variable holding the API key; sent as "Authorization: Key <key>".
  std::string api_key_env = "ROOTSPOOF_API_KEY";
  int max_attempts = 5;  // per page
  std::chrono::milliseconds initial_backoff{250};
  std::chrono::milliseconds max_backoff{8000};
  std::chrono::seconds timeout{30};
};

struct TimeRange {
  Timestamp start = 0;
  Timestamp stop = 0;  // exclusive
  bool empty() const { return stop <= start; }
};

struct FetchSummary {
  std::size_t records = 0;
  std::size_t pages = 0;
  std::size_t retries = 0;
};

/// Streams every record in the range to `out`, one per line, in server order.
/// Resumes from `cursor` when given. Transient failures (connection errors,
/// 429, 5xx) are retried with exponential backoff; once attempts run out, or
/// on any other status or a truncated page, throws FetchError carrying the
/// cursor to resume from. Records already written stay written.
FetchSummary fetch_measurements(const FetchConfig& config, std::string_view measurement_id, TimeRange range,
                                std::ostream& out, std::string cursor = {});

}  // namespace rootspoof
