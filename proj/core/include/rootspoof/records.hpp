#pragma once

// Canonical newline-delimited record files (one JSON object per line) for
// observations, vantage points, server-side logs and verdicts. The field
// layout is documented in docs/schemas.md.

#include <cstddef>
#include <istream>
#include <map>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "rootspoof/model.hpp"

namespace rootspoof {

/// Round to whole microseconds. Idempotent.
Millis quantize_rtt(double ms);

struct SkipReport {
  std::size_t skipped = 0;
  std::vector<std::string> samples;  // first few "line N: reason" entries

  void note(std::size_t line, std::string_view reason);
  static constexpr std::size_t kMaxSamples = 20;
};

template <typename T>
struct ParseResult {
  std::vector<T> records;
  SkipReport skips;
};

/// Malformed lines are counted in the skip report, never fatal. Blank lines
/// are ignored. Throws IoError only if the stream itself fails.
ParseResult<DnsObservation> parse_dns_results(std::istream& in);
ParseResult<PingObservation> parse_ping_results(std::istream& in);
ParseResult<TracerouteObservation> parse_traceroute_results(std::istream& in);
ParseResult<ServerLogRecord> parse_server_log(std::istream& in);

std::string serialize(const DnsObservation& obs);
std::string serialize(const PingObservation& obs);
std::string serialize(const TracerouteObservation& obs);
std::string serialize(const ServerLogRecord& record);
std::string serialize(const VantagePoint& vp);
std::string serialize(const Verdict& verdict);

template <typename T>
void write_records(std::ostream& out, std::span<const T> records) {
  for (const auto& r : records) out << serialize(r) << '\n';
}

template <typename T>
void write_records(std::ostream& out, const std::vector<T>& records) {
  write_records(out, std::span<const T>(records));
}

using VpIndex = std::map<std::string, VantagePoint, std::less<>>;

/// Strict: a malformed line or duplicate vp_id throws InputError.
VpIndex load_vantage_points(std::istream& in);

/// Strict: verdict files are pipeline output, so any bad line throws InputError.
std::vector<Verdict> read_verdicts(std::istream& in);
Verdict parse_verdict(std::string_view line);

}  // namespace rootspoof
