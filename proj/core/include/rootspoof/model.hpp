#pragma once

// Shared domain types for the spoof-detection pipeline.
//
// Everything in here is plain value data. Observations are grouped into
// hourly windows (one vantage point, one root letter, one sampled hour) and
// every downstream stage consumes those windows.

#include <array>
#include <compare>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "rootspoof/errors.hpp"

namespace rootspoof {

/// Seconds since the Unix epoch, UTC.
using Timestamp = std::int64_t;

/// Round-trip times are decimal milliseconds.
using Millis = double;

inline constexpr Timestamp kWindowLength = 3600;
inline constexpr int kLetterCount = 13;

enum class Letter : std::uint8_t { A, B, C, D, E, F, G, H, I, J, K, L, M };

char letter_char(Letter letter);
std::optional<Letter> parse_letter(std::string_view text);
/// Throws InputError when `text` is not a single letter A-M (case-insensitive).
Letter letter_from(std::string_view text);
inline std::size_t letter_index(Letter letter) { return static_cast<std::size_t>(letter); }
inline Letter letter_at(std::size_t index) { return static_cast<Letter>(index); }
std::array<Letter, kLetterCount> all_letters();

struct Ipv4 {
  std::uint32_t value = 0;

  static std::optional<Ipv4> parse(std::string_view text);
  std::string str() const;
  auto operator<=>(const Ipv4&) const = default;
};

/// An IPv4 /24 network. The low 8 bits are always zero.
class Prefix24 {
 public:
  Prefix24() = default;
  explicit Prefix24(Ipv4 any_address) : network_(any_address.value & 0xFFFFFF00u) {}

  /// Accepts "a.b.c.0/24", "a.b.c.d/24" or a bare address; other lengths are rejected.
  static std::optional<Prefix24> parse(std::string_view text);
  bool contains(Ipv4 address) const { return (address.value & 0xFFFFFF00u) == network_; }
  std::uint32_t network() const { return network_; }
  std::string str() const;
  auto operator<=>(const Prefix24&) const = default;

 private:
  std::uint32_t network_ = 0;
};

struct GeoCoord {
  double latitude = 0;
  double longitude = 0;
  auto operator<=>(const GeoCoord&) const = default;
};

struct VantagePoint {
  std::string vp_id;
  Prefix24 public_prefix;
  std::uint32_t asn = 0;
  std::string country;  // ISO 3166-1 alpha-2, upper case; empty when unknown
  std::optional<GeoCoord> coordinates;

  bool operator==(const VantagePoint&) const = default;
};

struct ServiceLetter {
  Letter letter;
  Ipv4 service_address;
  bool icmp_responsive;
};

/// The thirteen root services with the IPv4 service addresses in use over
/// the measured period. G never answers ICMP echo.
const std::array<ServiceLetter, kLetterCount>& root_letters();
const ServiceLetter& service_letter(Letter letter);

enum class DnsOutcome : std::uint8_t { answered, timeout, error };

struct DnsObservation {
  std::string vp_id;
  Letter letter = Letter::A;
  Timestamp timestamp = 0;
  DnsOutcome outcome = DnsOutcome::timeout;
  std::optional<std::string> server_id;
  std::optional<Millis> rtt;

  auto operator<=>(const DnsObservation&) const = default;
};

struct PingObservation {
  std::string vp_id;
  Letter letter = Letter::A;
  Timestamp timestamp = 0;
  std::optional<Millis> rtt;  // absent on loss

  auto operator<=>(const PingObservation&) const = default;
};

struct Hop {
  int ttl = 0;
  std::optional<Ipv4> responder;  // absent for a non-responding ("*") hop
  auto operator<=>(const Hop&) const = default;
};

struct TracerouteObservation {
  std::string vp_id;
  Letter letter = Letter::A;
  Timestamp timestamp = 0;
  std::vector<Hop> hops;
  bool reached = false;

  auto operator<=>(const TracerouteObservation&) const = default;
};

/// Throw InvariantViolation when the record breaks its type invariants.
void check_invariants(const DnsObservation& obs);
void check_invariants(const PingObservation& obs);
void check_invariants(const TracerouteObservation& obs);

/// Last responding hop strictly before the service address. Non-responding
/// hops are skipped. Empty when the traceroute did not reach the service or
/// no responding hop precedes it.
std::optional<Ipv4> penultimate_hop(const TracerouteObservation& trace);

struct ObservationSet {
  std::vector<DnsObservation> dns;
  std::vector<PingObservation> ping;
  std::vector<TracerouteObservation> traceroute;
};

struct HourlyWindow {
  std::string vp_id;
  Letter letter = Letter::A;
  Timestamp window_start = 0;
  std::vector<DnsObservation> dns;
  std::vector<PingObservation> ping;
  std::vector<TracerouteObservation> traceroute;

  std::size_t size() const { return dns.size() + ping.size() + traceroute.size(); }
  bool operator==(const HourlyWindow&) const = default;
};

/// Groups observations into half-open hourly windows [start, start + 3600).
///
/// Observations outside every scheduled hour are dropped and empty windows
/// are omitted. Output is ordered by (vp_id, letter, window_start) and the
/// observations inside each window are in their natural sort order, so the
/// result does not depend on input order. Throws ScheduleConflict when two
/// scheduled hours overlap.
std::vector<HourlyWindow> build_windows(const ObservationSet& observations,
                                        std::span<const Timestamp> schedule);

// ---------------------------------------------------------------------------
// Verdicts

enum class Classification : std::uint8_t { valid, overt_spoofed, covert_delayed, timeout, insufficient };

enum class Mechanism : std::uint8_t { anycast, non_anycast, injection, proxy };

std::string_view to_string(Classification c);
std::string_view to_string(Mechanism m);
std::string_view to_string(DnsOutcome o);
std::optional<Classification> parse_classification(std::string_view text);
std::optional<Mechanism> parse_mechanism(std::string_view text);
std::optional<DnsOutcome> parse_outcome(std::string_view text);

struct OvertEvidence {
  std::vector<std::string> observed_server_ids;  // sorted multiset
  std::vector<bool> matched;                     // parallel to observed_server_ids
  std::optional<std::string> first_unmatched;    // earliest atypical id by timestamp
  std::vector<std::string> unmatched_ids;        // distinct atypical ids, sorted
  std::size_t n_matched = 0;
  std::size_t n_unmatched = 0;
  /// True when authentic and atypical ids were both seen in the window.
  bool mixed = false;
  /// Outcome under the alternative rule where atypical ids must be a strict majority.
  bool majority_atypical = false;

  bool operator==(const OvertEvidence&) const = default;
};

struct LatencyStats {
  Millis median_dns = 0;
  Millis median_ping = 0;
  Millis mad_dns = 0;
  Millis mad_ping = 0;
  Millis delta = 0;
  std::size_t n_dns = 0;
  std::size_t n_ping = 0;
  /// DNS samples dropped because they came from another anycast site.
  std::size_t n_dns_excluded = 0;
  std::optional<std::string> site;

  bool operator==(const LatencyStats&) const = default;
};

struct MechanismEvidence {
  std::vector<Ipv4> penultimate_hops;  // from reached traceroutes, in time order
  bool foreign_hop = false;
  bool rtt_equal = false;
  bool low_confidence = false;
  std::optional<bool> reached_server;  // set by server-log refinement

  bool operator==(const MechanismEvidence&) const = default;
};

struct Evidence {
  std::optional<OvertEvidence> overt;
  std::optional<LatencyStats> latency;
  std::optional<MechanismEvidence> mechanism;
  /// Why latency statistics are missing, e.g. "too_few_ping" or "no_icmp".
  std::optional<std::string> latency_note;
  /// "dns_slower" or "ping_slower" for covert delayers.
  std::optional<std::string> delay_direction;

  bool operator==(const Evidence&) const = default;
};

struct Verdict {
  std::string vp_id;
  Letter letter = Letter::A;
  Timestamp window_start = 0;
  Classification classification = Classification::insufficient;
  std::optional<Mechanism> mechanism;
  std::optional<std::string> spoofer_cluster;
  Evidence evidence;

  bool operator==(const Verdict&) const = default;
};

/// Mechanism only on overt_spoofed verdicts.
void check_invariants(const Verdict& verdict);

/// Stable pipeline ordering: (vp_id, letter, window_start).
bool verdict_order(const Verdict& a, const Verdict& b);

/// Overt spoofing is the only classification counted as spoofed; covert
/// delayers are counted as valid answers.
inline bool is_spoofed(const Verdict& v) { return v.classification == Classification::overt_spoofed; }
inline bool is_valid_answer(const Verdict& v) {
  return v.classification == Classification::valid || v.classification == Classification::covert_delayed;
}

// ---------------------------------------------------------------------------
// Server-side records

struct ServerLogRecord {
  Timestamp timestamp = 0;
  Prefix24 source_prefix;
  std::string query_type;  // e.g. "CH TXT"
  std::string qname;       // e.g. "hostname.bind"
  Letter letter = Letter::B;

  auto operator<=>(const ServerLogRecord&) const = default;
};

inline constexpr std::string_view kChaosQueryType = "CH TXT";
inline constexpr std::string_view kServerIdQname = "hostname.bind";

}  // namespace rootspoof
