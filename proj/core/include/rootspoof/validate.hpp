#pragma once

// Validation against authoritative-server query logs.
//
// Server logs keep only the /24 of each source address, so a client query is
// taken to have reached the server when a log record from the vantage
// point's /24 with the same query type and name lies within a time tolerance
// of it. One log record may vouch for several client queries.

#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "rootspoof/detect_covert.hpp"
#include "rootspoof/model.hpp"
#include "rootspoof/records.hpp"

namespace rootspoof {

struct MatchConfig {
  Timestamp tolerance_s = 240;
  std::string query_type{kChaosQueryType};
  std::string qname{kServerIdQname};
};

struct MatchResult {
  std::string vp_id;
  Letter letter = Letter::B;
  Timestamp window_start = 0;
  std::size_t queries_sent = 0;
  std::size_t queries_matched = 0;
  bool matched = false;
  /// Another vantage point in the same hour shares this /24.
  bool prefix_collision = false;
  bool vp_unknown = false;

  bool operator==(const MatchResult&) const = default;
};

struct MatchReport {
  std::vector<MatchResult> results;  // window order
  std::size_t collisions = 0;
  std::size_t unknown_vps = 0;
};

/// Immutable index of one letter's log: per /24, sorted timestamps of the
/// records with the expected query type and name.
class ServerLogIndex {
 public:
  /// Throws InputError when the log is not sorted by timestamp.
  ServerLogIndex(std::span<const ServerLogRecord> log, Letter letter, const MatchConfig& config = {});

  Letter letter() const { return letter_; }
  /// True when some record from `prefix` lies within `tolerance` of `t`.
  bool seen(Prefix24 prefix, Timestamp t, Timestamp tolerance) const;

 private:
  Letter letter_;
  std::map<Prefix24, std::vector<Timestamp>> by_prefix_;
};

/// Client queries considered per window: the answered ones when the window
/// has any, otherwise the timed-out ones. Windows for other letters are skipped.
MatchReport match_queries(std::span<const HourlyWindow> windows, const ServerLogIndex& index, const VpIndex& vps,
                          const MatchConfig& config = {});

/// One row of the true-positive table.
struct ClassRates {
  std::size_t windows_sent = 0;
  std::size_t windows_matched = 0;
  std::size_t queries_sent = 0;
  std::size_t queries_matched = 0;
  /// Lower bound: windows with no match over all windows in the class. For
  /// not_spoofed the sense flips (matched windows over all).
  std::optional<double> tp_window;
  /// Same at query granularity.
  std::optional<double> tp_query;
};

struct HourRates {
  Timestamp window_start = 0;
  std::map<std::string, ClassRates> classes;  // timeout, spoofed, non_anycast, anycast, not_spoofed
  std::size_t not_spoofed_unmatched = 0;      // residual bucket (stale metadata, multihoming)
  std::optional<double> upper_bound_fp;
};

struct RateSpread {
  double min = 0, max = 0, q25 = 0, q50 = 0, q75 = 0;
  std::size_t hours = 0;
};

struct TruePositiveReport {
  std::vector<HourRates> hours;
  std::map<std::string, RateSpread> spread_window;  // per class, across hours
  std::map<std::string, RateSpread> spread_query;
};

/// Quantile with linear interpolation between order statistics.
double quantile(std::vector<double> values, double q);

/// Rates per sampled hour plus their spread over hours. Verdicts without a
/// match result (other letters, unknown VPs) are ignored.
TruePositiveReport true_positive_rates(std::span<const MatchResult> matches, std::span<const Verdict> verdicts);

/// Fraction of spoofed windows whose queries reached the server. Injection
/// makes this an upper bound on false positives, never a false-positive count.
/// 0 when there are no spoofed windows.
double upper_bound_false_positive(std::span<const MatchResult> matches, std::span<const Verdict> verdicts);

struct DelayerConfirmation {
  std::string vp_id;
  Timestamp window_start = 0;
  bool reached = false;
  Millis signed_difference = 0;  // median_dns - median_ping
  DelayDirection direction = DelayDirection::dns_slower;
};

struct DirectionSummary {
  std::size_t detected = 0;
  std::size_t reached = 0;
  std::optional<Millis> mean_difference;
};

struct CovertConfirmationReport {
  std::size_t n_delayers = 0;
  std::size_t n_reached = 0;
  DirectionSummary dns_slower;
  DirectionSummary ping_slower;
  std::vector<DelayerConfirmation> delayers;
  /// Delayers whose queries never reached the server, which contradicts the
  /// forward-and-delay behaviour seen in practice.
  std::vector<DelayerConfirmation> anomalous;
};

CovertConfirmationReport confirm_covert_delayers(std::span<const Verdict> verdicts,
                                                 std::span<const MatchResult> matches);

/// Splits non_anycast spoofs into proxy and injection using the match
/// results. Returns the number of verdicts refined.
std::size_t refine_mechanisms(std::span<Verdict> verdicts, std::span<const MatchResult> matches);

}  // namespace rootspoof
