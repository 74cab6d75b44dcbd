#pragma once

// Covert-delayer detection: a window whose server IDs look authentic but
// whose DNS latency departs from ICMP latency to the same service address.

#include <span>
#include <string>
#include <variant>

#include "rootspoof/model.hpp"
#include "rootspoof/profiles.hpp"

namespace rootspoof {

struct CovertConfig {
  double relative_threshold = 0.2;  // delta must exceed this fraction of the smaller median
  double mad_multiplier = 3.0;      // delta must exceed this many MADs of the noisier side
  Millis absolute_floor_ms = 10.0;  // delta must exceed this
  std::size_t min_samples = 5;      // per side

  /// Throws ConfigError on non-positive values.
  void validate() const;
};

/// Middle value; mean of the two middle values for even sizes. Empty input is 0.
double median(std::span<const double> values);
/// Unscaled median absolute deviation: median(|x - median(x)|).
double median_absolute_deviation(std::span<const double> values);

struct StatsInsufficient {
  std::string reason;  // too_few_dns, too_few_ping, no_icmp, no_modal_site
};

using StatsResult = std::variant<LatencyStats, StatsInsufficient>;

/// Latency statistics for a window with authentic server IDs.
///
/// DNS samples whose site label differs from the window's modal site are
/// dropped first; without a strict-majority site the window is insufficient.
/// Letters that do not answer ICMP are never evaluated.
StatsResult latency_stats(const HourlyWindow& window, const PatternProfile& profile, const CovertConfig& config = {});

/// Statistics over the answers carrying atypical server IDs only. Used for
/// spoofed windows, where the spoofer's own latency is what matters.
StatsResult latency_stats_spoofed(const HourlyWindow& window, const PatternProfile& profile,
                                  const CovertConfig& config = {});

/// All three conditions with strict inequality:
///   delta > relative_threshold * min(median_dns, median_ping)
///   delta > mad_multiplier * max(mad_dns, mad_ping)
///   delta > absolute_floor_ms
bool is_covert_delayed(const LatencyStats& stats, const CovertConfig& config = {});

enum class DelayDirection { dns_slower, ping_slower };

struct DelayReading {
  DelayDirection direction;
  Millis signed_difference;  // median_dns - median_ping
};

/// dns_slower only when the DNS median is strictly larger.
DelayReading delay_direction(const LatencyStats& stats);
std::string_view to_string(DelayDirection d);

/// Applies the covert-delay test to a verdict already classified valid by
/// the server-ID check. Other classifications pass through unchanged apart
/// from latency evidence, which is attached whenever it can be computed.
void refine_covert(Verdict& verdict, const HourlyWindow& window, const PatternProfile& profile,
                   const CovertConfig& config = {});

}  // namespace rootspoof
