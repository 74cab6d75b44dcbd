#pragma once

// Population-level reductions over verdicts.
//
// The unit is a vantage point in one sampled hour (an epoch). A VP is
// spoofed in an epoch when at least one letter is overt_spoofed; otherwise it
// answered when some letter gave a valid or covert_delayed answer; otherwise
// it timed out when some letter timed out. VPs with nothing but insufficient
// windows are not active.

#include <array>
#include <optional>
#include <ostream>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "rootspoof/model.hpp"
#include "rootspoof/records.hpp"

namespace rootspoof {

enum class VpStatus : std::uint8_t { spoofed, answered, timeout, insufficient };

struct EpochSummary {
  Timestamp window_start = 0;
  std::string date;
  std::size_t n_active_vps = 0;
  std::size_t n_timeout = 0;
  std::size_t n_answered = 0;
  std::size_t n_valid = 0;           // includes covert delayers
  std::size_t n_covert_delayed = 0;  // VPs with a covert_delayed letter and no spoofed letter
  std::size_t n_spoofed = 0;
  std::size_t n_insufficient = 0;    // not part of n_active_vps
  double fraction_timeout = 0;
  double fraction_spoofed = 0;
  double fraction_covert_delayed = 0;
  /// Per letter: VPs spoofed on that letter and VPs active on it.
  std::array<std::size_t, kLetterCount> spoofed_per_letter{};
  std::array<std::size_t, kLetterCount> active_per_letter{};

  /// Throws InvariantViolation unless answered = valid + spoofed and
  /// active = answered + timeout.
  void check() const;
  bool operator==(const EpochSummary&) const = default;
};

/// Verdicts must share one window_start; throws InputError otherwise.
EpochSummary epoch_summary(std::span<const Verdict> verdicts);

/// One summary per distinct window_start, in time order.
std::vector<EpochSummary> summarize_epochs(std::span<const Verdict> verdicts, unsigned workers = 0);

struct TrendPoint {
  Timestamp window_start = 0;
  std::string date;
  std::size_t n_active_vps = 0;
  double fraction_spoofed = 0;
  std::array<std::optional<double>, kLetterCount> per_letter{};  // empty when no VP was active on the letter
};

std::vector<TrendPoint> trend(std::span<const EpochSummary> epochs);

/// The `size` VPs active in the most epochs; ties go to the smaller vp_id.
std::set<std::string> select_cohort(std::span<const Verdict> verdicts, std::size_t size);

/// The trend restricted to `cohort`. Throws ConfigError on an empty cohort.
std::vector<TrendPoint> cohort_trend(std::span<const Verdict> verdicts, const std::set<std::string>& cohort,
                                     unsigned workers = 0);

struct CountryRow {
  std::string country;
  std::size_t n_active = 0;
  std::size_t n_spoofed = 0;
  double fraction = 0;
  bool undersampled = false;       // fewer than min_vps active, left out of the ranking
  std::optional<std::size_t> rank;  // 1 = largest fraction
};

struct CountryReport {
  std::vector<CountryRow> rows;  // ranked rows first, then undersampled ones by country code
  CountryRow unknown;            // VPs missing from the index or without a country
  std::size_t min_vps = 10;
};

/// Counts VP-epochs, so spoofed counts over rows plus `unknown` equal the sum
/// of n_spoofed over the epochs.
CountryReport country_fractions(std::span<const Verdict> verdicts, const VpIndex& vps, std::size_t min_vps = 10);

struct LetterCountCdf {
  std::size_t n_vps = 0;                           // spoofed VP-epochs
  std::array<std::size_t, kLetterCount> counts{};  // counts[k-1]: VP-epochs with k spoofed letters
  std::array<double, kLetterCount> cdf{};          // all zero when n_vps is 0
};

LetterCountCdf letter_count_cdf(std::span<const Verdict> verdicts);

/// Covert-delayer VP-epochs and how many of them were delayed on two or more
/// letters in the same hour. Reported only; never used to filter detections.
struct CovertCorroboration {
  std::size_t n_delayers = 0;
  std::size_t n_multi_letter = 0;
  double fraction_multi_letter = 0;
};

CovertCorroboration covert_corroboration(std::span<const Verdict> verdicts);

struct MechanismPoint {
  Timestamp window_start = 0;
  std::string date;
  std::size_t n_spoofed = 0;
  std::size_t n_anycast = 0;  // VPs with at least one anycast spoof
  std::size_t n_non_anycast = 0;
  double non_anycast_share = 0;
};

/// Epochs without spoofed VPs are left out.
std::vector<MechanismPoint> mechanism_trend(std::span<const Verdict> verdicts);

struct CdfPoint {
  double value = 0;
  double cumulative = 0;
};

struct LetterImprovement {
  Letter letter = Letter::A;
  std::vector<CdfPoint> cdf;  // one point per window, sorted by value
  double fraction_nonpositive = 0;
};

struct LatencyImprovementReport {
  std::vector<LetterImprovement> letters;  // letters with at least one value
  std::size_t n_windows = 0;
  double fraction_nonpositive = 0;  // across letters
  std::size_t n_excluded = 0;       // spoofed windows without both medians
  std::size_t n_no_icmp = 0;        // spoofed windows on letters that never answer ping
};

/// median_ping - median_dns over spoofed windows; positive means the spoofed
/// answer arrived sooner than the real service would have.
LatencyImprovementReport latency_improvement(std::span<const Verdict> verdicts);

struct ReportOptions {
  std::size_t cohort_size = 3000;
  std::size_t min_country_vps = 10;
  unsigned workers = 0;
};

struct AggregateReport {
  std::vector<EpochSummary> epochs;
  std::vector<TrendPoint> trend;
  std::set<std::string> cohort;
  std::vector<TrendPoint> cohort_trend;
  CountryReport countries;
  LetterCountCdf letter_cdf;
  CovertCorroboration covert;
  std::vector<MechanismPoint> mechanisms;
  LatencyImprovementReport latency;
};

AggregateReport build_report(std::span<const Verdict> verdicts, const VpIndex& vps, const ReportOptions& options = {});

/// Stable, sorted JSON with every section above except the cohort members.
void write_report_json(std::ostream& out, const AggregateReport& report);

// Flat CSV series. Column names are part of the output contract; see
// docs/schemas.md.
void write_epochs_csv(std::ostream& out, std::span<const EpochSummary> epochs);
void write_trend_csv(std::ostream& out, std::span<const TrendPoint> points, std::string_view series_name);
void write_countries_csv(std::ostream& out, const CountryReport& report);
void write_letter_cdf_csv(std::ostream& out, const LetterCountCdf& cdf);
void write_mechanism_csv(std::ostream& out, std::span<const MechanismPoint> points);
void write_latency_csv(std::ostream& out, const LatencyImprovementReport& report);

}  // namespace rootspoof
