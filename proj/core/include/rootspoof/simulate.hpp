#pragma once

// Labelled synthetic measurements: client-side observations, the matching
// authoritative-server log and per-window ground truth, generated from a
// scenario file. A fixed seed and config give byte-identical output.

#include <array>
#include <cstdint>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "rootspoof/model.hpp"
#include "rootspoof/profiles.hpp"
#include "rootspoof/random.hpp"

namespace rootspoof {

enum class AdversaryKind : std::uint8_t {
  honest,
  overt_proxy,
  overt_injector,
  anycast_hijacker,
  covert_delayer,
  flapper,
};

std::string_view to_string(AdversaryKind k);
std::optional<AdversaryKind> parse_adversary_kind(std::string_view text);

/// Path impairments applied on top of the adversary behaviour.
enum class Impairment : std::uint8_t {
  none,
  blackhole,     // every DNS query dropped before the server
  reply_lost,    // every DNS reply lost; queries reach the server
  stale_prefix,  // VP metadata lists a /24 other than the one queries leave from
};

std::string_view to_string(Impairment i);

/// Added-delay distribution for covert delayers.
struct DelaySpec {
  std::vector<double> values;  // assigned to the group's VPs in order, cycling
  std::optional<double> mean, sd;
  std::optional<double> min, max;

  double draw(std::size_t member, Rng& rng) const;
};

struct AdversaryGroup {
  std::string label;
  AdversaryKind kind = AdversaryKind::honest;
  std::optional<std::size_t> count;
  std::optional<double> probability;
  std::vector<std::string> spoof_server_ids;  // one is picked per VP
  bool mimic = false;                          // spoof with an id of the VP's own site
  DelaySpec added_delay;
  std::string affected_letters;  // empty = every simulated letter
  std::optional<std::pair<int, int>> affected_letter_count;
  std::optional<bool> drop_query;
  Impairment impairment = Impairment::none;
  double reach_probability = 1.0;  // reply_lost only

  /// Whether queries intercepted by this adversary still reach the server.
  bool drops_query() const;
};

struct SiteTemplate {
  std::string code;
  std::vector<std::string> server_ids;
  Ipv4 penultimate_hop;
};

struct ScenarioConfig {
  std::string name;
  std::uint64_t seed = 1;
  std::size_t n_vps = 0;
  std::vector<Letter> letters;
  std::vector<Timestamp> hours;
  std::vector<Letter> server_log_letters{Letter::B};
  std::vector<AdversaryGroup> groups;

  double jitter_mad_ms = 1.5;
  double spike_rate = 0;
  double spike_mean_ms = 20;
  double dns_loss = 0;
  double ping_loss = 0;
  double catchment_flip_rate = 0;

  std::optional<double> fixed_base_rtt_ms;
  double base_rtt_floor_ms = 5;
  double footprint_scale_ms = 300;
  double local_rtt_min_ms = 0.5;  // proxies, injectors and hijackers answer from nearby
  double local_rtt_max_ms = 5;

  std::size_t background_log_records = 0;

  Timestamp dns_interval = 240;
  Timestamp ping_interval = 240;
  Timestamp traceroute_interval = 1800;

  /// Per-letter site layout; letters left empty get the built-in layout.
  std::array<std::vector<SiteTemplate>, kLetterCount> topology;

  /// Throws ConfigError with the first problem found.
  void validate() const;
};

/// Reads the JSON scenario format documented in docs/schemas.md and
/// validates it. Throws ConfigError.
ScenarioConfig load_scenario(std::istream& in);

/// Built-in site layout for a letter: site codes, ids in the operator's
/// format, one penultimate hop per site.
std::vector<SiteTemplate> default_topology(Letter letter);

struct GroundTruthWindow {
  std::string vp_id;
  Letter letter = Letter::A;
  Timestamp window_start = 0;
  AdversaryKind kind = AdversaryKind::honest;
  Impairment impairment = Impairment::none;
  Classification label = Classification::insufficient;
  std::optional<Mechanism> mechanism;  // proxy, injection or anycast for spoofed windows
  std::size_t queries_sent = 0;
  std::size_t queries_reached = 0;  // log records written for this window
  std::optional<double> added_delay_ms;

  bool operator==(const GroundTruthWindow&) const = default;
};

struct SimulationOutput {
  ObservationSet observations;  // each stream sorted
  std::vector<VantagePoint> vps;
  std::vector<ServerLogRecord> server_log;  // sorted by timestamp
  std::vector<Timestamp> schedule;
  std::vector<GroundTruthWindow> truth;  // (vp_id, letter, window_start) order
  KnownSiteList known_sites;             // the topology actually used
};

SimulationOutput generate(const ScenarioConfig& config, unsigned workers = 0);

std::string serialize(const GroundTruthWindow& truth);
/// Strict; throws InputError on a bad line.
std::vector<GroundTruthWindow> read_ground_truth(std::istream& in);

struct ClassScore {
  std::size_t true_positive = 0;
  std::size_t false_positive = 0;
  std::size_t false_negative = 0;
  std::optional<double> precision;
  std::optional<double> recall;
};

struct ScoreReport {
  /// confusion[truth][predicted], indexed by Classification.
  std::array<std::array<std::size_t, 5>, 5> confusion{};
  std::map<std::string, ClassScore> per_class;
  ClassScore spoof_windows;
  ClassScore spoof_vps;  // a VP counts as spoofed when any of its windows is
  std::size_t mechanism_total = 0;  // correctly detected spoofed windows with a mechanism
  std::size_t mechanism_agree = 0;  // coarse agreement (anycast vs not) or exact after refinement
  std::size_t missing_verdicts = 0;
  std::size_t extra_verdicts = 0;
};

ScoreReport score(std::span<const Verdict> verdicts, std::span<const GroundTruthWindow> truth);
void write_score_json(std::ostream& out, const ScoreReport& report);

}  // namespace rootspoof
