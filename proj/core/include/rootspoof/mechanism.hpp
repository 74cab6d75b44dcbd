#pragma once

// Spoofing-mechanism attribution for overt spoofs.
//
// A rogue anycast site captures all traffic to the service prefix, so its
// traceroutes end behind a router no authentic VP uses and DNS and ICMP see
// the same latency. Proxies and injectors only touch DNS.

#include <array>
#include <optional>
#include <set>
#include <span>

#include "rootspoof/detect_covert.hpp"
#include "rootspoof/model.hpp"
#include "rootspoof/profiles.hpp"

namespace rootspoof {

struct PenultimateHopSet {
  std::array<std::set<Ipv4>, kLetterCount> hops;

  const std::set<Ipv4>& at(Letter letter) const { return hops[letter_index(letter)]; }
  bool contains(Letter letter, Ipv4 hop) const { return at(letter).count(hop) > 0; }
  void merge(const PenultimateHopSet& other);
  /// Adds the penultimate hops of the window's reached traceroutes.
  void add_window(const HourlyWindow& window);
  void add_known(const KnownSiteList& known_sites);
  bool operator==(const PenultimateHopSet&) const = default;
};

/// Penultimate hops of reached traceroutes from windows with authentic
/// answers (valid or covert_delayed). Verdicts are matched to windows by
/// (vp_id, letter, window_start); windows without a verdict are ignored.
/// Known-site hops, when given, are added to their letter's set.
PenultimateHopSet build_penultimate_set(std::span<const Verdict> verdicts, std::span<const HourlyWindow> windows,
                                        const KnownSiteList* known_sites = nullptr);

/// DNS and ICMP latency agree: delta <= max(absolute_floor, relative_threshold * min(medians)).
bool rtt_equal(const LatencyStats& stats, const CovertConfig& config = {});

struct MechanismResult {
  Mechanism mechanism = Mechanism::non_anycast;
  MechanismEvidence evidence;
};

/// anycast iff the window has reached traceroutes, none of their penultimate
/// hops is in the authentic set, and DNS/ICMP latency agree. Without a
/// reached traceroute, without an authentic hop set for the letter, or
/// without latency statistics the answer is non_anycast at low confidence.
MechanismResult classify_mechanism(const HourlyWindow& window, const PenultimateHopSet& hopset,
                                   const std::optional<LatencyStats>& stats, const CovertConfig& config = {});

/// Server-side refinement: non_anycast splits into proxy (query never
/// reached the server) and injection (it did). anycast is kept.
Mechanism refine_with_server_log(Mechanism mechanism, bool reached_server);

}  // namespace rootspoof
