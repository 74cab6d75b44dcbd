#include "rootspoof/mechanism.hpp"

#include <algorithm>
#include <map>
#include <tuple>

namespace rootspoof {

void PenultimateHopSet::merge(const PenultimateHopSet& other) {
  for (std::size_t i = 0; i < hops.size(); ++i) hops[i].insert(other.hops[i].begin(), other.hops[i].end());
}

void PenultimateHopSet::add_window(const HourlyWindow& window) {
  for (const auto& trace : window.traceroute) {
    if (auto hop = penultimate_hop(trace)) hops[letter_index(window.letter)].insert(*hop);
  }
}

void PenultimateHopSet::add_known(const KnownSiteList& known_sites) {
  for (auto letter : all_letters()) {
    const auto& known = known_sites.at(letter).penultimate_hops;
    hops[letter_index(letter)].insert(known.begin(), known.end());
  }
}

PenultimateHopSet build_penultimate_set(std::span<const Verdict> verdicts, std::span<const HourlyWindow> windows,
                                        const KnownSiteList* known_sites) {
  using Key = std::tuple<std::string_view, Letter, Timestamp>;
  std::map<Key, bool> authentic;
  for (const auto& v : verdicts) authentic[Key{v.vp_id, v.letter, v.window_start}] = is_valid_answer(v);

  PenultimateHopSet set;
  for (const auto& w : windows) {
    auto it = authentic.find(Key{w.vp_id, w.letter, w.window_start});
    if (it != authentic.end() && it->second) set.add_window(w);
  }
  if (known_sites) set.add_known(*known_sites);
  return set;
}

bool rtt_equal(const LatencyStats& stats, const CovertConfig& config) {
  const double tolerance =
      std::max(config.absolute_floor_ms, config.relative_threshold * std::min(stats.median_dns, stats.median_ping));
  return stats.delta <= tolerance;
}

MechanismResult classify_mechanism(const HourlyWindow& window, const PenultimateHopSet& hopset,
                                   const std::optional<LatencyStats>& stats, const CovertConfig& config) {
  MechanismResult result;
  auto& ev = result.evidence;
  for (const auto& trace : window.traceroute) {
    if (auto hop = penultimate_hop(trace)) ev.penultimate_hops.push_back(*hop);
  }
  const auto& legit = hopset.at(window.letter);
  ev.foreign_hop = !ev.penultimate_hops.empty() && std::none_of(ev.penultimate_hops.begin(), ev.penultimate_hops.end(),
                                                                [&](Ipv4 h) { return legit.count(h) > 0; });
  ev.rtt_equal = stats && rtt_equal(*stats, config);
  ev.low_confidence = ev.penultimate_hops.empty() || legit.empty() || !stats;

  if (!ev.low_confidence && ev.foreign_hop && ev.rtt_equal) result.mechanism = Mechanism::anycast;
  return result;
}

Mechanism refine_with_server_log(Mechanism mechanism, bool reached_server) {
  if (mechanism == Mechanism::anycast) return mechanism;
  return reached_server ? Mechanism::injection : Mechanism::proxy;
}

}  // namespace rootspoof
