#include "rootspoof/validate.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <set>
#include <tuple>

#include "rootspoof/mechanism.hpp"

namespace rootspoof {

namespace {

bool iequal(std::string_view a, std::string_view b) {
  return a.size() == b.size() && std::equal(a.begin(), a.end(), b.begin(), [](char x, char y) {
           return std::tolower(static_cast<unsigned char>(x)) == std::tolower(static_cast<unsigned char>(y));
         });
}

using WindowKey = std::tuple<std::string_view, Letter, Timestamp>;

}  // namespace

ServerLogIndex::ServerLogIndex(std::span<const ServerLogRecord> log, Letter letter, const MatchConfig& config)
    : letter_(letter) {
  for (std::size_t i = 1; i < log.size(); ++i) {
    if (log[i].timestamp < log[i - 1].timestamp) {
      throw InputError("server log is not sorted by timestamp (record " + std::to_string(i + 1) + ")");
    }
  }
  for (const auto& rec : log) {
    if (rec.letter != letter || !iequal(rec.query_type, config.query_type) || !iequal(rec.qname, config.qname)) continue;
    by_prefix_[rec.source_prefix].push_back(rec.timestamp);
  }
}

bool ServerLogIndex::seen(Prefix24 prefix, Timestamp t, Timestamp tolerance) const {
  auto it = by_prefix_.find(prefix);
  if (it == by_prefix_.end()) return false;
  const auto& times = it->second;
  auto first = std::lower_bound(times.begin(), times.end(), t - tolerance);
  return first != times.end() && *first <= t + tolerance;
}

MatchReport match_queries(std::span<const HourlyWindow> windows, const ServerLogIndex& index, const VpIndex& vps,
                          const MatchConfig& config) {
  MatchReport report;
  // Prefixes shared by several vantage points within one hour.
  std::map<std::pair<Timestamp, Prefix24>, std::set<std::string_view>> sharing;
  for (const auto& w : windows) {
    if (w.letter != index.letter()) continue;
    if (auto vp = vps.find(w.vp_id); vp != vps.end()) sharing[{w.window_start, vp->second.public_prefix}].insert(w.vp_id);
  }

  for (const auto& w : windows) {
    if (w.letter != index.letter()) continue;
    MatchResult r;
    r.vp_id = w.vp_id;
    r.letter = w.letter;
    r.window_start = w.window_start;
    auto vp = vps.find(w.vp_id);
    if (vp == vps.end()) {
      r.vp_unknown = true;
      ++report.unknown_vps;
    } else {
      r.prefix_collision = sharing[{w.window_start, vp->second.public_prefix}].size() > 1;
      if (r.prefix_collision) ++report.collisions;
    }

    const bool any_answer = std::any_of(w.dns.begin(), w.dns.end(),
                                        [](const DnsObservation& o) { return o.outcome == DnsOutcome::answered; });
    const DnsOutcome considered = any_answer ? DnsOutcome::answered : DnsOutcome::timeout;
    for (const auto& obs : w.dns) {
      if (obs.outcome != considered) continue;
      ++r.queries_sent;
      if (vp != vps.end() && index.seen(vp->second.public_prefix, obs.timestamp, config.tolerance_s)) {
        ++r.queries_matched;
      }
    }
    r.matched = r.queries_matched > 0;
    report.results.push_back(std::move(r));
  }
  return report;
}

double quantile(std::vector<double> values, double q) {
  if (values.empty()) return 0;
  std::sort(values.begin(), values.end());
  const double pos = q * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, values.size() - 1);
  return values[lo] + (values[hi] - values[lo]) * (pos - static_cast<double>(lo));
}

namespace {

std::vector<std::string> classes_of(const Verdict& v) {
  switch (v.classification) {
    case Classification::timeout: return {"timeout"};
    case Classification::overt_spoofed:
      if (v.mechanism == Mechanism::anycast) return {"spoofed", "anycast"};
      return {"spoofed", "non_anycast"};
    case Classification::valid:
    case Classification::covert_delayed: return {"not_spoofed"};
    case Classification::insufficient: return {};
  }
  return {};
}

RateSpread spread(const std::vector<double>& values) {
  RateSpread s;
  if (values.empty()) return s;
  s.min = *std::min_element(values.begin(), values.end());
  s.max = *std::max_element(values.begin(), values.end());
  s.q25 = quantile(values, 0.25);
  s.q50 = quantile(values, 0.50);
  s.q75 = quantile(values, 0.75);
  s.hours = values.size();
  return s;
}

std::map<WindowKey, const MatchResult*> index_matches(std::span<const MatchResult> matches) {
  std::map<WindowKey, const MatchResult*> out;
  for (const auto& m : matches) out[WindowKey{m.vp_id, m.letter, m.window_start}] = &m;
  return out;
}

}  // namespace

TruePositiveReport true_positive_rates(std::span<const MatchResult> matches, std::span<const Verdict> verdicts) {
  const auto by_window = index_matches(matches);
  std::map<Timestamp, HourRates> hours;
  for (const auto& v : verdicts) {
    auto it = by_window.find(WindowKey{v.vp_id, v.letter, v.window_start});
    if (it == by_window.end() || it->second->vp_unknown) continue;
    const MatchResult& m = *it->second;
    auto& hour = hours[v.window_start];
    hour.window_start = v.window_start;
    for (const auto& cls : classes_of(v)) {
      auto& rates = hour.classes[cls];
      ++rates.windows_sent;
      rates.windows_matched += m.matched ? 1 : 0;
      rates.queries_sent += m.queries_sent;
      rates.queries_matched += m.queries_matched;
    }
  }

  TruePositiveReport report;
  std::map<std::string, std::vector<double>> per_class_window, per_class_query;
  for (auto& [start, hour] : hours) {
    for (auto& [cls, r] : hour.classes) {
      const bool reach_is_correct = cls == "not_spoofed";
      if (r.windows_sent > 0) {
        const double frac = static_cast<double>(r.windows_matched) / static_cast<double>(r.windows_sent);
        r.tp_window = reach_is_correct ? frac : 1.0 - frac;
        per_class_window[cls].push_back(*r.tp_window);
      }
      if (r.queries_sent > 0) {
        const double frac = static_cast<double>(r.queries_matched) / static_cast<double>(r.queries_sent);
        r.tp_query = reach_is_correct ? frac : 1.0 - frac;
        per_class_query[cls].push_back(*r.tp_query);
      }
    }
    if (auto ns = hour.classes.find("not_spoofed"); ns != hour.classes.end()) {
      hour.not_spoofed_unmatched = ns->second.windows_sent - ns->second.windows_matched;
    }
    if (auto sp = hour.classes.find("spoofed"); sp != hour.classes.end() && sp->second.windows_sent > 0) {
      hour.upper_bound_fp =
          static_cast<double>(sp->second.windows_matched) / static_cast<double>(sp->second.windows_sent);
    }
    report.hours.push_back(std::move(hour));
  }
  for (const auto& [cls, values] : per_class_window) report.spread_window[cls] = spread(values);
  for (const auto& [cls, values] : per_class_query) report.spread_query[cls] = spread(values);
  return report;
}

double upper_bound_false_positive(std::span<const MatchResult> matches, std::span<const Verdict> verdicts) {
  const auto by_window = index_matches(matches);
  std::size_t spoofed = 0, reached = 0;
  for (const auto& v : verdicts) {
    if (!is_spoofed(v)) continue;
    auto it = by_window.find(WindowKey{v.vp_id, v.letter, v.window_start});
    if (it == by_window.end() || it->second->vp_unknown) continue;
    ++spoofed;
    reached += it->second->matched ? 1 : 0;
  }
  return spoofed == 0 ? 0.0 : static_cast<double>(reached) / static_cast<double>(spoofed);
}

CovertConfirmationReport confirm_covert_delayers(std::span<const Verdict> verdicts,
                                                 std::span<const MatchResult> matches) {
  const auto by_window = index_matches(matches);
  CovertConfirmationReport report;
  double sum_dns = 0, sum_ping = 0;
  for (const auto& v : verdicts) {
    if (v.classification != Classification::covert_delayed || !v.evidence.latency) continue;
    auto it = by_window.find(WindowKey{v.vp_id, v.letter, v.window_start});
    if (it == by_window.end()) continue;
    const auto reading = delay_direction(*v.evidence.latency);
    DelayerConfirmation d{v.vp_id, v.window_start, it->second->matched, reading.signed_difference, reading.direction};
    ++report.n_delayers;
    report.n_reached += d.reached ? 1 : 0;
    auto& side = d.direction == DelayDirection::dns_slower ? report.dns_slower : report.ping_slower;
    ++side.detected;
    side.reached += d.reached ? 1 : 0;
    (d.direction == DelayDirection::dns_slower ? sum_dns : sum_ping) += d.signed_difference;
    if (!d.reached) report.anomalous.push_back(d);
    report.delayers.push_back(std::move(d));
  }
  if (report.dns_slower.detected > 0) report.dns_slower.mean_difference = sum_dns / report.dns_slower.detected;
  if (report.ping_slower.detected > 0) report.ping_slower.mean_difference = sum_ping / report.ping_slower.detected;
  return report;
}

std::size_t refine_mechanisms(std::span<Verdict> verdicts, std::span<const MatchResult> matches) {
  const auto by_window = index_matches(matches);
  std::size_t refined = 0;
  for (auto& v : verdicts) {
    if (!is_spoofed(v) || !v.mechanism) continue;
    auto it = by_window.find(WindowKey{v.vp_id, v.letter, v.window_start});
    if (it == by_window.end() || it->second->vp_unknown) continue;
    v.mechanism = refine_with_server_log(*v.mechanism, it->second->matched);
    if (v.evidence.mechanism) v.evidence.mechanism->reached_server = it->second->matched;
    ++refined;
  }
  return refined;
}

}  // namespace rootspoof
