#include "rootspoof/detect_covert.hpp"

#include <algorithm>
#include <cmath>
#include <map>

namespace rootspoof {

void CovertConfig::validate() const {
  if (!(relative_threshold > 0) || !(mad_multiplier > 0) || !(absolute_floor_ms > 0) || min_samples == 0) {
    throw ConfigError("covert-delay thresholds must be positive");
  }
}

double median(std::span<const double> values) {
  if (values.empty()) return 0;
  std::vector<double> v(values.begin(), values.end());
  const std::size_t mid = v.size() / 2;
  std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid), v.end());
  const double upper = v[mid];
  if (v.size() % 2 == 1) return upper;
  const double lower = *std::max_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid));
  return (lower + upper) / 2;
}

double median_absolute_deviation(std::span<const double> values) {
  const double m = median(values);
  std::vector<double> dev;
  dev.reserve(values.size());
  for (double x : values) dev.push_back(std::fabs(x - m));
  return median(dev);
}

namespace {

std::vector<double> ping_rtts(const HourlyWindow& window) {
  std::vector<double> out;
  for (const auto& p : window.ping) {
    if (p.rtt) out.push_back(*p.rtt);
  }
  return out;
}

StatsResult compute(std::vector<double> dns, std::vector<double> ping, const CovertConfig& config) {
  if (dns.size() < config.min_samples) return StatsInsufficient{"too_few_dns"};
  if (ping.size() < config.min_samples) return StatsInsufficient{"too_few_ping"};
  LatencyStats s;
  s.median_dns = median(dns);
  s.median_ping = median(ping);
  s.mad_dns = median_absolute_deviation(dns);
  s.mad_ping = median_absolute_deviation(ping);
  s.delta = std::fabs(s.median_dns - s.median_ping);
  s.n_dns = dns.size();
  s.n_ping = ping.size();
  return s;
}

}  // namespace

StatsResult latency_stats(const HourlyWindow& window, const PatternProfile& profile, const CovertConfig& config) {
  if (!service_letter(window.letter).icmp_responsive) return StatsInsufficient{"no_icmp"};

  std::vector<std::pair<std::string, double>> labelled;
  std::map<std::string, std::size_t> counts;
  for (const auto& obs : window.dns) {
    if (obs.outcome != DnsOutcome::answered || !obs.rtt || !obs.server_id) continue;
    auto site = profile.site_of(window.letter, *obs.server_id);
    if (!site) continue;  // atypical ids are the overt detector's business
    ++counts[*site];
    labelled.emplace_back(std::move(*site), *obs.rtt);
  }
  if (labelled.empty()) return StatsInsufficient{"too_few_dns"};

  auto modal = std::max_element(counts.begin(), counts.end(),
                                [](const auto& a, const auto& b) { return a.second < b.second; });
  if (modal->second * 2 <= labelled.size()) return StatsInsufficient{"no_modal_site"};

  std::vector<double> dns;
  for (const auto& [site, rtt] : labelled) {
    if (site == modal->first) dns.push_back(rtt);
  }
  auto result = compute(std::move(dns), ping_rtts(window), config);
  if (auto* s = std::get_if<LatencyStats>(&result)) {
    s->n_dns_excluded = labelled.size() - s->n_dns;
    s->site = modal->first;
  }
  return result;
}

StatsResult latency_stats_spoofed(const HourlyWindow& window, const PatternProfile& profile,
                                  const CovertConfig& config) {
  if (!service_letter(window.letter).icmp_responsive) return StatsInsufficient{"no_icmp"};
  std::vector<double> dns;
  for (const auto& obs : window.dns) {
    if (obs.outcome != DnsOutcome::answered || !obs.rtt || !obs.server_id) continue;
    if (!profile.is_legitimate(window.letter, *obs.server_id)) dns.push_back(*obs.rtt);
  }
  return compute(std::move(dns), ping_rtts(window), config);
}

bool is_covert_delayed(const LatencyStats& s, const CovertConfig& config) {
  return s.delta > config.relative_threshold * std::min(s.median_dns, s.median_ping) &&
         s.delta > config.mad_multiplier * std::max(s.mad_dns, s.mad_ping) && s.delta > config.absolute_floor_ms;
}

DelayReading delay_direction(const LatencyStats& s) {
  const Millis diff = s.median_dns - s.median_ping;
  return {diff > 0 ? DelayDirection::dns_slower : DelayDirection::ping_slower, diff};
}

std::string_view to_string(DelayDirection d) { return d == DelayDirection::dns_slower ? "dns_slower" : "ping_slower"; }

void refine_covert(Verdict& verdict, const HourlyWindow& window, const PatternProfile& profile,
                   const CovertConfig& config) {
  StatsResult result;
  switch (verdict.classification) {
    case Classification::valid:
    case Classification::covert_delayed:
      result = latency_stats(window, profile, config);
      break;
    case Classification::overt_spoofed:
      result = latency_stats_spoofed(window, profile, config);
      break;
    default:
      return;
  }
  if (auto* missing = std::get_if<StatsInsufficient>(&result)) {
    verdict.evidence.latency_note = missing->reason;
    return;
  }
  const auto& stats = std::get<LatencyStats>(result);
  verdict.evidence.latency = stats;
  if (verdict.classification == Classification::valid && is_covert_delayed(stats, config)) {
    verdict.classification = Classification::covert_delayed;
    verdict.evidence.delay_direction = std::string(to_string(delay_direction(stats).direction));
  }
}

}  // namespace rootspoof
