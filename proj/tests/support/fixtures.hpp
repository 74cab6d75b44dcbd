#pragma once

// Test-only helpers: fixture expansion, record builders and scratch files.

#include <cstddef>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "rootspoof/model.hpp"
#include "rootspoof/profiles.hpp"
#include "rootspoof/records.hpp"
#include "rootspoof/simulate.hpp"

namespace rootspoof::testing {

std::filesystem::path data_path(std::string_view relative);
std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view content);

/// Fresh empty directory under the system temp dir.
std::filesystem::path scratch_dir(std::string_view name);

const PatternProfile& shipped_profile();
ScenarioConfig load_scenario_file(std::string_view relative);

struct Population {
  std::vector<Verdict> verdicts;
  VpIndex vps;
};

/// Verdicts for one sampled hour expanded from per-VP status counts.
Population expand_epoch_fixture(std::string_view relative = "fixtures/epoch-2020-05-03.json");

struct TrendSeries {
  Population population;
  std::size_t cohort_size = 0;
  std::vector<Timestamp> hours;
};

/// Per epoch: a fixed core of `cohort_size` VPs present every time plus
/// one-off VPs, with the stated number of spoofed VPs in each part.
TrendSeries expand_trend(std::string_view relative = "fixtures/trend-series.json");

Verdict make_verdict(std::string vp_id, Letter letter, Timestamp window_start, Classification c);

DnsObservation dns_answer(std::string vp, Letter letter, Timestamp t, std::string server_id, double rtt);
DnsObservation dns_timeout(std::string vp, Letter letter, Timestamp t);
PingObservation ping(std::string vp, Letter letter, Timestamp t, std::optional<double> rtt);
TracerouteObservation trace(std::string vp, Letter letter, Timestamp t, std::vector<std::optional<Ipv4>> responders,
                            bool reached);

Ipv4 ip(std::string_view text);

/// Window with `dns_rtts` answered by `server_id` and `ping_rtts` of ping,
/// both at 240 s spacing from `start`.
HourlyWindow latency_window(Letter letter, Timestamp start, const std::string& server_id,
                            const std::vector<double>& dns_rtts, const std::vector<double>& ping_rtts);

}  // namespace rootspoof::testing
