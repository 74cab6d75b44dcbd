#include "rootspoof/pipeline.hpp"

#include <map>

#include "rootspoof/detect_overt.hpp"
#include "rootspoof/parallel.hpp"

namespace rootspoof {

std::vector<Verdict> detect(std::span<const HourlyWindow> windows, const PatternProfile& profile,
                            const DetectConfig& config, const KnownSiteList* known_sites) {
  config.covert.validate();
  std::vector<Verdict> verdicts(windows.size());
  parallel_for(windows.size(), config.workers, [&](std::size_t i) {
    verdicts[i] = classify_window(windows[i], profile);
    refine_covert(verdicts[i], windows[i], profile, config.covert);
  });

  // One hop set per sampled hour.
  std::map<Timestamp, std::vector<std::size_t>> by_hour;
  for (std::size_t i = 0; i < windows.size(); ++i) by_hour[windows[i].window_start].push_back(i);

  for (const auto& [hour, members] : by_hour) {
    PenultimateHopSet hopset;
    std::vector<std::size_t> spoofed;
    for (auto i : members) {
      if (is_valid_answer(verdicts[i])) {
        hopset.add_window(windows[i]);
      } else if (is_spoofed(verdicts[i])) {
        spoofed.push_back(i);
      }
    }
    if (spoofed.empty()) continue;
    if (known_sites) hopset.add_known(*known_sites);
    parallel_for(spoofed.size(), config.workers, [&](std::size_t k) {
      auto& v = verdicts[spoofed[k]];
      auto result = classify_mechanism(windows[spoofed[k]], hopset, v.evidence.latency, config.covert);
      v.mechanism = result.mechanism;
      v.evidence.mechanism = std::move(result.evidence);
    });
  }
  return verdicts;
}

}  // namespace rootspoof
