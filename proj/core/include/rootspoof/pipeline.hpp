#pragma once

#include <span>
#include <vector>

#include "rootspoof/detect_covert.hpp"
#include "rootspoof/mechanism.hpp"
#include "rootspoof/model.hpp"
#include "rootspoof/profiles.hpp"

namespace rootspoof {

struct DetectConfig {
  CovertConfig covert;
  unsigned workers = 0;  // 0 = all cores
};

/// Runs server-ID classification, the covert-delay test and mechanism
/// attribution over every window. Penultimate-hop sets are built per sampled
/// hour from that hour's authentic windows. Verdicts come back in window
/// order, which build_windows() already makes (vp_id, letter, window_start).
std::vector<Verdict> detect(std::span<const HourlyWindow> windows, const PatternProfile& profile,
                            const DetectConfig& config = {}, const KnownSiteList* known_sites = nullptr);

}  // namespace rootspoof
