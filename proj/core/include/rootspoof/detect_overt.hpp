#pragma once

#include <span>

#include "rootspoof/model.hpp"
#include "rootspoof/profiles.hpp"

namespace rootspoof {

/// Server-ID classification of one window.
///
///  - no DNS observations, or only error outcomes: insufficient
///  - every DNS observation timed out: timeout
///  - any answered id accepted by no pattern for the letter: overt_spoofed
///    (one atypical id taints the whole window; evidence keeps the mix)
///  - otherwise: valid
///
/// Precondition: the profile has patterns for the window's letter.
Verdict classify_window(const HourlyWindow& window, const PatternProfile& profile);

/// Number of letters classified overt_spoofed. All verdicts must share the
/// vp_id and window_start (throws std::invalid_argument otherwise).
int letters_spoofed_per_vp(std::span<const Verdict> verdicts);

}  // namespace rootspoof
