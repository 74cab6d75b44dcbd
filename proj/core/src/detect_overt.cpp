#include "rootspoof/detect_overt.hpp"

#include <algorithm>
#include <map>
#include <set>
#include <stdexcept>

namespace rootspoof {

Verdict classify_window(const HourlyWindow& window, const PatternProfile& profile) {
  if (profile.patterns(window.letter).empty()) {
    throw std::invalid_argument(std::string("pattern profile does not cover letter ") + letter_char(window.letter));
  }
  Verdict verdict;
  verdict.vp_id = window.vp_id;
  verdict.letter = window.letter;
  verdict.window_start = window.window_start;

  std::size_t answered = 0;
  std::size_t timeouts = 0;
  // Observation order is by timestamp, so the first atypical id seen here is
  // the earliest one.
  std::optional<std::string> first_unmatched;
  std::map<std::string, bool> verdict_cache;
  std::vector<std::pair<std::string, bool>> ids;
  for (const auto& obs : window.dns) {
    if (obs.outcome == DnsOutcome::timeout) {
      ++timeouts;
    } else if (obs.outcome == DnsOutcome::answered && obs.server_id) {
      ++answered;
      const std::string& id = *obs.server_id;
      auto [it, inserted] = verdict_cache.try_emplace(id, false);
      if (inserted) it->second = profile.is_legitimate(window.letter, id);
      ids.emplace_back(id, it->second);
      if (!it->second && !first_unmatched) first_unmatched = id;
    }
  }

  if (answered == 0) {
    // error outcomes count as neither answered nor timeout
    verdict.classification = timeouts > 0 ? Classification::timeout : Classification::insufficient;
    return verdict;
  }

  std::sort(ids.begin(), ids.end());
  OvertEvidence evidence;
  std::set<std::string> unmatched;
  for (auto& [id, ok] : ids) {
    evidence.observed_server_ids.push_back(id);
    evidence.matched.push_back(ok);
    if (ok) {
      ++evidence.n_matched;
    } else {
      ++evidence.n_unmatched;
      unmatched.insert(id);
    }
  }
  evidence.unmatched_ids.assign(unmatched.begin(), unmatched.end());
  evidence.first_unmatched = first_unmatched;
  evidence.mixed = evidence.n_matched > 0 && evidence.n_unmatched > 0;
  evidence.majority_atypical = evidence.n_unmatched * 2 > ids.size();

  verdict.classification = evidence.n_unmatched > 0 ? Classification::overt_spoofed : Classification::valid;
  verdict.evidence.overt = std::move(evidence);
  return verdict;
}

int letters_spoofed_per_vp(std::span<const Verdict> verdicts) {
  if (verdicts.empty()) return 0;
  std::set<Letter> spoofed;
  for (const auto& v : verdicts) {
    if (v.vp_id != verdicts.front().vp_id || v.window_start != verdicts.front().window_start) {
      throw std::invalid_argument("letters_spoofed_per_vp needs verdicts from one vp and one hour");
    }
    if (is_spoofed(v)) spoofed.insert(v.letter);
  }
  return static_cast<int>(spoofed.size());
}

}  // namespace rootspoof
