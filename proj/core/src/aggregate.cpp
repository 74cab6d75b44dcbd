#include "rootspoof/aggregate.hpp"

#include <algorithm>
#include <bitset>
#include <cstdio>
#include <map>

#include <nlohmann/json.hpp>

#include "rootspoof/parallel.hpp"
#include "rootspoof/schedule.hpp"

namespace rootspoof {

namespace {

using nlohmann::ordered_json;

struct VpState {
  std::bitset<kLetterCount> spoofed;
  std::bitset<kLetterCount> active;
  bool answered = false;
  std::bitset<kLetterCount> covert;
  bool timeout = false;
  bool anycast = false;

  VpStatus status() const {
    if (spoofed.any()) return VpStatus::spoofed;
    if (answered) return VpStatus::answered;
    if (timeout) return VpStatus::timeout;
    return VpStatus::insufficient;
  }
};

using EpochStates = std::map<std::string, VpState, std::less<>>;

void fold(VpState& s, const Verdict& v) {
  const auto i = letter_index(v.letter);
  switch (v.classification) {
    case Classification::overt_spoofed:
      s.spoofed.set(i);
      s.active.set(i);
      s.anycast = s.anycast || v.mechanism == Mechanism::anycast;
      break;
    case Classification::covert_delayed:
      s.covert.set(i);
      [[fallthrough]];
    case Classification::valid:
      s.answered = true;
      s.active.set(i);
      break;
    case Classification::timeout:
      s.timeout = true;
      s.active.set(i);
      break;
    case Classification::insufficient: break;
  }
}

std::map<Timestamp, EpochStates> states_by_epoch(std::span<const Verdict> verdicts) {
  std::map<Timestamp, EpochStates> out;
  for (const auto& v : verdicts) {
    auto& epoch = out[v.window_start];
    auto it = epoch.find(v.vp_id);
    if (it == epoch.end()) it = epoch.emplace(v.vp_id, VpState{}).first;
    fold(it->second, v);
  }
  return out;
}

double ratio(std::size_t num, std::size_t den) {
  return den == 0 ? 0.0 : static_cast<double>(num) / static_cast<double>(den);
}

EpochSummary summarize(Timestamp start, const EpochStates& states) {
  EpochSummary s;
  s.window_start = start;
  s.date = format_date(start);
  for (const auto& [vp, st] : states) {
    switch (st.status()) {
      case VpStatus::spoofed: ++s.n_spoofed; break;
      case VpStatus::answered:
        ++s.n_valid;
        if (st.covert.any()) ++s.n_covert_delayed;
        break;
      case VpStatus::timeout: ++s.n_timeout; break;
      case VpStatus::insufficient: ++s.n_insufficient; break;
    }
    for (std::size_t i = 0; i < kLetterCount; ++i) {
      if (st.spoofed.test(i)) ++s.spoofed_per_letter[i];
      if (st.active.test(i)) ++s.active_per_letter[i];
    }
  }
  s.n_answered = s.n_valid + s.n_spoofed;
  s.n_active_vps = s.n_answered + s.n_timeout;
  s.fraction_timeout = ratio(s.n_timeout, s.n_active_vps);
  s.fraction_spoofed = ratio(s.n_spoofed, s.n_active_vps);
  s.fraction_covert_delayed = ratio(s.n_covert_delayed, s.n_active_vps);
  s.check();
  return s;
}

std::string fixed(double v, int digits = 6) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

}  // namespace

void EpochSummary::check() const {
  if (n_answered != n_valid + n_spoofed) throw InvariantViolation("epoch " + date + ": answered != valid + spoofed");
  if (n_active_vps != n_answered + n_timeout) throw InvariantViolation("epoch " + date + ": active != answered + timeout");
  if (n_covert_delayed > n_valid) throw InvariantViolation("epoch " + date + ": more delayers than valid VPs");
}

EpochSummary epoch_summary(std::span<const Verdict> verdicts) {
  if (verdicts.empty()) return summarize(0, {});
  const Timestamp start = verdicts.front().window_start;
  for (const auto& v : verdicts) {
    if (v.window_start != start) throw InputError("epoch_summary: verdicts span several sampled hours");
  }
  return summarize(start, states_by_epoch(verdicts).begin()->second);
}

std::vector<EpochSummary> summarize_epochs(std::span<const Verdict> verdicts, unsigned workers) {
  const auto states = states_by_epoch(verdicts);
  std::vector<const std::pair<const Timestamp, EpochStates>*> epochs;
  for (const auto& e : states) epochs.push_back(&e);
  std::vector<EpochSummary> out(epochs.size());
  parallel_for(epochs.size(), workers, [&](std::size_t i) { out[i] = summarize(epochs[i]->first, epochs[i]->second); });
  return out;
}

std::vector<TrendPoint> trend(std::span<const EpochSummary> epochs) {
  std::vector<TrendPoint> out;
  out.reserve(epochs.size());
  for (const auto& e : epochs) {
    TrendPoint p{e.window_start, e.date, e.n_active_vps, e.fraction_spoofed, {}};
    for (std::size_t i = 0; i < kLetterCount; ++i) {
      if (e.active_per_letter[i] > 0) p.per_letter[i] = ratio(e.spoofed_per_letter[i], e.active_per_letter[i]);
    }
    out.push_back(std::move(p));
  }
  return out;
}

std::set<std::string> select_cohort(std::span<const Verdict> verdicts, std::size_t size) {
  std::map<std::string, std::size_t, std::less<>> presence;
  for (const auto& [start, states] : states_by_epoch(verdicts)) {
    for (const auto& [vp, st] : states) {
      if (st.status() != VpStatus::insufficient) ++presence[vp];
    }
  }
  std::vector<std::pair<std::string, std::size_t>> ranked(presence.begin(), presence.end());
  std::stable_sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) { return a.second > b.second; });
  std::set<std::string> cohort;
  for (std::size_t i = 0; i < std::min(size, ranked.size()); ++i) cohort.insert(ranked[i].first);
  return cohort;
}

std::vector<TrendPoint> cohort_trend(std::span<const Verdict> verdicts, const std::set<std::string>& cohort,
                                     unsigned workers) {
  if (cohort.empty()) throw ConfigError("cohort is empty");
  std::vector<Verdict> members;
  std::copy_if(verdicts.begin(), verdicts.end(), std::back_inserter(members),
               [&](const Verdict& v) { return cohort.count(v.vp_id) > 0; });
  const auto epochs = summarize_epochs(members, workers);
  return trend(epochs);
}

CountryReport country_fractions(std::span<const Verdict> verdicts, const VpIndex& vps, std::size_t min_vps) {
  CountryReport report;
  report.min_vps = min_vps;
  report.unknown.country = "unknown";
  std::map<std::string, CountryRow> rows;
  for (const auto& [start, states] : states_by_epoch(verdicts)) {
    for (const auto& [vp, st] : states) {
      const auto status = st.status();
      if (status == VpStatus::insufficient) continue;
      auto it = vps.find(vp);
      CountryRow* row = &report.unknown;
      if (it != vps.end() && !it->second.country.empty()) {
        row = &rows[it->second.country];
        row->country = it->second.country;
      }
      ++row->n_active;
      if (status == VpStatus::spoofed) ++row->n_spoofed;
    }
  }
  report.unknown.fraction = ratio(report.unknown.n_spoofed, report.unknown.n_active);

  std::vector<CountryRow> ranked, undersampled;
  for (auto& [code, row] : rows) {
    row.fraction = ratio(row.n_spoofed, row.n_active);
    row.undersampled = row.n_active < min_vps;
    (row.undersampled ? undersampled : ranked).push_back(row);
  }
  std::stable_sort(ranked.begin(), ranked.end(), [](const CountryRow& a, const CountryRow& b) {
    if (a.fraction != b.fraction) return a.fraction > b.fraction;
    return a.n_active > b.n_active;
  });
  for (std::size_t i = 0; i < ranked.size(); ++i) ranked[i].rank = i + 1;
  report.rows = std::move(ranked);
  report.rows.insert(report.rows.end(), undersampled.begin(), undersampled.end());
  return report;
}

LetterCountCdf letter_count_cdf(std::span<const Verdict> verdicts) {
  LetterCountCdf out;
  for (const auto& [start, states] : states_by_epoch(verdicts)) {
    for (const auto& [vp, st] : states) {
      const auto k = st.spoofed.count();
      if (k == 0) continue;
      ++out.counts[k - 1];
      ++out.n_vps;
    }
  }
  if (out.n_vps == 0) return out;
  std::size_t running = 0;
  for (std::size_t k = 0; k < kLetterCount; ++k) {
    running += out.counts[k];
    out.cdf[k] = ratio(running, out.n_vps);
  }
  return out;
}

CovertCorroboration covert_corroboration(std::span<const Verdict> verdicts) {
  CovertCorroboration out;
  for (const auto& [start, states] : states_by_epoch(verdicts)) {
    for (const auto& [vp, st] : states) {
      if (st.status() != VpStatus::answered || st.covert.none()) continue;
      ++out.n_delayers;
      if (st.covert.count() >= 2) ++out.n_multi_letter;
    }
  }
  out.fraction_multi_letter = ratio(out.n_multi_letter, out.n_delayers);
  return out;
}

std::vector<MechanismPoint> mechanism_trend(std::span<const Verdict> verdicts) {
  std::vector<MechanismPoint> out;
  for (const auto& [start, states] : states_by_epoch(verdicts)) {
    MechanismPoint p;
    p.window_start = start;
    p.date = format_date(start);
    for (const auto& [vp, st] : states) {
      if (st.spoofed.none()) continue;
      ++p.n_spoofed;
      ++(st.anycast ? p.n_anycast : p.n_non_anycast);
    }
    if (p.n_spoofed == 0) continue;
    p.non_anycast_share = ratio(p.n_non_anycast, p.n_spoofed);
    out.push_back(std::move(p));
  }
  return out;
}

LatencyImprovementReport latency_improvement(std::span<const Verdict> verdicts) {
  LatencyImprovementReport report;
  std::array<std::vector<double>, kLetterCount> values;
  std::size_t nonpositive = 0;
  for (const auto& v : verdicts) {
    if (!is_spoofed(v)) continue;
    if (!service_letter(v.letter).icmp_responsive) {
      ++report.n_no_icmp;
      continue;
    }
    if (!v.evidence.latency) {
      ++report.n_excluded;
      continue;
    }
    const double gain = v.evidence.latency->median_ping - v.evidence.latency->median_dns;
    values[letter_index(v.letter)].push_back(gain);
    ++report.n_windows;
    if (gain <= 0) ++nonpositive;
  }
  report.fraction_nonpositive = ratio(nonpositive, report.n_windows);
  for (std::size_t i = 0; i < kLetterCount; ++i) {
    auto& vals = values[i];
    if (vals.empty()) continue;
    std::sort(vals.begin(), vals.end());
    LetterImprovement li;
    li.letter = letter_at(i);
    std::size_t np = 0;
    for (std::size_t k = 0; k < vals.size(); ++k) {
      li.cdf.push_back({vals[k], ratio(k + 1, vals.size())});
      if (vals[k] <= 0) ++np;
    }
    li.fraction_nonpositive = ratio(np, vals.size());
    report.letters.push_back(std::move(li));
  }
  return report;
}

AggregateReport build_report(std::span<const Verdict> verdicts, const VpIndex& vps, const ReportOptions& options) {
  AggregateReport r;
  r.epochs = summarize_epochs(verdicts, options.workers);
  r.trend = trend(r.epochs);
  r.cohort = select_cohort(verdicts, options.cohort_size);
  if (!r.cohort.empty()) r.cohort_trend = cohort_trend(verdicts, r.cohort, options.workers);
  r.countries = country_fractions(verdicts, vps, options.min_country_vps);
  r.letter_cdf = letter_count_cdf(verdicts);
  r.covert = covert_corroboration(verdicts);
  r.mechanisms = mechanism_trend(verdicts);
  r.latency = latency_improvement(verdicts);
  return r;
}

namespace {

ordered_json trend_json(std::span<const TrendPoint> points) {
  ordered_json arr = ordered_json::array();
  for (const auto& p : points) {
    ordered_json letters = ordered_json::object();
    for (std::size_t i = 0; i < kLetterCount; ++i) {
      if (p.per_letter[i]) letters[std::string(1, letter_char(letter_at(i)))] = *p.per_letter[i];
    }
    arr.push_back({{"date", p.date},
                   {"window_start", p.window_start},
                   {"n_active_vps", p.n_active_vps},
                   {"fraction_spoofed", p.fraction_spoofed},
                   {"per_letter", std::move(letters)}});
  }
  return arr;
}

ordered_json country_json(const CountryRow& row) {
  ordered_json j = {{"country", row.country},
                    {"n_active", row.n_active},
                    {"n_spoofed", row.n_spoofed},
                    {"fraction", row.fraction},
                    {"undersampled", row.undersampled}};
  j["rank"] = row.rank ? ordered_json(*row.rank) : ordered_json(nullptr);
  return j;
}

}  // namespace

void write_report_json(std::ostream& out, const AggregateReport& report) {
  ordered_json j;
  ordered_json epochs = ordered_json::array();
  for (const auto& e : report.epochs) {
    ordered_json per_letter = ordered_json::object();
    for (std::size_t i = 0; i < kLetterCount; ++i) {
      per_letter[std::string(1, letter_char(letter_at(i)))] = {{"active", e.active_per_letter[i]},
                                                               {"spoofed", e.spoofed_per_letter[i]}};
    }
    epochs.push_back({{"date", e.date},
                      {"window_start", e.window_start},
                      {"n_active_vps", e.n_active_vps},
                      {"n_timeout", e.n_timeout},
                      {"n_answered", e.n_answered},
                      {"n_valid", e.n_valid},
                      {"n_covert_delayed", e.n_covert_delayed},
                      {"n_spoofed", e.n_spoofed},
                      {"n_insufficient", e.n_insufficient},
                      {"fraction_timeout", e.fraction_timeout},
                      {"fraction_spoofed", e.fraction_spoofed},
                      {"fraction_covert_delayed", e.fraction_covert_delayed},
                      {"per_letter", std::move(per_letter)}});
  }
  j["epochs"] = std::move(epochs);
  j["trend"] = trend_json(report.trend);
  j["cohort_size"] = report.cohort.size();
  j["cohort_trend"] = trend_json(report.cohort_trend);

  ordered_json countries = ordered_json::array();
  for (const auto& row : report.countries.rows) countries.push_back(country_json(row));
  j["countries"] = {{"min_vps", report.countries.min_vps},
                    {"rows", std::move(countries)},
                    {"unknown", country_json(report.countries.unknown)}};

  j["letter_count_cdf"] = {{"n_vps", report.letter_cdf.n_vps},
                           {"counts", report.letter_cdf.counts},
                           {"cdf", report.letter_cdf.cdf}};

  j["covert_corroboration"] = {{"n_delayers", report.covert.n_delayers},
                               {"n_multi_letter", report.covert.n_multi_letter},
                               {"fraction_multi_letter", report.covert.fraction_multi_letter}};

  ordered_json mech = ordered_json::array();
  for (const auto& p : report.mechanisms) {
    mech.push_back({{"date", p.date},
                    {"window_start", p.window_start},
                    {"n_spoofed", p.n_spoofed},
                    {"n_anycast", p.n_anycast},
                    {"n_non_anycast", p.n_non_anycast},
                    {"non_anycast_share", p.non_anycast_share}});
  }
  j["mechanism_trend"] = std::move(mech);

  ordered_json letters = ordered_json::array();
  for (const auto& li : report.latency.letters) {
    letters.push_back({{"letter", std::string(1, letter_char(li.letter))},
                       {"n_windows", li.cdf.size()},
                       {"fraction_nonpositive", li.fraction_nonpositive}});
  }
  j["latency_improvement"] = {{"n_windows", report.latency.n_windows},
                              {"fraction_nonpositive", report.latency.fraction_nonpositive},
                              {"n_excluded_missing_latency", report.latency.n_excluded},
                              {"n_excluded_no_icmp", report.latency.n_no_icmp},
                              {"letters", std::move(letters)}};
  out << j.dump(2) << '\n';
}

void write_epochs_csv(std::ostream& out, std::span<const EpochSummary> epochs) {
  out << "date,window_start,n_active_vps,n_timeout,n_answered,n_valid,n_covert_delayed,n_spoofed,n_insufficient,"
         "fraction_timeout,fraction_spoofed,fraction_covert_delayed\n";
  for (const auto& e : epochs) {
    out << e.date << ',' << e.window_start << ',' << e.n_active_vps << ',' << e.n_timeout << ',' << e.n_answered
        << ',' << e.n_valid << ',' << e.n_covert_delayed << ',' << e.n_spoofed << ',' << e.n_insufficient << ','
        << fixed(e.fraction_timeout) << ',' << fixed(e.fraction_spoofed) << ',' << fixed(e.fraction_covert_delayed)
        << '\n';
  }
}

void write_trend_csv(std::ostream& out, std::span<const TrendPoint> points, std::string_view series_name) {
  out << "date,window_start,series,fraction_spoofed\n";
  for (const auto& p : points) {
    out << p.date << ',' << p.window_start << ',' << series_name << ',' << fixed(p.fraction_spoofed) << '\n';
    for (std::size_t i = 0; i < kLetterCount; ++i) {
      if (!p.per_letter[i]) continue;
      out << p.date << ',' << p.window_start << ',' << series_name << '_' << letter_char(letter_at(i)) << ','
          << fixed(*p.per_letter[i]) << '\n';
    }
  }
}

void write_countries_csv(std::ostream& out, const CountryReport& report) {
  out << "country,n_active,n_spoofed,fraction,undersampled,rank\n";
  auto row = [&](const CountryRow& r) {
    out << r.country << ',' << r.n_active << ',' << r.n_spoofed << ',' << fixed(r.fraction) << ','
        << (r.undersampled ? "true" : "false") << ',';
    if (r.rank) out << *r.rank;
    out << '\n';
  };
  for (const auto& r : report.rows) row(r);
  row(report.unknown);
}

void write_letter_cdf_csv(std::ostream& out, const LetterCountCdf& cdf) {
  out << "letters_spoofed,n_vps,cdf\n";
  for (std::size_t k = 0; k < kLetterCount; ++k) out << k + 1 << ',' << cdf.counts[k] << ',' << fixed(cdf.cdf[k]) << '\n';
}

void write_mechanism_csv(std::ostream& out, std::span<const MechanismPoint> points) {
  out << "date,window_start,n_spoofed,n_anycast,n_non_anycast,non_anycast_share\n";
  for (const auto& p : points) {
    out << p.date << ',' << p.window_start << ',' << p.n_spoofed << ',' << p.n_anycast << ',' << p.n_non_anycast
        << ',' << fixed(p.non_anycast_share) << '\n';
  }
}

void write_latency_csv(std::ostream& out, const LatencyImprovementReport& report) {
  out << "letter,improvement_ms,cdf\n";
  for (const auto& li : report.letters) {
    for (const auto& p : li.cdf) out << letter_char(li.letter) << ',' << fixed(p.value, 3) << ',' << fixed(p.cumulative) << '\n';
  }
}

}  // namespace rootspoof
