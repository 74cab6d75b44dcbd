#include "cli.hpp"

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "rootspoof/aggregate.hpp"
#include "rootspoof/fetch.hpp"
#include "rootspoof/identity.hpp"
#include "rootspoof/pipeline.hpp"
#include "rootspoof/records.hpp"
#include "rootspoof/schedule.hpp"
#include "rootspoof/simulate.hpp"
#include "rootspoof/validate.hpp"

#ifndef ROOTSPOOF_VERSION
#define ROOTSPOOF_VERSION "0.0.0"
#endif

namespace rootspoof::cli {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

namespace {

std::uint64_t fnv1a_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::uint64_t h = 0xCBF29CE484222325ull;
  char buf[1 << 16];
  while (in.read(buf, sizeof buf) || in.gcount() > 0) {
    for (std::streamsize i = 0; i < in.gcount(); ++i) {
      h ^= static_cast<unsigned char>(buf[i]);
      h *= 0x100000001B3ull;
    }
  }
  return h;
}

std::ifstream open_input(const std::string& path) {
  if (!fs::exists(path)) throw ConfigError("input file not found: " + path);
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  return in;
}

void write_file(const fs::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out << content;
  out.flush();
  if (!out) throw IoError("cannot write " + path.string());
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
}

/// Run manifest: everything except generated_at is reproducible.
class Manifest {
 public:
  explicit Manifest(std::string subcommand) : subcommand_(std::move(subcommand)) {}

  void input(const std::string& role, const std::string& path) {
    if (path.empty()) return;
    if (!fs::exists(path)) throw ConfigError("input file not found: " + path);
    char hash[17];
    std::snprintf(hash, sizeof hash, "%016llx", static_cast<unsigned long long>(fnv1a_file(path)));
    inputs_[role] = {{"path", path}, {"bytes", fs::file_size(path)}, {"fnv1a64", hash}};
  }
  ordered_json& thresholds() { return thresholds_; }
  ordered_json& counts() { return counts_; }
  void output(const std::string& name) { outputs_.push_back(name); }

  void write(const fs::path& dir) const {
    const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    ordered_json j = {{"tool", "rootspoof"},
                      {"version", ROOTSPOOF_VERSION},
                      {"subcommand", subcommand_},
                      {"inputs", inputs_},
                      {"thresholds", thresholds_},
                      {"counts", counts_},
                      {"outputs", outputs_},
                      {"generated_at", format_time(static_cast<Timestamp>(now))}};
    write_file(dir / "manifest.json", j.dump(2) + "\n");
  }

 private:
  std::string subcommand_;
  ordered_json inputs_ = ordered_json::object();
  ordered_json thresholds_ = ordered_json::object();
  ordered_json counts_ = ordered_json::object();
  std::vector<std::string> outputs_;
};

ordered_json skip_json(const SkipReport& s) { return {{"skipped", s.skipped}, {"samples", s.samples}}; }

template <typename T>
std::string records_text(const std::vector<T>& records) {
  std::ostringstream out;
  write_records(out, records);
  return out.str();
}

void emit(const fs::path& dir, const std::string& name, const std::string& content, Manifest& manifest) {
  write_file(dir / name, content);
  manifest.output(name);
}

std::vector<Timestamp> load_schedule(const std::string& path) {
  auto in = open_input(path);
  return read_schedule(in);
}

VpIndex load_vps(const std::string& path) {
  if (path.empty()) return {};
  auto in = open_input(path);
  return load_vantage_points(in);
}

std::vector<Verdict> load_verdicts(const std::string& path) {
  auto in = open_input(path);
  return read_verdicts(in);
}

// ---------------------------------------------------------------------------

struct IngestOptions {
  std::string dns, ping, traceroute, server_log, out;
  bool fetch = false;
  std::string base_url, measurement, kind = "dns", start, stop, cursor;
};

int run_ingest(const IngestOptions& o, std::ostream& out) {
  const fs::path dir = o.out;
  ensure_dir(dir);
  Manifest manifest("ingest");
  std::vector<std::pair<std::string, std::string>> local{
      {"dns", o.dns}, {"ping", o.ping}, {"traceroute", o.traceroute}, {"server-log", o.server_log}};

  if (o.fetch) {
    if (o.base_url.empty() || o.measurement.empty()) throw ConfigError("--fetch needs --base-url and --measurement");
    auto start = parse_time(o.start), stop = parse_time(o.stop);
    if (!start || !stop) throw ConfigError("--fetch needs --start and --stop times");
    FetchConfig config;
    config.base_url = o.base_url;
    const fs::path raw = dir / (o.kind + ".raw.ndjson");
    std::ofstream sink(raw, std::ios::binary | std::ios::trunc);
    if (!sink) throw IoError("cannot write " + raw.string());
    try {
      auto summary = fetch_measurements(config, o.measurement, TimeRange{*start, *stop}, sink, o.cursor);
      manifest.counts()["fetched_records"] = summary.records;
      manifest.counts()["fetched_pages"] = summary.pages;
      manifest.counts()["fetch_retries"] = summary.retries;
    } catch (const FetchError& e) {
      sink.flush();
      throw FetchError(std::string(e.what()) + " (resume with --cursor '" + e.resume_cursor() + "')",
                       e.resume_cursor());
    }
    sink.close();
    manifest.output(o.kind + ".raw.ndjson");
    for (auto& [kind, path] : local) {
      if (kind == o.kind) path = raw.string();
    }
  }

  bool any = false;
  for (const auto& [kind, path] : local) {
    if (path.empty()) continue;
    any = true;
    manifest.input(kind, path);
    auto in = open_input(path);
    std::string text;
    SkipReport skips;
    std::size_t n = 0;
    if (kind == "dns") {
      auto r = parse_dns_results(in);
      text = records_text(r.records), skips = r.skips, n = r.records.size();
    } else if (kind == "ping") {
      auto r = parse_ping_results(in);
      text = records_text(r.records), skips = r.skips, n = r.records.size();
    } else if (kind == "traceroute") {
      auto r = parse_traceroute_results(in);
      text = records_text(r.records), skips = r.skips, n = r.records.size();
    } else {
      auto r = parse_server_log(in);
      std::stable_sort(r.records.begin(), r.records.end(),
                       [](const auto& a, const auto& b) { return a.timestamp < b.timestamp; });
      text = records_text(r.records), skips = r.skips, n = r.records.size();
    }
    emit(dir, kind + ".ndjson", text, manifest);
    manifest.counts()[kind] = {{"records", n}, {"skips", skip_json(skips)}};
    out << kind << ": " << n << " records, " << skips.skipped << " skipped\n";
  }
  if (!any) throw ConfigError("ingest needs at least one input file or --fetch");
  manifest.write(dir);
  return kOk;
}

// ---------------------------------------------------------------------------

struct DetectOptions {
  std::string dns, ping, traceroute, schedule, profile, known_sites, vps, psl, rdns, companies, out;
  CovertConfig covert;
  unsigned workers = 0;
};

ordered_json clusters_json(const ClusterReport& report) {
  ordered_json clusters = ordered_json::array();
  for (const auto& c : report.clusters) {
    clusters.push_back({{"cluster_id", c.cluster_id},
                        {"label", c.label},
                        {"category", to_string(c.category)},
                        {"grouping_basis", to_string(c.grouping_basis)},
                        {"member_server_ids", c.member_server_ids},
                        {"observer_asns", c.observer_asns},
                        {"n_observer_vps", c.observer_vps.size()}});
  }
  return {{"clusters", std::move(clusters)}, {"warnings", report.warnings}};
}

int run_detect(const DetectOptions& o, std::ostream& out) {
  o.covert.validate();
  const fs::path dir = o.out;
  Manifest manifest("detect");
  manifest.thresholds() = {{"relative_threshold", o.covert.relative_threshold},
                           {"mad_multiplier", o.covert.mad_multiplier},
                           {"absolute_floor_ms", o.covert.absolute_floor_ms},
                           {"min_samples", o.covert.min_samples}};

  ObservationSet obs;
  auto parse_into = [&](const std::string& role, const std::string& path, auto parser, auto& target) {
    if (path.empty()) return;
    manifest.input(role, path);
    auto in = open_input(path);
    auto r = parser(in);
    manifest.counts()[role] = {{"records", r.records.size()}, {"skips", skip_json(r.skips)}};
    target = std::move(r.records);
  };
  parse_into("dns", o.dns, parse_dns_results, obs.dns);
  parse_into("ping", o.ping, parse_ping_results, obs.ping);
  parse_into("traceroute", o.traceroute, parse_traceroute_results, obs.traceroute);

  manifest.input("schedule", o.schedule);
  const auto schedule = load_schedule(o.schedule);
  manifest.input("profile", o.profile);
  auto profile_in = open_input(o.profile);
  const auto profile = load_pattern_profile(profile_in);
  manifest.thresholds()["profile_version"] = profile.version();

  std::optional<KnownSiteList> known;
  if (!o.known_sites.empty()) {
    manifest.input("known_sites", o.known_sites);
    auto in = open_input(o.known_sites);
    known = load_known_sites(in);
  }

  const auto windows = build_windows(obs, schedule);
  auto verdicts = detect(windows, profile, DetectConfig{o.covert, o.workers}, known ? &*known : nullptr);
  for (const auto& v : verdicts) check_invariants(v);

  ensure_dir(dir);
  if (!o.psl.empty()) {
    manifest.input("public_suffix_list", o.psl);
    manifest.input("vps", o.vps);
    manifest.input("reverse_dns", o.rdns);
    manifest.input("company_map", o.companies);
    auto psl_in = open_input(o.psl);
    const auto psl = PublicSuffixList::load(psl_in);
    const auto vps = load_vps(o.vps);
    std::optional<ReverseDnsMap> rdns;
    std::optional<CompanyMap> companies;
    if (!o.rdns.empty()) {
      auto in = open_input(o.rdns);
      rdns = ReverseDnsMap::load(in);
    }
    if (!o.companies.empty()) {
      auto in = open_input(o.companies);
      companies = CompanyMap::load(in);
    }
    const auto report = cluster_spoofers(verdicts, vps, psl, rdns ? &*rdns : nullptr, companies ? &*companies : nullptr);
    assign_clusters(verdicts, report);
    emit(dir, "clusters.json", clusters_json(report).dump(2) + "\n", manifest);
    manifest.counts()["clusters"] = report.clusters.size();
  }

  std::array<std::size_t, 5> by_class{};
  for (const auto& v : verdicts) ++by_class[static_cast<std::size_t>(v.classification)];
  manifest.counts()["windows"] = windows.size();
  for (auto c : {Classification::valid, Classification::overt_spoofed, Classification::covert_delayed,
                 Classification::timeout, Classification::insufficient}) {
    manifest.counts()[std::string(to_string(c))] = by_class[static_cast<std::size_t>(c)];
  }
  emit(dir, "verdicts.ndjson", records_text(verdicts), manifest);
  manifest.write(dir);
  out << windows.size() << " windows: " << by_class[1] << " overt_spoofed, " << by_class[2] << " covert_delayed, "
      << by_class[3] << " timeout\n";
  return kOk;
}

// ---------------------------------------------------------------------------

struct ValidateOptions {
  std::string verdicts, dns, schedule, vps, server_log, letter = "B", out;
  Timestamp tolerance = 240;
};

std::string rate(const std::optional<double>& r) {
  if (!r) return "-";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4f", *r);
  return buf;
}

ordered_json spread_json(const std::map<std::string, RateSpread>& spreads) {
  ordered_json j = ordered_json::object();
  for (const auto& [cls, s] : spreads) {
    j[cls] = {{"hours", s.hours}, {"min", s.min}, {"q25", s.q25}, {"median", s.q50}, {"q75", s.q75}, {"max", s.max}};
  }
  return j;
}

std::string validation_text(const TruePositiveReport& tp, double upper_fp, const CovertConfirmationReport& covert,
                            std::size_t injectors, std::size_t proxies) {
  std::ostringstream t;
  t << "True-positive rates per sampled hour\n";
  t << std::left << std::setw(22) << "hour" << std::setw(13) << "class" << std::right << std::setw(9) << "windows"
    << std::setw(9) << "matched" << std::setw(10) << "tp_win" << std::setw(9) << "queries" << std::setw(9) << "matched"
    << std::setw(10) << "tp_query" << '\n';
  for (const auto& h : tp.hours) {
    for (const auto& [cls, r] : h.classes) {
      t << std::left << std::setw(22) << format_time(h.window_start) << std::setw(13) << cls << std::right
        << std::setw(9) << r.windows_sent << std::setw(9) << r.windows_matched << std::setw(10) << rate(r.tp_window)
        << std::setw(9) << r.queries_sent << std::setw(9) << r.queries_matched << std::setw(10) << rate(r.tp_query)
        << '\n';
    }
  }
  auto spread_table = [&](const char* title, const std::map<std::string, RateSpread>& spreads) {
    t << '\n' << title << '\n';
    t << std::left << std::setw(13) << "class" << std::right << std::setw(7) << "hours" << std::setw(9) << "min"
      << std::setw(9) << "q25" << std::setw(9) << "median" << std::setw(9) << "q75" << std::setw(9) << "max" << '\n';
    for (const auto& [cls, s] : spreads) {
      t << std::left << std::setw(13) << cls << std::right << std::setw(7) << s.hours << std::setw(9) << rate(s.min)
        << std::setw(9) << rate(s.q25) << std::setw(9) << rate(s.q50) << std::setw(9) << rate(s.q75) << std::setw(9)
        << rate(s.max) << '\n';
    }
  };
  spread_table("Spread across hours (window level)", tp.spread_window);
  spread_table("Spread across hours (query level)", tp.spread_query);
  t << "\nupper-bound false-positive rate: " << rate(upper_fp) << '\n';
  t << "mechanism refinement: " << proxies << " proxy, " << injectors << " injection\n";
  t << "\nCovert delayers\n";
  t << std::left << std::setw(13) << "direction" << std::right << std::setw(9) << "detected" << std::setw(9)
    << "reached" << std::setw(12) << "mean_ms" << '\n';
  auto row = [&](const char* name, const DirectionSummary& d) {
    char mean[32] = "-";
    if (d.mean_difference) std::snprintf(mean, sizeof mean, "%.2f", *d.mean_difference);
    t << std::left << std::setw(13) << name << std::right << std::setw(9) << d.detected << std::setw(9) << d.reached
      << std::setw(12) << mean << '\n';
  };
  row("dns_slower", covert.dns_slower);
  row("ping_slower", covert.ping_slower);
  return t.str();
}

int run_validate(const ValidateOptions& o, std::ostream& out) {
  const fs::path dir = o.out;
  Manifest manifest("validate");
  if (o.tolerance <= 0) throw ConfigError("--tolerance must be positive");
  const Letter letter = [&] {
    auto l = parse_letter(o.letter);
    if (!l) throw ConfigError("--letter must be one of A-M");
    return *l;
  }();
  MatchConfig config;
  config.tolerance_s = o.tolerance;
  manifest.thresholds() = {{"tolerance_s", o.tolerance}, {"letter", std::string(1, letter_char(letter))}};

  for (const auto& [role, path] : {std::pair{"verdicts", o.verdicts}, {"dns", o.dns}, {"schedule", o.schedule},
                                   {"vps", o.vps}, {"server_log", o.server_log}}) {
    manifest.input(role, path);
  }
  auto verdicts = load_verdicts(o.verdicts);
  ObservationSet obs;
  {
    auto in = open_input(o.dns);
    auto r = parse_dns_results(in);
    manifest.counts()["dns_skips"] = skip_json(r.skips);
    obs.dns = std::move(r.records);
  }
  const auto windows = build_windows(obs, load_schedule(o.schedule));
  const auto vps = load_vps(o.vps);
  auto log_in = open_input(o.server_log);
  auto log = parse_server_log(log_in);
  manifest.counts()["server_log_skips"] = skip_json(log.skips);

  const ServerLogIndex index(log.records, letter, config);
  const auto matches = match_queries(windows, index, vps, config);
  const auto refined = refine_mechanisms(verdicts, matches.results);
  const auto tp = true_positive_rates(matches.results, verdicts);
  const double upper_fp = upper_bound_false_positive(matches.results, verdicts);
  const auto covert = confirm_covert_delayers(verdicts, matches.results);
  std::size_t injectors = 0, proxies = 0;
  for (const auto& v : verdicts) {
    if (v.mechanism == Mechanism::injection) ++injectors;
    if (v.mechanism == Mechanism::proxy) ++proxies;
  }

  ordered_json hours = ordered_json::array();
  for (const auto& h : tp.hours) {
    ordered_json classes = ordered_json::object();
    for (const auto& [cls, r] : h.classes) {
      classes[cls] = {{"windows_sent", r.windows_sent},
                      {"windows_matched", r.windows_matched},
                      {"queries_sent", r.queries_sent},
                      {"queries_matched", r.queries_matched},
                      {"tp_window", r.tp_window ? ordered_json(*r.tp_window) : ordered_json(nullptr)},
                      {"tp_query", r.tp_query ? ordered_json(*r.tp_query) : ordered_json(nullptr)}};
    }
    hours.push_back({{"window_start", format_time(h.window_start)},
                     {"classes", std::move(classes)},
                     {"not_spoofed_unmatched", h.not_spoofed_unmatched},
                     {"upper_bound_fp", h.upper_bound_fp ? ordered_json(*h.upper_bound_fp) : ordered_json(nullptr)}});
  }
  ordered_json delayers = ordered_json::array();
  for (const auto& d : covert.delayers) {
    delayers.push_back({{"vp_id", d.vp_id},
                        {"window_start", format_time(d.window_start)},
                        {"reached", d.reached},
                        {"signed_difference_ms", d.signed_difference},
                        {"direction", to_string(d.direction)}});
  }
  auto direction = [](const DirectionSummary& d) {
    return ordered_json{{"detected", d.detected},
                        {"reached", d.reached},
                        {"mean_difference_ms", d.mean_difference ? ordered_json(*d.mean_difference) : ordered_json(nullptr)}};
  };
  ordered_json j = {{"letter", std::string(1, letter_char(letter))},
                    {"tolerance_s", o.tolerance},
                    {"windows_matched_against_log", matches.results.size()},
                    {"prefix_collisions", matches.collisions},
                    {"unknown_vps", matches.unknown_vps},
                    {"hours", std::move(hours)},
                    {"spread_window", spread_json(tp.spread_window)},
                    {"spread_query", spread_json(tp.spread_query)},
                    {"upper_bound_fp", upper_fp},
                    {"mechanism_refinement", {{"refined", refined}, {"proxy", proxies}, {"injection", injectors}}},
                    {"covert_delayers",
                     {{"n_delayers", covert.n_delayers},
                      {"n_reached", covert.n_reached},
                      {"dns_slower", direction(covert.dns_slower)},
                      {"ping_slower", direction(covert.ping_slower)},
                      {"n_anomalous", covert.anomalous.size()},
                      {"delayers", std::move(delayers)}}}};

  ensure_dir(dir);
  emit(dir, "validation.json", j.dump(2) + "\n", manifest);
  emit(dir, "validation.txt", validation_text(tp, upper_fp, covert, injectors, proxies), manifest);
  emit(dir, "verdicts.ndjson", records_text(verdicts), manifest);
  manifest.counts()["matched_windows"] = matches.results.size();
  manifest.counts()["refined_mechanisms"] = refined;
  manifest.write(dir);
  out << "upper-bound FP " << rate(upper_fp) << ", " << injectors << " injection, " << proxies << " proxy\n";
  return kOk;
}

// ---------------------------------------------------------------------------

struct ReportOptionsCli {
  std::string verdicts, vps, out;
  ReportOptions report;
};

int run_report(const ReportOptionsCli& o, std::ostream& out) {
  if (o.report.min_country_vps == 0) throw ConfigError("--min-country-vps must be positive");
  const fs::path dir = o.out;
  Manifest manifest("report");
  manifest.input("verdicts", o.verdicts);
  manifest.input("vps", o.vps);
  manifest.thresholds() = {{"cohort_size", o.report.cohort_size}, {"min_country_vps", o.report.min_country_vps}};
  const auto verdicts = load_verdicts(o.verdicts);
  const auto vps = load_vps(o.vps);
  const auto report = build_report(verdicts, vps, o.report);

  ensure_dir(dir);
  auto csv = [&](const std::string& name, auto writer) {
    std::ostringstream s;
    writer(s);
    emit(dir, name, s.str(), manifest);
  };
  {
    std::ostringstream s;
    write_report_json(s, report);
    emit(dir, "report.json", s.str(), manifest);
  }
  csv("epochs.csv", [&](std::ostream& s) { write_epochs_csv(s, report.epochs); });
  csv("trend.csv", [&](std::ostream& s) { write_trend_csv(s, report.trend, "all"); });
  csv("cohort_trend.csv", [&](std::ostream& s) { write_trend_csv(s, report.cohort_trend, "cohort"); });
  csv("countries.csv", [&](std::ostream& s) { write_countries_csv(s, report.countries); });
  csv("letter_cdf.csv", [&](std::ostream& s) { write_letter_cdf_csv(s, report.letter_cdf); });
  csv("mechanism_trend.csv", [&](std::ostream& s) { write_mechanism_csv(s, report.mechanisms); });
  csv("latency_improvement.csv", [&](std::ostream& s) { write_latency_csv(s, report.latency); });
  manifest.counts()["verdicts"] = verdicts.size();
  manifest.counts()["epochs"] = report.epochs.size();
  manifest.counts()["cohort"] = report.cohort.size();
  manifest.write(dir);
  for (const auto& e : report.epochs) {
    char line[160];
    std::snprintf(line, sizeof line, "%s: %zu active, %.2f%% timeout, %.2f%% spoofed, %.2f%% covert\n", e.date.c_str(),
                  e.n_active_vps, 100 * e.fraction_timeout, 100 * e.fraction_spoofed, 100 * e.fraction_covert_delayed);
    out << line;
  }
  return kOk;
}

// ---------------------------------------------------------------------------

struct SimulateOptions {
  std::string scenario, out;
  std::optional<std::uint64_t> seed;
  unsigned workers = 0;
};

int run_simulate(const SimulateOptions& o, std::ostream& out) {
  const fs::path dir = o.out;
  Manifest manifest("simulate");
  manifest.input("scenario", o.scenario);
  auto in = open_input(o.scenario);
  auto config = load_scenario(in);
  if (o.seed) config.seed = *o.seed;
  manifest.thresholds() = {{"seed", config.seed}, {"scenario", config.name}};
  const auto sim = generate(config, o.workers);

  ensure_dir(dir);
  emit(dir, "dns.ndjson", records_text(sim.observations.dns), manifest);
  emit(dir, "ping.ndjson", records_text(sim.observations.ping), manifest);
  emit(dir, "traceroute.ndjson", records_text(sim.observations.traceroute), manifest);
  emit(dir, "vps.ndjson", records_text(sim.vps), manifest);
  emit(dir, "server-log.ndjson", records_text(sim.server_log), manifest);
  {
    std::ostringstream s;
    for (auto t : sim.schedule) s << format_time(t) << '\n';
    emit(dir, "schedule.txt", s.str(), manifest);
  }
  {
    std::ostringstream s;
    for (const auto& t : sim.truth) s << serialize(t) << '\n';
    emit(dir, "truth.ndjson", s.str(), manifest);
  }
  {
    std::ostringstream s;
    write_known_sites(s, sim.known_sites);
    emit(dir, "known-sites.txt", s.str(), manifest);
  }
  manifest.counts() = {{"vps", sim.vps.size()},
                       {"dns", sim.observations.dns.size()},
                       {"ping", sim.observations.ping.size()},
                       {"traceroute", sim.observations.traceroute.size()},
                       {"server_log", sim.server_log.size()},
                       {"windows", sim.truth.size()}};
  manifest.write(dir);
  out << sim.vps.size() << " VPs, " << sim.truth.size() << " windows, " << sim.server_log.size()
      << " server-log records\n";
  return kOk;
}

struct ScoreOptions {
  std::string verdicts, truth, out;
};

int run_score(const ScoreOptions& o, std::ostream& out) {
  const fs::path dir = o.out;
  Manifest manifest("score");
  manifest.input("verdicts", o.verdicts);
  manifest.input("truth", o.truth);
  const auto verdicts = load_verdicts(o.verdicts);
  auto in = open_input(o.truth);
  const auto truth = read_ground_truth(in);
  const auto report = score(verdicts, truth);
  ensure_dir(dir);
  std::ostringstream s;
  write_score_json(s, report);
  emit(dir, "score.json", s.str(), manifest);
  manifest.counts() = {{"verdicts", verdicts.size()}, {"truth", truth.size()}};
  manifest.write(dir);
  out << "spoof recall " << rate(report.spoof_windows.recall) << ", precision " << rate(report.spoof_windows.precision)
      << ", false positives " << report.spoof_windows.false_positive << '\n';
  return kOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Detects DNS spoofing of the root servers from distributed measurements", "rootspoof"};
  app.require_subcommand(1);
  app.set_version_flag("--version", ROOTSPOOF_VERSION);

  IngestOptions ingest;
  auto* ing = app.add_subcommand("ingest", "Normalise measurement exports or fetch them from the results API");
  ing->add_option("--dns", ingest.dns, "DNS (hostname.bind) results");
  ing->add_option("--ping", ingest.ping, "ping results");
  ing->add_option("--traceroute", ingest.traceroute, "traceroute results");
  ing->add_option("--server-log", ingest.server_log, "authoritative-server query log");
  ing->add_flag("--fetch", ingest.fetch, "fetch one measurement from the results API first");
  ing->add_option("--base-url", ingest.base_url, "results API base URL");
  ing->add_option("--measurement", ingest.measurement, "measurement id to fetch");
  ing->add_option("--kind", ingest.kind, "record kind of the fetched measurement")
      ->check(CLI::IsMember({"dns", "ping", "traceroute"}));
  ing->add_option("--start", ingest.start, "fetch range start (inclusive)");
  ing->add_option("--stop", ingest.stop, "fetch range stop (exclusive)");
  ing->add_option("--cursor", ingest.cursor, "resume a fetch from this cursor");
  ing->add_option("--out", ingest.out, "output directory")->required();

  DetectOptions detect_opts;
  auto* det = app.add_subcommand("detect", "Classify every hourly window and attribute spoofing mechanisms");
  det->add_option("--dns", detect_opts.dns, "DNS results")->required();
  det->add_option("--ping", detect_opts.ping, "ping results");
  det->add_option("--traceroute", detect_opts.traceroute, "traceroute results");
  det->add_option("--schedule", detect_opts.schedule, "sampled hours, one start time per line")->required();
  det->add_option("--profile", detect_opts.profile, "server-ID pattern profile")->required();
  det->add_option("--known-sites", detect_opts.known_sites, "known anycast sites and penultimate hops");
  det->add_option("--vps", detect_opts.vps, "vantage-point metadata (for spoofer identity)");
  det->add_option("--psl", detect_opts.psl, "public-suffix list; enables spoofer clustering");
  det->add_option("--rdns", detect_opts.rdns, "offline reverse-DNS table");
  det->add_option("--company-map", detect_opts.companies, "organisation map");
  det->add_option("--relative-threshold", detect_opts.covert.relative_threshold, "covert test: fraction of the smaller median")
      ->capture_default_str();
  det->add_option("--mad-multiplier", detect_opts.covert.mad_multiplier, "covert test: multiple of the larger MAD")
      ->capture_default_str();
  det->add_option("--absolute-floor-ms", detect_opts.covert.absolute_floor_ms, "covert test: absolute floor in ms")
      ->capture_default_str();
  det->add_option("--min-samples", detect_opts.covert.min_samples, "covert test: samples needed per side")
      ->capture_default_str();
  det->add_option("--workers", detect_opts.workers, "worker threads (0 = all cores)");
  det->add_option("--out", detect_opts.out, "output directory")->required();

  ValidateOptions val;
  auto* va = app.add_subcommand("validate", "Match client queries against an authoritative-server log");
  va->add_option("--verdicts", val.verdicts, "verdicts from detect")->required();
  va->add_option("--dns", val.dns, "DNS results used for detection")->required();
  va->add_option("--schedule", val.schedule, "sampled hours")->required();
  va->add_option("--vps", val.vps, "vantage-point metadata")->required();
  va->add_option("--server-log", val.server_log, "server query log")->required();
  va->add_option("--letter", val.letter, "letter the log belongs to")->capture_default_str();
  va->add_option("--tolerance", val.tolerance, "match tolerance in seconds")->capture_default_str();
  va->add_option("--out", val.out, "output directory")->required();

  ReportOptionsCli rep;
  auto* re = app.add_subcommand("report", "Population-level summaries, trends and CDFs");
  re->add_option("--verdicts", rep.verdicts, "verdicts")->required();
  re->add_option("--vps", rep.vps, "vantage-point metadata (countries)");
  re->add_option("--cohort-size", rep.report.cohort_size, "fixed-cohort size")->capture_default_str();
  re->add_option("--min-country-vps", rep.report.min_country_vps, "active VPs needed to rank a country")
      ->capture_default_str();
  re->add_option("--workers", rep.report.workers, "worker threads (0 = all cores)");
  re->add_option("--out", rep.out, "output directory")->required();

  SimulateOptions sim;
  auto* si = app.add_subcommand("simulate", "Generate a labelled synthetic dataset from a scenario");
  si->add_option("--scenario", sim.scenario, "scenario file")->required();
  si->add_option("--seed", sim.seed, "override the scenario seed");
  si->add_option("--workers", sim.workers, "worker threads (0 = all cores)");
  si->add_option("--out", sim.out, "output directory")->required();

  ScoreOptions sc;
  auto* so = app.add_subcommand("score", "Compare verdicts with simulator ground truth");
  so->add_option("--verdicts", sc.verdicts, "verdicts")->required();
  so->add_option("--truth", sc.truth, "ground truth from simulate")->required();
  so->add_option("--out", sc.out, "output directory")->required();

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kOk;
  } catch (const CLI::CallForVersion&) {
    out << ROOTSPOOF_VERSION << '\n';
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n\n" << app.help();
    return kConfigError;
  }

  try {
    if (*ing) return run_ingest(ingest, out);
    if (*det) return run_detect(detect_opts, out);
    if (*va) return run_validate(val, out);
    if (*re) return run_report(rep, out);
    if (*si) return run_simulate(sim, out);
    if (*so) return run_score(sc, out);
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return kConfigError;
  } catch (const InputError& e) {
    err << "input error: " << e.what() << '\n';
    return kInputError;
  } catch (const InvariantViolation& e) {
    err << "invariant violation: " << e.what() << '\n';
    return kInvariantViolation;
  } catch (const IoError& e) {
    err << "i/o error: " << e.what() << '\n';
    return kIoError;
  } catch (const FetchError& e) {
    err << "fetch error: " << e.what() << '\n';
    return kIoError;
  } catch (const std::filesystem::filesystem_error& e) {
    err << "i/o error: " << e.what() << '\n';
    return kIoError;
  }
  err << app.help();
  return kConfigError;
}

}  // namespace rootspoof::cli
