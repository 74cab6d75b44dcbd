#include "fixtures.hpp"

#include <fstream>
#include <map>
#include <nlohmann/json.hpp>
#include <random>
#include <sstream>
#include <stdexcept>

#include "rootspoof/schedule.hpp"

namespace rootspoof::testing {

namespace fs = std::filesystem;
using nlohmann::json;

fs::path data_path(std::string_view relative) { return fs::path(ROOTSPOOF_DATA_DIR) / relative; }

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

void write_file(const fs::path& path, std::string_view content) {
  std::ofstream out(path, std::ios::binary);
  out << content;
  if (!out) throw std::runtime_error("cannot write " + path.string());
}

fs::path scratch_dir(std::string_view name) {
  static std::random_device rd;
  const auto dir = fs::temp_directory_path() / ("rootspoof-" + std::string(name) + "-" + std::to_string(rd()));
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

const PatternProfile& shipped_profile() {
  static const PatternProfile profile = [] {
    std::ifstream in(data_path("profiles/root-server-ids.profile"));
    return load_pattern_profile(in);
  }();
  return profile;
}

ScenarioConfig load_scenario_file(std::string_view relative) {
  std::ifstream in(data_path(relative));
  if (!in) throw std::runtime_error("missing scenario " + std::string(relative));
  return load_scenario(in);
}

static json load_json(std::string_view relative) { return json::parse(read_file(data_path(relative))); }

static Timestamp time_field(const json& j) {
  const auto t = parse_time(j.get<std::string>());
  if (!t) throw std::runtime_error("bad time in fixture");
  return *t;
}

static VantagePoint vp_record(const std::string& id, std::size_t n, const std::string& country) {
  VantagePoint vp;
  vp.vp_id = id;
  vp.public_prefix = Prefix24(Ipv4{0x0A000000u + static_cast<std::uint32_t>(n << 8)});
  vp.asn = 64512 + static_cast<std::uint32_t>(n % 500);
  vp.country = country;
  return vp;
}

static std::string vp_name(std::string_view stem, std::size_t n) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%05zu", n);
  return std::string(stem) + buf;
}

Population expand_epoch_fixture(std::string_view relative) {
  const json j = load_json(relative);
  const Timestamp t = time_field(j["window_start"]);
  std::vector<Letter> letters;
  for (char c : j["letters"].get<std::string>()) letters.push_back(letter_from(std::string(1, c)));
  const auto countries = j["countries"].get<std::vector<std::string>>();
  const auto unknown_every = j["unknown_country_every"].get<std::size_t>();

  Population pop;
  std::size_t n = 0;
  auto add_vp = [&](auto&& per_letter) {
    const std::string id = vp_name("vp", n);
    const std::string country = n % unknown_every == 0 ? "" : countries[n % countries.size()];
    pop.vps.emplace(id, vp_record(id, n, country));
    for (std::size_t i = 0; i < letters.size(); ++i) pop.verdicts.push_back(make_verdict(id, letters[i], t, per_letter(i)));
    ++n;
  };

  const json& vps = j["vps"];
  for (std::size_t k = 0; k < vps["valid"].get<std::size_t>(); ++k) add_vp([](std::size_t) { return Classification::valid; });
  for (std::size_t k = 0; k < vps["covert_delayed"].get<std::size_t>(); ++k)
    add_vp([](std::size_t i) { return i == 0 ? Classification::covert_delayed : Classification::valid; });
  for (std::size_t k = 0; k < vps["timeout"].get<std::size_t>(); ++k)
    add_vp([](std::size_t) { return Classification::timeout; });
  for (std::size_t k = 0; k < vps["insufficient"].get<std::size_t>(); ++k)
    add_vp([](std::size_t) { return Classification::insufficient; });
  for (const auto& [count_text, how_many] : j["spoofed_letter_counts"].items()) {
    const std::size_t spoofed_letters = std::stoul(count_text);
    for (std::size_t k = 0; k < how_many.get<std::size_t>(); ++k)
      add_vp([&](std::size_t i) { return i < spoofed_letters ? Classification::overt_spoofed : Classification::valid; });
  }
  std::sort(pop.verdicts.begin(), pop.verdicts.end(), verdict_order);
  return pop;
}

TrendSeries expand_trend(std::string_view relative) {
  const json j = load_json(relative);
  TrendSeries series;
  series.cohort_size = j["cohort_size"].get<std::size_t>();
  const std::size_t per_epoch = j["vps_per_epoch"].get<std::size_t>();
  const Letter letter = letter_from(j["letter"].get<std::string>());
  auto& pop = series.population;

  for (std::size_t c = 0; c < series.cohort_size; ++c) {
    const std::string id = vp_name("core", c);
    pop.vps.emplace(id, vp_record(id, c, "NL"));
  }
  std::size_t epoch_index = 0;
  for (const auto& e : j["epochs"]) {
    const Timestamp t = time_field(e["window_start"]);
    series.hours.push_back(t);
    const std::size_t core_spoofed = e["cohort_spoofed"].get<std::size_t>();
    const std::size_t others_spoofed = e["others_spoofed"].get<std::size_t>();
    for (std::size_t c = 0; c < series.cohort_size; ++c)
      pop.verdicts.push_back(make_verdict(vp_name("core", c), letter, t,
                                          c < core_spoofed ? Classification::overt_spoofed : Classification::valid));
    for (std::size_t k = 0; k < per_epoch - series.cohort_size; ++k) {
      const std::string id = vp_name("e" + std::to_string(epoch_index) + "-", k);
      pop.vps.emplace(id, vp_record(id, series.cohort_size + k, "DE"));
      pop.verdicts.push_back(
          make_verdict(id, letter, t, k < others_spoofed ? Classification::overt_spoofed : Classification::valid));
    }
    ++epoch_index;
  }
  std::sort(pop.verdicts.begin(), pop.verdicts.end(), verdict_order);
  return series;
}

Verdict make_verdict(std::string vp_id, Letter letter, Timestamp window_start, Classification c) {
  Verdict v;
  v.vp_id = std::move(vp_id);
  v.letter = letter;
  v.window_start = window_start;
  v.classification = c;
  if (c == Classification::overt_spoofed) v.mechanism = Mechanism::non_anycast;
  return v;
}

DnsObservation dns_answer(std::string vp, Letter letter, Timestamp t, std::string server_id, double rtt) {
  return DnsObservation{std::move(vp), letter, t, DnsOutcome::answered, std::move(server_id), rtt};
}

DnsObservation dns_timeout(std::string vp, Letter letter, Timestamp t) {
  return DnsObservation{std::move(vp), letter, t, DnsOutcome::timeout, std::nullopt, std::nullopt};
}

PingObservation ping(std::string vp, Letter letter, Timestamp t, std::optional<double> rtt) {
  return PingObservation{std::move(vp), letter, t, rtt};
}

TracerouteObservation trace(std::string vp, Letter letter, Timestamp t, std::vector<std::optional<Ipv4>> responders,
                            bool reached) {
  TracerouteObservation tr{std::move(vp), letter, t, {}, reached};
  int ttl = 1;
  for (auto& r : responders) tr.hops.push_back(Hop{ttl++, r});
  if (reached) tr.hops.push_back(Hop{ttl, service_letter(letter).service_address});
  return tr;
}

Ipv4 ip(std::string_view text) {
  const auto a = Ipv4::parse(text);
  if (!a) throw std::invalid_argument("bad address in test");
  return *a;
}

HourlyWindow latency_window(Letter letter, Timestamp start, const std::string& server_id,
                            const std::vector<double>& dns_rtts, const std::vector<double>& ping_rtts) {
  HourlyWindow w;
  w.vp_id = "vp00001";
  w.letter = letter;
  w.window_start = start;
  for (std::size_t i = 0; i < dns_rtts.size(); ++i)
    w.dns.push_back(dns_answer(w.vp_id, letter, start + 240 * static_cast<Timestamp>(i), server_id, dns_rtts[i]));
  for (std::size_t i = 0; i < ping_rtts.size(); ++i)
    w.ping.push_back(ping(w.vp_id, letter, start + 240 * static_cast<Timestamp>(i) + 5, ping_rtts[i]));
  return w;
}

}  // namespace rootspoof::testing
