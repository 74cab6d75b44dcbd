#include "rootspoof/simulate.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <set>

#include <nlohmann/json.hpp>

#include "rootspoof/parallel.hpp"
#include "rootspoof/records.hpp"
#include "rootspoof/schedule.hpp"

namespace rootspoof {

using nlohmann::json;

namespace {

constexpr std::array<AdversaryKind, 6> kKinds{AdversaryKind::honest,           AdversaryKind::overt_proxy,
                                              AdversaryKind::overt_injector,   AdversaryKind::anycast_hijacker,
                                              AdversaryKind::covert_delayer,   AdversaryKind::flapper};

constexpr std::array<const char*, 25> kSiteCodes{"lax", "lon", "nrt", "fra", "ams", "sin", "syd", "gru", "jnb",
                                                 "iad", "ord", "mia", "sea", "dfw", "cdg", "mad", "arn", "waw",
                                                 "hkg", "icn", "bom", "dxb", "yyz", "mex", "scl"};

// Small footprints for B, G and H; large ones for the widely deployed letters.
constexpr std::array<int, kLetterCount> kSitesPerLetter{6, 3, 8, 20, 15, 25, 6, 4, 20, 25, 20, 25, 8};

constexpr std::array<const char*, 20> kCountries{"US", "DE", "GB", "FR", "NL", "RU", "JP", "BR", "IN", "ID",
                                                 "IR", "CN", "AU", "CA", "IT", "ES", "PL", "ZA", "KR", "SE"};

std::string server_id_for(Letter letter, const std::string& site, int n) {
  const std::string num = std::to_string(n);
  switch (letter) {
    case Letter::A: return "nnn1-" + site + num;
    case Letter::B: return "b" + num + "-" + site;
    case Letter::C: return site + num + "a.c.root-servers.org";
    case Letter::D: return site + num + "b.droot.maxgigapop.net";
    case Letter::E: return num + "a." + site + ".e.e-root";
    case Letter::F: return site + num + "f.f.root-servers.org";
    case Letter::G: return "g" + num + "-" + site;
    case Letter::H: {
      char buf[8];
      std::snprintf(buf, sizeof buf, "%03d", n);
      return std::string(buf) + "." + site + ".h.root-servers.org";
    }
    case Letter::I: return "s" + num + "." + site;
    case Letter::J: return "rootns-" + site + num;
    case Letter::K: return "ns" + num + ".us-" + site + ".k.ripe.net";
    case Letter::L: return std::string("a") + static_cast<char>('a' + n) + ".us-" + site + ".l.root";
    case Letter::M: return "m-" + site + "-" + num;
  }
  return site;
}

// Penultimate hop of an authentic site: 172.(16+letter).(site+1).1
Ipv4 site_hop(Letter letter, std::size_t site) {
  return Ipv4{(172u << 24) | ((16u + static_cast<std::uint32_t>(letter_index(letter))) << 16) |
              (static_cast<std::uint32_t>(site + 1) << 8) | 1u};
}

// Queries leave from 10.x.y.0/24; stale metadata points at 11.x.y.0/24.
Prefix24 vp_prefix(std::size_t index, bool stale) {
  const auto n = static_cast<std::uint32_t>(index + 1);
  return Prefix24(Ipv4{((stale ? 11u : 10u) << 24) | ((n >> 8 & 0xFFu) << 16) | ((n & 0xFFu) << 8)});
}

std::string vp_name(std::size_t index) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "vp%05zu", index + 1);
  return buf;
}

[[noreturn]] void bad(const std::string& what) { throw ConfigError("scenario: " + what); }

}  // namespace

std::string_view to_string(AdversaryKind k) {
  switch (k) {
    case AdversaryKind::honest: return "honest";
    case AdversaryKind::overt_proxy: return "overt_proxy";
    case AdversaryKind::overt_injector: return "overt_injector";
    case AdversaryKind::anycast_hijacker: return "anycast_hijacker";
    case AdversaryKind::covert_delayer: return "covert_delayer";
    case AdversaryKind::flapper: return "flapper";
  }
  return "?";
}

std::optional<AdversaryKind> parse_adversary_kind(std::string_view text) {
  for (auto k : kKinds) {
    if (to_string(k) == text) return k;
  }
  return std::nullopt;
}

std::string_view to_string(Impairment i) {
  switch (i) {
    case Impairment::none: return "none";
    case Impairment::blackhole: return "blackhole";
    case Impairment::reply_lost: return "reply_lost";
    case Impairment::stale_prefix: return "stale_prefix";
  }
  return "?";
}

namespace {

std::optional<Impairment> parse_impairment(std::string_view text) {
  for (auto i : {Impairment::none, Impairment::blackhole, Impairment::reply_lost, Impairment::stale_prefix}) {
    if (to_string(i) == text) return i;
  }
  return std::nullopt;
}

}  // namespace

double DelaySpec::draw(std::size_t member, Rng& rng) const {
  if (!values.empty()) return values[member % values.size()];
  if (mean) return rng.normal(*mean, sd.value_or(0.0));
  if (min && max) return rng.uniform(*min, *max);
  return 0;
}

bool AdversaryGroup::drops_query() const {
  switch (kind) {
    case AdversaryKind::overt_proxy:
    case AdversaryKind::anycast_hijacker:
    case AdversaryKind::flapper: return true;
    default: return false;
  }
}

std::vector<SiteTemplate> default_topology(Letter letter) {
  std::vector<SiteTemplate> sites;
  const auto l = letter_index(letter);
  for (int s = 0; s < kSitesPerLetter[l]; ++s) {
    SiteTemplate site;
    site.code = kSiteCodes[(l * 7 + static_cast<std::size_t>(s)) % kSiteCodes.size()];
    for (int n = 1; n <= 2; ++n) site.server_ids.push_back(server_id_for(letter, site.code, n));
    site.penultimate_hop = site_hop(letter, static_cast<std::size_t>(s));
    sites.push_back(std::move(site));
  }
  return sites;
}

void ScenarioConfig::validate() const {
  if (n_vps == 0 || n_vps > 60000) bad("n_vps must be in [1, 60000]");
  if (letters.empty()) bad("no letters to simulate");
  if (std::set<Letter>(letters.begin(), letters.end()).size() != letters.size()) bad("duplicate letter");
  if (hours.empty()) bad("no sampled hours");
  auto sorted = hours;
  std::sort(sorted.begin(), sorted.end());
  for (std::size_t i = 1; i < sorted.size(); ++i) {
    if (sorted[i] - sorted[i - 1] < kWindowLength) bad("sampled hours overlap");
  }
  if (groups.empty()) bad("no adversary groups");

  const bool by_count = groups.front().count.has_value();
  std::size_t total = 0;
  double mass = 0;
  for (const auto& g : groups) {
    const std::string who = "group '" + (g.label.empty() ? std::string(to_string(g.kind)) : g.label) + "': ";
    if (g.count.has_value() == g.probability.has_value()) bad(who + "needs exactly one of count or probability");
    if (g.count.has_value() != by_count) bad(who + "groups must all use counts or all use probabilities");
    if (g.count) total += *g.count;
    if (g.probability) {
      if (!(*g.probability >= 0 && *g.probability <= 1)) bad(who + "probability outside [0, 1]");
      mass += *g.probability;
    }
    const bool spoofs = g.kind == AdversaryKind::overt_proxy || g.kind == AdversaryKind::overt_injector ||
                        g.kind == AdversaryKind::anycast_hijacker || g.kind == AdversaryKind::flapper;
    if (spoofs && g.spoof_server_ids.empty() && !g.mimic) bad(who + "needs spoof_server_id");
    if (!spoofs && !g.spoof_server_ids.empty()) bad(who + "only spoofing kinds take spoof_server_id");
    if (g.mimic && g.kind != AdversaryKind::overt_proxy && g.kind != AdversaryKind::overt_injector) {
      bad(who + "mimic applies to proxies and injectors only");
    }
    if (g.drop_query && *g.drop_query != g.drops_query()) {
      bad(who + std::string(to_string(g.kind)) + " requires drop_query " + (g.drops_query() ? "true" : "false"));
    }
    const auto& d = g.added_delay;
    const bool has_delay = !d.values.empty() || d.mean || (d.min && d.max);
    if (g.kind == AdversaryKind::covert_delayer && !has_delay) bad(who + "covert_delayer needs added_delay_ms");
    if (g.kind != AdversaryKind::covert_delayer && has_delay) bad(who + "added_delay_ms is for covert_delayer only");
    if (d.min && d.max && *d.min > *d.max) bad(who + "added_delay_ms min exceeds max");
    if (!(g.reach_probability > 0 && g.reach_probability <= 1)) bad(who + "reach_probability outside (0, 1]");
    for (char c : g.affected_letters) {
      auto l = parse_letter(std::string_view(&c, 1));
      if (!l || std::find(letters.begin(), letters.end(), *l) == letters.end()) {
        bad(who + "affected letter '" + std::string(1, c) + "' is not simulated");
      }
    }
    if (g.affected_letter_count) {
      auto [lo, hi] = *g.affected_letter_count;
      if (lo < 1 || lo > hi || hi > static_cast<int>(letters.size())) bad(who + "affected_letter_count out of range");
    }
  }
  if (by_count && total != n_vps) bad("group counts sum to " + std::to_string(total) + ", not n_vps");
  if (!by_count && std::fabs(mass - 1.0) > 1e-9) bad("group probabilities do not sum to 1");

  if (!(jitter_mad_ms >= 0) || !(spike_mean_ms >= 0)) bad("jitter must be non-negative");
  for (double p : {spike_rate, dns_loss, ping_loss, catchment_flip_rate}) {
    if (!(p >= 0 && p < 1)) bad("rates must lie in [0, 1)");
  }
  if (fixed_base_rtt_ms && !(*fixed_base_rtt_ms > 0)) bad("fixed base RTT must be positive");
  if (!(base_rtt_floor_ms >= 0) || !(footprint_scale_ms >= 0)) bad("base RTT parameters must be non-negative");
  if (!(local_rtt_min_ms > 0) || local_rtt_min_ms > local_rtt_max_ms) bad("local RTT range is invalid");
  for (Timestamp iv : {dns_interval, ping_interval, traceroute_interval}) {
    if (iv <= 0 || iv > kWindowLength) bad("probe intervals must lie in (0, 3600]");
  }
  for (std::size_t l = 0; l < kLetterCount; ++l) {
    for (const auto& site : topology[l]) {
      if (site.code.empty() || site.server_ids.empty()) bad("topology site without code or server ids");
    }
  }
}

namespace {

std::vector<Letter> letters_from(const json& j, const char* key) {
  std::vector<Letter> out;
  auto text = j.get<std::string>();
  for (char c : text) {
    auto l = parse_letter(std::string_view(&c, 1));
    if (!l) bad(std::string(key) + ": '" + std::string(1, c) + "' is not a root letter");
    out.push_back(*l);
  }
  std::sort(out.begin(), out.end());
  return out;
}

Timestamp time_from(const json& j) {
  if (j.is_number_integer()) return j.get<Timestamp>();
  auto t = parse_time(j.get<std::string>());
  if (!t) bad("unparseable time '" + j.get<std::string>() + "'");
  return *t;
}

void check_keys(const json& obj, std::initializer_list<const char*> allowed, const std::string& where) {
  for (const auto& [key, value] : obj.items()) {
    if (std::find_if(allowed.begin(), allowed.end(), [&](const char* a) { return key == a; }) == allowed.end()) {
      bad(where + ": unknown key '" + key + "'");
    }
  }
}

DelaySpec delay_from(const json& j) {
  DelaySpec d;
  if (j.is_number()) {
    d.values.push_back(j.get<double>());
  } else if (j.is_array()) {
    d.values = j.get<std::vector<double>>();
  } else if (j.is_object()) {
    check_keys(j, {"values", "mean", "sd", "min", "max"}, "added_delay_ms");
    if (j.contains("values")) d.values = j["values"].get<std::vector<double>>();
    if (j.contains("mean")) d.mean = j["mean"].get<double>();
    if (j.contains("sd")) d.sd = j["sd"].get<double>();
    if (j.contains("min")) d.min = j["min"].get<double>();
    if (j.contains("max")) d.max = j["max"].get<double>();
  } else {
    bad("added_delay_ms must be a number, list or object");
  }
  return d;
}

AdversaryGroup group_from(const json& j) {
  check_keys(j,
             {"label", "kind", "count", "probability", "spoof_server_id", "mimic", "added_delay_ms", "affected_letters",
              "affected_letter_count", "drop_query", "impairment", "reach_probability"},
             "group");
  AdversaryGroup g;
  auto kind = parse_adversary_kind(j.at("kind").get<std::string>());
  if (!kind) bad("unknown adversary kind '" + j.at("kind").get<std::string>() + "'");
  g.kind = *kind;
  g.label = j.value("label", std::string(to_string(g.kind)));
  if (j.contains("count")) g.count = j["count"].get<std::size_t>();
  if (j.contains("probability")) g.probability = j["probability"].get<double>();
  if (j.contains("spoof_server_id")) {
    const auto& ids = j["spoof_server_id"];
    g.spoof_server_ids = ids.is_array() ? ids.get<std::vector<std::string>>()
                                        : std::vector<std::string>{ids.get<std::string>()};
  }
  g.mimic = j.value("mimic", false);
  if (j.contains("added_delay_ms")) g.added_delay = delay_from(j["added_delay_ms"]);
  g.affected_letters = j.value("affected_letters", std::string());
  if (j.contains("affected_letter_count")) {
    const auto& c = j["affected_letter_count"];
    g.affected_letter_count = std::pair{c.at("min").get<int>(), c.at("max").get<int>()};
  }
  if (j.contains("drop_query")) g.drop_query = j["drop_query"].get<bool>();
  if (j.contains("impairment")) {
    auto imp = parse_impairment(j["impairment"].get<std::string>());
    if (!imp) bad("unknown impairment '" + j["impairment"].get<std::string>() + "'");
    g.impairment = *imp;
  }
  g.reach_probability = j.value("reach_probability", 1.0);
  return g;
}

}  // namespace

ScenarioConfig load_scenario(std::istream& in) {
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    bad(std::string("not valid JSON: ") + e.what());
  }
  if (!j.is_object()) bad("top level must be an object");
  ScenarioConfig c;
  try {
    check_keys(j,
               {"name", "description", "seed", "n_vps", "letters", "hours", "daily", "server_log_letters", "groups",
                "jitter", "loss", "catchment_flip_rate", "base_rtt", "local_rtt", "background_log_records",
                "intervals", "topology"},
               "scenario");
    c.name = j.value("name", std::string());
    c.seed = j.at("seed").get<std::uint64_t>();
    c.n_vps = j.at("n_vps").get<std::size_t>();
    c.letters = letters_from(j.at("letters"), "letters");
    if (j.contains("hours")) {
      for (const auto& h : j["hours"]) c.hours.push_back(time_from(h));
    }
    if (j.contains("daily")) {
      const auto& d = j["daily"];
      check_keys(d, {"first_day", "days", "per_day"}, "daily");
      c.hours = daily_sampling_schedule(time_from(d.at("first_day")), d.at("days").get<int>(),
                                        d.at("per_day").get<int>(), derive_seed(c.seed, "schedule"));
    }
    std::sort(c.hours.begin(), c.hours.end());
    if (j.contains("server_log_letters")) c.server_log_letters = letters_from(j["server_log_letters"], "server_log_letters");
    for (const auto& g : j.at("groups")) c.groups.push_back(group_from(g));
    if (j.contains("jitter")) {
      const auto& jt = j["jitter"];
      check_keys(jt, {"mad_ms", "spike_rate", "spike_mean_ms"}, "jitter");
      c.jitter_mad_ms = jt.value("mad_ms", c.jitter_mad_ms);
      c.spike_rate = jt.value("spike_rate", c.spike_rate);
      c.spike_mean_ms = jt.value("spike_mean_ms", c.spike_mean_ms);
    }
    if (j.contains("loss")) {
      check_keys(j["loss"], {"dns", "ping"}, "loss");
      c.dns_loss = j["loss"].value("dns", 0.0);
      c.ping_loss = j["loss"].value("ping", 0.0);
    }
    c.catchment_flip_rate = j.value("catchment_flip_rate", 0.0);
    if (j.contains("base_rtt")) {
      const auto& b = j["base_rtt"];
      check_keys(b, {"fixed_ms", "floor_ms", "footprint_scale_ms"}, "base_rtt");
      if (b.contains("fixed_ms")) c.fixed_base_rtt_ms = b["fixed_ms"].get<double>();
      c.base_rtt_floor_ms = b.value("floor_ms", c.base_rtt_floor_ms);
      c.footprint_scale_ms = b.value("footprint_scale_ms", c.footprint_scale_ms);
    }
    if (j.contains("local_rtt")) {
      check_keys(j["local_rtt"], {"min_ms", "max_ms"}, "local_rtt");
      c.local_rtt_min_ms = j["local_rtt"].value("min_ms", c.local_rtt_min_ms);
      c.local_rtt_max_ms = j["local_rtt"].value("max_ms", c.local_rtt_max_ms);
    }
    c.background_log_records = j.value("background_log_records", std::size_t{0});
    if (j.contains("intervals")) {
      const auto& iv = j["intervals"];
      check_keys(iv, {"dns_s", "ping_s", "traceroute_s"}, "intervals");
      c.dns_interval = iv.value("dns_s", c.dns_interval);
      c.ping_interval = iv.value("ping_s", c.ping_interval);
      c.traceroute_interval = iv.value("traceroute_s", c.traceroute_interval);
    }
    if (j.contains("topology")) {
      for (const auto& [key, sites] : j["topology"].items()) {
        auto l = key.size() == 1 ? parse_letter(key) : std::nullopt;
        if (!l) bad("topology key '" + key + "' is not a root letter");
        for (const auto& s : sites) {
          check_keys(s, {"site", "server_ids", "penultimate_hop"}, "topology site");
          SiteTemplate t;
          t.code = s.at("site").get<std::string>();
          t.server_ids = s.at("server_ids").get<std::vector<std::string>>();
          auto hop = Ipv4::parse(s.at("penultimate_hop").get<std::string>());
          if (!hop) bad("topology site '" + t.code + "' has a bad penultimate_hop");
          t.penultimate_hop = *hop;
          c.topology[letter_index(*l)].push_back(std::move(t));
        }
      }
    }
  } catch (const json::exception& e) {
    bad(std::string("bad field: ") + e.what());
  } catch (const InputError& e) {
    bad(e.what());
  }
  c.validate();
  return c;
}

namespace {

struct VpPlan {
  std::size_t index = 0;
  const AdversaryGroup* group = nullptr;
  std::size_t member = 0;  // position among the group's VPs
};

struct VpOutput {
  VantagePoint vp;
  std::vector<DnsObservation> dns;
  std::vector<PingObservation> ping;
  std::vector<TracerouteObservation> traceroute;
  std::vector<ServerLogRecord> log;
  std::vector<GroundTruthWindow> truth;
};

std::vector<VpPlan> assign_groups(const ScenarioConfig& config) {
  std::vector<VpPlan> plans(config.n_vps);
  Rng rng(derive_seed(config.seed, "assign"));
  if (config.groups.front().count) {
    std::vector<const AdversaryGroup*> slots;
    for (const auto& g : config.groups) slots.insert(slots.end(), *g.count, &g);
    for (std::size_t i = slots.size(); i > 1; --i) std::swap(slots[i - 1], slots[rng.below(i)]);
    for (std::size_t i = 0; i < plans.size(); ++i) plans[i].group = slots[i];
  } else {
    for (auto& p : plans) {
      double u = rng.uniform(), acc = 0;
      p.group = &config.groups.back();
      for (const auto& g : config.groups) {
        acc += *g.probability;
        if (u < acc) {
          p.group = &g;
          break;
        }
      }
    }
  }
  std::map<const AdversaryGroup*, std::size_t> members;
  for (std::size_t i = 0; i < plans.size(); ++i) {
    plans[i].index = i;
    plans[i].member = members[plans[i].group]++;
  }
  return plans;
}

class VpSimulator {
 public:
  VpSimulator(const ScenarioConfig& config, const std::array<std::vector<SiteTemplate>, kLetterCount>& topology,
              const VpPlan& plan)
      : config_(config), topology_(topology), group_(*plan.group), rng_(derive_seed(config.seed, plan.index)) {
    out_.vp.vp_id = vp_name(plan.index);
    source_ = vp_prefix(plan.index, false);
    out_.vp.public_prefix = vp_prefix(plan.index, group_.impairment == Impairment::stale_prefix);
    out_.vp.asn = 64512 + static_cast<std::uint32_t>(rng_.below(400));
    out_.vp.country = kCountries[rng_.below(kCountries.size())];
    foreign_hop_ = Ipv4{(203u << 24) | (113u << 8) | static_cast<std::uint32_t>(1 + plan.index % 250)};

    if (!group_.spoof_server_ids.empty()) spoof_id_ = group_.spoof_server_ids[rng_.below(group_.spoof_server_ids.size())];
    delay_ = group_.kind == AdversaryKind::covert_delayer ? group_.added_delay.draw(plan.member, rng_) : 0.0;
    flap_phase_ = rng_.below(3);
    choose_affected_letters();
  }

  VpOutput run() {
    for (Letter letter : config_.letters) {
      const auto& sites = topology_[letter_index(letter)];
      LetterPlan lp;
      lp.letter = letter;
      lp.site = rng_.below(sites.size());
      lp.alt_site = sites.size() > 1 ? (lp.site + 1 + rng_.below(sites.size() - 1)) % sites.size() : lp.site;
      lp.base = base_rtt(sites.size());
      lp.alt_base = lp.base + rng_.uniform(5, 30);
      lp.local = rng_.uniform(config_.local_rtt_min_ms, config_.local_rtt_max_ms);
      lp.affected = affected_[letter_index(letter)];
      for (Timestamp hour : config_.hours) simulate_window(lp, sites, hour);
    }
    return std::move(out_);
  }

 private:
  struct LetterPlan {
    Letter letter;
    std::size_t site = 0, alt_site = 0;
    double base = 0, alt_base = 0, local = 0;
    bool affected = false;
  };

  void choose_affected_letters() {
    if (group_.kind == AdversaryKind::honest) return;
    if (!group_.affected_letters.empty()) {
      for (char c : group_.affected_letters) affected_[letter_index(*parse_letter(std::string_view(&c, 1)))] = true;
      return;
    }
    if (group_.affected_letter_count) {
      auto [lo, hi] = *group_.affected_letter_count;
      const auto k = static_cast<std::size_t>(lo) + rng_.below(static_cast<std::uint64_t>(hi - lo + 1));
      auto pool = config_.letters;
      for (std::size_t i = pool.size(); i > 1; --i) std::swap(pool[i - 1], pool[rng_.below(i)]);
      for (std::size_t i = 0; i < k; ++i) affected_[letter_index(pool[i])] = true;
      return;
    }
    for (Letter l : config_.letters) affected_[letter_index(l)] = true;
  }

  double base_rtt(std::size_t n_sites) {
    if (config_.fixed_base_rtt_ms) return *config_.fixed_base_rtt_ms;
    return config_.base_rtt_floor_ms + rng_.uniform() * config_.footprint_scale_ms / static_cast<double>(n_sites);
  }

  double noisy(double rtt) {
    double v = rtt;
    if (config_.jitter_mad_ms > 0) v += rng_.normal(0.0, 1.482602218505602 * config_.jitter_mad_ms);
    if (config_.spike_rate > 0 && rng_.chance(config_.spike_rate)) v += rng_.exponential(config_.spike_mean_ms);
    return quantize_rtt(std::max(v, 0.1));
  }

  bool logged(Letter letter) const {
    return std::find(config_.server_log_letters.begin(), config_.server_log_letters.end(), letter) !=
           config_.server_log_letters.end();
  }

  void simulate_window(const LetterPlan& lp, const std::vector<SiteTemplate>& sites, Timestamp start) {
    const AdversaryKind kind = lp.affected ? group_.kind : AdversaryKind::honest;
    const Letter letter = lp.letter;
    const bool icmp = service_letter(letter).icmp_responsive;
    const bool log_letter = logged(letter);

    GroundTruthWindow truth;
    truth.vp_id = out_.vp.vp_id;
    truth.letter = letter;
    truth.window_start = start;
    truth.kind = kind;
    truth.impairment = group_.impairment;
    if (kind == AdversaryKind::covert_delayer) truth.added_delay_ms = delay_;

    // A catchment flip sends a minority tail of the hour's DNS queries to another site.
    const Timestamp dns_offset = static_cast<Timestamp>(rng_.below(static_cast<std::uint64_t>(config_.dns_interval)));
    const auto n_dns = static_cast<std::size_t>((kWindowLength - dns_offset + config_.dns_interval - 1) / config_.dns_interval);
    std::size_t flip_from = n_dns;
    if (config_.catchment_flip_rate > 0 && rng_.chance(config_.catchment_flip_rate)) {
      flip_from = n_dns - 1 - rng_.below(std::max<std::size_t>(1, (n_dns - 1) / 2 - 1));
    }

    bool any_spoof = false, any_answer = false, any_timeout = false;
    for (std::size_t k = 0; k < n_dns; ++k) {
      const Timestamp t = start + dns_offset + static_cast<Timestamp>(k) * config_.dns_interval;
      const bool flipped = k >= flip_from;
      const auto& site = sites[flipped ? lp.alt_site : lp.site];
      const double base = flipped ? lp.alt_base : lp.base;
      const std::string& authentic = site.server_ids[rng_.below(site.server_ids.size())];

      DnsObservation obs{out_.vp.vp_id, letter, t, DnsOutcome::timeout, std::nullopt, std::nullopt};
      bool reached = false;
      auto answer = [&](const std::string& id, double rtt) {
        obs.outcome = DnsOutcome::answered;
        obs.server_id = id;
        obs.rtt = noisy(rtt);
      };
      const std::string spoof = group_.mimic ? sites[lp.site].server_ids.front() : spoof_id_;

      if (group_.impairment == Impairment::blackhole) {
        // dropped on the way out
      } else if (group_.impairment == Impairment::reply_lost) {
        reached = rng_.chance(group_.reach_probability) || (k + 1 == n_dns && truth.queries_reached == 0);
      } else if (config_.dns_loss > 0 && rng_.chance(config_.dns_loss)) {
        // lost before the server
      } else {
        switch (kind) {
          case AdversaryKind::honest:
            answer(authentic, base);
            reached = true;
            break;
          case AdversaryKind::overt_proxy:
            answer(spoof, lp.local);
            any_spoof = true;
            break;
          case AdversaryKind::overt_injector:
            answer(spoof, lp.local);
            any_spoof = true;
            reached = true;
            break;
          case AdversaryKind::anycast_hijacker:
            answer(spoof, lp.local);
            any_spoof = true;
            break;
          case AdversaryKind::covert_delayer:
            answer(authentic, base + std::max(delay_, 0.0));
            reached = true;
            break;
          case AdversaryKind::flapper:
            switch ((k + flap_phase_) % 3) {
              case 0:
                answer(spoof_id_, lp.local);
                any_spoof = true;
                break;
              case 1:
                answer(authentic, base);
                reached = true;
                break;
              default: break;  // intercepted and dropped
            }
            break;
        }
      }
      any_answer = any_answer || obs.outcome == DnsOutcome::answered;
      any_timeout = any_timeout || obs.outcome == DnsOutcome::timeout;
      ++truth.queries_sent;
      if (reached) {
        ++truth.queries_reached;
        if (log_letter) {
          out_.log.push_back({t + static_cast<Timestamp>(rng_.below(2)), source_, std::string(kChaosQueryType),
                              std::string(kServerIdQname), letter});
        }
      }
      out_.dns.push_back(std::move(obs));
    }

    const Timestamp ping_offset = static_cast<Timestamp>(rng_.below(static_cast<std::uint64_t>(config_.ping_interval)));
    for (Timestamp t = start + ping_offset; t < start + kWindowLength; t += config_.ping_interval) {
      PingObservation p{out_.vp.vp_id, letter, t, std::nullopt};
      const bool lost = config_.ping_loss > 0 && rng_.chance(config_.ping_loss);
      if (icmp && !lost) {
        if (kind == AdversaryKind::anycast_hijacker) {
          p.rtt = noisy(lp.local);
        } else {
          p.rtt = noisy(lp.base + (kind == AdversaryKind::covert_delayer ? std::max(-delay_, 0.0) : 0.0));
        }
      }
      out_.ping.push_back(std::move(p));
    }

    const Timestamp tr_offset =
        static_cast<Timestamp>(rng_.below(static_cast<std::uint64_t>(config_.traceroute_interval)));
    for (Timestamp t = start + tr_offset; t < start + kWindowLength; t += config_.traceroute_interval) {
      TracerouteObservation tr{out_.vp.vp_id, letter, t, {}, true};
      tr.hops.push_back({1, Ipv4{(192u << 24) | (168u << 16) | (1u << 8) | 1u}});
      tr.hops.push_back({2, Ipv4{source_.network() | 1u}});
      tr.hops.push_back({3, rng_.chance(0.2) ? std::nullopt : std::optional<Ipv4>(Ipv4{(100u << 24) | (64u << 16) | 1u})});
      tr.hops.push_back({4, kind == AdversaryKind::anycast_hijacker ? foreign_hop_ : sites[lp.site].penultimate_hop});
      tr.hops.push_back({5, service_letter(letter).service_address});
      out_.traceroute.push_back(std::move(tr));
    }

    if (any_spoof) {
      truth.label = Classification::overt_spoofed;
      switch (kind) {
        case AdversaryKind::overt_injector: truth.mechanism = Mechanism::injection; break;
        case AdversaryKind::anycast_hijacker: truth.mechanism = Mechanism::anycast; break;
        default: truth.mechanism = Mechanism::proxy; break;
      }
    } else if (any_answer) {
      truth.label = kind == AdversaryKind::covert_delayer && icmp ? Classification::covert_delayed : Classification::valid;
    } else if (any_timeout) {
      truth.label = Classification::timeout;
    }
    out_.truth.push_back(std::move(truth));
  }

  const ScenarioConfig& config_;
  const std::array<std::vector<SiteTemplate>, kLetterCount>& topology_;
  const AdversaryGroup& group_;
  Rng rng_;
  VpOutput out_;
  Prefix24 source_;
  Ipv4 foreign_hop_;
  std::string spoof_id_;
  double delay_ = 0;
  std::uint64_t flap_phase_ = 0;
  std::array<bool, kLetterCount> affected_{};
};

template <typename T>
void append(std::vector<T>& to, std::vector<T>& from) {
  to.insert(to.end(), std::make_move_iterator(from.begin()), std::make_move_iterator(from.end()));
  from.clear();
}

}  // namespace

SimulationOutput generate(const ScenarioConfig& config, unsigned workers) {
  config.validate();
  std::array<std::vector<SiteTemplate>, kLetterCount> topology;
  for (auto letter : all_letters()) {
    const auto i = letter_index(letter);
    topology[i] = config.topology[i].empty() ? default_topology(letter) : config.topology[i];
  }

  const auto plans = assign_groups(config);
  std::vector<VpOutput> per_vp(plans.size());
  parallel_for(plans.size(), workers, [&](std::size_t i) { per_vp[i] = VpSimulator(config, topology, plans[i]).run(); });

  SimulationOutput out;
  out.schedule = config.hours;
  for (auto& v : per_vp) {
    out.vps.push_back(std::move(v.vp));
    append(out.observations.dns, v.dns);
    append(out.observations.ping, v.ping);
    append(out.observations.traceroute, v.traceroute);
    append(out.server_log, v.log);
    append(out.truth, v.truth);
  }

  Rng rng(derive_seed(config.seed, "background"));
  for (std::size_t i = 0; i < config.background_log_records; ++i) {
    const Timestamp hour = config.hours[rng.below(config.hours.size())];
    const Timestamp t = hour + static_cast<Timestamp>(rng.below(kWindowLength));
    const Letter letter = config.server_log_letters.empty()
                              ? Letter::B
                              : config.server_log_letters[rng.below(config.server_log_letters.size())];
    if (rng.chance(0.5) || out.vps.empty()) {
      // Other resolvers asking the same question from 198.18.0.0/15.
      const auto host = static_cast<std::uint32_t>(rng.below(1u << 9));  // the /24s of a /15
      out.server_log.push_back({t, Prefix24(Ipv4{(198u << 24) | (18u << 16) | (host << 8)}),
                                std::string(kChaosQueryType), std::string(kServerIdQname), letter});
    } else {
      // Ordinary traffic from a VP's network that must not count as a match.
      const auto& vp = out.vps[rng.below(out.vps.size())];
      out.server_log.push_back({t, vp.public_prefix, "IN SOA", ".", letter});
    }
  }
  if (config.server_log_letters.empty()) out.server_log.clear();

  std::sort(out.observations.dns.begin(), out.observations.dns.end());
  std::sort(out.observations.ping.begin(), out.observations.ping.end());
  std::sort(out.observations.traceroute.begin(), out.observations.traceroute.end());
  std::sort(out.server_log.begin(), out.server_log.end());
  std::sort(out.truth.begin(), out.truth.end(), [](const GroundTruthWindow& a, const GroundTruthWindow& b) {
    return std::tie(a.vp_id, a.letter, a.window_start) < std::tie(b.vp_id, b.letter, b.window_start);
  });

  out.known_sites.source_date = "simulated";
  for (auto letter : all_letters()) {
    auto& entry = out.known_sites.letters[letter_index(letter)];
    for (const auto& site : topology[letter_index(letter)]) {
      entry.sites.insert(site.code);
      entry.penultimate_hops.insert(site.penultimate_hop);
    }
  }
  return out;
}

std::string serialize(const GroundTruthWindow& t) {
  nlohmann::ordered_json j = {{"vp_id", t.vp_id},
                              {"letter", std::string(1, letter_char(t.letter))},
                              {"window_start", t.window_start},
                              {"kind", to_string(t.kind)},
                              {"impairment", to_string(t.impairment)},
                              {"label", to_string(t.label)}};
  if (t.mechanism) j["mechanism"] = to_string(*t.mechanism);
  j["queries_sent"] = t.queries_sent;
  j["queries_reached"] = t.queries_reached;
  if (t.added_delay_ms) j["added_delay_ms"] = *t.added_delay_ms;
  return j.dump();
}

std::vector<GroundTruthWindow> read_ground_truth(std::istream& in) {
  std::vector<GroundTruthWindow> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    auto fail = [&](const std::string& why) -> void {
      throw InputError("ground truth line " + std::to_string(line_no) + ": " + why);
    };
    try {
      auto j = json::parse(line);
      GroundTruthWindow t;
      t.vp_id = j.at("vp_id").get<std::string>();
      t.letter = letter_from(j.at("letter").get<std::string>());
      t.window_start = j.at("window_start").get<Timestamp>();
      auto kind = parse_adversary_kind(j.at("kind").get<std::string>());
      auto imp = parse_impairment(j.value("impairment", std::string("none")));
      auto label = parse_classification(j.at("label").get<std::string>());
      if (!kind || !imp || !label) fail("unknown kind, impairment or label");
      t.kind = *kind;
      t.impairment = *imp;
      t.label = *label;
      if (j.contains("mechanism")) {
        auto m = parse_mechanism(j["mechanism"].get<std::string>());
        if (!m) fail("unknown mechanism");
        t.mechanism = *m;
      }
      t.queries_sent = j.value("queries_sent", std::size_t{0});
      t.queries_reached = j.value("queries_reached", std::size_t{0});
      if (j.contains("added_delay_ms")) t.added_delay_ms = j["added_delay_ms"].get<double>();
      out.push_back(std::move(t));
    } catch (const json::exception& e) {
      fail(e.what());
    }
  }
  return out;
}

namespace {

void finish(ClassScore& s) {
  if (s.true_positive + s.false_positive > 0) {
    s.precision = static_cast<double>(s.true_positive) / static_cast<double>(s.true_positive + s.false_positive);
  }
  if (s.true_positive + s.false_negative > 0) {
    s.recall = static_cast<double>(s.true_positive) / static_cast<double>(s.true_positive + s.false_negative);
  }
}

constexpr std::array<Classification, 5> kClasses{Classification::valid, Classification::overt_spoofed,
                                                 Classification::covert_delayed, Classification::timeout,
                                                 Classification::insufficient};

bool mechanism_agrees(Mechanism predicted, Mechanism truth) {
  switch (predicted) {
    case Mechanism::anycast: return truth == Mechanism::anycast;
    case Mechanism::non_anycast: return truth == Mechanism::proxy || truth == Mechanism::injection;
    default: return predicted == truth;
  }
}

}  // namespace

ScoreReport score(std::span<const Verdict> verdicts, std::span<const GroundTruthWindow> truth) {
  using Key = std::tuple<std::string_view, Letter, Timestamp>;
  std::map<Key, const Verdict*> predicted;
  for (const auto& v : verdicts) predicted[Key{v.vp_id, v.letter, v.window_start}] = &v;

  ScoreReport r;
  std::map<std::string_view, std::pair<bool, bool>> vp_spoofed;  // truth, predicted
  std::size_t matched = 0;
  for (const auto& t : truth) {
    auto it = predicted.find(Key{t.vp_id, t.letter, t.window_start});
    if (it == predicted.end()) {
      ++r.missing_verdicts;
      continue;
    }
    ++matched;
    const Verdict& v = *it->second;
    ++r.confusion[static_cast<std::size_t>(t.label)][static_cast<std::size_t>(v.classification)];
    auto& vp = vp_spoofed[t.vp_id];
    vp.first = vp.first || t.label == Classification::overt_spoofed;
    vp.second = vp.second || v.classification == Classification::overt_spoofed;
    if (t.label == Classification::overt_spoofed && is_spoofed(v) && t.mechanism && v.mechanism) {
      ++r.mechanism_total;
      if (mechanism_agrees(*v.mechanism, *t.mechanism)) ++r.mechanism_agree;
    }
  }
  r.extra_verdicts = predicted.size() - matched;

  for (auto c : kClasses) {
    ClassScore s;
    const auto i = static_cast<std::size_t>(c);
    s.true_positive = r.confusion[i][i];
    for (std::size_t k = 0; k < kClasses.size(); ++k) {
      if (k == i) continue;
      s.false_negative += r.confusion[i][k];
      s.false_positive += r.confusion[k][i];
    }
    finish(s);
    r.per_class[std::string(to_string(c))] = s;
  }
  r.spoof_windows = r.per_class["overt_spoofed"];
  for (const auto& [vp, flags] : vp_spoofed) {
    if (flags.first && flags.second) ++r.spoof_vps.true_positive;
    if (!flags.first && flags.second) ++r.spoof_vps.false_positive;
    if (flags.first && !flags.second) ++r.spoof_vps.false_negative;
  }
  finish(r.spoof_vps);
  return r;
}

void write_score_json(std::ostream& out, const ScoreReport& r) {
  auto cls = [](const ClassScore& s) {
    nlohmann::ordered_json j = {{"true_positive", s.true_positive},
                                {"false_positive", s.false_positive},
                                {"false_negative", s.false_negative}};
    j["precision"] = s.precision ? nlohmann::ordered_json(*s.precision) : nlohmann::ordered_json(nullptr);
    j["recall"] = s.recall ? nlohmann::ordered_json(*s.recall) : nlohmann::ordered_json(nullptr);
    return j;
  };
  nlohmann::ordered_json confusion = nlohmann::ordered_json::object();
  for (auto t : kClasses) {
    nlohmann::ordered_json row = nlohmann::ordered_json::object();
    for (auto p : kClasses) row[std::string(to_string(p))] = r.confusion[static_cast<std::size_t>(t)][static_cast<std::size_t>(p)];
    confusion[std::string(to_string(t))] = std::move(row);
  }
  nlohmann::ordered_json per_class = nlohmann::ordered_json::object();
  for (const auto& [name, s] : r.per_class) per_class[name] = cls(s);
  nlohmann::ordered_json j = {{"confusion", std::move(confusion)},
                              {"per_class", std::move(per_class)},
                              {"spoof_windows", cls(r.spoof_windows)},
                              {"spoof_vps", cls(r.spoof_vps)},
                              {"mechanism_total", r.mechanism_total},
                              {"mechanism_agree", r.mechanism_agree},
                              {"missing_verdicts", r.missing_verdicts},
                              {"extra_verdicts", r.extra_verdicts}};
  out << j.dump(2) << '\n';
}

}  // namespace rootspoof
