#include "rootspoof/records.hpp"

#include <cctype>
#include <cmath>

#include <nlohmann/json.hpp>

#include "rootspoof/schedule.hpp"

namespace rootspoof {

using nlohmann::json;

Millis quantize_rtt(double ms) { return std::round(ms * 1000.0) / 1000.0; }

void SkipReport::note(std::size_t line, std::string_view reason) {
  ++skipped;
  if (samples.size() < kMaxSamples) samples.push_back("line " + std::to_string(line) + ": " + std::string(reason));
}

namespace {

/// Thrown inside the per-line parsers; converted into a skip entry.
struct BadRecord {
  std::string reason;
};

[[noreturn]] void bad(std::string reason) { throw BadRecord{std::move(reason)}; }

const json& require(const json& obj, const char* key) {
  auto it = obj.find(key);
  if (it == obj.end() || it->is_null()) bad(std::string("missing field '") + key + "'");
  return *it;
}

std::string read_vp_id(const json& obj) {
  auto it = obj.find("vp_id");
  if (it == obj.end()) it = obj.find("prb_id");
  if (it == obj.end() || it->is_null()) bad("missing field 'vp_id'");
  if (it->is_string()) {
    auto s = it->get<std::string>();
    if (s.empty()) bad("empty vp_id");
    return s;
  }
  if (it->is_number_integer()) return std::to_string(it->get<std::int64_t>());
  bad("vp_id must be a string or integer");
}

Letter read_letter(const json& obj) {
  const auto& v = require(obj, "letter");
  if (!v.is_string()) bad("letter must be a string");
  auto letter = parse_letter(v.get<std::string>());
  if (!letter) bad("unknown letter '" + v.get<std::string>() + "'");
  return *letter;
}

Timestamp read_time(const json& v, const char* what) {
  if (v.is_number_integer()) return v.get<Timestamp>();
  if (v.is_string()) {
    if (auto t = parse_time(v.get<std::string>())) return *t;
  }
  bad(std::string(what) + " must be integer seconds or an ISO-8601 UTC time");
}

std::optional<Millis> read_rtt(const json& obj, const char* key) {
  auto it = obj.find(key);
  if (it == obj.end() || it->is_null()) return std::nullopt;
  if (!it->is_number()) bad(std::string(key) + " must be a number");
  const double v = it->get<double>();
  if (!std::isfinite(v) || !(v > 0)) bad(std::string(key) + " must be a positive number");
  return quantize_rtt(v);
}

void check_type(const json& obj, std::string_view expected) {
  auto it = obj.find("type");
  if (it != obj.end() && (!it->is_string() || it->get<std::string>() != expected)) {
    bad("record type is not '" + std::string(expected) + "'");
  }
}

DnsObservation dns_from(const json& obj) {
  check_type(obj, "dns");
  DnsObservation obs;
  obs.vp_id = read_vp_id(obj);
  obs.letter = read_letter(obj);
  obs.timestamp = read_time(require(obj, "timestamp"), "timestamp");

  if (auto it = obj.find("outcome"); it != obj.end()) {
    if (!it->is_string()) bad("outcome must be a string");
    auto outcome = parse_outcome(it->get<std::string>());
    if (!outcome) bad("unknown outcome '" + it->get<std::string>() + "'");
    obs.outcome = *outcome;
    if (auto sid = obj.find("server_id"); sid != obj.end() && !sid->is_null()) {
      if (!sid->is_string()) bad("server_id must be a string");
      obs.server_id = sid->get<std::string>();
    }
    obs.rtt = read_rtt(obj, "rtt");
  } else if (auto result = obj.find("result"); result != obj.end() && result->is_object()) {
    // Measurement-archive shape: result.rt plus answers[0].RDATA[0].
    obs.outcome = DnsOutcome::answered;
    obs.rtt = read_rtt(*result, "rt");
    auto answers = result->find("answers");
    if (answers == result->end() || !answers->is_array() || answers->empty()) bad("answer section missing");
    const json& first = (*answers)[0];
    auto rdata = first.find("RDATA");
    if (rdata != first.end() && rdata->is_array() && !rdata->empty() && (*rdata)[0].is_string()) {
      obs.server_id = (*rdata)[0].get<std::string>();
    } else if (auto txt = first.find("TXT"); txt != first.end() && txt->is_string()) {
      obs.server_id = txt->get<std::string>();
    } else {
      bad("answer carries no TXT data");
    }
  } else if (auto error = obj.find("error"); error != obj.end() && error->is_object()) {
    obs.outcome = error->contains("timeout") ? DnsOutcome::timeout : DnsOutcome::error;
  } else {
    bad("missing field 'outcome'");
  }
  try {
    check_invariants(obs);
  } catch (const InvariantViolation& e) {
    bad(e.what());
  }
  return obs;
}

PingObservation ping_from(const json& obj) {
  check_type(obj, "ping");
  PingObservation obs;
  obs.vp_id = read_vp_id(obj);
  obs.letter = read_letter(obj);
  obs.timestamp = read_time(require(obj, "timestamp"), "timestamp");
  if (!obj.contains("rtt")) bad("missing field 'rtt' (use null for loss)");
  obs.rtt = read_rtt(obj, "rtt");
  return obs;
}

TracerouteObservation traceroute_from(const json& obj) {
  check_type(obj, "traceroute");
  TracerouteObservation obs;
  obs.vp_id = read_vp_id(obj);
  obs.letter = read_letter(obj);
  obs.timestamp = read_time(require(obj, "timestamp"), "timestamp");
  const auto& hops = require(obj, "hops");
  if (!hops.is_array()) bad("hops must be an array");
  for (const auto& h : hops) {
    if (!h.is_object()) bad("hop must be an object");
    const auto& ttl = require(h, "ttl");
    if (!ttl.is_number_integer() || ttl.get<int>() <= 0 || ttl.get<int>() > 255) bad("hop ttl must be in 1..255");
    Hop hop{ttl.get<int>(), std::nullopt};
    if (auto from = h.find("from"); from != h.end() && !from->is_null()) {
      if (!from->is_string()) bad("hop 'from' must be a string");
      const auto text = from->get<std::string>();
      if (text != "*") {
        auto ip = Ipv4::parse(text);
        if (!ip) bad("hop address '" + text + "' is not IPv4");
        hop.responder = ip;
      }
    }
    obs.hops.push_back(hop);
  }
  if (auto reached = obj.find("reached"); reached != obj.end() && !reached->is_null()) {
    if (!reached->is_boolean()) bad("reached must be a boolean");
    obs.reached = reached->get<bool>();
  } else {
    const Ipv4 service = service_letter(obs.letter).service_address;
    for (auto it = obs.hops.rbegin(); it != obs.hops.rend(); ++it) {
      if (it->responder) {
        obs.reached = *it->responder == service;
        break;
      }
    }
  }
  try {
    check_invariants(obs);
  } catch (const InvariantViolation& e) {
    bad(e.what());
  }
  return obs;
}

ServerLogRecord server_log_from(const json& obj) {
  ServerLogRecord rec;
  rec.timestamp = read_time(require(obj, "timestamp"), "timestamp");
  const auto& prefix = require(obj, "source_prefix");
  if (!prefix.is_string()) bad("source_prefix must be a string");
  auto p = Prefix24::parse(prefix.get<std::string>());
  if (!p) bad("source_prefix '" + prefix.get<std::string>() + "' is not an IPv4 /24");
  rec.source_prefix = *p;
  const auto& qtype = require(obj, "query_type");
  const auto& qname = require(obj, "qname");
  if (!qtype.is_string() || !qname.is_string()) bad("query_type and qname must be strings");
  rec.query_type = qtype.get<std::string>();
  rec.qname = qname.get<std::string>();
  rec.letter = read_letter(obj);
  return rec;
}

template <typename T, typename Fn>
ParseResult<T> parse_lines(std::istream& in, Fn from_json) {
  if (!in.good() && !in.eof()) throw IoError("input stream is not readable");
  ParseResult<T> result;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      json obj = json::parse(line);
      if (!obj.is_object()) bad("record is not a JSON object");
      result.records.push_back(from_json(obj));
    } catch (const BadRecord& e) {
      result.skips.note(line_no, e.reason);
    } catch (const json::exception& e) {
      result.skips.note(line_no, std::string("malformed JSON: ") + e.what());
    }
  }
  if (in.bad()) throw IoError("read error after line " + std::to_string(line_no));
  return result;
}

json rtt_json(const std::optional<Millis>& rtt) { return rtt ? json(*rtt) : json(nullptr); }

std::string dump(const json& j) { return j.dump(-1, ' ', false, json::error_handler_t::replace); }

}  // namespace

ParseResult<DnsObservation> parse_dns_results(std::istream& in) {
  return parse_lines<DnsObservation>(in, dns_from);
}
ParseResult<PingObservation> parse_ping_results(std::istream& in) {
  return parse_lines<PingObservation>(in, ping_from);
}
ParseResult<TracerouteObservation> parse_traceroute_results(std::istream& in) {
  return parse_lines<TracerouteObservation>(in, traceroute_from);
}
ParseResult<ServerLogRecord> parse_server_log(std::istream& in) {
  return parse_lines<ServerLogRecord>(in, server_log_from);
}

std::string serialize(const DnsObservation& obs) {
  json j = {{"type", "dns"},
            {"vp_id", obs.vp_id},
            {"letter", std::string(1, letter_char(obs.letter))},
            {"timestamp", obs.timestamp},
            {"outcome", to_string(obs.outcome)}};
  if (obs.server_id) j["server_id"] = *obs.server_id;
  if (obs.rtt) j["rtt"] = *obs.rtt;
  return dump(j);
}

std::string serialize(const PingObservation& obs) {
  json j = {{"type", "ping"},
            {"vp_id", obs.vp_id},
            {"letter", std::string(1, letter_char(obs.letter))},
            {"timestamp", obs.timestamp},
            {"rtt", rtt_json(obs.rtt)}};
  return dump(j);
}

std::string serialize(const TracerouteObservation& obs) {
  json hops = json::array();
  for (const auto& h : obs.hops) {
    hops.push_back({{"ttl", h.ttl}, {"from", h.responder ? json(h.responder->str()) : json(nullptr)}});
  }
  json j = {{"type", "traceroute"},
            {"vp_id", obs.vp_id},
            {"letter", std::string(1, letter_char(obs.letter))},
            {"timestamp", obs.timestamp},
            {"reached", obs.reached},
            {"hops", std::move(hops)}};
  return dump(j);
}

std::string serialize(const ServerLogRecord& rec) {
  json j = {{"timestamp", rec.timestamp},
            {"source_prefix", rec.source_prefix.str()},
            {"query_type", rec.query_type},
            {"qname", rec.qname},
            {"letter", std::string(1, letter_char(rec.letter))}};
  return dump(j);
}

std::string serialize(const VantagePoint& vp) {
  json j = {{"vp_id", vp.vp_id}, {"prefix", vp.public_prefix.str()}, {"asn", vp.asn}, {"country", nullptr}};
  if (!vp.country.empty()) j["country"] = vp.country;
  if (vp.coordinates) {
    j["latitude"] = vp.coordinates->latitude;
    j["longitude"] = vp.coordinates->longitude;
  }
  return dump(j);
}

VpIndex load_vantage_points(std::istream& in) {
  VpIndex index;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    auto fail = [&](const std::string& why) -> InputError {
      return InputError("vantage points line " + std::to_string(line_no) + ": " + why);
    };
    try {
      json j = json::parse(line);
      VantagePoint vp;
      vp.vp_id = read_vp_id(j);
      auto prefix = Prefix24::parse(require(j, "prefix").get<std::string>());
      if (!prefix) throw fail("prefix is not an IPv4 /24");
      vp.public_prefix = *prefix;
      vp.asn = require(j, "asn").get<std::uint32_t>();
      // null, empty or absent: country unknown
      if (auto c = j.find("country"); c != j.end() && !c->is_null()) vp.country = c->get<std::string>();
      if (!vp.country.empty() && vp.country.size() != 2) throw fail("country must be a two-letter code");
      for (auto& c : vp.country) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
      if (j.contains("latitude") && j.contains("longitude") && !j["latitude"].is_null()) {
        vp.coordinates = GeoCoord{j["latitude"].get<double>(), j["longitude"].get<double>()};
      }
      auto id = vp.vp_id;
      if (!index.emplace(id, std::move(vp)).second) throw fail("duplicate vp_id " + id);
    } catch (const BadRecord& e) {
      throw fail(e.reason);
    } catch (const json::exception& e) {
      throw fail(e.what());
    }
  }
  return index;
}

// ---------------------------------------------------------------------------
// Verdicts

namespace {

json overt_json(const OvertEvidence& e) {
  json j = {{"observed_server_ids", e.observed_server_ids},
            {"matched", e.matched},
            {"unmatched_ids", e.unmatched_ids},
            {"n_matched", e.n_matched},
            {"n_unmatched", e.n_unmatched},
            {"mixed", e.mixed},
            {"majority_atypical", e.majority_atypical}};
  if (e.first_unmatched) j["first_unmatched"] = *e.first_unmatched;
  return j;
}

OvertEvidence overt_from(const json& j) {
  OvertEvidence e;
  e.observed_server_ids = j.at("observed_server_ids").get<std::vector<std::string>>();
  e.matched = j.at("matched").get<std::vector<bool>>();
  e.unmatched_ids = j.at("unmatched_ids").get<std::vector<std::string>>();
  e.n_matched = j.at("n_matched").get<std::size_t>();
  e.n_unmatched = j.at("n_unmatched").get<std::size_t>();
  e.mixed = j.at("mixed").get<bool>();
  e.majority_atypical = j.at("majority_atypical").get<bool>();
  if (j.contains("first_unmatched")) e.first_unmatched = j["first_unmatched"].get<std::string>();
  return e;
}

json latency_json(const LatencyStats& s) {
  json j = {{"median_dns", s.median_dns}, {"median_ping", s.median_ping}, {"mad_dns", s.mad_dns},
            {"mad_ping", s.mad_ping},     {"delta", s.delta},             {"n_dns", s.n_dns},
            {"n_ping", s.n_ping},         {"n_dns_excluded", s.n_dns_excluded}};
  if (s.site) j["site"] = *s.site;
  return j;
}

LatencyStats latency_from(const json& j) {
  LatencyStats s;
  s.median_dns = j.at("median_dns").get<double>();
  s.median_ping = j.at("median_ping").get<double>();
  s.mad_dns = j.at("mad_dns").get<double>();
  s.mad_ping = j.at("mad_ping").get<double>();
  s.delta = j.at("delta").get<double>();
  s.n_dns = j.at("n_dns").get<std::size_t>();
  s.n_ping = j.at("n_ping").get<std::size_t>();
  s.n_dns_excluded = j.value("n_dns_excluded", std::size_t{0});
  if (j.contains("site")) s.site = j["site"].get<std::string>();
  return s;
}

json mechanism_json(const MechanismEvidence& m) {
  json hops = json::array();
  for (const auto& h : m.penultimate_hops) hops.push_back(h.str());
  json j = {{"penultimate_hops", std::move(hops)},
            {"foreign_hop", m.foreign_hop},
            {"rtt_equal", m.rtt_equal},
            {"low_confidence", m.low_confidence}};
  if (m.reached_server) j["reached_server"] = *m.reached_server;
  return j;
}

MechanismEvidence mechanism_from(const json& j) {
  MechanismEvidence m;
  for (const auto& h : j.at("penultimate_hops")) {
    auto ip = Ipv4::parse(h.get<std::string>());
    if (!ip) throw InputError("bad penultimate hop address");
    m.penultimate_hops.push_back(*ip);
  }
  m.foreign_hop = j.at("foreign_hop").get<bool>();
  m.rtt_equal = j.at("rtt_equal").get<bool>();
  m.low_confidence = j.at("low_confidence").get<bool>();
  if (j.contains("reached_server")) m.reached_server = j["reached_server"].get<bool>();
  return m;
}

}  // namespace

std::string serialize(const Verdict& v) {
  json evidence = json::object();
  if (v.evidence.overt) evidence["overt"] = overt_json(*v.evidence.overt);
  if (v.evidence.latency) evidence["latency"] = latency_json(*v.evidence.latency);
  if (v.evidence.mechanism) evidence["mechanism"] = mechanism_json(*v.evidence.mechanism);
  if (v.evidence.latency_note) evidence["latency_note"] = *v.evidence.latency_note;
  if (v.evidence.delay_direction) evidence["delay_direction"] = *v.evidence.delay_direction;

  json j = {{"vp_id", v.vp_id},
            {"letter", std::string(1, letter_char(v.letter))},
            {"window_start", v.window_start},
            {"classification", to_string(v.classification)}};
  if (v.mechanism) j["mechanism"] = to_string(*v.mechanism);
  if (v.spoofer_cluster) j["spoofer_cluster"] = *v.spoofer_cluster;
  j["evidence"] = std::move(evidence);
  return dump(j);
}

Verdict parse_verdict(std::string_view line) {
  try {
    json j = json::parse(line);
    Verdict v;
    v.vp_id = read_vp_id(j);
    v.letter = read_letter(j);
    v.window_start = read_time(require(j, "window_start"), "window_start");
    auto cls = parse_classification(require(j, "classification").get<std::string>());
    if (!cls) bad("unknown classification");
    v.classification = *cls;
    if (j.contains("mechanism") && !j["mechanism"].is_null()) {
      auto m = parse_mechanism(j["mechanism"].get<std::string>());
      if (!m) bad("unknown mechanism");
      v.mechanism = *m;
    }
    if (j.contains("spoofer_cluster") && !j["spoofer_cluster"].is_null()) {
      v.spoofer_cluster = j["spoofer_cluster"].get<std::string>();
    }
    if (auto ev = j.find("evidence"); ev != j.end() && ev->is_object()) {
      if (ev->contains("overt")) v.evidence.overt = overt_from((*ev)["overt"]);
      if (ev->contains("latency")) v.evidence.latency = latency_from((*ev)["latency"]);
      if (ev->contains("mechanism")) v.evidence.mechanism = mechanism_from((*ev)["mechanism"]);
      if (ev->contains("latency_note")) v.evidence.latency_note = (*ev)["latency_note"].get<std::string>();
      if (ev->contains("delay_direction")) v.evidence.delay_direction = (*ev)["delay_direction"].get<std::string>();
    }
    check_invariants(v);
    return v;
  } catch (const BadRecord& e) {
    throw InputError("verdict: " + e.reason);
  } catch (const json::exception& e) {
    throw InputError(std::string("verdict: ") + e.what());
  } catch (const InvariantViolation& e) {
    throw InputError(std::string("verdict: ") + e.what());
  }
}

std::vector<Verdict> read_verdicts(std::istream& in) {
  std::vector<Verdict> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      out.push_back(parse_verdict(line));
    } catch (const InputError& e) {
      throw InputError("line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  if (in.bad()) throw IoError("read error in verdict file");
  return out;
}

}  // namespace rootspoof
