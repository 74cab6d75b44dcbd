#include "rootspoof/model.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <map>
#include <tuple>

namespace rootspoof {

char letter_char(Letter letter) { return static_cast<char>('A' + static_cast<int>(letter)); }

std::optional<Letter> parse_letter(std::string_view text) {
  // Accept "A", "a", "A-root", "a.root-servers.net" style spellings.
  if (text.empty()) return std::nullopt;
  char c = text[0];
  if (c >= 'a' && c <= 'z') c = static_cast<char>(c - 'a' + 'A');
  if (c < 'A' || c > 'M') return std::nullopt;
  if (text.size() > 1 && text[1] != '-' && text[1] != '.') return std::nullopt;
  return static_cast<Letter>(c - 'A');
}

Letter letter_from(std::string_view text) {
  auto letter = parse_letter(text);
  if (!letter) throw InputError("not a root letter: '" + std::string(text) + "'");
  return *letter;
}

std::array<Letter, kLetterCount> all_letters() {
  std::array<Letter, kLetterCount> out{};
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = letter_at(i);
  return out;
}

std::optional<Ipv4> Ipv4::parse(std::string_view text) {
  std::uint32_t value = 0;
  const char* p = text.data();
  const char* end = text.data() + text.size();
  for (int octet = 0; octet < 4; ++octet) {
    if (octet > 0) {
      if (p == end || *p != '.') return std::nullopt;
      ++p;
    }
    unsigned part = 0;
    auto [next, ec] = std::from_chars(p, end, part);
    if (ec != std::errc() || next == p || next - p > 3 || part > 255) return std::nullopt;
    value = (value << 8) | part;
    p = next;
  }
  if (p != end) return std::nullopt;
  return Ipv4{value};
}

std::string Ipv4::str() const {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%u.%u.%u.%u", (value >> 24) & 0xFF, (value >> 16) & 0xFF, (value >> 8) & 0xFF,
                value & 0xFF);
  return buf;
}

std::optional<Prefix24> Prefix24::parse(std::string_view text) {
  auto slash = text.find('/');
  if (slash != std::string_view::npos) {
    if (text.substr(slash + 1) != "24") return std::nullopt;
    text = text.substr(0, slash);
  }
  auto address = Ipv4::parse(text);
  if (!address) return std::nullopt;
  return Prefix24(*address);
}

std::string Prefix24::str() const { return Ipv4{network_}.str() + "/24"; }

namespace {

constexpr Ipv4 ip(std::uint32_t a, std::uint32_t b, std::uint32_t c, std::uint32_t d) {
  return Ipv4{(a << 24) | (b << 16) | (c << 8) | d};
}

}  // namespace

const std::array<ServiceLetter, kLetterCount>& root_letters() {
  static const std::array<ServiceLetter, kLetterCount> letters = {{
      {Letter::A, ip(198, 41, 0, 4), true},
      {Letter::B, ip(199, 9, 14, 201), true},
      {Letter::C, ip(192, 33, 4, 12), true},
      {Letter::D, ip(199, 7, 91, 13), true},
      {Letter::E, ip(192, 203, 230, 10), true},
      {Letter::F, ip(192, 5, 5, 241), true},
      {Letter::G, ip(192, 112, 36, 4), false},
      {Letter::H, ip(198, 97, 190, 53), true},
      {Letter::I, ip(192, 36, 148, 17), true},
      {Letter::J, ip(192, 58, 128, 30), true},
      {Letter::K, ip(193, 0, 14, 129), true},
      {Letter::L, ip(199, 7, 83, 42), true},
      {Letter::M, ip(202, 12, 27, 33), true},
  }};
  return letters;
}

const ServiceLetter& service_letter(Letter letter) { return root_letters()[letter_index(letter)]; }

namespace {

[[noreturn]] void violated(const std::string& vp_id, const std::string& what) {
  throw InvariantViolation("observation from vp " + vp_id + ": " + what);
}

}  // namespace

void check_invariants(const DnsObservation& obs) {
  switch (obs.outcome) {
    case DnsOutcome::answered:
      if (!obs.server_id) violated(obs.vp_id, "answered DNS observation without server id");
      if (!obs.rtt || !(*obs.rtt > 0)) violated(obs.vp_id, "answered DNS observation needs rtt > 0");
      break;
    case DnsOutcome::timeout:
      if (obs.server_id || obs.rtt) violated(obs.vp_id, "timeout DNS observation carries an answer");
      break;
    case DnsOutcome::error:
      if (obs.rtt && !(*obs.rtt > 0)) violated(obs.vp_id, "DNS rtt must be > 0");
      break;
  }
}

void check_invariants(const PingObservation& obs) {
  if (obs.rtt && !(*obs.rtt > 0)) violated(obs.vp_id, "ping rtt must be > 0");
}

void check_invariants(const TracerouteObservation& obs) {
  for (std::size_t i = 1; i < obs.hops.size(); ++i) {
    if (obs.hops[i].ttl <= obs.hops[i - 1].ttl) violated(obs.vp_id, "traceroute ttl not strictly increasing");
  }
  if (obs.reached) {
    const Ipv4 service = service_letter(obs.letter).service_address;
    auto last = std::find_if(obs.hops.rbegin(), obs.hops.rend(), [](const Hop& h) { return h.responder.has_value(); });
    if (last == obs.hops.rend() || *last->responder != service) {
      violated(obs.vp_id, "reached traceroute must end at the service address");
    }
  }
}

std::optional<Ipv4> penultimate_hop(const TracerouteObservation& trace) {
  if (!trace.reached) return std::nullopt;
  const Ipv4 service = service_letter(trace.letter).service_address;
  auto it = std::find_if(trace.hops.begin(), trace.hops.end(),
                         [&](const Hop& h) { return h.responder && *h.responder == service; });
  for (auto back = std::make_reverse_iterator(it); back != trace.hops.rend(); ++back) {
    if (back->responder) return back->responder;
  }
  return std::nullopt;
}

// ---------------------------------------------------------------------------

namespace {

std::vector<Timestamp> checked_schedule(std::span<const Timestamp> schedule) {
  std::vector<Timestamp> sorted(schedule.begin(), schedule.end());
  std::sort(sorted.begin(), sorted.end());
  for (std::size_t i = 1; i < sorted.size(); ++i) {
    if (sorted[i] < sorted[i - 1] + kWindowLength) {
      throw ScheduleConflict("scheduled hours starting at " + std::to_string(sorted[i - 1]) + " and " +
                             std::to_string(sorted[i]) + " overlap");
    }
  }
  return sorted;
}

/// Start of the scheduled hour containing `t`, if any.
std::optional<Timestamp> slot_for(const std::vector<Timestamp>& sorted, Timestamp t) {
  auto it = std::upper_bound(sorted.begin(), sorted.end(), t);
  if (it == sorted.begin()) return std::nullopt;
  --it;
  if (t < *it + kWindowLength) return *it;
  return std::nullopt;
}

using WindowKey = std::tuple<std::string, Letter, Timestamp>;

template <typename Obs, typename Member>
void assign(const std::vector<Obs>& observations, const std::vector<Timestamp>& sorted,
            std::map<WindowKey, HourlyWindow>& windows, Member member) {
  for (const auto& obs : observations) {
    auto start = slot_for(sorted, obs.timestamp);
    if (!start) continue;
    auto [it, inserted] = windows.try_emplace(WindowKey{obs.vp_id, obs.letter, *start});
    if (inserted) {
      it->second.vp_id = obs.vp_id;
      it->second.letter = obs.letter;
      it->second.window_start = *start;
    }
    (it->second.*member).push_back(obs);
  }
}

}  // namespace

std::vector<HourlyWindow> build_windows(const ObservationSet& observations, std::span<const Timestamp> schedule) {
  const auto sorted = checked_schedule(schedule);
  std::map<WindowKey, HourlyWindow> windows;
  assign(observations.dns, sorted, windows, &HourlyWindow::dns);
  assign(observations.ping, sorted, windows, &HourlyWindow::ping);
  assign(observations.traceroute, sorted, windows, &HourlyWindow::traceroute);

  std::vector<HourlyWindow> out;
  out.reserve(windows.size());
  for (auto& [key, window] : windows) {
    std::sort(window.dns.begin(), window.dns.end());
    std::sort(window.ping.begin(), window.ping.end());
    std::sort(window.traceroute.begin(), window.traceroute.end());
    out.push_back(std::move(window));
  }
  return out;
}

// ---------------------------------------------------------------------------

std::string_view to_string(Classification c) {
  switch (c) {
    case Classification::valid: return "valid";
    case Classification::overt_spoofed: return "overt_spoofed";
    case Classification::covert_delayed: return "covert_delayed";
    case Classification::timeout: return "timeout";
    case Classification::insufficient: return "insufficient";
  }
  return "insufficient";
}

std::string_view to_string(Mechanism m) {
  switch (m) {
    case Mechanism::anycast: return "anycast";
    case Mechanism::non_anycast: return "non_anycast";
    case Mechanism::injection: return "injection";
    case Mechanism::proxy: return "proxy";
  }
  return "non_anycast";
}

std::string_view to_string(DnsOutcome o) {
  switch (o) {
    case DnsOutcome::answered: return "answered";
    case DnsOutcome::timeout: return "timeout";
    case DnsOutcome::error: return "error";
  }
  return "error";
}

std::optional<Classification> parse_classification(std::string_view text) {
  for (auto c : {Classification::valid, Classification::overt_spoofed, Classification::covert_delayed,
                 Classification::timeout, Classification::insufficient}) {
    if (to_string(c) == text) return c;
  }
  return std::nullopt;
}

std::optional<Mechanism> parse_mechanism(std::string_view text) {
  for (auto m : {Mechanism::anycast, Mechanism::non_anycast, Mechanism::injection, Mechanism::proxy}) {
    if (to_string(m) == text) return m;
  }
  return std::nullopt;
}

std::optional<DnsOutcome> parse_outcome(std::string_view text) {
  for (auto o : {DnsOutcome::answered, DnsOutcome::timeout, DnsOutcome::error}) {
    if (to_string(o) == text) return o;
  }
  return std::nullopt;
}

void check_invariants(const Verdict& verdict) {
  if (verdict.mechanism && verdict.classification != Classification::overt_spoofed) {
    throw InvariantViolation("verdict for vp " + verdict.vp_id + " carries a mechanism but is " +
                             std::string(to_string(verdict.classification)));
  }
}

bool verdict_order(const Verdict& a, const Verdict& b) {
  return std::tie(a.vp_id, a.letter, a.window_start) < std::tie(b.vp_id, b.letter, b.window_start);
}

}  // namespace rootspoof
