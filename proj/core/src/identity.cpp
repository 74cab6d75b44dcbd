#include "rootspoof/identity.hpp"

#include <algorithm>
#include <cctype>
#include <numeric>
#include <sstream>

namespace rootspoof {

std::string_view to_string(PartyCategory c) {
  switch (c) {
    case PartyCategory::isp: return "isp";
    case PartyCategory::network_provider: return "network_provider";
    case PartyCategory::education: return "education";
    case PartyCategory::dns_tool: return "dns_tool";
    case PartyCategory::vpn: return "vpn";
    case PartyCategory::hardware: return "hardware";
    case PartyCategory::personal: return "personal";
    case PartyCategory::unidentifiable: return "unidentifiable";
  }
  return "unidentifiable";
}

std::optional<PartyCategory> parse_category(std::string_view text) {
  for (auto c : {PartyCategory::isp, PartyCategory::network_provider, PartyCategory::education,
                 PartyCategory::dns_tool, PartyCategory::vpn, PartyCategory::hardware, PartyCategory::personal,
                 PartyCategory::unidentifiable}) {
    if (to_string(c) == text) return c;
  }
  return std::nullopt;
}

std::string_view to_string(GroupingBasis b) {
  switch (b) {
    case GroupingBasis::dns_suffix: return "dns_suffix";
    case GroupingBasis::reverse_dns: return "reverse_dns";
    case GroupingBasis::company_name: return "company_name";
    case GroupingBasis::vp_asn: return "vp_asn";
  }
  return "vp_asn";
}

namespace {

std::string lower(std::string_view s) {
  std::string out(s);
  for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

std::string trim(const std::string& s) {
  auto a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return {};
  auto b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

std::vector<std::string> split_labels(std::string_view name) {
  std::vector<std::string> labels;
  std::size_t start = 0;
  while (true) {
    auto dot = name.find('.', start);
    labels.emplace_back(name.substr(start, dot == std::string_view::npos ? std::string_view::npos : dot - start));
    if (dot == std::string_view::npos) break;
    start = dot + 1;
  }
  return labels;
}

bool valid_label(const std::string& label) {
  if (label.empty() || label.size() > 63) return false;
  return std::all_of(label.begin(), label.end(), [](char c) {
    return (c >= 'a' && c <= 'z') || (c >= '0' && c <= '9') || c == '-' || c == '_';
  });
}

std::string join(const std::vector<std::string>& labels, std::size_t from) {
  std::string out;
  for (std::size_t i = from; i < labels.size(); ++i) {
    if (!out.empty()) out += '.';
    out += labels[i];
  }
  return out;
}

}  // namespace

PublicSuffixList PublicSuffixList::load(std::istream& in) {
  PublicSuffixList psl;
  std::string line;
  while (std::getline(in, line)) {
    line = trim(line);
    if (line.empty() || line.rfind("//", 0) == 0) continue;
    line = lower(line.substr(0, line.find_first_of(" \t")));
    if (line[0] == '!') {
      psl.exceptions_.insert(line.substr(1));
    } else if (line.rfind("*.", 0) == 0) {
      psl.wildcards_.insert(line.substr(2));
    } else {
      psl.rules_.insert(line);
    }
  }
  return psl;
}

std::optional<std::string> PublicSuffixList::registrable_domain(std::string_view raw) const {
  std::string name = lower(raw);
  if (!name.empty() && name.back() == '.') name.pop_back();
  if (name.find('.') == std::string::npos || Ipv4::parse(name)) return std::nullopt;
  const auto labels = split_labels(name);
  if (!std::all_of(labels.begin(), labels.end(), valid_label)) return std::nullopt;

  // Number of labels in the public suffix; the implicit "*" rule gives 1.
  std::size_t suffix_labels = 1;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const std::string candidate = join(labels, i);
    const std::size_t n = labels.size() - i;
    if (exceptions_.count(candidate)) {
      suffix_labels = n - 1;
      break;
    }
    if (rules_.count(candidate)) suffix_labels = std::max(suffix_labels, n);
    if (i + 1 < labels.size() && wildcards_.count(join(labels, i + 1))) suffix_labels = std::max(suffix_labels, n);
  }
  if (labels.size() <= suffix_labels) return std::nullopt;
  return join(labels, labels.size() - suffix_labels - 1);
}

ReverseDnsMap ReverseDnsMap::load(std::istream& in) {
  ReverseDnsMap map;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    line = trim(line.substr(0, line.find('#')));
    if (line.empty()) continue;
    std::istringstream fields(line);
    std::string address, name;
    if (!(fields >> address >> name) || !Ipv4::parse(address)) {
      throw InputError("reverse-DNS map line " + std::to_string(line_no) + ": expected '<ipv4> <name>'");
    }
    map.names_[address] = lower(name);
  }
  return map;
}

std::optional<std::string> ReverseDnsMap::lookup(std::string_view address) const {
  auto it = names_.find(address);
  if (it == names_.end()) return std::nullopt;
  return it->second;
}

CompanyMap CompanyMap::load(std::istream& in) {
  CompanyMap map;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    line = trim(line);
    if (line.empty() || line[0] == '#') continue;
    std::istringstream fields(line);
    std::string pattern, label, category;
    auto where = [&] { return "company map line " + std::to_string(line_no) + ": "; };
    if (!(fields >> pattern >> label >> category)) throw InputError(where() + "expected '<regex> <label> <category>'");
    auto cat = parse_category(category);
    if (!cat) throw InputError(where() + "unknown category '" + category + "'");
    try {
      map.entries_.push_back(
          Entry{pattern, std::regex(pattern, std::regex::ECMAScript | std::regex::icase), lower(label), *cat});
    } catch (const std::regex_error& e) {
      throw InputError(where() + "bad pattern: " + e.what());
    }
  }
  return map;
}

const CompanyMap::Entry* CompanyMap::match(std::string_view name) const {
  for (const auto& e : entries_) {
    if (std::regex_search(name.begin(), name.end(), e.regex)) return &e;
  }
  return nullptr;
}

std::optional<PartyCategory> CompanyMap::category_of(std::string_view label) const {
  const auto key = lower(label);
  for (const auto& e : entries_) {
    if (e.label == key) return e.category;
  }
  return std::nullopt;
}

PartyCategory categorize(const SpooferCluster& cluster, const CompanyMap* companies) {
  if (cluster.grouping_basis == GroupingBasis::vp_asn || !companies) return PartyCategory::unidentifiable;
  return companies->category_of(cluster.label).value_or(PartyCategory::unidentifiable);
}

namespace {

struct IdInfo {
  std::set<std::uint32_t> asns;
  std::set<std::string> vps;
};

struct DisjointSets {
  std::vector<std::size_t> parent;
  explicit DisjointSets(std::size_t n) : parent(n) { std::iota(parent.begin(), parent.end(), 0); }
  std::size_t find(std::size_t x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  }
  void unite(std::size_t a, std::size_t b) {
    a = find(a);
    b = find(b);
    if (a != b) parent[std::max(a, b)] = std::min(a, b);
  }
};

}  // namespace

ClusterReport cluster_spoofers(std::span<const Verdict> verdicts, const VpIndex& vps, const PublicSuffixList& psl,
                               const ReverseDnsMap* reverse_dns, const CompanyMap* companies) {
  ClusterReport report;
  if (!reverse_dns) report.warnings.push_back("no reverse-DNS map: IP-address server IDs grouped by observer AS");
  if (!companies) report.warnings.push_back("no company map: clusters not matched to organisations");

  std::map<std::string, IdInfo> ids;  // ordered, so everything below is order-independent
  for (const auto& v : verdicts) {
    if (!is_spoofed(v) || !v.evidence.overt) continue;
    for (const auto& id : v.evidence.overt->unmatched_ids) {
      auto& info = ids[id];
      info.vps.insert(v.vp_id);
      if (auto it = vps.find(v.vp_id); it != vps.end()) info.asns.insert(it->second.asn);
    }
  }
  std::size_t unknown_vps = 0;
  for (const auto& [id, info] : ids) {
    if (info.asns.empty()) ++unknown_vps;
  }
  if (unknown_vps > 0) {
    report.warnings.push_back(std::to_string(unknown_vps) + " spoofed id(s) seen only from vantage points missing from the index");
  }

  std::map<std::string, SpooferCluster> clusters;
  std::vector<std::string> generic;
  for (const auto& [id, info] : ids) {
    std::string name = lower(id);
    bool resolved = false;
    if (Ipv4::parse(name) && reverse_dns) {
      if (auto rdns = reverse_dns->lookup(name)) {
        name = *rdns;
        resolved = true;
      }
    }
    std::string key, label;
    GroupingBasis basis;
    if (const auto* company = companies ? companies->match(name) : nullptr) {
      key = "company:" + company->label;
      label = company->label;
      basis = GroupingBasis::company_name;
    } else if (auto domain = psl.registrable_domain(name)) {
      key = "suffix:" + *domain;
      label = *domain;
      basis = resolved ? GroupingBasis::reverse_dns : GroupingBasis::dns_suffix;
    } else {
      generic.push_back(id);
      continue;
    }
    auto [it, inserted] = clusters.try_emplace(key);
    auto& c = it->second;
    if (inserted) {
      c.cluster_id = key;
      c.label = label;
      c.grouping_basis = basis;
    } else if (c.grouping_basis == GroupingBasis::reverse_dns && basis == GroupingBasis::dns_suffix) {
      c.grouping_basis = basis;  // a plain name member makes the suffix the primary evidence
    }
    c.member_server_ids.insert(id);
    c.observer_asns.insert(info.asns.begin(), info.asns.end());
    c.observer_vps.insert(info.vps.begin(), info.vps.end());
  }

  // Generic ids: connected components over shared observer ASes.
  DisjointSets sets(generic.size());
  std::map<std::uint32_t, std::size_t> first_with_asn;
  for (std::size_t i = 0; i < generic.size(); ++i) {
    for (auto asn : ids[generic[i]].asns) {
      auto [it, inserted] = first_with_asn.try_emplace(asn, i);
      if (!inserted) sets.unite(i, it->second);
    }
  }
  std::map<std::size_t, SpooferCluster> components;
  for (std::size_t i = 0; i < generic.size(); ++i) {
    auto& c = components[sets.find(i)];
    const auto& info = ids[generic[i]];
    c.member_server_ids.insert(generic[i]);
    c.observer_asns.insert(info.asns.begin(), info.asns.end());
    c.observer_vps.insert(info.vps.begin(), info.vps.end());
  }
  for (auto& [root, c] : components) {
    c.grouping_basis = GroupingBasis::vp_asn;
    c.label = "unidentifiable";
    if (c.observer_asns.empty()) {
      c.cluster_id = "asn:unknown:" + *c.member_server_ids.begin();
    } else {
      c.cluster_id = "asn:";
      bool first = true;
      for (auto asn : c.observer_asns) {
        if (!first) c.cluster_id += '+';
        c.cluster_id += std::to_string(asn);
        first = false;
      }
    }
    clusters.emplace(c.cluster_id, std::move(c));
  }

  for (auto& [key, c] : clusters) {
    c.category = categorize(c, companies);
    for (const auto& id : c.member_server_ids) report.cluster_of[id] = c.cluster_id;
    report.clusters.push_back(std::move(c));
  }
  return report;
}

void assign_clusters(std::span<Verdict> verdicts, const ClusterReport& report) {
  for (auto& v : verdicts) {
    if (!is_spoofed(v) || !v.evidence.overt) continue;
    const auto& ev = *v.evidence.overt;
    const auto& id = ev.first_unmatched ? *ev.first_unmatched : ev.unmatched_ids.front();
    if (auto it = report.cluster_of.find(id); it != report.cluster_of.end()) v.spoofer_cluster = it->second;
  }
}

}  // namespace rootspoof
