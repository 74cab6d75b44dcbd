#pragma once

// Groups atypical server IDs into spoofing parties and labels each party
// with what kind of organisation runs it.

#include <istream>
#include <map>
#include <optional>
#include <regex>
#include <set>
#include <span>
#include <string>
#include <unordered_set>
#include <vector>

#include "rootspoof/model.hpp"
#include "rootspoof/records.hpp"

namespace rootspoof {

enum class PartyCategory : std::uint8_t {
  isp,
  network_provider,
  education,
  dns_tool,
  vpn,
  hardware,
  personal,
  unidentifiable,
};

std::string_view to_string(PartyCategory c);
std::optional<PartyCategory> parse_category(std::string_view text);

enum class GroupingBasis : std::uint8_t { dns_suffix, reverse_dns, company_name, vp_asn };
std::string_view to_string(GroupingBasis b);

/// Public-suffix rules in the usual list format: one rule per line,
/// "*.example" wildcards, "!exception" rules, "//" comments.
class PublicSuffixList {
 public:
  static PublicSuffixList load(std::istream& in);

  /// The registrable domain (public suffix plus one label), lower-cased.
  /// Empty for strings that are not host names, IP addresses, and names
  /// that are themselves a public suffix. Unlisted TLDs fall back to the
  /// implicit "*" rule.
  std::optional<std::string> registrable_domain(std::string_view name) const;

 private:
  std::unordered_set<std::string> rules_;
  std::unordered_set<std::string> wildcards_;   // "ck" for "*.ck"
  std::unordered_set<std::string> exceptions_;  // "www.ck" for "!www.ck"
};

/// Offline reverse-DNS table: "<ipv4> <name>" per line.
class ReverseDnsMap {
 public:
  static ReverseDnsMap load(std::istream& in);
  std::optional<std::string> lookup(std::string_view address) const;
  std::size_t size() const { return names_.size(); }

 private:
  std::map<std::string, std::string, std::less<>> names_;
};

/// Curated organisations: "<regex> <label> <category>" per line. The regex
/// is searched case-insensitively in the (reverse-resolved) server ID.
class CompanyMap {
 public:
  struct Entry {
    std::string pattern;
    std::regex regex;
    std::string label;
    PartyCategory category;
  };

  static CompanyMap load(std::istream& in);
  const Entry* match(std::string_view name) const;
  std::optional<PartyCategory> category_of(std::string_view label) const;
  std::size_t size() const { return entries_.size(); }

 private:
  std::vector<Entry> entries_;
};

struct SpooferCluster {
  std::string cluster_id;  // "suffix:rdit.ch", "company:nordvpn.com", "asn:64500+64501"
  std::set<std::string> member_server_ids;
  GroupingBasis grouping_basis = GroupingBasis::vp_asn;
  std::string label;  // party name or "unidentifiable"
  PartyCategory category = PartyCategory::unidentifiable;
  std::set<std::uint32_t> observer_asns;
  std::set<std::string> observer_vps;

  bool operator==(const SpooferCluster&) const = default;
};

struct ClusterReport {
  std::vector<SpooferCluster> clusters;  // ordered by cluster_id
  std::map<std::string, std::string> cluster_of;  // server id -> cluster_id
  std::vector<std::string> warnings;
};

/// Clusters the atypical server IDs found in overt_spoofed verdicts.
///
///  1. IP-address ids are replaced by their reverse-DNS name when known.
///  2. Names with a registrable domain group under that domain.
///  3. Names matching the company map group under the company; this overrides 2.
///  4. Everything else groups by the AS of the observing vantage points;
///     ids seen from a common AS end up in one cluster.
///
/// Missing maps skip their step and add a warning. The result is a partition
/// of the spoofed ids and does not depend on verdict order.
ClusterReport cluster_spoofers(std::span<const Verdict> verdicts, const VpIndex& vps, const PublicSuffixList& psl,
                               const ReverseDnsMap* reverse_dns = nullptr, const CompanyMap* companies = nullptr);

/// Category from the company map by label; unidentifiable otherwise.
PartyCategory categorize(const SpooferCluster& cluster, const CompanyMap* companies);

/// Sets spoofer_cluster on spoofed verdicts from their first atypical id.
void assign_clusters(std::span<Verdict> verdicts, const ClusterReport& report);

}  // namespace rootspoof
