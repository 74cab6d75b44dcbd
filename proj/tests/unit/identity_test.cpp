#include <gtest/gtest.h>

#include <algorithm>
#include <fstream>
#include <map>
#include <random>
#include <sstream>

#include "fixtures.hpp"
#include "rootspoof/identity.hpp"

using namespace rootspoof;
using namespace rootspoof::testing;

namespace {

constexpr Timestamp kHour = 1588479696;

struct Maps {
  PublicSuffixList psl;
  ReverseDnsMap rdns;
  CompanyMap companies;
};

const Maps& shipped_maps() {
  static const Maps maps = [] {
    Maps m;
    std::ifstream psl(data_path("public-suffix.dat"));
    m.psl = PublicSuffixList::load(psl);
    std::ifstream rdns(data_path("reverse-dns.tsv"));
    m.rdns = ReverseDnsMap::load(rdns);
    std::ifstream companies(data_path("company-map.tsv"));
    m.companies = CompanyMap::load(companies);
    return m;
  }();
  return maps;
}

VantagePoint vantage(const std::string& id, std::uint32_t asn) {
  VantagePoint vp;
  vp.vp_id = id;
  vp.public_prefix = Prefix24(Ipv4{0x0A000000u + asn * 256});
  vp.asn = asn;
  vp.country = "NL";
  return vp;
}

Verdict spoofed_by(const std::string& vp, std::vector<std::string> ids, Letter letter = Letter::A) {
  Verdict v = make_verdict(vp, letter, kHour, Classification::overt_spoofed);
  OvertEvidence e;
  std::sort(ids.begin(), ids.end());
  e.first_unmatched = ids.front();
  e.observed_server_ids = ids;
  e.matched.assign(ids.size(), false);
  ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
  e.unmatched_ids = ids;
  e.n_unmatched = e.observed_server_ids.size();
  v.evidence.overt = e;
  return v;
}

ClusterReport cluster(const std::vector<Verdict>& verdicts, const VpIndex& vps, bool with_maps = true) {
  const auto& m = shipped_maps();
  return cluster_spoofers(verdicts, vps, m.psl, with_maps ? &m.rdns : nullptr, with_maps ? &m.companies : nullptr);
}

const SpooferCluster& only(const ClusterReport& r, std::string_view id) {
  for (const auto& c : r.clusters) {
    if (c.member_server_ids.count(std::string(id))) return c;
  }
  throw std::runtime_error("id not clustered");
}

TEST(PublicSuffix, RegistrableDomains) {
  const auto& psl = shipped_maps().psl;
  EXPECT_EQ(psl.registrable_domain("njamerson.rdit.ch"), "rdit.ch");
  EXPECT_EQ(psl.registrable_domain("chic-cns13.nlb.mdw1.comcast.net"), "comcast.net");
  EXPECT_EQ(psl.registrable_domain("a.b.example.co.uk"), "example.co.uk");
  EXPECT_EQ(psl.registrable_domain("foo.bar.ck"), "foo.bar.ck");  // *.ck
  EXPECT_EQ(psl.registrable_domain("x.www.ck"), "www.ck");        // !www.ck
  EXPECT_FALSE(psl.registrable_domain("co.uk"));
  EXPECT_FALSE(psl.registrable_domain("DNS13"));
  EXPECT_FALSE(psl.registrable_domain("198.51.100.53"));
  EXPECT_EQ(psl.registrable_domain("Host.Unlisted-Tld.zz"), "unlisted-tld.zz");
}

TEST(Cluster, SharedSuffix) {
  VpIndex vps{{"v1", vantage("v1", 64500)}, {"v2", vantage("v2", 64501)}};
  const auto r = cluster({spoofed_by("v1", {"njamerson.rdit.ch"}), spoofed_by("v2", {"ninishowen.rdit.ch"})}, vps);
  ASSERT_EQ(r.clusters.size(), 1u);
  EXPECT_EQ(r.clusters[0].grouping_basis, GroupingBasis::dns_suffix);
  EXPECT_EQ(r.clusters[0].label, "rdit.ch");
  EXPECT_EQ(r.clusters[0].member_server_ids.size(), 2u);
  EXPECT_EQ(r.clusters[0].category, PartyCategory::unidentifiable);
}

TEST(Cluster, GenericIdsGroupByAsn) {
  VpIndex vps{{"v1", vantage("v1", 64510)}, {"v2", vantage("v2", 64510)}, {"v3", vantage("v3", 64999)}};
  const auto r = cluster({spoofed_by("v1", {"DNS13"}), spoofed_by("v2", {"DNS13", "DNS-Expire"}), spoofed_by("v3", {"sawo"})}, vps);
  const auto& c = only(r, "DNS13");
  EXPECT_EQ(c.cluster_id, "asn:64510");
  EXPECT_EQ(c.grouping_basis, GroupingBasis::vp_asn);
  EXPECT_EQ(c.category, PartyCategory::unidentifiable);
  EXPECT_EQ(c.member_server_ids, (std::set<std::string>{"DNS-Expire", "DNS13"}));
  EXPECT_EQ(only(r, "sawo").cluster_id, "asn:64999");
}

TEST(Cluster, CompanyMapOverridesSuffix) {
  VpIndex vps{{"v1", vantage("v1", 64500)}};
  const auto r = cluster({spoofed_by("v1", {"2kom.ru"}), spoofed_by("v1", {"chic-cns13.nlb.mdw1.comcast.net"}),
                          spoofed_by("v1", {"ams.nordvpn.com"}), spoofed_by("v1", {"gw.eero.com"})},
                         vps);
  EXPECT_EQ(only(r, "2kom.ru").category, PartyCategory::isp);
  EXPECT_EQ(only(r, "2kom.ru").grouping_basis, GroupingBasis::company_name);
  EXPECT_EQ(only(r, "chic-cns13.nlb.mdw1.comcast.net").label, "comcast");
  EXPECT_EQ(only(r, "ams.nordvpn.com").category, PartyCategory::vpn);
  EXPECT_EQ(only(r, "gw.eero.com").category, PartyCategory::hardware);
}

TEST(Cluster, ReverseDnsForAddresses) {
  VpIndex vps{{"v1", vantage("v1", 64500)}, {"v2", vantage("v2", 64501)}};
  const auto r = cluster({spoofed_by("v1", {"198.51.100.53"}), spoofed_by("v2", {"198.51.100.54"}),
                          spoofed_by("v2", {"192.0.2.77"})},
                         vps);
  EXPECT_EQ(only(r, "198.51.100.53").cluster_id, only(r, "198.51.100.54").cluster_id);
  EXPECT_EQ(only(r, "198.51.100.53").category, PartyCategory::network_provider);
  EXPECT_EQ(only(r, "192.0.2.77").category, PartyCategory::personal);
}

TEST(Cluster, MissingMapsWarnButCluster) {
  VpIndex vps{{"v1", vantage("v1", 64500)}};
  const auto r = cluster({spoofed_by("v1", {"198.51.100.53"}), spoofed_by("v1", {"2kom.ru"})}, vps, false);
  EXPECT_EQ(r.warnings.size(), 2u);
  EXPECT_EQ(only(r, "198.51.100.53").grouping_basis, GroupingBasis::vp_asn);
  EXPECT_EQ(only(r, "2kom.ru").grouping_basis, GroupingBasis::dns_suffix);
  EXPECT_EQ(only(r, "2kom.ru").category, PartyCategory::unidentifiable);
}

TEST(Categorize, FromMapByLabel) {
  const auto& companies = shipped_maps().companies;
  SpooferCluster c;
  c.grouping_basis = GroupingBasis::dns_suffix;
  c.label = "nordvpn.com";
  EXPECT_EQ(categorize(c, &companies), PartyCategory::vpn);
  c.label = "eero.com";
  EXPECT_EQ(categorize(c, &companies), PartyCategory::hardware);
  c.label = "no-such-party.example";
  EXPECT_EQ(categorize(c, &companies), PartyCategory::unidentifiable);
  EXPECT_EQ(categorize(c, nullptr), PartyCategory::unidentifiable);
}

TEST(AssignClusters, FirstAtypicalIdDecides) {
  VpIndex vps{{"v1", vantage("v1", 64500)}};
  std::vector<Verdict> verdicts = {spoofed_by("v1", {"njamerson.rdit.ch"}),
                                   make_verdict("v1", Letter::B, kHour, Classification::valid)};
  assign_clusters(verdicts, cluster(verdicts, vps));
  EXPECT_EQ(verdicts[0].spoofer_cluster, "suffix:rdit.ch");
  EXPECT_FALSE(verdicts[1].spoofer_cluster);
}

struct RandomPopulation {
  std::vector<Verdict> verdicts;
  VpIndex vps;
};

RandomPopulation random_population(std::mt19937_64& gen, std::size_t n) {
  const std::vector<std::string> named = {"njamerson.rdit.ch", "ninishowen.rdit.ch", "2kom.ru", "198.51.100.53",
                                          "ams.nordvpn.com", "x.eenet.ee", "res.dnscrypt.eu", "unbound", "gw.eero.com"};
  RandomPopulation p;
  std::uniform_int_distribution<int> asn(64500, 64700), kind(0, 9), suffix(0, 9999);
  for (std::size_t i = 0; i < n; ++i) {
    const std::string id = "v" + std::to_string(i);
    p.vps.emplace(id, vantage(id, static_cast<std::uint32_t>(asn(gen))));
    std::string server_id = kind(gen) < 3 ? named[static_cast<std::size_t>(suffix(gen)) % named.size()]
                                          : "DNS" + std::to_string(suffix(gen));
    p.verdicts.push_back(spoofed_by(id, {server_id}, letter_at(static_cast<std::size_t>(suffix(gen) % 13))));
  }
  return p;
}

TEST(ClusterProperty, PartitionAndOrderIndependence) {
  std::mt19937_64 gen(31);
  for (int round = 0; round < 20; ++round) {
    auto p = random_population(gen, 150);
    const auto reference = cluster(p.verdicts, p.vps);
    std::map<std::string, int> seen;
    for (const auto& c : reference.clusters)
      for (const auto& id : c.member_server_ids) ++seen[id];
    std::set<std::string> spoofed;
    for (const auto& v : p.verdicts) spoofed.insert(v.evidence.overt->unmatched_ids.begin(), v.evidence.overt->unmatched_ids.end());
    EXPECT_EQ(seen.size(), spoofed.size());
    for (const auto& [id, n] : seen) EXPECT_EQ(n, 1) << id;

    std::shuffle(p.verdicts.begin(), p.verdicts.end(), gen);
    const auto again = cluster(p.verdicts, p.vps);
    EXPECT_EQ(again.clusters, reference.clusters);
    EXPECT_EQ(again.cluster_of, reference.cluster_of);
  }
}

TEST(ClusterProperty, UnidentifiableDominatesGenericHeavyPopulations) {
  std::mt19937_64 gen(77);
  const auto p = random_population(gen, 400);
  std::map<PartyCategory, std::size_t> by_category;
  for (const auto& c : cluster(p.verdicts, p.vps).clusters) ++by_category[c.category];
  const auto unidentifiable = by_category[PartyCategory::unidentifiable];
  for (const auto& [cat, n] : by_category) {
    if (cat != PartyCategory::unidentifiable) EXPECT_GT(unidentifiable, n) << to_string(cat);
  }
}

}  // namespace
