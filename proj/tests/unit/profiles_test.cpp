#include <gtest/gtest.h>

#include <fstream>
#include <sstream>

#include "fixtures.hpp"
#include "rootspoof/profiles.hpp"
#include "rootspoof/simulate.hpp"

using namespace rootspoof;
using namespace rootspoof::testing;

namespace {

std::string twelve_letter_profile() {
  std::string text = "version test\n";
  for (char c = 'A'; c <= 'L'; ++c) text += std::string(1, c) + " ^x$\n";
  return text;
}

TEST(Profile, AnchoredCaseInsensitive) {
  ServerIdPattern p("^nnn1-([a-z]{3})[0-9]+$");
  EXPECT_TRUE(p.matches("nnn1-lax2"));
  EXPECT_TRUE(p.matches("NNN1-LAX2"));
  EXPECT_FALSE(p.matches("nnn1-lax2.evil.example"));
  EXPECT_FALSE(ServerIdPattern("nnn1-[a-z]+[0-9]").matches("xnnn1-lax2"));
  EXPECT_EQ(p.site_of("nnn1-LAX2"), "lax");
  EXPECT_EQ(ServerIdPattern("fixed-id").site_of("FIXED-ID"), "fixed-id");
}

TEST(Profile, MissingLetterIsNamed) {
  std::istringstream in(twelve_letter_profile());
  try {
    load_pattern_profile(in);
    FAIL() << "expected ProfileError";
  } catch (const ProfileError& e) {
    EXPECT_NE(std::string(e.what()).find('M'), std::string::npos) << e.what();
  }
}

TEST(Profile, EmptyOrBrokenRejected) {
  std::istringstream empty("# nothing\n\n");
  EXPECT_THROW(load_pattern_profile(empty), ProfileError);
  std::istringstream bad_regex(twelve_letter_profile() + "M ([unclosed\n");
  EXPECT_THROW(load_pattern_profile(bad_regex), ProfileError);
  std::istringstream bad_letter(twelve_letter_profile() + "M ^x$\nQ ^y$\n");
  EXPECT_THROW(load_pattern_profile(bad_letter), ProfileError);
}

TEST(Profile, RepeatedLettersTriedInOrder) {
  std::istringstream in(twelve_letter_profile() + "M ^m-([a-z]{3})-[0-9]+$\nM ^legacy-([a-z]+)$\n");
  const auto profile = load_pattern_profile(in);
  EXPECT_TRUE(profile.is_legitimate(Letter::M, "legacy-nrt"));
  EXPECT_EQ(profile.site_of(Letter::M, "m-cdg-2"), "cdg");
  EXPECT_FALSE(profile.is_legitimate(Letter::M, "x"));
}

TEST(ShippedProfile, OperatorIdsAcceptedSpoofIdsRejected) {
  const auto& profile = shipped_profile();
  EXPECT_FALSE(profile.version().empty());
  EXPECT_TRUE(profile.is_legitimate(Letter::A, "nnn1-lax2"));
  EXPECT_TRUE(profile.is_legitimate(Letter::A, "nnn1-lon3"));
  EXPECT_TRUE(profile.is_legitimate(Letter::K, "ns1.us-lax.k.ripe.net"));
  for (const char* spoof : {"2kom.ru", "chic-cns13.nlb.mdw1.comcast.net", "sawo", "DNS13", "DNS-Expire",
                            "njamerson.rdit.ch", "unbound", "nnn1-lax2.evil.example"}) {
    for (Letter l : all_letters()) EXPECT_FALSE(profile.is_legitimate(l, spoof)) << spoof << " on " << letter_char(l);
  }
}

TEST(ShippedProfile, AcceptsEverySimulatedSite) {
  const auto& profile = shipped_profile();
  for (Letter l : all_letters()) {
    for (const auto& site : default_topology(l)) {
      for (const auto& id : site.server_ids) {
        EXPECT_TRUE(profile.is_legitimate(l, id)) << id;
        EXPECT_EQ(profile.site_of(l, id), site.code) << id;
      }
    }
  }
}

TEST(KnownSites, LoadWriteRoundTrip) {
  std::ifstream shipped(data_path("known-sites.txt"));
  const auto list = load_known_sites(shipped);
  EXPECT_EQ(list.source_date, "2019-08-24");
  for (Letter l : all_letters()) EXPECT_FALSE(list.at(l).sites.empty());

  KnownSiteList custom = list;
  custom.letters[letter_index(Letter::B)].penultimate_hops = {ip("192.0.2.1"), ip("192.0.2.9")};
  std::ostringstream out;
  write_known_sites(out, custom);
  std::istringstream back(out.str());
  const auto reread = load_known_sites(back);
  EXPECT_EQ(reread.source_date, custom.source_date);
  for (Letter l : all_letters()) {
    EXPECT_EQ(reread.at(l).sites, custom.at(l).sites);
    EXPECT_EQ(reread.at(l).penultimate_hops, custom.at(l).penultimate_hops);
  }
}

TEST(KnownSites, Rejections) {
  std::istringstream empty("");
  EXPECT_THROW(load_known_sites(empty), ProfileError);
  std::istringstream missing("source_date 2019-08-24\nA sites lax\n");
  EXPECT_THROW(load_known_sites(missing), ProfileError);
  std::istringstream bad_hop("A hops not-an-ip\n");
  EXPECT_THROW(load_known_sites(bad_hop), ProfileError);
}

}  // namespace
