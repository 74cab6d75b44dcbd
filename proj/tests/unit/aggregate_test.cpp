#include <gtest/gtest.h>

#include <random>
#include <sstream>

#include "fixtures.hpp"
#include "rootspoof/aggregate.hpp"
#include "rootspoof/pipeline.hpp"
#include "rootspoof/simulate.hpp"

using namespace rootspoof;
using namespace rootspoof::testing;

namespace {

constexpr Timestamp kHour = 1588479696;

std::vector<Verdict> vp_letters(const std::string& vp, Timestamp t, const std::vector<Classification>& per_letter) {
  std::vector<Verdict> out;
  for (std::size_t i = 0; i < per_letter.size(); ++i) out.push_back(make_verdict(vp, letter_at(i), t, per_letter[i]));
  return out;
}

void append(std::vector<Verdict>& to, const std::vector<Verdict>& from) { to.insert(to.end(), from.begin(), from.end()); }

TEST(EpochSummary, EpochFixture) {
  const auto pop = expand_epoch_fixture();
  const auto s = epoch_summary(pop.verdicts);
  EXPECT_EQ(s.n_active_vps, 10882u);
  EXPECT_EQ(s.n_timeout, 260u);
  EXPECT_EQ(s.n_spoofed, 192u);
  EXPECT_EQ(s.n_covert_delayed, 19u);
  EXPECT_EQ(s.n_valid, 10430u);
  EXPECT_EQ(s.n_answered, s.n_valid + s.n_spoofed);
  EXPECT_EQ(s.n_insufficient, 14u);
  EXPECT_NEAR(100 * s.fraction_timeout, 2.39, 0.005);
  EXPECT_NEAR(100 * s.fraction_spoofed, 1.76, 0.005);
  EXPECT_NEAR(100 * s.fraction_covert_delayed, 0.17, 0.005);
}

TEST(EpochSummary, VpLevelRules) {
  std::vector<Verdict> v;
  using C = Classification;
  append(v, vp_letters("spoof-and-timeout", kHour, {C::overt_spoofed, C::timeout, C::valid}));
  append(v, vp_letters("answered", kHour, {C::timeout, C::valid}));
  append(v, vp_letters("covert", kHour, {C::covert_delayed, C::valid}));
  append(v, vp_letters("timeout", kHour, {C::timeout, C::insufficient}));
  append(v, vp_letters("nothing", kHour, {C::insufficient}));
  const auto s = epoch_summary(v);
  EXPECT_EQ(s.n_spoofed, 1u);
  EXPECT_EQ(s.n_valid, 2u);
  EXPECT_EQ(s.n_covert_delayed, 1u);
  EXPECT_EQ(s.n_timeout, 1u);
  EXPECT_EQ(s.n_active_vps, 4u);
  EXPECT_EQ(s.n_insufficient, 1u);
  EXPECT_EQ(s.spoofed_per_letter[0], 1u);
  EXPECT_EQ(s.active_per_letter[0], 4u);

  const auto all_valid = vp_letters("x", kHour, {C::valid, C::valid});
  EXPECT_EQ(epoch_summary(all_valid).fraction_spoofed, 0.0);
  append(v, vp_letters("later", kHour + 86400, {C::valid}));
  EXPECT_THROW(epoch_summary(v), InputError);
}

TEST(EpochSummary, PlantedFivePercent) {
  ScenarioConfig c;
  c.name = "five-percent";
  c.seed = 5;
  c.n_vps = 400;
  c.letters = {Letter::A, Letter::K};
  c.hours = {kHour};
  c.jitter_mad_ms = 0;
  AdversaryGroup honest, proxy;
  honest.label = "honest";
  honest.count = 380;
  proxy.label = "proxy";
  proxy.kind = AdversaryKind::overt_proxy;
  proxy.count = 20;
  proxy.spoof_server_ids = {"sawo"};
  c.groups = {honest, proxy};
  const auto sim = generate(c, 1);
  const auto verdicts = detect(build_windows(sim.observations, sim.schedule), shipped_profile(), DetectConfig{{}, 1});
  const auto s = epoch_summary(verdicts);
  EXPECT_EQ(s.n_spoofed, 20u);
  EXPECT_EQ(s.n_active_vps, 400u);
  EXPECT_EQ(s.fraction_spoofed, 20.0 / 400.0);
}

TEST(Trend, FixtureEndpoints) {
  const auto series = expand_trend();
  const auto epochs = summarize_epochs(series.population.verdicts, 2);
  const auto full = trend(epochs);
  ASSERT_EQ(full.size(), series.hours.size());
  EXPECT_EQ(full.front().fraction_spoofed, 70.0 / 10000.0);
  EXPECT_EQ(full.back().fraction_spoofed, 170.0 / 10000.0);
  EXPECT_EQ(full.front().date, "2014-02-04");
  EXPECT_EQ(full.back().date, "2020-05-03");

  const auto cohort = select_cohort(series.population.verdicts, series.cohort_size);
  EXPECT_EQ(cohort.size(), 3000u);
  EXPECT_TRUE(cohort.count("core00000"));
  const auto fixed = cohort_trend(series.population.verdicts, cohort, 2);
  EXPECT_EQ(fixed.front().fraction_spoofed, 15.0 / 3000.0);
  EXPECT_EQ(fixed.back().fraction_spoofed, 42.0 / 3000.0);
  for (std::size_t i = 1; i < full.size(); ++i) EXPECT_GT(full[i].fraction_spoofed, full[i - 1].fraction_spoofed);
}

TEST(Trend, DegenerateCohorts) {
  std::vector<Verdict> v;
  using C = Classification;
  for (int e = 0; e < 4; ++e) {
    for (int k = 0; k < 50; ++k)
      append(v, vp_letters("vp" + std::to_string(k), kHour + e * 86400, {k < 5 ? C::overt_spoofed : C::valid}));
  }
  const auto epochs = summarize_epochs(v);
  const auto flat = trend(epochs);
  for (const auto& p : flat) EXPECT_EQ(p.fraction_spoofed, 0.1);
  const auto everyone = select_cohort(v, 1000);
  const auto same = cohort_trend(v, everyone);
  ASSERT_EQ(same.size(), flat.size());
  for (std::size_t i = 0; i < flat.size(); ++i) {
    EXPECT_EQ(same[i].fraction_spoofed, flat[i].fraction_spoofed);
    EXPECT_EQ(same[i].per_letter, flat[i].per_letter);
  }
  EXPECT_THROW(cohort_trend(v, {}), ConfigError);
}

TEST(Trend, PlantedLinearGrowth) {
  std::vector<Verdict> v;
  for (int e = 0; e < 6; ++e) {
    for (int k = 0; k < 1000; ++k)
      append(v, vp_letters("vp" + std::to_string(k), kHour + e * 30 * 86400,
                           {k < 10 + 4 * e ? Classification::overt_spoofed : Classification::valid}));
  }
  const auto points = trend(summarize_epochs(v));
  for (std::size_t e = 0; e < points.size(); ++e) EXPECT_DOUBLE_EQ(points[e].fraction_spoofed, (10 + 4.0 * e) / 1000);
}

TEST(Countries, RankingAndUndersampled) {
  std::vector<Verdict> v;
  VpIndex vps;
  auto add = [&](const std::string& country, std::size_t active, std::size_t spoofed) {
    for (std::size_t i = 0; i < active; ++i) {
      const std::string id = country + std::to_string(i);
      vps.emplace(id, VantagePoint{id, Prefix24{}, 1, country, std::nullopt});
      v.push_back(make_verdict(id, Letter::A, kHour, i < spoofed ? Classification::overt_spoofed : Classification::valid));
    }
  };
  add("ID", 87, 23);
  add("IR", 198, 48);
  add("NL", 400, 2);
  add("VA", 9, 1);
  v.push_back(make_verdict("ghost", Letter::A, kHour, Classification::overt_spoofed));
  const auto r = country_fractions(v, vps);
  ASSERT_EQ(r.rows.size(), 4u);
  EXPECT_EQ(r.rows[0].country, "ID");
  EXPECT_EQ(std::lround(100 * r.rows[0].fraction), 26);
  EXPECT_EQ(r.rows[1].country, "IR");
  EXPECT_EQ(std::lround(100 * r.rows[1].fraction), 24);
  EXPECT_EQ(r.rows[0].rank, 1u);
  EXPECT_EQ(r.rows[3].country, "VA");
  EXPECT_TRUE(r.rows[3].undersampled);
  EXPECT_FALSE(r.rows[3].rank);
  EXPECT_EQ(r.unknown.n_spoofed, 1u);
}

TEST(CovertCorroboration, CountsMultiLetterDelayers) {
  using C = Classification;
  std::vector<Verdict> v;
  append(v, vp_letters("one", kHour, {C::covert_delayed, C::valid, C::valid}));
  append(v, vp_letters("two", kHour, {C::covert_delayed, C::covert_delayed, C::valid}));
  append(v, vp_letters("three", kHour, {C::covert_delayed, C::covert_delayed, C::covert_delayed}));
  // spoofing outranks delay at VP level
  append(v, vp_letters("spoofed", kHour, {C::covert_delayed, C::covert_delayed, C::overt_spoofed}));
  append(v, vp_letters("one", kHour + 86400, {C::covert_delayed, C::covert_delayed}));
  const auto c = covert_corroboration(v);
  EXPECT_EQ(c.n_delayers, 4u);
  EXPECT_EQ(c.n_multi_letter, 3u);
  EXPECT_DOUBLE_EQ(c.fraction_multi_letter, 0.75);
  EXPECT_EQ(covert_corroboration({}).fraction_multi_letter, 0.0);
}

TEST(LetterCdf, Shapes) {
  std::vector<Verdict> v;
  using C = Classification;
  for (int k = 0; k < 100; ++k) {
    std::vector<C> letters(13, C::valid);
    const int spoofed = k < 83 ? 13 : 1 + k % 12;
    for (int i = 0; i < spoofed; ++i) letters[static_cast<std::size_t>(i)] = C::overt_spoofed;
    append(v, vp_letters("vp" + std::to_string(k), kHour, letters));
  }
  const auto cdf = letter_count_cdf(v);
  EXPECT_EQ(cdf.n_vps, 100u);
  EXPECT_DOUBLE_EQ(cdf.cdf[11], 0.17);
  EXPECT_EQ(cdf.cdf[12], 1.0);

  std::vector<Verdict> singles;
  for (int k = 0; k < 10; ++k) append(singles, vp_letters("s" + std::to_string(k), kHour, {C::overt_spoofed, C::valid}));
  EXPECT_EQ(letter_count_cdf(singles).cdf[0], 1.0);
  EXPECT_EQ(letter_count_cdf({}).n_vps, 0u);
}

TEST(MechanismTrend, SharesAndEmptyEpochs) {
  std::vector<Verdict> v;
  for (int k = 0; k < 20; ++k) {
    auto verdict = make_verdict("vp" + std::to_string(k), Letter::A, kHour, Classification::overt_spoofed);
    if (k < 2) verdict.mechanism = Mechanism::anycast;
    v.push_back(verdict);
  }
  v.push_back(make_verdict("quiet", Letter::A, kHour + 86400, Classification::valid));
  const auto points = mechanism_trend(v);
  ASSERT_EQ(points.size(), 1u);
  EXPECT_EQ(points[0].n_anycast, 2u);
  EXPECT_EQ(points[0].non_anycast_share, 0.9);
  EXPECT_TRUE(mechanism_trend(std::vector<Verdict>{v.back()}).empty());
}

TEST(LatencyImprovement, SignAndExclusions) {
  auto spoof = [](Letter l, std::optional<std::pair<double, double>> medians) {
    auto v = make_verdict("vp" + std::string(1, letter_char(l)), l, kHour, Classification::overt_spoofed);
    if (medians) {
      LatencyStats s;
      s.median_dns = medians->first;
      s.median_ping = medians->second;
      v.evidence.latency = s;
    }
    return v;
  };
  std::vector<Verdict> v = {spoof(Letter::A, std::pair{2.0, 80.0}), spoof(Letter::B, std::pair{30.0, 30.0}),
                            spoof(Letter::C, std::pair{40.0, 20.0}), spoof(Letter::D, std::nullopt),
                            spoof(Letter::G, std::pair{1.0, 1.0})};
  const auto r = latency_improvement(v);
  EXPECT_EQ(r.n_windows, 3u);
  EXPECT_EQ(r.n_excluded, 1u);
  EXPECT_EQ(r.n_no_icmp, 1u);
  EXPECT_DOUBLE_EQ(r.fraction_nonpositive, 2.0 / 3);
  ASSERT_EQ(r.letters.size(), 3u);
  EXPECT_EQ(r.letters[0].cdf[0].value, 78.0);
}

TEST(LatencyImprovement, SmallFootprintLettersGainMore) {
  // Ordering follows the inverse of the anycast footprint: a spoofer next to
  // the VP saves more on a letter with few sites.
  ScenarioConfig c;
  c.name = "footprint";
  c.seed = 12;
  c.n_vps = 300;
  c.letters = {Letter::B, Letter::L};  // 3 sites vs 20 in the built-in layout
  c.hours = {kHour};
  AdversaryGroup proxy;
  proxy.label = "proxy";
  proxy.kind = AdversaryKind::overt_proxy;
  proxy.probability = 1.0;
  proxy.spoof_server_ids = {"sawo"};
  c.groups = {proxy};
  const auto sim = generate(c, 1);
  const auto verdicts = detect(build_windows(sim.observations, sim.schedule), shipped_profile(), DetectConfig{{}, 1});
  const auto r = latency_improvement(verdicts);
  ASSERT_EQ(r.letters.size(), 2u);
  auto median_gain = [](const LetterImprovement& li) { return li.cdf[li.cdf.size() / 2].value; };
  EXPECT_GT(median_gain(r.letters[0]), median_gain(r.letters[1]));
  EXPECT_GT(default_topology(Letter::L).size(), default_topology(Letter::B).size());
}

TEST(AggregateProperty, IdentitiesCdfsAndCountryPartition) {
  std::mt19937_64 gen(404);
  std::uniform_int_distribution<int> cls(0, 19), country(0, 6), letters(1, 13);
  const std::vector<std::string> countries = {"US", "DE", "NL", "IR", "ID", "", "BR"};
  for (int round = 0; round < 30; ++round) {
    std::vector<Verdict> v;
    VpIndex vps;
    for (int e = 0; e < 3; ++e) {
      for (int k = 0; k < 200; ++k) {
        const std::string id = "vp" + std::to_string(k);
        if (e == 0 && k % 17 != 0) vps.emplace(id, VantagePoint{id, Prefix24{}, 1, countries[static_cast<std::size_t>(country(gen))], std::nullopt});
        const int n = letters(gen);
        for (int i = 0; i < n; ++i) {
          const int r = cls(gen);
          const auto c = r == 0 ? Classification::overt_spoofed
                         : r < 3 ? Classification::timeout
                         : r < 4 ? Classification::insufficient
                         : r < 5 ? Classification::covert_delayed
                                 : Classification::valid;
          v.push_back(make_verdict(id, letter_at(static_cast<std::size_t>(i)), kHour + e * 86400, c));
        }
      }
    }
    const auto epochs = summarize_epochs(v);
    std::size_t spoofed_total = 0, active_total = 0;
    for (const auto& e : epochs) {
      EXPECT_NO_THROW(e.check());
      EXPECT_EQ(e.n_answered, e.n_valid + e.n_spoofed);
      EXPECT_EQ(e.n_active_vps, e.n_answered + e.n_timeout);
      spoofed_total += e.n_spoofed;
      active_total += e.n_active_vps;
    }
    const auto countries_report = country_fractions(v, vps);
    std::size_t spoofed_rows = countries_report.unknown.n_spoofed, active_rows = countries_report.unknown.n_active;
    for (const auto& row : countries_report.rows) {
      spoofed_rows += row.n_spoofed;
      active_rows += row.n_active;
    }
    EXPECT_EQ(spoofed_rows, spoofed_total);
    EXPECT_EQ(active_rows, active_total);

    const auto cdf = letter_count_cdf(v);
    for (std::size_t k = 1; k < cdf.cdf.size(); ++k) EXPECT_LE(cdf.cdf[k - 1], cdf.cdf[k]);
    if (cdf.n_vps > 0) EXPECT_EQ(cdf.cdf.back(), 1.0);
  }
}

TEST(ReportOutput, StableCsvColumns) {
  const auto pop = expand_epoch_fixture();
  const auto report = build_report(pop.verdicts, pop.vps);
  std::ostringstream epochs, countries, cdf;
  write_epochs_csv(epochs, report.epochs);
  write_countries_csv(countries, report.countries);
  write_letter_cdf_csv(cdf, report.letter_cdf);
  EXPECT_EQ(epochs.str().substr(0, epochs.str().find('\n')),
            "date,window_start,n_active_vps,n_timeout,n_answered,n_valid,n_covert_delayed,n_spoofed,n_insufficient,"
            "fraction_timeout,fraction_spoofed,fraction_covert_delayed");
  EXPECT_NE(epochs.str().find("2020-05-03,1588479696,10882,260,10622,10430,19,192,14,"), std::string::npos);
  EXPECT_EQ(countries.str().substr(0, countries.str().find('\n')), "country,n_active,n_spoofed,fraction,undersampled,rank");
  EXPECT_EQ(cdf.str().substr(0, cdf.str().find('\n')), "letters_spoofed,n_vps,cdf");
  std::ostringstream a, b;
  write_report_json(a, report);
  write_report_json(b, build_report(pop.verdicts, pop.vps, ReportOptions{3000, 10, 1}));
  EXPECT_EQ(a.str(), b.str());
}

}  // namespace
