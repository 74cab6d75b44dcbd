#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "cli.hpp"
#include "fixtures.hpp"
#include "rootspoof/records.hpp"
#include "rootspoof/simulate.hpp"

using namespace rootspoof;
using namespace rootspoof::testing;
namespace fs = std::filesystem;

namespace {

struct Run {
  int code;
  std::string out, err;
};

Run cli(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

TEST(Cli, UnknownSubcommandIsConfigError) {
  const auto r = cli({"frobnicate"});
  EXPECT_EQ(r.code, cli::kConfigError);
  EXPECT_NE(r.err.find("Usage"), std::string::npos);
}

TEST(Cli, NoSubcommandIsConfigError) { EXPECT_EQ(cli({}).code, cli::kConfigError); }

TEST(Cli, HelpSucceeds) {
  const auto r = cli({"--help"});
  EXPECT_EQ(r.code, cli::kOk);
  EXPECT_NE(r.out.find("detect"), std::string::npos);
}

TEST(Cli, MissingInputFile) {
  const auto dir = scratch_dir("cli-missing");
  const auto r = cli({"report", "--verdicts", (dir / "absent.ndjson").string(), "--out", dir.string()});
  EXPECT_EQ(r.code, cli::kConfigError);
  EXPECT_NE(r.err.find("absent.ndjson"), std::string::npos);
}

TEST(Cli, MalformedVerdictsAreInputError) {
  const auto dir = scratch_dir("cli-malformed");
  write_file(dir / "v.ndjson", "{not json\n");
  const auto r = cli({"report", "--verdicts", (dir / "v.ndjson").string(), "--out", (dir / "out").string()});
  EXPECT_EQ(r.code, cli::kInputError);
}

TEST(Cli, BadScenarioIsConfigError) {
  const auto dir = scratch_dir("cli-bad-scenario");
  write_file(dir / "s.json", R"({"n_vps": 10, "letters": "A", "hours": ["2019-01-10T03:00:00Z"], "bogus": 1})");
  const auto r = cli({"simulate", "--scenario", (dir / "s.json").string(), "--out", (dir / "out").string()});
  EXPECT_EQ(r.code, cli::kConfigError);
}

TEST(Cli, RejectsBadThreshold) {
  const auto dir = scratch_dir("cli-threshold");
  write_file(dir / "dns.ndjson", "");
  write_file(dir / "schedule.txt", "2019-01-10T03:00:00Z\n");
  const auto r = cli({"detect", "--dns", (dir / "dns.ndjson").string(), "--schedule", (dir / "schedule.txt").string(),
                      "--profile", data_path("profiles/root-server-ids.profile").string(), "--relative-threshold", "-1",
                      "--out", (dir / "out").string()});
  EXPECT_EQ(r.code, cli::kConfigError);
}

TEST(Cli, ReportOnFixture) {
  const auto dir = scratch_dir("cli-report");
  const auto pop = expand_epoch_fixture();
  {
    std::ostringstream v, p;
    write_records(v, pop.verdicts);
    std::vector<VantagePoint> vps;
    for (const auto& [id, vp] : pop.vps) vps.push_back(vp);
    write_records(p, vps);
    write_file(dir / "verdicts.ndjson", v.str());
    write_file(dir / "vps.ndjson", p.str());
  }
  const auto r = cli({"report", "--verdicts", (dir / "verdicts.ndjson").string(), "--vps",
                      (dir / "vps.ndjson").string(), "--out", (dir / "out").string()});
  ASSERT_EQ(r.code, cli::kOk) << r.err;
  EXPECT_NE(r.out.find("2.39% timeout"), std::string::npos) << r.out;
  EXPECT_NE(r.out.find("1.76% spoofed"), std::string::npos) << r.out;
  EXPECT_NE(r.out.find("0.17% covert"), std::string::npos) << r.out;
  for (const char* f : {"report.json", "epochs.csv", "trend.csv", "cohort_trend.csv", "countries.csv",
                        "letter_cdf.csv", "mechanism_trend.csv", "latency_improvement.csv", "manifest.json"}) {
    EXPECT_TRUE(fs::exists(dir / "out" / f)) << f;
  }
  const auto manifest = nlohmann::json::parse(read_file(dir / "out" / "manifest.json"));
  EXPECT_EQ(manifest.at("subcommand"), "report");
}

TEST(Cli, SimulateDetectScoreRoundTrip) {
  const auto dir = scratch_dir("cli-roundtrip");
  write_file(dir / "s.json", R"({
    "name": "cli", "seed": 3, "n_vps": 60, "letters": "ABK",
    "hours": ["2019-01-10T03:00:00Z"], "jitter": {"mad_ms": 0},
    "groups": [
      {"kind": "honest", "count": 50},
      {"kind": "overt_proxy", "count": 10, "spoof_server_id": "sawo"}
    ]})");
  const auto sim = dir / "sim";
  ASSERT_EQ(cli({"simulate", "--scenario", (dir / "s.json").string(), "--out", sim.string()}).code, cli::kOk);
  const auto det = cli({"detect", "--dns", (sim / "dns.ndjson").string(), "--ping", (sim / "ping.ndjson").string(),
                        "--traceroute", (sim / "traceroute.ndjson").string(), "--schedule",
                        (sim / "schedule.txt").string(), "--profile", data_path("profiles/root-server-ids.profile").string(),
                        "--known-sites", (sim / "known-sites.txt").string(), "--out", (dir / "det").string()});
  ASSERT_EQ(det.code, cli::kOk) << det.err;
  std::ifstream in(dir / "det" / "verdicts.ndjson");
  const auto verdicts = read_verdicts(in);
  EXPECT_EQ(verdicts.size(), 60u * 3);
  std::size_t spoofed = 0;
  for (const auto& v : verdicts) spoofed += is_spoofed(v) ? 1 : 0;
  EXPECT_EQ(spoofed, 30u);

  const auto sc = cli({"score", "--verdicts", (dir / "det" / "verdicts.ndjson").string(), "--truth",
                       (sim / "truth.ndjson").string(), "--out", (dir / "score").string()});
  ASSERT_EQ(sc.code, cli::kOk) << sc.err;
  EXPECT_NE(sc.out.find("false positives 0"), std::string::npos) << sc.out;
  EXPECT_TRUE(fs::exists(dir / "score" / "score.json"));
}

}  // namespace
