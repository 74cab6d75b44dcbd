#include <benchmark/benchmark.h>

#include <fstream>
#include <map>
#include <sstream>

#include "rootspoof/aggregate.hpp"
#include "rootspoof/detect_covert.hpp"
#include "rootspoof/pipeline.hpp"
#include "rootspoof/records.hpp"
#include "rootspoof/simulate.hpp"
#include "rootspoof/validate.hpp"

using namespace rootspoof;

namespace {

const PatternProfile& profile() {
  static const PatternProfile p = [] {
    std::ifstream in(ROOTSPOOF_DATA_DIR "/profiles/root-server-ids.profile");
    return load_pattern_profile(in);
  }();
  return p;
}

ScenarioConfig population(std::size_t n_vps) {
  ScenarioConfig c;
  c.name = "bench";
  c.seed = 11;
  c.n_vps = n_vps;
  c.letters = {Letter::A, Letter::B, Letter::C, Letter::D, Letter::E, Letter::F, Letter::G,
               Letter::H, Letter::I, Letter::J, Letter::K, Letter::L, Letter::M};
  c.hours = {1547090220};
  AdversaryGroup honest, proxy;
  honest.label = "honest";
  honest.count = n_vps - n_vps / 50;
  proxy.label = "proxy";
  proxy.kind = AdversaryKind::overt_proxy;
  proxy.count = n_vps / 50;
  proxy.spoof_server_ids = {"sawo"};
  c.groups = {honest, proxy};
  return c;
}

const SimulationOutput& simulated(std::size_t n_vps) {
  static std::map<std::size_t, SimulationOutput> cache;
  auto it = cache.find(n_vps);
  if (it == cache.end()) it = cache.emplace(n_vps, generate(population(n_vps))).first;
  return it->second;
}

void BM_Generate(benchmark::State& state) {
  const auto config = population(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(generate(config, 1));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_Generate)->Arg(200)->Arg(1000)->Unit(benchmark::kMillisecond);

void BM_ParseDns(benchmark::State& state) {
  std::ostringstream text;
  write_records(text, simulated(1000).observations.dns);
  const std::string s = text.str();
  for (auto _ : state) {
    std::istringstream in(s);
    benchmark::DoNotOptimize(parse_dns_results(in));
  }
  state.SetBytesProcessed(state.iterations() * static_cast<std::int64_t>(s.size()));
}
BENCHMARK(BM_ParseDns)->Unit(benchmark::kMillisecond);

void BM_BuildWindows(benchmark::State& state) {
  const auto& sim = simulated(1000);
  for (auto _ : state) benchmark::DoNotOptimize(build_windows(sim.observations, sim.schedule));
}
BENCHMARK(BM_BuildWindows)->Unit(benchmark::kMillisecond);

void BM_Detect(benchmark::State& state) {
  const auto& sim = simulated(static_cast<std::size_t>(state.range(0)));
  const auto windows = build_windows(sim.observations, sim.schedule);
  for (auto _ : state) benchmark::DoNotOptimize(detect(windows, profile(), DetectConfig{{}, 1}, &sim.known_sites));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(windows.size()));
}
BENCHMARK(BM_Detect)->Arg(200)->Arg(1000)->Unit(benchmark::kMillisecond);

void BM_MatchServerLog(benchmark::State& state) {
  const auto& sim = simulated(1000);
  const auto windows = build_windows(sim.observations, sim.schedule);
  VpIndex vps;
  for (const auto& vp : sim.vps) vps.emplace(vp.vp_id, vp);
  for (auto _ : state) {
    const ServerLogIndex index(sim.server_log, Letter::B);
    benchmark::DoNotOptimize(match_queries(windows, index, vps));
  }
}
BENCHMARK(BM_MatchServerLog)->Unit(benchmark::kMillisecond);

void BM_Report(benchmark::State& state) {
  const auto& sim = simulated(1000);
  const auto verdicts = detect(build_windows(sim.observations, sim.schedule), profile(), DetectConfig{{}, 1});
  VpIndex vps;
  for (const auto& vp : sim.vps) vps.emplace(vp.vp_id, vp);
  for (auto _ : state) benchmark::DoNotOptimize(build_report(verdicts, vps, ReportOptions{3000, 10, 1}));
}
BENCHMARK(BM_Report)->Unit(benchmark::kMillisecond);

void BM_CovertTest(benchmark::State& state) {
  std::vector<double> dns(15), ping(15);
  for (std::size_t i = 0; i < dns.size(); ++i) {
    dns[i] = 70 + static_cast<double>(i % 5);
    ping[i] = 30 + static_cast<double>(i % 3);
  }
  for (auto _ : state) {
    LatencyStats s;
    s.median_dns = median(dns);
    s.median_ping = median(ping);
    s.mad_dns = median_absolute_deviation(dns);
    s.mad_ping = median_absolute_deviation(ping);
    s.delta = s.median_dns - s.median_ping;
    benchmark::DoNotOptimize(is_covert_delayed(s));
  }
}
BENCHMARK(BM_CovertTest);

}  // namespace

BENCHMARK_MAIN();
