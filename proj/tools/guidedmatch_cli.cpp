// guidedmatch: generate synthetic scenes, match frame pairs, benchmark
// windowed (IMU-predicted) matching against brute force.
//
// Exit codes: 0 success, 1 runtime failure, 2 usage error.

#include <CLI11.hpp>

#include <chrono>
#include <cstdio>
#include <functional>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "guidedmatch/bench.hpp"

namespace {

using namespace guidedmatch;
using namespace guidedmatch::bench;

constexpr int kUsage = 2;
constexpr int kFailure = 1;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct MatchFlags {
  double threshold = 10.0;
  std::string metric;
  std::optional<double> max_distance;
  std::optional<double> ratio;
  bool fallback_brute = false;
  int threads = 1;
  bool include_io = false;
  std::string format = "csv";
};

void add_match_flags(CLI::App* cmd, MatchFlags& f) {
  cmd->add_option("--threshold", f.threshold, "window half-width in pixels (windowed only)")
      ->default_val(10.0)
      ->check(CLI::PositiveNumber);
  cmd->add_option("--metric", f.metric, "descriptor metric")->check(CLI::IsMember({"hamming", "euclidean"}));
  cmd->add_option("--max-distance", f.max_distance, "absolute descriptor distance gate")
      ->check(CLI::NonNegativeNumber);
  cmd->add_option("--ratio", f.ratio, "second-best ratio gate in (0, 1]")
      ->check(CLI::PositiveNumber & CLI::Range(0.0, 1.0));
  cmd->add_flag("--fallback-brute", f.fallback_brute,
                "brute-force features whose prediction failed (windowed only)");
  cmd->add_option("--threads", f.threads, "matcher threads")->default_val(1)->check(CLI::PositiveNumber);
  cmd->add_flag("--include-io", f.include_io, "include file reading and log building in elapsed time");
  cmd->add_option("--format", f.format, "output format")->check(CLI::IsMember({"csv", "md"}));
}

ParamOverrides overrides_from(const CLI::App* cmd, const MatchFlags& f) {
  ParamOverrides o;
  if (cmd->count("--threshold")) o.threshold = f.threshold;
  if (!f.metric.empty()) o.metric = f.metric == "hamming" ? Metric::hamming : Metric::euclidean;
  o.max_distance = f.max_distance;
  o.ratio = f.ratio;
  o.fallback_brute = f.fallback_brute;
  o.threads = f.threads;
  return o;
}

void print_warnings(const Dataset& d) {
  for (const auto& w : d.warnings) std::cerr << "warning: " << w << '\n';
}

int cmd_synth(const std::string& preset, std::uint64_t seed, const std::string& out) {
  const auto cfg = preset_config(preset, seed);
  if (!cfg) throw UsageError("unknown preset '" + preset + "'");
  const Scene scene = generate_scene(*cfg);
  const auto manifest = write_scene(scene, out, preset);
  std::cout << manifest.string() << '\n';
  return 0;
}

std::pair<std::size_t, std::size_t> parse_pair(const std::string& s) {
  const auto colon = s.find(':');
  if (colon == std::string::npos) throw UsageError("--pair expects SOURCE:TARGET frame indices");
  try {
    return {std::stoul(s.substr(0, colon)), std::stoul(s.substr(colon + 1))};
  } catch (const std::exception&) {
    throw UsageError("--pair expects SOURCE:TARGET frame indices");
  }
}

int cmd_match(const CLI::App* cmd, const std::string& manifest, const std::string& pair,
              const std::string& strategy_name, const MatchFlags& f) {
  const auto strategy = parse_strategy(strategy_name);
  if (!strategy) throw UsageError("unknown strategy '" + strategy_name + "'");
  if (*strategy == Strategy::brute && (cmd->count("--threshold") || f.fallback_brute)) {
    throw UsageError("--threshold and --fallback-brute apply to the windowed strategy only");
  }
  const auto [source, target] = parse_pair(pair);

  const auto io_start = std::chrono::steady_clock::now();
  const Dataset d = load_dataset(manifest);
  print_warnings(d);
  const StateLog log = build_log(d.imu, d.integrator);
  const double io_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - io_start).count();

  const MatchParams params = resolve_params(d, overrides_from(cmd, f));
  const PairResult r = run_pair(d, log, source, target, *strategy, params);
  const double elapsed_ms = (r.elapsed + (f.include_io ? io_seconds : 0.0)) * 1e3;
  const std::string fm = r.false_matches ? std::to_string(*r.false_matches) : "";
  if (f.format == "md") {
    std::cout << "| dataset | strategy | elapsed_ms | comparisons | matches | false_matches |\n"
              << "|---|---|---|---|---|---|\n"
              << "| " << d.name << " | " << to_string(*strategy) << " | " << format_fixed(elapsed_ms, kElapsedDecimals)
              << " | " << r.comparisons << " | " << r.matches << " | " << fm << " |\n";
  } else {
    std::cout << "dataset,strategy,elapsed_ms,comparisons,matches,false_matches\n"
              << d.name << ',' << to_string(*strategy) << ',' << format_fixed(elapsed_ms, kElapsedDecimals) << ','
              << r.comparisons << ',' << r.matches << ',' << fm << '\n';
  }
  return 0;
}

int cmd_bench(const CLI::App* cmd, const std::vector<std::string>& manifests, const std::vector<std::string>& presets,
              std::uint64_t seed, int reps, const MatchFlags& f) {
  if (manifests.empty() && presets.empty()) throw UsageError("bench needs at least one --manifest or --preset");
  if (reps < 3) throw UsageError("--reps must be >= 3");
  for (const auto& p : presets) {
    if (!preset_config(p, seed)) throw UsageError("unknown preset '" + p + "'");
  }

  struct Source {
    std::string label;
    std::function<Dataset()> load;
  };
  std::vector<Source> sources;
  for (const auto& m : manifests) sources.push_back({m, [m] { return load_dataset(m); }});
  for (const auto& p : presets) {
    sources.push_back({p, [p, seed] {
                         const SceneConfig cfg = *preset_config(p, seed);
                         return dataset_from_scene(generate_scene(cfg), cfg, p);
                       }});
  }

  BenchResult result;
  std::size_t failures = 0;
  for (const auto& s : sources) {
    try {
      const Dataset d = s.load();
      print_warnings(d);
      const MatchParams params = resolve_params(d, overrides_from(cmd, f));
      const DatasetTotals brute = run_dataset(d, Strategy::brute, params, reps, f.include_io);
      const DatasetTotals windowed = run_dataset(d, Strategy::windowed, params, reps, f.include_io);
      add_dataset_rows(result, d.name, brute, windowed);
    } catch (const std::exception& e) {
      ++failures;
      std::cerr << "warning: skipping " << s.label << ": " << e.what() << '\n';
    }
  }
  if (failures == sources.size()) {
    std::cerr << "error: every dataset failed\n";
    return kFailure;
  }
  add_average_rows(result);
  std::cout << (f.format == "md" ? to_markdown(result) : to_csv(result));
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"IMU-guided windowed feature matching: synthesis, matching and benchmarks"};
  app.require_subcommand(1);

  std::string preset, out;
  std::uint64_t seed = 1;
  auto* synth = app.add_subcommand("synth", "generate a synthetic scene in dataset format");
  synth->add_option("--preset", preset, "initial, front1m, back1m, left30 or right30")->required();
  synth->add_option("--seed", seed, "random seed")->default_val(1);
  synth->add_option("--out", out, "output directory")->required();

  std::string manifest, pair = "0:1", strategy = "windowed";
  MatchFlags match_flags;
  auto* match = app.add_subcommand("match", "match one frame pair of a dataset");
  match->add_option("--manifest", manifest, "dataset manifest")->required();
  match->add_option("--pair", pair, "SOURCE:TARGET frame indices")->default_val("0:1");
  match->add_option("--strategy", strategy, "windowed or brute")->default_val("windowed");
  add_match_flags(match, match_flags);

  std::vector<std::string> manifests, presets;
  std::uint64_t bench_seed = 1;
  int reps = 3;
  MatchFlags bench_flags;
  auto* bench = app.add_subcommand("bench", "benchmark both strategies over consecutive frame pairs");
  bench->add_option("--manifest", manifests, "dataset manifest (repeatable)");
  bench->add_option("--preset", presets, "synthetic preset generated in memory (repeatable)");
  bench->add_option("--seed", bench_seed, "seed for presets")->default_val(1);
  bench->add_option("--reps", reps, "repetitions (median time reported)")->default_val(3);
  add_match_flags(bench, bench_flags);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kUsage;
  }

  try {
    if (*synth) return cmd_synth(preset, seed, out);
    if (*match) return cmd_match(match, manifest, pair, strategy, match_flags);
    if (*bench) return cmd_bench(bench, manifests, presets, bench_seed, reps, bench_flags);
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return kUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kFailure;
  }
  return kUsage;
}
