#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include "guidedmatch/dataset.hpp"
#include "guidedmatch/imu_state.hpp"
#include "guidedmatch/matcher.hpp"
#include "guidedmatch/predictor.hpp"
#include "guidedmatch/synth.hpp"

namespace guidedmatch::bench {

enum class Strategy { windowed, brute };

inline const char* to_string(Strategy s) { return s == Strategy::windowed ? "windowed" : "brute"; }

inline std::optional<Strategy> parse_strategy(std::string_view s) {
  if (s == "windowed") return Strategy::windowed;
  if (s == "brute") return Strategy::brute;
  return std::nullopt;
}

inline const std::vector<std::string>& preset_names() {
  static const std::vector<std::string> names{"initial", "front1m", "back1m", "left30", "right30"};
  return names;
}

/// Scene configuration for a named preset: standing still, moving 1 m
/// forward or back, or turning 30 degrees left or right.
inline std::optional<SceneConfig> preset_config(std::string_view name, std::uint64_t seed) {
  SceneConfig cfg;
  cfg.seed = seed;
  if (name == "initial") cfg.trajectory = Trajectory::still();
  else if (name == "front1m") cfg.trajectory = Trajectory::forward(1.0);
  else if (name == "back1m") cfg.trajectory = Trajectory::backward(1.0);
  else if (name == "left30") cfg.trajectory = Trajectory::yaw_left(30.0);
  else if (name == "right30") cfg.trajectory = Trajectory::yaw_right(30.0);
  else return std::nullopt;
  return cfg;
}

/// Everything needed to match frame pairs of one dataset.
struct Dataset {
  std::string name;
  CameraIntrinsics intrinsics;
  std::vector<Frame> frames;
  std::vector<ImuSample> imu;
  IntegratorConfig integrator;
  std::optional<GroundTruth> truth;
  std::vector<std::string> warnings;
  std::optional<fs::path> manifest_path;
};

inline Dataset dataset_from_scene(const Scene& scene, const SceneConfig& cfg, std::string name) {
  Dataset d;
  d.name = std::move(name);
  d.intrinsics = cfg.intrinsics;
  d.frames = scene.frames;
  d.imu = scene.imu;
  d.integrator = integrator_config_for(cfg);
  d.truth = scene.truth;
  return d;
}

inline Dataset load_dataset(const fs::path& manifest_path) {
  const DatasetManifest m = load_manifest(manifest_path);
  Dataset d;
  d.name = m.name;
  d.manifest_path = manifest_path;
  d.intrinsics = m.intrinsics;
  d.imu = load_imu(m.imu_file, &d.warnings);
  d.integrator.start_time = m.start_time;
  for (const auto& [t, path] : list_feature_files(m.features_dir)) {
    d.frames.push_back(load_feature_file(path, t, m.width, m.height));
  }
  if (m.truth_file) d.truth = load_truth(*m.truth_file, m.intrinsics, m.width, m.height);
  return d;
}

/// Index of the truth pose recorded at the frame's timestamp.
inline std::optional<std::size_t> truth_frame_index(const GroundTruth& truth, double t, double tol = 1e-6) {
  for (std::size_t i = 0; i < truth.poses.size(); ++i) {
    if (std::abs(truth.poses[i].t - t) <= tol) return i;
  }
  return std::nullopt;
}

struct PairResult {
  double elapsed = 0.0;  // seconds
  std::uint64_t comparisons = 0;
  std::uint64_t candidates_examined = 0;
  std::size_t matches = 0;
  std::optional<std::size_t> false_matches;
};

/// Matches frames[source] against frames[target]. For the windowed strategy
/// the elapsed time covers prediction plus matching; the state log is
/// built beforehand and not timed.
inline PairResult run_pair(const Dataset& d, const StateLog& log, std::size_t source, std::size_t target,
                           Strategy strategy, const MatchParams& params) {
  if (source >= d.frames.size() || target >= d.frames.size()) {
    throw LookupError("frame index out of range (dataset has " + std::to_string(d.frames.size()) + " frames)");
  }
  const Frame& a = d.frames[source];
  const Frame& b = d.frames[target];
  MatchReport report;
  PairResult r;
  if (strategy == Strategy::windowed) {
    const auto start = std::chrono::steady_clock::now();
    const auto predictions = predict_frame(a, log, b.timestamp, d.intrinsics);
    report = neighboring_match(a, b, predictions, params);
    r.elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  } else {
    report = brute_force_match(a, b, params);
    r.elapsed = report.elapsed;
  }
  r.comparisons = report.comparisons;
  r.candidates_examined = report.candidates_examined;
  r.matches = report.pairs.size();
  if (d.truth) {
    const auto ts = truth_frame_index(*d.truth, a.timestamp);
    const auto tt = truth_frame_index(*d.truth, b.timestamp);
    if (ts && tt) r.false_matches = score_matches(report, *d.truth, *ts, *tt).false_matches;
  }
  return r;
}

/// Parameters with descriptor-appropriate defaults, then user overrides.
struct ParamOverrides {
  std::optional<double> threshold;
  std::optional<Metric> metric;
  std::optional<double> max_distance;
  std::optional<double> ratio;
  bool fallback_brute = false;
  int threads = 1;
};

inline MatchParams resolve_params(const Dataset& d, const ParamOverrides& o) {
  MatchParams p;
  for (const auto& f : d.frames) {
    if (!f.features.empty()) {
      p = default_params_for(f.features.front().descriptor);
      break;
    }
  }
  if (o.metric) {
    p.metric = *o.metric;
    if (!o.max_distance) p.max_descriptor_distance = *o.metric == Metric::hamming ? 64.0 : 0.7;
  }
  if (o.threshold) p.threshold = *o.threshold;
  if (o.max_distance) p.max_descriptor_distance = *o.max_distance;
  p.ratio = o.ratio;
  p.fallback_brute_force = o.fallback_brute;
  p.threads = o.threads;
  p.validate();
  return p;
}

// ---------------------------------------------------------------- bench tables

struct BenchRow {
  std::string dataset;
  Strategy strategy = Strategy::windowed;
  double elapsed_ms = 0.0;  // median over repetitions, summed over frame pairs
  double comparisons = 0.0;
  double candidates_examined = 0.0;
  double matches = 0.0;
  std::optional<double> false_matches;
  double speedup = 1.0;
  double comparison_reduction = 1.0;
};

struct BenchResult {
  std::vector<BenchRow> rows;  // per dataset: brute then windowed; then the Average rows
};

inline constexpr int kElapsedDecimals = 6;
inline constexpr int kRatioDecimals = 3;
inline constexpr int kCountDecimals = 3;

inline double round_to(double v, int decimals) {
  const double scale = std::pow(10.0, decimals);
  return std::round(v * scale) / scale;
}

struct DatasetTotals {
  std::vector<double> elapsed;  // one per repetition
  std::uint64_t comparisons = 0;
  std::uint64_t candidates_examined = 0;
  std::size_t matches = 0;
  std::optional<std::size_t> false_matches;
};

/// All consecutive frame pairs of a dataset, `reps` times. Counts come from
/// the first repetition (they are deterministic).
inline DatasetTotals run_dataset(const Dataset& d, Strategy strategy, const MatchParams& params, int reps,
                                 bool include_io) {
  DatasetTotals totals;
  for (int rep = 0; rep < reps; ++rep) {
    double io_seconds = 0.0;
    const Dataset* data = &d;
    Dataset reloaded;
    if (include_io && d.manifest_path) {
      const auto start = std::chrono::steady_clock::now();
      reloaded = load_dataset(*d.manifest_path);
      io_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
      data = &reloaded;
    }
    const auto log_start = std::chrono::steady_clock::now();
    const StateLog log = build_log(data->imu, data->integrator);
    if (include_io) {
      io_seconds += std::chrono::duration<double>(std::chrono::steady_clock::now() - log_start).count();
    }
    double elapsed = io_seconds;
    DatasetTotals counts;
    for (std::size_t i = 0; i + 1 < data->frames.size(); ++i) {
      const PairResult r = run_pair(*data, log, i, i + 1, strategy, params);
      elapsed += r.elapsed;
      counts.comparisons += r.comparisons;
      counts.candidates_examined += r.candidates_examined;
      counts.matches += r.matches;
      if (r.false_matches) counts.false_matches = counts.false_matches.value_or(0) + *r.false_matches;
    }
    if (rep == 0) {
      totals.comparisons = counts.comparisons;
      totals.candidates_examined = counts.candidates_examined;
      totals.matches = counts.matches;
      totals.false_matches = counts.false_matches;
    }
    totals.elapsed.push_back(elapsed);
  }
  return totals;
}

inline double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

/// Derived columns from the printed (rounded) raw columns so they can be
/// recomputed from the report.
inline void fill_derived(BenchRow& row, const BenchRow& brute) {
  row.speedup = row.elapsed_ms > 0.0 ? round_to(brute.elapsed_ms / row.elapsed_ms, kRatioDecimals) : 0.0;
  row.comparison_reduction =
      row.comparisons > 0.0 ? round_to(brute.comparisons / row.comparisons, kRatioDecimals) : 0.0;
}

/// Appends one brute and one windowed row for a dataset.
inline void add_dataset_rows(BenchResult& result, const std::string& name, const DatasetTotals& brute,
                             const DatasetTotals& windowed) {
  BenchRow b, w;
  for (auto [row, totals, strategy] :
       {std::tuple{&b, &brute, Strategy::brute}, std::tuple{&w, &windowed, Strategy::windowed}}) {
    row->dataset = name;
    row->strategy = strategy;
    row->elapsed_ms = round_to(median(totals->elapsed) * 1e3, kElapsedDecimals);
    row->comparisons = static_cast<double>(totals->comparisons);
    row->candidates_examined = static_cast<double>(totals->candidates_examined);
    row->matches = static_cast<double>(totals->matches);
    if (totals->false_matches) row->false_matches = static_cast<double>(*totals->false_matches);
  }
  fill_derived(b, b);
  fill_derived(w, b);
  result.rows.push_back(b);
  result.rows.push_back(w);
}

/// Average rows: arithmetic mean of the printed dataset rows per strategy.
inline void add_average_rows(BenchResult& result) {
  BenchRow avg_b, avg_w;
  for (auto [avg, strategy] : {std::pair{&avg_b, Strategy::brute}, std::pair{&avg_w, Strategy::windowed}}) {
    avg->dataset = "Average";
    avg->strategy = strategy;
    std::size_t n = 0, with_truth = 0;
    double fm = 0.0;
    for (const auto& r : result.rows) {
      if (r.strategy != strategy || r.dataset == "Average") continue;
      ++n;
      avg->elapsed_ms += r.elapsed_ms;
      avg->comparisons += r.comparisons;
      avg->candidates_examined += r.candidates_examined;
      avg->matches += r.matches;
      if (r.false_matches) {
        ++with_truth;
        fm += *r.false_matches;
      }
    }
    if (n == 0) return;
    avg->elapsed_ms = round_to(avg->elapsed_ms / n, kElapsedDecimals);
    avg->comparisons = round_to(avg->comparisons / n, kCountDecimals);
    avg->candidates_examined = round_to(avg->candidates_examined / n, kCountDecimals);
    avg->matches = round_to(avg->matches / n, kCountDecimals);
    if (with_truth > 0) avg->false_matches = round_to(fm / with_truth, kCountDecimals);
  }
  fill_derived(avg_b, avg_b);
  fill_derived(avg_w, avg_b);
  result.rows.push_back(avg_b);
  result.rows.push_back(avg_w);
}

inline constexpr const char* kCsvHeader =
    "dataset,strategy,elapsed_ms,comparisons,candidates_examined,matches,false_matches,speedup,"
    "comparison_reduction";

inline std::string format_count(double v, bool average) {
  return average ? format_fixed(v, kCountDecimals) : format_fixed(v, 0);
}

inline std::string to_csv(const BenchResult& result) {
  std::ostringstream out;
  out << kCsvHeader << '\n';
  for (const auto& r : result.rows) {
    const bool avg = r.dataset == "Average";
    out << r.dataset << ',' << to_string(r.strategy) << ',' << format_fixed(r.elapsed_ms, kElapsedDecimals) << ','
        << format_count(r.comparisons, avg) << ',' << format_count(r.candidates_examined, avg) << ','
        << format_count(r.matches, avg) << ',' << (r.false_matches ? format_count(*r.false_matches, avg) : "")
        << ',' << format_fixed(r.speedup, kRatioDecimals) << ','
        << format_fixed(r.comparison_reduction, kRatioDecimals) << '\n';
  }
  return out.str();
}

inline std::string to_markdown(const BenchResult& result) {
  std::vector<std::string> datasets;
  std::map<std::pair<std::string, Strategy>, const BenchRow*> by_key;
  for (const auto& r : result.rows) {
    if (std::find(datasets.begin(), datasets.end(), r.dataset) == datasets.end()) datasets.push_back(r.dataset);
    by_key[{r.dataset, r.strategy}] = &r;
  }
  auto row_of = [&](const std::string& d, Strategy s) { return by_key.at({d, s}); };

  std::ostringstream out;
  out << "### Matching time (ms)\n\n| Dataset | Brute force | Windowed | Speedup | Comparisons (brute) | "
         "Comparisons (windowed) | Reduction |\n|---|---|---|---|---|---|---|\n";
  for (const auto& d : datasets) {
    const bool avg = d == "Average";
    const BenchRow* b = row_of(d, Strategy::brute);
    const BenchRow* w = row_of(d, Strategy::windowed);
    out << "| " << d << " | " << format_fixed(b->elapsed_ms, kElapsedDecimals) << " | "
        << format_fixed(w->elapsed_ms, kElapsedDecimals) << " | " << format_fixed(w->speedup, kRatioDecimals)
        << " | " << format_count(b->comparisons, avg) << " | " << format_count(w->comparisons, avg) << " | "
        << format_fixed(w->comparison_reduction, kRatioDecimals) << " |\n";
  }
  const bool any_truth = std::any_of(result.rows.begin(), result.rows.end(),
                                     [](const BenchRow& r) { return r.false_matches.has_value(); });
  if (any_truth) {
    out << "\n### Match statistics\n\n| Dataset | Total (brute) | False (brute) | Total (windowed) | False "
           "(windowed) |\n|---|---|---|---|---|\n";
    for (const auto& d : datasets) {
      const bool avg = d == "Average";
      const BenchRow* b = row_of(d, Strategy::brute);
      const BenchRow* w = row_of(d, Strategy::windowed);
      auto fm = [&](const BenchRow* r) { return r->false_matches ? format_count(*r->false_matches, avg) : "-"; };
      out << "| " << d << " | " << format_count(b->matches, avg) << " | " << fm(b) << " | "
          << format_count(w->matches, avg) << " | " << fm(w) << " |\n";
    }
  }
  return out.str();
}

}  // namespace guidedmatch::bench
