#include <gtest/gtest.h>

#include <sys/wait.h>

#include <array>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "guidedmatch/bench.hpp"

namespace gm = guidedmatch;
namespace bench = guidedmatch::bench;
namespace fs = std::filesystem;

namespace {

struct RunResult {
  int status = -1;
  std::string out;
};

RunResult run_cli(const std::string& args) {
  const std::string cmd = std::string("\"") + GUIDEDMATCH_CLI_PATH + "\" " + args + " 2>/dev/null";
  RunResult r;
  FILE* pipe = popen(cmd.c_str(), "r");
  if (pipe == nullptr) return r;
  std::array<char, 4096> buf{};
  while (const std::size_t n = std::fread(buf.data(), 1, buf.size(), pipe)) r.out.append(buf.data(), n);
  const int raw = pclose(pipe);
  r.status = WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
  return r;
}

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::path(GUIDEDMATCH_TEST_TMP) / "bench" / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::vector<std::vector<std::string>> parse_csv(const std::string& text) {
  std::vector<std::vector<std::string>> rows;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    std::vector<std::string> cells;
    std::string cell;
    std::istringstream ls(line);
    while (std::getline(ls, cell, ',')) cells.push_back(cell);
    if (!line.empty() && line.back() == ',') cells.emplace_back();
    rows.push_back(std::move(cells));
  }
  return rows;
}

/// Drops the timing columns (elapsed_ms and speedup).
std::string without_timing(const std::string& csv) {
  std::string out;
  for (auto row : parse_csv(csv)) {
    if (row.size() == 9) {
      row.erase(row.begin() + 7);
      row.erase(row.begin() + 2);
    }
    for (const auto& c : row) out += c + ",";
    out += "\n";
  }
  return out;
}

bench::DatasetTotals totals(std::vector<double> elapsed, std::uint64_t comparisons, std::size_t matches,
                            std::optional<std::size_t> false_matches) {
  bench::DatasetTotals t;
  t.elapsed = std::move(elapsed);
  t.comparisons = comparisons;
  t.candidates_examined = comparisons;
  t.matches = matches;
  t.false_matches = false_matches;
  return t;
}

}  // namespace

TEST(BenchReport, RowsAveragesAndDerivedColumns) {
  bench::BenchResult result;
  bench::add_dataset_rows(result, "a", totals({0.004, 0.002, 0.003}, 1000, 90, 3),
                          totals({0.001, 0.0011, 0.0009}, 100, 88, 0));
  bench::add_dataset_rows(result, "b", totals({0.006, 0.006, 0.006}, 3000, 50, std::nullopt),
                          totals({0.002, 0.002, 0.002}, 200, 49, std::nullopt));
  bench::add_average_rows(result);
  ASSERT_EQ(result.rows.size(), 6u);

  const auto& ab = result.rows[0];
  const auto& aw = result.rows[1];
  EXPECT_EQ(ab.strategy, bench::Strategy::brute);
  EXPECT_DOUBLE_EQ(ab.elapsed_ms, 3.0);  // median of 2, 3, 4 ms
  EXPECT_DOUBLE_EQ(aw.elapsed_ms, 1.0);
  EXPECT_DOUBLE_EQ(aw.speedup, 3.0);
  EXPECT_DOUBLE_EQ(aw.comparison_reduction, 10.0);
  EXPECT_DOUBLE_EQ(ab.speedup, 1.0);

  const auto& avg_b = result.rows[4];
  const auto& avg_w = result.rows[5];
  EXPECT_EQ(avg_b.dataset, "Average");
  EXPECT_DOUBLE_EQ(avg_b.elapsed_ms, 4.5);
  EXPECT_DOUBLE_EQ(avg_b.comparisons, 2000.0);
  EXPECT_DOUBLE_EQ(avg_w.comparisons, 150.0);
  EXPECT_DOUBLE_EQ(avg_w.matches, 68.5);
  ASSERT_TRUE(avg_b.false_matches);
  EXPECT_DOUBLE_EQ(*avg_b.false_matches, 3.0);  // only datasets with truth count
  EXPECT_DOUBLE_EQ(avg_w.speedup, 3.0);
  EXPECT_DOUBLE_EQ(avg_w.comparison_reduction, 13.333);

  const auto csv = parse_csv(bench::to_csv(result));
  ASSERT_EQ(csv.size(), 7u);
  EXPECT_EQ(csv[0].size(), 9u);
  for (std::size_t i = 1; i < csv.size(); ++i) {
    ASSERT_EQ(csv[i].size(), 9u) << i;
    // Derived columns follow from the printed raw columns.
    const auto& brute_row = csv[i % 2 == 1 ? i : i - 1];
    const double speedup = std::stod(brute_row[2]) / std::stod(csv[i][2]);
    const double reduction = std::stod(brute_row[3]) / std::stod(csv[i][3]);
    EXPECT_NEAR(std::stod(csv[i][7]), speedup, 0.0005 + 1e-12) << i;
    EXPECT_NEAR(std::stod(csv[i][8]), reduction, 0.0005 + 1e-12) << i;
  }
  EXPECT_EQ(csv[3][6], "");  // no truth for dataset b
  EXPECT_EQ(csv[6][3], "150.000");

  const auto md = bench::to_markdown(result);
  EXPECT_NE(md.find("| Average |"), std::string::npos);
  EXPECT_NE(md.find("Match statistics"), std::string::npos);
}

TEST(BenchReport, MedianAndRounding) {
  EXPECT_EQ(bench::median({3, 1, 2}), 2.0);
  EXPECT_EQ(bench::median({4, 1, 2, 3}), 2.5);
  EXPECT_EQ(bench::round_to(1.23456, 3), 1.235);
}

TEST(BenchRun, PresetDatasetCountsAndTruth) {
  const auto cfg = *bench::preset_config("front1m", 1);
  const auto d = bench::dataset_from_scene(gm::generate_scene(cfg), cfg, "front1m");
  const auto params = bench::resolve_params(d, {});
  const auto brute = bench::run_dataset(d, bench::Strategy::brute, params, 3, false);
  const auto windowed = bench::run_dataset(d, bench::Strategy::windowed, params, 3, false);
  EXPECT_EQ(brute.elapsed.size(), 3u);
  EXPECT_LT(windowed.comparisons * 10, brute.comparisons);
  ASSERT_TRUE(windowed.false_matches);
  EXPECT_EQ(*windowed.false_matches, 0u);
  EXPECT_GT(windowed.matches, 0u);
  EXPECT_FALSE(bench::preset_config("sideways", 1));
}

TEST(Cli, UsageErrors) {
  EXPECT_EQ(run_cli("").status, 2);
  EXPECT_EQ(run_cli("synth --preset nowhere --out " + scratch("bad").string()).status, 2);
  EXPECT_EQ(run_cli("bench").status, 2);
  EXPECT_EQ(run_cli("bench --preset initial --reps 1").status, 2);
  EXPECT_EQ(run_cli("--help").status, 0);
}

TEST(Cli, SynthThenMatch) {
  const auto dir = scratch("front");
  const auto synth = run_cli("synth --preset front1m --seed 2 --out " + dir.string());
  ASSERT_EQ(synth.status, 0);
  const fs::path manifest = dir / "manifest.txt";
  EXPECT_TRUE(fs::exists(manifest));
  EXPECT_NE(synth.out.find("manifest.txt"), std::string::npos);

  const auto m = run_cli("match --manifest " + manifest.string() + " --pair 3:4");
  ASSERT_EQ(m.status, 0);
  const auto rows = parse_csv(m.out);
  ASSERT_EQ(rows.size(), 2u);
  EXPECT_EQ(rows[0][0], "dataset");
  EXPECT_EQ(rows[1][0], "front1m");
  EXPECT_EQ(rows[1][1], "windowed");
  EXPECT_EQ(rows[1][5], "0");

  EXPECT_EQ(run_cli("match --manifest " + manifest.string() + " --strategy brute --threshold 5").status, 2);
  EXPECT_EQ(run_cli("match --manifest " + manifest.string() + " --strategy brute --fallback-brute").status, 2);
  EXPECT_EQ(run_cli("match --manifest " + manifest.string() + " --pair 3").status, 2);
  EXPECT_EQ(run_cli("match --manifest " + manifest.string() + " --pair 0:999").status, 1);
  EXPECT_EQ(run_cli("match --manifest " + (dir / "missing.txt").string()).status, 1);
}

TEST(Cli, BruteComparisonsAreProductOfFeatureCounts) {
  const auto dir = scratch("small");
  fs::create_directories(dir / "features");
  std::ofstream(dir / "imu.txt") << "0.05 0 0 0 0 0 0\n0.1 0 0 0 0 0 0\n";
  std::ofstream(dir / "features" / "0.txt") << "0 10 10 5000 00\n1 20 20 5000 0f\n2 30 30 5000 ff\n";
  std::ofstream(dir / "features" / "0.1.txt")
      << "0 10 10 5000 00\n1 20 20 5000 0f\n2 30 30 5000 ff\n3 300 300 5000 f0\n";
  std::ofstream(dir / "manifest.txt") << "imu=imu.txt\nfeatures_dir=features\n";

  const auto r = run_cli("match --manifest " + (dir / "manifest.txt").string() + " --strategy brute");
  ASSERT_EQ(r.status, 0);
  const auto rows = parse_csv(r.out);
  ASSERT_EQ(rows.size(), 2u);
  EXPECT_EQ(rows[1][3], "12");
  EXPECT_EQ(rows[1][4], "3");
  EXPECT_EQ(rows[1][5], "");

  const auto w = run_cli("match --manifest " + (dir / "manifest.txt").string());
  ASSERT_EQ(w.status, 0);
  EXPECT_EQ(parse_csv(w.out)[1][3], "3");
}

TEST(Cli, BenchIsDeterministic) {
  const std::string args = "bench --preset initial --preset left30 --seed 4 --reps 3";
  const auto a = run_cli(args);
  const auto b = run_cli(args);
  ASSERT_EQ(a.status, 0);
  ASSERT_EQ(b.status, 0);
  const auto rows = parse_csv(a.out);
  ASSERT_EQ(rows.size(), 7u);
  EXPECT_EQ(rows[0][0], "dataset");
  EXPECT_EQ(rows[5][0], "Average");
  EXPECT_EQ(without_timing(a.out), without_timing(b.out));

  const auto md = run_cli(args + " --format md");
  ASSERT_EQ(md.status, 0);
  EXPECT_NE(md.out.find("| left30 |"), std::string::npos);
}

TEST(Cli, BenchSkipsBrokenDatasets) {
  const auto dir = scratch("broken");
  std::ofstream(dir / "manifest.txt") << "imu=imu.txt\nfeatures_dir=features\n";
  const auto partial = run_cli("bench --preset initial --manifest " + (dir / "manifest.txt").string());
  EXPECT_EQ(partial.status, 0);
  EXPECT_EQ(parse_csv(partial.out).size(), 5u);
  EXPECT_EQ(run_cli("bench --manifest " + (dir / "manifest.txt").string()).status, 1);
}
