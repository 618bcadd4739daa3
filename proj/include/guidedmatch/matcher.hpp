#pragma once

#include <algorithm>
#include <bit>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <limits>
#include <optional>
#include <span>
#include <thread>
#include <vector>

#include "guidedmatch/errors.hpp"
#include "guidedmatch/features.hpp"
#include "guidedmatch/predictor.hpp"

namespace guidedmatch {

enum class Metric { hamming, euclidean };

struct MatchParams {
  double threshold = 10.0;  // window half-width, pixels
  Metric metric = Metric::hamming;
  double max_descriptor_distance = 64.0;
  std::optional<double> ratio;  // accept best only if best <= ratio * second best
  bool fallback_brute_force = false;
  int threads = 1;

  void validate() const {
    if (!(threshold > 0.0) || !std::isfinite(threshold)) {
      throw InvalidArgument("match threshold must be > 0");
    }
    if (!(max_descriptor_distance >= 0.0)) {
      throw InvalidArgument("max_descriptor_distance must be >= 0");
    }
    if (ratio && !(*ratio > 0.0 && *ratio <= 1.0)) {
      throw InvalidArgument("ratio must lie in (0, 1]");
    }
    if (threads < 1) throw InvalidArgument("threads must be >= 1");
  }
};

/// Default accept gate: a quarter of the bits for binary descriptors
/// (64 for 256-bit), 0.7 for unit-normalized real descriptors.
inline MatchParams default_params_for(const Descriptor& d) {
  MatchParams p;
  if (d.kind() == DescriptorKind::binary) {
    p.metric = Metric::hamming;
    p.max_descriptor_distance = static_cast<double>(d.length() * 8) / 4.0;
  } else {
    p.metric = Metric::euclidean;
    p.max_descriptor_distance = 0.7;
  }
  return p;
}

struct MatchPair {
  int source_id = 0;
  int target_id = 0;
  double descriptor_distance = 0.0;
  std::optional<std::pair<double, double>> predicted;

  bool operator==(const MatchPair&) const = default;
};

struct MatchReport {
  std::vector<MatchPair> pairs;
  std::uint64_t comparisons = 0;
  std::uint64_t candidates_examined = 0;
  double elapsed = 0.0;  // seconds
};

namespace detail {

inline double hamming(std::span<const std::uint8_t> a, std::span<const std::uint8_t> b) {
  std::uint64_t bits = 0;
  std::size_t i = 0;
  for (; i + 8 <= a.size(); i += 8) {
    std::uint64_t x, y;
    std::memcpy(&x, a.data() + i, 8);
    std::memcpy(&y, b.data() + i, 8);
    bits += static_cast<std::uint64_t>(std::popcount(x ^ y));
  }
  for (; i < a.size(); ++i) {
    bits += static_cast<std::uint64_t>(std::popcount(static_cast<unsigned>(a[i] ^ b[i])));
  }
  return static_cast<double>(bits);
}

inline double euclidean(std::span<const double> a, std::span<const double> b) {
  double sum = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    sum += d * d;
  }
  return std::sqrt(sum);
}

}  // namespace detail

/// Hamming (popcount of XOR) for binary, L2 for real descriptors.
inline double descriptor_distance(const Descriptor& a, const Descriptor& b, Metric metric) {
  if (!a.compatible_with(b)) {
    throw IncompatibleDescriptor("descriptors differ in kind or length");
  }
  if (metric == Metric::hamming) {
    if (a.kind() != DescriptorKind::binary) {
      throw IncompatibleDescriptor("hamming metric needs binary descriptors");
    }
    return detail::hamming(a.bytes(), b.bytes());
  }
  if (a.kind() != DescriptorKind::real) {
    throw IncompatibleDescriptor("euclidean metric needs real descriptors");
  }
  return detail::euclidean(a.values(), b.values());
}

/// Uniform grid over frame coordinates. Entries are kept sorted by
/// (row, column, index), so each cell and each row segment of a
/// neighborhood query is a contiguous range.
class GridIndex {
 public:
  struct Entry {
    long long cy;
    long long cx;
    std::uint32_t index;  // into frame.features
    auto operator<=>(const Entry&) const = default;
  };

  GridIndex() = default;

  GridIndex(const Frame& frame, double cell_size) : cell_size_(cell_size) {
    if (!(cell_size > 0.0) || !std::isfinite(cell_size)) {
      throw InvalidArgument("grid cell size must be > 0");
    }
    entries_.reserve(frame.features.size());
    for (std::size_t i = 0; i < frame.features.size(); ++i) {
      const auto [cx, cy] = cell_of(frame.features[i].u, frame.features[i].v);
      entries_.push_back({cy, cx, static_cast<std::uint32_t>(i)});
    }
    std::sort(entries_.begin(), entries_.end());
  }

  double cell_size() const { return cell_size_; }
  std::size_t size() const { return entries_.size(); }
  std::span<const Entry> entries() const { return entries_; }

  std::pair<long long, long long> cell_of(double u, double v) const {
    return {static_cast<long long>(std::floor(u / cell_size_)),
            static_cast<long long>(std::floor(v / cell_size_))};
  }

  /// Entries in cells (cx_lo..cx_hi, cy).
  std::span<const Entry> row_range(long long cy, long long cx_lo, long long cx_hi) const {
    const Entry lo{cy, cx_lo, 0};
    const Entry hi{cy, cx_hi, std::numeric_limits<std::uint32_t>::max()};
    const auto first = std::lower_bound(entries_.begin(), entries_.end(), lo);
    const auto last = std::upper_bound(first, entries_.end(), hi);
    return {first, last};
  }

  std::span<const Entry> cell(long long cx, long long cy) const { return row_range(cy, cx, cx); }

  /// Calls fn(index) for every feature in the 3x3 cell neighborhood of (u, v).
  template <typename Fn>
  void for_each_near(double u, double v, Fn&& fn) const {
    const auto [cx, cy] = cell_of(u, v);
    for (long long y = cy - 1; y <= cy + 1; ++y) {
      for (const Entry& e : row_range(y, cx - 1, cx + 1)) fn(e.index);
    }
  }

 private:
  double cell_size_ = 1.0;
  std::vector<Entry> entries_;
};

inline GridIndex build_grid(const Frame& frame, double cell_size) { return GridIndex(frame, cell_size); }

namespace detail {

inline void check_descriptors(const Frame& source, const Frame& target) {
  const Descriptor* ref = nullptr;
  for (const Frame* f : {&source, &target}) {
    for (const auto& p : f->features) {
      if (ref == nullptr) {
        ref = &p.descriptor;
      } else if (!ref->compatible_with(p.descriptor)) {
        throw IncompatibleDescriptor("frames do not share one descriptor kind and length");
      }
    }
  }
}

inline void check_metric(const Frame& source, const Frame& target, Metric metric) {
  const Frame& f = source.features.empty() ? target : source;
  if (f.features.empty()) return;
  const auto kind = f.features.front().descriptor.kind();
  if ((metric == Metric::hamming) != (kind == DescriptorKind::binary)) {
    throw IncompatibleDescriptor("metric does not suit the descriptor kind");
  }
}

/// Running best/second-best with the lower-target-id tie rule.
struct BestCandidate {
  double best = std::numeric_limits<double>::infinity();
  double second = std::numeric_limits<double>::infinity();
  int best_id = 0;
  bool any = false;

  void offer(double dist, int id) {
    if (!any || dist < best || (dist == best && id < best_id)) {
      if (any) second = best;
      best = dist;
      best_id = id;
      any = true;
    } else if (dist < second) {
      second = dist;
    }
  }

  bool accepted(const MatchParams& params) const {
    if (!any || best > params.max_descriptor_distance) return false;
    if (params.ratio && std::isfinite(second) && best > *params.ratio * second) return false;
    return true;
  }
};

struct SourceResult {
  std::optional<MatchPair> pair;
  std::uint64_t comparisons = 0;
  std::uint64_t examined = 0;
};

inline SourceResult match_against_all(const FeaturePoint& src, const Frame& target,
                                      const MatchParams& params) {
  SourceResult r;
  BestCandidate best;
  for (const auto& q : target.features) {
    ++r.examined;
    ++r.comparisons;
    best.offer(descriptor_distance(src.descriptor, q.descriptor, params.metric), q.id);
  }
  if (best.accepted(params)) r.pair = MatchPair{src.id, best.best_id, best.best, std::nullopt};
  return r;
}

/// Runs fn(i) -> SourceResult for i in [0, n), optionally over several
/// threads; results are merged in index order so output matches the
/// sequential run.
template <typename Fn>
void run_per_source(std::size_t n, int threads, MatchReport& report, Fn&& fn) {
  std::vector<SourceResult> results(n);
  const std::size_t workers = std::min<std::size_t>(static_cast<std::size_t>(std::max(threads, 1)), std::max<std::size_t>(n, 1));
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) results[i] = fn(i);
  } else {
    std::vector<std::jthread> pool;
    const std::size_t chunk = (n + workers - 1) / workers;
    for (std::size_t w = 0; w < workers; ++w) {
      const std::size_t lo = w * chunk, hi = std::min(n, lo + chunk);
      pool.emplace_back([&, lo, hi] {
        for (std::size_t i = lo; i < hi; ++i) results[i] = fn(i);
      });
    }
  }
  for (auto& r : results) {
    report.comparisons += r.comparisons;
    report.candidates_examined += r.examined;
    if (r.pair) report.pairs.push_back(*r.pair);
  }
}

}  // namespace detail

/// Matches each source feature only against target features strictly inside
/// the threshold window around its predicted position. Predictions must be
/// order-aligned with source.features.
inline MatchReport neighboring_match(const Frame& source, const Frame& target,
                                     std::span<const Prediction> predictions,
                                     const MatchParams& params) {
  params.validate();
  if (predictions.size() != source.features.size()) {
    throw AlignmentError("prediction count does not match source feature count");
  }
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    if (predictions[i].feature_id != source.features[i].id) {
      throw AlignmentError("prediction " + std::to_string(i) + " is for a different feature id");
    }
  }
  detail::check_descriptors(source, target);
  detail::check_metric(source, target, params.metric);

  MatchReport report;
  const auto start = std::chrono::steady_clock::now();
  const GridIndex grid(target, params.threshold);
  const double thr = params.threshold;

  detail::run_per_source(source.features.size(), params.threads, report, [&](std::size_t i) {
    const FeaturePoint& src = source.features[i];
    const Prediction& pred = predictions[i];
    if (!pred.usable()) {
      return params.fallback_brute_force ? detail::match_against_all(src, target, params)
                                         : detail::SourceResult{};
    }
    detail::SourceResult r;
    detail::BestCandidate best;
    grid.for_each_near(pred.u, pred.v, [&](std::uint32_t idx) {
      const FeaturePoint& q = target.features[idx];
      ++r.examined;
      if (pred.u - thr < q.u && q.u < pred.u + thr && pred.v - thr < q.v && q.v < pred.v + thr) {
        ++r.comparisons;
        best.offer(descriptor_distance(src.descriptor, q.descriptor, params.metric), q.id);
      }
    });
    if (best.accepted(params)) {
      r.pair = MatchPair{src.id, best.best_id, best.best, std::make_pair(pred.u, pred.v)};
    }
    return r;
  });

  report.elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return report;
}

/// Compares every source descriptor with every target descriptor (n*m).
inline MatchReport brute_force_match(const Frame& source, const Frame& target,
                                     const MatchParams& params) {
  params.validate();
  detail::check_descriptors(source, target);
  detail::check_metric(source, target, params.metric);

  MatchReport report;
  const auto start = std::chrono::steady_clock::now();
  detail::run_per_source(source.features.size(), params.threads, report, [&](std::size_t i) {
    return detail::match_against_all(source.features[i], target, params);
  });
  report.elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return report;
}

}  // namespace guidedmatch
