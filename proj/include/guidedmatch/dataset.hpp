#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <unordered_set>
#include <utility>
#include <vector>

#include "guidedmatch/errors.hpp"
#include "guidedmatch/features.hpp"
#include "guidedmatch/geometry.hpp"
#include "guidedmatch/imu_state.hpp"
#include "guidedmatch/synth.hpp"

// Text formats (TUM RGB-D style: whitespace separated, '#' comments):
//
//   imu file          timestamp ax ay az [gx gy gz]
//   groundtruth file  timestamp tx ty tz qx qy qz qw
//   features dir      one file per frame, named <timestamp>.txt, lines
//                     "id u v d <descriptor>" where the descriptor is one hex
//                     token (binary) or a list of reals
//   manifest          key=value lines; relative paths resolve against the
//                     manifest's directory
//   truth sidecar     "point id x y z" and
//                     "pose t tx ty tz r00 r01 r02 r10 r11 r12 r20 r21 r22 psi theta phi"
//
// Numbers are written with the shortest representation that round-trips.

namespace guidedmatch {

namespace fs = std::filesystem;

namespace detail {

inline std::vector<std::string_view> split_ws(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t' || line[i] == '\r')) ++i;
    const std::size_t start = i;
    while (i < line.size() && line[i] != ' ' && line[i] != '\t' && line[i] != '\r') ++i;
    if (i > start) out.push_back(line.substr(start, i - start));
  }
  return out;
}

inline bool is_skippable(std::string_view line) {
  const auto tokens = split_ws(line);
  return tokens.empty() || tokens.front().front() == '#';
}

inline std::optional<double> to_double(std::string_view s) {
  double v = 0.0;
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size() || !std::isfinite(v)) return std::nullopt;
  return v;
}

inline std::optional<int> to_int(std::string_view s) {
  int v = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size()) return std::nullopt;
  return v;
}

inline double parse_double(std::string_view tok, const std::string& file, std::size_t line) {
  const auto v = to_double(tok);
  if (!v) throw ParseError(file, line, "not a number: '" + std::string(tok) + "'");
  return *v;
}

inline std::ifstream open_in(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  return in;
}

inline std::ofstream open_out(const fs::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  return out;
}

inline bool is_hex(std::string_view s) {
  return std::all_of(s.begin(), s.end(), [](char c) {
    return (c >= '0' && c <= '9') || (c >= 'a' && c <= 'f') || (c >= 'A' && c <= 'F');
  });
}

inline int hex_value(char c) {
  if (c >= '0' && c <= '9') return c - '0';
  if (c >= 'a' && c <= 'f') return c - 'a' + 10;
  return c - 'A' + 10;
}

/// Standard (active) quaternion of a rotation matrix.
inline Quaternion active_quaternion(const RotationMatrix& r) {
  const auto& m = r.m;
  const double tr = m[0][0] + m[1][1] + m[2][2];
  Quaternion q;
  if (tr > 0.0) {
    const double s = std::sqrt(tr + 1.0) * 2.0;
    q = {0.25 * s, (m[2][1] - m[1][2]) / s, (m[0][2] - m[2][0]) / s, (m[1][0] - m[0][1]) / s};
  } else if (m[0][0] > m[1][1] && m[0][0] > m[2][2]) {
    const double s = std::sqrt(1.0 + m[0][0] - m[1][1] - m[2][2]) * 2.0;
    q = {(m[2][1] - m[1][2]) / s, 0.25 * s, (m[0][1] + m[1][0]) / s, (m[0][2] + m[2][0]) / s};
  } else if (m[1][1] > m[2][2]) {
    const double s = std::sqrt(1.0 + m[1][1] - m[0][0] - m[2][2]) * 2.0;
    q = {(m[0][2] - m[2][0]) / s, (m[0][1] + m[1][0]) / s, 0.25 * s, (m[1][2] + m[2][1]) / s};
  } else {
    const double s = std::sqrt(1.0 + m[2][2] - m[0][0] - m[1][1]) * 2.0;
    q = {(m[1][0] - m[0][1]) / s, (m[0][2] + m[2][0]) / s, (m[1][2] + m[2][1]) / s, 0.25 * s};
  }
  return q.normalized();
}

}  // namespace detail

/// Shortest decimal text that parses back to exactly v; locale independent.
inline std::string format_double(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::fixed);
  if (ec != std::errc{}) {
    const auto r = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, r.ptr);
  }
  return std::string(buf, ptr);
}

/// Fixed-point text with `decimals` digits after the point.
inline std::string format_fixed(double v, int decimals) {
  char buf[512];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::fixed, decimals);
  if (ec != std::errc{}) return v < 0 ? "-inf" : "inf";
  return std::string(buf, ptr);
}

// ---------------------------------------------------------------- IMU

/// Samples sorted by time; a repeated timestamp keeps the later line.
/// Lines with only accelerometer columns get zero gyro and one warning.
inline std::vector<ImuSample> load_imu(const fs::path& path, std::vector<std::string>* warnings = nullptr) {
  auto in = detail::open_in(path);
  const std::string name = path.string();
  std::vector<std::pair<ImuSample, std::size_t>> rows;  // sample, line order
  std::size_t missing_gyro = 0;
  std::string line;
  for (std::size_t lineno = 1; std::getline(in, line); ++lineno) {
    if (detail::is_skippable(line)) continue;
    const auto tok = detail::split_ws(line);
    if (tok.size() != 4 && tok.size() != 7) {
      throw ParseError(name, lineno, "expected 'timestamp ax ay az [gx gy gz]'");
    }
    ImuSample s;
    s.t = detail::parse_double(tok[0], name, lineno);
    s.accel = {detail::parse_double(tok[1], name, lineno), detail::parse_double(tok[2], name, lineno),
               detail::parse_double(tok[3], name, lineno)};
    if (tok.size() == 7) {
      s.omega = {detail::parse_double(tok[4], name, lineno), detail::parse_double(tok[5], name, lineno),
                 detail::parse_double(tok[6], name, lineno)};
    } else {
      ++missing_gyro;
    }
    rows.emplace_back(s, rows.size());
  }
  if (rows.empty()) throw EmptyDataset(name + ": no IMU samples");
  if (missing_gyro > 0 && warnings != nullptr) {
    warnings->push_back(name + ": " + std::to_string(missing_gyro) +
                        " line(s) without gyro columns, angular rate set to zero");
  }

  std::stable_sort(rows.begin(), rows.end(),
                   [](const auto& a, const auto& b) { return a.first.t < b.first.t; });
  std::vector<ImuSample> out;
  out.reserve(rows.size());
  for (const auto& [s, order] : rows) {
    if (!out.empty() && out.back().t == s.t) {
      out.back() = s;  // later line wins (stable sort keeps file order)
    } else {
      out.push_back(s);
    }
  }
  return out;
}

inline void write_imu(const fs::path& path, std::span<const ImuSample> samples) {
  auto out = detail::open_out(path);
  out << "# timestamp ax ay az gx gy gz\n";
  for (const auto& s : samples) {
    out << format_double(s.t) << ' ' << format_double(s.accel.x) << ' ' << format_double(s.accel.y) << ' '
        << format_double(s.accel.z) << ' ' << format_double(s.omega.x) << ' ' << format_double(s.omega.y)
        << ' ' << format_double(s.omega.z) << '\n';
  }
  if (!out) throw IoError("failed writing " + path.string());
}

// ---------------------------------------------------------------- features

/// Parses one feature file. Descriptor kind and length come from the first
/// line and are enforced on the rest.
inline Frame load_feature_file(const fs::path& path, double timestamp, int width = 640, int height = 480) {
  auto in = detail::open_in(path);
  const std::string name = path.string();
  Frame frame;
  frame.timestamp = timestamp;
  frame.width = width;
  frame.height = height;
  std::unordered_set<int> ids;
  std::string line;
  for (std::size_t lineno = 1; std::getline(in, line); ++lineno) {
    if (detail::is_skippable(line)) continue;
    const auto tok = detail::split_ws(line);
    if (tok.size() < 5) throw ParseError(name, lineno, "expected 'id u v d <descriptor>'");
    FeaturePoint p;
    const auto id = detail::to_int(tok[0]);
    if (!id) throw ParseError(name, lineno, "bad feature id '" + std::string(tok[0]) + "'");
    p.id = *id;
    if (!ids.insert(p.id).second) throw ParseError(name, lineno, "duplicate feature id");
    p.u = detail::parse_double(tok[1], name, lineno);
    p.v = detail::parse_double(tok[2], name, lineno);
    p.d = detail::parse_double(tok[3], name, lineno);
    if (p.d < 0.0) throw ParseError(name, lineno, "negative depth");

    const bool binary = tok.size() == 5 && tok[4].size() % 2 == 0 && detail::is_hex(tok[4]);
    if (binary) {
      std::vector<std::uint8_t> bytes(tok[4].size() / 2);
      for (std::size_t i = 0; i < bytes.size(); ++i) {
        bytes[i] = static_cast<std::uint8_t>(detail::hex_value(tok[4][2 * i]) * 16 +
                                             detail::hex_value(tok[4][2 * i + 1]));
      }
      p.descriptor = Descriptor::binary(std::move(bytes));
    } else {
      std::vector<double> values;
      for (std::size_t i = 4; i < tok.size(); ++i) values.push_back(detail::parse_double(tok[i], name, lineno));
      p.descriptor = Descriptor::real(std::move(values));
    }
    if (!frame.features.empty() && !frame.features.front().descriptor.compatible_with(p.descriptor)) {
      throw ParseError(name, lineno, "descriptor kind or length differs from the first line");
    }
    frame.features.push_back(std::move(p));
  }
  return frame;
}

/// Feature files in a directory as (timestamp, path), sorted by timestamp.
inline std::vector<std::pair<double, fs::path>> list_feature_files(const fs::path& dir) {
  std::error_code ec;
  if (!fs::is_directory(dir, ec)) throw IoError("not a directory: " + dir.string());
  std::vector<std::pair<double, fs::path>> out;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (!entry.is_regular_file() || entry.path().extension() != ".txt") continue;
    if (const auto t = detail::to_double(entry.path().stem().string())) out.emplace_back(*t, entry.path());
  }
  std::sort(out.begin(), out.end());
  return out;
}

/// Loads the feature file whose timestamp is nearest to frame_timestamp,
/// provided it lies within tolerance.
inline Frame load_features(const fs::path& dir, double frame_timestamp, double tolerance = 0.02,
                           int width = 640, int height = 480) {
  const auto files = list_feature_files(dir);
  const std::pair<double, fs::path>* best = nullptr;
  for (const auto& f : files) {
    if (best == nullptr || std::abs(f.first - frame_timestamp) < std::abs(best->first - frame_timestamp)) {
      best = &f;
    }
  }
  if (best == nullptr || std::abs(best->first - frame_timestamp) > tolerance) {
    throw AssociationError("no feature file within " + format_double(tolerance) + " s of t=" +
                           format_double(frame_timestamp) + " in " + dir.string());
  }
  return load_feature_file(best->second, best->first, width, height);
}

inline std::string descriptor_text(const Descriptor& d) {
  std::string s;
  if (d.kind() == DescriptorKind::binary) {
    static constexpr char kHex[] = "0123456789abcdef";
    for (std::uint8_t b : d.bytes()) {
      s += kHex[b >> 4];
      s += kHex[b & 15];
    }
  } else {
    for (std::size_t i = 0; i < d.values().size(); ++i) {
      if (i) s += ' ';
      s += format_double(d.values()[i]);
    }
  }
  return s;
}

inline fs::path feature_file_name(double timestamp) { return format_double(timestamp) + ".txt"; }

inline void write_feature_file(const fs::path& path, const Frame& frame) {
  auto out = detail::open_out(path);
  out << "# id u v d descriptor\n";
  for (const auto& p : frame.features) {
    out << p.id << ' ' << format_double(p.u) << ' ' << format_double(p.v) << ' ' << format_double(p.d) << ' '
        << descriptor_text(p.descriptor) << '\n';
  }
  if (!out) throw IoError("failed writing " + path.string());
}

// ---------------------------------------------------------------- groundtruth

struct PoseRecord {
  double t = 0.0;
  Vec3 translation;
  Quaternion orientation;  // camera-to-world, active convention
};

/// Poses sorted by time, quaternions renormalized.
inline std::vector<PoseRecord> load_groundtruth(const fs::path& path) {
  auto in = detail::open_in(path);
  const std::string name = path.string();
  std::vector<PoseRecord> out;
  std::string line;
  for (std::size_t lineno = 1; std::getline(in, line); ++lineno) {
    if (detail::is_skippable(line)) continue;
    const auto tok = detail::split_ws(line);
    if (tok.size() != 8) throw ParseError(name, lineno, "expected 'timestamp tx ty tz qx qy qz qw'");
    double v[8];
    for (int i = 0; i < 8; ++i) v[i] = detail::parse_double(tok[i], name, lineno);
    PoseRecord r{v[0], {v[1], v[2], v[3]}, {v[7], v[4], v[5], v[6]}};
    try {
      r.orientation = r.orientation.normalized();
    } catch (const InvalidArgument&) {
      throw ParseError(name, lineno, "zero quaternion");
    }
    out.push_back(r);
  }
  std::stable_sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.t < b.t; });
  return out;
}

inline void write_groundtruth(const fs::path& path, std::span<const CameraPose> poses) {
  auto out = detail::open_out(path);
  out << "# timestamp tx ty tz qx qy qz qw\n";
  for (const auto& p : poses) {
    const Quaternion q = detail::active_quaternion(p.orientation);
    out << format_double(p.t) << ' ' << format_double(p.position.x) << ' ' << format_double(p.position.y) << ' '
        << format_double(p.position.z) << ' ' << format_double(q.x) << ' ' << format_double(q.y) << ' '
        << format_double(q.z) << ' ' << format_double(q.w) << '\n';
  }
  if (!out) throw IoError("failed writing " + path.string());
}

// ---------------------------------------------------------------- truth sidecar

inline void write_truth(const fs::path& path, const GroundTruth& truth) {
  auto out = detail::open_out(path);
  out << "# point id x y z\n# pose t tx ty tz r00 r01 r02 r10 r11 r12 r20 r21 r22 psi theta phi\n";
  for (std::size_t i = 0; i < truth.points.size(); ++i) {
    const Vec3& p = truth.points[i];
    out << "point " << i << ' ' << format_double(p.x) << ' ' << format_double(p.y) << ' ' << format_double(p.z)
        << '\n';
  }
  for (const auto& p : truth.poses) {
    out << "pose " << format_double(p.t) << ' ' << format_double(p.position.x) << ' '
        << format_double(p.position.y) << ' ' << format_double(p.position.z);
    for (const auto& row : p.orientation.m) {
      for (double x : row) out << ' ' << format_double(x);
    }
    out << ' ' << format_double(p.angles.psi) << ' ' << format_double(p.angles.theta) << ' '
        << format_double(p.angles.phi) << '\n';
  }
  if (!out) throw IoError("failed writing " + path.string());
}

inline GroundTruth load_truth(const fs::path& path, const CameraIntrinsics& k, int width, int height) {
  auto in = detail::open_in(path);
  const std::string name = path.string();
  GroundTruth truth;
  truth.intrinsics = k;
  truth.width = width;
  truth.height = height;
  std::string line;
  for (std::size_t lineno = 1; std::getline(in, line); ++lineno) {
    if (detail::is_skippable(line)) continue;
    const auto tok = detail::split_ws(line);
    if (tok[0] == "point" && tok.size() == 5) {
      const auto id = detail::to_int(tok[1]);
      if (!id || *id != static_cast<int>(truth.points.size())) {
        throw ParseError(name, lineno, "point ids must be consecutive from 0");
      }
      truth.points.push_back({detail::parse_double(tok[2], name, lineno), detail::parse_double(tok[3], name, lineno),
                              detail::parse_double(tok[4], name, lineno)});
    } else if (tok[0] == "pose" && tok.size() == 17) {
      double v[16];
      for (int i = 0; i < 16; ++i) v[i] = detail::parse_double(tok[i + 1], name, lineno);
      CameraPose p;
      p.t = v[0];
      p.position = {v[1], v[2], v[3]};
      for (int r = 0; r < 3; ++r) {
        for (int c = 0; c < 3; ++c) p.orientation.m[r][c] = v[4 + 3 * r + c];
      }
      p.angles = {v[13], v[14], v[15]};
      truth.poses.push_back(p);
    } else {
      throw ParseError(name, lineno, "expected a 'point' or 'pose' record");
    }
  }
  return truth;
}

// ---------------------------------------------------------------- manifest

struct DatasetManifest {
  fs::path root;  // directory containing the manifest
  std::string name;
  fs::path imu_file;
  std::optional<fs::path> groundtruth_file;
  fs::path features_dir;
  std::optional<fs::path> truth_file;
  CameraIntrinsics intrinsics;
  double tolerance = 0.02;
  double start_time = 0.0;
  int width = 640;
  int height = 480;
};

inline DatasetManifest load_manifest(const fs::path& path) {
  auto in = detail::open_in(path);
  const std::string name = path.string();
  DatasetManifest m;
  m.root = path.parent_path();
  m.name = path.parent_path().filename().string();
  std::map<std::string, std::string> kv;
  std::string line;
  for (std::size_t lineno = 1; std::getline(in, line); ++lineno) {
    if (detail::is_skippable(line)) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ParseError(name, lineno, "expected key=value");
    auto trim = [](std::string s) {
      const auto b = s.find_first_not_of(" \t\r");
      const auto e = s.find_last_not_of(" \t\r");
      return b == std::string::npos ? std::string{} : s.substr(b, e - b + 1);
    };
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    static const char* kKeys[] = {"name", "imu", "groundtruth", "features_dir", "truth", "fx", "fy", "cx",
                                  "cy",   "s",   "tolerance",   "start_time",   "width", "height"};
    if (std::find_if(std::begin(kKeys), std::end(kKeys), [&](const char* k) { return key == k; }) ==
        std::end(kKeys)) {
      throw ParseError(name, lineno, "unknown key '" + key + "'");
    }
    auto number = [&] { return detail::parse_double(value, name, lineno); };
    if (key == "fx") m.intrinsics.fx = number();
    else if (key == "fy") m.intrinsics.fy = number();
    else if (key == "cx") m.intrinsics.cx = number();
    else if (key == "cy") m.intrinsics.cy = number();
    else if (key == "s") m.intrinsics.s = number();
    else if (key == "tolerance") m.tolerance = number();
    else if (key == "start_time") m.start_time = number();
    else if (key == "width") m.width = static_cast<int>(number());
    else if (key == "height") m.height = static_cast<int>(number());
    kv[key] = value;
  }
  auto resolve = [&](const std::string& p) { return fs::path(p).is_absolute() ? fs::path(p) : m.root / p; };
  if (!kv.count("imu") || !kv.count("features_dir")) {
    throw ParseError(name, 0, "manifest needs at least imu and features_dir");
  }
  m.imu_file = resolve(kv["imu"]);
  m.features_dir = resolve(kv["features_dir"]);
  if (kv.count("groundtruth")) m.groundtruth_file = resolve(kv["groundtruth"]);
  if (kv.count("truth")) m.truth_file = resolve(kv["truth"]);
  if (kv.count("name")) m.name = kv["name"];
  m.intrinsics.validate();
  for (const auto& f : {m.imu_file, m.features_dir}) {
    if (!fs::exists(f)) throw IoError("manifest references missing path " + f.string());
  }
  return m;
}

/// Writes a scene as imu.txt, groundtruth.txt, truth.txt, features/ and
/// manifest.txt under dir; returns the manifest path.
inline fs::path write_scene(const Scene& scene, const fs::path& dir, const std::string& name) {
  std::error_code ec;
  fs::create_directories(dir / "features", ec);
  if (ec) throw IoError("cannot create " + (dir / "features").string() + ": " + ec.message());
  write_imu(dir / "imu.txt", scene.imu);
  write_groundtruth(dir / "groundtruth.txt", scene.truth.poses);
  write_truth(dir / "truth.txt", scene.truth);
  for (const auto& f : scene.frames) write_feature_file(dir / "features" / feature_file_name(f.timestamp), f);

  const fs::path manifest = dir / "manifest.txt";
  auto out = detail::open_out(manifest);
  const auto& k = scene.truth.intrinsics;
  out << "name=" << name << "\nimu=imu.txt\ngroundtruth=groundtruth.txt\ntruth=truth.txt\nfeatures_dir=features\n"
      << "fx=" << format_double(k.fx) << "\nfy=" << format_double(k.fy) << "\ncx=" << format_double(k.cx)
      << "\ncy=" << format_double(k.cy) << "\ns=" << format_double(k.s) << "\ntolerance=0.02\nstart_time=0\n"
      << "width=" << scene.truth.width << "\nheight=" << scene.truth.height << '\n';
  if (!out) throw IoError("failed writing " + manifest.string());
  return manifest;
}

}  // namespace guidedmatch
