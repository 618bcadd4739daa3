#pragma once

#include <cstdint>
#include <string>
#include <unordered_set>
#include <utility>
#include <variant>
#include <vector>

#include "guidedmatch/errors.hpp"

namespace guidedmatch {

enum class DescriptorKind { binary, real };

/// Fixed-length descriptor: packed bytes (binary) or a real vector.
class Descriptor {
 public:
  Descriptor() = default;
  static Descriptor binary(std::vector<std::uint8_t> bytes) { return Descriptor(std::move(bytes)); }
  static Descriptor real(std::vector<double> values) { return Descriptor(std::move(values)); }

  DescriptorKind kind() const {
    return std::holds_alternative<std::vector<std::uint8_t>>(data_) ? DescriptorKind::binary
                                                                   : DescriptorKind::real;
  }
  std::size_t length() const {
    return std::visit([](const auto& v) { return v.size(); }, data_);
  }
  const std::vector<std::uint8_t>& bytes() const { return std::get<std::vector<std::uint8_t>>(data_); }
  const std::vector<double>& values() const { return std::get<std::vector<double>>(data_); }

  bool compatible_with(const Descriptor& o) const {
    return kind() == o.kind() && length() == o.length();
  }

  bool operator==(const Descriptor&) const = default;

 private:
  explicit Descriptor(std::vector<std::uint8_t> b) : data_(std::move(b)) {}
  explicit Descriptor(std::vector<double> r) : data_(std::move(r)) {}

  std::variant<std::vector<std::uint8_t>, std::vector<double>> data_;
};

struct FeaturePoint {
  int id = 0;
  double u = 0.0;
  double v = 0.0;
  double d = 0.0;  // depth units; 0 = no depth
  Descriptor descriptor;
};

struct Frame {
  double timestamp = 0.0;
  int width = 640;
  int height = 480;
  std::vector<FeaturePoint> features;

  bool in_bounds(double u, double v) const {
    return u >= 0.0 && v >= 0.0 && u < static_cast<double>(width) && v < static_cast<double>(height);
  }
};

/// Throws InvalidArgument on duplicate ids, IncompatibleDescriptor when
/// descriptors differ in kind or length.
inline void validate_frame(const Frame& f) {
  std::unordered_set<int> ids;
  ids.reserve(f.features.size());
  for (const auto& p : f.features) {
    if (!ids.insert(p.id).second) {
      throw InvalidArgument("frame has duplicate feature id " + std::to_string(p.id));
    }
    if (!f.features.front().descriptor.compatible_with(p.descriptor)) {
      throw IncompatibleDescriptor("frame mixes descriptor kinds or lengths (feature id " +
                                   std::to_string(p.id) + ")");
    }
  }
}

}  // namespace guidedmatch
