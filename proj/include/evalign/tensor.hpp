#pragma once

#include <cstddef>
#include <map>
#include <string>
#include <vector>

#include "evalign/errors.hpp"

namespace evalign {

/// Generic dense tensor (row-major); payloads are stored on disk as f32.
struct Tensor {
  std::vector<std::size_t> shape;
  std::vector<double> data;

  static Tensor zeros(std::vector<std::size_t> shape);

  std::size_t size() const;
  std::size_t dim(std::size_t i) const { return shape.at(i); }
};

/// Named tensors, ordered by name so writes are deterministic.
using TensorMap = std::map<std::string, Tensor>;

/// ".tsr": one JSON manifest line
///   {"format":"tsr1","tensors":[{"name":..,"shape":[..],"dtype":"f32","offset":N},..]}
/// followed by the concatenated little-endian f32 payload; offsets are bytes
/// from the start of the payload.
void write_tsr(const TensorMap& tensors, const std::string& path);
TensorMap read_tsr(const std::string& path);

/// C x H x W feature map (single batch).
struct FeatureMap {
  int channels = 0;
  int height = 0;
  int width = 0;
  std::vector<double> data;

  FeatureMap() = default;
  FeatureMap(int c, int h, int w)
      : channels(c), height(h), width(w),
        data(static_cast<std::size_t>(c) * h * w, 0.0) {}

  double& at(int c, int y, int x) {
    return data[(static_cast<std::size_t>(c) * height + y) * width + x];
  }
  double at(int c, int y, int x) const {
    return data[(static_cast<std::size_t>(c) * height + y) * width + x];
  }
  bool same_shape(const FeatureMap& o) const {
    return channels == o.channels && height == o.height && width == o.width;
  }
  void require_finite(const char* what) const;
};

}  // namespace evalign
