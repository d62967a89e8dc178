#pragma once

#include <cstddef>
#include <vector>

#include "evalign/events.hpp"

namespace evalign {

/// Dense B x H x W accumulation of event polarity over temporal bins.
struct VoxelGrid {
  int bins = 0;
  int height = 0;
  int width = 0;
  std::vector<double> data;  // bins * height * width, bin-major row-major
  std::uint64_t window_start = 0;
  std::uint64_t window_end = 0;

  double& at(int b, int y, int x) {
    return data[(static_cast<std::size_t>(b) * height + y) * width + x];
  }
  double at(int b, int y, int x) const {
    return data[(static_cast<std::size_t>(b) * height + y) * width + x];
  }
  double sum() const;
};

/// Distributes each event's polarity over the two nearest temporal bins with
/// triangular weights max(0, 1 - |b - t*(B-1)|). Deposits run left to right
/// in event order. An empty stream yields an all-zero grid.
VoxelGrid voxelize(const EventStream& stream, int bins);

}  // namespace evalign
