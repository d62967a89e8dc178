#include "evalign/voxel.hpp"

#include <cmath>

namespace evalign {

double VoxelGrid::sum() const {
  double s = 0.0;
  for (double v : data) s += v;
  return s;
}

VoxelGrid voxelize(const EventStream& stream, int bins) {
  if (bins < 1) {
    throw ValidationError("voxelize: bin count must be >= 1");
  }
  validate(stream);

  VoxelGrid grid;
  grid.bins = bins;
  grid.height = stream.height;
  grid.width = stream.width;
  grid.window_start = stream.window_start;
  grid.window_end = stream.window_end;
  grid.data.assign(static_cast<std::size_t>(bins) * stream.height *
                       stream.width, 0.0);
  if (stream.empty()) return grid;

  const std::vector<double> tstar = normalize_timestamps(stream);
  for (std::size_t i = 0; i < stream.size(); ++i) {
    const Event& e = stream.events[i];
    const double a = tstar[i] * (bins - 1);
    const int b0 = static_cast<int>(std::floor(a));
    const double frac = a - b0;
    const double p = static_cast<double>(e.p);
    if (b0 >= 0 && b0 < bins) grid.at(b0, e.y, e.x) += p * (1.0 - frac);
    if (frac > 0.0 && b0 + 1 < bins) grid.at(b0 + 1, e.y, e.x) += p * frac;
  }
  return grid;
}

}  // namespace evalign
