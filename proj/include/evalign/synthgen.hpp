#pragma once

#include <cstdint>
#include <vector>

#include "evalign/events.hpp"
#include "evalign/flow.hpp"

namespace evalign {

enum class Pattern { Bar, Checker, TwoObject };

struct Rect {
  double x = -1, y = -1, w = -1, h = -1;  // negative = derive from frame
};

/// A moving high-contrast pattern over a dark background. Motion is given in
/// pixels per unit normalized window time; a pixel whose log-intensity drift
/// accumulates past the contrast threshold emits an event of that sign.
struct SceneSpec {
  int width = 64;
  int height = 64;
  Pattern pattern = Pattern::Bar;
  double u = 8.0, v = 0.0;    // object 1 / global motion
  double u2 = -4.0, v2 = 0.0;  // object 2 (TwoObject)
  double bar_width = 8.0;
  double bar_x0 = -1.0;  // negative = centered over the sweep
  double cell = 8.0;     // checker cell size
  Rect rect1, rect2;
  double contrast_c = 0.3;
  std::uint64_t duration_us = 50000;
  double noise_rate = 0.0;  // background events / pixel / second
};

struct SynthResult {
  EventStream stream;
  FlowField flow_gt;  // dense (control grid == pixel lattice)
};

/// Throws InvalidSpec when thresholds/durations are non-positive or the
/// pattern sweep does not stay inside the frame.
void validate(const SceneSpec& spec);

/// Renders the moving pattern at 1000 uniform time steps, integrates
/// per-pixel log-intensity against the threshold model and emits events at
/// linearly interpolated crossing times, then appends Poisson background
/// noise. Deterministic for a fixed (spec, seed).
SynthResult generate(const SceneSpec& spec, std::uint64_t seed);

/// Distance from the pixel center (x+0.5, y+0.5) to the nearest moving
/// pattern edge at normalized time tau.
double edge_distance(const SceneSpec& spec, int x, int y, double tau);

/// H*W row-major mask of pixels within `radius` of an edge at time tau.
std::vector<std::uint8_t> edge_mask(const SceneSpec& spec, double tau,
                                    double radius = 1.5);

}  // namespace evalign
