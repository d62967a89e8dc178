#pragma once

#include <cstdint>
#include <vector>

#include "evalign/events.hpp"
#include "evalign/flow.hpp"

namespace evalign {

/// Dense H x W image of doubles, row-major.
struct Image {
  int height = 0;
  int width = 0;
  std::vector<double> data;

  Image() = default;
  Image(int h, int w)
      : height(h), width(w),
        data(static_cast<std::size_t>(h) * w, 0.0) {}

  double& at(int y, int x) {
    return data[static_cast<std::size_t>(y) * width + x];
  }
  double at(int y, int x) const {
    return data[static_cast<std::size_t>(y) * width + x];
  }
  double abs_sum() const;
  double min() const;
  double max() const;
};

/// Events after motion compensation: real-valued coordinates at the
/// reference time plus the surviving per-event attributes.
struct WarpedStream {
  std::vector<double> x;
  std::vector<double> y;
  std::vector<double> t;  // normalized timestamps of the source events
  std::vector<std::int8_t> p;
  double t_ref = 1.0;
  int height = 0;
  int width = 0;

  std::size_t size() const { return x.size(); }
};

/// Image of warped events: signed polarity accumulation plus the deposited
/// absolute mass (events clipped at the border lose part of theirs).
struct Iwe {
  Image image;
  double mass_deposited = 0.0;
  std::size_t event_count = 0;

  double lost_mass_fraction() const {
    return event_count == 0
               ? 0.0
               : 1.0 - mass_deposited / static_cast<double>(event_count);
  }
};

/// Per-polarity average-timestamp images; values lie in [0, 1] for
/// normalized inputs, and 0 where a polarity has no nearby events.
struct TimestampImages {
  Image t_plus;
  Image t_minus;
};

/// x' = x + (t_ref - t*) u(x, y), y' = y + (t_ref - t*) v(x, y), with the
/// flow sampled at the event's original integer pixel. t_ref is normalized
/// (0 = window start, 1 = window end).
WarpedStream warp_events(const EventStream& stream, const FlowField& flow,
                         double t_ref);

/// Same, reusing precomputed normalized timestamps.
WarpedStream warp_events(const EventStream& stream,
                         const std::vector<double>& tstar,
                         const FlowField& flow, double t_ref);

/// Events carried over unmodified (identity warp); the baseline IWE.
WarpedStream identity_warp(const EventStream& stream);

/// Bilinear splat of signed polarity onto the 4 integer neighbors. Only
/// in-bounds neighbor weights are deposited.
Iwe splat_iwe(const WarpedStream& warped);

TimestampImages timestamp_images(const WarpedStream& warped, double eps);

}  // namespace evalign
