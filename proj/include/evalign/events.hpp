#pragma once

#include <cstdint>
#include <vector>

#include "evalign/errors.hpp"

namespace evalign {

/// One polarity spike: timestamp in microseconds, pixel position, and the
/// sign of the intensity change (+1 brighter, -1 darker).
struct Event {
  std::uint64_t t = 0;  // microseconds
  std::uint16_t x = 0;
  std::uint16_t y = 0;
  std::int8_t p = 1;  // exactly -1 or +1

  friend bool operator==(const Event&, const Event&) = default;
};

/// Time-ordered event sequence together with the sensor geometry and the
/// acquisition window. Treated as immutable after construction.
struct EventStream {
  std::vector<Event> events;
  std::uint16_t width = 0;
  std::uint16_t height = 0;
  std::uint64_t window_start = 0;  // microseconds
  std::uint64_t window_end = 0;

  bool empty() const { return events.empty(); }
  std::size_t size() const { return events.size(); }

  friend bool operator==(const EventStream&, const EventStream&) = default;
};

/// Checks ordering, polarity encoding, coordinate bounds and window
/// containment. Throws ValidationError/OutOfBounds on the first violation.
void validate(const EventStream& stream);

/// Maps each timestamp to (t - t_first) / (t_last - t_first) in [0, 1] using
/// the first/last event times. A degenerate span (all events at one
/// timestamp, or a single event) maps everything to 0. Throws EmptyStream on
/// an empty stream.
std::vector<double> normalize_timestamps(const EventStream& stream);

}  // namespace evalign
