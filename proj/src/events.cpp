#include "evalign/events.hpp"

#include <string>

namespace evalign {

void validate(const EventStream& stream) {
  if (!stream.empty() && stream.window_end <= stream.window_start) {
    throw ValidationError("event stream: window_end must exceed window_start");
  }
  std::uint64_t prev_t = stream.window_start;
  std::size_t i = 0;
  for (const Event& e : stream.events) {
    if (e.p != 1 && e.p != -1) {
      throw ValidationError("event " + std::to_string(i) +
                            ": polarity must be -1 or +1");
    }
    if (e.x >= stream.width || e.y >= stream.height) {
      throw OutOfBounds("event " + std::to_string(i) + ": pixel (" +
                        std::to_string(e.x) + "," + std::to_string(e.y) +
                        ") outside " + std::to_string(stream.width) + "x" +
                        std::to_string(stream.height));
    }
    if (e.t < prev_t) {
      throw ValidationError("event " + std::to_string(i) +
                            ": timestamps must be non-decreasing");
    }
    if (e.t > stream.window_end) {
      throw ValidationError("event " + std::to_string(i) +
                            ": timestamp outside window");
    }
    prev_t = e.t;
    ++i;
  }
}

std::vector<double> normalize_timestamps(const EventStream& stream) {
  if (stream.empty()) {
    throw EmptyStream("normalize_timestamps: empty stream");
  }
  const std::uint64_t t_first = stream.events.front().t;
  const std::uint64_t t_last = stream.events.back().t;
  std::vector<double> out(stream.size());
  if (t_last == t_first) {
    // degenerate span: everything maps to 0
    return out;
  }
  const double span = static_cast<double>(t_last - t_first);
  for (std::size_t i = 0; i < stream.size(); ++i) {
    out[i] = static_cast<double>(stream.events[i].t - t_first) / span;
  }
  return out;
}

}  // namespace evalign
