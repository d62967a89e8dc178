#pragma once

#include <string>

#include "evalign/events.hpp"

namespace evalign {

enum class EventFormat { Text, Binary };

/// Picks Text for ".evt" and Binary for ".evb"; anything else is a
/// ValidationError.
EventFormat event_format_from_path(const std::string& path);

/// Reads an event file. The acquisition window is reconstructed as
/// [first event t, last event t] since neither on-disk format carries it.
EventStream read_events(const std::string& path, EventFormat format);
EventStream read_events(const std::string& path);

void write_events(const EventStream& stream, const std::string& path,
                  EventFormat format);
void write_events(const EventStream& stream, const std::string& path);

}  // namespace evalign
