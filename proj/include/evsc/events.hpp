#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace evsc {

/// One address-event. `p` is the channel label: sensor streams use
/// {-1, +1} (OFF/ON polarity), layer streams use [1, N] of the emitting
/// layer's dictionary.
struct Event {
  std::uint64_t t = 0;  // microseconds
  std::uint16_t x = 0;
  std::uint16_t y = 0;
  std::int16_t p = 0;

  bool operator==(const Event&) const = default;
};

enum class ChannelSemantics : std::uint8_t { kSensor = 0, kLayer = 1 };

/// Ordered event sequence with its geometry and channel declaration.
/// Invariants (checked by validate()): timestamps non-decreasing, every
/// event in bounds, every p a valid channel. Sensor streams carry the two
/// polarities, so channel_count is fixed at 2 there.
struct EventStream {
  std::uint16_t width = 0;
  std::uint16_t height = 0;
  std::uint16_t channel_count = 0;
  ChannelSemantics semantics = ChannelSemantics::kSensor;
  std::vector<Event> events;

  void validate() const;  // throws Error on any invariant violation
  bool operator==(const EventStream&) const = default;
};

/// Checks a single event against a stream's declaration. `record_index`
/// only decorates the error message.
void check_event(const Event& ev, std::uint16_t width, std::uint16_t height,
                 std::uint16_t channel_count, ChannelSemantics semantics,
                 std::size_t record_index);

enum class StreamFormat { kText, kBinary };

EventStream parse_events(std::string_view bytes, StreamFormat format);
std::string write_events(const EventStream& stream, StreamFormat format);

/// File helpers; read_events_file sniffs the format from the leading bytes.
EventStream read_events_file(const std::string& path);
void write_events_file(const std::string& path, const EventStream& stream, StreamFormat format);

/// Bit mask of the moving shape. mask[y * width + x] != 0 marks a pattern
/// pixel.
struct Bitmap {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> mask;

  bool at(int x, int y) const { return mask[static_cast<std::size_t>(y) * width + x] != 0; }
};

struct Waypoint {
  std::uint64_t t_us = 0;
  double x_offset = 0.0;  // top-left corner of the mask, pixels
  double y_offset = 0.0;
};

/// Synthetic stand-in for a change-detector recording: the mask translates
/// along the waypoint polyline and every pixel whose mask membership flips
/// emits one ON/OFF event (duplicated events_per_transition times), plus
/// Poisson background noise.
struct SyntheticSceneSpec {
  Bitmap pattern;
  std::vector<Waypoint> trajectory;     // strictly increasing t_us
  double event_rate_per_edge_pixel = 1.0;  // events emitted per membership transition (rounded, min 1)
  double noise_rate = 0.0;              // spurious events per pixel per second
  std::uint64_t seed = 0;
};

struct Geometry {
  std::uint16_t width = 0;
  std::uint16_t height = 0;
};

EventStream generate_scene(const SyntheticSceneSpec& spec, Geometry geometry);

}  // namespace evsc
