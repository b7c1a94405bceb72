#pragma once

#include <cstdint>
#include <limits>
#include <span>
#include <vector>

#include "evsc/events.hpp"

namespace evsc {

/// Per-event temporal descriptor: exponential-decay values over all
/// channels of the (2R+1)^2 neighborhood, row-major by (channel, dy, dx).
/// Values are always in [0, 1].
struct TimeSurface {
  std::vector<double> values;
  std::uint16_t center_x = 0;
  std::uint16_t center_y = 0;
  std::uint64_t t_ref = 0;
};

/// Full-frame map of the last activation time per (channel, pixel).
/// Channels are the 1-based labels used by layer streams; cells that never
/// fired hold kNever. Updates are strictly sequential per stream.
class TimestampMap {
 public:
  static constexpr std::uint64_t kNever = std::numeric_limits<std::uint64_t>::max();

  TimestampMap(std::uint16_t width, std::uint16_t height, std::uint16_t channels);

  /// Stores ev.t at (ev.p, ev.y, ev.x). Throws on out-of-bounds events and
  /// on timestamps older than one already recorded (stream-order violation).
  void record(const Event& ev);

  /// Last-activation time at channel label p (1-based), or kNever.
  std::uint64_t at(std::int16_t p, std::uint16_t x, std::uint16_t y) const;

  /// Decayed neighborhood of ev: cell = exp(-(ev.t - t_cell)/tau), 0 for
  /// never-fired and out-of-geometry cells. record(ev) must already have
  /// been applied so the event's own cell reads exactly 1.
  TimeSurface surface(const Event& ev, int radius, double tau_us) const;

  /// Allocation-free variant for the per-event hot path; `out` must hold
  /// channels * (2*radius+1)^2 values.
  void surface_into(const Event& ev, int radius, double tau_us, std::span<double> out) const;

  std::uint16_t width() const { return width_; }
  std::uint16_t height() const { return height_; }
  std::uint16_t channels() const { return channels_; }

  static std::size_t surface_dim(std::uint16_t channels, int radius) {
    std::size_t side = 2 * static_cast<std::size_t>(radius) + 1;
    return channels * side * side;
  }

 private:
  std::uint16_t width_;
  std::uint16_t height_;
  std::uint16_t channels_;
  std::uint64_t last_event_t_ = 0;
  bool any_recorded_ = false;
  std::vector<std::uint64_t> last_t_;  // [channel][y][x]
};

}  // namespace evsc
