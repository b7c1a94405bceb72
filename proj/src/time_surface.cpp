#include "evsc/time_surface.hpp"

#include <cmath>
#include <string>

#include "evsc/error.hpp"

namespace evsc {

TimestampMap::TimestampMap(std::uint16_t width, std::uint16_t height, std::uint16_t channels)
    : width_(width), height_(height), channels_(channels) {
  if (width == 0 || height == 0 || channels == 0) {
    throw validate_error("timestamp map needs positive geometry and channel count");
  }
  last_t_.assign(static_cast<std::size_t>(channels) * height * width, kNever);
}

void TimestampMap::record(const Event& ev) {
  if (ev.p < 1 || ev.p > static_cast<std::int32_t>(channels_) || ev.x >= width_ ||
      ev.y >= height_) {
    throw validate_error("event (" + std::to_string(ev.x) + "," + std::to_string(ev.y) + ",p=" +
                         std::to_string(ev.p) + ") outside map of " + std::to_string(channels_) +
                         " channels, " + std::to_string(width_) + "x" + std::to_string(height_));
  }
  if (any_recorded_ && ev.t < last_event_t_) {
    throw order_error("stream-order violation: t=" + std::to_string(ev.t) +
                      " after t=" + std::to_string(last_event_t_));
  }
  any_recorded_ = true;
  last_event_t_ = ev.t;
  std::size_t idx = (static_cast<std::size_t>(ev.p - 1) * height_ + ev.y) * width_ + ev.x;
  last_t_[idx] = ev.t;
}

std::uint64_t TimestampMap::at(std::int16_t p, std::uint16_t x, std::uint16_t y) const {
  std::size_t idx = (static_cast<std::size_t>(p - 1) * height_ + y) * width_ + x;
  return last_t_[idx];
}

void TimestampMap::surface_into(const Event& ev, int radius, double tau_us,
                                std::span<double> out) const {
  if (radius < 1) throw validate_error("surface radius must be >= 1");
  if (!(tau_us > 0)) throw validate_error("surface decay constant must be > 0");
  const int side = 2 * radius + 1;
  if (out.size() != static_cast<std::size_t>(channels_) * side * side) {
    throw dimension_error("surface buffer has " + std::to_string(out.size()) + " cells, want " +
                          std::to_string(static_cast<std::size_t>(channels_) * side * side));
  }
  const double inv_tau = 1.0 / tau_us;
  std::size_t cell = 0;
  for (int c = 0; c < channels_; ++c) {
    const std::uint64_t* plane = last_t_.data() + static_cast<std::size_t>(c) * height_ * width_;
    for (int dy = -radius; dy <= radius; ++dy) {
      const int v = static_cast<int>(ev.y) + dy;
      const bool row_ok = v >= 0 && v < static_cast<int>(height_);
      for (int dx = -radius; dx <= radius; ++dx, ++cell) {
        const int u = static_cast<int>(ev.x) + dx;
        if (!row_ok || u < 0 || u >= static_cast<int>(width_)) {
          out[cell] = 0.0;  // no event can ever have occurred there
          continue;
        }
        const std::uint64_t t_cell = plane[static_cast<std::size_t>(v) * width_ + u];
        if (t_cell == kNever) {
          out[cell] = 0.0;
          continue;
        }
        out[cell] = std::exp(-static_cast<double>(ev.t - t_cell) * inv_tau);
      }
    }
  }
}

TimeSurface TimestampMap::surface(const Event& ev, int radius, double tau_us) const {
  TimeSurface ts;
  ts.center_x = ev.x;
  ts.center_y = ev.y;
  ts.t_ref = ev.t;
  ts.values.resize(surface_dim(channels_, radius));
  surface_into(ev, radius, tau_us, ts.values);
  return ts;
}

}  // namespace evsc
