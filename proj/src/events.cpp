#include "evsc/events.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

#include "evsc/error.hpp"
#include "evsc/rng.hpp"

namespace evsc {

namespace {

constexpr char kTextMagic[] = "# evs v1";
constexpr char kBinaryMagic[4] = {'E', 'V', 'S', '1'};

const char* semantics_name(ChannelSemantics s) {
  return s == ChannelSemantics::kSensor ? "sensor" : "layer";
}

template <typename T>
T parse_int(std::string_view token, std::string_view what, std::size_t line_no) {
  T value{};
  auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), value);
  if (ec != std::errc{} || ptr != token.data() + token.size()) {
    throw parse_error("line " + std::to_string(line_no) + ": malformed " + std::string(what) +
                      " '" + std::string(token) + "'");
  }
  return value;
}

std::string_view expect_prefix(std::string_view token, std::string_view prefix, std::size_t line_no) {
  if (token.substr(0, prefix.size()) != prefix) {
    throw parse_error("line " + std::to_string(line_no) + ": expected '" + std::string(prefix) +
                      "...', got '" + std::string(token) + "'");
  }
  return token.substr(prefix.size());
}

void append_u16(std::string& out, std::uint16_t v) {
  out.push_back(static_cast<char>(v & 0xff));
  out.push_back(static_cast<char>((v >> 8) & 0xff));
}

void append_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

std::uint16_t read_u16(const unsigned char* p) {
  return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}

std::uint64_t read_u64(const unsigned char* p) {
  std::uint64_t v = 0;
  for (int i = 7; i >= 0; --i) v = (v << 8) | p[i];
  return v;
}

}  // namespace

void check_event(const Event& ev, std::uint16_t width, std::uint16_t height,
                 std::uint16_t channel_count, ChannelSemantics semantics,
                 std::size_t record_index) {
  if (ev.x >= width || ev.y >= height) {
    throw validate_error("record " + std::to_string(record_index) + ": coordinate (" +
                         std::to_string(ev.x) + "," + std::to_string(ev.y) +
                         ") outside geometry " + std::to_string(width) + "x" +
                         std::to_string(height));
  }
  if (semantics == ChannelSemantics::kSensor) {
    if (ev.p != -1 && ev.p != 1) {
      throw validate_error("record " + std::to_string(record_index) + ": invalid channel " +
                           std::to_string(ev.p) + " for sensor stream (want -1 or +1)");
    }
  } else {
    if (ev.p < 1 || ev.p > static_cast<std::int32_t>(channel_count)) {
      throw validate_error("record " + std::to_string(record_index) + ": invalid channel " +
                           std::to_string(ev.p) + " for layer stream with " +
                           std::to_string(channel_count) + " channels");
    }
  }
}

void EventStream::validate() const {
  if (width == 0 || height == 0) throw validate_error("stream geometry must be positive");
  if (channel_count == 0) throw validate_error("stream channel count must be positive");
  if (semantics == ChannelSemantics::kSensor && channel_count != 2) {
    throw validate_error("sensor streams carry the two polarities; channel count must be 2");
  }
  std::uint64_t prev_t = 0;
  for (std::size_t i = 0; i < events.size(); ++i) {
    const Event& ev = events[i];
    check_event(ev, width, height, channel_count, semantics, i + 1);
    if (i > 0 && ev.t < prev_t) {
      throw order_error("timestamp regression at record " + std::to_string(i + 1) + " (" +
                        std::to_string(ev.t) + " after " + std::to_string(prev_t) + ")");
    }
    prev_t = ev.t;
  }
}

namespace {

EventStream parse_text(std::string_view bytes) {
  if (bytes.find('\r') != std::string_view::npos) {
    throw parse_error("carriage return found; the text format uses LF line endings");
  }
  EventStream stream;
  std::size_t pos = 0;
  std::size_t line_no = 0;
  std::size_t record_index = 0;
  std::uint64_t prev_t = 0;
  bool header_seen = false;
  while (pos <= bytes.size()) {
    std::size_t eol = bytes.find('\n', pos);
    std::string_view line = bytes.substr(pos, eol == std::string_view::npos ? bytes.size() - pos
                                                                            : eol - pos);
    ++line_no;
    bool last = eol == std::string_view::npos;
    pos = last ? bytes.size() + 1 : eol + 1;
    if (line.empty()) {
      if (last) break;  // trailing newline
      throw parse_error("line " + std::to_string(line_no) + ": empty line");
    }
    if (!header_seen) {
      std::istringstream hs{std::string(line)};
      std::string tok0, tok1, tok2, wtok, htok, ctok, stok, extra;
      hs >> tok0 >> tok1 >> tok2 >> wtok >> htok >> ctok >> stok;
      if (tok0 != "#" || tok1 != "evs" || tok2 != "v1" || (hs >> extra)) {
        throw parse_error("line 1: bad header, expected '" + std::string(kTextMagic) +
                          " w=<int> h=<int> c=<int> sem=<sensor|layer>'");
      }
      stream.width = parse_int<std::uint16_t>(expect_prefix(wtok, "w=", 1), "width", 1);
      stream.height = parse_int<std::uint16_t>(expect_prefix(htok, "h=", 1), "height", 1);
      stream.channel_count = parse_int<std::uint16_t>(expect_prefix(ctok, "c=", 1), "channel count", 1);
      std::string_view sem = expect_prefix(stok, "sem=", 1);
      if (sem == "sensor") {
        stream.semantics = ChannelSemantics::kSensor;
      } else if (sem == "layer") {
        stream.semantics = ChannelSemantics::kLayer;
      } else {
        throw parse_error("line 1: bad semantics '" + std::string(sem) + "'");
      }
      if (stream.width == 0 || stream.height == 0 || stream.channel_count == 0) {
        throw parse_error("line 1: geometry and channel count must be positive");
      }
      if (stream.semantics == ChannelSemantics::kSensor && stream.channel_count != 2) {
        throw parse_error("line 1: sensor streams declare c=2");
      }
      header_seen = true;
      continue;
    }
    // record: x,y,t,p
    Event ev;
    std::string_view rest = line;
    auto next_field = [&](bool final_field) {
      std::size_t comma = rest.find(',');
      if (final_field != (comma == std::string_view::npos)) {
        throw parse_error("line " + std::to_string(line_no) + ": malformed record '" +
                          std::string(line) + "'");
      }
      std::string_view tok = final_field ? rest : rest.substr(0, comma);
      rest = final_field ? std::string_view{} : rest.substr(comma + 1);
      return tok;
    };
    ev.x = parse_int<std::uint16_t>(next_field(false), "x", line_no);
    ev.y = parse_int<std::uint16_t>(next_field(false), "y", line_no);
    ev.t = parse_int<std::uint64_t>(next_field(false), "t", line_no);
    ev.p = parse_int<std::int16_t>(next_field(true), "p", line_no);
    ++record_index;
    check_event(ev, stream.width, stream.height, stream.channel_count, stream.semantics,
                record_index);
    if (record_index > 1 && ev.t < prev_t) {
      throw order_error("timestamp regression at record " + std::to_string(record_index) +
                        " (line " + std::to_string(line_no) + ")");
    }
    prev_t = ev.t;
    stream.events.push_back(ev);
  }
  if (!header_seen) throw parse_error("empty input: missing header");
  return stream;
}

EventStream parse_binary(std::string_view bytes) {
  constexpr std::size_t kHeaderSize = 11;
  constexpr std::size_t kRecordSize = 14;
  if (bytes.size() < kHeaderSize) throw parse_error("truncated binary header");
  if (std::memcmp(bytes.data(), kBinaryMagic, 4) != 0) {
    throw parse_error("bad magic, expected 'EVS1'");
  }
  const auto* p = reinterpret_cast<const unsigned char*>(bytes.data());
  EventStream stream;
  stream.width = read_u16(p + 4);
  stream.height = read_u16(p + 6);
  stream.channel_count = read_u16(p + 8);
  switch (p[10]) {
    case 0: stream.semantics = ChannelSemantics::kSensor; break;
    case 1: stream.semantics = ChannelSemantics::kLayer; break;
    default: throw parse_error("bad semantics flag at offset 10");
  }
  if (stream.width == 0 || stream.height == 0 || stream.channel_count == 0) {
    throw parse_error("geometry and channel count must be positive");
  }
  if (stream.semantics == ChannelSemantics::kSensor && stream.channel_count != 2) {
    throw parse_error("sensor streams declare channel count 2");
  }
  std::size_t body = bytes.size() - kHeaderSize;
  if (body % kRecordSize != 0) {
    throw parse_error("truncated record at offset " +
                      std::to_string(kHeaderSize + (body / kRecordSize) * kRecordSize));
  }
  std::size_t count = body / kRecordSize;
  stream.events.reserve(count);
  std::uint64_t prev_t = 0;
  for (std::size_t i = 0; i < count; ++i) {
    const unsigned char* r = p + kHeaderSize + i * kRecordSize;
    Event ev;
    ev.x = read_u16(r);
    ev.y = read_u16(r + 2);
    ev.t = read_u64(r + 4);
    ev.p = static_cast<std::int16_t>(read_u16(r + 12));
    check_event(ev, stream.width, stream.height, stream.channel_count, stream.semantics, i + 1);
    if (i > 0 && ev.t < prev_t) {
      throw order_error("timestamp regression at record " + std::to_string(i + 1));
    }
    prev_t = ev.t;
    stream.events.push_back(ev);
  }
  return stream;
}

}  // namespace

EventStream parse_events(std::string_view bytes, StreamFormat format) {
  return format == StreamFormat::kText ? parse_text(bytes) : parse_binary(bytes);
}

std::string write_events(const EventStream& stream, StreamFormat format) {
  std::string out;
  if (format == StreamFormat::kText) {
    char header[96];
    std::snprintf(header, sizeof header, "%s w=%u h=%u c=%u sem=%s\n", kTextMagic, stream.width,
                  stream.height, stream.channel_count, semantics_name(stream.semantics));
    out += header;
    char line[96];
    for (const Event& ev : stream.events) {
      std::snprintf(line, sizeof line, "%u,%u,%llu,%d\n", ev.x, ev.y,
                    static_cast<unsigned long long>(ev.t), ev.p);
      out += line;
    }
  } else {
    out.reserve(11 + 14 * stream.events.size());
    out.append(kBinaryMagic, 4);
    append_u16(out, stream.width);
    append_u16(out, stream.height);
    append_u16(out, stream.channel_count);
    out.push_back(stream.semantics == ChannelSemantics::kSensor ? 0 : 1);
    for (const Event& ev : stream.events) {
      append_u16(out, ev.x);
      append_u16(out, ev.y);
      append_u64(out, ev.t);
      append_u16(out, static_cast<std::uint16_t>(ev.p));
    }
  }
  return out;
}

EventStream read_events_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw io_error("cannot open '" + path + "'");
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  StreamFormat format = bytes.size() >= 4 && std::memcmp(bytes.data(), kBinaryMagic, 4) == 0
                            ? StreamFormat::kBinary
                            : StreamFormat::kText;
  try {
    return parse_events(bytes, format);
  } catch (const Error& e) {
    throw Error(e.code(), path + ": " + e.what());
  }
}

void write_events_file(const std::string& path, const EventStream& stream, StreamFormat format) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw io_error("cannot create '" + path + "'");
  std::string bytes = write_events(stream, format);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw io_error("write failed for '" + path + "'");
}

namespace {

struct Placement {
  long long x = 0;
  long long y = 0;
  bool operator==(const Placement&) const = default;
};

Placement placement_at(const std::vector<Waypoint>& traj, std::size_t segment, std::uint64_t t) {
  const Waypoint& a = traj[segment];
  const Waypoint& b = traj[segment + 1 < traj.size() ? segment + 1 : segment];
  double fx = a.x_offset;
  double fy = a.y_offset;
  if (b.t_us > a.t_us && t > a.t_us) {
    double u = static_cast<double>(t - a.t_us) / static_cast<double>(b.t_us - a.t_us);
    fx += u * (b.x_offset - a.x_offset);
    fy += u * (b.y_offset - a.y_offset);
  }
  return Placement{std::llround(fx), std::llround(fy)};
}

void check_fits(const Placement& pl, const Bitmap& pattern, Geometry geom, std::uint64_t t) {
  if (pl.x < 0 || pl.y < 0 || pl.x + pattern.width > geom.width ||
      pl.y + pattern.height > geom.height) {
    throw validate_error("trajectory leaves geometry at t=" + std::to_string(t) + "us");
  }
}

bool covered(const Bitmap& pattern, const Placement& pl, long long x, long long y) {
  long long lx = x - pl.x;
  long long ly = y - pl.y;
  if (lx < 0 || ly < 0 || lx >= pattern.width || ly >= pattern.height) return false;
  return pattern.at(static_cast<int>(lx), static_cast<int>(ly));
}

}  // namespace

EventStream generate_scene(const SyntheticSceneSpec& spec, Geometry geometry) {
  if (geometry.width == 0 || geometry.height == 0) throw validate_error("geometry must be positive");
  if (spec.trajectory.empty()) throw validate_error("trajectory needs at least one waypoint");
  if (spec.noise_rate < 0 || spec.event_rate_per_edge_pixel < 0) {
    throw validate_error("rates must be non-negative");
  }
  if (spec.pattern.width < 0 || spec.pattern.height < 0 ||
      spec.pattern.mask.size() !=
          static_cast<std::size_t>(spec.pattern.width) * spec.pattern.height) {
    throw validate_error("pattern mask size does not match its declared extent");
  }
  for (std::size_t i = 1; i < spec.trajectory.size(); ++i) {
    if (spec.trajectory[i].t_us <= spec.trajectory[i - 1].t_us) {
      throw validate_error("trajectory times must be strictly increasing");
    }
  }

  const std::vector<Waypoint>& traj = spec.trajectory;
  const std::uint64_t t_begin = traj.front().t_us;
  const std::uint64_t t_end = traj.back().t_us;
  const long long repeats =
      std::max(1ll, std::llround(std::max(spec.event_rate_per_edge_pixel, 0.0)));

  std::vector<Event> signal;
  Placement prev = placement_at(traj, 0, t_begin);
  check_fits(prev, spec.pattern, geometry, t_begin);
  std::size_t segment = 0;
  for (std::uint64_t t = t_begin + 1; t <= t_end && t_end > t_begin; ++t) {
    while (segment + 1 < traj.size() && traj[segment + 1].t_us < t) ++segment;
    Placement cur = placement_at(traj, segment, t);
    if (cur == prev) continue;
    check_fits(cur, spec.pattern, geometry, t);
    // Diff the two mask placements over their joint bounding box, row-major.
    long long x0 = std::min(prev.x, cur.x);
    long long y0 = std::min(prev.y, cur.y);
    long long x1 = std::max(prev.x, cur.x) + spec.pattern.width;
    long long y1 = std::max(prev.y, cur.y) + spec.pattern.height;
    for (long long y = y0; y < y1; ++y) {
      for (long long x = x0; x < x1; ++x) {
        bool was = covered(spec.pattern, prev, x, y);
        bool now = covered(spec.pattern, cur, x, y);
        if (was == now) continue;
        Event ev{t, static_cast<std::uint16_t>(x), static_cast<std::uint16_t>(y),
                 static_cast<std::int16_t>(now ? 1 : -1)};
        for (long long k = 0; k < repeats; ++k) signal.push_back(ev);
      }
    }
    prev = cur;
  }

  std::vector<Event> noise;
  if (spec.noise_rate > 0 && t_end > t_begin) {
    Rng rng(spec.seed);
    double rate_per_us = spec.noise_rate * geometry.width * geometry.height / 1e6;
    double cursor = static_cast<double>(t_begin);
    for (;;) {
      cursor += rng.exponential(rate_per_us);
      if (cursor > static_cast<double>(t_end)) break;
      Event ev;
      ev.t = static_cast<std::uint64_t>(cursor);
      ev.x = static_cast<std::uint16_t>(rng.uniform_index(geometry.width));
      ev.y = static_cast<std::uint16_t>(rng.uniform_index(geometry.height));
      ev.p = rng.coin() ? 1 : -1;
      noise.push_back(ev);
    }
  }

  EventStream stream;
  stream.width = geometry.width;
  stream.height = geometry.height;
  stream.channel_count = 2;
  stream.semantics = ChannelSemantics::kSensor;
  stream.events.reserve(signal.size() + noise.size());
  // Both vectors are time-sorted; signal events come first on ties.
  std::merge(signal.begin(), signal.end(), noise.begin(), noise.end(),
             std::back_inserter(stream.events),
             [](const Event& a, const Event& b) { return a.t < b.t; });
  return stream;
}

}  // namespace evsc
