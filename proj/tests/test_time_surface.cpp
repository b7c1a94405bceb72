#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "evsc/error.hpp"
#include "evsc/rng.hpp"
#include "evsc/time_surface.hpp"

using namespace evsc;

TEST(TimestampMap, RecordStoresTheCell) {
  TimestampMap map(4, 4, 2);
  map.record(Event{5, 0, 0, 1});
  EXPECT_EQ(map.at(1, 0, 0), 5u);
  for (std::int16_t p = 1; p <= 2; ++p) {
    for (std::uint16_t y = 0; y < 4; ++y) {
      for (std::uint16_t x = 0; x < 4; ++x) {
        if (p == 1 && x == 0 && y == 0) continue;
        EXPECT_EQ(map.at(p, x, y), TimestampMap::kNever);
      }
    }
  }
}

TEST(TimestampMap, MostRecentWins) {
  TimestampMap map(4, 4, 1);
  map.record(Event{5, 2, 3, 1});
  map.record(Event{9, 2, 3, 1});
  EXPECT_EQ(map.at(1, 2, 3), 9u);
}

TEST(TimestampMap, StreamOrderViolationThrows) {
  TimestampMap map(4, 4, 1);
  map.record(Event{9, 0, 0, 1});
  try {
    map.record(Event{5, 1, 1, 1});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), "order");
  }
}

TEST(TimestampMap, OutOfBoundsEventThrows) {
  TimestampMap map(4, 4, 2);
  EXPECT_THROW(map.record(Event{1, 4, 0, 1}), Error);
  EXPECT_THROW(map.record(Event{1, 0, 4, 1}), Error);
  EXPECT_THROW(map.record(Event{1, 0, 0, 3}), Error);
  EXPECT_THROW(map.record(Event{1, 0, 0, 0}), Error);
}

TEST(Surface, CenterCellIsExactlyOne) {
  TimestampMap map(8, 8, 2);
  Event ev{123456, 4, 4, 2};
  map.record(ev);
  TimeSurface ts = map.surface(ev, 2, 1000.0);
  // channel 2, dy=0, dx=0 in a 5x5 window
  std::size_t center = (1 * 5 + 2) * 5 + 2;
  EXPECT_DOUBLE_EQ(ts.values[center], 1.0);
}

TEST(Surface, NeighborOneTauAgoIsExpMinusOne) {
  TimestampMap map(8, 8, 1);
  double tau = 250.0;
  map.record(Event{1000, 3, 4, 1});
  Event ev{1250, 4, 4, 1};
  map.record(ev);
  TimeSurface ts = map.surface(ev, 1, tau);
  std::size_t cell = (0 * 3 + 1) * 3 + 0;  // dy=0, dx=-1
  EXPECT_NEAR(ts.values[cell], std::exp(-1.0), 1e-12);
}

// Full 2x9 surface checked cell-by-cell against a brute-force oracle that
// re-applies the decay formula independently.
TEST(Surface, HandPlacedMapMatchesBruteForce) {
  TimestampMap map(5, 5, 2);
  map.record(Event{80, 3, 2, 2});
  map.record(Event{90, 2, 2, 1});
  Event ev{100, 2, 2, 1};
  map.record(ev);
  const int radius = 1;
  const double tau = 10.0;
  TimeSurface ts = map.surface(ev, radius, tau);
  ASSERT_EQ(ts.values.size(), 18u);

  std::size_t cell = 0;
  for (int c = 1; c <= 2; ++c) {
    for (int dy = -radius; dy <= radius; ++dy) {
      for (int dx = -radius; dx <= radius; ++dx, ++cell) {
        int u = 2 + dx;
        int v = 2 + dy;
        double expected = 0.0;
        if (u >= 0 && u < 5 && v >= 0 && v < 5) {
          std::uint64_t t_cell = TimestampMap::kNever;
          if (c == 1 && u == 2 && v == 2) t_cell = 100;  // the event itself
          if (c == 2 && u == 3 && v == 2) t_cell = 80;
          if (t_cell != TimestampMap::kNever) {
            expected = std::exp(-static_cast<double>(100 - t_cell) / tau);
          }
        }
        EXPECT_NEAR(ts.values[cell], expected, 1e-12) << "cell " << cell;
      }
    }
  }
}

TEST(Surface, NeverFiredAndOutOfGeometryCellsAreZero) {
  TimestampMap map(3, 3, 1);
  Event ev{10, 0, 0, 1};
  map.record(ev);
  TimeSurface ts = map.surface(ev, 1, 5.0);
  for (int dy = -1; dy <= 1; ++dy) {
    for (int dx = -1; dx <= 1; ++dx) {
      std::size_t cell = static_cast<std::size_t>((dy + 1) * 3 + (dx + 1));
      if (dx == 0 && dy == 0) {
        EXPECT_DOUBLE_EQ(ts.values[cell], 1.0);  // the event's own cell
      } else {
        // dx/dy < 0 fall outside the geometry, the rest never fired
        EXPECT_EQ(ts.values[cell], 0.0);
      }
    }
  }
}

TEST(Surface, ValuesStayInUnitRange) {
  Rng rng(99);
  TimestampMap map(16, 16, 3);
  std::uint64_t t = 0;
  for (int i = 0; i < 2000; ++i) {
    t += rng.uniform_index(30);
    Event ev{t, static_cast<std::uint16_t>(rng.uniform_index(16)),
             static_cast<std::uint16_t>(rng.uniform_index(16)),
             static_cast<std::int16_t>(1 + rng.uniform_index(3))};
    map.record(ev);
    TimeSurface ts = map.surface(ev, 2, 40.0);
    for (double v : ts.values) {
      ASSERT_GE(v, 0.0);
      ASSERT_LE(v, 1.0);
    }
  }
}

TEST(Surface, ShiftInvarianceInTime) {
  const std::uint64_t shift = 777777;
  TimestampMap a(8, 8, 1);
  TimestampMap b(8, 8, 1);
  std::vector<Event> evs = {{10, 1, 1, 1}, {25, 2, 1, 1}, {40, 2, 2, 1}, {41, 1, 2, 1}};
  for (const Event& ev : evs) {
    a.record(ev);
    Event shifted = ev;
    shifted.t += shift;
    b.record(shifted);
  }
  Event probe{50, 2, 2, 1};
  Event probe_shifted{50 + shift, 2, 2, 1};
  a.record(probe);
  b.record(probe_shifted);
  TimeSurface sa = a.surface(probe, 2, 17.0);
  TimeSurface sb = b.surface(probe_shifted, 2, 17.0);
  for (std::size_t i = 0; i < sa.values.size(); ++i) {
    EXPECT_DOUBLE_EQ(sa.values[i], sb.values[i]);
  }
}

TEST(Surface, MonotoneInTauAndAge) {
  TimestampMap map(8, 8, 1);
  map.record(Event{100, 3, 3, 1});
  map.record(Event{150, 4, 3, 1});
  Event ev{200, 3, 3, 1};
  map.record(ev);
  TimeSurface slow = map.surface(ev, 1, 500.0);
  TimeSurface fast = map.surface(ev, 1, 50.0);
  for (std::size_t i = 0; i < slow.values.size(); ++i) {
    EXPECT_GE(slow.values[i], fast.values[i]);  // larger tau decays less
  }
  std::size_t right = (1) * 3 + 2;  // the neighbor that fired 50us before ev
  TimeSurface ts = map.surface(ev, 1, 100.0);
  EXPECT_NEAR(ts.values[right], std::exp(-0.5), 1e-12);
}

TEST(Surface, DependsOnlyOnThePrefix) {
  std::vector<Event> evs;
  Rng rng(5);
  std::uint64_t t = 0;
  for (int i = 0; i < 50; ++i) {
    t += 1 + rng.uniform_index(20);
    evs.push_back(Event{t, static_cast<std::uint16_t>(rng.uniform_index(6)),
                        static_cast<std::uint16_t>(rng.uniform_index(6)), 1});
  }
  TimestampMap incremental(6, 6, 1);
  for (std::size_t k = 0; k < evs.size(); ++k) {
    incremental.record(evs[k]);
    TimeSurface from_stream = incremental.surface(evs[k], 1, 30.0);
    TimestampMap prefix_only(6, 6, 1);
    for (std::size_t j = 0; j <= k; ++j) prefix_only.record(evs[j]);
    TimeSurface from_prefix = prefix_only.surface(evs[k], 1, 30.0);
    ASSERT_EQ(from_stream.values, from_prefix.values) << "event " << k;
  }
}
