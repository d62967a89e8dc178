#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <set>

#include "evalign/event_io.hpp"
#include "evalign/voxel.hpp"
#include "test_support.hpp"

using namespace evalign;

namespace {

EventStream small_stream(std::vector<Event> events, int w = 10, int h = 10) {
  EventStream s;
  s.events = std::move(events);
  s.width = static_cast<std::uint16_t>(w);
  s.height = static_cast<std::uint16_t>(h);
  s.window_start = 0;
  s.window_end = s.events.empty() ? 0 : s.events.back().t + 1;
  return s;
}

std::filesystem::path temp_path(const char* name) {
  return std::filesystem::temp_directory_path() / name;
}

}  // namespace

TEST_CASE("normalize_timestamps maps first to 0, midpoint to 0.5, last to 1") {
  EventStream s = small_stream({{100, 0, 0, 1}, {150, 1, 1, 1}, {200, 2, 2, -1}});
  const auto t = normalize_timestamps(s);
  CHECK(t[0] == 0.0);
  CHECK(t[1] == 0.5);
  CHECK(t[2] == 1.0);
}

TEST_CASE("normalize_timestamps degenerate window maps everything to 0") {
  EventStream s = small_stream({{77, 0, 0, 1}, {77, 1, 1, -1}, {77, 2, 2, 1}});
  const auto t = normalize_timestamps(s);
  for (double v : t) CHECK(v == 0.0);
}

TEST_CASE("normalize_timestamps rejects an empty stream") {
  EventStream s = small_stream({});
  CHECK_THROWS_AS(normalize_timestamps(s), EmptyStream);
}

TEST_CASE("validate rejects unsorted, out-of-bounds and bad polarity") {
  CHECK_THROWS_AS(validate(small_stream({{10, 0, 0, 1}, {5, 0, 0, 1}})),
                  ValidationError);
  CHECK_THROWS_AS(validate(small_stream({{10, 12, 0, 1}})), OutOfBounds);
  EventStream bad = small_stream({{10, 0, 0, 1}});
  bad.events[0].p = 0;
  CHECK_THROWS_AS(validate(bad), ValidationError);
}

TEST_CASE("voxelize: single event at t*=0 lands fully in bin 0") {
  EventStream s = small_stream({{0, 3, 4, 1}, {1000, 5, 5, -1}});
  const VoxelGrid g = voxelize(s, 5);
  CHECK(g.at(0, 4, 3) == 1.0);
  for (int b = 1; b < 5; ++b) CHECK(g.at(b, 4, 3) == 0.0);
  CHECK(g.at(4, 5, 5) == -1.0);  // last event lands fully in the last bin
}

TEST_CASE("voxelize: fractional bin position splits over two bins") {
  // t* = 0.375 so t*(B-1) = 1.5: bins 1 and 2 get exactly half each
  EventStream s = small_stream({{0, 0, 0, 1}, {375, 4, 4, 1}, {1000, 9, 9, 1}});
  const VoxelGrid g = voxelize(s, 5);
  CHECK(g.at(1, 4, 4) == 0.5);
  CHECK(g.at(2, 4, 4) == 0.5);
  CHECK(g.at(0, 4, 4) == 0.0);
}

TEST_CASE("voxelize: extreme timestamps map to extreme bins, net sum zero") {
  EventStream s = small_stream({{0, 2, 2, 1}, {1000, 2, 2, -1}});
  const VoxelGrid g = voxelize(s, 5);
  CHECK(g.at(0, 2, 2) == 1.0);
  CHECK(g.at(4, 2, 2) == -1.0);
  CHECK(g.sum() == 0.0);
}

TEST_CASE("voxelize: empty stream gives a zero grid") {
  EventStream s = small_stream({}, 6, 4);
  const VoxelGrid g = voxelize(s, 5);
  CHECK(g.data.size() == 5u * 4u * 6u);
  CHECK(g.sum() == 0.0);
}

TEST_CASE("voxelize rejects bad bin counts") {
  EventStream s = small_stream({{0, 0, 0, 1}});
  CHECK_THROWS_AS(voxelize(s, 0), ValidationError);
}

TEST_CASE("voxel mass conservation and bin locality on random streams") {
  for (std::uint64_t seed = 1; seed <= 200; ++seed) {
    const EventStream s = testsup::random_stream(seed, 120, 16, 16);
    const int bins = 1 + static_cast<int>(seed % 7);
    const VoxelGrid g = voxelize(s, bins);

    double polarity_sum = 0.0;
    for (const Event& e : s.events) polarity_sum += e.p;
    CHECK(std::abs(g.sum() - polarity_sum) <= 1e-6 * s.size());

    // locality: nonzero bins at a pixel must come from that pixel's events
    const auto tstar = normalize_timestamps(s);
    std::vector<std::set<int>> allowed(16 * 16);
    for (std::size_t i = 0; i < s.size(); ++i) {
      const double a = tstar[i] * (bins - 1);
      const int b0 = static_cast<int>(std::floor(a));
      allowed[s.events[i].y * 16 + s.events[i].x].insert(b0);
      if (a - b0 > 0.0 && b0 + 1 < bins)
        allowed[s.events[i].y * 16 + s.events[i].x].insert(b0 + 1);
    }
    for (int y = 0; y < 16; ++y) {
      for (int x = 0; x < 16; ++x) {
        for (int b = 0; b < bins; ++b) {
          if (g.at(b, y, x) != 0.0) {
            CHECK(allowed[y * 16 + x].count(b) == 1);
          }
        }
      }
    }
  }
}

TEST_CASE("voxel grid is invariant under permuting same-timestamp events") {
  EventStream s = small_stream({{0, 1, 1, 1},
                                {500, 2, 2, 1},
                                {500, 3, 3, -1},
                                {500, 2, 2, -1},
                                {1000, 4, 4, 1}});
  EventStream permuted = s;
  std::swap(permuted.events[1], permuted.events[3]);
  std::swap(permuted.events[2], permuted.events[3]);
  const VoxelGrid a = voxelize(s, 5);
  const VoxelGrid b = voxelize(permuted, 5);
  CHECK(a.data == b.data);
}

TEST_CASE("text event format: parse, polarity alias, round trip") {
  const auto path = temp_path("evalign_test_events.evt");
  testsup::spit(path.string(), "evt1 10 10\n1000,5,7,1\n2000,3,2,0\n");
  const EventStream s = read_events(path.string());
  REQUIRE(s.size() == 2);
  CHECK(s.events[0] == Event{1000, 5, 7, 1});
  CHECK(s.events[1] == Event{2000, 3, 2, -1});  // 0 aliases -1 on disk
  CHECK(s.width == 10);
  CHECK(s.height == 10);

  const auto out = temp_path("evalign_test_events_rt.evt");
  write_events(s, out.string());
  CHECK(read_events(out.string()) == s);
  // canonical files round-trip byte for byte
  write_events(read_events(out.string()), path.string());
  CHECK(testsup::slurp(path.string()) == testsup::slurp(out.string()));
  std::filesystem::remove(path);
  std::filesystem::remove(out);
}

TEST_CASE("text event format: parse errors carry the line number") {
  const auto path = temp_path("evalign_test_bad.evt");
  testsup::spit(path.string(), "evt1 10 10\n1000,5,7,1\nnot,an,event\n");
  try {
    read_events(path.string());
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(std::string(e.what()).find(":3:") != std::string::npos);
  }
  testsup::spit(path.string(), "bogus header\n");
  CHECK_THROWS_AS(read_events(path.string()), ParseError);
  testsup::spit(path.string(), "evt1 4 4\n10,9,0,1\n");
  CHECK_THROWS_AS(read_events(path.string()), OutOfBounds);
  std::filesystem::remove(path);
}

TEST_CASE("binary event format: write-read identity is byte exact") {
  EventStream s = testsup::random_stream(42, 257, 31, 17);
  const auto path = temp_path("evalign_test_events.evb");
  write_events(s, path.string());
  const EventStream back = read_events(path.string());
  CHECK(back.events == s.events);
  CHECK(back.width == s.width);

  const auto again = temp_path("evalign_test_events2.evb");
  write_events(back, again.string());
  CHECK(testsup::slurp(path.string()) == testsup::slurp(again.string()));
  std::filesystem::remove(path);
  std::filesystem::remove(again);
}

TEST_CASE("binary event format: malformed inputs are rejected") {
  const auto path = temp_path("evalign_test_bad.evb");
  testsup::spit(path.string(), "EVB2 junk");
  CHECK_THROWS_AS(read_events(path.string()), ParseError);
  // valid header claiming one event but no payload
  std::string header = "EVB1";
  header += std::string("\x08\x00\x08\x00", 4);
  header += std::string("\x01\x00\x00\x00\x00\x00\x00\x00", 8);
  testsup::spit(path.string(), header);
  CHECK_THROWS_AS(read_events(path.string()), ParseError);
  std::filesystem::remove(path);
  CHECK_THROWS_AS(read_events(path.string()), IoError);  // now missing
}

TEST_CASE("unknown extension is a validation error") {
  CHECK_THROWS_AS(event_format_from_path("events.txt"), ValidationError);
}
