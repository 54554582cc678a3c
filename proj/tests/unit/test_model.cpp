#include <random>

#include "doctest.h"
#include "support.hpp"
#include "trajcrit/error.hpp"
#include "trajcrit/model.hpp"

using namespace trajcrit;

TEST_CASE("segment bounds per road") {
  Segment s{10.0, 410.0};
  CHECK(s.length() == 400.0);
  CHECK(s.lo(Direction::Lower) == 10.0);
  CHECK(s.hi(Direction::Lower) == 410.0);
  CHECK(s.lo(Direction::Upper) == -410.0);
  CHECK(s.hi(Direction::Upper) == -10.0);
  CHECK(s.midpoint(Direction::Upper) == -210.0);
}

TEST_CASE("lane layout positions count from the right") {
  const auto layout = support::location1();
  CHECK(layout.position(8) == 0);
  CHECK(layout.position(6) == 2);
  CHECK(layout.position(1) == 0);
  CHECK(layout.position(4) == 3);
  CHECK(layout.position(99) == -1);
  CHECK(layout.direction_of(3) == Direction::Upper);
  CHECK(layout.direction_of(7) == Direction::Lower);
  CHECK_FALSE(layout.direction_of(5).has_value());
  CHECK(layout.through_lane_count(Direction::Upper) == 3);
  CHECK(layout.through_lane_count(Direction::Lower) == 3);
  CHECK(layout.find(1)->role == LaneRole::Emergency);
}

TEST_CASE("normalization maps raw boxes to front bumpers") {
  const auto layout = support::location1();
  Track t;
  t.id = 1;
  t.length = 5.0;
  t.direction = Direction::Lower;
  FrameState f;
  f.frame = 1;
  f.x = 100.0;
  f.y = 25.0;
  f.vx = 30.0;
  f.ax = 0.5;
  f.lane_id = 8;
  t.frames = {f};
  auto n = normalize_direction(t, layout);
  CHECK(n.frames[0].x == 105.0);
  CHECK(n.frames[0].vx == 30.0);

  t.direction = Direction::Upper;
  t.frames[0].lane_id = 3;
  t.frames[0].vx = -30.0;
  t.frames[0].vy = 0.2;
  n = normalize_direction(t, layout);
  CHECK(n.frames[0].x == -100.0);
  CHECK(n.frames[0].vx == 30.0);
  CHECK(n.frames[0].vy == -0.2);
  CHECK(n.frames[0].y == -25.0);
  CHECK(n.frames[0].ax == -0.5);
  // Idempotent.
  CHECK(normalize_direction(n, layout) == n);

  t.frames[0].lane_id = 42;
  CHECK_THROWS_AS(normalize_direction(t, layout), LayoutError);
}

TEST_CASE("denormalize then normalize is bit exact") {
  const auto layout = support::location1();
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> x(-50.0, 450.0), len(3.0, 19.0), v(-40.0, 40.0);
  for (int i = 0; i < 2000; ++i) {
    Track t;
    t.id = i + 1;
    t.length = len(rng);
    t.direction = i % 2 ? Direction::Upper : Direction::Lower;
    FrameState f;
    f.frame = 1;
    // Fronts a raw file can express.
    f.x = t.direction == Direction::Upper ? x(rng) : x(rng) + t.length;
    f.y = x(rng);
    f.vx = v(rng);
    f.lane_id = t.direction == Direction::Upper ? 2 : 8;
    t.frames = {f};
    // Exact in the writer's direction: model, raw file, model.
    t.normalized = true;
    const auto raw = denormalize_direction(t);
    REQUIRE(normalize_direction(raw, layout) == t);
    // The other way round only up to rounding.
    const auto back = denormalize_direction(normalize_direction(raw, layout));
    REQUIRE(back.frames[0].x == doctest::Approx(raw.frames[0].x).epsilon(1e-12));
  }
}

TEST_CASE("leader gap is bumper to bumper") {
  FrameState fol, lead;
  fol.frame = lead.frame = 7;
  fol.x = 100.0;
  fol.vx = 30.0;
  fol.ax = 1.0;
  lead.x = 130.0;
  lead.vx = 20.0;
  lead.ax = -1.0;
  const auto g = leader_gap(fol, lead, 5.0, 3);
  CHECK(g.gap == 25.0);
  CHECK(g.rel_speed == 10.0);
  CHECK(g.rel_accel == 2.0);
  CHECK(g.leader_id == 3);
  CHECK(g.valid());
  lead.frame = 8;
  CHECK_THROWS_AS(leader_gap(fol, lead, 5.0), SyncError);
}

TEST_CASE("track lookup and durations") {
  Recording rec = support::empty_recording();
  rec.tracks.push_back(support::cruise(4, Direction::Lower, 8, 10.0, 20.0, 5, 26));
  rec.tracks.push_back(support::cruise(9, Direction::Lower, 7, 10.0, 20.0, 1, 3));
  const TrackIndex index(rec);
  REQUIRE(index.find(4) != nullptr);
  CHECK(index.find(4)->id == 4);
  CHECK(index.find(5) == nullptr);
  const Track& t = rec.tracks[0];
  CHECK(t.at(5)->frame == 5);
  CHECK(t.at(30)->frame == 30);
  CHECK(t.at(31) == nullptr);
  CHECK(t.at(4) == nullptr);
  CHECK(track_duration(t, 25.0) == doctest::Approx(26 / 25.0));
  CHECK(track_duration(support::cruise(1, Direction::Lower, 8, 0, 0, 1, 350), 25.0) == doctest::Approx(14.0));
  CHECK(rec.time_of(26) == doctest::Approx(1.0));
}

TEST_CASE("kinematic consistency tolerates the acceleration envelope") {
  FrameState a, b;
  a.frame = 1;
  b.frame = 2;
  a.x = 0.0;
  a.vx = 25.0;
  b.x = 1.0;
  b.vx = 25.0;
  CHECK(kinematically_consistent(a, b, 0.04, 8.0));
  b.x = 3.0;
  CHECK_FALSE(kinematically_consistent(a, b, 0.04, 8.0));
}
