#include "trajcrit/model.hpp"

#include <cmath>
#include <set>

#include "trajcrit/error.hpp"

namespace trajcrit {

std::string_view to_string(Direction d) { return d == Direction::Upper ? "upper" : "lower"; }

std::string_view to_string(VehicleClass c) { return c == VehicleClass::Car ? "car" : "truck"; }

std::string_view to_string(LaneRole r) {
  switch (r) {
    case LaneRole::Right: return "right";
    case LaneRole::Middle: return "middle";
    case LaneRole::Left: return "left";
    case LaneRole::Acceleration: return "acceleration";
    case LaneRole::Emergency: return "emergency";
  }
  return "right";
}

LaneRole lane_role_from_string(std::string_view s) {
  if (s == "right") return LaneRole::Right;
  if (s == "middle") return LaneRole::Middle;
  if (s == "left") return LaneRole::Left;
  if (s == "acceleration") return LaneRole::Acceleration;
  if (s == "emergency") return LaneRole::Emergency;
  throw LayoutError("unknown lane role '" + std::string(s) + "'");
}

LaneLayout::LaneLayout(std::vector<Lane> upper, std::vector<Lane> lower)
    : upper_(std::move(upper)), lower_(std::move(lower)) {
  std::set<int> seen;
  for (const auto* lanes : {&upper_, &lower_}) {
    for (const auto& lane : *lanes) {
      if (!seen.insert(lane.id).second) {
        throw LayoutError("lane id " + std::to_string(lane.id) + " appears twice in layout");
      }
    }
  }
}

const Lane* LaneLayout::find(int lane_id) const {
  for (const auto* lanes : {&upper_, &lower_}) {
    for (const auto& lane : *lanes) {
      if (lane.id == lane_id) return &lane;
    }
  }
  return nullptr;
}

std::optional<Direction> LaneLayout::direction_of(int lane_id) const {
  for (const auto& lane : upper_) {
    if (lane.id == lane_id) return Direction::Upper;
  }
  for (const auto& lane : lower_) {
    if (lane.id == lane_id) return Direction::Lower;
  }
  return std::nullopt;
}

int LaneLayout::position(int lane_id) const {
  for (const auto* lanes : {&upper_, &lower_}) {
    for (std::size_t i = 0; i < lanes->size(); ++i) {
      if ((*lanes)[i].id == lane_id) return static_cast<int>(i);
    }
  }
  return -1;
}

std::size_t LaneLayout::through_lane_count(Direction d) const {
  std::size_t n = 0;
  for (const auto& lane : lanes(d)) {
    if (lane.role == LaneRole::Right || lane.role == LaneRole::Middle || lane.role == LaneRole::Left) ++n;
  }
  return n;
}

const FrameState* Track::at(int frame) const {
  if (frames.empty()) return nullptr;
  const long offset = static_cast<long>(frame) - frames.front().frame;
  if (offset < 0 || offset >= static_cast<long>(frames.size())) return nullptr;
  return &frames[static_cast<std::size_t>(offset)];
}

namespace {

// Front bumper in the driving direction from the raw bounding box corner.
// Upper road vehicles move towards -x, so their front is the left edge.
double raw_to_front(double raw_x, double length, Direction d) {
  return d == Direction::Lower ? raw_x + length : -raw_x;
}

double front_to_raw(double front, double length, Direction d) {
  if (d == Direction::Upper) return -front;
  double raw = front - length;
  // Search a few ulps around the naive inverse for a value that maps back
  // exactly; generator output always has one.
  if (raw + length == front) return raw;
  double down = raw;
  double up = raw;
  for (int i = 0; i < 8; ++i) {
    down = std::nextafter(down, -INFINITY);
    up = std::nextafter(up, INFINITY);
    if (down + length == front) return down;
    if (up + length == front) return up;
  }
  return raw;
}

}  // namespace

Track normalize_direction(const Track& track, const LaneLayout& layout) {
  for (const auto& f : track.frames) {
    if (!layout.contains(f.lane_id)) {
      throw LayoutError("track " + std::to_string(track.id) + " frame " + std::to_string(f.frame) +
                        ": lane id " + std::to_string(f.lane_id) + " not in lane layout");
    }
  }
  if (track.normalized) return track;
  Track out = track;
  const double s = track.direction == Direction::Upper ? -1.0 : 1.0;
  for (auto& f : out.frames) {
    f.x = raw_to_front(f.x, track.length, track.direction);
    f.y = s * f.y;
    f.vx = s * f.vx;
    f.vy = s * f.vy;
    f.ax = s * f.ax;
    f.ay = s * f.ay;
  }
  out.normalized = true;
  return out;
}

Track denormalize_direction(const Track& track) {
  if (!track.normalized) return track;
  Track out = track;
  const double s = track.direction == Direction::Upper ? -1.0 : 1.0;
  for (auto& f : out.frames) {
    f.x = front_to_raw(f.x, track.length, track.direction);
    f.y = s * f.y;
    f.vx = s * f.vx;
    f.vy = s * f.vy;
    f.ax = s * f.ax;
    f.ay = s * f.ay;
  }
  out.normalized = false;
  return out;
}

LeaderGap leader_gap(const FrameState& follower, const FrameState& leader, double leader_length, int leader_id) {
  if (follower.frame != leader.frame) {
    throw SyncError("leader gap requested across frames " + std::to_string(follower.frame) + " and " +
                    std::to_string(leader.frame));
  }
  LeaderGap g;
  g.gap = (leader.x - leader_length) - follower.x;
  g.rel_speed = follower.vx - leader.vx;
  g.rel_accel = follower.ax - leader.ax;
  g.leader_id = leader_id;
  return g;
}

double track_duration(const Track& track, double frame_rate) {
  if (track.frames.empty()) return 0.0;
  return (track.last_frame() - track.first_frame() + 1) / frame_rate;
}

bool kinematically_consistent(const FrameState& a, const FrameState& b, double dt, double a_max,
                              double pos_tolerance) {
  const double residual = std::abs(b.x - a.x - a.vx * dt);
  return residual <= 0.5 * a_max * dt * dt + pos_tolerance;
}

TrackIndex::TrackIndex(const Recording& rec) {
  by_id_.reserve(rec.tracks.size());
  for (const auto& t : rec.tracks) by_id_.emplace(t.id, &t);
}

const Track* TrackIndex::find(int id) const {
  auto it = by_id_.find(id);
  return it == by_id_.end() ? nullptr : it->second;
}

}  // namespace trajcrit
