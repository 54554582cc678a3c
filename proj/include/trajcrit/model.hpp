#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace trajcrit {

// highD encodes the driving direction as 1 (upper road, vehicles travel towards
// decreasing x) and 2 (lower road, increasing x).
enum class Direction { Upper = 1, Lower = 2 };

enum class VehicleClass { Car, Truck };

enum class LaneRole { Right, Middle, Left, Acceleration, Emergency };

std::string_view to_string(Direction d);
std::string_view to_string(VehicleClass c);
std::string_view to_string(LaneRole r);
LaneRole lane_role_from_string(std::string_view s);

struct Lane {
  int id = 0;
  LaneRole role = LaneRole::Right;
  // Lateral extent in raw image-aligned coordinates; zero when the layout was
  // not derived from lane markings.
  double y_min = 0.0;
  double y_max = 0.0;

  bool operator==(const Lane&) const = default;
};

// Lanes per driving direction, ordered from the rightmost lane (in the sense
// of the driving direction) to the leftmost one.
class LaneLayout {
 public:
  LaneLayout() = default;
  LaneLayout(std::vector<Lane> upper, std::vector<Lane> lower);

  const std::vector<Lane>& lanes(Direction d) const { return d == Direction::Upper ? upper_ : lower_; }
  const Lane* find(int lane_id) const;
  std::optional<Direction> direction_of(int lane_id) const;
  bool contains(int lane_id) const { return find(lane_id) != nullptr; }

  // Index of the lane within its direction, counted from the right. -1 if absent.
  int position(int lane_id) const;

  // Right/middle/left lanes only; acceleration and emergency lanes do not carry
  // through traffic over the whole segment.
  std::size_t through_lane_count(Direction d) const;

  bool operator==(const LaneLayout&) const = default;

 private:
  std::vector<Lane> upper_;
  std::vector<Lane> lower_;
};

// One time step of one vehicle.
//
// Before direction normalization x/y/v/a are raw dataset values: x is the
// left edge of the bounding box, y its top edge. After normalization x is the
// front bumper position measured along the driving direction and every
// longitudinal quantity is positive when pointing forward.
struct FrameState {
  int frame = 0;
  double x = 0.0;
  double y = 0.0;
  double vx = 0.0;
  double vy = 0.0;
  double ax = 0.0;
  double ay = 0.0;
  int lane_id = 0;

  std::optional<int> leader_id;
  std::optional<int> follower_id;
  std::optional<int> left_preceding_id;
  std::optional<int> left_alongside_id;
  std::optional<int> left_following_id;
  std::optional<int> right_preceding_id;
  std::optional<int> right_alongside_id;
  std::optional<int> right_following_id;

  // As ingested. The dataset writes 0 for "no leader"; that maps to nullopt.
  std::optional<double> dhw_raw;
  std::optional<double> thw_raw;
  std::optional<double> ttc_raw;

  bool operator==(const FrameState&) const = default;
};

struct Track {
  int id = 0;
  VehicleClass vehicle_class = VehicleClass::Car;
  double length = 0.0;
  double width = 0.0;
  Direction direction = Direction::Lower;
  std::vector<FrameState> frames;

  bool normalized = false;
  bool last_frame_trimmed = false;

  // Recomputed from the frames, never copied from the dataset meta table.
  std::optional<double> min_thw;
  std::optional<double> min_ttc;
  std::optional<double> min_dhw;

  int first_frame() const { return frames.front().frame; }
  int last_frame() const { return frames.back().frame; }

  // Frames have unit stride, so lookup is constant time.
  const FrameState* at(int frame) const;

  bool operator==(const Track&) const = default;
};

struct RecordingInfo {
  int id = 0;
  double frame_rate = 25.0;
  int location_id = 1;
  // m/s; nullopt means no limit.
  std::optional<double> speed_limit;
  std::string month;
  std::string weekday;
  std::string start_time;
  double duration = 0.0;
  double total_driven_distance = 0.0;
  double total_driven_time = 0.0;
  int num_vehicles = 0;
  int num_cars = 0;
  int num_trucks = 0;
  std::vector<double> upper_lane_markings;
  std::vector<double> lower_lane_markings;

  bool operator==(const RecordingInfo&) const = default;
};

// The observed road segment in raw x. In normalized coordinates the lower road
// spans [start, end] and the upper road [-end, -start].
struct Segment {
  double start = 0.0;
  double end = 0.0;

  double length() const { return end - start; }
  double lo(Direction d) const { return d == Direction::Lower ? start : -end; }
  double hi(Direction d) const { return d == Direction::Lower ? end : -start; }
  double midpoint(Direction d) const { return 0.5 * (lo(d) + hi(d)); }

  bool operator==(const Segment&) const = default;
};

struct Recording {
  RecordingInfo info;
  LaneLayout layout;
  Segment segment;
  std::vector<Track> tracks;

  double dt() const { return 1.0 / info.frame_rate; }
  // Seconds since recording start; highD frames are 1-based.
  double time_of(int frame) const { return (frame - 1) / info.frame_rate; }

  bool operator==(const Recording&) const = default;
};

// Bumper-to-bumper relation between a follower and its leader at one frame.
struct LeaderGap {
  double gap = 0.0;            // leader rear minus follower front [m]
  double rel_speed = 0.0;      // v_follower - v_leader, positive when closing [m/s]
  double rel_accel = 0.0;      // a_follower - a_leader [m/s^2]
  int leader_id = 0;

  bool valid() const { return gap >= 0.0; }
};

// Expresses longitudinal quantities along the driving direction. Idempotent.
// Throws LayoutError if a frame references a lane that is not in the layout.
Track normalize_direction(const Track& track, const LaneLayout& layout);

// Inverse of normalize_direction for the writer. The returned raw x is chosen
// so that normalizing it again reproduces the input bit for bit.
Track denormalize_direction(const Track& track);

// Throws SyncError when the two frames are not at the same time step.
LeaderGap leader_gap(const FrameState& follower, const FrameState& leader, double leader_length,
                     int leader_id = 0);

double track_duration(const Track& track, double frame_rate);

// Kinematic consistency of a frame pair: the position advance must match the
// speed within the acceleration envelope plus a position tolerance.
bool kinematically_consistent(const FrameState& a, const FrameState& b, double dt, double a_max,
                              double pos_tolerance = 0.5);

// Id -> track lookup over a recording that outlives the index.
class TrackIndex {
 public:
  explicit TrackIndex(const Recording& rec);
  const Track* find(int id) const;

 private:
  std::unordered_map<int, const Track*> by_id_;
};

}  // namespace trajcrit
