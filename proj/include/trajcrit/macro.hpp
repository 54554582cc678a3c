#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "trajcrit/measures.hpp"
#include "trajcrit/model.hpp"

namespace trajcrit::macro {

// Half-open time window in seconds since recording start.
struct Window {
  double t0 = 0.0;
  double t1 = 60.0;

  double hours() const { return (t1 - t0) / 3600.0; }
};

// Frames of the recording in [first, last). Throws EmptySliceError when the
// window holds no recorded frame.
struct FrameRange {
  int first = 1;
  int last = 1;
};
FrameRange frames_in(const Recording& rec, const Window& w);

// Last recorded frame, from the meta duration or the tracks, whichever is later.
int recording_frame_count(const Recording& rec);

// Lanes used to normalize per-lane quantities: through lanes, falling back to
// every lane of the road.
std::size_t lane_count(const Recording& rec, Direction d);

// Front bumpers crossing reference_x (default: segment midpoint) within the
// window, in veh/h per lane.
double flow_rate(const Recording& rec, Direction d, const Window& w, std::optional<double> reference_x = std::nullopt);

struct DensityResult {
  double rho = 0.0;               // veh/km per lane, time averaged
  double mean_vehicles = 0.0;     // vehicles in segment, time averaged
  std::optional<double> rho_a;    // vehicle equivalents in the segment
  std::optional<double> rho_a_per_km;  // per lane
  long pairs = 0;                 // follower-leader samples behind rho_a
};

DensityResult density(const Recording& rec, Direction d, const Window& w);

// l_r / mean(l_n + DHW_n).
double length_adjusted_density(double segment_length, double mean_length_plus_gap);

enum class SpeedMode { TimeMean, SpaceMean };

// km/h. Time mean over vehicles crossing the reference point, space mean as
// the average over frames of the mean speed in the segment. Absent when no
// vehicle qualifies.
std::optional<double> mean_speed(const Recording& rec, Direction d, const Window& w, SpeedMode mode,
                                 std::optional<double> reference_x = std::nullopt);

enum class ChangeSide { Leftward, Rightward };
std::string to_string(ChangeSide s);

struct LaneChangeEvent {
  int track_id = 0;
  int frame = 0;  // first frame on the new lane
  int from_lane = 0;
  int to_lane = 0;
  ChangeSide side = ChangeSide::Leftward;
  Direction direction = Direction::Lower;

  bool operator==(const LaneChangeEvent&) const = default;
};

struct LaneAnomaly {
  int track_id = 0;
  int frame = 0;
  int from_lane = 0;
  int to_lane = 0;
  std::string reason;
};

struct LaneChangeDetection {
  std::vector<LaneChangeEvent> events;
  std::vector<LaneAnomaly> anomalies;
};

inline constexpr double kDebounceSeconds = 0.5;

// One event per transition between adjacent lanes of the same road. Short
// excursions that return to the same lane within the debounce window are
// dropped. Transitions that skip a lane are reported as anomalies instead.
LaneChangeDetection detect_lane_changes(const Track& track, const LaneLayout& layout, double frame_rate,
                                        double debounce = kDebounceSeconds);

LaneChangeDetection detect_all_lane_changes(const Recording& rec, unsigned jobs = 0);

// events / (lanes * hours * km).
double lane_change_rate(long events, std::size_t lanes, double hours, double km);

struct MinuteSlice {
  int recording_id = 0;
  Direction direction = Direction::Lower;
  Window window;
  double q = 0.0;
  double rho = 0.0;
  std::optional<double> rho_a;
  std::optional<double> rho_a_per_km;
  std::optional<double> v_mean_time;
  std::optional<double> v_mean_space;
  std::optional<double> thw_mean;
  std::optional<double> thw_mean_car;
  std::optional<double> thw_mean_truck;
  long lane_change_count = 0;
  double lane_change_rate = 0.0;
  std::optional<double> truck_share;
  long vehicles = 0;
};

// Car-following frames for the mean THW.
inline constexpr double kCarFollowingThw = 5.0;

// floor(duration / 60) slices per road, aligned to the recording start.
std::vector<MinuteSlice> minute_slices(const Recording& rec, const std::vector<measures::MeasureSeries>& series,
                                       const std::vector<LaneChangeEvent>& events, unsigned jobs = 0);
std::vector<MinuteSlice> minute_slices(const Recording& rec, unsigned jobs = 0);

struct LaneLoad {
  Direction direction = Direction::Lower;
  int lane_id = 0;
  LaneRole role = LaneRole::Right;
  long frames = 0;
  double share = 0.0;
  double q = 0.0;  // veh/h crossing the midpoint on this lane
};

std::vector<LaneLoad> lane_load(const Recording& rec);

struct PairCount {
  int from_lane = 0;
  int to_lane = 0;
  long count = 0;
  double rate = 0.0;  // per hour and km
};

struct OriginRate {
  int lane_id = 0;
  long count = 0;
  double rate = 0.0;  // per hour and km on the origin lane
};

struct LaneChangeRates {
  Direction direction = Direction::Lower;
  std::size_t lanes = 0;
  double hours = 0.0;
  double km = 0.0;
  long events = 0;
  double rate = 0.0;  // per lane, hour and km
  std::vector<OriginRate> by_origin;
  std::vector<PairCount> by_pair;
};

// Rates over the slices' total duration; events outside any slice are ignored.
std::vector<LaneChangeRates> lane_change_rates(const Recording& rec, const std::vector<MinuteSlice>& slices,
                                               const std::vector<LaneChangeEvent>& events);

struct Point2 {
  double x = 0.0;
  double y = 0.0;
};

struct TriangularFit {
  double apex_x = 0.0;
  double apex_y = 0.0;
  double left_zero_x = 0.0;
  double right_zero_x = 0.0;
  double coverage = 0.0;
  long enclosed = 0;
  long n = 0;
  double area() const { return 0.5 * (right_zero_x - left_zero_x) * apex_y; }
};

struct TentGridOptions {
  int apex_x_steps = 201;
  int apex_y_steps = 201;
  int zero_steps = 101;
};

// Candidate values searched by triangular_fit.
struct TentGrid {
  std::vector<double> apex_x;
  std::vector<double> apex_y;
  std::vector<double> left;
  std::vector<double> right;
};

TentGrid tent_grid(const std::vector<Point2>& points, const TentGridOptions& options = {});

// y <= tent(x), with tent zero outside [left, right].
bool tent_encloses(double apex_x, double apex_y, double left, double right, const Point2& p);

// Minimal-area tent over the grid enclosing at least `coverage_target` of the
// points. Throws SpecError for fewer than 3 points or a target outside (0, 1].
TriangularFit triangular_fit(const std::vector<Point2>& points, double coverage_target,
                             const TentGridOptions& options = {});

struct FundamentalPoint {
  Direction direction = Direction::Lower;
  double t0 = 0.0;
  double rho = 0.0;
  double q = 0.0;
  std::optional<double> v;  // space mean, km/h
};

std::vector<FundamentalPoint> fundamental_points(const std::vector<MinuteSlice>& slices);

}  // namespace trajcrit::macro
