#pragma once

#include <optional>
#include <vector>

#include "trajcrit/model.hpp"

namespace trajcrit::measures {

// Singularity guards: speeds and accelerations below these are treated as zero.
inline constexpr double kSpeedEps = 0.1;   // m/s
inline constexpr double kAccelEps = 0.01;  // m/s^2

struct RpParams {
  double a = 1.0;  // weight of 1/THW
  double b = 4.0;  // weight of 1/TTC [s]
  // When TTC is absent (no closing), report A/THW alone instead of nothing.
  bool thw_only_without_ttc = false;

  // Throws ConfigError unless a >= 0, b >= 0 and a + b > 0.
  void validate() const;
};

// gap / v_follower; absent when the follower is (nearly) standing.
std::optional<double> thw(const LeaderGap& gap, double follower_speed);

// gap / v_rel, signed: positive when closing, negative when the gap opens.
std::optional<double> ttc(const LeaderGap& gap);

// Smallest t > 0 with gap - v_rel t - a_rel t^2 / 2 = 0. Falls back to ttc when
// the relative acceleration is negligible.
std::optional<double> ettc(const LeaderGap& gap);

// A/THW + B/TTC for closing situations (TTC > 0) only.
std::optional<double> rp(std::optional<double> thw, std::optional<double> ttc, const RpParams& params);

// Per-frame criticality measures of one track, aligned with Track::frames.
struct MeasureSeries {
  int track_id = 0;
  std::vector<int> frames;
  std::vector<double> speed;                   // forward speed of the follower
  std::vector<std::optional<int>> leader;      // leader id as ingested
  std::vector<std::optional<double>> dhw;
  std::vector<std::optional<double>> thw;
  std::vector<std::optional<double>> ttc;
  std::vector<std::optional<double>> ettc;
  std::vector<std::optional<double>> rp;
  std::vector<std::optional<double>> rel_speed;
  std::vector<std::optional<double>> rel_accel;
  // Frames where the leader rear is behind the follower front.
  std::vector<int> negative_gap_frames;

  std::size_t size() const { return frames.size(); }
};

// Requires a direction-normalized track. Leaders missing from the index (or
// missing the frame) yield absent measures at that frame.
MeasureSeries compute_series(const Track& track, const TrackIndex& index, const RpParams& params = {});

std::vector<MeasureSeries> compute_all(const Recording& rec, const RpParams& params = {}, unsigned jobs = 0);

struct Extremum {
  double value = 0.0;
  int frame = 0;

  bool operator==(const Extremum&) const = default;
};

struct TrackMinima {
  std::optional<Extremum> thw;  // minimum
  std::optional<Extremum> ttc;  // minimum over strictly positive values
  std::optional<Extremum> dhw;  // minimum
  std::optional<Extremum> rp;   // maximum
};

// Extremes over present values; ties resolve to the earliest frame.
TrackMinima track_minima(const MeasureSeries& series);

// Recomputes Track::min_thw/min_ttc/min_dhw for every track in place.
void attach_minima(Recording& rec);

}  // namespace trajcrit::measures
