#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "trajcrit/macro.hpp"
#include "trajcrit/model.hpp"

namespace trajcrit::synth {

// Constant acceleration for a duration. A vehicle braking to standstill stays
// at rest for the remainder of the phase.
struct Phase {
  double duration = 0.0;
  double accel = 0.0;
};

struct LaneStep {
  double time = 0.0;  // s since recording start
  int lane_id = 0;
};

struct VehicleScript {
  int id = 0;
  VehicleClass vehicle_class = VehicleClass::Car;
  double length = 4.5;
  double width = 1.8;
  Direction direction = Direction::Lower;
  int lane_id = 0;  // 0 picks the rightmost through lane
  double s0 = 0.0;  // front bumper, m past the segment entry, at t_start
  double v0 = 0.0;
  std::vector<Phase> phases;   // longitudinal, then constant speed
  std::vector<Phase> lateral;  // acceleration along raw +y
  std::vector<LaneStep> lane_changes;
  double t_start = 0.0;
  std::optional<double> t_end;
  // Only frames with the bounding box overlapping the segment are kept.
  bool clip_to_view = false;
};

struct ScenarioScript {
  std::string kind = "custom";
  std::uint64_t seed = 1;
  int recording_id = 1;
  int location_id = 1;
  double frame_rate = 25.0;
  double duration = 60.0;
  double segment_length = 400.0;
  std::vector<VehicleScript> vehicles;
};

struct Motion {
  double s = 0.0;  // front bumper past the segment entry
  double v = 0.0;
  double a = 0.0;
};

// Closed-form longitudinal state at absolute time t (t >= t_start).
Motion longitudinal(const VehicleScript& v, double t);

struct GroundTruth {
  // Direction normalized, last frame not trimmed, minima attached. Raw
  // dhw/thw/ttc columns hold the headway measures of the generated positions.
  Recording recording;
  std::vector<macro::LaneChangeEvent> lane_changes;
};

// Throws GenerationError for inconsistent scripts (negative speed, overlapping
// vehicles, unknown lanes).
GroundTruth generate(const ScenarioScript& script);

// Writes XX_recordingMeta.csv, XX_tracksMeta.csv and XX_tracks.csv. Meta
// minima exclude each track's last frame, as in the dataset.
void write_dataset(const Recording& recording, const std::filesystem::path& dir);

struct PlatoonParams {
  int vehicles = 5;  // 0: endless stream over the whole recording
  double speed = 25.0;
  double spacing = 50.0;  // front to front
  double length = 4.5;
  double duration = 300.0;
  double segment_length = 400.0;
  Direction direction = Direction::Lower;
};

struct ClosingParams {
  double follower_speed = 30.0;
  double leader_speed = 20.0;
  double gap = 100.0;
  double duration = 8.0;
  double length = 4.5;
};

struct LaneChangeParams {
  double speed = 30.0;
  double change_time = 3.0;
  double duration = 8.0;
  double leader_gap = 40.0;
  double target_leader_gap = 70.0;
};

struct StopAndGoParams {
  double speed = 20.0;
  double gap = 30.0;
  double decel = -3.0;
  double accel = 2.0;
  double reaction = 1.0;  // follower lag behind the leader's phases
  double duration = 20.0;
};

struct MixedTrafficParams {
  int vehicles = 200;
  std::vector<double> lane_speeds{22.0, 28.0, 34.0};  // right to left, m/s
  double truck_share = 0.15;
  double min_headway = 1.2;   // s
  double mean_extra_headway = 2.0;  // s, exponential
  double segment_length = 400.0;
  bool both_directions = true;
};

ScenarioScript constant_platoon(const PlatoonParams& p = {});
ScenarioScript closing(const ClosingParams& p = {});
ScenarioScript lane_change(const LaneChangeParams& p = {});
ScenarioScript stop_and_go(const StopAndGoParams& p = {});
ScenarioScript mixed_traffic(const MixedTrafficParams& p = {}, std::uint64_t seed = 1);

std::vector<std::string> scenario_kinds();

// Builds a scenario by name with optional parameter overrides; "custom" reads
// a full script. Throws ConfigError for unknown kinds or parameters.
ScenarioScript make_scenario(const std::string& kind, const nlohmann::json& params = nlohmann::json::object(),
                             std::uint64_t seed = 1);

ScenarioScript script_from_json(const nlohmann::json& j);
nlohmann::json script_to_json(const ScenarioScript& s);

}  // namespace trajcrit::synth
