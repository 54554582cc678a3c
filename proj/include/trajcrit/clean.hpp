#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "trajcrit/model.hpp"

namespace trajcrit::clean {

// Rule ids attached to every discard or flag.
inline constexpr const char* kTrimEmpty = "TRIM_EMPTY";
inline constexpr const char* kNegativeThw = "R1_NEGATIVE_THW";
inline constexpr const char* kAcceleration = "R2_ACCELERATION";
inline constexpr const char* kKinematics = "R3_KINEMATICS";
inline constexpr const char* kDirection = "R4_DIRECTION";
inline constexpr const char* kTtcReview = "TTC_REVIEW";

struct RuleConfig {
  double ax_cap = 8.0;  // m/s^2
  double ay_cap = 4.0;  // m/s^2
  // Tracks with more violating frame pairs than this are discarded.
  int max_kinematic_violations = 3;
  double kinematic_pos_tolerance = 0.5;  // m
  double standstill_speed = 1.0 / 3.6;   // m/s
  // Kept tracks whose minimum positive TTC is at or below this are flagged.
  double ttc_review = 0.8;  // s
};

struct Discard {
  int track_id = 0;
  std::string rule_id;
  int frame = 0;
  double value = 0.0;
  std::string evidence;
};

struct Flag {
  int track_id = 0;
  std::string rule_id;
  int frame = 0;
  double value = 0.0;
};

struct CleanReport {
  long tracks_in = 0;
  long tracks_out = 0;
  std::vector<Discard> discarded;  // sorted by track id
  long frames_trimmed = 0;
  long vehicles_without_leader = 0;
  std::vector<Flag> flagged;  // sorted by track id
};

// Drops the corrupted final time step, once per track. Returns nullopt when
// nothing would remain.
std::optional<Track> trim_last_frame(const Track& track);

// Checks one trimmed track against R1-R4. Pure.
std::optional<Discard> check_track(const Track& track, const LaneLayout& layout, double dt, const RuleConfig& rules);

// Discards tracks matching any rule and flags suspiciously low TTC. Expects
// trimmed tracks.
std::pair<Recording, CleanReport> apply_filters(const Recording& rec, const RuleConfig& rules = {}, unsigned jobs = 0);

// Tracks that never have a leader id.
long count_leaderless(const Recording& rec);

// Trim, filter, count leaderless vehicles and refresh per-track minima.
std::pair<Recording, CleanReport> clean_recording(const Recording& rec, const RuleConfig& rules = {}, unsigned jobs = 0);

// track_id,rule,frame,value for manual review.
void write_flagged_csv(const CleanReport& report, const std::filesystem::path& path);

}  // namespace trajcrit::clean
