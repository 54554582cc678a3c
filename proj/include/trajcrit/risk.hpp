#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "trajcrit/macro.hpp"
#include "trajcrit/measures.hpp"
#include "trajcrit/model.hpp"
#include "trajcrit/stats.hpp"

namespace trajcrit::risk {

inline constexpr double kGravity = 9.81;   // m/s^2
inline constexpr double kFoot = 0.3048;    // m

// Quantities a rule can refer to, evaluated at one frame.
enum class Var { Thw, Ttc, Dhw, Ettc, Rp, Ax, Ay, V, Vr };
enum class Op { Le, Lt, Ge, Gt };

std::string to_string(Var v);
Var var_from_string(const std::string& s);

struct Clause {
  Var var = Var::Ttc;
  bool abs = false;
  Op op = Op::Le;
  double value = 0.0;  // SI units

  bool holds(double x) const;
};

// The measure whose per-track extremum picks the critical frame.
struct KeyMeasure {
  Var var = Var::Ttc;
  bool abs = false;
  bool maximize = false;
  bool positive_only = false;
};

struct LevelShift {
  std::vector<Clause> when;
  int shift = 0;
};

struct TriggerRule {
  std::string id;
  std::string source;  // benmimoun, cars100 or custom
  int level = 0;
  KeyMeasure key;
  std::vector<Clause> when;  // conjunction
  std::vector<LevelShift> level_shifts;
};

struct RuleSet {
  std::vector<TriggerRule> rules;

  // TTC level 1: TTC <= 1.75 s with braking a_x <= -1.5 m/s^2.
  // THW level 1: THW <= 0.35 s with v_r >= 20 km/h.
  static RuleSet benmimoun();
  // The six longitudinal and lateral triggers of the 100-car study.
  static RuleSet cars100();

  // {"rules": [{"id", "source", "level", "key": {"var", "extremum", "abs"},
  //   "when": [{"var", "op", "value", "unit", "abs"}], "level_shifts": [...]}]}
  // Throws ConfigError on missing or malformed entries.
  static RuleSet from_json(const nlohmann::json& j);
  static RuleSet load(const std::filesystem::path& path);
  nlohmann::json to_json() const;
};

struct Context {
  double v_kmh = 0.0;
  double ax = 0.0;
  double ay = 0.0;
  int frames = 0;
};

inline constexpr double kContextHalfWindow = 0.5;  // s
inline constexpr double kLaneChangeHorizon = 2.0;  // s
inline constexpr double kLaneChangeWindow = 4.0;   // s, both sides

struct RiskEvent {
  int track_id = 0;
  std::string rule_id;
  std::string source;
  int level = 0;
  int critical_frame = 0;
  double key_value = 0.0;
  std::optional<double> thw;
  std::optional<double> ttc;
  std::optional<double> dhw;
  std::optional<double> vr;
  double ax = 0.0;
  double ay = 0.0;
  double v = 0.0;
  Context context;
  bool lane_change_within_2s = false;
  bool lane_change_within_pm4s = false;
};

// Mean speed and accelerations over [frame - 0.5 s, frame + 0.5 s], clipped to
// the track.
Context context_at(const Track& track, int frame, double frame_rate, double half_window = kContextHalfWindow);

// True iff a lane change starts in (frame, frame + horizon]. Changes beyond the
// end of the track are unknowable and count as none.
bool lane_change_after(const std::vector<macro::LaneChangeEvent>& changes, int frame, double frame_rate,
                       double horizon = kLaneChangeHorizon);
// True iff a lane change starts in [frame - window, frame + window].
bool lane_change_around(const std::vector<macro::LaneChangeEvent>& changes, int frame, double frame_rate,
                        double window = kLaneChangeWindow);

// At most one event per rule: the rule is evaluated at the frame where its key
// measure reaches its extremum over the track.
std::vector<RiskEvent> classify(const Track& track, const measures::MeasureSeries& series, const RuleSet& rules,
                                const LaneLayout& layout, double frame_rate);

std::vector<RiskEvent> classify_benmimoun(const Track& track, const measures::MeasureSeries& series,
                                          const LaneLayout& layout, double frame_rate,
                                          const RuleSet& rules = RuleSet::benmimoun());
std::vector<RiskEvent> eval_cars100_triggers(const Track& track, const measures::MeasureSeries& series,
                                             const LaneLayout& layout, double frame_rate);

// Events of every track, ordered by track id then rule order.
std::vector<RiskEvent> classify_recording(const Recording& rec, const std::vector<measures::MeasureSeries>& series,
                                          const RuleSet& rules, unsigned jobs = 0);

void write_events_csv(const std::vector<RiskEvent>& events, const std::filesystem::path& path);

struct Occurrence {
  double bound = 0.0;
  long count = 0;
  double percent = 0.0;
};

struct OccurrenceTable {
  long tracks = 0;
  std::vector<Occurrence> thw;  // min THW <= bound
  std::vector<Occurrence> ttc;  // 0 < min TTC <= bound
};

std::vector<double> default_thw_bounds();
std::vector<double> default_ttc_bounds();

OccurrenceTable count_threshold_occurrences(const std::vector<Track>& tracks, const std::vector<double>& thw_bounds,
                                            const std::vector<double>& ttc_bounds);

enum class Dimension { Velocity, Ax, Ay };
enum class Measure { Thw, Ttc };

std::string to_string(Dimension d);
std::string to_string(Measure m);

// Per-track extreme value of a measure with its surrounding context.
struct ContextSample {
  int track_id = 0;
  double value = 0.0;
  int frame = 0;
  Context context;
};

std::vector<ContextSample> critical_contexts(const Recording& rec, const std::vector<measures::MeasureSeries>& series,
                                             Measure measure);

struct ContextRow {
  double lo = 0.0;  // exclusive
  double hi = 0.0;  // inclusive
  long n = 0;
  std::vector<double> percent;  // sums to 100 when n > 0
};

struct ContextTable {
  Dimension dimension = Dimension::Velocity;
  Measure measure = Measure::Thw;
  stats::HistogramSpec columns;
  std::vector<ContextRow> rows;
};

// Row edges over the measure (rows are (edge_i, edge_i+1]) and saturating
// column bins over the context dimension (km/h or m/s^2).
std::vector<double> default_row_edges(Measure m);
stats::HistogramSpec default_column_spec(Dimension d);

ContextTable context_bins(const std::vector<ContextSample>& samples, Dimension dimension, Measure measure,
                          const std::vector<double>& row_edges, const stats::HistogramSpec& columns);

struct UndercutResult {
  double threshold = 0.9;
  double v_min_kmh = 0.0;
  std::map<int, double> max_duration;  // per undercutting track, s
  long tracks_considered = 0;
  long tracks_undercutting = 0;
  long at_least_1s = 0;
  long above_5s = 0;
  double share_at_least_1s = 0.0;  // of tracks considered
  double share_above_5s = 0.0;
  stats::Histogram histogram;
};

// Longest contiguous car-following stretch (THW < 5 s) with THW <= threshold
// and v >= v_min per track.
UndercutResult thw_undercut_durations(const Recording& rec, const std::vector<measures::MeasureSeries>& series,
                                      double threshold = 0.9, double v_min_kmh = 0.0);

struct BrakeGroupResult {
  double threshold = 0.0;
  long count = 0;
  double share = 0.0;
  std::optional<double> mean_ax;
};

struct Ttc6Result {
  std::vector<int> track_ids;
  long selected = 0;
  BrakeGroupResult negative;  // a_x < 0
  BrakeGroupResult braking;   // a_x < -1.5
};

// Tracks entering TTC in [5.5, 6.5] s and staying in car-following for 4 s;
// each is grouped by its minimum a_x in that window.
Ttc6Result ttc6_brake_analysis(const Recording& rec, const std::vector<measures::MeasureSeries>& series);

struct RpStudyConfig {
  double a = 1.0;
  std::vector<double> b_grid{1, 2, 3, 4, 5, 6, 7, 8, 9, 10};
  std::vector<double> thresholds{0.5, 1.0, 1.5, 2.0, 2.5, 3.0, 3.5, 4.0, 4.5, 5.0};
  double tailgating = 4.0;      // s of unchanged leader on both sides
  double braking_window = 0.2;  // s after the critical frame
  std::vector<double> braking_thresholds{0.0, -1.5};
  double lane_change_window = 4.0;  // s, both sides
  double set_b = 4.0;
  double set_threshold = 2.0;

  void validate() const;
};

struct RpCritical {
  int track_id = 0;
  double rp = 0.0;
  int frame = 0;
  bool tailgating = false;
};

// Argmax of A/THW + B/TTC over closing frames, earliest on ties.
std::optional<RpCritical> rp_critical(const Track& track, const measures::MeasureSeries& series, double a, double b,
                                      double tailgating, double frame_rate);

struct RpBrakeGroup {
  double threshold = 0.0;
  long count = 0;
  double share = 0.0;  // of the set
  long lane_changes = 0;
  double lane_change_share_of_group = 0.0;
  double lane_change_share_of_set = 0.0;
};

struct RpStudyResult {
  RpStudyConfig config;
  // counts[i][j]: tracks with max RP >= thresholds[j] for b_grid[i].
  std::vector<std::vector<long>> counts;
  std::vector<int> set_tracks;
  std::vector<RpBrakeGroup> groups;
};

RpStudyResult rp_study(const Recording& rec, const std::vector<measures::MeasureSeries>& series,
                       const RpStudyConfig& config = {}, unsigned jobs = 0);

}  // namespace trajcrit::risk
