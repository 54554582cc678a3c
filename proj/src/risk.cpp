#include "trajcrit/risk.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "csv.hpp"
#include "trajcrit/error.hpp"
#include "trajcrit/parallel.hpp"

namespace trajcrit::risk {

using nlohmann::json;

std::string to_string(Var v) {
  switch (v) {
    case Var::Thw: return "thw";
    case Var::Ttc: return "ttc";
    case Var::Dhw: return "dhw";
    case Var::Ettc: return "ettc";
    case Var::Rp: return "rp";
    case Var::Ax: return "ax";
    case Var::Ay: return "ay";
    case Var::V: return "v";
    case Var::Vr: return "vr";
  }
  return "ttc";
}

Var var_from_string(const std::string& s) {
  for (Var v : {Var::Thw, Var::Ttc, Var::Dhw, Var::Ettc, Var::Rp, Var::Ax, Var::Ay, Var::V, Var::Vr}) {
    if (to_string(v) == s) return v;
  }
  throw ConfigError("unknown rule variable '" + s + "'");
}

bool Clause::holds(double x) const {
  switch (op) {
    case Op::Le: return x <= value;
    case Op::Lt: return x < value;
    case Op::Ge: return x >= value;
    case Op::Gt: return x > value;
  }
  return false;
}

namespace {

std::string op_string(Op op) {
  switch (op) {
    case Op::Le: return "<=";
    case Op::Lt: return "<";
    case Op::Ge: return ">=";
    case Op::Gt: return ">";
  }
  return "<=";
}

Op op_from_string(const std::string& s) {
  if (s == "<=") return Op::Le;
  if (s == "<") return Op::Lt;
  if (s == ">=") return Op::Ge;
  if (s == ">") return Op::Gt;
  throw ConfigError("unknown comparison '" + s + "'");
}

double unit_factor(const std::string& unit) {
  if (unit.empty() || unit == "s" || unit == "m" || unit == "m/s" || unit == "m/s^2") return 1.0;
  if (unit == "g") return kGravity;
  if (unit == "km/h") return 1.0 / 3.6;
  if (unit == "ft") return kFoot;
  throw ConfigError("unknown unit '" + unit + "'");
}

Clause clause(Var var, Op op, double value, bool abs = false) { return Clause{var, abs, op, value}; }

KeyMeasure key_min_positive_ttc() { return KeyMeasure{Var::Ttc, false, false, true}; }

template <typename T>
T require(const json& j, const char* field, const std::string& where) {
  if (!j.is_object() || !j.contains(field)) throw ConfigError(where + ": missing '" + field + "'");
  try {
    return j.at(field).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(where + ": bad '" + field + "': " + e.what());
  }
}

std::vector<Clause> clauses_from_json(const json& arr, const std::string& where) {
  if (!arr.is_array() || arr.empty()) throw ConfigError(where + ": 'when' must be a non-empty array");
  std::vector<Clause> out;
  for (const auto& c : arr) {
    Clause cl;
    cl.var = var_from_string(require<std::string>(c, "var", where));
    cl.op = op_from_string(require<std::string>(c, "op", where));
    const double value = require<double>(c, "value", where);
    const std::string unit = c.value("unit", std::string());
    cl.value = value * unit_factor(unit);
    cl.abs = c.value("abs", false);
    if (!std::isfinite(cl.value)) throw ConfigError(where + ": threshold must be finite");
    out.push_back(cl);
  }
  return out;
}

json clauses_to_json(const std::vector<Clause>& cs) {
  json arr = json::array();
  for (const auto& c : cs) {
    arr.push_back({{"var", to_string(c.var)}, {"op", op_string(c.op)}, {"value", c.value}, {"abs", c.abs}});
  }
  return arr;
}

}  // namespace

RuleSet RuleSet::benmimoun() {
  RuleSet rs;
  rs.rules.push_back({"benmimoun_ttc_1", "benmimoun", 1, key_min_positive_ttc(),
                      {clause(Var::Ttc, Op::Le, 1.75), clause(Var::Ax, Op::Le, -1.5)}, {}});
  rs.rules.push_back({"benmimoun_thw_1", "benmimoun", 1, KeyMeasure{Var::Thw, false, false, false},
                      {clause(Var::Thw, Op::Le, 0.35), clause(Var::Vr, Op::Ge, 20.0 / 3.6)}, {}});
  return rs;
}

RuleSet RuleSet::cars100() {
  const double g = kGravity;
  const double ft100 = 100.0 * kFoot;
  RuleSet rs;
  rs.rules.push_back({"cars100_ay", "cars100", 0, KeyMeasure{Var::Ay, true, true, false},
                      {clause(Var::Ay, Op::Ge, 0.7 * g, true)}, {}});
  rs.rules.push_back({"cars100_ax", "cars100", 0, KeyMeasure{Var::Ax, true, true, false},
                      {clause(Var::Ax, Op::Ge, 0.6 * g, true)}, {}});
  rs.rules.push_back({"cars100_ttc_accel", "cars100", 0, key_min_positive_ttc(),
                      {clause(Var::Ttc, Op::Le, 4.0), clause(Var::Ax, Op::Ge, 0.5 * g)}, {}});
  rs.rules.push_back({"cars100_ttc_brake", "cars100", 0, key_min_positive_ttc(),
                      {clause(Var::Ttc, Op::Le, 4.0), clause(Var::Ax, Op::Le, -0.5 * g)}, {}});
  rs.rules.push_back({"cars100_ttc_accel_close", "cars100", 0, key_min_positive_ttc(),
                      {clause(Var::Ttc, Op::Le, 4.0), clause(Var::Ax, Op::Ge, 0.4 * g), clause(Var::Ax, Op::Le, 0.5 * g),
                       clause(Var::Dhw, Op::Le, ft100)},
                      {}});
  rs.rules.push_back({"cars100_ttc_brake_close", "cars100", 0, key_min_positive_ttc(),
                      {clause(Var::Ttc, Op::Le, 4.0), clause(Var::Ax, Op::Le, -0.4 * g), clause(Var::Ax, Op::Ge, -0.5 * g),
                       clause(Var::Dhw, Op::Le, ft100)},
                      {}});
  return rs;
}

RuleSet RuleSet::from_json(const json& j) {
  if (!j.is_object() || !j.contains("rules") || !j.at("rules").is_array()) {
    throw ConfigError("rule set needs a 'rules' array");
  }
  RuleSet rs;
  for (const auto& r : j.at("rules")) {
    TriggerRule rule;
    rule.id = require<std::string>(r, "id", "rule");
    const std::string where = "rule '" + rule.id + "'";
    rule.source = r.value("source", std::string("custom"));
    rule.level = r.value("level", 0);
    const json& key = r.contains("key") ? r.at("key") : json();
    rule.key.var = var_from_string(require<std::string>(key, "var", where + " key"));
    const std::string ext = key.value("extremum", std::string("min"));
    if (ext != "min" && ext != "max") throw ConfigError(where + ": extremum must be 'min' or 'max'");
    rule.key.maximize = ext == "max";
    rule.key.abs = key.value("abs", false);
    rule.key.positive_only = key.value("positive_only", rule.key.var == Var::Ttc || rule.key.var == Var::Ettc);
    rule.when = clauses_from_json(r.contains("when") ? r.at("when") : json(), where);
    if (r.contains("level_shifts")) {
      for (const auto& s : r.at("level_shifts")) {
        LevelShift ls;
        ls.when = clauses_from_json(s.contains("when") ? s.at("when") : json(), where + " level shift");
        ls.shift = require<int>(s, "shift", where + " level shift");
        rule.level_shifts.push_back(std::move(ls));
      }
    }
    rs.rules.push_back(std::move(rule));
  }
  for (std::size_t i = 0; i < rs.rules.size(); ++i) {
    for (std::size_t k = i + 1; k < rs.rules.size(); ++k) {
      if (rs.rules[i].id == rs.rules[k].id) throw ConfigError("duplicate rule id '" + rs.rules[i].id + "'");
    }
  }
  return rs;
}

RuleSet RuleSet::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read rule file " + path.string());
  try {
    return from_json(json::parse(in));
  } catch (const json::parse_error& e) {
    throw ConfigError("rule file " + path.string() + ": " + e.what());
  }
}

json RuleSet::to_json() const {
  json arr = json::array();
  for (const auto& r : rules) {
    json shifts = json::array();
    for (const auto& s : r.level_shifts) shifts.push_back({{"when", clauses_to_json(s.when)}, {"shift", s.shift}});
    arr.push_back({{"id", r.id},
                   {"source", r.source},
                   {"level", r.level},
                   {"key",
                    {{"var", to_string(r.key.var)},
                     {"extremum", r.key.maximize ? "max" : "min"},
                     {"abs", r.key.abs},
                     {"positive_only", r.key.positive_only}}},
                   {"when", clauses_to_json(r.when)},
                   {"level_shifts", shifts}});
  }
  return json{{"rules", arr}};
}

Context context_at(const Track& track, int frame, double frame_rate, double half_window) {
  const int half = static_cast<int>(std::floor(half_window * frame_rate + 1e-9));
  Context c;
  double v = 0.0, ax = 0.0, ay = 0.0;
  for (int f = frame - half; f <= frame + half; ++f) {
    const FrameState* s = track.at(f);
    if (!s) continue;
    v += s->vx;
    ax += s->ax;
    ay += s->ay;
    ++c.frames;
  }
  if (c.frames > 0) {
    c.v_kmh = v / c.frames * 3.6;
    c.ax = ax / c.frames;
    c.ay = ay / c.frames;
  }
  return c;
}

bool lane_change_after(const std::vector<macro::LaneChangeEvent>& changes, int frame, double frame_rate,
                       double horizon) {
  const double span = horizon * frame_rate + 1e-9;
  return std::any_of(changes.begin(), changes.end(), [&](const macro::LaneChangeEvent& e) {
    return e.frame > frame && static_cast<double>(e.frame - frame) <= span;
  });
}

bool lane_change_around(const std::vector<macro::LaneChangeEvent>& changes, int frame, double frame_rate,
                        double window) {
  const double span = window * frame_rate + 1e-9;
  return std::any_of(changes.begin(), changes.end(), [&](const macro::LaneChangeEvent& e) {
    return std::abs(static_cast<double>(e.frame - frame)) <= span;
  });
}

namespace {

std::optional<double> value_at(const Track& t, const measures::MeasureSeries& s, std::size_t i, Var var) {
  switch (var) {
    case Var::Thw: return s.thw[i];
    case Var::Ttc: return s.ttc[i];
    case Var::Dhw: return s.dhw[i];
    case Var::Ettc: return s.ettc[i];
    case Var::Rp: return s.rp[i];
    case Var::Vr: return s.rel_speed[i];
    case Var::Ax: return t.frames[i].ax;
    case Var::Ay: return t.frames[i].ay;
    case Var::V: return t.frames[i].vx;
  }
  return std::nullopt;
}

bool all_hold(const Track& t, const measures::MeasureSeries& s, std::size_t i, const std::vector<Clause>& cs) {
  for (const auto& c : cs) {
    auto v = value_at(t, s, i, c.var);
    if (!v) return false;
    if (!c.holds(c.abs ? std::abs(*v) : *v)) return false;
  }
  return true;
}

std::optional<std::size_t> key_frame(const Track& t, const measures::MeasureSeries& s, const KeyMeasure& key,
                                     double& key_value) {
  std::optional<std::size_t> best;
  for (std::size_t i = 0; i < s.size(); ++i) {
    auto v = value_at(t, s, i, key.var);
    if (!v) continue;
    const double x = key.abs ? std::abs(*v) : *v;
    if (key.positive_only && !(x > 0.0)) continue;
    if (!best || (key.maximize ? x > key_value : x < key_value)) {
      best = i;
      key_value = x;
    }
  }
  return best;
}

void check_alignment(const Track& track, const measures::MeasureSeries& series) {
  if (series.track_id != track.id || series.size() != track.frames.size()) {
    throw SyncError("measure series does not belong to track " + std::to_string(track.id));
  }
}

}  // namespace

std::vector<RiskEvent> classify(const Track& track, const measures::MeasureSeries& series, const RuleSet& rules,
                                const LaneLayout& layout, double frame_rate) {
  check_alignment(track, series);
  std::vector<RiskEvent> out;
  std::optional<std::vector<macro::LaneChangeEvent>> changes;
  for (const auto& rule : rules.rules) {
    double key_value = 0.0;
    const auto i = key_frame(track, series, rule.key, key_value);
    if (!i || !all_hold(track, series, *i, rule.when)) continue;
    if (!changes) changes = macro::detect_lane_changes(track, layout, frame_rate).events;
    const FrameState& f = track.frames[*i];
    RiskEvent e;
    e.track_id = track.id;
    e.rule_id = rule.id;
    e.source = rule.source;
    e.level = rule.level;
    for (const auto& s : rule.level_shifts) {
      if (all_hold(track, series, *i, s.when)) e.level += s.shift;
    }
    e.critical_frame = f.frame;
    e.key_value = key_value;
    e.thw = series.thw[*i];
    e.ttc = series.ttc[*i];
    e.dhw = series.dhw[*i];
    e.vr = series.rel_speed[*i];
    e.ax = f.ax;
    e.ay = f.ay;
    e.v = f.vx;
    e.context = context_at(track, f.frame, frame_rate);
    e.lane_change_within_2s = lane_change_after(*changes, f.frame, frame_rate);
    e.lane_change_within_pm4s = lane_change_around(*changes, f.frame, frame_rate);
    out.push_back(std::move(e));
  }
  return out;
}

std::vector<RiskEvent> classify_benmimoun(const Track& track, const measures::MeasureSeries& series,
                                          const LaneLayout& layout, double frame_rate, const RuleSet& rules) {
  return classify(track, series, rules, layout, frame_rate);
}

std::vector<RiskEvent> eval_cars100_triggers(const Track& track, const measures::MeasureSeries& series,
                                             const LaneLayout& layout, double frame_rate) {
  static const RuleSet rules = RuleSet::cars100();
  return classify(track, series, rules, layout, frame_rate);
}

namespace {

std::vector<const measures::MeasureSeries*> align(const Recording& rec, const std::vector<measures::MeasureSeries>& series) {
  std::map<int, const measures::MeasureSeries*> by_id;
  for (const auto& s : series) by_id[s.track_id] = &s;
  std::vector<const measures::MeasureSeries*> out(rec.tracks.size(), nullptr);
  for (std::size_t k = 0; k < rec.tracks.size(); ++k) {
    auto it = by_id.find(rec.tracks[k].id);
    if (it == by_id.end()) throw SyncError("no measure series for track " + std::to_string(rec.tracks[k].id));
    check_alignment(rec.tracks[k], *it->second);
    out[k] = it->second;
  }
  return out;
}

}  // namespace

std::vector<RiskEvent> classify_recording(const Recording& rec, const std::vector<measures::MeasureSeries>& series,
                                          const RuleSet& rules, unsigned jobs) {
  const auto aligned = align(rec, series);
  std::vector<std::vector<RiskEvent>> per(rec.tracks.size());
  parallel_for(rec.tracks.size(), jobs, [&](std::size_t k) {
    per[k] = classify(rec.tracks[k], *aligned[k], rules, rec.layout, rec.info.frame_rate);
  });
  std::vector<std::size_t> order(rec.tracks.size());
  for (std::size_t k = 0; k < order.size(); ++k) order[k] = k;
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return rec.tracks[a].id < rec.tracks[b].id; });
  std::vector<RiskEvent> out;
  for (std::size_t k : order) out.insert(out.end(), per[k].begin(), per[k].end());
  return out;
}

void write_events_csv(const std::vector<RiskEvent>& events, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  auto opt = [](const std::optional<double>& v) { return v ? csv::format(*v) : std::string(); };
  out << "track_id,rule_id,source,level,frame,value,thw,ttc,dhw,v_kmh_mean,ax_mean,ay_mean,lane_change_2s,lane_change_pm4s\n";
  for (const auto& e : events) {
    out << e.track_id << ',' << e.rule_id << ',' << e.source << ',' << e.level << ',' << e.critical_frame << ','
        << csv::format(e.key_value) << ',' << opt(e.thw) << ',' << opt(e.ttc) << ',' << opt(e.dhw) << ','
        << csv::format(e.context.v_kmh) << ',' << csv::format(e.context.ax) << ',' << csv::format(e.context.ay) << ','
        << (e.lane_change_within_2s ? 1 : 0) << ',' << (e.lane_change_within_pm4s ? 1 : 0) << '\n';
  }
}

std::vector<double> default_thw_bounds() { return {2.0, 1.0, 2.0 / 3.0, 0.5, 0.4, 0.25, 0.2}; }
std::vector<double> default_ttc_bounds() { return {8.0, 4.0, 2.0, 1.0, 0.8, 0.4, 0.2}; }

OccurrenceTable count_threshold_occurrences(const std::vector<Track>& tracks, const std::vector<double>& thw_bounds,
                                            const std::vector<double>& ttc_bounds) {
  OccurrenceTable t;
  t.tracks = static_cast<long>(tracks.size());
  auto pct = [&](long c) { return t.tracks > 0 ? 100.0 * static_cast<double>(c) / static_cast<double>(t.tracks) : 0.0; };
  for (double b : thw_bounds) {
    long c = 0;
    for (const auto& tr : tracks) c += tr.min_thw && *tr.min_thw <= b;
    t.thw.push_back({b, c, pct(c)});
  }
  for (double b : ttc_bounds) {
    long c = 0;
    for (const auto& tr : tracks) c += tr.min_ttc && *tr.min_ttc > 0.0 && *tr.min_ttc <= b;
    t.ttc.push_back({b, c, pct(c)});
  }
  return t;
}

std::string to_string(Dimension d) {
  switch (d) {
    case Dimension::Velocity: return "velocity";
    case Dimension::Ax: return "ax";
    case Dimension::Ay: return "ay";
  }
  return "velocity";
}

std::string to_string(Measure m) { return m == Measure::Thw ? "thw" : "ttc"; }

std::vector<ContextSample> critical_contexts(const Recording& rec, const std::vector<measures::MeasureSeries>& series,
                                             Measure measure) {
  const auto aligned = align(rec, series);
  std::vector<ContextSample> out;
  for (std::size_t k = 0; k < rec.tracks.size(); ++k) {
    const auto m = measures::track_minima(*aligned[k]);
    const auto& ex = measure == Measure::Thw ? m.thw : m.ttc;
    if (!ex) continue;
    out.push_back({rec.tracks[k].id, ex->value, ex->frame, context_at(rec.tracks[k], ex->frame, rec.info.frame_rate)});
  }
  return out;
}

std::vector<double> default_row_edges(Measure m) {
  if (m == Measure::Thw) return {0.0, 0.2, 0.4, 0.6, 0.8, 1.0};
  return {0.0, 1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0};
}

stats::HistogramSpec default_column_spec(Dimension d) {
  stats::HistogramSpec s;
  s.clamp = stats::ClampPolicy::Saturate;
  switch (d) {
    case Dimension::Velocity: s.edges = {0.0, 30.0, 50.0, 70.0, 90.0, 110.0, 130.0, 150.0}; break;
    case Dimension::Ax: s.edges = {-3.0, -1.5, -0.5, 0.5, 1.5, 3.0}; break;
    case Dimension::Ay: s.edges = {-1.5, -0.5, -0.1, 0.1, 0.5, 1.5}; break;
  }
  return s;
}

ContextTable context_bins(const std::vector<ContextSample>& samples, Dimension dimension, Measure measure,
                          const std::vector<double>& row_edges, const stats::HistogramSpec& columns) {
  columns.validate();
  if (row_edges.size() < 2) throw SpecError("context table needs at least two row edges");
  for (std::size_t i = 1; i < row_edges.size(); ++i) {
    if (!(row_edges[i - 1] < row_edges[i])) throw SpecError("row edges must be strictly increasing");
  }
  ContextTable t;
  t.dimension = dimension;
  t.measure = measure;
  t.columns = columns;
  for (std::size_t r = 0; r + 1 < row_edges.size(); ++r) {
    ContextRow row;
    row.lo = row_edges[r];
    row.hi = row_edges[r + 1];
    std::vector<double> xs;
    for (const auto& s : samples) {
      if (!(s.value > row.lo && s.value <= row.hi)) continue;
      switch (dimension) {
        case Dimension::Velocity: xs.push_back(s.context.v_kmh); break;
        case Dimension::Ax: xs.push_back(s.context.ax); break;
        case Dimension::Ay: xs.push_back(s.context.ay); break;
      }
    }
    const auto h = stats::histogram(xs, columns);
    for (long c : h.counts) row.n += c;
    row.percent.assign(h.counts.size(), 0.0);
    if (row.n > 0) {
      for (std::size_t c = 0; c < h.counts.size(); ++c) {
        row.percent[c] = 100.0 * static_cast<double>(h.counts[c]) / static_cast<double>(row.n);
      }
    }
    t.rows.push_back(std::move(row));
  }
  return t;
}

UndercutResult thw_undercut_durations(const Recording& rec, const std::vector<measures::MeasureSeries>& series,
                                      double threshold, double v_min_kmh) {
  const auto aligned = align(rec, series);
  UndercutResult r;
  r.threshold = threshold;
  r.v_min_kmh = v_min_kmh;
  const double fr = rec.info.frame_rate;
  std::vector<double> durations;
  for (std::size_t k = 0; k < rec.tracks.size(); ++k) {
    const Track& t = rec.tracks[k];
    const auto& s = *aligned[k];
    bool following = false;
    long run = 0, best = 0;
    for (std::size_t i = 0; i < s.size(); ++i) {
      const bool cf = s.thw[i] && *s.thw[i] < macro::kCarFollowingThw;
      following = following || cf;
      if (cf && *s.thw[i] <= threshold && t.frames[i].vx * 3.6 >= v_min_kmh) {
        best = std::max(best, ++run);
      } else {
        run = 0;
      }
    }
    if (!following) continue;
    ++r.tracks_considered;
    if (best == 0) continue;
    const double d = static_cast<double>(best) / fr;
    r.max_duration[t.id] = d;
    durations.push_back(d);
    ++r.tracks_undercutting;
    if (d >= 1.0 - 1e-9) ++r.at_least_1s;
    if (d > 5.0 + 1e-9) ++r.above_5s;
  }
  if (r.tracks_considered > 0) {
    r.share_at_least_1s = static_cast<double>(r.at_least_1s) / static_cast<double>(r.tracks_considered);
    r.share_above_5s = static_cast<double>(r.above_5s) / static_cast<double>(r.tracks_considered);
  }
  r.histogram = stats::histogram(durations, stats::HistogramSpec::uniform(0.0, 20.0, 40, stats::ClampPolicy::Saturate));
  return r;
}

Ttc6Result ttc6_brake_analysis(const Recording& rec, const std::vector<measures::MeasureSeries>& series) {
  const auto aligned = align(rec, series);
  const double fr = rec.info.frame_rate;
  const std::size_t span = static_cast<std::size_t>(std::llround(4.0 * fr));
  auto in_band = [](const std::optional<double>& v) { return v && *v >= 5.5 && *v <= 6.5; };
  Ttc6Result r;
  r.negative.threshold = 0.0;
  r.braking.threshold = -1.5;
  double sum_neg = 0.0, sum_brake = 0.0;
  for (std::size_t k = 0; k < rec.tracks.size(); ++k) {
    const Track& t = rec.tracks[k];
    const auto& s = *aligned[k];
    for (std::size_t i = 0; i < s.size(); ++i) {
      if (!in_band(s.ttc[i]) || (i > 0 && in_band(s.ttc[i - 1]))) continue;
      if (i + span >= s.size()) break;
      bool following = true;
      double min_ax = t.frames[i].ax;
      for (std::size_t j = i; j <= i + span; ++j) {
        if (!s.thw[j] || *s.thw[j] >= macro::kCarFollowingThw) {
          following = false;
          break;
        }
        min_ax = std::min(min_ax, t.frames[j].ax);
      }
      if (!following) continue;
      r.track_ids.push_back(t.id);
      if (min_ax < 0.0) {
        ++r.negative.count;
        sum_neg += min_ax;
      }
      if (min_ax < -1.5) {
        ++r.braking.count;
        sum_brake += min_ax;
      }
      break;
    }
  }
  r.selected = static_cast<long>(r.track_ids.size());
  if (r.selected > 0) {
    r.negative.share = static_cast<double>(r.negative.count) / static_cast<double>(r.selected);
    r.braking.share = static_cast<double>(r.braking.count) / static_cast<double>(r.selected);
  }
  if (r.negative.count > 0) r.negative.mean_ax = sum_neg / static_cast<double>(r.negative.count);
  if (r.braking.count > 0) r.braking.mean_ax = sum_brake / static_cast<double>(r.braking.count);
  return r;
}

void RpStudyConfig::validate() const {
  if (b_grid.empty() || thresholds.empty()) throw ConfigError("RP study grids must not be empty");
  if (!(tailgating > 0.0) || !(braking_window > 0.0) || !(lane_change_window > 0.0)) {
    throw ConfigError("RP study windows must be positive");
  }
  if (a < 0.0) throw ConfigError("RP weight A must be non-negative");
  for (double b : b_grid) {
    if (b < 0.0 || a + b <= 0.0) throw ConfigError("RP weights must satisfy B >= 0 and A + B > 0");
  }
}

std::optional<RpCritical> rp_critical(const Track& track, const measures::MeasureSeries& s, double a, double b,
                                      double tailgating, double frame_rate) {
  check_alignment(track, s);
  std::optional<std::size_t> best;
  double best_rp = 0.0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (!s.thw[i] || !s.ttc[i] || !(*s.ttc[i] > 0.0) || !(*s.thw[i] > 0.0)) continue;
    const double v = a / *s.thw[i] + b / *s.ttc[i];
    if (!best || v > best_rp) {
      best = i;
      best_rp = v;
    }
  }
  if (!best) return std::nullopt;
  RpCritical c{track.id, best_rp, s.frames[*best], false};
  const long w = std::lround(tailgating * frame_rate);
  const long lo = static_cast<long>(*best) - w;
  const long hi = static_cast<long>(*best) + w;
  const auto leader = s.leader[*best];
  if (leader && lo >= 0 && hi < static_cast<long>(s.size())) {
    c.tailgating = true;
    for (long i = lo; i <= hi; ++i) {
      if (s.leader[static_cast<std::size_t>(i)] != leader) {
        c.tailgating = false;
        break;
      }
    }
  }
  return c;
}

RpStudyResult rp_study(const Recording& rec, const std::vector<measures::MeasureSeries>& series,
                       const RpStudyConfig& config, unsigned jobs) {
  config.validate();
  const auto aligned = align(rec, series);
  const double fr = rec.info.frame_rate;
  RpStudyResult r;
  r.config = config;
  r.counts.assign(config.b_grid.size(), std::vector<long>(config.thresholds.size(), 0));
  parallel_for(config.b_grid.size(), jobs, [&](std::size_t bi) {
    for (std::size_t k = 0; k < rec.tracks.size(); ++k) {
      const auto c = rp_critical(rec.tracks[k], *aligned[k], config.a, config.b_grid[bi], config.tailgating, fr);
      if (!c || !c->tailgating) continue;
      for (std::size_t j = 0; j < config.thresholds.size(); ++j) r.counts[bi][j] += c->rp >= config.thresholds[j];
    }
  });

  struct Member {
    std::optional<double> min_ax;
    bool lane_change;
  };
  std::vector<Member> members;
  const long brake_span = std::lround(config.braking_window * fr);
  for (std::size_t k = 0; k < rec.tracks.size(); ++k) {
    const Track& t = rec.tracks[k];
    const auto c = rp_critical(t, *aligned[k], config.a, config.set_b, config.tailgating, fr);
    if (!c || !c->tailgating || c->rp < config.set_threshold) continue;
    r.set_tracks.push_back(t.id);
    Member m;
    for (int f = c->frame + 1; f <= c->frame + brake_span; ++f) {
      const FrameState* s = t.at(f);
      if (!s) break;
      m.min_ax = m.min_ax ? std::min(*m.min_ax, s->ax) : s->ax;
    }
    const auto changes = macro::detect_lane_changes(t, rec.layout, fr).events;
    m.lane_change = lane_change_around(changes, c->frame, fr, config.lane_change_window);
    members.push_back(m);
  }
  const double set_size = static_cast<double>(members.size());
  for (double thr : config.braking_thresholds) {
    RpBrakeGroup g;
    g.threshold = thr;
    for (const auto& m : members) {
      if (!m.min_ax || *m.min_ax > thr) continue;
      ++g.count;
      g.lane_changes += m.lane_change;
    }
    if (set_size > 0) {
      g.share = static_cast<double>(g.count) / set_size;
      g.lane_change_share_of_set = static_cast<double>(g.lane_changes) / set_size;
    }
    if (g.count > 0) g.lane_change_share_of_group = static_cast<double>(g.lane_changes) / static_cast<double>(g.count);
    r.groups.push_back(g);
  }
  return r;
}

}  // namespace trajcrit::risk
