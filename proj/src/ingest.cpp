#include "trajcrit/ingest.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <future>
#include <limits>
#include <regex>
#include <unordered_map>

#include <json.hpp>

#include "csv.hpp"
#include "trajcrit/error.hpp"
#include "trajcrit/measures.hpp"

namespace trajcrit::ingest {

namespace fs = std::filesystem;

namespace {

std::string two_digit(int id) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "%02d", id);
  return buf;
}

}  // namespace

RawDatasetPaths RawDatasetPaths::for_recording(const fs::path& dir, int recording_id) {
  const std::string prefix = two_digit(recording_id);
  return {dir / (prefix + "_recordingMeta.csv"), dir / (prefix + "_tracksMeta.csv"), dir / (prefix + "_tracks.csv")};
}

std::vector<RawDatasetPaths> RawDatasetPaths::discover(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw DataError("data directory not found: " + dir.string());
  static const std::regex pattern(R"((\d+)_recordingMeta\.csv)");
  std::vector<int> ids;
  for (const auto& entry : fs::directory_iterator(dir)) {
    std::smatch m;
    const std::string name = entry.path().filename().string();
    if (std::regex_match(name, m, pattern)) ids.push_back(std::stoi(m[1].str()));
  }
  std::sort(ids.begin(), ids.end());
  std::vector<RawDatasetPaths> out;
  for (int id : ids) {
    auto p = for_recording(dir, id);
    if (fs::exists(p.tracks_meta) && fs::exists(p.tracks)) out.push_back(std::move(p));
  }
  return out;
}

void RawDatasetPaths::check() const {
  for (const auto* p : {&recording_meta, &tracks_meta, &tracks}) {
    if (!fs::exists(*p)) throw DataError("missing dataset file: " + p->string());
  }
}

const LaneTable& default_lane_table() {
  using R = LaneRole;
  static const LaneTable table = [] {
    LaneTable t;
    const LocationLanes three{{{1, R::Emergency}, {2, R::Right}, {3, R::Middle}, {4, R::Left}},
                              {{8, R::Right}, {7, R::Middle}, {6, R::Left}}};
    const LocationLanes two{{{1, R::Emergency}, {2, R::Right}, {3, R::Left}}, {{6, R::Right}, {5, R::Left}}};
    t[1] = three;
    t[2] = two;
    t[3] = three;
    t[4] = three;
    t[5] = two;
    // Acceleration lane on the upper road; it is the outermost lane and keeps id 2.
    t[6] = LocationLanes{{{2, R::Acceleration}, {3, R::Right}, {4, R::Middle}, {5, R::Left}},
                         {{9, R::Right}, {8, R::Middle}, {7, R::Left}}};
    return t;
  }();
  return table;
}

LaneTable load_lane_table(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open lane table " + path.string());
  LaneTable table = default_lane_table();
  try {
    const auto doc = nlohmann::json::parse(in);
    for (const auto& loc : doc.at("locations")) {
      LocationLanes lanes;
      for (const auto& l : loc.at("upper")) {
        lanes.upper.emplace_back(l.at("lane_id").get<int>(), lane_role_from_string(l.at("role").get<std::string>()));
      }
      for (const auto& l : loc.at("lower")) {
        lanes.lower.emplace_back(l.at("lane_id").get<int>(), lane_role_from_string(l.at("role").get<std::string>()));
      }
      table[loc.at("location_id").get<int>()] = std::move(lanes);
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("lane table " + path.string() + ": " + e.what());
  } catch (const LayoutError& e) {
    throw ConfigError("lane table " + path.string() + ": " + e.what());
  }
  return table;
}

namespace {

std::vector<double> parse_markings(std::string_view s, const csv::Reader& r) {
  std::vector<double> out;
  std::size_t start = 0;
  while (start <= s.size()) {
    const auto pos = s.find(';', start);
    const auto piece = s.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start);
    if (!piece.empty()) {
      auto v = csv::to_double(piece);
      if (!v) throw SchemaError(r.path().filename().string() + ":" + std::to_string(r.line()) + ": bad lane marking '" + std::string(piece) + "'");
      out.push_back(*v);
    }
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

// Pairs the table ids with the marked lane intervals. Lane ids grow with y on
// both roads.
std::vector<Lane> build_lanes(const std::vector<std::pair<int, LaneRole>>& spec, const std::vector<double>& markings,
                              int location, std::string_view road) {
  std::vector<Lane> lanes;
  for (const auto& [id, role] : spec) lanes.push_back(Lane{id, role, 0.0, 0.0});
  if (markings.empty()) return lanes;
  std::vector<Lane*> marked;
  for (auto& l : lanes) {
    if (l.role != LaneRole::Emergency) marked.push_back(&l);
  }
  if (markings.size() != marked.size() + 1) {
    throw LayoutError("location " + std::to_string(location) + " " + std::string(road) + " road: " +
                      std::to_string(markings.size()) + " lane markings do not bound " +
                      std::to_string(marked.size()) + " lanes");
  }
  std::sort(marked.begin(), marked.end(), [](const Lane* a, const Lane* b) { return a->id < b->id; });
  std::vector<double> ys = markings;
  std::sort(ys.begin(), ys.end());
  for (std::size_t i = 0; i < marked.size(); ++i) {
    marked[i]->y_min = ys[i];
    marked[i]->y_max = ys[i + 1];
  }
  return lanes;
}

std::optional<double> absent_if_negative_one(double v) {
  if (v == -1.0) return std::nullopt;
  return v;
}

std::optional<int> id_or_absent(long v) {
  if (v == 0) return std::nullopt;
  return static_cast<int>(v);
}

std::optional<double> value_or_absent(double v) {
  if (v == 0.0) return std::nullopt;
  return v;
}

}  // namespace

LaneLayout build_layout(int location_id, const std::vector<double>& upper_markings,
                        const std::vector<double>& lower_markings, const LaneTable& table) {
  auto it = table.find(location_id);
  if (it == table.end()) throw LayoutError("no lane table entry for locationId " + std::to_string(location_id));
  return LaneLayout(build_lanes(it->second.upper, upper_markings, location_id, "upper"),
                    build_lanes(it->second.lower, lower_markings, location_id, "lower"));
}

Recording parse_recording_meta(const fs::path& path, const LaneTable& table) {
  csv::Reader r(path);
  const std::size_t c_id = r.column("id");
  const std::size_t c_fr = r.column("frameRate");
  const std::size_t c_loc = r.column("locationId");
  const std::size_t c_limit = r.column("speedLimit");
  const std::size_t c_month = r.column("month");
  const std::size_t c_wd = r.column("weekDay");
  const std::size_t c_start = r.column("startTime");
  const std::size_t c_dur = r.column("duration");
  const std::size_t c_dist = r.column("totalDrivenDistance");
  const std::size_t c_time = r.column("totalDrivenTime");
  const std::size_t c_nv = r.column("numVehicles");
  const std::size_t c_nc = r.column("numCars");
  const std::size_t c_nt = r.column("numTrucks");
  const std::size_t c_up = r.column("upperLaneMarkings");
  const std::size_t c_lo = r.column("lowerLaneMarkings");

  std::vector<std::string_view> f;
  if (!r.next(f)) throw SchemaError(path.filename().string() + ": no data row");
  const std::size_t needed = std::max({c_id, c_fr, c_loc, c_limit, c_month, c_wd, c_start, c_dur, c_dist, c_time,
                                       c_nv, c_nc, c_nt, c_up, c_lo});
  if (f.size() <= needed) throw SchemaError(path.filename().string() + ":" + std::to_string(r.line()) + ": too few cells");

  auto num = [&](std::size_t col, const char* name) {
    auto v = csv::to_double(f[col]);
    if (!v) {
      throw SchemaError(path.filename().string() + ":" + std::to_string(r.line()) + ": non-numeric " + name + " '" +
                        std::string(f[col]) + "'");
    }
    return *v;
  };

  Recording rec;
  RecordingInfo& info = rec.info;
  info.id = static_cast<int>(num(c_id, "id"));
  info.frame_rate = num(c_fr, "frameRate");
  if (!(info.frame_rate > 0.0)) throw SchemaError(path.filename().string() + ": frameRate must be positive");
  info.location_id = static_cast<int>(num(c_loc, "locationId"));
  const double limit = num(c_limit, "speedLimit");
  if (limit > 0.0) info.speed_limit = limit;
  info.month = std::string(f[c_month]);
  info.weekday = std::string(f[c_wd]);
  info.start_time = std::string(f[c_start]);
  info.duration = num(c_dur, "duration");
  info.total_driven_distance = num(c_dist, "totalDrivenDistance");
  info.total_driven_time = num(c_time, "totalDrivenTime");
  info.num_vehicles = static_cast<int>(num(c_nv, "numVehicles"));
  info.num_cars = static_cast<int>(num(c_nc, "numCars"));
  info.num_trucks = static_cast<int>(num(c_nt, "numTrucks"));
  info.upper_lane_markings = parse_markings(f[c_up], r);
  info.lower_lane_markings = parse_markings(f[c_lo], r);

  rec.layout = build_layout(info.location_id, info.upper_lane_markings, info.lower_lane_markings, table);
  return rec;
}

TracksMetaTable parse_tracks_meta(const fs::path& path) {
  csv::Reader r(path);
  const std::size_t c_id = r.column("id");
  const std::size_t c_w = r.column("width");
  const std::size_t c_h = r.column("height");
  const std::size_t c_if = r.column("initialFrame");
  const std::size_t c_ff = r.column("finalFrame");
  const std::size_t c_nf = r.column("numFrames");
  const std::size_t c_class = r.column("class");
  const std::size_t c_dir = r.column("drivingDirection");
  const std::size_t c_dist = r.column("traveledDistance");
  const std::size_t c_minv = r.column("minXVelocity");
  const std::size_t c_maxv = r.column("maxXVelocity");
  const std::size_t c_meanv = r.column("meanXVelocity");
  const std::size_t c_dhw = r.column("minDHW");
  const std::size_t c_thw = r.column("minTHW");
  const std::size_t c_ttc = r.column("minTTC");
  const std::size_t c_lc = r.column("numLaneChanges");
  const std::size_t needed =
      std::max({c_id, c_w, c_h, c_if, c_ff, c_nf, c_class, c_dir, c_dist, c_minv, c_maxv, c_meanv, c_dhw, c_thw, c_ttc, c_lc});

  TracksMetaTable out;
  std::vector<std::string_view> f;
  const std::string file = path.filename().string();
  while (r.next(f)) {
    ++out.rows_read;
    auto reject = [&](std::string reason) { out.rejected.push_back({file, r.line(), std::move(reason)}); };
    if (f.size() <= needed) {
      reject("too few cells");
      continue;
    }
    TrackMeta m;
    bool ok = true;
    auto num = [&](std::size_t col, const char* name) {
      auto v = csv::to_double(f[col]);
      if (!v) {
        ok = false;
        reject(std::string("non-numeric ") + name + " '" + std::string(f[col]) + "'");
        return 0.0;
      }
      return *v;
    };
    m.id = static_cast<int>(num(c_id, "id"));
    m.width = num(c_w, "width");
    m.height = num(c_h, "height");
    m.initial_frame = static_cast<int>(num(c_if, "initialFrame"));
    m.final_frame = static_cast<int>(num(c_ff, "finalFrame"));
    m.num_frames = static_cast<int>(num(c_nf, "numFrames"));
    m.traveled_distance = num(c_dist, "traveledDistance");
    m.min_x_velocity = num(c_minv, "minXVelocity");
    m.max_x_velocity = num(c_maxv, "maxXVelocity");
    m.mean_x_velocity = num(c_meanv, "meanXVelocity");
    m.min_dhw = absent_if_negative_one(num(c_dhw, "minDHW"));
    m.min_thw = absent_if_negative_one(num(c_thw, "minTHW"));
    m.min_ttc = absent_if_negative_one(num(c_ttc, "minTTC"));
    m.num_lane_changes = static_cast<int>(num(c_lc, "numLaneChanges"));
    const double dir = num(c_dir, "drivingDirection");
    if (!ok) continue;

    const std::string_view cls = f[c_class];
    if (cls == "Car" || cls == "car") {
      m.vehicle_class = VehicleClass::Car;
    } else if (cls == "Truck" || cls == "truck") {
      m.vehicle_class = VehicleClass::Truck;
    } else {
      reject("unknown class '" + std::string(cls) + "'");
      continue;
    }
    if (dir == 1.0) {
      m.direction = Direction::Upper;
    } else if (dir == 2.0) {
      m.direction = Direction::Lower;
    } else {
      reject("drivingDirection must be 1 or 2");
      continue;
    }
    if (m.num_frames <= 0) {
      reject("numFrames is zero for track " + std::to_string(m.id));
      continue;
    }
    if (!(m.width > 0.0)) {
      reject("non-positive vehicle length for track " + std::to_string(m.id));
      continue;
    }
    if (!out.tracks.emplace(m.id, m).second) {
      throw SchemaError(file + ":" + std::to_string(r.line()) + ": duplicate track id " + std::to_string(m.id));
    }
  }
  return out;
}

namespace {

struct OpenTrack {
  Track track;
  bool broken = false;
  std::string reason;
};

}  // namespace

std::vector<Track> parse_tracks(const fs::path& path, const std::map<int, TrackMeta>& meta, const LaneLayout& layout,
                                IngestReport& report) {
  csv::Reader r(path);
  const std::size_t c_frame = r.column("frame");
  const std::size_t c_id = r.column("id");
  const std::size_t c_x = r.column("x");
  const std::size_t c_y = r.column("y");
  r.column("width");
  r.column("height");
  const std::size_t c_vx = r.column("xVelocity");
  const std::size_t c_vy = r.column("yVelocity");
  const std::size_t c_ax = r.column("xAcceleration");
  const std::size_t c_ay = r.column("yAcceleration");
  r.column("frontSightDistance");
  r.column("backSightDistance");
  const std::size_t c_dhw = r.column("dhw");
  const std::size_t c_thw = r.column("thw");
  const std::size_t c_ttc = r.column("ttc");
  r.column("precedingXVelocity");
  const std::size_t c_pre = r.column("precedingId");
  const std::size_t c_fol = r.column("followingId");
  const std::size_t c_lp = r.column("leftPrecedingId");
  const std::size_t c_la = r.column("leftAlongsideId");
  const std::size_t c_lf = r.column("leftFollowingId");
  const std::size_t c_rp = r.column("rightPrecedingId");
  const std::size_t c_ra = r.column("rightAlongsideId");
  const std::size_t c_rf = r.column("rightFollowingId");
  const std::size_t c_lane = r.column("laneId");
  const std::size_t needed = std::max({c_frame, c_id, c_x, c_y, c_vx, c_vy, c_ax, c_ay, c_dhw, c_thw, c_ttc, c_pre,
                                       c_fol, c_lp, c_la, c_lf, c_rp, c_ra, c_rf, c_lane});

  const std::string file = path.filename().string();
  std::unordered_map<int, OpenTrack> open;
  std::vector<Track> done;

  auto finish = [&](OpenTrack&& ot) {
    if (ot.broken) {
      report.rejected_tracks.push_back({ot.track.id, ot.reason});
      return;
    }
    try {
      done.push_back(normalize_direction(ot.track, layout));
    } catch (const LayoutError& e) {
      report.rejected_tracks.push_back({ot.track.id, e.what()});
    }
  };

  std::vector<std::string_view> f;
  while (r.next(f)) {
    ++report.rows_read;
    auto reject = [&](std::string reason) {
      ++report.rows_rejected;
      report.rejected_rows.push_back({file, r.line(), std::move(reason)});
    };
    if (f.size() <= needed) {
      reject("too few cells");
      continue;
    }
    bool ok = true;
    std::string bad;
    auto num = [&](std::size_t col) {
      auto v = csv::to_double(f[col]);
      if (!v) {
        if (ok) bad = "non-numeric cell '" + std::string(f[col]) + "'";
        ok = false;
        return 0.0;
      }
      return *v;
    };
    auto id_cell = [&](std::size_t col) -> std::optional<int> {
      auto v = csv::to_long(f[col]);
      if (!v) {
        if (ok) bad = "non-numeric cell '" + std::string(f[col]) + "'";
        ok = false;
        return std::nullopt;
      }
      return id_or_absent(*v);
    };

    FrameState s;
    const auto frame = csv::to_long(f[c_frame]);
    const auto id = csv::to_long(f[c_id]);
    if (!frame || !id) {
      reject("non-numeric frame or id");
      continue;
    }
    s.frame = static_cast<int>(*frame);
    s.x = num(c_x);
    s.y = num(c_y);
    s.vx = num(c_vx);
    s.vy = num(c_vy);
    s.ax = num(c_ax);
    s.ay = num(c_ay);
    s.dhw_raw = value_or_absent(num(c_dhw));
    s.thw_raw = value_or_absent(num(c_thw));
    s.ttc_raw = value_or_absent(num(c_ttc));
    s.leader_id = id_cell(c_pre);
    s.follower_id = id_cell(c_fol);
    s.left_preceding_id = id_cell(c_lp);
    s.left_alongside_id = id_cell(c_la);
    s.left_following_id = id_cell(c_lf);
    s.right_preceding_id = id_cell(c_rp);
    s.right_alongside_id = id_cell(c_ra);
    s.right_following_id = id_cell(c_rf);
    const auto lane = csv::to_long(f[c_lane]);
    if (!lane) {
      ok = false;
      bad = "non-numeric laneId";
    }
    if (!ok) {
      reject(bad);
      OpenTrack& ot = open[static_cast<int>(*id)];
      ot.track.id = static_cast<int>(*id);
      if (!ot.broken) {
        ot.broken = true;
        ot.reason = "row rejected at line " + std::to_string(r.line());
      }
      continue;
    }
    s.lane_id = static_cast<int>(*lane);
    ++report.rows_accepted;

    const int tid = static_cast<int>(*id);
    auto it = open.find(tid);
    if (it == open.end()) {
      OpenTrack ot;
      ot.track.id = tid;
      auto m = meta.find(tid);
      if (m == meta.end()) {
        ot.broken = true;
        ot.reason = "no usable tracksMeta row";
      } else {
        ot.track.vehicle_class = m->second.vehicle_class;
        ot.track.length = m->second.width;
        ot.track.width = m->second.height;
        ot.track.direction = m->second.direction;
      }
      it = open.emplace(tid, std::move(ot)).first;
    }
    OpenTrack& ot = it->second;
    if (!ot.track.frames.empty() && s.frame != ot.track.frames.back().frame + 1 && !ot.broken) {
      ot.broken = true;
      ot.reason = "non-contiguous frames: " + std::to_string(ot.track.frames.back().frame) + " -> " +
                  std::to_string(s.frame) + " at line " + std::to_string(r.line());
    }
    if (!ot.broken) ot.track.frames.push_back(s);

    auto m = meta.find(tid);
    if (m != meta.end() && s.frame >= m->second.final_frame) {
      finish(std::move(ot));
      open.erase(it);
    }
  }
  std::vector<int> remaining;
  for (const auto& [tid, ot] : open) remaining.push_back(tid);
  std::sort(remaining.begin(), remaining.end());
  for (int tid : remaining) finish(std::move(open.at(tid)));

  std::sort(done.begin(), done.end(), [](const Track& a, const Track& b) { return a.id < b.id; });
  report.tracks_built = static_cast<long>(done.size());
  return done;
}

Segment observed_segment(const std::vector<Track>& tracks) {
  double lo = std::numeric_limits<double>::infinity();
  double hi = -std::numeric_limits<double>::infinity();
  for (const auto& t : tracks) {
    for (const auto& f : t.frames) {
      double left = f.x;
      if (t.normalized) left = t.direction == Direction::Lower ? f.x - t.length : -f.x;
      lo = std::min(lo, left);
      hi = std::max(hi, left + t.length);
    }
  }
  if (lo > hi) return {};
  return {lo, hi};
}

namespace {

void cross_check(const Recording& rec, const std::map<int, TrackMeta>& meta, const IngestOptions& opt,
                 IngestReport& report) {
  // The dataset meta excludes the final, corrupted time step.
  Recording shortened = rec;
  for (auto& t : shortened.tracks) {
    if (t.frames.size() > 1 && !t.last_frame_trimmed) t.frames.pop_back();
  }
  TrackIndex index(shortened);
  for (const auto& t : shortened.tracks) {
    auto m = meta.find(t.id);
    if (m == meta.end()) continue;
    const auto minima = measures::track_minima(measures::compute_series(t, index));
    auto compare = [&](const char* field, std::optional<double> meta_value, const std::optional<measures::Extremum>& ex,
                       double tol) {
      std::optional<double> re = ex ? std::optional<double>(ex->value) : std::nullopt;
      if (!meta_value && !re) return;
      if (meta_value && re) {
        const double d = *re - *meta_value;
        if (std::abs(d) > tol) report.meta_mismatches.push_back({t.id, field, meta_value, re, d});
        return;
      }
      report.meta_mismatches.push_back({t.id, field, meta_value, re, std::numeric_limits<double>::quiet_NaN()});
    };
    compare("minTHW", m->second.min_thw, minima.thw, opt.thw_tolerance);
    compare("minTTC", m->second.min_ttc, minima.ttc, opt.ttc_tolerance);
    compare("minDHW", m->second.min_dhw, minima.dhw, opt.dhw_tolerance);
  }
}

}  // namespace

IngestResult load_recording(const RawDatasetPaths& paths, const IngestOptions& options) {
  paths.check();
  auto rec_future = std::async(std::launch::async, [&] { return parse_recording_meta(paths.recording_meta, options.lane_table); });
  auto meta_future = std::async(std::launch::async, [&] { return parse_tracks_meta(paths.tracks_meta); });
  IngestResult result;
  result.recording = rec_future.get();
  TracksMetaTable meta = meta_future.get();
  result.meta = std::move(meta.tracks);
  result.report.rejected_rows = std::move(meta.rejected);

  result.recording.tracks = parse_tracks(paths.tracks, result.meta, result.recording.layout, result.report);
  result.recording.segment = options.segment ? *options.segment : observed_segment(result.recording.tracks);
  measures::attach_minima(result.recording);
  cross_check(result.recording, result.meta, options, result.report);
  return result;
}

}  // namespace trajcrit::ingest
