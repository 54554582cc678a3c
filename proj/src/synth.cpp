#include "trajcrit/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <random>

#include "csv.hpp"
#include "trajcrit/error.hpp"
#include "trajcrit/ingest.hpp"
#include "trajcrit/measures.hpp"

namespace trajcrit::synth {

using nlohmann::json;

namespace {

constexpr double kLaneWidth = 3.75;
constexpr double kUpperFirstMarking = 8.0;
constexpr double kRoadSeparation = 4.0;

// Advances (s, v) by d seconds at acceleration a, stopping at v = 0. Returns
// the acceleration in effect at the end.
double advance(double& s, double& v, double a, double d) {
  if (a < 0.0 && v + a * d < 0.0) {
    const double t_stop = -v / a;
    s += v * t_stop + 0.5 * a * t_stop * t_stop;
    v = 0.0;
    return 0.0;
  }
  s += v * d + 0.5 * a * d * d;
  v += a * d;
  return a;
}

std::vector<double> markings_for(std::size_t marked_lanes, double first) {
  std::vector<double> m;
  if (marked_lanes == 0) return m;
  for (std::size_t i = 0; i <= marked_lanes; ++i) m.push_back(first + kLaneWidth * static_cast<double>(i));
  return m;
}

std::size_t marked(const std::vector<std::pair<int, LaneRole>>& lanes) {
  return static_cast<std::size_t>(std::count_if(lanes.begin(), lanes.end(),
                                                [](const auto& l) { return l.second != LaneRole::Emergency; }));
}

}  // namespace

Motion longitudinal(const VehicleScript& v, double t) {
  const double tau = t - v.t_start;
  Motion m{v.s0, v.v0, 0.0};
  double elapsed = 0.0;
  for (const auto& p : v.phases) {
    if (tau < elapsed + p.duration) {
      const double eff = advance(m.s, m.v, p.accel, tau - elapsed);
      m.a = eff;
      return m;
    }
    advance(m.s, m.v, p.accel, p.duration);
    elapsed += p.duration;
  }
  advance(m.s, m.v, 0.0, tau - elapsed);
  m.a = 0.0;
  return m;
}

namespace {

struct Lateral {
  double y = 0.0;
  double v = 0.0;
  double a = 0.0;
};

Lateral lateral(const VehicleScript& v, double t) {
  const double tau = t - v.t_start;
  Lateral l;
  double elapsed = 0.0;
  for (const auto& p : v.lateral) {
    const double d = std::min(p.duration, tau - elapsed);
    if (d <= 0.0) break;
    l.y += l.v * d + 0.5 * p.accel * d * d;
    l.v += p.accel * d;
    if (tau < elapsed + p.duration) {
      l.a = p.accel;
      return l;
    }
    elapsed += p.duration;
  }
  if (tau > elapsed) l.y += l.v * (tau - elapsed);
  return l;
}

int lane_at(const VehicleScript& v, double t) {
  int lane = v.lane_id;
  for (const auto& step : v.lane_changes) {
    if (t >= step.time - 1e-12) lane = step.lane_id;
  }
  return lane;
}

struct Active {
  std::size_t track;  // index into tracks
  std::size_t frame;  // index into that track's frames
  int lane;
  double front;
  double length;
};

void assign_neighbors(std::vector<Active>& active, std::vector<Track>& tracks, const LaneLayout& layout, int frame) {
  std::map<int, std::vector<const Active*>> by_lane;
  for (const auto& a : active) by_lane[a.lane].push_back(&a);
  for (auto& [lane, list] : by_lane) {
    std::sort(list.begin(), list.end(), [](const Active* a, const Active* b) { return a->front < b->front; });
    for (std::size_t i = 0; i + 1 < list.size(); ++i) {
      if (list[i + 1]->front - list[i + 1]->length <= list[i]->front) {
        throw GenerationError("vehicles " + std::to_string(tracks[list[i]->track].id) + " and " +
                              std::to_string(tracks[list[i + 1]->track].id) + " overlap in lane " +
                              std::to_string(lane) + " at frame " + std::to_string(frame));
      }
    }
  }
  auto lane_list = [&](Direction d, int pos) -> const std::vector<const Active*>* {
    const auto& lanes = layout.lanes(d);
    if (pos < 0 || pos >= static_cast<int>(lanes.size())) return nullptr;
    auto it = by_lane.find(lanes[static_cast<std::size_t>(pos)].id);
    return it == by_lane.end() ? nullptr : &it->second;
  };
  for (auto& [lane, list] : by_lane) {
    for (std::size_t i = 0; i < list.size(); ++i) {
      const Active& me = *list[i];
      Track& t = tracks[me.track];
      FrameState& f = t.frames[me.frame];
      if (i + 1 < list.size()) f.leader_id = tracks[list[i + 1]->track].id;
      if (i > 0) f.follower_id = tracks[list[i - 1]->track].id;
      const int pos = layout.position(lane);
      for (int side : {+1, -1}) {
        const auto* other = lane_list(t.direction, pos + side);
        if (!other) continue;
        std::optional<int> preceding, alongside, following;
        for (const Active* o : *other) {
          const int oid = tracks[o->track].id;
          if (o->front - o->length > me.front) {
            if (!preceding) preceding = oid;
          } else if (o->front < me.front - me.length) {
            following = oid;
          } else {
            alongside = oid;
          }
        }
        if (side > 0) {
          f.left_preceding_id = preceding;
          f.left_alongside_id = alongside;
          f.left_following_id = following;
        } else {
          f.right_preceding_id = preceding;
          f.right_alongside_id = alongside;
          f.right_following_id = following;
        }
      }
    }
  }
}

}  // namespace

GroundTruth generate(const ScenarioScript& script) {
  if (!(script.frame_rate > 0.0)) throw GenerationError("frame rate must be positive");
  if (!(script.duration > 0.0)) throw GenerationError("duration must be positive");
  if (!(script.segment_length > 0.0)) throw GenerationError("segment length must be positive");
  const auto& table = ingest::default_lane_table();
  auto loc = table.find(script.location_id);
  if (loc == table.end()) throw GenerationError("unknown location " + std::to_string(script.location_id));

  GroundTruth gt;
  Recording& rec = gt.recording;
  RecordingInfo& info = rec.info;
  info.id = script.recording_id;
  info.frame_rate = script.frame_rate;
  info.location_id = script.location_id;
  info.month = "09.2017";
  info.weekday = "Tue";
  info.start_time = "08:00";
  const int n_frames = static_cast<int>(std::llround(script.duration * script.frame_rate));
  info.duration = n_frames / script.frame_rate;
  info.upper_lane_markings = markings_for(marked(loc->second.upper), kUpperFirstMarking);
  const double lower_first = info.upper_lane_markings.empty()
                                 ? kUpperFirstMarking
                                 : info.upper_lane_markings.back() + kRoadSeparation;
  info.lower_lane_markings = markings_for(marked(loc->second.lower), lower_first);
  rec.layout = ingest::build_layout(info.location_id, info.upper_lane_markings, info.lower_lane_markings, table);
  rec.segment = Segment{0.0, script.segment_length};
  const double fr = script.frame_rate;

  auto default_lane = [&](Direction d) {
    for (const auto& l : rec.layout.lanes(d)) {
      if (l.role == LaneRole::Right) return l.id;
    }
    throw GenerationError("road has no right lane");
  };

  // Longitudinal and lateral state per vehicle and frame.
  std::vector<Track> tracks;
  for (const auto& vs : script.vehicles) {
    if (!(vs.length > 0.0) || !(vs.width > 0.0)) throw GenerationError("vehicle dimensions must be positive");
    if (vs.v0 < 0.0) throw GenerationError("vehicle " + std::to_string(vs.id) + " has negative speed");
    Track t;
    t.id = vs.id;
    t.vehicle_class = vs.vehicle_class;
    t.length = vs.length;
    t.width = vs.width;
    t.direction = vs.direction;
    t.normalized = true;
    const double sign = vs.direction == Direction::Upper ? -1.0 : 1.0;
    const double lo = rec.segment.lo(vs.direction);
    const int first = std::max(1, static_cast<int>(std::ceil(vs.t_start * fr - 1e-9)) + 1);
    for (int f = first; f <= n_frames; ++f) {
      const double time = (f - 1) / fr;
      if (vs.t_end && time > *vs.t_end + 1e-12) break;
      const Motion m = longitudinal(vs, time);
      if (vs.clip_to_view) {
        if (m.s < 0.0) continue;
        if (m.s - vs.length >= script.segment_length) break;
      }
      int lane = lane_at(vs, time);
      if (lane == 0) lane = default_lane(vs.direction);
      const Lane* l = rec.layout.find(lane);
      if (!l || rec.layout.direction_of(lane) != vs.direction) {
        throw GenerationError("vehicle " + std::to_string(vs.id) + ": lane " + std::to_string(lane) +
                              " is not on its road");
      }
      const Lateral lat = lateral(vs, time);
      const double y_raw = 0.5 * (l->y_min + l->y_max) - 0.5 * vs.width + lat.y;
      FrameState s;
      s.frame = f;
      s.x = lo + m.s;
      // Lower-road files store the rear; keep fronts the reader can rebuild.
      if (vs.direction == Direction::Lower) s.x = (s.x - vs.length) + vs.length;
      s.y = sign * y_raw;
      s.vx = m.v;
      s.vy = sign * lat.v;
      s.ax = m.a;
      s.ay = sign * lat.a;
      s.lane_id = lane;
      t.frames.push_back(s);
    }
    if (t.frames.size() < 2) continue;
    tracks.push_back(std::move(t));
  }
  {
    std::vector<int> ids;
    for (const auto& t : tracks) ids.push_back(t.id);
    std::sort(ids.begin(), ids.end());
    if (std::adjacent_find(ids.begin(), ids.end()) != ids.end()) throw GenerationError("duplicate vehicle id");
    if (std::find(ids.begin(), ids.end(), 0) != ids.end()) throw GenerationError("vehicle id 0 is reserved");
  }

  // Neighbours frame by frame.
  std::vector<std::vector<Active>> per_frame(static_cast<std::size_t>(n_frames) + 1);
  for (std::size_t k = 0; k < tracks.size(); ++k) {
    for (std::size_t i = 0; i < tracks[k].frames.size(); ++i) {
      const FrameState& f = tracks[k].frames[i];
      per_frame[static_cast<std::size_t>(f.frame)].push_back({k, i, f.lane_id, f.x, tracks[k].length});
    }
  }
  for (int f = 1; f <= n_frames; ++f) assign_neighbors(per_frame[static_cast<std::size_t>(f)], tracks, rec.layout, f);

  // Headway columns from the stored positions, using the same arithmetic as
  // the measures so ingested data reproduces them bit for bit.
  std::map<int, std::size_t> by_id;
  for (std::size_t k = 0; k < tracks.size(); ++k) by_id[tracks[k].id] = k;
  for (std::size_t k = 0; k < tracks.size(); ++k) {
    for (auto& f : tracks[k].frames) {
      if (!f.leader_id) continue;
      const Track& lt = tracks[by_id.at(*f.leader_id)];
      const FrameState* lf = lt.at(f.frame);
      if (!lf) throw GenerationError("leader frame missing for vehicle " + std::to_string(tracks[k].id));
      const LeaderGap g = leader_gap(f, *lf, lt.length, lt.id);
      if (!(g.gap > 0.0)) throw GenerationError("non-positive gap behind vehicle " + std::to_string(lt.id));
      f.dhw_raw = g.gap;
      f.thw_raw = measures::thw(g, f.vx);
      f.ttc_raw = measures::ttc(g);
    }
  }

  // Scripted lane changes as seen in the frames.
  for (const auto& t : tracks) {
    for (std::size_t i = 1; i < t.frames.size(); ++i) {
      const int from = t.frames[i - 1].lane_id;
      const int to = t.frames[i].lane_id;
      if (from == to) continue;
      const int step = rec.layout.position(to) - rec.layout.position(from);
      gt.lane_changes.push_back({t.id, t.frames[i].frame, from, to,
                                 step > 0 ? macro::ChangeSide::Leftward : macro::ChangeSide::Rightward, t.direction});
    }
  }

  std::sort(tracks.begin(), tracks.end(), [](const Track& a, const Track& b) { return a.id < b.id; });
  for (const auto& t : tracks) {
    ++info.num_vehicles;
    (t.vehicle_class == VehicleClass::Car ? info.num_cars : info.num_trucks) += 1;
    info.total_driven_distance += std::abs(t.frames.back().x - t.frames.front().x);
    info.total_driven_time += static_cast<double>(t.frames.size()) / fr;
  }
  rec.tracks = std::move(tracks);
  measures::attach_minima(rec);
  return gt;
}

namespace {

std::string fmt(double v) { return csv::format(v); }

std::string fmt_opt(const std::optional<double>& v) { return v ? fmt(*v) : std::string("0"); }

std::string id_or_zero(const std::optional<int>& v) { return v ? std::to_string(*v) : std::string("0"); }

std::string join_markings(const std::vector<double>& m) {
  std::string s;
  for (std::size_t i = 0; i < m.size(); ++i) {
    if (i) s += ';';
    s += fmt(m[i]);
  }
  return s;
}

std::ofstream open_out(const std::filesystem::path& p) {
  std::ofstream out(p);
  if (!out) throw DataError("cannot write " + p.string());
  return out;
}

}  // namespace

void write_dataset(const Recording& recording, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw DataError("cannot create " + dir.string() + ": " + ec.message());
  const auto paths = ingest::RawDatasetPaths::for_recording(dir, recording.info.id);
  const RecordingInfo& info = recording.info;

  {
    auto out = open_out(paths.recording_meta);
    out << "id,frameRate,locationId,speedLimit,month,weekDay,startTime,duration,totalDrivenDistance,"
           "totalDrivenTime,numVehicles,numCars,numTrucks,upperLaneMarkings,lowerLaneMarkings\n";
    out << info.id << ',' << fmt(info.frame_rate) << ',' << info.location_id << ','
        << (info.speed_limit ? fmt(*info.speed_limit) : std::string("-1")) << ',' << info.month << ',' << info.weekday
        << ',' << info.start_time << ',' << fmt(info.duration) << ',' << fmt(info.total_driven_distance) << ','
        << fmt(info.total_driven_time) << ',' << info.num_vehicles << ',' << info.num_cars << ',' << info.num_trucks
        << ',' << join_markings(info.upper_lane_markings) << ',' << join_markings(info.lower_lane_markings) << '\n';
    if (!out) throw DataError("write failed: " + paths.recording_meta.string());
  }

  std::vector<Track> raw;
  raw.reserve(recording.tracks.size());
  for (const auto& t : recording.tracks) raw.push_back(denormalize_direction(t));
  std::sort(raw.begin(), raw.end(), [](const Track& a, const Track& b) { return a.id < b.id; });
  std::map<int, const Track*> by_id;
  for (const auto& t : raw) by_id[t.id] = &t;

  {
    auto out = open_out(paths.tracks_meta);
    out << "id,width,height,initialFrame,finalFrame,numFrames,class,drivingDirection,traveledDistance,"
           "minXVelocity,maxXVelocity,meanXVelocity,minDHW,minTHW,minTTC,numLaneChanges\n";
    for (const auto& t : raw) {
      if (t.frames.empty()) continue;
      // The dataset's per-track minima ignore the final time step.
      const std::size_t n = t.frames.size() > 1 ? t.frames.size() - 1 : t.frames.size();
      std::optional<double> min_dhw, min_thw, min_ttc;
      double vmin = t.frames[0].vx, vmax = vmin, vsum = 0.0;
      int changes = 0;
      for (std::size_t i = 0; i < t.frames.size(); ++i) {
        const FrameState& f = t.frames[i];
        vmin = std::min(vmin, f.vx);
        vmax = std::max(vmax, f.vx);
        vsum += f.vx;
        if (i > 0 && f.lane_id != t.frames[i - 1].lane_id) ++changes;
        if (i >= n) continue;
        if (f.dhw_raw && (!min_dhw || *f.dhw_raw < *min_dhw)) min_dhw = f.dhw_raw;
        if (f.thw_raw && (!min_thw || *f.thw_raw < *min_thw)) min_thw = f.thw_raw;
        if (f.ttc_raw && *f.ttc_raw > 0.0 && (!min_ttc || *f.ttc_raw < *min_ttc)) min_ttc = f.ttc_raw;
      }
      auto meta_opt = [](const std::optional<double>& v) { return v ? fmt(*v) : std::string("-1"); };
      out << t.id << ',' << fmt(t.length) << ',' << fmt(t.width) << ',' << t.first_frame() << ',' << t.last_frame()
          << ',' << t.frames.size() << ',' << (t.vehicle_class == VehicleClass::Car ? "Car" : "Truck") << ','
          << static_cast<int>(t.direction) << ',' << fmt(std::abs(t.frames.back().x - t.frames.front().x)) << ','
          << fmt(vmin) << ',' << fmt(vmax) << ',' << fmt(vsum / static_cast<double>(t.frames.size())) << ','
          << meta_opt(min_dhw) << ',' << meta_opt(min_thw) << ',' << meta_opt(min_ttc) << ',' << changes << '\n';
    }
    if (!out) throw DataError("write failed: " + paths.tracks_meta.string());
  }

  {
    auto out = open_out(paths.tracks);
    out << "frame,id,x,y,width,height,xVelocity,yVelocity,xAcceleration,yAcceleration,frontSightDistance,"
           "backSightDistance,dhw,thw,ttc,precedingXVelocity,precedingId,followingId,leftPrecedingId,"
           "leftAlongsideId,leftFollowingId,rightPrecedingId,rightAlongsideId,rightFollowingId,laneId\n";
    std::string line;
    for (const auto& t : raw) {
      const double seg_lo = recording.segment.start;
      const double seg_hi = recording.segment.end;
      for (const auto& f : t.frames) {
        double preceding_v = 0.0;
        if (f.leader_id) {
          auto it = by_id.find(*f.leader_id);
          if (it != by_id.end()) {
            if (const FrameState* lf = it->second->at(f.frame)) preceding_v = lf->vx;
          }
        }
        // Distance from the front (back) bumper to the end of the visible
        // stretch in the driving direction.
        const bool lower = t.direction == Direction::Lower;
        const double front_sight = lower ? seg_hi - (f.x + t.length) : f.x - seg_lo;
        const double back_sight = lower ? f.x - seg_lo : seg_hi - (f.x + t.length);
        line.clear();
        line += std::to_string(f.frame);
        line += ',' + std::to_string(t.id);
        line += ',' + fmt(f.x);
        line += ',' + fmt(f.y);
        line += ',' + fmt(t.length);
        line += ',' + fmt(t.width);
        line += ',' + fmt(f.vx);
        line += ',' + fmt(f.vy);
        line += ',' + fmt(f.ax);
        line += ',' + fmt(f.ay);
        line += ',' + fmt(front_sight);
        line += ',' + fmt(back_sight);
        line += ',' + fmt_opt(f.dhw_raw);
        line += ',' + fmt_opt(f.thw_raw);
        line += ',' + fmt_opt(f.ttc_raw);
        line += ',' + fmt(preceding_v);
        line += ',' + id_or_zero(f.leader_id);
        line += ',' + id_or_zero(f.follower_id);
        line += ',' + id_or_zero(f.left_preceding_id);
        line += ',' + id_or_zero(f.left_alongside_id);
        line += ',' + id_or_zero(f.left_following_id);
        line += ',' + id_or_zero(f.right_preceding_id);
        line += ',' + id_or_zero(f.right_alongside_id);
        line += ',' + id_or_zero(f.right_following_id);
        line += ',' + std::to_string(f.lane_id);
        line += '\n';
        out << line;
      }
    }
    if (!out) throw DataError("write failed: " + paths.tracks.string());
  }
}

ScenarioScript constant_platoon(const PlatoonParams& p) {
  if (!(p.spacing > p.length)) throw GenerationError("platoon spacing must exceed the vehicle length");
  if (!(p.speed > 0.0)) throw GenerationError("platoon speed must be positive");
  ScenarioScript s;
  s.kind = "constant_platoon";
  s.duration = p.duration;
  s.segment_length = p.segment_length;
  if (p.vehicles > 0) {
    for (int k = 0; k < p.vehicles; ++k) {
      VehicleScript v;
      v.id = k + 1;
      v.length = p.length;
      v.direction = p.direction;
      v.v0 = p.speed;
      v.s0 = p.length + static_cast<double>(p.vehicles - 1 - k) * p.spacing;
      s.vehicles.push_back(v);
    }
    return s;
  }
  // A stream that fills the segment from the first frame to the last: vehicle
  // k has its front at (k0 - k) * spacing + speed * t.
  const double travel = p.speed * p.duration;
  const long first_k = -static_cast<long>(std::ceil((p.segment_length + p.length) / p.spacing));
  const long last_k = static_cast<long>(std::ceil(travel / p.spacing)) + 1;
  int id = 1;
  for (long k = first_k; k <= last_k; ++k) {
    VehicleScript v;
    v.id = id++;
    v.length = p.length;
    v.direction = p.direction;
    v.v0 = p.speed;
    v.s0 = -static_cast<double>(k) * p.spacing;
    v.clip_to_view = true;
    s.vehicles.push_back(v);
  }
  return s;
}

ScenarioScript closing(const ClosingParams& p) {
  if (!(p.gap > 0.0)) throw GenerationError("closing gap must be positive");
  ScenarioScript s;
  s.kind = "closing";
  s.duration = p.duration;
  s.segment_length = std::max(400.0, p.gap + p.follower_speed * p.duration + 4.0 * p.length);
  VehicleScript f;
  f.id = 1;
  f.length = p.length;
  f.s0 = p.length + 10.0;
  f.v0 = p.follower_speed;
  VehicleScript l = f;
  l.id = 2;
  l.s0 = f.s0 + p.gap + p.length;
  l.v0 = p.leader_speed;
  s.vehicles = {f, l};
  return s;
}

ScenarioScript lane_change(const LaneChangeParams& p) {
  ScenarioScript s;
  s.kind = "lane_change";
  s.duration = p.duration;
  s.segment_length = std::max(400.0, p.speed * p.duration + p.target_leader_gap + 50.0);
  // Location 1 lower road: 8 right, 7 middle, 6 left.
  VehicleScript ego;
  ego.id = 1;
  ego.lane_id = 8;
  ego.s0 = 10.0;
  ego.v0 = p.speed;
  ego.lane_changes = {{p.change_time, 7}};
  VehicleScript lead = ego;
  lead.id = 2;
  lead.lane_changes.clear();
  lead.s0 = ego.s0 + ego.length + p.leader_gap;
  VehicleScript target = lead;
  target.id = 3;
  target.lane_id = 7;
  target.s0 = ego.s0 + ego.length + p.target_leader_gap;
  s.vehicles = {ego, lead, target};
  return s;
}

ScenarioScript stop_and_go(const StopAndGoParams& p) {
  if (!(p.decel < 0.0) || !(p.accel > 0.0)) throw GenerationError("stop-and-go needs decel < 0 < accel");
  ScenarioScript s;
  s.kind = "stop_and_go";
  s.duration = p.duration;
  const double brake = p.speed / -p.decel;  // to standstill
  const double go = p.speed / p.accel;
  VehicleScript leader;
  leader.id = 2;
  leader.v0 = p.speed;
  leader.phases = {{2.0, 0.0}, {brake, p.decel}, {2.0, 0.0}, {go, p.accel}};
  VehicleScript follower = leader;
  follower.id = 1;
  follower.phases = {{2.0 + p.reaction, 0.0}, {brake, p.decel}, {2.0, 0.0}, {go, p.accel}};
  follower.s0 = follower.length + 5.0;
  leader.s0 = follower.s0 + p.gap + leader.length;
  s.vehicles = {follower, leader};
  s.segment_length = std::max(400.0, leader.s0 + p.speed * p.duration + 50.0);
  return s;
}

ScenarioScript mixed_traffic(const MixedTrafficParams& p, std::uint64_t seed) {
  if (p.vehicles < 0) throw GenerationError("vehicle count must be non-negative");
  if (p.lane_speeds.empty() || p.lane_speeds.size() > 3) throw GenerationError("one to three lane speeds required");
  ScenarioScript s;
  s.kind = "mixed_traffic";
  s.seed = seed;
  s.segment_length = p.segment_length;
  std::mt19937_64 rng(seed);
  std::exponential_distribution<double> extra(1.0 / std::max(p.mean_extra_headway, 1e-9));
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  // Location 1: lower road 8, 7, 6 and upper road 2, 3, 4, right to left.
  const std::vector<int> lower{8, 7, 6};
  const std::vector<int> upper{2, 3, 4};
  struct Stream {
    Direction d;
    int lane;
    double speed;
    double next = 0.0;
  };
  std::vector<Stream> streams;
  for (std::size_t i = 0; i < p.lane_speeds.size(); ++i) {
    streams.push_back({Direction::Lower, lower[i], p.lane_speeds[i]});
    if (p.both_directions) streams.push_back({Direction::Upper, upper[i], p.lane_speeds[i]});
  }
  for (auto& st : streams) st.next = unit(rng) * p.min_headway;
  double last_arrival = 0.0;
  for (int id = 1; id <= p.vehicles; ++id) {
    // Earliest next arrival over all lanes.
    auto it = std::min_element(streams.begin(), streams.end(),
                               [](const Stream& a, const Stream& b) { return a.next < b.next; });
    VehicleScript v;
    v.id = id;
    v.direction = it->d;
    v.lane_id = it->lane;
    const bool truck = unit(rng) < p.truck_share && it->lane == (it->d == Direction::Lower ? 8 : 2);
    v.vehicle_class = truck ? VehicleClass::Truck : VehicleClass::Car;
    v.length = truck ? 12.0 + 6.0 * unit(rng) : 4.0 + 1.0 * unit(rng);
    v.width = truck ? 2.5 : 1.8;
    v.v0 = it->speed;
    v.t_start = it->next;
    v.s0 = 0.0;
    v.clip_to_view = true;
    s.vehicles.push_back(v);
    last_arrival = it->next;
    const double min_gap = std::max(p.min_headway, (v.length + 2.0) / it->speed);
    it->next += min_gap + extra(rng);
  }
  s.duration = std::max(60.0, std::ceil(last_arrival + p.segment_length / p.lane_speeds.front()));
  return s;
}

std::vector<std::string> scenario_kinds() {
  return {"constant_platoon", "closing", "lane_change", "stop_and_go", "mixed_traffic", "custom"};
}

namespace {

template <typename T>
void take(const json& j, const char* key, T& out, std::vector<std::string>& used) {
  if (!j.contains(key)) return;
  used.emplace_back(key);
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("scenario parameter '") + key + "': " + e.what());
  }
}

void reject_unknown(const json& j, const std::vector<std::string>& used) {
  for (const auto& [k, v] : j.items()) {
    if (std::find(used.begin(), used.end(), k) == used.end()) throw ConfigError("unknown scenario parameter '" + k + "'");
  }
}

Direction direction_from(const json& j) {
  if (j.is_number_integer()) {
    const int d = j.get<int>();
    if (d == 1) return Direction::Upper;
    if (d == 2) return Direction::Lower;
  } else if (j.is_string()) {
    if (j == "upper") return Direction::Upper;
    if (j == "lower") return Direction::Lower;
  }
  throw ConfigError("direction must be 'upper', 'lower', 1 or 2");
}

std::vector<Phase> phases_from(const json& j) {
  std::vector<Phase> out;
  if (!j.is_array()) throw ConfigError("phases must be an array");
  for (const auto& p : j) out.push_back({p.at("duration").get<double>(), p.at("accel").get<double>()});
  return out;
}

json phases_to(const std::vector<Phase>& ps) {
  json arr = json::array();
  for (const auto& p : ps) arr.push_back({{"duration", p.duration}, {"accel", p.accel}});
  return arr;
}

}  // namespace

ScenarioScript script_from_json(const json& j) {
  try {
    ScenarioScript s;
    s.kind = j.value("kind", std::string("custom"));
    s.seed = j.value("seed", std::uint64_t{1});
    s.recording_id = j.value("recording_id", 1);
    s.location_id = j.value("location_id", 1);
    s.frame_rate = j.value("frame_rate", 25.0);
    s.duration = j.at("duration").get<double>();
    s.segment_length = j.value("segment_length", 400.0);
    for (const auto& v : j.at("vehicles")) {
      VehicleScript vs;
      vs.id = v.at("id").get<int>();
      const std::string cls = v.value("class", std::string("car"));
      if (cls != "car" && cls != "truck") throw ConfigError("vehicle class must be 'car' or 'truck'");
      vs.vehicle_class = cls == "car" ? VehicleClass::Car : VehicleClass::Truck;
      vs.length = v.value("length", 4.5);
      vs.width = v.value("width", 1.8);
      if (v.contains("direction")) vs.direction = direction_from(v.at("direction"));
      vs.lane_id = v.value("lane_id", 0);
      vs.s0 = v.value("s0", 0.0);
      vs.v0 = v.value("v0", 0.0);
      if (v.contains("phases")) vs.phases = phases_from(v.at("phases"));
      if (v.contains("lateral")) vs.lateral = phases_from(v.at("lateral"));
      if (v.contains("lane_changes")) {
        for (const auto& c : v.at("lane_changes")) vs.lane_changes.push_back({c.at("time").get<double>(), c.at("lane_id").get<int>()});
      }
      vs.t_start = v.value("t_start", 0.0);
      if (v.contains("t_end")) vs.t_end = v.at("t_end").get<double>();
      vs.clip_to_view = v.value("clip_to_view", false);
      s.vehicles.push_back(std::move(vs));
    }
    return s;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("scenario script: ") + e.what());
  }
}

json script_to_json(const ScenarioScript& s) {
  json vehicles = json::array();
  for (const auto& v : s.vehicles) {
    json lc = json::array();
    for (const auto& c : v.lane_changes) lc.push_back({{"time", c.time}, {"lane_id", c.lane_id}});
    json jv{{"id", v.id},
            {"class", v.vehicle_class == VehicleClass::Car ? "car" : "truck"},
            {"length", v.length},
            {"width", v.width},
            {"direction", v.direction == Direction::Upper ? "upper" : "lower"},
            {"lane_id", v.lane_id},
            {"s0", v.s0},
            {"v0", v.v0},
            {"phases", phases_to(v.phases)},
            {"lateral", phases_to(v.lateral)},
            {"lane_changes", lc},
            {"t_start", v.t_start},
            {"clip_to_view", v.clip_to_view}};
    if (v.t_end) jv["t_end"] = *v.t_end;
    vehicles.push_back(std::move(jv));
  }
  return json{{"kind", s.kind},
              {"seed", s.seed},
              {"recording_id", s.recording_id},
              {"location_id", s.location_id},
              {"frame_rate", s.frame_rate},
              {"duration", s.duration},
              {"segment_length", s.segment_length},
              {"vehicles", vehicles}};
}

ScenarioScript make_scenario(const std::string& kind, const json& params, std::uint64_t seed) {
  const json j = params.is_null() ? json::object() : params;
  if (!j.is_object()) throw ConfigError("scenario parameters must be a JSON object");
  std::vector<std::string> used;
  ScenarioScript s;
  if (kind == "constant_platoon") {
    PlatoonParams p;
    take(j, "vehicles", p.vehicles, used);
    take(j, "speed", p.speed, used);
    take(j, "spacing", p.spacing, used);
    take(j, "length", p.length, used);
    take(j, "duration", p.duration, used);
    take(j, "segment_length", p.segment_length, used);
    if (j.contains("direction")) {
      used.emplace_back("direction");
      p.direction = direction_from(j.at("direction"));
    }
    reject_unknown(j, used);
    s = constant_platoon(p);
  } else if (kind == "closing") {
    ClosingParams p;
    take(j, "follower_speed", p.follower_speed, used);
    take(j, "leader_speed", p.leader_speed, used);
    take(j, "gap", p.gap, used);
    take(j, "duration", p.duration, used);
    take(j, "length", p.length, used);
    reject_unknown(j, used);
    s = closing(p);
  } else if (kind == "lane_change") {
    LaneChangeParams p;
    take(j, "speed", p.speed, used);
    take(j, "change_time", p.change_time, used);
    take(j, "duration", p.duration, used);
    take(j, "leader_gap", p.leader_gap, used);
    take(j, "target_leader_gap", p.target_leader_gap, used);
    reject_unknown(j, used);
    s = lane_change(p);
  } else if (kind == "stop_and_go") {
    StopAndGoParams p;
    take(j, "speed", p.speed, used);
    take(j, "gap", p.gap, used);
    take(j, "decel", p.decel, used);
    take(j, "accel", p.accel, used);
    take(j, "reaction", p.reaction, used);
    take(j, "duration", p.duration, used);
    reject_unknown(j, used);
    s = stop_and_go(p);
  } else if (kind == "mixed_traffic") {
    MixedTrafficParams p;
    take(j, "vehicles", p.vehicles, used);
    take(j, "lane_speeds", p.lane_speeds, used);
    take(j, "truck_share", p.truck_share, used);
    take(j, "min_headway", p.min_headway, used);
    take(j, "mean_extra_headway", p.mean_extra_headway, used);
    take(j, "segment_length", p.segment_length, used);
    take(j, "both_directions", p.both_directions, used);
    reject_unknown(j, used);
    s = mixed_traffic(p, seed);
  } else if (kind == "custom") {
    s = script_from_json(j);
  } else {
    throw ConfigError("unknown scenario '" + kind + "'");
  }
  s.seed = seed;
  return s;
}

}  // namespace trajcrit::synth
