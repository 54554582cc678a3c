#include "trajcrit/macro.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

#include "trajcrit/error.hpp"
#include "trajcrit/parallel.hpp"

namespace trajcrit::macro {

int recording_frame_count(const Recording& rec) {
  int last = static_cast<int>(std::llround(rec.info.duration * rec.info.frame_rate));
  for (const auto& t : rec.tracks) {
    if (!t.frames.empty()) last = std::max(last, t.last_frame());
  }
  return last;
}

FrameRange frames_in(const Recording& rec, const Window& w) {
  const double fr = rec.info.frame_rate;
  // Frame f is at time (f - 1) / fr.
  const int first = static_cast<int>(std::ceil(w.t0 * fr - 1e-9)) + 1;
  const int last = std::min(static_cast<int>(std::ceil(w.t1 * fr - 1e-9)) + 1, recording_frame_count(rec) + 1);
  if (!(w.t0 < w.t1) || first >= last) throw EmptySliceError("window holds no recorded frame");
  return {std::max(first, 1), last};
}

std::size_t lane_count(const Recording& rec, Direction d) {
  const std::size_t through = rec.layout.through_lane_count(d);
  return through > 0 ? through : std::max<std::size_t>(rec.layout.lanes(d).size(), 1);
}

namespace {

// Calls fn(track, frame_index) for the frames of `t` inside the range.
template <typename Fn>
void for_frames(const Track& t, const FrameRange& r, Fn&& fn) {
  if (t.frames.empty()) return;
  const int a = std::max(r.first, t.first_frame());
  const int b = std::min(r.last, t.last_frame() + 1);
  for (int f = a; f < b; ++f) fn(static_cast<std::size_t>(f - t.first_frame()));
}

bool in_segment(const Recording& rec, Direction d, double front) {
  return front >= rec.segment.lo(d) && front < rec.segment.hi(d);
}

// Front bumper position one frame earlier; extrapolated for the first frame so
// a vehicle appearing exactly on the reference still counts as crossing.
double previous_x(const Track& t, std::size_t i, double dt) {
  return i > 0 ? t.frames[i - 1].x : t.frames[0].x - t.frames[0].vx * dt;
}

// Frame indices at which the front bumper passes reference_x.
template <typename Fn>
void for_crossings(const Track& t, double reference_x, const FrameRange& r, double dt, Fn&& fn) {
  for (std::size_t i = 0; i < t.frames.size(); ++i) {
    const int f = t.frames[i].frame;
    if (f < r.first || f >= r.last) continue;
    if (previous_x(t, i, dt) < reference_x && t.frames[i].x >= reference_x) fn(i);
  }
}

double km(const Recording& rec) {
  const double l = rec.segment.length();
  if (!(l > 0.0)) throw DataError("segment length must be positive");
  return l / 1000.0;
}

}  // namespace

double flow_rate(const Recording& rec, Direction d, const Window& w, std::optional<double> reference_x) {
  const FrameRange r = frames_in(rec, w);
  const double ref = reference_x.value_or(rec.segment.midpoint(d));
  long crossings = 0;
  for (const auto& t : rec.tracks) {
    if (t.direction != d) continue;
    for_crossings(t, ref, r, rec.dt(), [&](std::size_t) { ++crossings; });
  }
  return static_cast<double>(crossings) / w.hours() / static_cast<double>(lane_count(rec, d));
}

double length_adjusted_density(double segment_length, double mean_length_plus_gap) {
  if (!(mean_length_plus_gap > 0.0)) throw SpecError("mean vehicle length plus gap must be positive");
  return segment_length / mean_length_plus_gap;
}

DensityResult density(const Recording& rec, Direction d, const Window& w) {
  const FrameRange r = frames_in(rec, w);
  const TrackIndex index(rec);
  long present = 0;
  double sum_length_gap = 0.0;
  long pairs = 0;
  for (const auto& t : rec.tracks) {
    if (t.direction != d) continue;
    for_frames(t, r, [&](std::size_t i) {
      const FrameState& f = t.frames[i];
      if (!in_segment(rec, d, f.x)) return;
      ++present;
      if (!f.leader_id) return;
      const Track* lt = index.find(*f.leader_id);
      const FrameState* lf = lt ? lt->at(f.frame) : nullptr;
      if (!lf) return;
      const LeaderGap g = leader_gap(f, *lf, lt->length, lt->id);
      if (!g.valid()) return;
      sum_length_gap += t.length + g.gap;
      ++pairs;
    });
  }
  DensityResult out;
  const double frames = static_cast<double>(r.last - r.first);
  const double lanes = static_cast<double>(lane_count(rec, d));
  out.mean_vehicles = static_cast<double>(present) / frames;
  out.rho = out.mean_vehicles / km(rec) / lanes;
  out.pairs = pairs;
  if (pairs > 0) {
    out.rho_a = length_adjusted_density(rec.segment.length(), sum_length_gap / static_cast<double>(pairs));
    out.rho_a_per_km = *out.rho_a / km(rec) / lanes;
  }
  return out;
}

std::optional<double> mean_speed(const Recording& rec, Direction d, const Window& w, SpeedMode mode,
                                 std::optional<double> reference_x) {
  const FrameRange r = frames_in(rec, w);
  if (mode == SpeedMode::TimeMean) {
    const double ref = reference_x.value_or(rec.segment.midpoint(d));
    double sum = 0.0;
    long n = 0;
    for (const auto& t : rec.tracks) {
      if (t.direction != d) continue;
      for_crossings(t, ref, r, rec.dt(), [&](std::size_t i) {
        sum += t.frames[i].vx;
        ++n;
      });
    }
    if (n == 0) return std::nullopt;
    return sum / static_cast<double>(n) * 3.6;
  }
  const std::size_t nf = static_cast<std::size_t>(r.last - r.first);
  std::vector<double> sum(nf, 0.0);
  std::vector<long> count(nf, 0);
  for (const auto& t : rec.tracks) {
    if (t.direction != d) continue;
    for_frames(t, r, [&](std::size_t i) {
      const FrameState& f = t.frames[i];
      if (!in_segment(rec, d, f.x)) return;
      const auto k = static_cast<std::size_t>(f.frame - r.first);
      sum[k] += f.vx;
      ++count[k];
    });
  }
  double total = 0.0;
  long frames = 0;
  for (std::size_t k = 0; k < nf; ++k) {
    if (count[k] == 0) continue;
    total += sum[k] / static_cast<double>(count[k]);
    ++frames;
  }
  if (frames == 0) return std::nullopt;
  return total / static_cast<double>(frames) * 3.6;
}

std::string to_string(ChangeSide s) { return s == ChangeSide::Leftward ? "leftward" : "rightward"; }

LaneChangeDetection detect_lane_changes(const Track& track, const LaneLayout& layout, double frame_rate,
                                        double debounce) {
  struct Run {
    int lane;
    int start;
    int length;
  };
  std::vector<Run> runs;
  for (const auto& f : track.frames) {
    if (!runs.empty() && runs.back().lane == f.lane_id) {
      ++runs.back().length;
    } else {
      runs.push_back({f.lane_id, f.frame, 1});
    }
  }
  // Collapse short interior excursions that return to the lane they left.
  bool changed = true;
  while (changed) {
    changed = false;
    for (std::size_t i = 1; i + 1 < runs.size(); ++i) {
      if (runs[i - 1].lane != runs[i + 1].lane) continue;
      if (static_cast<double>(runs[i].length) / frame_rate >= debounce) continue;
      runs[i - 1].length += runs[i].length + runs[i + 1].length;
      runs.erase(runs.begin() + static_cast<long>(i), runs.begin() + static_cast<long>(i) + 2);
      changed = true;
      break;
    }
  }
  LaneChangeDetection out;
  for (std::size_t i = 1; i < runs.size(); ++i) {
    const int from = runs[i - 1].lane;
    const int to = runs[i].lane;
    const auto df = layout.direction_of(from);
    const auto dt = layout.direction_of(to);
    if (!df || !dt || *df != *dt) {
      out.anomalies.push_back({track.id, runs[i].start, from, to, "lanes on different roads"});
      continue;
    }
    const int step = layout.position(to) - layout.position(from);
    if (std::abs(step) != 1) {
      out.anomalies.push_back({track.id, runs[i].start, from, to, "transition skips a lane"});
      continue;
    }
    out.events.push_back({track.id, runs[i].start, from, to, step > 0 ? ChangeSide::Leftward : ChangeSide::Rightward,
                          *df});
  }
  return out;
}

LaneChangeDetection detect_all_lane_changes(const Recording& rec, unsigned jobs) {
  std::vector<LaneChangeDetection> per(rec.tracks.size());
  parallel_for(rec.tracks.size(), jobs, [&](std::size_t i) {
    per[i] = detect_lane_changes(rec.tracks[i], rec.layout, rec.info.frame_rate);
  });
  LaneChangeDetection out;
  for (auto& p : per) {
    out.events.insert(out.events.end(), p.events.begin(), p.events.end());
    out.anomalies.insert(out.anomalies.end(), p.anomalies.begin(), p.anomalies.end());
  }
  return out;
}

double lane_change_rate(long events, std::size_t lanes, double hours, double km_) {
  if (lanes == 0 || !(hours > 0.0) || !(km_ > 0.0)) throw SpecError("lane change rate needs positive lanes, hours and km");
  return static_cast<double>(events) / (static_cast<double>(lanes) * hours * km_);
}

namespace {

MinuteSlice make_slice(const Recording& rec, const std::vector<const measures::MeasureSeries*>& series,
                       const std::vector<LaneChangeEvent>& events, Direction d, const Window& w) {
  MinuteSlice s;
  s.recording_id = rec.info.id;
  s.direction = d;
  s.window = w;
  s.q = flow_rate(rec, d, w);
  const DensityResult dens = density(rec, d, w);
  s.rho = dens.rho;
  s.rho_a = dens.rho_a;
  s.rho_a_per_km = dens.rho_a_per_km;
  s.v_mean_time = mean_speed(rec, d, w, SpeedMode::TimeMean);
  s.v_mean_space = mean_speed(rec, d, w, SpeedMode::SpaceMean);

  const FrameRange r = frames_in(rec, w);
  double thw_sum[2] = {0.0, 0.0};
  long thw_n[2] = {0, 0};
  long vehicles = 0;
  long trucks = 0;
  for (std::size_t k = 0; k < rec.tracks.size(); ++k) {
    const Track& t = rec.tracks[k];
    if (t.direction != d) continue;
    const measures::MeasureSeries* ms = series[k];
    const int c = t.vehicle_class == VehicleClass::Car ? 0 : 1;
    bool seen = false;
    for_frames(t, r, [&](std::size_t i) {
      if (!in_segment(rec, d, t.frames[i].x)) return;
      seen = true;
      if (ms && ms->thw[i] && *ms->thw[i] < kCarFollowingThw) {
        thw_sum[c] += *ms->thw[i];
        ++thw_n[c];
      }
    });
    if (seen) {
      ++vehicles;
      if (c == 1) ++trucks;
    }
  }
  if (thw_n[0] > 0) s.thw_mean_car = thw_sum[0] / static_cast<double>(thw_n[0]);
  if (thw_n[1] > 0) s.thw_mean_truck = thw_sum[1] / static_cast<double>(thw_n[1]);
  if (thw_n[0] + thw_n[1] > 0) s.thw_mean = (thw_sum[0] + thw_sum[1]) / static_cast<double>(thw_n[0] + thw_n[1]);
  s.vehicles = vehicles;
  if (vehicles > 0) s.truck_share = static_cast<double>(trucks) / static_cast<double>(vehicles);
  for (const auto& e : events) {
    if (e.direction == d && e.frame >= r.first && e.frame < r.last) ++s.lane_change_count;
  }
  s.lane_change_rate = lane_change_rate(s.lane_change_count, lane_count(rec, d), w.hours(), km(rec));
  return s;
}

}  // namespace

std::vector<MinuteSlice> minute_slices(const Recording& rec, const std::vector<measures::MeasureSeries>& series,
                                       const std::vector<LaneChangeEvent>& events, unsigned jobs) {
  const double duration = recording_frame_count(rec) / rec.info.frame_rate;
  const int per_road = static_cast<int>(std::floor(duration / 60.0 + 1e-9));
  std::vector<const measures::MeasureSeries*> aligned(rec.tracks.size(), nullptr);
  {
    std::map<int, const measures::MeasureSeries*> by_id;
    for (const auto& s : series) by_id[s.track_id] = &s;
    for (std::size_t k = 0; k < rec.tracks.size(); ++k) {
      auto it = by_id.find(rec.tracks[k].id);
      if (it != by_id.end() && it->second->size() == rec.tracks[k].frames.size()) aligned[k] = it->second;
    }
  }
  std::vector<std::pair<Direction, int>> work;
  for (Direction d : {Direction::Upper, Direction::Lower}) {
    if (rec.layout.lanes(d).empty()) continue;
    for (int k = 0; k < per_road; ++k) work.emplace_back(d, k);
  }
  std::vector<MinuteSlice> out(work.size());
  parallel_for(work.size(), jobs, [&](std::size_t i) {
    const auto [d, k] = work[i];
    out[i] = make_slice(rec, aligned, events, d, Window{60.0 * k, 60.0 * (k + 1)});
  });
  return out;
}

std::vector<MinuteSlice> minute_slices(const Recording& rec, unsigned jobs) {
  const auto series = measures::compute_all(rec, measures::RpParams{}, jobs);
  const auto changes = detect_all_lane_changes(rec, jobs);
  return minute_slices(rec, series, changes.events, jobs);
}

std::vector<LaneLoad> lane_load(const Recording& rec) {
  std::vector<LaneLoad> out;
  const double hours = recording_frame_count(rec) / rec.info.frame_rate / 3600.0;
  for (Direction d : {Direction::Upper, Direction::Lower}) {
    const auto& lanes = rec.layout.lanes(d);
    if (lanes.empty()) continue;
    std::map<int, long> frames;
    std::map<int, long> crossings;
    long total = 0;
    const double ref = rec.segment.midpoint(d);
    for (const auto& t : rec.tracks) {
      if (t.direction != d) continue;
      for (std::size_t i = 0; i < t.frames.size(); ++i) {
        ++frames[t.frames[i].lane_id];
        ++total;
        if (previous_x(t, i, rec.dt()) < ref && t.frames[i].x >= ref) ++crossings[t.frames[i].lane_id];
      }
    }
    for (const auto& lane : lanes) {
      LaneLoad l;
      l.direction = d;
      l.lane_id = lane.id;
      l.role = lane.role;
      l.frames = frames[lane.id];
      l.share = total > 0 ? static_cast<double>(l.frames) / static_cast<double>(total) : 0.0;
      l.q = hours > 0.0 ? static_cast<double>(crossings[lane.id]) / hours : 0.0;
      out.push_back(l);
    }
  }
  return out;
}

std::vector<LaneChangeRates> lane_change_rates(const Recording& rec, const std::vector<MinuteSlice>& slices,
                                               const std::vector<LaneChangeEvent>& events) {
  std::vector<LaneChangeRates> out;
  for (Direction d : {Direction::Upper, Direction::Lower}) {
    std::vector<FrameRange> ranges;
    double hours = 0.0;
    for (const auto& s : slices) {
      if (s.direction != d) continue;
      ranges.push_back(frames_in(rec, s.window));
      hours += s.window.hours();
    }
    if (ranges.empty()) continue;
    LaneChangeRates r;
    r.direction = d;
    r.lanes = lane_count(rec, d);
    r.hours = hours;
    r.km = km(rec);
    std::map<int, long> origin;
    std::map<std::pair<int, int>, long> pairs;
    for (const auto& e : events) {
      if (e.direction != d) continue;
      const bool inside = std::any_of(ranges.begin(), ranges.end(),
                                      [&](const FrameRange& fr) { return e.frame >= fr.first && e.frame < fr.last; });
      if (!inside) continue;
      ++r.events;
      ++origin[e.from_lane];
      ++pairs[{e.from_lane, e.to_lane}];
    }
    r.rate = lane_change_rate(r.events, r.lanes, r.hours, r.km);
    for (const auto& lane : rec.layout.lanes(d)) {
      const long c = origin.count(lane.id) ? origin[lane.id] : 0;
      r.by_origin.push_back({lane.id, c, lane_change_rate(c, 1, r.hours, r.km)});
    }
    for (const auto& [key, c] : pairs) r.by_pair.push_back({key.first, key.second, c, lane_change_rate(c, 1, r.hours, r.km)});
    out.push_back(std::move(r));
  }
  return out;
}

namespace {

std::vector<double> linspace(double lo, double hi, int n) {
  std::vector<double> v(static_cast<std::size_t>(n));
  if (n == 1) {
    v[0] = lo;
    return v;
  }
  for (int i = 0; i < n; ++i) v[static_cast<std::size_t>(i)] = lo + (hi - lo) * static_cast<double>(i) / (n - 1);
  v.back() = hi;
  return v;
}

}  // namespace

TentGrid tent_grid(const std::vector<Point2>& points, const TentGridOptions& o) {
  double xmin = std::numeric_limits<double>::infinity(), xmax = -xmin, ymax = 0.0;
  for (const auto& p : points) {
    xmin = std::min(xmin, p.x);
    xmax = std::max(xmax, p.x);
    ymax = std::max(ymax, p.y);
  }
  double span = xmax - xmin;
  if (!(span > 0.0)) span = std::max(1.0, std::abs(xmax));
  TentGrid g;
  g.apex_x = linspace(xmin, xmax, o.apex_x_steps);
  g.apex_y = linspace(ymax / 100.0, 2.0 * ymax, o.apex_y_steps);
  g.left = linspace(xmin - span, xmax, o.zero_steps);
  g.right = linspace(xmin, xmax + span, o.zero_steps);
  return g;
}

namespace {

enum class Side { Always, Never, Left, Right };

// Classifies p against every tent with the given apex. Left points are
// enclosed iff left <= k, right points iff right >= k.
Side classify(double ax, double ay, const Point2& p, double& k) {
  if (p.y <= 0.0) return Side::Always;
  if (p.y > ay) return Side::Never;
  if (p.y == ay) return p.x == ax ? Side::Always : Side::Never;
  if (p.x == ax) return Side::Always;
  k = (ay * p.x - p.y * ax) / (ay - p.y);
  return p.x < ax ? Side::Left : Side::Right;
}

long required_count(double target, long n) {
  long need = static_cast<long>(std::ceil(target * static_cast<double>(n) - 1e-9));
  while (static_cast<double>(need) / static_cast<double>(n) < target) ++need;
  while (need > 0 && static_cast<double>(need - 1) / static_cast<double>(n) >= target) --need;
  return std::min(need, n);
}

}  // namespace

bool tent_encloses(double apex_x, double apex_y, double left, double right, const Point2& p) {
  double k = 0.0;
  switch (classify(apex_x, apex_y, p, k)) {
    case Side::Always: return true;
    case Side::Never: return false;
    case Side::Left: return left < apex_x && left <= k;
    case Side::Right: return right > apex_x && right >= k;
  }
  return false;
}

TriangularFit triangular_fit(const std::vector<Point2>& points, double coverage_target, const TentGridOptions& options) {
  if (points.size() < 3) throw SpecError("triangular fit needs at least 3 points");
  if (!(coverage_target > 0.0 && coverage_target <= 1.0)) throw SpecError("coverage target must lie in (0, 1]");
  const long n = static_cast<long>(points.size());
  const long need = required_count(coverage_target, n);

  double xmin = std::numeric_limits<double>::infinity(), xmax = -xmin, ymax = -xmin;
  for (const auto& p : points) {
    xmin = std::min(xmin, p.x);
    xmax = std::max(xmax, p.x);
    ymax = std::max(ymax, p.y);
  }
  auto recount = [&](TriangularFit& f) {
    f.n = n;
    f.enclosed = 0;
    for (const auto& p : points) f.enclosed += tent_encloses(f.apex_x, f.apex_y, f.left_zero_x, f.right_zero_x, p);
    f.coverage = static_cast<double>(f.enclosed) / static_cast<double>(n);
  };
  if (!(ymax > 0.0)) {
    TriangularFit f{0.5 * (xmin + xmax), 0.0, xmin, xmax, 0.0, 0, n};
    recount(f);
    return f;
  }

  const TentGrid g = tent_grid(points, options);
  const std::size_t nl = g.left.size(), nr = g.right.size();
  std::vector<long> left_bins(nl + 1), right_bins(nr + 1);
  std::vector<long> cl(nl), cr(nr);
  double best_area = std::numeric_limits<double>::infinity();
  TriangularFit best;
  for (double ax : g.apex_x) {
    // Valid zeros lie strictly on either side of the apex.
    const std::size_t l_end = static_cast<std::size_t>(std::lower_bound(g.left.begin(), g.left.end(), ax) - g.left.begin());
    const std::size_t r_begin = static_cast<std::size_t>(std::upper_bound(g.right.begin(), g.right.end(), ax) - g.right.begin());
    if (l_end == 0 || r_begin == nr) continue;
    for (double ay : g.apex_y) {
      std::fill(left_bins.begin(), left_bins.end(), 0);
      std::fill(right_bins.begin(), right_bins.end(), 0);
      long always = 0;
      for (const auto& p : points) {
        double k = 0.0;
        switch (classify(ax, ay, p, k)) {
          case Side::Always: ++always; break;
          case Side::Never: break;
          // Left: enclosed by left zeros with index < upper_bound(k).
          case Side::Left:
            ++left_bins[static_cast<std::size_t>(std::upper_bound(g.left.begin(), g.left.end(), k) - g.left.begin())];
            break;
          // Right: enclosed by right zeros with index >= lower_bound(k).
          case Side::Right:
            ++right_bins[static_cast<std::size_t>(std::lower_bound(g.right.begin(), g.right.end(), k) - g.right.begin())];
            break;
        }
      }
      // cl[i]: left points enclosed with zero g.left[i] (non-increasing in i).
      long acc = 0;
      for (std::size_t i = nl; i-- > 0;) {
        acc += left_bins[i + 1];
        cl[i] = acc;
      }
      // cr[j]: right points enclosed with zero g.right[j] (non-decreasing in j).
      acc = 0;
      for (std::size_t j = 0; j < nr; ++j) {
        acc += right_bins[j];
        cr[j] = acc;
      }
      if (always + cl[0] + cr[nr - 1] < need) continue;
      // Moving the left zero inwards only ever pushes the right zero outwards.
      std::size_t jmin = r_begin;
      for (std::size_t i = 0; i < l_end; ++i) {
        const long rest = need - always - cl[i];
        // Smallest j >= jmin with cr[j] >= rest.
        while (jmin < nr && cr[jmin] < rest) ++jmin;
        if (jmin >= nr) break;
        const double area = 0.5 * (g.right[jmin] - g.left[i]) * ay;
        if (area < best_area) {
          best_area = area;
          best = TriangularFit{ax, ay, g.left[i], g.right[jmin], 0.0, 0, n};
        }
      }
    }
  }
  recount(best);
  if (best.enclosed < need) throw SpecError("triangular fit failed to reach the coverage target");
  return best;
}

std::vector<FundamentalPoint> fundamental_points(const std::vector<MinuteSlice>& slices) {
  std::vector<FundamentalPoint> out;
  out.reserve(slices.size());
  for (const auto& s : slices) out.push_back({s.direction, s.window.t0, s.rho, s.q, s.v_mean_space});
  return out;
}

}  // namespace trajcrit::macro
