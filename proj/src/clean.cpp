#include "trajcrit/clean.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "csv.hpp"
#include "trajcrit/error.hpp"
#include "trajcrit/measures.hpp"
#include "trajcrit/parallel.hpp"

namespace trajcrit::clean {

std::optional<Track> trim_last_frame(const Track& track) {
  if (track.last_frame_trimmed) return track;
  if (track.frames.size() < 2) return std::nullopt;
  Track out = track;
  out.frames.pop_back();
  out.last_frame_trimmed = true;
  return out;
}

std::optional<Discard> check_track(const Track& track, const LaneLayout& layout, double dt, const RuleConfig& rules) {
  // R1: negative THW, which the dataset produces for standing vehicles that
  // creep backwards.
  for (const auto& f : track.frames) {
    if (f.thw_raw && *f.thw_raw < 0.0) {
      const bool standstill = std::abs(f.vx) < rules.standstill_speed;
      return Discard{track.id, kNegativeThw, f.frame, *f.thw_raw,
                     standstill ? "negative THW at standstill" : "negative THW"};
    }
    if (f.leader_id && f.vx < -measures::kSpeedEps) {
      return Discard{track.id, kNegativeThw, f.frame, f.vx, "moving backwards behind a leader"};
    }
  }
  // R2: implausible acceleration.
  for (const auto& f : track.frames) {
    if (std::abs(f.ax) > rules.ax_cap) return Discard{track.id, kAcceleration, f.frame, f.ax, "|a_x| above cap"};
    if (std::abs(f.ay) > rules.ay_cap) return Discard{track.id, kAcceleration, f.frame, f.ay, "|a_y| above cap"};
  }
  // R3: position does not follow from speed.
  int violations = 0;
  for (std::size_t i = 1; i < track.frames.size(); ++i) {
    const auto& a = track.frames[i - 1];
    const auto& b = track.frames[i];
    if (!kinematically_consistent(a, b, dt, rules.ax_cap, rules.kinematic_pos_tolerance)) {
      if (++violations > rules.max_kinematic_violations) {
        return Discard{track.id, kKinematics, b.frame, b.x - a.x - a.vx * dt,
                       std::to_string(violations) + " inconsistent frame pairs"};
      }
    }
  }
  // R4: lane on the wrong road, or net motion against the driving direction.
  for (const auto& f : track.frames) {
    const auto d = layout.direction_of(f.lane_id);
    if (!d || *d != track.direction) {
      return Discard{track.id, kDirection, f.frame, static_cast<double>(f.lane_id), "lane belongs to the other road"};
    }
  }
  if (track.normalized && !track.frames.empty()) {
    const double net = track.frames.back().x - track.frames.front().x;
    if (net < -rules.kinematic_pos_tolerance) {
      return Discard{track.id, kDirection, track.last_frame(), net, "net displacement against driving direction"};
    }
  }
  return std::nullopt;
}

std::pair<Recording, CleanReport> apply_filters(const Recording& rec, const RuleConfig& rules, unsigned jobs) {
  CleanReport report;
  report.tracks_in = static_cast<long>(rec.tracks.size());
  std::vector<std::optional<Discard>> verdicts(rec.tracks.size());
  parallel_for(rec.tracks.size(), jobs,
               [&](std::size_t i) { verdicts[i] = check_track(rec.tracks[i], rec.layout, rec.dt(), rules); });

  Recording out = rec;
  out.tracks.clear();
  for (std::size_t i = 0; i < rec.tracks.size(); ++i) {
    if (verdicts[i]) {
      report.discarded.push_back(*verdicts[i]);
    } else {
      out.tracks.push_back(rec.tracks[i]);
    }
  }
  std::sort(report.discarded.begin(), report.discarded.end(),
            [](const Discard& a, const Discard& b) { return a.track_id < b.track_id; });

  const auto series = measures::compute_all(out, measures::RpParams{}, jobs);
  for (const auto& s : series) {
    const auto m = measures::track_minima(s);
    if (m.ttc && m.ttc->value <= rules.ttc_review) {
      report.flagged.push_back({s.track_id, kTtcReview, m.ttc->frame, m.ttc->value});
    }
  }
  std::sort(report.flagged.begin(), report.flagged.end(),
            [](const Flag& a, const Flag& b) { return a.track_id < b.track_id; });

  report.tracks_out = static_cast<long>(out.tracks.size());
  report.vehicles_without_leader = count_leaderless(out);
  return {std::move(out), std::move(report)};
}

long count_leaderless(const Recording& rec) {
  long n = 0;
  for (const auto& t : rec.tracks) {
    const bool any = std::any_of(t.frames.begin(), t.frames.end(), [](const FrameState& f) { return f.leader_id.has_value(); });
    if (!any) ++n;
  }
  return n;
}

std::pair<Recording, CleanReport> clean_recording(const Recording& rec, const RuleConfig& rules, unsigned jobs) {
  Recording trimmed = rec;
  trimmed.tracks.clear();
  std::vector<Discard> empty;
  long frames_trimmed = 0;
  for (const auto& t : rec.tracks) {
    auto r = trim_last_frame(t);
    if (!r) {
      empty.push_back({t.id, kTrimEmpty, t.frames.empty() ? 0 : t.first_frame(), 0.0, "single-frame track"});
      continue;
    }
    if (!t.last_frame_trimmed) ++frames_trimmed;
    trimmed.tracks.push_back(std::move(*r));
  }
  auto [out, report] = apply_filters(trimmed, rules, jobs);
  report.tracks_in = static_cast<long>(rec.tracks.size());
  report.frames_trimmed = frames_trimmed;
  report.discarded.insert(report.discarded.end(), empty.begin(), empty.end());
  std::sort(report.discarded.begin(), report.discarded.end(),
            [](const Discard& a, const Discard& b) { return a.track_id < b.track_id; });
  measures::attach_minima(out);
  return {std::move(out), std::move(report)};
}

void write_flagged_csv(const CleanReport& report, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  out << "track_id,rule,frame,value\n";
  for (const auto& f : report.flagged) {
    out << f.track_id << ',' << f.rule_id << ',' << f.frame << ',' << csv::format(f.value) << '\n';
  }
  for (const auto& d : report.discarded) {
    out << d.track_id << ',' << d.rule_id << ',' << d.frame << ',' << csv::format(d.value) << '\n';
  }
}

}  // namespace trajcrit::clean
