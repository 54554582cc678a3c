#include "trajcrit/measures.hpp"

#include <cmath>

#include "trajcrit/error.hpp"
#include "trajcrit/parallel.hpp"

namespace trajcrit::measures {

void RpParams::validate() const {
  if (!(a >= 0.0) || !(b >= 0.0) || !(a + b > 0.0)) {
    throw ConfigError("RP weights must satisfy A >= 0, B >= 0, A + B > 0");
  }
}

std::optional<double> thw(const LeaderGap& gap, double follower_speed) {
  if (follower_speed <= kSpeedEps) return std::nullopt;
  return gap.gap / follower_speed;
}

std::optional<double> ttc(const LeaderGap& gap) {
  if (std::abs(gap.rel_speed) < kSpeedEps) return std::nullopt;
  return gap.gap / gap.rel_speed;
}

std::optional<double> ettc(const LeaderGap& gap) {
  const double x = gap.gap;
  const double v = gap.rel_speed;
  const double a = gap.rel_accel;
  if (std::abs(a) < kAccelEps) {
    auto t = ttc(gap);
    if (t && *t > 0.0) return t;
    return std::nullopt;
  }
  // 0.5 a t^2 + v t - x = 0
  const double qa = 0.5 * a;
  const double disc = v * v + 2.0 * a * x;
  if (disc < 0.0) return std::nullopt;
  const double root = std::sqrt(disc);
  const double q = -0.5 * (v + (v >= 0.0 ? root : -root));
  std::optional<double> best;
  auto consider = [&](double t) {
    if (std::isfinite(t) && t > 0.0 && (!best || t < *best)) best = t;
  };
  if (q != 0.0) {
    consider(q / qa);
    consider(-x / q);
  } else {
    // v == 0 and disc == 0, which means x == 0 as well.
    consider(0.0);
  }
  return best;
}

std::optional<double> rp(std::optional<double> thw_value, std::optional<double> ttc_value, const RpParams& params) {
  if (!thw_value || *thw_value <= 0.0) return std::nullopt;
  if (ttc_value && *ttc_value > 0.0) return params.a / *thw_value + params.b / *ttc_value;
  if (!ttc_value && params.thw_only_without_ttc) return params.a / *thw_value;
  return std::nullopt;
}

MeasureSeries compute_series(const Track& track, const TrackIndex& index, const RpParams& params) {
  MeasureSeries s;
  s.track_id = track.id;
  const std::size_t n = track.frames.size();
  s.frames.resize(n);
  s.speed.resize(n);
  s.leader.resize(n);
  s.dhw.resize(n);
  s.thw.resize(n);
  s.ttc.resize(n);
  s.ettc.resize(n);
  s.rp.resize(n);
  s.rel_speed.resize(n);
  s.rel_accel.resize(n);

  const Track* leader_track = nullptr;
  for (std::size_t i = 0; i < n; ++i) {
    const FrameState& f = track.frames[i];
    s.frames[i] = f.frame;
    s.speed[i] = f.vx;
    s.leader[i] = f.leader_id;
    if (!f.leader_id) continue;
    if (!leader_track || leader_track->id != *f.leader_id) leader_track = index.find(*f.leader_id);
    if (!leader_track) continue;
    const FrameState* lf = leader_track->at(f.frame);
    if (!lf) continue;
    const LeaderGap gap = leader_gap(f, *lf, leader_track->length, leader_track->id);
    if (!gap.valid()) {
      s.negative_gap_frames.push_back(f.frame);
      continue;
    }
    s.dhw[i] = gap.gap;
    s.rel_speed[i] = gap.rel_speed;
    s.rel_accel[i] = gap.rel_accel;
    s.thw[i] = thw(gap, f.vx);
    s.ttc[i] = ttc(gap);
    s.ettc[i] = ettc(gap);
    s.rp[i] = rp(s.thw[i], s.ttc[i], params);
  }
  return s;
}

std::vector<MeasureSeries> compute_all(const Recording& rec, const RpParams& params, unsigned jobs) {
  params.validate();
  TrackIndex index(rec);
  std::vector<MeasureSeries> out(rec.tracks.size());
  parallel_for(rec.tracks.size(), jobs, [&](std::size_t i) { out[i] = compute_series(rec.tracks[i], index, params); });
  return out;
}

namespace {

template <typename Better>
std::optional<Extremum> scan(const MeasureSeries& s, const std::vector<std::optional<double>>& values, Better better) {
  std::optional<Extremum> best;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (!values[i]) continue;
    const double v = *values[i];
    if (!best || better(v, best->value)) best = Extremum{v, s.frames[i]};
  }
  return best;
}

}  // namespace

TrackMinima track_minima(const MeasureSeries& s) {
  TrackMinima m;
  const auto less = [](double a, double b) { return a < b; };
  m.thw = scan(s, s.thw, less);
  m.dhw = scan(s, s.dhw, less);
  m.rp = scan(s, s.rp, [](double a, double b) { return a > b; });
  for (std::size_t i = 0; i < s.ttc.size(); ++i) {
    if (!s.ttc[i] || *s.ttc[i] <= 0.0) continue;
    if (!m.ttc || *s.ttc[i] < m.ttc->value) m.ttc = Extremum{*s.ttc[i], s.frames[i]};
  }
  return m;
}

void attach_minima(Recording& rec) {
  const auto all = compute_all(rec, RpParams{}, 1);
  for (std::size_t i = 0; i < rec.tracks.size(); ++i) {
    const auto m = track_minima(all[i]);
    Track& t = rec.tracks[i];
    t.min_thw = m.thw ? std::optional<double>(m.thw->value) : std::nullopt;
    t.min_ttc = m.ttc ? std::optional<double>(m.ttc->value) : std::nullopt;
    t.min_dhw = m.dhw ? std::optional<double>(m.dhw->value) : std::nullopt;
  }
}

}  // namespace trajcrit::measures
