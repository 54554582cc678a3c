#include "trajcrit/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "trajcrit/error.hpp"

namespace trajcrit::pipeline {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

const std::set<std::string>& known_analyses() {
  static const std::set<std::string> k{"stats", "macro", "risk"};
  return k;
}

std::string read_text(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw ConfigError("cannot read " + p.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

json parse_json_file(const fs::path& p) {
  try {
    return json::parse(read_text(p));
  } catch (const json::parse_error& e) {
    throw ConfigError(p.string() + ": " + e.what());
  }
}

template <typename T>
void take(const json& j, const char* key, T& out) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config '") + key + "': " + e.what());
  }
}

void reject_unknown(const json& j, std::initializer_list<const char*> keys, const std::string& where) {
  for (const auto& [k, v] : j.items()) {
    if (std::none_of(keys.begin(), keys.end(), [&](const char* s) { return k == s; })) {
      throw ConfigError("unknown key '" + k + "' in " + where);
    }
  }
}

fs::path resolve(const fs::path& base, const std::string& p) {
  fs::path path(p);
  return path.is_absolute() || base.empty() ? path : base / path;
}

bool inside(const fs::path& child, const fs::path& parent) {
  std::error_code ec;
  const auto c = fs::weakly_canonical(child, ec);
  const auto p = fs::weakly_canonical(parent, ec);
  auto ci = c.begin();
  for (auto pi = p.begin(); pi != p.end(); ++pi, ++ci) {
    if (pi->empty()) continue;
    if (ci == c.end() || *ci != *pi) return false;
  }
  return true;
}

}  // namespace

RunConfig RunConfig::from_json(const json& j, const fs::path& base) {
  if (!j.is_object()) throw ConfigError("run config must be a JSON object");
  reject_unknown(j,
                 {"data", "script", "out", "analyses", "rules", "segment_length", "clean", "rp", "rp_study",
                  "thw_undercut", "undercut_v_min", "fit_coverage", "jobs"},
                 "run config");
  RunConfig c;
  if (j.contains("data")) c.data_dir = resolve(base, j.at("data").get<std::string>());
  if (j.contains("script")) c.script = resolve(base, j.at("script").get<std::string>());
  if (j.contains("out")) c.out_dir = resolve(base, j.at("out").get<std::string>());
  if (j.contains("rules")) c.rules_file = resolve(base, j.at("rules").get<std::string>());
  if (j.contains("analyses")) {
    c.analyses.clear();
    for (const auto& a : j.at("analyses")) c.analyses.insert(a.get<std::string>());
  }
  if (j.contains("segment_length")) c.segment_length = j.at("segment_length").get<double>();
  if (j.contains("clean")) {
    const auto& k = j.at("clean");
    reject_unknown(k,
                   {"ax_cap", "ay_cap", "max_kinematic_violations", "kinematic_pos_tolerance", "standstill_speed",
                    "ttc_review"},
                   "clean");
    take(k, "ax_cap", c.clean.ax_cap);
    take(k, "ay_cap", c.clean.ay_cap);
    take(k, "max_kinematic_violations", c.clean.max_kinematic_violations);
    take(k, "kinematic_pos_tolerance", c.clean.kinematic_pos_tolerance);
    take(k, "standstill_speed", c.clean.standstill_speed);
    take(k, "ttc_review", c.clean.ttc_review);
  }
  if (j.contains("rp")) {
    const auto& k = j.at("rp");
    reject_unknown(k, {"a", "b", "thw_only_without_ttc"}, "rp");
    take(k, "a", c.rp_params.a);
    take(k, "b", c.rp_params.b);
    take(k, "thw_only_without_ttc", c.rp_params.thw_only_without_ttc);
  }
  if (j.contains("rp_study")) {
    const auto& k = j.at("rp_study");
    reject_unknown(k,
                   {"a", "b_grid", "thresholds", "tailgating", "braking_window", "braking_thresholds",
                    "lane_change_window", "set_b", "set_threshold"},
                   "rp_study");
    auto& s = c.rp_study;
    take(k, "a", s.a);
    take(k, "b_grid", s.b_grid);
    take(k, "thresholds", s.thresholds);
    take(k, "tailgating", s.tailgating);
    take(k, "braking_window", s.braking_window);
    take(k, "braking_thresholds", s.braking_thresholds);
    take(k, "lane_change_window", s.lane_change_window);
    take(k, "set_b", s.set_b);
    take(k, "set_threshold", s.set_threshold);
  }
  take(j, "thw_undercut", c.thw_undercut);
  take(j, "undercut_v_min", c.undercut_v_min);
  take(j, "fit_coverage", c.fit_coverage);
  take(j, "jobs", c.jobs);
  return c;
}

RunConfig RunConfig::load(const fs::path& path) { return from_json(parse_json_file(path), path.parent_path()); }

json RunConfig::analysis_json() const {
  const auto& s = rp_study;
  json j{{"analyses", std::vector<std::string>(analyses.begin(), analyses.end())},
         {"clean",
          {{"ax_cap", clean.ax_cap},
           {"ay_cap", clean.ay_cap},
           {"max_kinematic_violations", clean.max_kinematic_violations},
           {"kinematic_pos_tolerance", clean.kinematic_pos_tolerance},
           {"standstill_speed", clean.standstill_speed},
           {"ttc_review", clean.ttc_review}}},
         {"rp", {{"a", rp_params.a}, {"b", rp_params.b}, {"thw_only_without_ttc", rp_params.thw_only_without_ttc}}},
         {"rp_study",
          {{"a", s.a},
           {"b_grid", s.b_grid},
           {"thresholds", s.thresholds},
           {"tailgating", s.tailgating},
           {"braking_window", s.braking_window},
           {"braking_thresholds", s.braking_thresholds},
           {"lane_change_window", s.lane_change_window},
           {"set_b", s.set_b},
           {"set_threshold", s.set_threshold}}},
         {"thw_undercut", thw_undercut},
         {"undercut_v_min", undercut_v_min},
         {"fit_coverage", fit_coverage},
         {"segment_length", segment_length ? json(*segment_length) : json(nullptr)}};
  // The rule set is part of the configuration, not of the input data.
  j["rules"] = rules_file ? risk::RuleSet::load(*rules_file).to_json() : json(nullptr);
  return j;
}

void RunConfig::validate(bool needs_output) const {
  if (data_dir.has_value() == script.has_value()) throw ConfigError("exactly one of --data or a scenario script is required");
  if (needs_output && !out_dir) throw ConfigError("--out is required");
  if (out_dir && data_dir && inside(*out_dir, *data_dir)) throw ConfigError("output directory lies inside the input");
  for (const auto& a : analyses) {
    if (!known_analyses().count(a)) throw ConfigError("unknown analysis '" + a + "'");
  }
  if (segment_length && !(*segment_length > 0.0)) throw ConfigError("segment length must be positive");
  if (!(fit_coverage > 0.0 && fit_coverage <= 1.0)) throw ConfigError("fit coverage must lie in (0, 1]");
  rp_params.validate();
  rp_study.validate();
}

namespace {

LoadedRecording prepare(Recording rec, ingest::IngestReport ingest_report, const RunConfig& config) {
  LoadedRecording out;
  out.ingest = std::move(ingest_report);
  auto [cleaned, report] = clean::clean_recording(rec, config.clean, config.jobs);
  out.clean = std::move(report);
  out.recording = std::move(cleaned);
  out.series = measures::compute_all(out.recording, config.rp_params, config.jobs);
  out.lane_changes = macro::detect_all_lane_changes(out.recording, config.jobs);
  return out;
}

synth::ScenarioScript script_from_file(const json& j) {
  if (j.contains("vehicles")) return synth::script_from_json(j);
  if (!j.contains("kind")) throw ConfigError("scenario file needs 'kind' or 'vehicles'");
  reject_unknown(j, {"kind", "params", "seed"}, "scenario file");
  return synth::make_scenario(j.at("kind").get<std::string>(), j.value("params", json::object()),
                              j.value("seed", std::uint64_t{1}));
}

}  // namespace

Inputs load_inputs(const RunConfig& config) {
  Inputs in;
  const json cfg = config.analysis_json();
  if (config.script) {
    const std::string text = read_text(*config.script);
    json j;
    try {
      j = json::parse(text);
    } catch (const json::parse_error& e) {
      throw ConfigError(config.script->string() + ": " + e.what());
    }
    auto gt = synth::generate(script_from_file(j));
    if (config.segment_length) gt.recording.segment = Segment{0.0, *config.segment_length};
    in.manifest = report::make_manifest(cfg, text, config.script->filename().generic_string());
    in.recordings.push_back(prepare(std::move(gt.recording), {}, config));
    return in;
  }
  const fs::path dir = *config.data_dir;
  if (!fs::is_directory(dir)) throw DataError("data directory not found: " + dir.string());
  const auto found = ingest::RawDatasetPaths::discover(dir);
  if (found.empty()) throw DataError("no recordings in " + dir.string());
  std::vector<fs::path> files;
  for (const auto& p : found) {
    p.check();
    files.insert(files.end(), {p.recording_meta, p.tracks_meta, p.tracks});
  }
  in.manifest = report::make_manifest(cfg, files, dir);
  ingest::IngestOptions options;
  if (config.segment_length) options.segment = Segment{0.0, *config.segment_length};
  for (const auto& p : found) {
    auto result = ingest::load_recording(p, options);
    in.recordings.push_back(prepare(std::move(result.recording), std::move(result.report), config));
  }
  return in;
}

risk::RuleSet load_rules(const RunConfig& config) {
  return config.rules_file ? risk::RuleSet::load(*config.rules_file) : risk::RuleSet{};
}

void add_validation(report::Bundle& bundle, const Inputs& in) {
  json cleaning = json::array(), ingestion = json::array();
  for (const auto& r : in.recordings) {
    cleaning.push_back(report::to_json(r.clean, r.recording.info.id));
    ingestion.push_back(report::to_json(r.ingest, r.recording.info.id));
  }
  bundle.add("clean_report", "clean_report", cleaning);
  bundle.add("ingest_report", "ingest_report", ingestion);
}

namespace {

constexpr double kKmh = 3.6;

void add_hist(report::Bundle& b, const std::string& name, const std::vector<double>& v,
              const stats::HistogramSpec& spec, const std::string& quantity, const std::string& unit) {
  json data = report::to_json(stats::histogram(v, spec));
  data["quantity"] = quantity;
  data["unit"] = unit;
  b.add(name, "histogram", std::move(data));
}

template <typename Fit>
void add_fit(report::Bundle& b, const std::string& name, const std::vector<double>& v, Fit fit,
             const std::string& quantity) {
  try {
    json data = report::to_json(fit(v));
    data["quantity"] = quantity;
    data["n"] = v.size();
    b.add(name, "fit", std::move(data));
  } catch (const SpecError&) {
    // Too few or degenerate samples; the fit is simply not part of the bundle.
  }
}

}  // namespace

void add_stats(report::Bundle& bundle, const Inputs& in) {
  std::vector<double> v_min, v_mean, v_max, v_car, v_truck, ax_all, ay_all, ax_min, ax_max;
  std::vector<double> thw_min, ttc_min, dhw_min, joint_thw, joint_ttc;
  for (const auto& r : in.recordings) {
    for (const auto& t : r.recording.tracks) {
      if (t.frames.empty()) continue;
      double lo = t.frames[0].vx, hi = lo, sum = 0.0, amin = t.frames[0].ax, amax = amin;
      auto& frames_v = t.vehicle_class == VehicleClass::Car ? v_car : v_truck;
      for (const auto& f : t.frames) {
        lo = std::min(lo, f.vx);
        hi = std::max(hi, f.vx);
        sum += f.vx;
        amin = std::min(amin, f.ax);
        amax = std::max(amax, f.ax);
        frames_v.push_back(f.vx * kKmh);
        ax_all.push_back(f.ax);
        ay_all.push_back(f.ay);
      }
      v_min.push_back(lo * kKmh);
      v_max.push_back(hi * kKmh);
      v_mean.push_back(sum / static_cast<double>(t.frames.size()) * kKmh);
      ax_min.push_back(amin);
      ax_max.push_back(amax);
      if (t.min_thw) thw_min.push_back(*t.min_thw);
      if (t.min_ttc) ttc_min.push_back(*t.min_ttc);
      if (t.min_dhw) dhw_min.push_back(*t.min_dhw);
    }
    for (const auto& s : r.series) {
      for (std::size_t i = 0; i < s.size(); ++i) {
        if (!s.thw[i] || !s.ttc[i]) continue;
        if (*s.thw[i] > 5.0 || std::abs(*s.ttc[i]) > 100.0) continue;
        joint_thw.push_back(*s.thw[i]);
        joint_ttc.push_back(*s.ttc[i]);
      }
    }
  }
  using stats::HistogramSpec;
  const auto speed = HistogramSpec::uniform(0.0, 250.0, 125);
  add_hist(bundle, "hist_velocity_track_min", v_min, speed, "track minimum velocity", "km/h");
  add_hist(bundle, "hist_velocity_track_mean", v_mean, speed, "track mean velocity", "km/h");
  add_hist(bundle, "hist_velocity_track_max", v_max, speed, "track maximum velocity", "km/h");
  add_hist(bundle, "hist_velocity_frames_car", v_car, speed, "velocity per frame, cars", "km/h");
  add_hist(bundle, "hist_velocity_frames_truck", v_truck, speed, "velocity per frame, trucks", "km/h");
  add_hist(bundle, "hist_ax_frames", ax_all, HistogramSpec::uniform(-5.0, 5.0, 100), "longitudinal acceleration",
           "m/s^2");
  add_hist(bundle, "hist_ay_frames", ay_all, HistogramSpec::uniform(-2.0, 2.0, 80), "lateral acceleration", "m/s^2");
  add_hist(bundle, "hist_ax_track_min", ax_min, HistogramSpec::uniform(-5.0, 5.0, 100),
           "track minimum longitudinal acceleration", "m/s^2");
  add_hist(bundle, "hist_ax_track_max", ax_max, HistogramSpec::uniform(-5.0, 5.0, 100),
           "track maximum longitudinal acceleration", "m/s^2");
  add_hist(bundle, "hist_thw_min", thw_min, HistogramSpec::uniform(0.0, 5.0, 100), "track minimum THW", "s");
  add_hist(bundle, "hist_ttc_min", ttc_min, HistogramSpec::uniform(0.0, 100.0, 100), "track minimum positive TTC",
           "s");
  add_hist(bundle, "hist_dhw_min", dhw_min, HistogramSpec::uniform(0.0, 200.0, 100), "track minimum DHW", "m");
  {
    json data = report::to_json(stats::histogram2d(joint_thw, joint_ttc, HistogramSpec::uniform(0.0, 5.0, 50),
                                                   HistogramSpec::uniform(-100.0, 100.0, 80)));
    data["x_quantity"] = "THW";
    data["y_quantity"] = "TTC";
    bundle.add("hist2d_thw_ttc", "histogram2d", std::move(data));
  }
  add_fit(bundle, "fit_ax_logistic", ax_all, [](const auto& v) { return stats::fit_logistic(v); },
          "longitudinal acceleration");
  add_fit(bundle, "fit_thw_min_gev", thw_min, [](const auto& v) { return stats::fit_gev(v); }, "track minimum THW");
  add_fit(bundle, "fit_ttc_min_gev", ttc_min, [](const auto& v) { return stats::fit_gev(v); },
          "track minimum positive TTC");
}

void add_macro(report::Bundle& bundle, const Inputs& in, const RunConfig& config) {
  std::vector<macro::MinuteSlice> slices;
  json loads = json::array(), changes = json::array(), anomalies = json::array(), rates = json::array();
  for (const auto& r : in.recordings) {
    auto s = macro::minute_slices(r.recording, r.series, r.lane_changes.events, config.jobs);
    const int id = r.recording.info.id;
    for (auto& x : report::to_json(macro::lane_load(r.recording), id)) loads.push_back(std::move(x));
    auto lc = report::to_json(r.lane_changes, id);
    for (auto& x : lc["events"]) changes.push_back(std::move(x));
    for (auto& x : lc["anomalies"]) anomalies.push_back(std::move(x));
    for (auto& x : report::to_json(macro::lane_change_rates(r.recording, s, r.lane_changes.events), id)) {
      rates.push_back(std::move(x));
    }
    slices.insert(slices.end(), s.begin(), s.end());
  }
  bundle.add("minute_slices", "slices", report::to_json(slices));
  bundle.add_table("minute_slices", report::slices_csv(slices));
  const auto points = macro::fundamental_points(slices);
  bundle.add("fundamental_points", "fundamental_points", report::to_json(points));
  bundle.add("lane_loads", "lane_loads", loads);
  bundle.add("lane_changes", "lane_changes", json{{"events", changes}, {"anomalies", anomalies}});
  bundle.add("lane_change_rates", "lane_change_rates", rates);

  std::vector<macro::Point2> rq;
  std::vector<double> rho, v;
  for (const auto& p : points) {
    rq.push_back({p.rho, p.q});
    if (p.v) {
      rho.push_back(p.rho);
      v.push_back(*p.v);
    }
  }
  try {
    json data = report::to_json(macro::triangular_fit(rq, config.fit_coverage));
    data["x_quantity"] = "rho";
    data["y_quantity"] = "q";
    data["target"] = config.fit_coverage;
    bundle.add("triangular_fit_rho_q", "triangular_fit", std::move(data));
  } catch (const SpecError&) {
  }
  try {
    bundle.add("correlation_rho_v", "correlation",
               json{{"x_quantity", "rho"}, {"y_quantity", "v_mean_space"}, {"n", rho.size()},
                    {"r", stats::pearson(rho, v)}});
  } catch (const SpecError&) {
  }
}

risk::UndercutResult merge(const std::vector<risk::UndercutResult>& parts) {
  if (parts.empty()) return {};
  risk::UndercutResult r = parts.front();
  for (std::size_t i = 1; i < parts.size(); ++i) {
    const auto& p = parts[i];
    r.tracks_considered += p.tracks_considered;
    r.tracks_undercutting += p.tracks_undercutting;
    r.at_least_1s += p.at_least_1s;
    r.above_5s += p.above_5s;
    r.histogram.merge(p.histogram);
  }
  if (parts.size() > 1) r.max_duration.clear();
  r.share_at_least_1s = r.tracks_considered ? static_cast<double>(r.at_least_1s) / r.tracks_considered : 0.0;
  r.share_above_5s = r.tracks_considered ? static_cast<double>(r.above_5s) / r.tracks_considered : 0.0;
  return r;
}

risk::Ttc6Result merge(const std::vector<risk::Ttc6Result>& parts) {
  if (parts.empty()) return {};
  risk::Ttc6Result r = parts.front();
  auto fold = [](risk::BrakeGroupResult& into, const risk::BrakeGroupResult& g) {
    const double sum = (into.mean_ax ? *into.mean_ax * into.count : 0.0) + (g.mean_ax ? *g.mean_ax * g.count : 0.0);
    into.count += g.count;
    into.mean_ax = into.count ? std::optional<double>(sum / static_cast<double>(into.count)) : std::nullopt;
  };
  for (std::size_t i = 1; i < parts.size(); ++i) {
    r.selected += parts[i].selected;
    fold(r.negative, parts[i].negative);
    fold(r.braking, parts[i].braking);
  }
  if (parts.size() > 1) r.track_ids.clear();
  for (auto* g : {&r.negative, &r.braking}) {
    g->share = r.selected ? static_cast<double>(g->count) / static_cast<double>(r.selected) : 0.0;
  }
  return r;
}

risk::RpStudyResult merge(const std::vector<risk::RpStudyResult>& parts) {
  if (parts.empty()) return {};
  risk::RpStudyResult r = parts.front();
  std::size_t set_size = r.set_tracks.size();
  for (std::size_t i = 1; i < parts.size(); ++i) {
    const auto& p = parts[i];
    for (std::size_t b = 0; b < r.counts.size(); ++b) {
      for (std::size_t t = 0; t < r.counts[b].size(); ++t) r.counts[b][t] += p.counts[b][t];
    }
    for (std::size_t g = 0; g < r.groups.size(); ++g) {
      r.groups[g].count += p.groups[g].count;
      r.groups[g].lane_changes += p.groups[g].lane_changes;
    }
    set_size += p.set_tracks.size();
    r.set_tracks.insert(r.set_tracks.end(), p.set_tracks.begin(), p.set_tracks.end());
  }
  for (auto& g : r.groups) {
    const double n = static_cast<double>(set_size);
    g.share = set_size ? g.count / n : 0.0;
    g.lane_change_share_of_set = set_size ? g.lane_changes / n : 0.0;
    g.lane_change_share_of_group = g.count ? static_cast<double>(g.lane_changes) / static_cast<double>(g.count) : 0.0;
  }
  return r;
}

void add_risk(report::Bundle& bundle, const Inputs& in, const RunConfig& config) {
  std::vector<Track> all_tracks;
  std::vector<risk::ContextSample> thw_samples, ttc_samples;
  std::vector<risk::UndercutResult> undercut;
  std::vector<risk::Ttc6Result> ttc6;
  std::vector<risk::RpStudyResult> rp;
  std::vector<std::pair<std::string, risk::RuleSet>> rule_sets;
  if (config.rules_file) {
    rule_sets.emplace_back("custom", load_rules(config));
  } else {
    rule_sets.emplace_back("benmimoun", risk::RuleSet::benmimoun());
    rule_sets.emplace_back("cars100", risk::RuleSet::cars100());
  }
  std::vector<json> events(rule_sets.size(), json::array());
  for (const auto& r : in.recordings) {
    const auto& rec = r.recording;
    all_tracks.insert(all_tracks.end(), rec.tracks.begin(), rec.tracks.end());
    auto a = risk::critical_contexts(rec, r.series, risk::Measure::Thw);
    auto b = risk::critical_contexts(rec, r.series, risk::Measure::Ttc);
    thw_samples.insert(thw_samples.end(), a.begin(), a.end());
    ttc_samples.insert(ttc_samples.end(), b.begin(), b.end());
    undercut.push_back(risk::thw_undercut_durations(rec, r.series, config.thw_undercut, config.undercut_v_min));
    ttc6.push_back(risk::ttc6_brake_analysis(rec, r.series));
    rp.push_back(risk::rp_study(rec, r.series, config.rp_study, config.jobs));
    for (std::size_t k = 0; k < rule_sets.size(); ++k) {
      for (auto& e : report::to_json(risk::classify_recording(rec, r.series, rule_sets[k].second, config.jobs),
                                     rec.info.id)) {
        events[k].push_back(std::move(e));
      }
    }
  }
  bundle.add("occurrences", "occurrence_table",
             report::to_json(risk::count_threshold_occurrences(all_tracks, risk::default_thw_bounds(),
                                                               risk::default_ttc_bounds())));
  for (std::size_t k = 0; k < rule_sets.size(); ++k) {
    bundle.add("risk_events_" + rule_sets[k].first, "risk_events", events[k]);
  }
  for (auto m : {risk::Measure::Thw, risk::Measure::Ttc}) {
    const auto& samples = m == risk::Measure::Thw ? thw_samples : ttc_samples;
    for (auto d : {risk::Dimension::Velocity, risk::Dimension::Ax, risk::Dimension::Ay}) {
      auto table = risk::context_bins(samples, d, m, risk::default_row_edges(m), risk::default_column_spec(d));
      bundle.add("context_" + risk::to_string(m) + "_" + risk::to_string(d), "context_table", report::to_json(table));
    }
  }
  bundle.add("thw_undercut", "thw_undercut", report::to_json(merge(undercut)));
  bundle.add("ttc6_brake", "ttc6_brake", report::to_json(merge(ttc6)));
  bundle.add("rp_study", "rp_study", report::to_json(merge(rp)));
}

report::Bundle run(const RunConfig& config) {
  config.validate(false);
  const Inputs in = load_inputs(config);
  report::Bundle bundle;
  bundle.manifest = in.manifest;
  add_validation(bundle, in);
  if (config.analyses.count("stats")) add_stats(bundle, in);
  if (config.analyses.count("macro")) add_macro(bundle, in, config);
  if (config.analyses.count("risk")) add_risk(bundle, in, config);
  return bundle;
}

}  // namespace trajcrit::pipeline
