#include "trajcrit/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "csv.hpp"
#include "trajcrit/error.hpp"

#ifndef TRAJCRIT_VERSION
#define TRAJCRIT_VERSION "0.0.0"
#endif

namespace trajcrit::report {

std::string tool_version() { return TRAJCRIT_VERSION; }

std::uint64_t fnv1a(std::string_view bytes, std::uint64_t seed) {
  std::uint64_t h = seed;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

namespace {

std::string hex(std::uint64_t h) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::filesystem::path& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw DataError("write failed: " + path.string());
}

void escape(std::string& out, const std::string& s) {
  // nlohmann's escaping is correct and deterministic; reuse it.
  out += json(s).dump();
}

void write_value(std::string& out, const json& j, int indent) {
  const std::string pad(static_cast<std::size_t>(indent) * 2, ' ');
  const std::string inner(static_cast<std::size_t>(indent + 1) * 2, ' ');
  switch (j.type()) {
    case json::value_t::null:
      out += "null";
      break;
    case json::value_t::boolean:
      out += j.get<bool>() ? "true" : "false";
      break;
    case json::value_t::number_integer:
      out += std::to_string(j.get<std::int64_t>());
      break;
    case json::value_t::number_unsigned:
      out += std::to_string(j.get<std::uint64_t>());
      break;
    case json::value_t::number_float: {
      const double v = j.get<double>();
      if (!std::isfinite(v)) {
        out += "null";
        break;
      }
      std::string s = csv::format(v);
      // Keep floats recognisable as such when read back.
      if (s.find_first_of(".eEn") == std::string::npos) s += ".0";
      out += s;
      break;
    }
    case json::value_t::string:
      escape(out, j.get_ref<const std::string&>());
      break;
    case json::value_t::array: {
      if (j.empty()) {
        out += "[]";
        break;
      }
      const bool flat = std::all_of(j.begin(), j.end(), [](const json& e) { return e.is_primitive(); });
      out += '[';
      bool first = true;
      for (const auto& e : j) {
        if (!first) out += flat ? ", " : ",";
        first = false;
        if (!flat) out += '\n' + inner;
        write_value(out, e, indent + 1);
      }
      if (!flat) out += '\n' + pad;
      out += ']';
      break;
    }
    case json::value_t::object: {
      if (j.empty()) {
        out += "{}";
        break;
      }
      out += '{';
      bool first = true;
      for (auto it = j.begin(); it != j.end(); ++it) {
        if (!first) out += ',';
        first = false;
        out += '\n' + inner;
        escape(out, it.key());
        out += ": ";
        write_value(out, it.value(), indent + 1);
      }
      out += '\n' + pad + '}';
      break;
    }
    default:
      throw ConfigError("unsupported JSON value");
  }
}

bool safe_name(const std::string& n) {
  if (n.empty() || n == "index" || n.size() > 120) return false;
  return std::all_of(n.begin(), n.end(),
                     [](char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-'; });
}

json opt(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

std::string dir_name(Direction d) { return std::string(to_string(d)); }

json manifest_json(const Manifest& m) {
  json inputs = json::array();
  for (const auto& f : m.inputs) inputs.push_back({{"name", f.name}, {"digest", f.digest}});
  return {{"tool", "trajcrit"},
          {"tool_version", m.tool_version},
          {"config_hash", m.config_hash},
          {"input_digest", m.input_digest},
          {"inputs", inputs}};
}

}  // namespace

std::string digest(std::string_view bytes) { return hex(fnv1a(bytes)); }

std::string file_digest(const std::filesystem::path& path) { return digest(read_file(path)); }

std::string dump(const json& j) {
  std::string out;
  write_value(out, j, 0);
  out += '\n';
  return out;
}

Manifest make_manifest(const json& config, const std::vector<std::filesystem::path>& files,
                       const std::filesystem::path& root) {
  Manifest m;
  m.config_hash = digest(dump(config));
  for (const auto& f : files) {
    auto rel = std::filesystem::relative(f, root).generic_string();
    if (rel.empty() || rel.rfind("..", 0) == 0) rel = f.filename().generic_string();
    m.inputs.push_back({rel, file_digest(f)});
  }
  std::sort(m.inputs.begin(), m.inputs.end(), [](const InputFile& a, const InputFile& b) { return a.name < b.name; });
  std::uint64_t h = fnv1a("");
  for (const auto& f : m.inputs) {
    h = fnv1a(f.name, h);
    h = fnv1a(std::string_view("\0", 1), h);
    h = fnv1a(f.digest, h);
  }
  m.input_digest = hex(h);
  return m;
}

Manifest make_manifest(const json& config, std::string_view input_bytes, const std::string& input_name) {
  Manifest m;
  m.config_hash = digest(dump(config));
  m.inputs.push_back({input_name, digest(input_bytes)});
  std::uint64_t h = fnv1a(input_name);
  h = fnv1a(std::string_view("\0", 1), h);
  m.input_digest = hex(fnv1a(m.inputs.front().digest, h));
  return m;
}

void Bundle::claim(const std::string& file) {
  if (std::find(names_.begin(), names_.end(), file) != names_.end()) {
    throw ConfigError("duplicate artifact '" + file + "'");
  }
  names_.push_back(file);
}

void Bundle::add(std::string name, std::string kind, json data) {
  if (!safe_name(name)) throw ConfigError("invalid artifact name '" + name + "'");
  claim(name + ".json");
  artifacts_.push_back({std::move(name), std::move(kind), std::move(data)});
}

void Bundle::add_table(std::string name, std::string csv) {
  if (!safe_name(name)) throw ConfigError("invalid table name '" + name + "'");
  claim(name + ".csv");
  tables_.push_back({std::move(name), std::move(csv)});
}

void Bundle::merge(Bundle&& other) {
  for (auto& a : other.artifacts_) add(std::move(a.name), std::move(a.kind), std::move(a.data));
  for (auto& t : other.tables_) add_table(std::move(t.name), std::move(t.csv));
  other.artifacts_.clear();
  other.tables_.clear();
  other.names_.clear();
}

const Artifact* Bundle::find(std::string_view name) const {
  for (const auto& a : artifacts_) {
    if (a.name == name) return &a;
  }
  return nullptr;
}

void emit(const Bundle& bundle, const std::filesystem::path& out_dir) {
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec || !std::filesystem::is_directory(out_dir)) {
    throw DataError("cannot create output directory " + out_dir.string());
  }
  struct Entry {
    std::string name, kind, file, digest;
    std::size_t bytes;
  };
  std::vector<Entry> entries;
  for (const auto& a : bundle.artifacts()) {
    const std::string text = dump(json{{"name", a.name}, {"kind", a.kind}, {"data", a.data}});
    const std::string file = a.name + ".json";
    write_file(out_dir / file, text);
    entries.push_back({a.name, a.kind, file, digest(text), text.size()});
  }
  for (const auto& t : bundle.tables()) {
    const std::string file = t.name + ".csv";
    write_file(out_dir / file, t.csv);
    entries.push_back({t.name, "csv", file, digest(t.csv), t.csv.size()});
  }
  std::sort(entries.begin(), entries.end(), [](const Entry& a, const Entry& b) { return a.file < b.file; });
  json files = json::array();
  for (const auto& e : entries) {
    files.push_back({{"name", e.name}, {"kind", e.kind}, {"file", e.file}, {"digest", e.digest}, {"bytes", e.bytes}});
  }
  write_file(out_dir / "index.json", dump(json{{"manifest", manifest_json(bundle.manifest)}, {"artifacts", files}}));
}

std::vector<std::string> verify(const std::filesystem::path& out_dir) {
  std::vector<std::string> problems;
  json index;
  try {
    index = json::parse(read_file(out_dir / "index.json"));
  } catch (const std::exception& e) {
    return {std::string("index.json unreadable: ") + e.what()};
  }
  for (const auto& a : index.value("artifacts", json::array())) {
    const std::string file = a.value("file", std::string());
    const auto path = out_dir / file;
    if (!std::filesystem::exists(path)) {
      problems.push_back(file + ": missing");
      continue;
    }
    if (file_digest(path) != a.value("digest", std::string())) problems.push_back(file + ": digest mismatch");
  }
  return problems;
}

json to_json(const stats::HistogramSpec& spec) {
  return {{"edges", spec.edges}, {"clamp", spec.clamp == stats::ClampPolicy::Drop ? "drop" : "saturate"}};
}

json to_json(const stats::Histogram& h) {
  return {{"spec", to_json(h.spec)},
          {"counts", h.counts},
          {"underflow", h.underflow},
          {"overflow", h.overflow},
          {"total", h.total}};
}

json to_json(const stats::Histogram2D& h) {
  json rows = json::array();
  for (std::size_t i = 0; i < h.x.bins(); ++i) {
    json row = json::array();
    for (std::size_t k = 0; k < h.y.bins(); ++k) row.push_back(h.at(i, k));
    rows.push_back(std::move(row));
  }
  return {{"x", to_json(h.x)}, {"y", to_json(h.y)}, {"counts", rows}, {"outside", h.outside}, {"total", h.total}};
}

json to_json(const stats::FitResult& f) {
  const std::vector<std::string> names =
      f.family == stats::Family::Gev ? std::vector<std::string>{"location", "scale", "shape"}
                                     : std::vector<std::string>{"location", "scale"};
  json params = json::object();
  for (std::size_t i = 0; i < names.size() && i < f.params.size(); ++i) params[names[i]] = f.params[i];
  return {{"family", stats::to_string(f.family)},
          {"params", params},
          {"log_likelihood", f.log_likelihood},
          {"converged", f.converged},
          {"iterations", f.iterations},
          {"start_params", f.start_params},
          {"start_log_likelihood", f.start_log_likelihood},
          {"diagnostics", f.diagnostics}};
}

json to_json(const std::vector<macro::MinuteSlice>& slices) {
  json arr = json::array();
  for (const auto& s : slices) {
    arr.push_back({{"recording_id", s.recording_id},
                   {"direction", dir_name(s.direction)},
                   {"t0", s.window.t0},
                   {"t1", s.window.t1},
                   {"q", s.q},
                   {"rho", s.rho},
                   {"rho_a", opt(s.rho_a)},
                   {"rho_a_per_km", opt(s.rho_a_per_km)},
                   {"v_mean_time", opt(s.v_mean_time)},
                   {"v_mean_space", opt(s.v_mean_space)},
                   {"thw_mean", opt(s.thw_mean)},
                   {"thw_mean_car", opt(s.thw_mean_car)},
                   {"thw_mean_truck", opt(s.thw_mean_truck)},
                   {"lane_change_count", s.lane_change_count},
                   {"lane_change_rate", s.lane_change_rate},
                   {"truck_share", opt(s.truck_share)},
                   {"vehicles", s.vehicles}});
  }
  return arr;
}

json to_json(const std::vector<macro::FundamentalPoint>& points) {
  json rho = json::array(), q = json::array(), v = json::array(), dir = json::array(), t0 = json::array();
  for (const auto& p : points) {
    rho.push_back(p.rho);
    q.push_back(p.q);
    v.push_back(opt(p.v));
    dir.push_back(dir_name(p.direction));
    t0.push_back(p.t0);
  }
  return {{"rho", rho}, {"q", q}, {"v", v}, {"direction", dir}, {"t0", t0}};
}

json to_json(const macro::TriangularFit& f) {
  return {{"apex_x", f.apex_x},         {"apex_y", f.apex_y}, {"left_zero_x", f.left_zero_x},
          {"right_zero_x", f.right_zero_x}, {"coverage", f.coverage}, {"enclosed", f.enclosed},
          {"n", f.n},                   {"area", f.area()}};
}

json to_json(const std::vector<macro::LaneLoad>& loads, int recording_id) {
  json arr = json::array();
  for (const auto& l : loads) {
    arr.push_back({{"recording_id", recording_id},
                   {"direction", dir_name(l.direction)},
                   {"lane_id", l.lane_id},
                   {"role", std::string(to_string(l.role))},
                   {"frames", l.frames},
                   {"share", l.share},
                   {"q", l.q}});
  }
  return arr;
}

json to_json(const macro::LaneChangeDetection& d, int recording_id) {
  json events = json::array(), anomalies = json::array();
  for (const auto& e : d.events) {
    events.push_back({{"recording_id", recording_id},
                      {"track_id", e.track_id},
                      {"frame", e.frame},
                      {"from_lane", e.from_lane},
                      {"to_lane", e.to_lane},
                      {"side", macro::to_string(e.side)},
                      {"direction", dir_name(e.direction)}});
  }
  for (const auto& a : d.anomalies) {
    anomalies.push_back({{"recording_id", recording_id},
                         {"track_id", a.track_id},
                         {"frame", a.frame},
                         {"from_lane", a.from_lane},
                         {"to_lane", a.to_lane},
                         {"reason", a.reason}});
  }
  return {{"events", events}, {"anomalies", anomalies}};
}

json to_json(const std::vector<macro::LaneChangeRates>& rates, int recording_id) {
  json arr = json::array();
  for (const auto& r : rates) {
    json origin = json::array(), pairs = json::array();
    for (const auto& o : r.by_origin) origin.push_back({{"lane_id", o.lane_id}, {"count", o.count}, {"rate", o.rate}});
    for (const auto& p : r.by_pair) {
      pairs.push_back({{"from_lane", p.from_lane}, {"to_lane", p.to_lane}, {"count", p.count}, {"rate", p.rate}});
    }
    arr.push_back({{"recording_id", recording_id},
                   {"direction", dir_name(r.direction)},
                   {"lanes", r.lanes},
                   {"hours", r.hours},
                   {"km", r.km},
                   {"events", r.events},
                   {"rate", r.rate},
                   {"by_origin", origin},
                   {"by_pair", pairs}});
  }
  return arr;
}

json to_json(const risk::OccurrenceTable& t) {
  auto rows = [](const std::vector<risk::Occurrence>& v) {
    json arr = json::array();
    for (const auto& o : v) arr.push_back({{"bound", o.bound}, {"count", o.count}, {"percent", o.percent}});
    return arr;
  };
  return {{"tracks", t.tracks}, {"thw", rows(t.thw)}, {"ttc", rows(t.ttc)}};
}

json to_json(const std::vector<risk::RiskEvent>& events, int recording_id) {
  json arr = json::array();
  for (const auto& e : events) {
    arr.push_back({{"recording_id", recording_id},
                   {"track_id", e.track_id},
                   {"rule_id", e.rule_id},
                   {"source", e.source},
                   {"level", e.level},
                   {"critical_frame", e.critical_frame},
                   {"key_value", e.key_value},
                   {"thw", opt(e.thw)},
                   {"ttc", opt(e.ttc)},
                   {"dhw", opt(e.dhw)},
                   {"vr", opt(e.vr)},
                   {"ax", e.ax},
                   {"ay", e.ay},
                   {"v", e.v},
                   {"context",
                    {{"v_kmh", e.context.v_kmh},
                     {"ax", e.context.ax},
                     {"ay", e.context.ay},
                     {"frames", e.context.frames}}},
                   {"lane_change_within_2s", e.lane_change_within_2s},
                   {"lane_change_within_pm4s", e.lane_change_within_pm4s}});
  }
  return arr;
}

json to_json(const risk::ContextTable& t) {
  json rows = json::array();
  for (const auto& r : t.rows) rows.push_back({{"lo", r.lo}, {"hi", r.hi}, {"n", r.n}, {"percent", r.percent}});
  return {{"dimension", risk::to_string(t.dimension)},
          {"measure", risk::to_string(t.measure)},
          {"columns", to_json(t.columns)},
          {"rows", rows}};
}

json to_json(const risk::UndercutResult& r) {
  json durations = json::array();
  for (const auto& [id, d] : r.max_duration) durations.push_back({{"track_id", id}, {"duration", d}});
  return {{"threshold", r.threshold},
          {"v_min_kmh", r.v_min_kmh},
          {"tracks_considered", r.tracks_considered},
          {"tracks_undercutting", r.tracks_undercutting},
          {"at_least_1s", r.at_least_1s},
          {"above_5s", r.above_5s},
          {"share_at_least_1s", r.share_at_least_1s},
          {"share_above_5s", r.share_above_5s},
          {"histogram", to_json(r.histogram)},
          {"max_duration", durations}};
}

namespace {
json group_json(const risk::BrakeGroupResult& g) {
  return {{"threshold", g.threshold}, {"count", g.count}, {"share", g.share}, {"mean_ax", opt(g.mean_ax)}};
}
}  // namespace

json to_json(const risk::Ttc6Result& r) {
  return {{"selected", r.selected},
          {"track_ids", r.track_ids},
          {"negative", group_json(r.negative)},
          {"braking", group_json(r.braking)}};
}

json to_json(const risk::RpStudyResult& r) {
  json groups = json::array();
  for (const auto& g : r.groups) {
    groups.push_back({{"threshold", g.threshold},
                      {"count", g.count},
                      {"share", g.share},
                      {"lane_changes", g.lane_changes},
                      {"lane_change_share_of_group", g.lane_change_share_of_group},
                      {"lane_change_share_of_set", g.lane_change_share_of_set}});
  }
  const auto& c = r.config;
  return {{"config",
           {{"a", c.a},
            {"b_grid", c.b_grid},
            {"thresholds", c.thresholds},
            {"tailgating", c.tailgating},
            {"braking_window", c.braking_window},
            {"braking_thresholds", c.braking_thresholds},
            {"lane_change_window", c.lane_change_window},
            {"set_b", c.set_b},
            {"set_threshold", c.set_threshold}}},
          {"counts", r.counts},
          {"set_size", r.set_tracks.size()},
          {"set_tracks", r.set_tracks},
          {"groups", groups}};
}

json to_json(const clean::CleanReport& r, int recording_id) {
  json discarded = json::array(), flagged = json::array();
  for (const auto& d : r.discarded) {
    discarded.push_back({{"track_id", d.track_id},
                         {"rule_id", d.rule_id},
                         {"frame", d.frame},
                         {"value", d.value},
                         {"evidence", d.evidence}});
  }
  for (const auto& f : r.flagged) {
    flagged.push_back({{"track_id", f.track_id}, {"rule_id", f.rule_id}, {"frame", f.frame}, {"value", f.value}});
  }
  return {{"recording_id", recording_id},
          {"tracks_in", r.tracks_in},
          {"tracks_out", r.tracks_out},
          {"frames_trimmed", r.frames_trimmed},
          {"vehicles_without_leader", r.vehicles_without_leader},
          {"discarded", discarded},
          {"flagged", flagged}};
}

json to_json(const ingest::IngestReport& r, int recording_id) {
  json rows = json::array(), tracks = json::array(), mismatches = json::array();
  for (const auto& x : r.rejected_rows) rows.push_back({{"file", x.file}, {"line", x.line}, {"reason", x.reason}});
  for (const auto& x : r.rejected_tracks) tracks.push_back({{"track_id", x.track_id}, {"reason", x.reason}});
  for (const auto& m : r.meta_mismatches) {
    mismatches.push_back({{"track_id", m.track_id},
                          {"field", m.field},
                          {"meta_value", opt(m.meta_value)},
                          {"recomputed", opt(m.recomputed)},
                          {"delta", std::isfinite(m.delta) ? json(m.delta) : json(nullptr)}});
  }
  return {{"recording_id", recording_id},
          {"rows_read", r.rows_read},
          {"rows_accepted", r.rows_accepted},
          {"rows_rejected", r.rows_rejected},
          {"tracks_built", r.tracks_built},
          {"rejected_rows", rows},
          {"rejected_tracks", tracks},
          {"meta_mismatches", mismatches}};
}

std::string slices_csv(const std::vector<macro::MinuteSlice>& slices) {
  std::string out =
      "recording_id,direction,t0,t1,q,rho,rho_a,rho_a_per_km,v_mean_time,v_mean_space,thw_mean,thw_mean_car,"
      "thw_mean_truck,lane_change_count,lane_change_rate,truck_share,vehicles\n";
  auto o = [](const std::optional<double>& v) { return v ? csv::format(*v) : std::string(); };
  for (const auto& s : slices) {
    out += std::to_string(s.recording_id) + ',' + dir_name(s.direction) + ',' + csv::format(s.window.t0) + ',' +
           csv::format(s.window.t1) + ',' + csv::format(s.q) + ',' + csv::format(s.rho) + ',' + o(s.rho_a) + ',' +
           o(s.rho_a_per_km) + ',' + o(s.v_mean_time) + ',' + o(s.v_mean_space) + ',' + o(s.thw_mean) + ',' +
           o(s.thw_mean_car) + ',' + o(s.thw_mean_truck) + ',' + std::to_string(s.lane_change_count) + ',' +
           csv::format(s.lane_change_rate) + ',' + o(s.truck_share) + ',' + std::to_string(s.vehicles) + '\n';
  }
  return out;
}

}  // namespace trajcrit::report
