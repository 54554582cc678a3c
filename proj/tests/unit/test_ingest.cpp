#include "csv_edit.hpp"
#include "doctest.h"
#include "support.hpp"
#include "trajcrit/error.hpp"
#include "trajcrit/ingest.hpp"
#include "trajcrit/synth.hpp"

using namespace trajcrit;

namespace {

ingest::IngestResult load(const std::filesystem::path& dir, double seg = 400.0) {
  ingest::IngestOptions o;
  o.segment = Segment{0.0, seg};
  return ingest::load_recording(ingest::RawDatasetPaths::for_recording(dir, 1), o);
}

std::filesystem::path written(const std::string& name, const synth::ScenarioScript& s) {
  const auto dir = support::temp_dir(name);
  synth::write_dataset(synth::generate(s).recording, dir);
  return dir;
}

}  // namespace

TEST_CASE("file names follow the dataset convention") {
  const auto p = ingest::RawDatasetPaths::for_recording("/data", 7);
  CHECK(p.recording_meta.filename() == "07_recordingMeta.csv");
  CHECK(p.tracks_meta.filename() == "07_tracksMeta.csv");
  CHECK(p.tracks.filename() == "07_tracks.csv");
  CHECK_THROWS_AS(ingest::RawDatasetPaths::discover("/no/such/dir"), DataError);
}

TEST_CASE("lane table and layout") {
  const auto& t = ingest::default_lane_table();
  REQUIRE(t.count(6) == 1);
  CHECK(t.at(6).upper.front().second == LaneRole::Acceleration);
  CHECK(t.at(2).lower.size() == 2);
  const auto layout = support::location1();
  const Lane* l8 = layout.find(8);
  REQUIRE(l8 != nullptr);
  CHECK(l8->y_min == 30.75);
  CHECK(l8->y_max == 34.5);
  CHECK(layout.find(2)->y_min == 8.0);
  CHECK_THROWS_AS(ingest::build_layout(1, {8.0, 11.75}, {23.25, 27.0, 30.75, 34.5}), LayoutError);
  CHECK_THROWS_AS(ingest::build_layout(12, {}, {}), LayoutError);
}

TEST_CASE("written synthetic data reads back as the generated model") {
  for (const auto& s : {synth::closing(), synth::lane_change(), synth::stop_and_go()}) {
    const auto gt = synth::generate(s);
    const auto dir = support::temp_dir("ingest_rt_" + s.kind);
    synth::write_dataset(gt.recording, dir);
    const auto r = load(dir, s.segment_length);
    CHECK(r.report.rows_rejected == 0);
    CHECK(r.report.meta_mismatches.empty());
    CHECK(r.report.tracks_built == static_cast<long>(gt.recording.tracks.size()));
    CHECK(r.recording.info == gt.recording.info);
    CHECK(r.recording.layout == gt.recording.layout);
    REQUIRE(r.recording.tracks.size() == gt.recording.tracks.size());
    for (std::size_t i = 0; i < r.recording.tracks.size(); ++i) CHECK(r.recording.tracks[i] == gt.recording.tracks[i]);
    CHECK(r.recording == gt.recording);
  }
}

TEST_CASE("a missing column is named in the schema error") {
  const auto dir = written("ingest_schema", synth::closing());
  auto f = support::CsvFile::read((dir / "01_tracks.csv").string());
  f.drop("precedingId");
  f.write((dir / "01_tracks.csv").string());
  try {
    load(dir);
    FAIL("expected a schema error");
  } catch (const SchemaError& e) {
    CHECK(std::string(e.what()).find("precedingId") != std::string::npos);
  }
}

TEST_CASE("unknown location is a layout error") {
  const auto dir = written("ingest_loc", synth::closing());
  auto f = support::CsvFile::read((dir / "01_recordingMeta.csv").string());
  f.rows[0][f.col("locationId")] = "9";
  f.write((dir / "01_recordingMeta.csv").string());
  CHECK_THROWS_AS(load(dir), LayoutError);
}

TEST_CASE("meta minima disagreeing with the frames are reported") {
  const auto dir = written("ingest_meta", synth::closing());
  auto f = support::CsvFile::read((dir / "01_tracksMeta.csv").string());
  const auto c = f.col("minTHW");
  int changed = -1;
  for (auto& r : f.rows) {
    if (r[c] != "-1") {
      r[c] = std::to_string(std::stod(r[c]) + 0.3);
      changed = std::stoi(r[f.col("id")]);
      break;
    }
  }
  REQUIRE(changed > 0);
  f.write((dir / "01_tracksMeta.csv").string());
  const auto r = load(dir);
  REQUIRE(r.report.meta_mismatches.size() == 1);
  CHECK(r.report.meta_mismatches[0].track_id == changed);
  CHECK(r.report.meta_mismatches[0].field == "minTHW");
  CHECK(r.report.meta_mismatches[0].delta == doctest::Approx(-0.3).epsilon(1e-6));  // recomputed minus meta
}

TEST_CASE("unparseable rows are rejected and counted") {
  const auto dir = written("ingest_rows", synth::closing());
  auto f = support::CsvFile::read((dir / "01_tracks.csv").string());
  const auto rows_before = f.rows.size();
  f.rows[3][f.col("xVelocity")] = "abc";
  f.write((dir / "01_tracks.csv").string());
  const auto r = load(dir);
  CHECK(r.report.rows_read == static_cast<long>(rows_before));
  CHECK(r.report.rows_rejected >= 1);
  CHECK_FALSE(r.report.rejected_rows.empty());
}

TEST_CASE("observed segment spans every bounding box") {
  const auto gt = synth::generate(synth::closing());
  std::vector<Track> raw;
  for (const auto& t : gt.recording.tracks) raw.push_back(denormalize_direction(t));
  const auto seg = ingest::observed_segment(raw);
  double lo = 1e300, hi = -1e300;
  for (const auto& t : raw) {
    for (const auto& f : t.frames) {
      lo = std::min(lo, f.x);
      hi = std::max(hi, f.x + t.length);
    }
  }
  CHECK(seg.start == lo);
  CHECK(seg.end == hi);
}
