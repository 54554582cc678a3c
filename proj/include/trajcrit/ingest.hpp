#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "trajcrit/model.hpp"

namespace trajcrit::ingest {

// The three files of one highD recording: XX_recordingMeta.csv,
// XX_tracksMeta.csv and XX_tracks.csv.
struct RawDatasetPaths {
  std::filesystem::path recording_meta;
  std::filesystem::path tracks_meta;
  std::filesystem::path tracks;

  static RawDatasetPaths for_recording(const std::filesystem::path& dir, int recording_id);
  // Every complete triple in `dir`, sorted by recording id. Throws DataError if
  // the directory does not exist.
  static std::vector<RawDatasetPaths> discover(const std::filesystem::path& dir);
  // Throws DataError if a file is missing.
  void check() const;
};

// Lane ids and roles per road for one location, ordered right to left.
struct LocationLanes {
  std::vector<std::pair<int, LaneRole>> upper;
  std::vector<std::pair<int, LaneRole>> lower;
};

using LaneTable = std::map<int, LocationLanes>;

// Lane ids for the six highD locations.
const LaneTable& default_lane_table();

// Reads {"locations": [{"location_id": 7, "upper": [{"lane_id": 2, "role":
// "right"}, ...], "lower": [...]}]} and merges it over the default table.
LaneTable load_lane_table(const std::filesystem::path& path);

struct TrackMeta {
  int id = 0;
  double width = 0.0;   // bounding box extent along x, i.e. vehicle length
  double height = 0.0;  // extent along y, i.e. vehicle width
  int initial_frame = 0;
  int final_frame = 0;
  int num_frames = 0;
  VehicleClass vehicle_class = VehicleClass::Car;
  Direction direction = Direction::Lower;
  double traveled_distance = 0.0;
  double min_x_velocity = 0.0;
  double max_x_velocity = 0.0;
  double mean_x_velocity = 0.0;
  std::optional<double> min_dhw;  // -1 in the file means absent
  std::optional<double> min_thw;
  std::optional<double> min_ttc;
  int num_lane_changes = 0;
};

struct RejectedRow {
  std::string file;
  long line = 0;
  std::string reason;
};

struct RejectedTrack {
  int track_id = 0;
  std::string reason;
};

struct MetaMismatch {
  int track_id = 0;
  std::string field;  // "minTHW", "minTTC" or "minDHW"
  std::optional<double> meta_value;
  std::optional<double> recomputed;
  double delta = 0.0;  // NaN when only one side is present
};

struct IngestReport {
  long rows_read = 0;
  long rows_accepted = 0;
  long rows_rejected = 0;
  long tracks_built = 0;
  std::vector<RejectedRow> rejected_rows;
  std::vector<RejectedTrack> rejected_tracks;
  std::vector<MetaMismatch> meta_mismatches;
};

struct TracksMetaTable {
  std::map<int, TrackMeta> tracks;
  long rows_read = 0;
  std::vector<RejectedRow> rejected;
};

struct IngestOptions {
  LaneTable lane_table = default_lane_table();
  // Overrides the observed x extent.
  std::optional<Segment> segment;
  double thw_tolerance = 0.05;  // s
  double ttc_tolerance = 0.05;  // s
  double dhw_tolerance = 0.5;   // m
};

struct IngestResult {
  Recording recording;
  std::map<int, TrackMeta> meta;
  IngestReport report;
};

// Lane ids and roles from the table, lateral extents from the markings.
// Throws LayoutError for an unknown location or a marking count that does not
// bound the marked lanes.
LaneLayout build_layout(int location_id, const std::vector<double>& upper_markings,
                        const std::vector<double>& lower_markings, const LaneTable& table = default_lane_table());

// Recording header plus lane layout; tracks left empty.
Recording parse_recording_meta(const std::filesystem::path& path, const LaneTable& table = default_lane_table());

TracksMetaTable parse_tracks_meta(const std::filesystem::path& path);

// Streams the per-frame file. A track stays in memory only until its final
// frame (from the meta table) has been read. Returned tracks are direction
// normalized and sorted by id.
std::vector<Track> parse_tracks(const std::filesystem::path& path, const std::map<int, TrackMeta>& meta,
                                const LaneLayout& layout, IngestReport& report);

// All three files, plus recomputed minima and the meta cross-check.
IngestResult load_recording(const RawDatasetPaths& paths, const IngestOptions& options = {});

// Observed raw x extent of all bounding boxes.
Segment observed_segment(const std::vector<Track>& tracks);

}  // namespace trajcrit::ingest
