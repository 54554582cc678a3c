#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "trajcrit/clean.hpp"
#include "trajcrit/ingest.hpp"
#include "trajcrit/macro.hpp"
#include "trajcrit/risk.hpp"
#include "trajcrit/stats.hpp"

namespace trajcrit::report {

using nlohmann::json;

std::string tool_version();

// 64-bit FNV-1a, rendered as 16 lowercase hex digits by digest().
std::uint64_t fnv1a(std::string_view bytes, std::uint64_t seed = 0xcbf29ce484222325ULL);
std::string digest(std::string_view bytes);
std::string file_digest(const std::filesystem::path& path);

// Sorted keys, two-space indent, doubles in shortest round-trip form (at most
// 17 significant digits), non-finite numbers as null, trailing newline.
std::string dump(const json& j);

struct InputFile {
  std::string name;  // relative to the input root
  std::string digest;
};

struct Manifest {
  std::string tool_version = report::tool_version();
  std::string config_hash;
  std::string input_digest;
  std::vector<InputFile> inputs;
};

// Digest over every file name and content, in name order.
Manifest make_manifest(const json& config, const std::vector<std::filesystem::path>& files,
                       const std::filesystem::path& root);
// For inputs that are not files, e.g. a synthetic scenario script.
Manifest make_manifest(const json& config, std::string_view input_bytes, const std::string& input_name);

struct Artifact {
  std::string name;
  std::string kind;
  json data;
};

struct Table {
  std::string name;
  std::string csv;
};

class Bundle {
 public:
  Manifest manifest;

  // Throws ConfigError on an unsafe name or a name already used by an
  // artifact of the same type (a table may share an artifact's name).
  void add(std::string name, std::string kind, json data);
  void add_table(std::string name, std::string csv);
  // Takes over the other bundle's artifacts; names must stay unique.
  void merge(Bundle&& other);

  const std::vector<Artifact>& artifacts() const { return artifacts_; }
  const std::vector<Table>& tables() const { return tables_; }
  const Artifact* find(std::string_view name) const;
  bool empty() const { return artifacts_.empty() && tables_.empty(); }

 private:
  void claim(const std::string& file);
  std::vector<Artifact> artifacts_;
  std::vector<Table> tables_;
  std::vector<std::string> names_;
};

// One <name>.json per artifact, one <name>.csv per table and index.json listing
// each file with its digest. Throws DataError if out_dir cannot be written.
void emit(const Bundle& bundle, const std::filesystem::path& out_dir);

// Reads index.json back and checks every listed digest. Returns the problems
// found, empty when the tree is intact.
std::vector<std::string> verify(const std::filesystem::path& out_dir);

json to_json(const stats::HistogramSpec& spec);
json to_json(const stats::Histogram& h);
json to_json(const stats::Histogram2D& h);
json to_json(const stats::FitResult& f);
json to_json(const std::vector<macro::MinuteSlice>& slices);
json to_json(const std::vector<macro::FundamentalPoint>& points);
json to_json(const macro::TriangularFit& fit);
json to_json(const std::vector<macro::LaneLoad>& loads, int recording_id);
json to_json(const macro::LaneChangeDetection& d, int recording_id);
json to_json(const std::vector<macro::LaneChangeRates>& rates, int recording_id);
json to_json(const risk::OccurrenceTable& t);
json to_json(const std::vector<risk::RiskEvent>& events, int recording_id);
json to_json(const risk::ContextTable& t);
json to_json(const risk::UndercutResult& r);
json to_json(const risk::Ttc6Result& r);
json to_json(const risk::RpStudyResult& r);
json to_json(const clean::CleanReport& r, int recording_id);
json to_json(const ingest::IngestReport& r, int recording_id);

std::string slices_csv(const std::vector<macro::MinuteSlice>& slices);

}  // namespace trajcrit::report
