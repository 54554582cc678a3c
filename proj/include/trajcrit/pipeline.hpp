#pragma once

#include <filesystem>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "json.hpp"
#include "trajcrit/clean.hpp"
#include "trajcrit/ingest.hpp"
#include "trajcrit/macro.hpp"
#include "trajcrit/measures.hpp"
#include "trajcrit/report.hpp"
#include "trajcrit/risk.hpp"
#include "trajcrit/synth.hpp"

namespace trajcrit::pipeline {

struct RunConfig {
  // Exactly one input: a directory of highD-format files or a scenario script.
  std::optional<std::filesystem::path> data_dir;
  std::optional<std::filesystem::path> script;
  std::optional<std::filesystem::path> out_dir;
  std::set<std::string> analyses{"stats", "macro", "risk"};
  std::optional<std::filesystem::path> rules_file;
  std::optional<double> segment_length;  // m, overrides the observed extent
  clean::RuleConfig clean;
  measures::RpParams rp_params;
  risk::RpStudyConfig rp_study;
  double thw_undercut = 0.9;      // s
  double undercut_v_min = 0.0;    // km/h
  double fit_coverage = 0.97;
  unsigned jobs = 0;

  // Unknown keys throw ConfigError. Relative paths resolve against base.
  static RunConfig from_json(const nlohmann::json& j, const std::filesystem::path& base = {});
  static RunConfig load(const std::filesystem::path& path);
  // The settings that shape results; paths and job count are left out so the
  // hash only changes when the analysis would.
  nlohmann::json analysis_json() const;
  // Throws ConfigError for a missing or doubled input, an output inside the
  // input directory or an unknown analysis.
  void validate(bool needs_output) const;
};

struct LoadedRecording {
  ingest::IngestReport ingest;
  clean::CleanReport clean;
  Recording recording;  // cleaned
  std::vector<measures::MeasureSeries> series;
  macro::LaneChangeDetection lane_changes;
};

struct Inputs {
  std::vector<LoadedRecording> recordings;
  report::Manifest manifest;
};

// Ingest (or generate), clean, measures and lane changes for every recording.
Inputs load_inputs(const RunConfig& config);

risk::RuleSet load_rules(const RunConfig& config);

void add_validation(report::Bundle& bundle, const Inputs& in);
void add_stats(report::Bundle& bundle, const Inputs& in);
void add_macro(report::Bundle& bundle, const Inputs& in, const RunConfig& config);
void add_risk(report::Bundle& bundle, const Inputs& in, const RunConfig& config);

// Pooled study results over several recordings. Per-track listings are kept
// only when a single recording contributes, since track ids repeat otherwise.
risk::UndercutResult merge(const std::vector<risk::UndercutResult>& parts);
risk::Ttc6Result merge(const std::vector<risk::Ttc6Result>& parts);
risk::RpStudyResult merge(const std::vector<risk::RpStudyResult>& parts);

// Runs the selected analyses and returns the bundle; the validation artifacts
// are always included.
report::Bundle run(const RunConfig& config);

}  // namespace trajcrit::pipeline
