#include "trajcrit/cli.hpp"

#include <algorithm>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "trajcrit/error.hpp"
#include "trajcrit/pipeline.hpp"
#include "trajcrit/report.hpp"
#include "trajcrit/synth.hpp"

namespace trajcrit::cli {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct Flags {
  std::string data;
  std::string script;
  std::string out;
  std::string rules;
  std::string config;
  unsigned jobs = 0;
  double segment_length = 0.0;
  bool jobs_set = false;
};

void add_input_flags(CLI::App* cmd, Flags& f, bool with_rules) {
  cmd->add_option("--data", f.data, "Directory with highD-format recordings");
  cmd->add_option("--script", f.script, "Scenario script to generate and analyse instead of --data");
  cmd->add_option("--config", f.config, "Run configuration (JSON); flags take precedence");
  cmd->add_option("--jobs", f.jobs, "Worker threads, 0 for all cores");
  cmd->add_option("--segment-length", f.segment_length, "Observed road length in m");
  if (with_rules) cmd->add_option("--rules", f.rules, "Custom trigger rule set (JSON)");
}

pipeline::RunConfig build_config(const Flags& f, std::set<std::string> analyses) {
  pipeline::RunConfig c = f.config.empty() ? pipeline::RunConfig{} : pipeline::RunConfig::load(f.config);
  if (!f.data.empty()) {
    c.data_dir = f.data;
    c.script.reset();
  }
  if (!f.script.empty()) {
    c.script = f.script;
    if (f.data.empty()) c.data_dir.reset();
  }
  if (!f.out.empty()) c.out_dir = f.out;
  if (!f.rules.empty()) c.rules_file = f.rules;
  if (f.jobs_set) c.jobs = f.jobs;
  if (f.segment_length != 0.0) c.segment_length = f.segment_length;
  if (!analyses.empty()) c.analyses = std::move(analyses);
  return c;
}

json read_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read " + path);
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError(path + ": " + e.what());
  }
}

int do_analysis(const Flags& f, std::set<std::string> analyses, std::ostream& out) {
  auto config = build_config(f, std::move(analyses));
  config.validate(true);
  const auto bundle = pipeline::run(config);
  report::emit(bundle, *config.out_dir);
  out << "wrote " << bundle.artifacts().size() + bundle.tables().size() << " artifacts to "
      << config.out_dir->string() << "\n";
  return kExitOk;
}

int do_validate(const Flags& f, std::ostream& out) {
  auto config = build_config(f, {});
  config.analyses.clear();
  config.validate(false);
  const auto in = pipeline::load_inputs(config);
  json reports = json::array();
  for (const auto& r : in.recordings) {
    auto j = report::to_json(r.clean, r.recording.info.id);
    j["ingest"] = report::to_json(r.ingest, r.recording.info.id);
    reports.push_back(std::move(j));
  }
  out << report::dump(reports);
  if (config.out_dir) {
    report::Bundle bundle;
    bundle.manifest = in.manifest;
    pipeline::add_validation(bundle, in);
    report::emit(bundle, *config.out_dir);
    for (const auto& r : in.recordings) {
      char name[48];
      std::snprintf(name, sizeof name, "%02d_flagged.csv", r.recording.info.id);
      clean::write_flagged_csv(r.clean, *config.out_dir / name);
    }
  }
  return kExitOk;
}

struct SynthFlags {
  std::string scenario;
  std::string config;
  std::string out;
  std::uint64_t seed = 1;
  int recording_id = 1;
  double segment_length = 0.0;
};

int do_synth(const SynthFlags& s, std::ostream& out) {
  if (s.out.empty()) throw ConfigError("--out is required");
  json params = s.config.empty() ? json::object() : read_json(s.config);
  std::string kind = s.scenario;
  if (kind.empty()) {
    if (params.contains("vehicles")) {
      kind = "custom";
    } else {
      throw ConfigError("--scenario is required");
    }
  }
  auto script = synth::make_scenario(kind, params, s.seed);
  script.recording_id = s.recording_id;
  if (s.segment_length != 0.0) script.segment_length = s.segment_length;
  const auto gt = synth::generate(script);
  synth::write_dataset(gt.recording, s.out);
  char name[48];
  std::snprintf(name, sizeof name, "%02d_scenario.json", s.recording_id);
  std::ofstream sf(fs::path(s.out) / name);
  sf << report::dump(synth::script_to_json(script));
  if (!sf) throw DataError("cannot write scenario script to " + s.out);
  out << "generated " << gt.recording.tracks.size() << " tracks (" << kind << ") in " << s.out << "\n";
  return kExitOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Trajectory criticality analytics for highD-format recordings", "trajcrit"};
  app.set_version_flag("--version", report::tool_version());
  app.require_subcommand(1);

  Flags validate_f, stats_f, macro_f, risk_f, all_f;
  auto* validate = app.add_subcommand("validate", "Ingest and clean, then print the cleaning report");
  add_input_flags(validate, validate_f, false);
  validate->add_option("--out", validate_f.out, "Also write the reports as a bundle");

  struct Cmd {
    const char* name;
    const char* help;
    Flags* flags;
    bool rules;
    std::set<std::string> analyses;
    CLI::App* app = nullptr;
  };
  std::vector<Cmd> cmds{{"stats", "Distributions and fits", &stats_f, false, {"stats"}},
                        {"macro", "Minute slices, fundamental diagram and lane changes", &macro_f, false, {"macro"}},
                        {"risk", "Criticality classifiers and studies", &risk_f, true, {"risk"}},
                        {"all", "Every analysis", &all_f, true, {"stats", "macro", "risk"}}};
  for (auto& c : cmds) {
    c.app = app.add_subcommand(c.name, c.help);
    add_input_flags(c.app, *c.flags, c.rules);
    c.app->add_option("--out", c.flags->out, "Output directory for the report bundle");
  }

  SynthFlags synth_f;
  auto* synth_cmd = app.add_subcommand("synth", "Generate a synthetic recording in highD format");
  synth_cmd->add_option("--scenario", synth_f.scenario, "Scenario kind")
      ->check(CLI::IsMember(synth::scenario_kinds()));
  synth_cmd->add_option("--seed", synth_f.seed, "Random seed");
  synth_cmd->add_option("--config", synth_f.config, "Scenario parameters, or a full script for 'custom'");
  synth_cmd->add_option("--out", synth_f.out, "Output directory")->required();
  synth_cmd->add_option("--recording-id", synth_f.recording_id, "Recording id of the written files")
      ->check(CLI::Range(1, 99));
  synth_cmd->add_option("--segment-length", synth_f.segment_length, "Observed road length in m");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    auto jobs_given = [](CLI::App* a) { return a->count("--jobs") > 0; };
    if (validate->parsed()) {
      validate_f.jobs_set = jobs_given(validate);
      return do_validate(validate_f, out);
    }
    if (synth_cmd->parsed()) return do_synth(synth_f, out);
    for (auto& c : cmds) {
      if (!c.app->parsed()) continue;
      c.flags->jobs_set = jobs_given(c.app);
      return do_analysis(*c.flags, c.analyses, out);
    }
  } catch (const DataError& e) {
    err << "data error: " << e.what() << "\n";
    return kExitData;
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const SpecError& e) {
    err << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const GenerationError& e) {
    err << "generation error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitData;
  }
  err << app.help();
  return kExitConfig;
}

int run(int argc, char** argv) {
  std::vector<std::string> args;
  for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
  return run(args, std::cout, std::cerr);
}

}  // namespace trajcrit::cli
