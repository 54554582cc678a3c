#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "trajcrit/error.hpp"
#include "trajcrit/measures.hpp"
#include "trajcrit/pipeline.hpp"
#include "trajcrit/report.hpp"
#include "trajcrit/stats.hpp"
#include "trajcrit/synth.hpp"

namespace py = pybind11;
using namespace trajcrit;
using nlohmann::json;

namespace {

// Results cross the boundary as JSON text; the Python wrapper decodes them.
std::string as_text(const json& j) { return report::dump(j); }

json parse(const std::string& text) {
  try {
    return text.empty() ? json::object() : json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(e.what());
  }
}

LeaderGap gap_of(double gap, double rel_speed, double rel_accel) {
  LeaderGap g;
  g.gap = gap;
  g.rel_speed = rel_speed;
  g.rel_accel = rel_accel;
  return g;
}

}  // namespace

PYBIND11_MODULE(_trajcrit, m) {
  m.doc() = "Trajectory criticality analytics (compiled core)";

  // Handles are leaked on purpose: they must outlive interpreter shutdown.
  static py::handle base = py::exception<Error>(m, "Error", PyExc_RuntimeError).release();
  static py::handle data = py::exception<DataError>(m, "DataError", base).release();
  static py::handle config = py::exception<ConfigError>(m, "ConfigError", base).release();
  static py::handle spec = py::exception<SpecError>(m, "SpecError", base).release();
  static py::handle generation = py::exception<GenerationError>(m, "GenerationError", base).release();
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const DataError& e) {
      py::set_error(data, e.what());
    } catch (const ConfigError& e) {
      py::set_error(config, e.what());
    } catch (const SpecError& e) {
      py::set_error(spec, e.what());
    } catch (const GenerationError& e) {
      py::set_error(generation, e.what());
    } catch (const Error& e) {
      py::set_error(base, e.what());
    }
  });

  m.attr("__version__") = report::tool_version();

  m.def("thw", [](double gap, double v_f) { return measures::thw(gap_of(gap, 0.0, 0.0), v_f); }, py::arg("gap"),
        py::arg("v_follower"), "Time headway in s, None when the follower stands.");
  m.def("ttc", [](double gap, double v_r) { return measures::ttc(gap_of(gap, v_r, 0.0)); }, py::arg("gap"),
        py::arg("rel_speed"), "Signed time to collision in s, positive when closing.");
  m.def("ettc", [](double gap, double v_r, double a_r) { return measures::ettc(gap_of(gap, v_r, a_r)); },
        py::arg("gap"), py::arg("rel_speed"), py::arg("rel_accel"));
  m.def(
      "rp",
      [](std::optional<double> thw, std::optional<double> ttc, double a, double b) {
        measures::RpParams p;
        p.a = a;
        p.b = b;
        return measures::rp(thw, ttc, p);
      },
      py::arg("thw"), py::arg("ttc"), py::arg("a") = 1.0, py::arg("b") = 4.0);

  m.def(
      "histogram_json",
      [](const std::vector<double>& values, const std::vector<double>& edges, bool saturate) {
        stats::HistogramSpec spec{edges, saturate ? stats::ClampPolicy::Saturate : stats::ClampPolicy::Drop};
        return as_text(report::to_json(stats::histogram(values, spec)));
      },
      py::arg("values"), py::arg("edges"), py::arg("saturate") = false);
  m.def(
      "fit_json",
      [](const std::vector<double>& values, const std::string& family) {
        if (family == "logistic") return as_text(report::to_json(stats::fit_logistic(values)));
        if (family == "gev") return as_text(report::to_json(stats::fit_gev(values)));
        throw ConfigError("unknown family '" + family + "'");
      },
      py::arg("values"), py::arg("family"), py::call_guard<py::gil_scoped_release>());
  m.def(
      "triangular_fit_json",
      [](const std::vector<std::pair<double, double>>& points, double target) {
        std::vector<macro::Point2> p;
        for (const auto& [x, y] : points) p.push_back({x, y});
        return as_text(report::to_json(macro::triangular_fit(p, target)));
      },
      py::arg("points"), py::arg("target") = 0.97);

  m.def("scenario_kinds", &synth::scenario_kinds);
  m.def(
      "synth",
      [](const std::string& kind, const std::filesystem::path& out, const std::string& params, std::uint64_t seed,
         int recording_id) {
        auto script = synth::make_scenario(kind, parse(params), seed);
        script.recording_id = recording_id;
        const auto gt = synth::generate(script);
        synth::write_dataset(gt.recording, out);
        return gt.recording.tracks.size();
      },
      py::arg("kind"), py::arg("out"), py::arg("params") = "", py::arg("seed") = 1, py::arg("recording_id") = 1,
      "Writes a synthetic recording in highD format; returns the track count.");

  m.def(
      "run",
      [](const std::string& config_text, bool emit) {
        auto config = pipeline::RunConfig::from_json(parse(config_text));
        config.validate(emit);
        const auto bundle = pipeline::run(config);
        if (emit) report::emit(bundle, *config.out_dir);
        json names = json::array();
        for (const auto& a : bundle.artifacts()) names.push_back({{"name", a.name}, {"kind", a.kind}});
        return as_text(json{{"manifest",
                             {{"tool_version", bundle.manifest.tool_version},
                              {"config_hash", bundle.manifest.config_hash},
                              {"input_digest", bundle.manifest.input_digest}}},
                            {"artifacts", names}});
      },
      py::arg("config"), py::arg("emit") = true, py::call_guard<py::gil_scoped_release>());
  m.def(
      "verify", [](const std::filesystem::path& dir) { return report::verify(dir); }, py::arg("bundle_dir"));
}
