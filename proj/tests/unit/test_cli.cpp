#include <fstream>
#include <sstream>

#include "doctest.h"
#include "json.hpp"
#include "support.hpp"
#include "trajcrit/cli.hpp"

using namespace trajcrit;
namespace fs = std::filesystem;

namespace {

struct Result {
  int code;
  std::string out;
  std::string err;
};

Result call(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

}  // namespace

TEST_CASE("usage errors exit 2") {
  CHECK(call({}).code == cli::kExitConfig);
  CHECK(call({"frobnicate"}).code == cli::kExitConfig);
  CHECK(call({"stats", "--bogus"}).code == cli::kExitConfig);
  CHECK(call({"synth", "--scenario", "nope", "--out", "/tmp/x"}).code == cli::kExitConfig);
  CHECK(call({"synth", "--scenario", "closing"}).code == cli::kExitConfig);
  CHECK(call({"stats"}).code == cli::kExitConfig);  // no input
  CHECK(call({"--help"}).code == cli::kExitOk);
}

TEST_CASE("missing data exits 1") {
  const auto r = call({"validate", "--data", "/no/such/dir"});
  CHECK(r.code == cli::kExitData);
  CHECK(r.err.find("/no/such/dir") != std::string::npos);
}

TEST_CASE("synth, validate and analyse") {
  const auto root = support::temp_dir("cli");
  const auto d = (root / "d").string();
  auto r = call({"synth", "--scenario", "lane_change", "--out", d, "--recording-id", "3"});
  REQUIRE(r.code == 0);
  CHECK(fs::exists(root / "d" / "03_tracks.csv"));
  CHECK(fs::exists(root / "d" / "03_scenario.json"));

  r = call({"validate", "--data", d});
  REQUIRE(r.code == 0);
  const auto reports = nlohmann::json::parse(r.out);
  REQUIRE(reports.size() == 1);
  CHECK(reports[0]["recording_id"] == 3);
  CHECK(reports[0]["discarded"].empty());

  const auto out = (root / "r").string();
  r = call({"macro", "--data", d, "--out", out});
  REQUIRE(r.code == 0);
  CHECK(fs::exists(root / "r" / "lane_changes.json"));
  CHECK_FALSE(fs::exists(root / "r" / "risk_events_cars100.json"));

  CHECK(call({"risk", "--data", d, "--out", (root / "d" / "inner").string()}).code == cli::kExitConfig);
  CHECK(call({"risk", "--data", d, "--out", out, "--rules", (root / "none.json").string()}).code == cli::kExitConfig);

  std::ofstream(root / "cfg.json") << R"({"thw_undercut": 1.2, "unknown": 1})";
  CHECK(call({"stats", "--data", d, "--config", (root / "cfg.json").string(), "--out", out}).code == cli::kExitConfig);
}
