#include <doctest.h>

#include "commands.hpp"
#include "experiment.hpp"
#include "outputs.hpp"

#include <owttt/error.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

using namespace owttt;
using namespace owttt::cli;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string &name)
      : path(fs::temp_directory_path() / ("owttt_cli_" + name)) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

fs::path write_config(const fs::path &dir, const std::string &body) {
  const auto file = dir / "experiment.json";
  std::ofstream(file) << body;
  return file;
}

const char *kSmall = R"({"world": {"n_batches": 12, "n_source": 400}, "output_dir": "out"})";

std::string slurp(const fs::path &file) {
  std::ifstream in(file, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

ErrorCode parse_code(const std::string &text) {
  try {
    (void)parse_experiment(nlohmann::json::parse(text));
  } catch (const Error &e) {
    return e.code();
  }
  return ErrorCode::RuntimeError;
}

} // namespace

TEST_CASE("strict parsing") {
  CHECK(parse_code(R"({"wrold": {}})") == ErrorCode::ConfigError);
  CHECK(parse_code(R"({"run": {"learnig_rate": 0.1}})") == ErrorCode::ConfigError);
  CHECK(parse_code(R"({"run": {"keep_ratio": "half"}})") == ErrorCode::ConfigError);
  CHECK(parse_code(R"({"run": {"enable_expansion": true, "enable_clustering": false}})") ==
        ErrorCode::ConfigError);
  CHECK(parse_code(R"({"world": {"strong_mode": "blobs"}})") == ErrorCode::ConfigError);
  CHECK(parse_code(R"({"report_formats": ["xml"]})") == ErrorCode::ConfigError);
  const auto e = parse_experiment(nlohmann::json::parse(
      R"({"world": {"strong_mode": "near_clusters", "interp": 0.5},
          "run": {"threshold_clamp": [0.4, 1.0], "keep_ratio": 0.25},
          "report_formats": ["csv"]})"));
  CHECK(e.world.strong_mode == StrongMode::NearClusters);
  CHECK(e.run.threshold_clamp->lo == 0.4);
  CHECK(e.run.keep_ratio == 0.25);
  CHECK(e.write_csv);
  CHECK_FALSE(e.write_json);
}

TEST_CASE("config hash tracks content and seed") {
  Experiment a, b;
  CHECK(config_hash(a) == config_hash(b));
  b.output_dir = "elsewhere";
  CHECK(config_hash(a) == config_hash(b));
  apply_seed(b, 7);
  CHECK(config_hash(a) != config_hash(b));
  CHECK(b.world.seed == 7);
  CHECK(provenance_line(b).rfind("# config_hash=", 0) == 0);
  CHECK(provenance_line(b).find("seed=7") != std::string::npos);
  // round trip through the canonical form
  const auto c = parse_experiment(to_json(b));
  CHECK(config_hash(c) == config_hash(b));
}

TEST_CASE("run writes artifacts and is reproducible") {
  TempDir tmp("run");
  const auto file = write_config(tmp.path, kSmall);
  std::ostringstream out, err;
  REQUIRE(cmd_run(file, out, err) == kExitOk);
  const auto dir = tmp.path / "out";
  const auto summary = nlohmann::json::parse(slurp(dir / kSummaryJson));
  CHECK(summary.contains("acc_s"));
  CHECK(summary.contains("acc_n"));
  CHECK(summary.contains("acc_h"));
  for (const char *f : {kPredictionsFile, kTraceFile, kSummaryCsv, kHistogramPre, kHistogramPost})
    CHECK(slurp(dir / f).rfind("# config_hash=", 0) == 0);
  const std::string first = slurp(dir / kSummaryJson);
  REQUIRE(cmd_run(file, out, err) == kExitOk);
  CHECK(slurp(dir / kSummaryJson) == first);
}

TEST_CASE("run reports configuration errors") {
  TempDir tmp("bad");
  const auto file = write_config(
      tmp.path, R"({"run": {"enable_expansion": true, "enable_clustering": false}})");
  std::ostringstream out, err;
  CHECK(cmd_run(file, out, err) == kExitConfig);
  const auto record = nlohmann::json::parse(err.str());
  CHECK(record["error"] == "ConfigError");
  std::ostringstream e2;
  CHECK(cmd_run(tmp.path / "missing.json", out, e2) == kExitConfig);
}

TEST_CASE("seed override from the environment") {
  TempDir tmp("seed");
  const auto file = write_config(tmp.path, kSmall);
  ::setenv("OWTT_SEED", "42", 1);
  const auto e = load_experiment(file);
  ::unsetenv("OWTT_SEED");
  CHECK(e.world.seed == 42);
  CHECK(e.run.seed == 42);
  ::setenv("OWTT_SEED", "forty", 1);
  CHECK_THROWS_AS(load_experiment(file), Error);
  ::unsetenv("OWTT_SEED");
}

TEST_CASE("sweeps") {
  TempDir tmp("sweep");
  const auto file = write_config(tmp.path, kSmall);
  std::ostringstream out, err;
  REQUIRE(cmd_sweep(file, "ratio", {"0.2", "0.4", "0.6", "0.8", "1.0"}, 3, out, err) == kExitOk);
  auto table = read_csv(tmp.path / "out" / kSweepCsv);
  CHECK(table.rows.size() == 5);
  CHECK(table.header.front() == "value");

  REQUIRE(cmd_sweep(file, "ablation", {}, 2, out, err) == kExitOk);
  table = read_csv(tmp.path / "out" / kSweepCsv);
  REQUIRE(table.rows.size() == 6);
  const auto od = table.column("od"), pe = table.column("pe");
  CHECK(table.rows[0][od] == "0");
  CHECK(table.rows[5][pe] == "1");
  CHECK(table.rows[0][table.column("acc_h")] == "0");

  std::ostringstream e2;
  CHECK(cmd_sweep(file, "ratio", {}, 1, out, e2) == kExitConfig);
  CHECK(nlohmann::json::parse(e2.str())["error"] == "ConfigError");
  CHECK(cmd_sweep(file, "temperature", {"0.1"}, 1, out, err) == kExitConfig);
  CHECK(cmd_sweep(file, "fixed_threshold", {"abc"}, 1, out, err) == kExitConfig);

  REQUIRE(cmd_sweep(file, "fixed_threshold", {"0.3", "0.5"}, 2, out, err) == kExitOk);
  REQUIRE(cmd_report(tmp.path / "out", out, err) == kExitOk);
  const auto curve = read_csv(tmp.path / "out" / "report_acc_h_curve.csv");
  CHECK(curve.rows.size() == 2 * 12);
  CHECK(curve.rows.front()[0] == "0.3");
  CHECK(curve.rows.back()[0] == "0.5");
}

TEST_CASE("report") {
  TempDir tmp("report");
  const auto file = write_config(tmp.path, kSmall);
  std::ostringstream out, err;
  REQUIRE(cmd_run(file, out, err) == kExitOk);
  REQUIRE(cmd_report(tmp.path / "out", out, err) == kExitOk);
  for (const char *f :
       {"report_acc_h_curve.csv", "report_threshold.csv", "report_score_histograms.csv"}) {
    CHECK(fs::exists(tmp.path / "out" / f));
    CHECK(slurp(tmp.path / "out" / f).rfind("# config_hash=", 0) == 0);
  }
  CHECK(read_csv(tmp.path / "out" / "report_score_histograms.csv").rows.size() == 64);

  fs::create_directories(tmp.path / "empty");
  std::ostringstream e2;
  CHECK(cmd_report(tmp.path / "empty", out, e2) == kExitFailure);
  CHECK(nlohmann::json::parse(e2.str())["error"] == "MissingArtifacts");
}

TEST_CASE("exported streams reproduce the run") {
  TempDir tmp("export");
  const auto file = write_config(tmp.path, kSmall);
  std::ostringstream out, err;
  REQUIRE(cmd_export(file, tmp.path / "data", true, out, err) == kExitOk);
  CHECK(fs::exists(tmp.path / "data" / "stream.csv"));
  auto e = load_experiment(file);
  const auto generated = execute(e);
  e.input = InputFiles{tmp.path / "data" / "source.owtt", tmp.path / "data" / "stream.owtt"};
  const auto ingested = execute(e);
  REQUIRE(ingested.ok());
  REQUIRE(ingested.records.size() == generated.records.size());
  // float32 storage can move a borderline sample; the bulk must agree
  std::size_t same = 0;
  for (std::size_t i = 0; i < generated.records.size(); ++i)
    same += generated.records[i].predicted_label == ingested.records[i].predicted_label;
  CHECK(same > 0.95 * generated.records.size());
}
