#pragma once

#include "experiment.hpp"

#include <owttt/error.hpp>
#include <owttt/protocol.hpp>

#include <json.hpp>

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace owttt::cli {

inline constexpr const char *kPredictionsFile = "predictions.csv";
inline constexpr const char *kTraceFile = "trace.csv";
inline constexpr const char *kSummaryJson = "summary.json";
inline constexpr const char *kSummaryCsv = "summary.csv";
inline constexpr const char *kHistogramPre = "histogram_pre.csv";
inline constexpr const char *kHistogramPost = "histogram_post.csv";
inline constexpr const char *kErrorFile = "error.json";
inline constexpr const char *kSweepCsv = "sweep.csv";

/// Score-gap diagnostics of a finished run.
struct GapSummary {
  std::optional<double> first_batch;
  std::optional<double> pre;
  std::optional<double> post;
};

GapSummary gap_summary(const RunArtifacts &artifacts, int num_known);

nlohmann::json summary_json(const Experiment &experiment, const RunArtifacts &artifacts);

/// Writes predictions, trace, summary and histograms into `dir`.
void write_run_outputs(const std::filesystem::path &dir, const Experiment &experiment,
                       const RunArtifacts &artifacts);

nlohmann::json error_record(ErrorCode code, const std::string &message,
                            std::optional<std::size_t> batch = std::nullopt);
void write_error_record(const std::filesystem::path &dir, const nlohmann::json &record);

/// A parsed comma-separated file with `#` comment lines skipped.
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  std::size_t column(const std::string &name) const;
};

CsvTable read_csv(const std::filesystem::path &file);

std::string format_optional(const std::optional<double> &value);

} // namespace owttt::cli
