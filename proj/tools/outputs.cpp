#include "outputs.hpp"

#include <owttt/metrics.hpp>

#include <fstream>
#include <sstream>

namespace owttt::cli {
namespace {

using nlohmann::json;

std::ofstream open_out(const std::filesystem::path &file) {
  std::ofstream out(file, std::ios::binary);
  if (!out) throw Error(ErrorCode::IoError, "cannot write '" + file.string() + "'");
  return out;
}

std::string fmt(double v) {
  std::ostringstream s;
  s.precision(10);
  s << v;
  return s.str();
}

json optional_json(const std::optional<double> &v) { return v ? json(*v) : json(nullptr); }

std::optional<double> try_gap(std::span<const PredictionRecord> records, int num_known) {
  try {
    return score_separation(records, num_known).gap;
  } catch (const Error &) {
    return std::nullopt;
  }
}

void write_histogram(const std::filesystem::path &file, const std::string &provenance,
                     const ScoreHistogram &h) {
  auto out = open_out(file);
  out << provenance << "\nbin,lo,hi,weak,strong\n";
  const double width = 1.0 / ScoreHistogram::kBins;
  for (std::size_t b = 0; b < ScoreHistogram::kBins; ++b)
    out << b << ',' << fmt(b * width) << ',' << fmt((b + 1) * width) << ',' << h.weak[b] << ','
        << h.strong[b] << '\n';
}

} // namespace

std::string format_optional(const std::optional<double> &value) {
  return value ? fmt(*value) : std::string();
}

GapSummary gap_summary(const RunArtifacts &artifacts, int num_known) {
  GapSummary g;
  std::vector<PredictionRecord> first;
  for (const auto &r : artifacts.records)
    if (r.timestamp == 0) first.push_back(r);
  g.first_batch = try_gap(first, num_known);
  g.pre = try_gap(artifacts.pre_scores, num_known);
  g.post = try_gap(artifacts.post_scores, num_known);
  return g;
}

json summary_json(const Experiment &experiment, const RunArtifacts &a) {
  const int k = experiment.world.k_s;
  json s;
  s["config_hash"] = config_hash(experiment);
  s["seed"] = experiment.run.seed;
  s["status"] = a.ok() ? "ok" : "error";
  s["n_records"] = a.records.size();
  s["n_batches"] = a.trace.size();
  s["max_novel_prototypes"] = a.max_novel_prototypes;
  s["final_threshold"] = a.trace.empty() ? json(nullptr) : json(a.trace.back().threshold);
  if (a.metrics) {
    s["acc_s"] = optional_json(a.metrics->acc_s);
    s["acc_n"] = optional_json(a.metrics->acc_n);
    s["acc_h"] = optional_json(a.metrics->acc_h);
    s["n_weak"] = a.metrics->n_weak;
    s["n_strong"] = a.metrics->n_strong;
  } else {
    s["acc_s"] = s["acc_n"] = s["acc_h"] = nullptr;
    s["n_weak"] = s["n_strong"] = 0;
  }
  const auto gaps = gap_summary(a, k);
  s["score_gap"] = {{"first_batch", optional_json(gaps.first_batch)},
                    {"pre", optional_json(gaps.pre)},
                    {"post", optional_json(gaps.post)}};
  if (!a.ok())
    s["error"] = error_record(*a.error_code, a.error_message, a.error_batch);
  s["config"] = to_json(experiment);
  s["config"].erase("output_dir");
  return s;
}

void write_run_outputs(const std::filesystem::path &dir, const Experiment &experiment,
                       const RunArtifacts &a) {
  std::filesystem::create_directories(dir);
  const std::string prov = provenance_line(experiment);
  const int k = experiment.world.k_s;

  {
    auto out = open_out(dir / kPredictionsFile);
    out << prov << "\nbatch,index,predicted_label,ood_score,threshold_used,hidden_label,is_strong\n";
    for (const auto &r : a.records)
      out << r.timestamp << ',' << r.index << ',' << r.predicted_label << ','
          << fmt(r.ood_score) << ',' << fmt(r.threshold_used) << ',' << r.hidden_label << ','
          << (r.hidden_label >= k ? 1 : 0) << '\n';
  }
  {
    auto out = open_out(dir / kTraceFile);
    out << prov << "\nbatch,acc_s,acc_n,acc_h,novel_prototypes,threshold\n";
    for (const auto &t : a.trace)
      out << t.batch << ',' << format_optional(t.cumulative.acc_s) << ','
          << format_optional(t.cumulative.acc_n) << ',' << format_optional(t.cumulative.acc_h)
          << ',' << t.novel_prototypes << ',' << fmt(t.threshold) << '\n';
  }
  const json summary = summary_json(experiment, a);
  if (experiment.write_json) {
    auto out = open_out(dir / kSummaryJson);
    out << summary.dump(2) << '\n';
  }
  if (experiment.write_csv) {
    auto out = open_out(dir / kSummaryCsv);
    out << prov << "\nstatus,acc_s,acc_n,acc_h,n_weak,n_strong,max_novel_prototypes,"
                   "gap_first_batch,gap_pre,gap_post\n";
    const auto gaps = gap_summary(a, k);
    out << (a.ok() ? "ok" : "error") << ','
        << (a.metrics ? format_optional(a.metrics->acc_s) : "") << ','
        << (a.metrics ? format_optional(a.metrics->acc_n) : "") << ','
        << (a.metrics ? format_optional(a.metrics->acc_h) : "") << ','
        << (a.metrics ? a.metrics->n_weak : 0) << ',' << (a.metrics ? a.metrics->n_strong : 0)
        << ',' << a.max_novel_prototypes << ',' << format_optional(gaps.first_batch) << ','
        << format_optional(gaps.pre) << ',' << format_optional(gaps.post) << '\n';
  }
  write_histogram(dir / kHistogramPre, prov, score_histogram(a.pre_scores, k));
  write_histogram(dir / kHistogramPost, prov, score_histogram(a.post_scores, k));
}

json error_record(ErrorCode code, const std::string &message, std::optional<std::size_t> batch) {
  json e = {{"error", std::string(to_string(code))}, {"message", message}};
  e["batch"] = batch ? json(*batch) : json(nullptr);
  return e;
}

void write_error_record(const std::filesystem::path &dir, const json &record) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  std::ofstream out(dir / kErrorFile);
  if (out) out << record.dump(2) << '\n';
}

std::size_t CsvTable::column(const std::string &name) const {
  for (std::size_t i = 0; i < header.size(); ++i)
    if (header[i] == name) return i;
  throw Error(ErrorCode::MissingArtifacts, "column '" + name + "' not found");
}

CsvTable read_csv(const std::filesystem::path &file) {
  std::ifstream in(file);
  if (!in) throw Error(ErrorCode::MissingArtifacts, "missing '" + file.string() + "'");
  CsvTable table;
  std::string line;
  bool have_header = false;
  while (std::getline(in, line)) {
    if (line.empty() || line.front() == '#') continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (!line.empty() && line.back() == ',') cells.emplace_back();
    if (!have_header) {
      table.header = std::move(cells);
      have_header = true;
    } else {
      table.rows.push_back(std::move(cells));
    }
  }
  if (!have_header) throw Error(ErrorCode::MissingArtifacts, "empty '" + file.string() + "'");
  return table;
}

} // namespace owttt::cli
