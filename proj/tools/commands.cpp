#include "commands.hpp"

#include "outputs.hpp"

#include <owttt/error.hpp>

#include <algorithm>
#include <atomic>
#include <charconv>
#include <fstream>
#include <map>
#include <ostream>
#include <thread>

namespace owttt::cli {
namespace {

using nlohmann::json;
namespace fs = std::filesystem;

[[noreturn]] void config_error(const std::string &what) {
  throw Error(ErrorCode::ConfigError, what);
}

int report_error(std::ostream &err, const json &record, const fs::path &dir = {}) {
  err << record.dump() << '\n';
  if (!dir.empty()) write_error_record(dir, record);
  return record.at("error") == "ConfigError" ? kExitConfig : kExitFailure;
}

double parse_number(const std::string &text) {
  double value = 0.0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc() || ptr != text.data() + text.size())
    config_error("sweep value '" + text + "' is not a number");
  return value;
}

AblationRow parse_toggles(const std::string &text) {
  if (text.size() == 1 && text[0] >= '0' && text[0] <= '5')
    return kAblationRows[text[0] - '0'];
  if (text.size() != 4 || text.find_first_not_of("01") != std::string::npos)
    config_error("ablation value '" + text + "' must be a row index 0-5 or four 0/1 toggles");
  return {text[0] == '1', text[1] == '1', text[2] == '1', text[3] == '1'};
}

std::string toggles_code(const RunConfig &r) {
  std::string code;
  for (bool b : {r.enable_ood_detection, r.enable_clustering, r.enable_expansion,
                 r.enable_alignment})
    code += b ? '1' : '0';
  return code;
}

std::string first_comment(const fs::path &file) {
  std::ifstream in(file);
  std::string line;
  if (std::getline(in, line) && !line.empty() && line.front() == '#') return line;
  return "#";
}

std::string cell(const CsvTable &t, const std::vector<std::string> &row, const std::string &col) {
  const auto i = t.column(col);
  return i < row.size() ? row[i] : std::string();
}

void require_run_dir(const fs::path &dir) {
  for (const char *name : {kTraceFile, kPredictionsFile, kHistogramPre, kHistogramPost})
    if (!fs::exists(dir / name))
      throw Error(ErrorCode::MissingArtifacts,
                  "'" + dir.string() + "' has no " + name + "; not a run directory");
}

struct Histograms {
  CsvTable pre, post;
};

Histograms read_histograms(const fs::path &dir) {
  return {read_csv(dir / kHistogramPre), read_csv(dir / kHistogramPost)};
}

void emit_histogram_rows(std::ostream &out, const Histograms &h, const std::string &prefix) {
  for (std::size_t i = 0; i < h.pre.rows.size() && i < h.post.rows.size(); ++i) {
    const auto &a = h.pre.rows[i];
    const auto &b = h.post.rows[i];
    out << prefix << cell(h.pre, a, "bin") << ',' << cell(h.pre, a, "lo") << ','
        << cell(h.pre, a, "hi") << ',' << cell(h.pre, a, "weak") << ','
        << cell(h.pre, a, "strong") << ',' << cell(h.post, b, "weak") << ','
        << cell(h.post, b, "strong") << '\n';
  }
}

std::ofstream open_out(const fs::path &file) {
  std::ofstream out(file, std::ios::binary);
  if (!out) throw Error(ErrorCode::IoError, "cannot write '" + file.string() + "'");
  return out;
}

void report_run_dir(const fs::path &dir) {
  require_run_dir(dir);
  const std::string prov = first_comment(dir / kTraceFile);
  const CsvTable trace = read_csv(dir / kTraceFile);
  const CsvTable preds = read_csv(dir / kPredictionsFile);

  {
    auto out = open_out(dir / "report_acc_h_curve.csv");
    out << prov << "\nbatch,acc_s,acc_n,acc_h\n";
    for (const auto &r : trace.rows)
      out << cell(trace, r, "batch") << ',' << cell(trace, r, "acc_s") << ','
          << cell(trace, r, "acc_n") << ',' << cell(trace, r, "acc_h") << '\n';
  }
  {
    // Threshold used per batch next to the mean scores of both populations.
    struct Acc {
      double threshold = 0, weak = 0, strong = 0;
      std::size_t n_weak = 0, n_strong = 0;
    };
    std::map<long, Acc> by_batch;
    const auto c_batch = preds.column("batch"), c_score = preds.column("ood_score"),
               c_tau = preds.column("threshold_used"), c_strong = preds.column("is_strong");
    for (const auto &r : preds.rows) {
      auto &a = by_batch[std::stol(r[c_batch])];
      a.threshold = std::stod(r[c_tau]);
      const double s = std::stod(r[c_score]);
      if (r[c_strong] == "0") {
        a.weak += s;
        ++a.n_weak;
      } else {
        a.strong += s;
        ++a.n_strong;
      }
    }
    auto out = open_out(dir / "report_threshold.csv");
    out << prov << "\nbatch,threshold,mean_weak_score,mean_strong_score\n";
    for (const auto &[b, a] : by_batch) {
      out << b << ',' << a.threshold << ',';
      if (a.n_weak) out << a.weak / a.n_weak;
      out << ',';
      if (a.n_strong) out << a.strong / a.n_strong;
      out << '\n';
    }
  }
  {
    auto out = open_out(dir / "report_score_histograms.csv");
    out << prov << "\nbin,lo,hi,pre_weak,pre_strong,post_weak,post_strong\n";
    emit_histogram_rows(out, read_histograms(dir), "");
  }
}

void report_sweep_dir(const fs::path &dir) {
  const std::string prov = first_comment(dir / kSweepCsv);
  const CsvTable sweep = read_csv(dir / kSweepCsv);
  auto curve = open_out(dir / "report_acc_h_curve.csv");
  auto thr = open_out(dir / "report_threshold.csv");
  auto hist = open_out(dir / "report_score_histograms.csv");
  curve << prov << "\nvalue,batch,acc_s,acc_n,acc_h\n";
  thr << prov << "\nvalue,acc_s,acc_n,acc_h,final_threshold\n";
  hist << prov << "\nvalue,bin,lo,hi,pre_weak,pre_strong,post_weak,post_strong\n";
  for (const auto &row : sweep.rows) {
    const std::string value = cell(sweep, row, "value");
    const fs::path sub = dir / cell(sweep, row, "dir");
    require_run_dir(sub);
    const CsvTable trace = read_csv(sub / kTraceFile);
    for (const auto &r : trace.rows)
      curve << value << ',' << cell(trace, r, "batch") << ',' << cell(trace, r, "acc_s") << ','
            << cell(trace, r, "acc_n") << ',' << cell(trace, r, "acc_h") << '\n';
    thr << value << ',' << cell(sweep, row, "acc_s") << ',' << cell(sweep, row, "acc_n") << ','
        << cell(sweep, row, "acc_h") << ','
        << (trace.rows.empty() ? std::string() : cell(trace, trace.rows.back(), "threshold"))
        << '\n';
    emit_histogram_rows(hist, read_histograms(sub), value + ",");
  }
}

std::string dir_label(const std::string &value) {
  std::string out;
  for (char c : value) out += (std::isalnum(static_cast<unsigned char>(c)) || c == '.') ? c : '_';
  return out;
}

} // namespace

SweepAxis parse_axis(const std::string &name) {
  if (name == "ratio") return SweepAxis::Ratio;
  if (name == "fixed_threshold") return SweepAxis::FixedThreshold;
  if (name == "keep_ratio") return SweepAxis::KeepRatio;
  if (name == "ablation") return SweepAxis::Ablation;
  config_error("unknown sweep axis '" + name + "'");
}

std::string to_string(SweepAxis axis) {
  switch (axis) {
  case SweepAxis::Ratio: return "ratio";
  case SweepAxis::FixedThreshold: return "fixed_threshold";
  case SweepAxis::KeepRatio: return "keep_ratio";
  case SweepAxis::Ablation: return "ablation";
  }
  return "?";
}

Inputs load_inputs(const Experiment &e) {
  if (!e.input) return {generate_source(e.world), generate_stream(e.world)};
  Inputs in{stream_as_source(read_stream_binary(e.input->source_file.string())),
            read_stream_binary(e.input->stream_file.string())};
  return in;
}

RunArtifacts execute(const Experiment &e) {
  const Inputs in = load_inputs(e);
  return run_stream(in.stream, e.run, in.source);
}

std::vector<Experiment> sweep_points(const Experiment &base, SweepAxis axis,
                                     const std::vector<std::string> &values) {
  if (values.empty()) config_error("sweep needs at least one value");
  std::vector<Experiment> points;
  for (const auto &v : values) {
    Experiment e = base;
    switch (axis) {
    case SweepAxis::Ratio:
      e.world.ratio = parse_number(v);
      try {
        validate(e.world);
      } catch (const Error &err) {
        config_error(std::string("ratio ") + v + ": " + err.what());
      }
      break;
    case SweepAxis::FixedThreshold:
      e.run.fixed_threshold = parse_number(v);
      e.run.threshold_clamp.reset();
      break;
    case SweepAxis::KeepRatio:
      e.run.keep_ratio = parse_number(v);
      break;
    case SweepAxis::Ablation:
      e.run = with_ablation(e.run, parse_toggles(v));
      break;
    }
    validate(e.run);
    e.output_dir = base.output_dir / (to_string(axis) + "_" + dir_label(v));
    points.push_back(std::move(e));
  }
  return points;
}

int cmd_run(const fs::path &file, std::ostream &out, std::ostream &err) {
  Experiment e;
  try {
    e = load_experiment(file);
  } catch (const Error &x) {
    return report_error(err, error_record(x.code(), x.what()));
  }
  try {
    const RunArtifacts a = execute(e);
    write_run_outputs(e.output_dir, e, a);
    if (!a.ok())
      return report_error(err, error_record(*a.error_code, a.error_message, a.error_batch),
                          e.output_dir);
    const auto s = summary_json(e, a);
    out << "acc_s=" << s["acc_s"].dump() << " acc_n=" << s["acc_n"].dump()
        << " acc_h=" << s["acc_h"].dump() << " -> " << e.output_dir.string() << '\n';
    return kExitOk;
  } catch (const Error &x) {
    return report_error(err, error_record(x.code(), x.what()), e.output_dir);
  }
}

int cmd_sweep(const fs::path &file, const std::string &axis_name,
              const std::vector<std::string> &values, unsigned jobs, std::ostream &out,
              std::ostream &err) {
  Experiment base;
  SweepAxis axis{};
  std::vector<Experiment> points;
  try {
    base = load_experiment(file);
    axis = parse_axis(axis_name);
    std::vector<std::string> vals = values;
    if (vals.empty() && axis == SweepAxis::Ablation)
      for (int i = 0; i < 6; ++i) vals.push_back(std::to_string(i));
    points = sweep_points(base, axis, vals);
  } catch (const Error &x) {
    return report_error(err, error_record(x.code(), x.what()));
  }
  std::vector<std::string> labels = values;
  if (labels.empty())
    for (int i = 0; i < 6; ++i) labels.push_back(std::to_string(i));

  std::vector<RunArtifacts> results(points.size());
  std::vector<std::string> failures(points.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < points.size(); i = next++) {
      try {
        results[i] = execute(points[i]);
        write_run_outputs(points[i].output_dir, points[i], results[i]);
        if (!results[i].ok())
          write_error_record(points[i].output_dir,
                             error_record(*results[i].error_code, results[i].error_message,
                                          results[i].error_batch));
      } catch (const std::exception &x) {
        failures[i] = x.what();
      }
    }
  };
  const unsigned n_threads =
      std::max(1u, std::min<unsigned>(jobs == 0 ? 1 : jobs, static_cast<unsigned>(points.size())));
  std::vector<std::jthread> pool;
  for (unsigned t = 0; t < n_threads; ++t) pool.emplace_back(worker);
  pool.clear();

  int code = kExitOk;
  json rows = json::array();
  try {
    auto csv = open_out(base.output_dir / kSweepCsv);
    csv << provenance_line(base) << " axis=" << to_string(axis) << '\n';
    csv << "value,";
    if (axis == SweepAxis::Ablation) csv << "od,pc,pe,da,";
    csv << "acc_s,acc_n,acc_h,status,dir\n";
    for (std::size_t i = 0; i < points.size(); ++i) {
      const auto &a = results[i];
      const bool ok = failures[i].empty() && a.ok();
      if (!ok) code = kExitFailure;
      const auto m = a.metrics.value_or(MetricsReport{});
      csv << labels[i] << ',';
      if (axis == SweepAxis::Ablation)
        for (char c : toggles_code(points[i].run)) csv << c << ',';
      csv << format_optional(m.acc_s) << ',' << format_optional(m.acc_n) << ','
          << format_optional(m.acc_h) << ',' << (ok ? "ok" : "error") << ','
          << points[i].output_dir.filename().string() << '\n';
      rows.push_back({{"value", labels[i]},
                      {"acc_s", m.acc_s ? json(*m.acc_s) : json(nullptr)},
                      {"acc_n", m.acc_n ? json(*m.acc_n) : json(nullptr)},
                      {"acc_h", m.acc_h ? json(*m.acc_h) : json(nullptr)},
                      {"status", ok ? "ok" : "error"}});
      if (!failures[i].empty())
        err << error_record(ErrorCode::RuntimeError, failures[i]).dump() << '\n';
      else if (!a.ok())
        err << error_record(*a.error_code, a.error_message, a.error_batch).dump() << '\n';
    }
    if (base.write_json) {
      auto js = open_out(base.output_dir / "sweep.json");
      js << json{{"axis", to_string(axis)},
                 {"config_hash", config_hash(base)},
                 {"seed", base.run.seed},
                 {"rows", rows}}
                .dump(2)
         << '\n';
    }
  } catch (const Error &x) {
    return report_error(err, error_record(x.code(), x.what()), base.output_dir);
  }
  out << points.size() << " sweep points -> " << (base.output_dir / kSweepCsv).string() << '\n';
  return code;
}

int cmd_report(const fs::path &dir, std::ostream &out, std::ostream &err) {
  try {
    if (!fs::is_directory(dir) || fs::is_empty(dir))
      throw Error(ErrorCode::MissingArtifacts, "'" + dir.string() + "' holds no run artifacts");
    if (fs::exists(dir / kSweepCsv))
      report_sweep_dir(dir);
    else
      report_run_dir(dir);
  } catch (const Error &x) {
    return report_error(err, error_record(x.code(), x.what()));
  } catch (const std::exception &x) {
    return report_error(err, error_record(ErrorCode::MissingArtifacts, x.what()));
  }
  out << "report written to " << dir.string() << '\n';
  return kExitOk;
}

int cmd_export(const fs::path &file, const fs::path &out_dir, bool csv, std::ostream &out,
               std::ostream &err) {
  try {
    const Experiment e = load_experiment(file);
    const fs::path dir = out_dir.empty() ? e.output_dir : out_dir;
    fs::create_directories(dir);
    const Inputs in = load_inputs(e);
    const Stream source = source_as_stream(in.source);
    write_stream_binary((dir / "source.owtt").string(), source);
    write_stream_binary((dir / "stream.owtt").string(), in.stream);
    if (csv) {
      write_stream_csv((dir / "source.csv").string(), source, provenance_line(e));
      write_stream_csv((dir / "stream.csv").string(), in.stream, provenance_line(e));
    }
    out << "exported to " << dir.string() << '\n';
    return kExitOk;
  } catch (const Error &x) {
    return report_error(err, error_record(x.code(), x.what()));
  }
}

} // namespace owttt::cli
