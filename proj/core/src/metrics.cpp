#include "owttt/metrics.hpp"
#include "owttt/error.hpp"

#include <algorithm>
#include <cmath>

namespace owttt {

double harmonic_mean(double a, double b) noexcept {
  const double denom = a + b;
  return denom > 0.0 ? 2.0 * a * b / denom : 0.0;
}

MetricsAccumulator::MetricsAccumulator(int num_known_classes)
    : num_known_(num_known_classes) {
  if (num_known_ <= 0)
    throw Error(ErrorCode::InvalidArgument, "num_known_classes must be positive");
}

void MetricsAccumulator::add(const PredictionRecord &r) {
  if (r.hidden_label < num_known_) {
    ++n_weak_;
    if (r.predicted_label == r.hidden_label)
      ++weak_correct_;
  } else {
    ++n_strong_;
    if (r.predicted_label == kReject)
      ++strong_rejected_;
  }
}

void MetricsAccumulator::add(std::span<const PredictionRecord> records) {
  for (const auto &r : records)
    add(r);
}

TracePoint MetricsAccumulator::snapshot(std::size_t batch) const {
  TracePoint p;
  p.batch = batch;
  if (n_weak_ > 0)
    p.acc_s = static_cast<double>(weak_correct_) / static_cast<double>(n_weak_);
  if (n_strong_ > 0)
    p.acc_n = static_cast<double>(strong_rejected_) / static_cast<double>(n_strong_);
  if (p.acc_s && p.acc_n)
    p.acc_h = harmonic_mean(*p.acc_s, *p.acc_n);
  return p;
}

MetricsReport MetricsAccumulator::report() const {
  const auto p = snapshot(0);
  MetricsReport r;
  r.acc_s = p.acc_s;
  r.acc_n = p.acc_n;
  r.acc_h = p.acc_h;
  r.n_weak = n_weak_;
  r.n_strong = n_strong_;
  return r;
}

MetricsReport compute_metrics(std::span<const PredictionRecord> records,
                              int num_known_classes) {
  if (records.empty())
    throw Error(ErrorCode::EmptyRecords, "no prediction records");
  MetricsAccumulator acc(num_known_classes);
  std::vector<TracePoint> trace;
  for (std::size_t i = 0; i < records.size(); ++i) {
    acc.add(records[i]);
    const bool closes_batch =
        i + 1 == records.size() || records[i + 1].timestamp != records[i].timestamp;
    if (closes_batch)
      trace.push_back(acc.snapshot(records[i].timestamp));
  }
  auto report = acc.report();
  report.per_batch_trace = std::move(trace);
  return report;
}

ScoreSeparation score_separation(std::span<const PredictionRecord> records,
                                 int num_known_classes) {
  double weak_sum = 0.0, strong_sum = 0.0;
  std::size_t n_weak = 0, n_strong = 0;
  for (const auto &r : records) {
    if (r.hidden_label < num_known_classes) {
      weak_sum += r.ood_score;
      ++n_weak;
    } else {
      strong_sum += r.ood_score;
      ++n_strong;
    }
  }
  if (n_weak == 0 || n_strong == 0)
    throw Error(ErrorCode::MissingPopulation,
                n_weak == 0 ? "no weak samples in records" : "no strong samples in records");
  ScoreSeparation s;
  s.mean_weak = weak_sum / static_cast<double>(n_weak);
  s.mean_strong = strong_sum / static_cast<double>(n_strong);
  s.gap = s.mean_strong - s.mean_weak;
  return s;
}

ScoreHistogram score_histogram(std::span<const PredictionRecord> records,
                               int num_known_classes) {
  ScoreHistogram h;
  constexpr auto bins = static_cast<double>(ScoreHistogram::kBins);
  for (const auto &r : records) {
    const double clamped = std::clamp(r.ood_score, 0.0, 1.0);
    auto bin = static_cast<std::size_t>(std::floor(clamped * bins));
    bin = std::min(bin, ScoreHistogram::kBins - 1);
    if (r.hidden_label < num_known_classes)
      ++h.weak[bin];
    else
      ++h.strong[bin];
  }
  return h;
}

} // namespace owttt
