#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

namespace owttt {

inline constexpr int kReject = -1;

struct PredictionRecord {
  std::uint32_t timestamp = 0; // batch index
  std::uint32_t index = 0;     // position within the batch
  int predicted_label = kReject;
  double ood_score = 0.0;
  double threshold_used = 1.0;
  int hidden_label = 0;
};

struct TracePoint {
  std::size_t batch = 0;
  std::optional<double> acc_s;
  std::optional<double> acc_n;
  std::optional<double> acc_h;
};

struct MetricsReport {
  std::optional<double> acc_s;
  std::optional<double> acc_n;
  std::optional<double> acc_h;
  std::size_t n_weak = 0;
  std::size_t n_strong = 0;
  std::vector<TracePoint> per_batch_trace;
};

struct ScoreSeparation {
  double mean_weak = 0.0;
  double mean_strong = 0.0;
  double gap = 0.0; // strong - weak
};

/// 2ab / (a + b), or 0 when a + b = 0.
double harmonic_mean(double a, double b) noexcept;

/// Running tallies so callers can fold records batch by batch.
class MetricsAccumulator {
public:
  explicit MetricsAccumulator(int num_known_classes);

  void add(const PredictionRecord &record);
  void add(std::span<const PredictionRecord> records);

  MetricsReport report() const;
  TracePoint snapshot(std::size_t batch) const;

private:
  int num_known_;
  std::size_t n_weak_ = 0, n_strong_ = 0;
  std::size_t weak_correct_ = 0, strong_rejected_ = 0;
};

/// Acc_S over hidden-known samples, Acc_N over hidden-unknown samples and
/// their harmonic mean. A population absent from the records leaves its
/// accuracy (and Acc_H) unset. The per-batch trace is cumulative.
MetricsReport compute_metrics(std::span<const PredictionRecord> records,
                              int num_known_classes);

ScoreSeparation score_separation(std::span<const PredictionRecord> records,
                                 int num_known_classes);

struct ScoreHistogram {
  static constexpr std::size_t kBins = 64;
  std::vector<std::uint64_t> weak = std::vector<std::uint64_t>(kBins, 0);
  std::vector<std::uint64_t> strong = std::vector<std::uint64_t>(kBins, 0);
};

/// Scores binned over [0, 1]; out-of-range scores fall in the edge bins.
ScoreHistogram score_histogram(std::span<const PredictionRecord> records,
                               int num_known_classes);

} // namespace owttt
