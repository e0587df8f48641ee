#pragma once

#include "owttt/adapter.hpp"
#include "owttt/datagen.hpp"
#include "owttt/error.hpp"
#include "owttt/metrics.hpp"
#include "owttt/objective.hpp"
#include "owttt/prototype_pool.hpp"
#include "owttt/scoring.hpp"
#include "owttt/types.hpp"

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace owttt {

struct RunConfig {
  // Component toggles (ablation columns).
  bool enable_ood_detection = true;
  bool enable_clustering = true;
  bool enable_expansion = true;
  bool enable_alignment = true;

  double learning_rate = 2e-5;
  int batch_size = 0; // 0: keep the stream's own batching
  double lambda = 1.0;
  double temperature = 0.1;
  std::size_t novel_capacity = 100;
  std::size_t window_length = 512;
  double keep_ratio = 0.5;
  double beta = 0.05;
  double momentum_coeff = 0.9;
  std::optional<ThresholdRange> threshold_clamp;
  std::optional<double> fixed_threshold;
  bool discrete_mode = false;
  std::size_t top_m = kDefaultTopM;
  std::optional<double> novel_momentum; // momentum update of novel prototypes
  int feature_dim = 16;
  std::uint64_t seed = 0;
};

/// Throws ConfigError when the toggles or hyper-parameters are inconsistent.
void validate(const RunConfig &config);

/// Toggle rows of the component ablation: O.D., P.C., P.E., D.A.
struct AblationRow {
  bool ood_detection, clustering, expansion, alignment;
};
inline constexpr AblationRow kAblationRows[] = {
    {false, false, false, false}, {true, false, false, false}, {true, true, false, false},
    {true, true, true, false},    {true, false, false, true},  {true, true, true, true},
};
RunConfig with_ablation(RunConfig config, const AblationRow &row);

/// What the engine decides for one sample; hidden labels are joined later.
struct Prediction {
  int predicted_label = kReject;
  double ood_score = 0.0;
  double threshold_used = 1.0;
};

struct AdaptationSummary {
  std::size_t prototypes_added = 0;
  std::optional<double> expansion_threshold;
  std::size_t clustering_set_size = 0;
  std::vector<std::size_t> clustering_set;
  std::size_t alignment_samples = 0;
  LossBundle losses;
  bool stepped = false;
};

/// One open-world test-time training run: source prototypes and statistics
/// are fixed at construction, then batches go through infer() followed by
/// adapt().
class Engine {
public:
  Engine(const RunConfig &config, const SourceSet &source);

  /// Inference stage. Embeds and scores the batch, pushes its scores into
  /// the score window, fixes the batch threshold and labels every sample.
  std::vector<Prediction> infer(std::span<const RawSample> batch);

  /// Adaptation stage for the batch passed to the preceding infer().
  AdaptationSummary adapt();

  const RunConfig &config() const noexcept { return config_; }
  const AdapterState &adapter() const noexcept { return adapter_; }
  const PrototypePool &pool() const noexcept { return pool_; }
  const ScoreWindow &score_window() const noexcept { return score_window_; }
  const ScoreWindow &extended_window() const noexcept { return extended_window_; }
  const GaussianStats &source_stats() const noexcept { return source_stats_; }
  const GaussianStats &target_stats() const noexcept { return target_stats_; }
  std::size_t num_known() const noexcept { return pool_.num_source(); }
  std::size_t batches_seen() const noexcept { return batches_seen_; }
  double last_threshold() const noexcept { return last_threshold_; }

  /// Plain score and nearest source class under the current adapter,
  /// without touching any state.
  Prediction score_only(const RawSample &sample, double threshold) const;

private:
  struct SourceModel {
    AdapterState adapter;
    PrototypePool pool;
    GaussianStats stats;
  };
  static SourceModel build_source_model(const RunConfig &config, const SourceSet &source);
  Engine(const RunConfig &config, SourceModel model);

  double sample_score(const Feature &z) const;
  int nearest_source(const Feature &z) const;
  PseudoLabel pseudo_label(const Feature &z) const;

  RunConfig config_;
  AdapterState adapter_;
  PrototypePool pool_;
  GaussianStats source_stats_;
  GaussianStats target_stats_;
  ScoreWindow score_window_;
  ScoreWindow extended_window_;

  // Scratch for the batch between infer() and adapt().
  std::vector<RawSample> batch_;
  FeatureList features_;
  std::vector<Prediction> predictions_;
  double selection_reference_ = 1.0;
  bool pending_ = false;

  std::size_t batches_seen_ = 0;
  double last_threshold_ = 1.0;
};

/// Selects the ceil(keep_ratio * n) samples with the largest |score - tau|;
/// ties go to the lower index. Returned in selection order.
std::vector<std::size_t> select_confident(std::span<const double> scores, double tau,
                                          double keep_ratio);

struct TraceRow {
  std::size_t batch = 0;
  TracePoint cumulative;
  std::size_t novel_prototypes = 0;
  double threshold = 1.0;
};

struct RunArtifacts {
  std::vector<PredictionRecord> records;
  std::vector<TraceRow> trace;
  std::vector<AdaptationSummary> adaptation;
  std::size_t max_novel_prototypes = 0;
  std::optional<MetricsReport> metrics;

  // Whole-stream rescoring before and after adaptation.
  std::vector<PredictionRecord> pre_scores;
  std::vector<PredictionRecord> post_scores;

  std::optional<ErrorCode> error_code;
  std::optional<std::size_t> error_batch;
  std::string error_message;

  bool ok() const noexcept { return !error_code.has_value(); }
};

/// Re-batches a stream into batches of `batch_size` (the last may be short).
Stream rebatch(const Stream &stream, std::size_t batch_size);

/// Runs the stream strictly in order: for each batch, predictions are
/// finalized before adaptation and before the next batch is read. Stage
/// failures stop the run and are reported in the artifacts together with
/// the records produced so far.
RunArtifacts run_stream(const Stream &stream, const RunConfig &config, const SourceSet &source);

} // namespace owttt
