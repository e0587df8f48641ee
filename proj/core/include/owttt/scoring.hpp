#pragma once

#include "owttt/types.hpp"

#include <cstddef>
#include <deque>
#include <optional>
#include <span>
#include <vector>

namespace owttt {

class PrototypePool;

/// Fixed-capacity FIFO of the most recent scores. Scores are clamped into
/// [0, 1] on insertion.
class ScoreWindow {
public:
  explicit ScoreWindow(std::size_t capacity);

  void push(double score);
  void push(std::span<const double> scores);

  std::size_t capacity() const noexcept { return capacity_; }
  std::size_t size() const noexcept { return buffer_.size(); }
  bool empty() const noexcept { return buffer_.empty(); }

  /// Oldest first.
  std::vector<double> values() const { return {buffer_.begin(), buffer_.end()}; }

private:
  std::size_t capacity_;
  std::deque<double> buffer_;
};

struct ThresholdRange {
  double lo = 0.0;
  double hi = 1.0;
};

struct ThresholdEstimate {
  double tau = 1.0;
  std::optional<double> objective;
  bool degenerate = true;
};

inline constexpr int kThresholdGridSteps = 100; // candidates k / 100, k = 0..100
inline constexpr std::size_t kMinThresholdSamples = 8;
inline constexpr std::size_t kDefaultTopM = 10;

double grid_candidate(int k) noexcept;

// 1 - max_k <feature, p_k>. Inputs are unit-norm so the dot product is the
// cosine.
double max_similarity(const Feature &feature, std::span<const Feature> prototypes);
double ood_score(const Feature &feature, std::span<const Feature> source_prototypes);
double extended_ood_score(const Feature &feature, const PrototypePool &pool);
double discrete_mode_score(const Feature &feature, const PrototypePool &pool,
                           std::size_t top_m = kDefaultTopM);

/// Sum of the two per-cluster population variances for the split at `tau`
/// (upper cluster: score > tau). Returns nullopt when either side is empty.
std::optional<double> split_objective(std::span<const double> scores, double tau);

/// Grid search over {0.00, ..., 1.00} for the split minimizing
/// split_objective. Windows shorter than kMinThresholdSamples, or with no
/// valid split inside `clamp`, yield a degenerate estimate at tau = 1.
ThresholdEstimate adaptive_threshold(const ScoreWindow &window,
                                     std::optional<ThresholdRange> clamp = std::nullopt);
ThresholdEstimate adaptive_threshold(std::span<const double> scores,
                                     std::optional<ThresholdRange> clamp = std::nullopt);

} // namespace owttt
