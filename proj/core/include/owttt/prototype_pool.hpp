#pragma once

#include "owttt/scoring.hpp"
#include "owttt/types.hpp"

#include <cstddef>
#include <deque>
#include <optional>
#include <span>
#include <vector>

namespace owttt {

/// Source prototypes (one per known class, fixed) plus a bounded FIFO of
/// prototypes discovered for strong-OOD modes.
class PrototypePool {
public:
  PrototypePool(FeatureList source, std::size_t novel_capacity);

  std::span<const Feature> source() const noexcept { return source_; }
  const std::deque<Feature> &novel() const noexcept { return novel_; }
  std::size_t novel_capacity() const noexcept { return novel_capacity_; }
  std::size_t num_source() const noexcept { return source_.size(); }
  Eigen::Index dim() const { return source_.front().size(); }

  /// Appends a unit-norm prototype, evicting the oldest at capacity.
  void push_novel(Feature prototype);

  /// Replaces a novel prototype in place (used by the momentum update).
  void set_novel(std::size_t index, Feature prototype);

  /// Prototype for a pseudo label: indices < num_source() are source classes,
  /// the rest index the novel queue.
  const Feature &prototype(std::size_t label) const;

private:
  FeatureList source_;
  std::deque<Feature> novel_;
  std::size_t novel_capacity_;
};

/// Unit-normalized per-class mean of `features`.
FeatureList build_source_prototypes(std::span<const Feature> features,
                                    std::span<const int> labels, int num_classes);

struct ExpansionResult {
  std::size_t count_added = 0;
  ThresholdEstimate threshold;
  std::vector<double> extended_scores;
};

/// Pushes the batch's extended scores into `window`, estimates the expansion
/// threshold once, then visits candidates in descending score order and adds
/// each one whose score against the current (growing) pool still exceeds it.
ExpansionResult expand(PrototypePool &pool, std::span<const Feature> batch_features,
                       ScoreWindow &window,
                       std::optional<ThresholdRange> clamp = std::nullopt);

/// Blends the most similar novel prototype toward `feature` with weight
/// `momentum` and re-normalizes it. Returns the index that was updated.
std::size_t momentum_update_novel(PrototypePool &pool, const Feature &feature,
                                  double momentum);

} // namespace owttt
