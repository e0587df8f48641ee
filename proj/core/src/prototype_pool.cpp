#include "owttt/prototype_pool.hpp"
#include "owttt/error.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

namespace owttt {

namespace {

void check_unit(const Feature &f) {
  if (!f.allFinite() || std::abs(f.norm() - 1.0) > kUnitNormTolerance)
    throw Error(ErrorCode::InvalidArgument, "prototype is not unit-norm");
}

} // namespace

PrototypePool::PrototypePool(FeatureList source, std::size_t novel_capacity)
    : source_(std::move(source)), novel_capacity_(novel_capacity) {
  if (source_.empty())
    throw Error(ErrorCode::EmptyPrototypeSet, "pool requires at least one source prototype");
  if (novel_capacity_ == 0)
    throw Error(ErrorCode::InvalidArgument, "novel_capacity must be positive");
  for (const auto &p : source_) {
    check_unit(p);
    if (p.size() != source_.front().size())
      throw Error(ErrorCode::InvalidArgument, "source prototypes differ in dimension");
  }
}

void PrototypePool::push_novel(Feature prototype) {
  check_unit(prototype);
  if (novel_.size() == novel_capacity_)
    novel_.pop_front();
  novel_.push_back(std::move(prototype));
}

void PrototypePool::set_novel(std::size_t index, Feature prototype) {
  check_unit(prototype);
  novel_.at(index) = std::move(prototype);
}

const Feature &PrototypePool::prototype(std::size_t label) const {
  if (label < source_.size())
    return source_[label];
  const std::size_t q = label - source_.size();
  if (q >= novel_.size()) {
    std::ostringstream msg;
    msg << "novel prototype " << q << " does not exist (pool holds " << novel_.size() << ")";
    throw Error(ErrorCode::UnknownLabel, msg.str());
  }
  return novel_[q];
}

FeatureList build_source_prototypes(std::span<const Feature> features,
                                    std::span<const int> labels, int num_classes) {
  if (features.size() != labels.size())
    throw Error(ErrorCode::InvalidArgument, "features and labels differ in length");
  if (num_classes <= 0)
    throw Error(ErrorCode::InvalidArgument, "num_classes must be positive");
  if (features.empty())
    throw Error(ErrorCode::EmptyClass, "class 0 has no samples");

  const auto dim = features.front().size();
  std::vector<Vector> sums(static_cast<std::size_t>(num_classes), Vector::Zero(dim));
  std::vector<std::size_t> counts(static_cast<std::size_t>(num_classes), 0);
  for (std::size_t i = 0; i < features.size(); ++i) {
    const int y = labels[i];
    if (y < 0 || y >= num_classes) {
      std::ostringstream msg;
      msg << "label " << y << " outside [0, " << num_classes << ")";
      throw Error(ErrorCode::InvalidArgument, msg.str());
    }
    sums[static_cast<std::size_t>(y)] += features[i];
    ++counts[static_cast<std::size_t>(y)];
  }

  FeatureList prototypes;
  prototypes.reserve(sums.size());
  for (std::size_t k = 0; k < sums.size(); ++k) {
    if (counts[k] == 0)
      throw Error(ErrorCode::EmptyClass, "class " + std::to_string(k) + " has no samples");
    const Vector mean = sums[k] / static_cast<double>(counts[k]);
    const double norm = mean.norm();
    if (!(norm >= 1e-12))
      throw Error(ErrorCode::DegenerateEmbedding,
                  "class " + std::to_string(k) + " mean feature has zero norm");
    prototypes.push_back(mean / norm);
  }
  return prototypes;
}

ExpansionResult expand(PrototypePool &pool, std::span<const Feature> batch_features,
                       ScoreWindow &window, std::optional<ThresholdRange> clamp) {
  ExpansionResult result;
  if (batch_features.empty())
    return result;

  result.extended_scores.reserve(batch_features.size());
  for (const auto &f : batch_features)
    result.extended_scores.push_back(extended_ood_score(f, pool));
  window.push(std::span<const double>(result.extended_scores));
  result.threshold = adaptive_threshold(window, clamp);
  const double tau = result.threshold.tau;

  std::vector<std::size_t> order;
  for (std::size_t i = 0; i < batch_features.size(); ++i)
    if (result.extended_scores[i] > tau)
      order.push_back(i);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return result.extended_scores[a] > result.extended_scores[b];
  });

  for (std::size_t i : order) {
    if (extended_ood_score(batch_features[i], pool) > tau) {
      pool.push_novel(batch_features[i]);
      ++result.count_added;
    }
  }
  return result;
}

std::size_t momentum_update_novel(PrototypePool &pool, const Feature &feature,
                                  double momentum) {
  if (pool.novel().empty())
    throw Error(ErrorCode::EmptyNovelPool, "no novel prototypes to update");
  if (!(momentum > 0.0 && momentum <= 1.0))
    throw Error(ErrorCode::InvalidArgument, "momentum must lie in (0, 1]");

  const auto &novel = pool.novel();
  std::size_t best = 0;
  double best_sim = feature.dot(novel[0]);
  for (std::size_t q = 1; q < novel.size(); ++q) {
    const double sim = feature.dot(novel[q]);
    if (sim > best_sim) {
      best_sim = sim;
      best = q;
    }
  }
  Vector blended = (1.0 - momentum) * novel[best] + momentum * feature;
  const double norm = blended.norm();
  if (!(norm >= 1e-12))
    throw Error(ErrorCode::NumericalFailure, "momentum update produced a zero prototype");
  pool.set_novel(best, blended / norm);
  return best;
}

} // namespace owttt
