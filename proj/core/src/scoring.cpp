#include "owttt/scoring.hpp"
#include "owttt/error.hpp"
#include "owttt/prototype_pool.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>

namespace owttt {

ScoreWindow::ScoreWindow(std::size_t capacity) : capacity_(capacity) {
  if (capacity_ == 0)
    throw Error(ErrorCode::InvalidArgument, "score window capacity must be positive");
}

void ScoreWindow::push(double score) {
  if (!std::isfinite(score))
    throw Error(ErrorCode::InvalidArgument, "non-finite score");
  if (buffer_.size() == capacity_)
    buffer_.pop_front();
  buffer_.push_back(std::clamp(score, 0.0, 1.0));
}

void ScoreWindow::push(std::span<const double> scores) {
  for (double s : scores)
    push(s);
}

double grid_candidate(int k) noexcept {
  return static_cast<double>(k) / kThresholdGridSteps;
}

double max_similarity(const Feature &feature, std::span<const Feature> prototypes) {
  double best = -std::numeric_limits<double>::infinity();
  for (const auto &p : prototypes)
    best = std::max(best, feature.dot(p));
  return best;
}

double ood_score(const Feature &feature, std::span<const Feature> source_prototypes) {
  if (source_prototypes.empty())
    throw Error(ErrorCode::EmptyPrototypeSet, "no source prototypes");
  return 1.0 - max_similarity(feature, source_prototypes);
}

double extended_ood_score(const Feature &feature, const PrototypePool &pool) {
  if (pool.source().empty())
    throw Error(ErrorCode::EmptyPrototypeSet, "no source prototypes");
  double best = max_similarity(feature, pool.source());
  for (const auto &p : pool.novel())
    best = std::max(best, feature.dot(p));
  return 1.0 - best;
}

double discrete_mode_score(const Feature &feature, const PrototypePool &pool,
                           std::size_t top_m) {
  if (top_m == 0)
    throw Error(ErrorCode::InvalidArgument, "top_m must be at least 1");
  const double plain = ood_score(feature, pool.source());
  if (pool.novel().empty())
    return plain;

  const double s_s = 1.0 - plain;
  std::vector<double> sims;
  sims.reserve(pool.novel().size());
  for (const auto &p : pool.novel())
    sims.push_back(feature.dot(p));
  const std::size_t m = std::min(top_m, sims.size());
  std::partial_sort(sims.begin(), sims.begin() + static_cast<std::ptrdiff_t>(m),
                    sims.end(), std::greater<>());
  double s_u = 0.0;
  for (std::size_t j = 0; j < m; ++j)
    s_u += sims[j];
  s_u /= static_cast<double>(m);

  const double total = s_s + s_u;
  if (std::abs(total) < 1e-12)
    return plain;
  return (1.0 - s_s) * s_s / total + s_u * s_u / total;
}

namespace {

// Population variance of a contiguous run of sorted scores.
double segment_variance(const std::vector<double> &sorted, std::size_t begin,
                        std::size_t end) {
  const double n = static_cast<double>(end - begin);
  double mean = 0.0;
  for (std::size_t i = begin; i < end; ++i)
    mean += sorted[i];
  mean /= n;
  double ss = 0.0;
  for (std::size_t i = begin; i < end; ++i) {
    const double d = sorted[i] - mean;
    ss += d * d;
  }
  return ss / n;
}

} // namespace

std::optional<double> split_objective(std::span<const double> scores, double tau) {
  std::size_t n_hi = 0;
  double sum_hi = 0.0, sum_lo = 0.0;
  for (double s : scores) {
    if (s > tau) {
      ++n_hi;
      sum_hi += s;
    } else {
      sum_lo += s;
    }
  }
  const std::size_t n_lo = scores.size() - n_hi;
  if (n_hi == 0 || n_lo == 0)
    return std::nullopt;
  const double mean_hi = sum_hi / static_cast<double>(n_hi);
  const double mean_lo = sum_lo / static_cast<double>(n_lo);
  double ss_hi = 0.0, ss_lo = 0.0;
  for (double s : scores) {
    if (s > tau)
      ss_hi += (s - mean_hi) * (s - mean_hi);
    else
      ss_lo += (s - mean_lo) * (s - mean_lo);
  }
  return ss_hi / static_cast<double>(n_hi) + ss_lo / static_cast<double>(n_lo);
}

ThresholdEstimate adaptive_threshold(std::span<const double> scores,
                                     std::optional<ThresholdRange> clamp) {
  if (scores.empty())
    throw Error(ErrorCode::EmptyWindow, "score window is empty");
  ThresholdEstimate degenerate{1.0, std::nullopt, true};
  if (scores.size() < kMinThresholdSamples)
    return degenerate;

  std::vector<double> sorted(scores.begin(), scores.end());
  std::sort(sorted.begin(), sorted.end());
  const std::size_t n = sorted.size();

  // Candidates that induce the same partition share one objective value, so
  // evaluate each partition once.
  std::vector<std::optional<double>> by_split(n + 1);
  std::vector<bool> evaluated(n + 1, false);

  ThresholdEstimate best = degenerate;
  for (int k = 0; k <= kThresholdGridSteps; ++k) {
    const double tau = grid_candidate(k);
    if (clamp && (tau < clamp->lo || tau > clamp->hi))
      continue;
    const auto n_lo = static_cast<std::size_t>(
        std::upper_bound(sorted.begin(), sorted.end(), tau) - sorted.begin());
    if (n_lo == 0 || n_lo == n)
      continue;
    if (!evaluated[n_lo]) {
      by_split[n_lo] = segment_variance(sorted, 0, n_lo) + segment_variance(sorted, n_lo, n);
      evaluated[n_lo] = true;
    }
    const double objective = *by_split[n_lo];
    if (best.degenerate || objective < *best.objective) {
      best.tau = tau;
      best.objective = objective;
      best.degenerate = false;
    }
  }
  return best;
}

ThresholdEstimate adaptive_threshold(const ScoreWindow &window,
                                     std::optional<ThresholdRange> clamp) {
  const auto values = window.values();
  return adaptive_threshold(std::span<const double>(values), clamp);
}

} // namespace owttt
