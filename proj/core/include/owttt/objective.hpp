#pragma once

#include "owttt/adapter.hpp"
#include "owttt/prototype_pool.hpp"
#include "owttt/types.hpp"

#include <cstddef>
#include <span>

namespace owttt {

/// Gaussian feature statistics. Target-domain stats are blended batch by
/// batch with momentum `momentum`; `last_batch_weight` records how much the
/// most recent batch contributed (1 on the initializing batch, `momentum`
/// afterwards) so the alignment gradient can flow through it.
struct GaussianStats {
  Vector mean;
  Matrix covariance;
  bool initialized = false;
  double momentum = 0.05;
  double last_batch_weight = 0.0;
};

inline constexpr double kCovarianceRidge = 1e-4;

struct LossBundle {
  double clustering_loss = 0.0;
  double alignment_loss = 0.0;
  double lambda = 1.0;
  double temperature = 0.1;
  double total = 0.0;
};

/// Pseudo label for prototype clustering: values below pool.num_source() are
/// source classes, the rest address pool.novel()[label - num_source()].
using PseudoLabel = std::size_t;

/// Population mean and covariance of `features` (divisor n).
GaussianStats population_stats(std::span<const Feature> features, double momentum);

/// Batch mean and unbiased covariance (zero when the batch holds one sample).
void batch_moments(std::span<const Feature> features, Vector &mean, Matrix &covariance);

/// Mean negative log-likelihood over samples. Source-labelled samples use a
/// softmax over the source prototypes; novel-labelled samples use a softmax
/// over the source prototypes plus their own novel prototype.
double clustering_loss(std::span<const Feature> features,
                       std::span<const PseudoLabel> labels,
                       const PrototypePool &pool, double temperature);

/// d clustering_loss / d adapter.weight with prototypes held constant.
/// `features` must equal embed(raw_inputs, adapter).
Matrix clustering_loss_gradient(std::span<const Feature> features,
                                std::span<const PseudoLabel> labels,
                                const PrototypePool &pool, double temperature,
                                const AdapterState &adapter,
                                std::span<const RawSample> raw_inputs);

/// Blends the batch moments into `stats`; a no-op for an empty batch.
void update_target_stats(GaussianStats &stats, std::span<const Feature> batch_features);

/// KL(N(mu_s, Sigma_s) || N(mu_t, Sigma_t)) with both covariances ridge
/// regularized by kCovarianceRidge * I.
double kl_divergence(const GaussianStats &source, const GaussianStats &target);

/// d kl_divergence / d adapter.weight through the current batch's
/// contribution to the target stats; history and source stats are constants.
Matrix kl_gradient(const GaussianStats &source, const GaussianStats &target,
                   std::span<const Feature> batch_features, const AdapterState &adapter,
                   std::span<const RawSample> raw_inputs);

LossBundle combine_losses(double clustering, double alignment, double lambda,
                          double temperature);

} // namespace owttt
