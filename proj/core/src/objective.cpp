#include "owttt/objective.hpp"
#include "owttt/error.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace owttt {

namespace {

void check_temperature(double temperature) {
  if (!(temperature > 0.0))
    throw Error(ErrorCode::InvalidArgument, "temperature must be positive");
}

// Loss of one sample and dLoss/dz. The softmax runs over the source
// prototypes, plus the assigned novel prototype when the label is novel.
double sample_clustering_term(const Feature &z, PseudoLabel label,
                              const PrototypePool &pool, double temperature,
                              Vector *grad_z) {
  const auto source = pool.source();
  const std::size_t k_s = source.size();
  const bool novel = label >= k_s;
  const Feature &novel_proto = novel ? pool.prototype(label) : source[0];
  const std::size_t n_logits = k_s + (novel ? 1 : 0);
  const std::size_t target = novel ? k_s : label;

  Vector logits(static_cast<Eigen::Index>(n_logits));
  for (std::size_t l = 0; l < k_s; ++l)
    logits[static_cast<Eigen::Index>(l)] = source[l].dot(z) / temperature;
  if (novel)
    logits[static_cast<Eigen::Index>(k_s)] = novel_proto.dot(z) / temperature;

  const double max_logit = logits.maxCoeff();
  const Vector exps = (logits.array() - max_logit).exp().matrix();
  const double denom = exps.sum();
  const double loss = std::log(denom) + max_logit - logits[static_cast<Eigen::Index>(target)];

  if (grad_z) {
    // d/dz [logsumexp(l) - l_target] = (sum_j softmax_j p_j - p_target) / T
    Vector g = Vector::Zero(z.size());
    for (std::size_t l = 0; l < k_s; ++l)
      g += (exps[static_cast<Eigen::Index>(l)] / denom) * source[l];
    if (novel)
      g += (exps[static_cast<Eigen::Index>(k_s)] / denom) * novel_proto;
    g -= novel ? novel_proto : source[label];
    *grad_z = g / temperature;
  }
  return loss;
}

void check_labels(std::span<const Feature> features, std::span<const PseudoLabel> labels,
                  const PrototypePool &pool) {
  if (features.size() != labels.size())
    throw Error(ErrorCode::InvalidArgument, "features and pseudo labels differ in length");
  const std::size_t limit = pool.num_source() + pool.novel().size();
  for (auto y : labels)
    if (y >= limit) {
      std::ostringstream msg;
      msg << "pseudo label " << y << " refers to no prototype (pool size " << limit << ")";
      throw Error(ErrorCode::UnknownLabel, msg.str());
    }
}

struct Regularized {
  Eigen::LLT<Matrix> chol;
  double log_det = 0.0;
};

Regularized regularize(const Matrix &cov, const char *which) {
  const auto d = cov.rows();
  Matrix reg = cov + kCovarianceRidge * Matrix::Identity(d, d);
  Regularized out;
  out.chol.compute(reg);
  if (out.chol.info() != Eigen::Success)
    throw Error(ErrorCode::NumericalFailure,
                std::string(which) + " covariance is not positive-definite after regularization");
  const Matrix &l = out.chol.matrixLLT();
  for (Eigen::Index i = 0; i < d; ++i) {
    const double diag = l(i, i);
    if (!(diag > 0.0) || !std::isfinite(diag))
      throw Error(ErrorCode::NumericalFailure,
                  std::string(which) + " covariance has a non-positive pivot");
    out.log_det += 2.0 * std::log(diag);
  }
  return out;
}

void check_initialized(const GaussianStats &s, const char *which) {
  if (!s.initialized)
    throw Error(ErrorCode::InvalidArgument, std::string(which) + " stats are not initialized");
}

} // namespace

GaussianStats population_stats(std::span<const Feature> features, double momentum) {
  if (features.empty())
    throw Error(ErrorCode::InvalidArgument, "population_stats needs at least one feature");
  const auto d = features.front().size();
  GaussianStats stats;
  stats.momentum = momentum;
  stats.mean = Vector::Zero(d);
  for (const auto &f : features)
    stats.mean += f;
  stats.mean /= static_cast<double>(features.size());
  stats.covariance = Matrix::Zero(d, d);
  for (const auto &f : features) {
    const Vector c = f - stats.mean;
    stats.covariance.noalias() += c * c.transpose();
  }
  stats.covariance /= static_cast<double>(features.size());
  stats.initialized = true;
  stats.last_batch_weight = 1.0;
  return stats;
}

void batch_moments(std::span<const Feature> features, Vector &mean, Matrix &covariance) {
  const auto d = features.front().size();
  const auto n = features.size();
  mean = Vector::Zero(d);
  for (const auto &f : features)
    mean += f;
  mean /= static_cast<double>(n);
  covariance = Matrix::Zero(d, d);
  if (n < 2)
    return;
  for (const auto &f : features) {
    const Vector c = f - mean;
    covariance.noalias() += c * c.transpose();
  }
  covariance /= static_cast<double>(n - 1);
}

double clustering_loss(std::span<const Feature> features,
                       std::span<const PseudoLabel> labels,
                       const PrototypePool &pool, double temperature) {
  check_temperature(temperature);
  check_labels(features, labels, pool);
  if (features.empty())
    return 0.0;
  double total = 0.0;
  for (std::size_t i = 0; i < features.size(); ++i)
    total += sample_clustering_term(features[i], labels[i], pool, temperature, nullptr);
  return total / static_cast<double>(features.size());
}

Matrix clustering_loss_gradient(std::span<const Feature> features,
                                std::span<const PseudoLabel> labels,
                                const PrototypePool &pool, double temperature,
                                const AdapterState &adapter,
                                std::span<const RawSample> raw_inputs) {
  check_temperature(temperature);
  check_labels(features, labels, pool);
  if (raw_inputs.size() != features.size())
    throw Error(ErrorCode::InvalidArgument, "raw inputs and features differ in length");
  Matrix grad = Matrix::Zero(adapter.output_dim(), adapter.input_dim());
  if (features.empty())
    return grad;

  Vector grad_z;
  for (std::size_t i = 0; i < features.size(); ++i) {
    sample_clustering_term(features[i], labels[i], pool, temperature, &grad_z);
    grad += backprop_normalized_linear(raw_inputs[i].values, adapter.weight, grad_z);
  }
  return grad / static_cast<double>(features.size());
}

void update_target_stats(GaussianStats &stats, std::span<const Feature> batch_features) {
  if (batch_features.empty())
    return;
  Vector mean;
  Matrix cov;
  batch_moments(batch_features, mean, cov);
  if (!stats.initialized) {
    stats.mean = mean;
    stats.covariance = cov;
    stats.initialized = true;
    stats.last_batch_weight = 1.0;
    return;
  }
  const double beta = stats.momentum;
  stats.mean = (1.0 - beta) * stats.mean + beta * mean;
  stats.covariance = (1.0 - beta) * stats.covariance + beta * cov;
  stats.covariance = 0.5 * (stats.covariance + stats.covariance.transpose()).eval();
  stats.last_batch_weight = beta;
}

double kl_divergence(const GaussianStats &source, const GaussianStats &target) {
  check_initialized(source, "source");
  check_initialized(target, "target");
  const auto d = source.mean.size();
  const auto src = regularize(source.covariance, "source");
  const auto tgt = regularize(target.covariance, "target");

  const Matrix reg_source = source.covariance + kCovarianceRidge * Matrix::Identity(d, d);
  const Vector diff = target.mean - source.mean;
  const double trace_term = tgt.chol.solve(reg_source).trace();
  const double mahalanobis = diff.dot(tgt.chol.solve(diff));
  double kl = 0.5 * (trace_term + mahalanobis - static_cast<double>(d) + tgt.log_det - src.log_det);
  if (!std::isfinite(kl))
    throw Error(ErrorCode::NumericalFailure, "KL divergence is not finite");
  if (kl < 0.0) {
    if (kl < -1e-8)
      throw Error(ErrorCode::NumericalFailure, "KL divergence is negative");
    kl = 0.0;
  }
  return kl;
}

Matrix kl_gradient(const GaussianStats &source, const GaussianStats &target,
                   std::span<const Feature> batch_features, const AdapterState &adapter,
                   std::span<const RawSample> raw_inputs) {
  check_initialized(source, "source");
  check_initialized(target, "target");
  if (raw_inputs.size() != batch_features.size())
    throw Error(ErrorCode::InvalidArgument, "raw inputs and features differ in length");
  Matrix grad = Matrix::Zero(adapter.output_dim(), adapter.input_dim());
  if (batch_features.empty())
    return grad;

  const auto d = source.mean.size();
  const auto tgt = regularize(target.covariance, "target");
  const Matrix eye = Matrix::Identity(d, d);
  const Matrix inv_t = tgt.chol.solve(eye);
  const Matrix reg_source = source.covariance + kCovarianceRidge * eye;
  const Vector diff = target.mean - source.mean;
  const Vector a_diff = inv_t * diff;

  // dKL/dmu_t = A d,  dKL/dSigma_t = (A - A Sigma_s A - A d d^T A) / 2
  const Vector grad_mean = a_diff;
  Matrix grad_cov = 0.5 * (inv_t - inv_t * reg_source * inv_t - a_diff * a_diff.transpose());
  grad_cov = 0.5 * (grad_cov + grad_cov.transpose()).eval();

  Vector batch_mean;
  Matrix batch_cov;
  batch_moments(batch_features, batch_mean, batch_cov);
  const double n = static_cast<double>(batch_features.size());
  const double weight = target.last_batch_weight;

  for (std::size_t i = 0; i < batch_features.size(); ++i) {
    Vector grad_z = grad_mean / n;
    if (batch_features.size() > 1)
      grad_z += (2.0 / (n - 1.0)) * (grad_cov * (batch_features[i] - batch_mean));
    grad_z *= weight;
    grad += backprop_normalized_linear(raw_inputs[i].values, adapter.weight, grad_z);
  }
  return grad;
}

LossBundle combine_losses(double clustering, double alignment, double lambda,
                          double temperature) {
  LossBundle bundle;
  bundle.clustering_loss = clustering;
  bundle.alignment_loss = alignment;
  bundle.lambda = lambda;
  bundle.temperature = temperature;
  bundle.total = clustering + lambda * alignment;
  return bundle;
}

} // namespace owttt
