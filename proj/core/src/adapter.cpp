#include "owttt/adapter.hpp"
#include "owttt/error.hpp"

#include <cmath>
#include <random>
#include <sstream>

namespace owttt {

AdapterState make_adapter(Eigen::Index feature_dim, Eigen::Index input_dim,
                          double learning_rate, double momentum_coeff,
                          std::uint64_t seed, double noise) {
  if (feature_dim <= 0 || input_dim <= 0)
    throw Error(ErrorCode::InvalidArgument, "adapter dimensions must be positive");
  if (!(learning_rate > 0.0))
    throw Error(ErrorCode::InvalidArgument, "learning_rate must be positive");
  if (!(momentum_coeff >= 0.0 && momentum_coeff < 1.0))
    throw Error(ErrorCode::InvalidArgument, "momentum_coeff must lie in [0, 1)");

  AdapterState adapter;
  adapter.weight = Matrix::Identity(feature_dim, input_dim);
  if (noise > 0.0) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> uniform(-noise, noise);
    for (Eigen::Index c = 0; c < input_dim; ++c)
      for (Eigen::Index r = 0; r < feature_dim; ++r)
        adapter.weight(r, c) += uniform(rng);
  }
  adapter.momentum_buffer = Matrix::Zero(feature_dim, input_dim);
  adapter.learning_rate = learning_rate;
  adapter.momentum_coeff = momentum_coeff;
  return adapter;
}

Feature embed(const Vector &values, const AdapterState &adapter) {
  if (values.size() != adapter.input_dim()) {
    std::ostringstream msg;
    msg << "sample has " << values.size() << " values, adapter expects "
        << adapter.input_dim();
    throw Error(ErrorCode::InvalidArgument, msg.str());
  }
  if (!values.allFinite())
    throw Error(ErrorCode::InvalidArgument, "sample contains non-finite values");

  Vector projected = adapter.weight * values;
  const double norm = projected.norm();
  if (!(norm >= kEmbeddingNormFloor)) {
    std::ostringstream msg;
    msg << "embedding norm " << norm << " below " << kEmbeddingNormFloor
        << " (adapter weight norm " << adapter.weight.norm() << ")";
    throw Error(ErrorCode::DegenerateEmbedding, msg.str());
  }
  return projected / norm;
}

FeatureList embed_all(std::span<const RawSample> samples,
                      const AdapterState &adapter) {
  FeatureList out;
  out.reserve(samples.size());
  for (const auto &s : samples)
    out.push_back(embed(s.values, adapter));
  return out;
}

void sgd_momentum_step(AdapterState &adapter, const Matrix &gradient) {
  if (gradient.rows() != adapter.weight.rows() ||
      gradient.cols() != adapter.weight.cols())
    throw Error(ErrorCode::InvalidArgument, "gradient shape does not match weight");
  if (!gradient.allFinite())
    throw Error(ErrorCode::NonFiniteGradient, "gradient contains NaN or inf");

  adapter.momentum_buffer = adapter.momentum_coeff * adapter.momentum_buffer + gradient;
  adapter.weight -= adapter.learning_rate * adapter.momentum_buffer;
}

Matrix backprop_normalized_linear(const Vector &input, const Matrix &weight,
                                  const Vector &grad_feature) {
  const Vector projected = weight * input;
  const double norm = projected.norm();
  const Vector z = projected / norm;
  // Jacobian of u -> u/|u| is (I - z z^T) / |u|.
  const Vector grad_projected = (grad_feature - z * z.dot(grad_feature)) / norm;
  return grad_projected * input.transpose();
}

} // namespace owttt
