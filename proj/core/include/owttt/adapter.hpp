#pragma once

#include "owttt/types.hpp"

#include <cstdint>
#include <span>

namespace owttt {

// Linear feature adapter followed by L2 normalization, plus the slots of the
// SGD-momentum optimizer that trains it.
struct AdapterState {
  Matrix weight;          // D x D_in
  Matrix momentum_buffer; // same shape as weight
  double learning_rate = 1e-2;
  double momentum_coeff = 0.9;

  Eigen::Index output_dim() const { return weight.rows(); }
  Eigen::Index input_dim() const { return weight.cols(); }
};

inline constexpr double kEmbeddingNormFloor = 1e-12;

// Identity padded/truncated to D x D_in plus uniform noise in
// [-noise, noise]; momentum buffer starts at zero.
AdapterState make_adapter(Eigen::Index feature_dim, Eigen::Index input_dim,
                          double learning_rate, double momentum_coeff,
                          std::uint64_t seed, double noise = 0.01);

// Unit-normalized weight * values. Throws DegenerateEmbedding when the
// pre-normalization norm falls below kEmbeddingNormFloor.
Feature embed(const Vector &values, const AdapterState &adapter);

FeatureList embed_all(std::span<const RawSample> samples,
                      const AdapterState &adapter);

// Classical momentum: buffer <- m * buffer + g; weight <- weight - lr * buffer.
void sgd_momentum_step(AdapterState &adapter, const Matrix &gradient);

// Back-propagates dL/dz through z = Wx / |Wx| and returns dL/dW (D x D_in).
Matrix backprop_normalized_linear(const Vector &input, const Matrix &weight,
                                  const Vector &grad_feature);

} // namespace owttt
