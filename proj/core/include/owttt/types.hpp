#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <vector>

namespace owttt {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

// Unit-norm embedding in the shared feature space.
using Feature = Eigen::VectorXd;
using FeatureList = std::vector<Feature>;

// Raw input as consumed by the engine. The hidden label is kept next to the
// values only in the evaluation harness; see LabeledSample.
struct RawSample {
  Vector values;
  std::uint32_t timestamp = 0;
};

struct LabeledSample {
  RawSample sample;
  int hidden_label = 0;
};

using Batch = std::vector<LabeledSample>;
using Stream = std::vector<Batch>;

inline constexpr double kUnitNormTolerance = 1e-9;

} // namespace owttt
