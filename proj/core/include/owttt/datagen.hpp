#pragma once

#include "owttt/types.hpp"

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace owttt {

enum class StrongMode { UniformNoise, DisjointClusters, NearClusters };

std::string_view to_string(StrongMode mode) noexcept;
StrongMode parse_strong_mode(std::string_view name);

/// Parameters of a synthetic open world. Class means lie on a sphere of the
/// given radius, known ones pairwise class_sep apart; target-domain samples
/// of known classes go through a fixed rotation, bias and additive noise.
struct WorldSpec {
  int d_in = 32;
  int k_s = 5;
  int k_t = 5;
  double class_sep = 6.0;
  double radius = 14.0;
  double within_std = 0.25;
  double strong_std = 1.3;
  double rotation_angle = 0.55; // radians, applied in every rotation plane
  double bias_scale = 0.0;
  double noise_std = 0.25;
  StrongMode strong_mode = StrongMode::DisjointClusters;
  double interp = 0.0; // near_clusters only
  double ratio = 1.0;  // strong : weak
  int n_source = 2000;
  int n_batches = 100;
  int batch_size = 64;
  std::uint64_t seed = 0;
};

/// Throws InvalidSpec on any out-of-domain field.
void validate(const WorldSpec &spec);

/// Geometry fixed by the world seed: class means (known classes first), the
/// weak-domain rotation and bias.
struct World {
  WorldSpec spec;
  Matrix class_means; // d_in x (k_s + k_t)
  Matrix rotation;    // d_in x d_in, orthogonal
  Vector bias;
};

World make_world(const WorldSpec &spec);

struct SourceSet {
  std::vector<Vector> samples;
  std::vector<int> labels;
};

SourceSet generate_source(const WorldSpec &spec);

/// Additional clean source-domain draws from an existing world.
SourceSet sample_source(const World &world, int n, std::uint64_t seed);

/// Weak samples carry labels in [0, k_s); strong samples in [k_s, k_s + k_t).
Stream generate_stream(const WorldSpec &spec);

/// Strong-sample count of each batch. Cumulative rounding keeps each batch
/// within one sample of ratio/(1+ratio) and the stream total exact.
std::vector<int> strong_counts_per_batch(const WorldSpec &spec);

/// Flat binary stream file: "OWTT", u32 version, u32 d_in, u32 n_batches,
/// u32 n_rows, n_batches x u32 batch size, then per row an i32 hidden label
/// followed by d_in float32 values. All little-endian.
inline constexpr std::uint32_t kStreamFormatVersion = 1;

void write_stream_binary(const std::string &path, const Stream &stream);
Stream read_stream_binary(const std::string &path);
void write_stream_csv(const std::string &path, const Stream &stream,
                      std::string_view provenance = {});

Stream source_as_stream(const SourceSet &source);
SourceSet stream_as_source(const Stream &stream);

} // namespace owttt
