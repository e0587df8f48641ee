#include "owttt/datagen.hpp"
#include "owttt/error.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <sstream>

namespace owttt {

namespace {

// Independent sub-streams derived from one seed.
std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

enum class Substream : std::uint64_t { Geometry = 1, Source = 2, Stream = 3 };

std::mt19937_64 make_rng(std::uint64_t seed, Substream tag) {
  return std::mt19937_64(splitmix64(seed ^ splitmix64(static_cast<std::uint64_t>(tag))));
}

Vector gaussian_vector(Eigen::Index n, std::mt19937_64 &rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Vector v(n);
  for (Eigen::Index i = 0; i < n; ++i)
    v[i] = normal(rng);
  return v;
}

Matrix random_orthogonal(Eigen::Index n, std::mt19937_64 &rng) {
  Matrix g(n, n);
  for (Eigen::Index c = 0; c < n; ++c)
    g.col(c) = gaussian_vector(n, rng);
  Eigen::HouseholderQR<Matrix> qr(g);
  Matrix q = qr.householderQ();
  // Sign fix makes the factorization unique.
  const Matrix r = qr.matrixQR().triangularView<Eigen::Upper>();
  for (Eigen::Index i = 0; i < n; ++i)
    if (r(i, i) < 0.0)
      q.col(i) = -q.col(i);
  return q;
}

// Known-class means sit on the sphere of radius `radius` at pairwise
// distance exactly class_sep: a shared direction plus orthogonal offsets of
// length class_sep / sqrt(2). Strong-class means lie on the same sphere along
// directions orthogonal to every known mean.
Matrix sphere_means(const WorldSpec &spec, std::mt19937_64 &rng) {
  const int total = spec.k_s + spec.k_t;
  const Matrix frame = random_orthogonal(spec.d_in, rng);
  const double offset = spec.class_sep / std::sqrt(2.0);
  const double shared = std::sqrt(spec.radius * spec.radius - offset * offset);
  Matrix means(spec.d_in, total);
  for (int k = 0; k < spec.k_s; ++k)
    means.col(k) = shared * frame.col(0) + offset * frame.col(1 + k);
  for (int j = 0; j < spec.k_t; ++j)
    means.col(spec.k_s + j) = spec.radius * frame.col(1 + spec.k_s + j);
  return means;
}

// Rotation by `angle` in each plane of a random orthonormal frame.
Matrix plane_rotation(int dim, double angle, std::mt19937_64 &rng) {
  const Matrix frame = random_orthogonal(dim, rng);
  Matrix blocks = Matrix::Identity(dim, dim);
  const double c = std::cos(angle), s = std::sin(angle);
  for (int i = 0; i + 1 < dim; i += 2) {
    blocks(i, i) = c;
    blocks(i, i + 1) = -s;
    blocks(i + 1, i) = s;
    blocks(i + 1, i + 1) = c;
  }
  return frame * blocks * frame.transpose();
}

Vector draw_cluster(const World &w, int cls, std::mt19937_64 &rng) {
  return w.class_means.col(cls) + w.spec.within_std * gaussian_vector(w.spec.d_in, rng);
}

Vector draw_weak(const World &w, int cls, std::mt19937_64 &rng) {
  Vector x = w.rotation * draw_cluster(w, cls, rng) + w.bias;
  if (w.spec.noise_std > 0.0)
    x += w.spec.noise_std * gaussian_vector(w.spec.d_in, rng);
  return x;
}

Vector draw_strong(const World &w, int strong_cls, std::mt19937_64 &rng) {
  const auto &spec = w.spec;
  switch (spec.strong_mode) {
  case StrongMode::UniformNoise: {
    const double half_width = spec.class_sep * std::sqrt(3.0 / spec.d_in);
    std::uniform_real_distribution<double> uniform(-half_width, half_width);
    Vector x(spec.d_in);
    for (int i = 0; i < spec.d_in; ++i)
      x[i] = uniform(rng);
    return x;
  }
  case StrongMode::DisjointClusters:
    return w.class_means.col(spec.k_s + strong_cls) + spec.strong_std * gaussian_vector(spec.d_in, rng);
  case StrongMode::NearClusters: {
    const Vector mean = (1.0 - spec.interp) * w.class_means.col(spec.k_s + strong_cls) +
                        spec.interp * w.class_means.col(strong_cls % spec.k_s);
    return mean + spec.strong_std * gaussian_vector(spec.d_in, rng);
  }
  }
  throw Error(ErrorCode::InvalidSpec, "unknown strong mode");
}

} // namespace

std::string_view to_string(StrongMode mode) noexcept {
  switch (mode) {
  case StrongMode::UniformNoise:
    return "uniform_noise";
  case StrongMode::DisjointClusters:
    return "disjoint_clusters";
  case StrongMode::NearClusters:
    return "near_clusters";
  }
  return "unknown";
}

StrongMode parse_strong_mode(std::string_view name) {
  if (name == "uniform_noise")
    return StrongMode::UniformNoise;
  if (name == "disjoint_clusters")
    return StrongMode::DisjointClusters;
  if (name == "near_clusters")
    return StrongMode::NearClusters;
  throw Error(ErrorCode::InvalidSpec, "unknown strong_mode '" + std::string(name) + "'");
}

void validate(const WorldSpec &spec) {
  auto fail = [](const std::string &what) { throw Error(ErrorCode::InvalidSpec, what); };
  if (spec.d_in < 2)
    fail("d_in must be at least 2");
  if (spec.k_s + spec.k_t + 1 > spec.d_in)
    fail("d_in must exceed k_s + k_t");
  if (spec.k_s < 1)
    fail("k_s must be at least 1");
  if (spec.k_t < 1)
    fail("k_t must be at least 1");
  if (!(spec.class_sep > 0.0))
    fail("class_sep must be positive");
  if (!(spec.radius > spec.class_sep / std::sqrt(2.0)))
    fail("radius must exceed class_sep / sqrt(2)");
  if (!(spec.within_std > 0.0))
    fail("within_std must be positive");
  if (!(spec.strong_std > 0.0))
    fail("strong_std must be positive");
  if (!std::isfinite(spec.rotation_angle))
    fail("rotation_angle must be finite");
  if (!(spec.bias_scale >= 0.0))
    fail("bias_scale must be non-negative");
  if (!(spec.noise_std >= 0.0))
    fail("noise_std must be non-negative");
  if (!(spec.interp >= 0.0 && spec.interp <= 1.0))
    fail("interp must lie in [0, 1]");
  if (!(spec.ratio > 0.0 && spec.ratio <= 1.0))
    fail("ratio must lie in (0, 1]");
  if (spec.n_source < spec.k_s)
    fail("n_source must cover every known class");
  if (spec.n_batches < 1)
    fail("n_batches must be positive");
  if (spec.batch_size < 2)
    fail("batch_size must be at least 2");
}

World make_world(const WorldSpec &spec) {
  validate(spec);
  auto rng = make_rng(spec.seed, Substream::Geometry);
  World w;
  w.spec = spec;
  w.class_means = sphere_means(spec, rng);
  w.rotation = plane_rotation(spec.d_in, spec.rotation_angle, rng);
  Vector b = gaussian_vector(spec.d_in, rng);
  w.bias = spec.bias_scale * b / b.norm();
  return w;
}

SourceSet sample_source(const World &world, int n, std::uint64_t seed) {
  std::mt19937_64 rng(splitmix64(seed));
  SourceSet out;
  out.samples.reserve(static_cast<std::size_t>(n));
  out.labels.reserve(static_cast<std::size_t>(n));
  // Round-robin labels guarantee every class is represented, then shuffle.
  std::vector<int> labels(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i)
    labels[static_cast<std::size_t>(i)] = i % world.spec.k_s;
  std::shuffle(labels.begin(), labels.end(), rng);
  for (int y : labels) {
    out.samples.push_back(draw_cluster(world, y, rng));
    out.labels.push_back(y);
  }
  return out;
}

SourceSet generate_source(const WorldSpec &spec) {
  const World world = make_world(spec);
  auto rng = make_rng(spec.seed, Substream::Source);
  return sample_source(world, spec.n_source, rng());
}

std::vector<int> strong_counts_per_batch(const WorldSpec &spec) {
  const long total = static_cast<long>(spec.n_batches) * spec.batch_size;
  const long weak_total = std::lround(static_cast<double>(total) / (1.0 + spec.ratio));
  const long strong_total = total - weak_total;
  std::vector<int> counts(static_cast<std::size_t>(spec.n_batches));
  long assigned = 0;
  for (int b = 0; b < spec.n_batches; ++b) {
    const long cumulative = std::lround(static_cast<double>(strong_total) * (b + 1) / spec.n_batches);
    counts[static_cast<std::size_t>(b)] = static_cast<int>(cumulative - assigned);
    assigned = cumulative;
  }
  return counts;
}

Stream generate_stream(const WorldSpec &spec) {
  const World world = make_world(spec);
  auto rng = make_rng(spec.seed, Substream::Stream);
  std::uniform_int_distribution<int> known(0, spec.k_s - 1);
  std::uniform_int_distribution<int> unknown(0, spec.k_t - 1);

  const auto strong_counts = strong_counts_per_batch(spec);
  Stream stream;
  stream.reserve(static_cast<std::size_t>(spec.n_batches));
  for (int b = 0; b < spec.n_batches; ++b) {
    const int n_strong = strong_counts[static_cast<std::size_t>(b)];
    Batch batch;
    batch.reserve(static_cast<std::size_t>(spec.batch_size));
    for (int i = 0; i < spec.batch_size; ++i) {
      LabeledSample s;
      s.sample.timestamp = static_cast<std::uint32_t>(b);
      if (i < n_strong) {
        const int cls = unknown(rng);
        s.sample.values = draw_strong(world, cls, rng);
        s.hidden_label = spec.k_s + cls;
      } else {
        const int cls = known(rng);
        s.sample.values = draw_weak(world, cls, rng);
        s.hidden_label = cls;
      }
      batch.push_back(std::move(s));
    }
    std::shuffle(batch.begin(), batch.end(), rng);
    stream.push_back(std::move(batch));
  }
  return stream;
}

Stream source_as_stream(const SourceSet &source) {
  Batch batch;
  batch.reserve(source.samples.size());
  for (std::size_t i = 0; i < source.samples.size(); ++i)
    batch.push_back({RawSample{source.samples[i], 0}, source.labels[i]});
  return Stream{std::move(batch)};
}

SourceSet stream_as_source(const Stream &stream) {
  SourceSet out;
  for (const auto &batch : stream)
    for (const auto &s : batch) {
      out.samples.push_back(s.sample.values);
      out.labels.push_back(s.hidden_label);
    }
  return out;
}

} // namespace owttt
