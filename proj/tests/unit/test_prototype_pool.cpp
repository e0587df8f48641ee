#include <doctest.h>

#include <owttt/error.hpp>
#include <owttt/prototype_pool.hpp>

#include "oracles.hpp"

#include <cmath>

using namespace owttt;

namespace {

Feature v2(double a, double b) {
  Feature f(2);
  f << a, b;
  return f;
}

const double kHalfSqrt2 = std::sqrt(2.0) / 2.0;

} // namespace

TEST_CASE("source prototypes are normalized class means") {
  const FeatureList f{v2(1, 0), v2(0, 1), v2(0.6, 0.8)};
  const std::vector<int> labels{0, 0, 1};
  const auto p = build_source_prototypes(f, labels, 2);
  REQUIRE(p.size() == 2);
  CHECK(p[0](0) == doctest::Approx(kHalfSqrt2));
  CHECK(p[0](1) == doctest::Approx(kHalfSqrt2));
  CHECK((p[1] - v2(0.6, 0.8)).norm() < 1e-15);
}

TEST_CASE("source prototype guards") {
  const FeatureList f{v2(1, 0), v2(0, 1)};
  const std::vector<int> bad{0, 3};
  CHECK_THROWS_AS(build_source_prototypes(f, bad, 3), Error);
  const std::vector<int> missing{0, 0};
  try {
    (void)build_source_prototypes(f, missing, 2);
    FAIL("expected EmptyClass");
  } catch (const Error &e) {
    CHECK(e.code() == ErrorCode::EmptyClass);
  }
}

TEST_CASE("novel queue evicts the oldest at capacity") {
  PrototypePool pool({v2(1, 0)}, 3);
  for (int i = 0; i < 4; ++i) pool.push_novel(v2(std::cos(i), std::sin(i)));
  REQUIRE(pool.novel().size() == 3);
  CHECK((pool.novel().front() - v2(std::cos(1), std::sin(1))).norm() < 1e-15);
  CHECK((pool.prototype(1) - pool.novel()[0]).norm() == 0.0);
  CHECK_THROWS_AS(pool.prototype(4), Error);
}

TEST_CASE("expand adds nothing for features on source prototypes") {
  PrototypePool pool({v2(1, 0), v2(0, 1)}, 100);
  ScoreWindow window(512);
  FeatureList batch;
  for (int i = 0; i < 16; ++i) batch.push_back(i % 2 ? v2(1, 0) : v2(0, 1));
  const auto r = expand(pool, batch, window);
  CHECK(r.count_added == 0);
  CHECK(pool.novel().empty());
}

TEST_CASE("expand with an empty batch is a no-op") {
  PrototypePool pool({v2(1, 0)}, 100);
  pool.push_novel(v2(0, 1));
  ScoreWindow window(512);
  const auto r = expand(pool, FeatureList{}, window);
  CHECK(r.count_added == 0);
  CHECK(pool.novel().size() == 1);
  CHECK(window.empty());
}

TEST_CASE("expand at capacity keeps the queue bounded") {
  std::mt19937_64 rng(1);
  const Feature e0 = Feature::Unit(3, 0);
  PrototypePool pool({e0}, 100);
  for (int i = 0; i < 100; ++i) pool.push_novel(oracle::random_unit(rng, 3));
  const Feature oldest = pool.novel().front();
  ScoreWindow window(512);
  // 12 scores near zero plus one far outlier along -e0
  FeatureList batch(12, e0);
  batch.push_back(-e0);
  for (auto &f : batch) window.push(0.0);
  const auto r = expand(pool, batch, window);
  CHECK(pool.novel().size() == 100);
  if (r.count_added > 0) CHECK((pool.novel().front() - oldest).norm() > 0);
}

TEST_CASE("expand invariants on random batches") {
  std::mt19937_64 rng(99);
  FeatureList src;
  for (int i = 0; i < 3; ++i) src.push_back(oracle::random_unit(rng, 5));
  PrototypePool pool(src, 10);
  ScoreWindow window(512);
  for (int round = 0; round < 30; ++round) {
    FeatureList batch;
    for (int i = 0; i < 16; ++i) batch.push_back(oracle::random_unit(rng, 5));
    PrototypePool shadow = pool;
    const auto r = expand(pool, batch, window);
    CHECK(pool.novel().size() <= 10);
    if (r.count_added == 0 || r.threshold.degenerate) continue;
    const double tau = r.threshold.tau;
    // Replay the additions: each added prototype scored > tau against the
    // pool as it was when it went in, and added ones are mutually far apart.
    const std::size_t added = r.count_added;
    std::vector<Feature> fresh(pool.novel().end() - std::min(added, pool.novel().size()),
                               pool.novel().end());
    for (const auto &f : fresh) {
      CHECK(extended_ood_score(f, shadow) > tau);
      shadow.push_novel(f);
    }
    for (std::size_t i = 0; i < fresh.size(); ++i)
      for (std::size_t j = i + 1; j < fresh.size(); ++j)
        CHECK(fresh[i].dot(fresh[j]) < 1 - tau);
  }
}

TEST_CASE("novel momentum update") {
  PrototypePool pool({v2(1, 0)}, 5);
  CHECK_THROWS_AS(momentum_update_novel(pool, v2(0, 1), 0.5), Error);
  pool.push_novel(v2(1, 0));
  CHECK(momentum_update_novel(pool, v2(0, 1), 0.5) == 0);
  CHECK(pool.novel()[0](0) == doctest::Approx(kHalfSqrt2));
  CHECK(pool.novel()[0](1) == doctest::Approx(kHalfSqrt2));
  momentum_update_novel(pool, v2(0.6, 0.8), 1.0);
  CHECK((pool.novel()[0] - v2(0.6, 0.8)).norm() < 1e-15);
}
