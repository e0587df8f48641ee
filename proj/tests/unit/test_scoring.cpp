#include <doctest.h>

#include <owttt/error.hpp>
#include <owttt/prototype_pool.hpp>
#include <owttt/scoring.hpp>

#include "oracles.hpp"

#include <algorithm>
#include <cmath>
#include <random>

using namespace owttt;

namespace {

Feature v2(double a, double b) {
  Feature f(2);
  f << a, b;
  return f;
}

const double kHalfSqrt2 = std::sqrt(2.0) / 2.0;

} // namespace

TEST_CASE("ood_score hand cases") {
  const FeatureList protos{v2(1, 0), v2(0, 1)};
  CHECK(ood_score(v2(1, 0), protos) == doctest::Approx(0.0));
  const FeatureList one{v2(1, 0)};
  CHECK(ood_score(v2(0, 1), one) == doctest::Approx(1.0));
  CHECK(ood_score(v2(kHalfSqrt2, kHalfSqrt2), protos) ==
        doctest::Approx(1 - kHalfSqrt2).epsilon(1e-12));
}

TEST_CASE("ood_score needs prototypes") {
  const FeatureList none;
  CHECK_THROWS_AS(ood_score(v2(1, 0), none), Error);
}

TEST_CASE("extended score") {
  PrototypePool pool({v2(1, 0)}, 10);
  const Feature f = v2(kHalfSqrt2, kHalfSqrt2);
  CHECK(extended_ood_score(f, pool) == ood_score(f, pool.source()));
  pool.push_novel(v2(0, 1));
  CHECK(extended_ood_score(f, pool) == doctest::Approx(1 - kHalfSqrt2).epsilon(1e-12));
  CHECK(extended_ood_score(v2(0, 1), pool) == doctest::Approx(0.0));
}

TEST_CASE("extended score never exceeds the plain score") {
  std::mt19937_64 rng(3);
  FeatureList src;
  for (int i = 0; i < 4; ++i) src.push_back(oracle::random_unit(rng, 6));
  PrototypePool pool(src, 20);
  for (int i = 0; i < 7; ++i) pool.push_novel(oracle::random_unit(rng, 6));
  for (int i = 0; i < 200; ++i) {
    const Feature f = oracle::random_unit(rng, 6);
    const double plain = ood_score(f, pool.source());
    CHECK(extended_ood_score(f, pool) <= plain);
    CHECK(plain >= 0.0);
    CHECK(plain <= 2.0);
  }
}

TEST_CASE("discrete mode score") {
  PrototypePool pool({v2(1, 0)}, 10);
  const Feature f = v2(0.6, 0.8);
  CHECK(discrete_mode_score(f, pool) == ood_score(f, pool.source()));

  // s_s = 1, s_u = 0
  pool.push_novel(v2(0, 1));
  CHECK(discrete_mode_score(v2(1, 0), pool) == doctest::Approx(0.0));
  // s_s = 0, s_u = 1
  CHECK(discrete_mode_score(v2(0, 1), pool) == doctest::Approx(1.0));
}

TEST_CASE("discrete mode averages the top novel similarities") {
  PrototypePool pool({v2(1, 0)}, 10);
  pool.push_novel(v2(0, 1));
  pool.push_novel(v2(kHalfSqrt2, kHalfSqrt2));
  pool.push_novel(v2(-1, 0));
  const Feature f = v2(0.6, 0.8);
  const double ss = 0.6;
  auto os = [&](double su) { return (1 - ss) * ss / (ss + su) + su * su / (ss + su); };
  // all three available when top_m exceeds the pool
  const double all = (0.8 + kHalfSqrt2 * 1.4 - 0.6) / 3;
  CHECK(discrete_mode_score(f, pool, 10) == doctest::Approx(os(all)).epsilon(1e-12));
  const double top2 = (0.8 + kHalfSqrt2 * 1.4) / 2;
  CHECK(discrete_mode_score(f, pool, 2) == doctest::Approx(os(top2)).epsilon(1e-12));
}

TEST_CASE("score window FIFO and clamping") {
  ScoreWindow w(3);
  for (double s : {0.1, 0.2, 0.3, 0.4}) w.push(s);
  CHECK(w.values() == std::vector<double>{0.2, 0.3, 0.4});
  w.push(std::span<const double>{});
  CHECK(w.size() == 3);
  ScoreWindow c(4);
  c.push(1.3);
  c.push(-0.2);
  CHECK(c.values() == std::vector<double>{1.0, 0.0});
}

TEST_CASE("adaptive threshold hand cases") {
  const std::vector<double> split{0.1, 0.1, 0.1, 0.1, 0.9, 0.9, 0.9, 0.9};
  auto est = adaptive_threshold(split);
  CHECK_FALSE(est.degenerate);
  CHECK(est.tau == doctest::Approx(0.10));
  CHECK(*est.objective == doctest::Approx(0.0));

  const std::vector<double> flat(16, 0.5);
  est = adaptive_threshold(flat);
  CHECK(est.degenerate);
  CHECK(est.tau == 1.0);
}

TEST_CASE("adaptive threshold guards") {
  ScoreWindow empty(8);
  CHECK_THROWS_AS(adaptive_threshold(empty), Error);
  const std::vector<double> few{0.1, 0.9, 0.1, 0.9, 0.1, 0.9, 0.1};
  CHECK(adaptive_threshold(few).degenerate);
  const std::vector<double> low{0.1, 0.12, 0.3, 0.05, 0.2, 0.33, 0.1, 0.39, 0.01};
  auto est = adaptive_threshold(low, ThresholdRange{0.4, 1.0});
  CHECK(est.degenerate);
  CHECK(est.tau == 1.0);
}

TEST_CASE("adaptive threshold on a bimodal mixture") {
  std::mt19937_64 rng(2024);
  std::normal_distribution<double> lo(0.2, 0.05), hi(0.8, 0.05);
  std::vector<double> s;
  std::vector<int> comp;
  for (int i = 0; i < 512; ++i) {
    const bool upper = i % 2 == 1;
    s.push_back(std::clamp(upper ? hi(rng) : lo(rng), 0.0, 1.0));
    comp.push_back(upper);
  }
  const auto est = adaptive_threshold(s);
  const auto ref = oracle::brute_force_threshold(s);
  CHECK(est.tau == ref.tau);
  int wrong = 0;
  for (std::size_t i = 0; i < s.size(); ++i) wrong += (s[i] > est.tau) != (comp[i] == 1);
  CHECK(wrong < 0.02 * s.size());
}

TEST_CASE("adaptive threshold matches the brute-force grid and ignores order") {
  std::mt19937_64 rng(77);
  std::uniform_int_distribution<int> size(8, 200), modes(1, 3);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 200; ++trial) {
    const int n = size(rng), k = modes(rng);
    std::vector<double> s;
    for (int i = 0; i < n; ++i) {
      const double centre = (i % k + 0.5) / k;
      s.push_back(std::clamp(centre + 0.1 * (u(rng) - 0.5), 0.0, 1.0));
    }
    const auto est = adaptive_threshold(s);
    const auto ref = oracle::brute_force_threshold(s);
    CHECK(est.tau == ref.tau);
    CHECK(est.degenerate == ref.degenerate);
    std::shuffle(s.begin(), s.end(), rng);
    CHECK(adaptive_threshold(s).tau == est.tau);
  }
}

TEST_CASE("clamped threshold matches the restricted brute-force grid") {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<double> s(64);
    for (auto &v : s) v = u(rng) * u(rng);
    const auto est = adaptive_threshold(s, ThresholdRange{0.4, 1.0});
    const auto ref = oracle::brute_force_threshold(s, 0.4, 1.0);
    CHECK(est.tau == ref.tau);
    if (!est.degenerate) CHECK(est.tau >= 0.4);
  }
}

TEST_CASE("split objective") {
  const std::vector<double> s{0.0, 0.2, 0.8, 1.0};
  CHECK(*split_objective(s, 0.5) == doctest::Approx(0.02));
  CHECK_FALSE(split_objective(s, 1.0).has_value());
}
