#include <doctest.h>

#include <owttt/error.hpp>
#include <owttt/protocol.hpp>

#include <algorithm>
#include <cmath>

using namespace owttt;

namespace {

WorldSpec small_world(std::uint64_t seed = 0) {
  WorldSpec w;
  w.n_batches = 20;
  w.n_source = 500;
  w.seed = seed;
  return w;
}

std::vector<RawSample> strip(const Batch &batch) {
  std::vector<RawSample> out;
  for (const auto &s : batch) out.push_back(s.sample);
  return out;
}

RunConfig all_off() { return with_ablation(RunConfig{}, kAblationRows[0]); }

Vector v2(double a, double b) {
  Vector v(2);
  v << a, b;
  return v;
}

} // namespace

TEST_CASE("config validation") {
  RunConfig c;
  c.enable_clustering = false;
  try {
    validate(c);
    FAIL("expected ConfigError");
  } catch (const Error &e) {
    CHECK(e.code() == ErrorCode::ConfigError);
  }
  RunConfig d;
  d.fixed_threshold = 0.5;
  d.threshold_clamp = ThresholdRange{0.4, 1.0};
  CHECK_THROWS_AS(validate(d), Error);
  for (const auto &row : kAblationRows) CHECK_NOTHROW(validate(with_ablation(RunConfig{}, row)));
}

TEST_CASE("confident selection") {
  const std::vector<double> s{0.1, 0.4, 0.6, 0.9};
  auto sel = select_confident(s, 0.5, 0.5);
  std::sort(sel.begin(), sel.end());
  CHECK(sel == std::vector<std::size_t>{0, 3});
  CHECK(select_confident(s, 0.5, 1.0).size() == 4);
  // all distances equal: lowest indices win
  const std::vector<double> tied{0.4, 0.6, 0.4, 0.6, 0.4};
  auto t = select_confident(tied, 0.5, 0.5);
  std::sort(t.begin(), t.end());
  CHECK(t == std::vector<std::size_t>{0, 1, 2});
  for (std::size_t n = 1; n < 40; ++n)
    for (double keep : {0.1, 0.25, 0.5, 0.75, 1.0}) {
      std::vector<double> x(n, 0.3);
      CHECK(select_confident(x, 0.5, keep).size() ==
            static_cast<std::size_t>(std::ceil(keep * n - 1e-9)));
    }
}

TEST_CASE("samples on source prototypes are never rejected") {
  SourceSet src;
  for (int k = 0; k < 2; ++k)
    for (int i = 0; i < 4; ++i) {
      src.samples.push_back(k == 0 ? v2(1, 0) : v2(0, 1));
      src.labels.push_back(k);
    }
  RunConfig c;
  c.feature_dim = 2;
  Engine e(c, src);
  std::vector<RawSample> batch;
  for (int i = 0; i < 16; ++i) batch.push_back({i % 2 ? v2(1, 0) : v2(0, 3), 0});
  for (const auto &p : e.infer(batch)) CHECK(p.predicted_label != kReject);
}

TEST_CASE("fixed threshold comparison") {
  SourceSet src{{v2(1, 0), v2(1, 0)}, {0, 0}};
  RunConfig c = all_off();
  c.enable_ood_detection = true;
  c.fixed_threshold = 0.5;
  c.feature_dim = 2;
  Engine e(c, src);
  const std::vector<RawSample> batch{{v2(0.6, 0.8), 0}, {v2(0.4, std::sqrt(1 - 0.16)), 0}};
  const auto p = e.infer(batch);
  CHECK(p[0].predicted_label == 0);
  CHECK(p[1].predicted_label == kReject);
  CHECK(p[0].threshold_used == 0.5);
}

TEST_CASE("detector off rejects nothing") {
  const auto w = small_world();
  RunConfig c = all_off();
  const auto a = run_stream(generate_stream(w), c, generate_source(w));
  REQUIRE(a.ok());
  for (const auto &r : a.records) CHECK(r.predicted_label != kReject);
  CHECK(*a.metrics->acc_n == 0.0);
  CHECK(*a.metrics->acc_h == 0.0);
}

TEST_CASE("all toggles off only touches the score windows") {
  const auto w = small_world();
  const auto src = generate_source(w);
  const auto stream = generate_stream(w);
  Engine e(all_off(), src);
  const Matrix w0 = e.adapter().weight;
  const auto p = e.infer(strip(stream[0]));
  const auto summary = e.adapt();
  CHECK(e.adapter().weight == w0);
  CHECK(e.pool().novel().empty());
  CHECK_FALSE(e.target_stats().initialized);
  CHECK_FALSE(summary.stepped);
  CHECK(e.score_window().size() == stream[0].size());

  // predictions are the nearest source prototype
  const auto feats = embed_all(strip(stream[0]), e.adapter());
  for (std::size_t i = 0; i < feats.size(); ++i) {
    std::size_t best = 0;
    for (std::size_t k = 1; k < e.pool().source().size(); ++k)
      if (feats[i].dot(e.pool().source()[k]) > feats[i].dot(e.pool().source()[best])) best = k;
    CHECK(p[i].predicted_label == static_cast<int>(best));
  }
}

TEST_CASE("adaptation stage bookkeeping") {
  const auto w = small_world(3);
  const auto src = generate_source(w);
  const auto stream = generate_stream(w);
  RunConfig c;
  Engine e(c, src);
  for (const auto &batch : stream) {
    const auto p = e.infer(strip(batch));
    const auto s = e.adapt();
    const auto kept = std::count_if(p.begin(), p.end(),
                                    [](const Prediction &x) { return x.predicted_label != kReject; });
    CHECK(s.alignment_samples == static_cast<std::size_t>(kept));
    CHECK(s.clustering_set_size == static_cast<std::size_t>(std::ceil(c.keep_ratio * batch.size())));
    CHECK(e.pool().novel().size() <= c.novel_capacity);
    CHECK(s.stepped);
  }
}

TEST_CASE("adapt requires a preceding infer") {
  const auto w = small_world();
  Engine e(RunConfig{}, generate_source(w));
  CHECK_THROWS_AS(e.adapt(), Error);
}

TEST_CASE("runs are deterministic and causal") {
  auto w = small_world(5);
  const auto src = generate_source(w);
  const auto stream = generate_stream(w);
  const RunConfig c;
  const auto a = run_stream(stream, c, src);
  const auto b = run_stream(stream, c, src);
  REQUIRE(a.ok());
  REQUIRE(a.records.size() == b.records.size());
  for (std::size_t i = 0; i < a.records.size(); ++i) {
    CHECK(a.records[i].predicted_label == b.records[i].predicted_label);
    CHECK(a.records[i].ood_score == b.records[i].ood_score);
    CHECK(a.records[i].threshold_used == b.records[i].threshold_used);
  }
  const Stream prefix(stream.begin(), stream.begin() + 5);
  const auto p = run_stream(prefix, c, src);
  REQUIRE(p.records.size() == 5 * 64);
  for (std::size_t i = 0; i < p.records.size(); ++i) {
    CHECK(p.records[i].ood_score == a.records[i].ood_score);
    CHECK(p.records[i].predicted_label == a.records[i].predicted_label);
  }
}

TEST_CASE("expansion disabled keeps the novel pool empty") {
  const auto w = small_world(1);
  const auto a = run_stream(generate_stream(w), with_ablation(RunConfig{}, kAblationRows[4]),
                            generate_source(w));
  REQUIRE(a.ok());
  CHECK(a.max_novel_prototypes == 0);
  for (const auto &t : a.trace) CHECK(t.novel_prototypes == 0);
}

TEST_CASE("trace ends at the whole-run metrics") {
  const auto w = small_world(2);
  const auto a = run_stream(generate_stream(w), RunConfig{}, generate_source(w));
  REQUIRE(a.ok());
  const auto &last = a.trace.back().cumulative;
  CHECK(last.acc_s == a.metrics->acc_s);
  CHECK(last.acc_n == a.metrics->acc_n);
  CHECK(last.acc_h == a.metrics->acc_h);
}

TEST_CASE("rebatch") {
  const auto w = small_world();
  const auto s = generate_stream(w);
  const auto r = rebatch(s, 100);
  std::size_t total = 0;
  for (const auto &b : r) total += b.size();
  CHECK(total == 20 * 64);
  CHECK(r.front().size() == 100);
  CHECK(r.back().size() == (20 * 64) % 100);
  CHECK_THROWS_AS(rebatch(s, 0), Error);
}

TEST_CASE("stage failures carry the batch index") {
  const auto w = small_world();
  auto stream = generate_stream(w);
  for (auto &s : stream[3]) s.sample.values.setZero();
  const auto a = run_stream(stream, RunConfig{}, generate_source(w));
  CHECK_FALSE(a.ok());
  CHECK(*a.error_code == ErrorCode::DegenerateEmbedding);
  CHECK(*a.error_batch == 3);
  CHECK(a.records.size() == 3 * 64);
}
