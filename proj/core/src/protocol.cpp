#include "owttt/protocol.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

namespace owttt {

namespace {

[[noreturn]] void config_error(const std::string &what) {
  throw Error(ErrorCode::ConfigError, what);
}

std::vector<RawSample> strip_labels(const Batch &batch) {
  std::vector<RawSample> out;
  out.reserve(batch.size());
  for (const auto &s : batch)
    out.push_back(s.sample);
  return out;
}

std::vector<PredictionRecord> rescore(const Engine &engine, const Stream &stream) {
  std::vector<PredictionRecord> out;
  const double tau = engine.last_threshold();
  for (std::size_t b = 0; b < stream.size(); ++b)
    for (std::size_t i = 0; i < stream[b].size(); ++i) {
      const auto p = engine.score_only(stream[b][i].sample, tau);
      out.push_back({static_cast<std::uint32_t>(b), static_cast<std::uint32_t>(i),
                     p.predicted_label, p.ood_score, p.threshold_used,
                     stream[b][i].hidden_label});
    }
  return out;
}

} // namespace

void validate(const RunConfig &c) {
  if (c.enable_expansion && !(c.enable_clustering && c.enable_ood_detection))
    config_error("enable_expansion requires enable_clustering and enable_ood_detection");
  if (c.fixed_threshold && c.threshold_clamp)
    config_error("fixed_threshold and threshold_clamp are mutually exclusive");
  if (!(c.learning_rate > 0.0) || !std::isfinite(c.learning_rate))
    config_error("learning_rate must be positive");
  if (c.batch_size < 0)
    config_error("batch_size must be non-negative");
  if (!(c.lambda >= 0.0) || !std::isfinite(c.lambda))
    config_error("lambda must be non-negative");
  if (!(c.temperature > 0.0) || !std::isfinite(c.temperature))
    config_error("temperature must be positive");
  if (c.novel_capacity == 0)
    config_error("novel_capacity must be positive");
  if (c.window_length == 0)
    config_error("window_length must be positive");
  if (!(c.keep_ratio > 0.0 && c.keep_ratio <= 1.0))
    config_error("keep_ratio must lie in (0, 1]");
  if (!(c.beta > 0.0 && c.beta <= 1.0))
    config_error("beta must lie in (0, 1]");
  if (!(c.momentum_coeff >= 0.0 && c.momentum_coeff < 1.0))
    config_error("momentum_coeff must lie in [0, 1)");
  if (c.threshold_clamp) {
    const auto &r = *c.threshold_clamp;
    if (!(r.lo >= 0.0 && r.lo <= r.hi && r.hi <= 1.0))
      config_error("threshold_clamp must satisfy 0 <= lo <= hi <= 1");
  }
  if (c.fixed_threshold && !(*c.fixed_threshold >= 0.0 && *c.fixed_threshold <= 2.0))
    config_error("fixed_threshold must lie in [0, 2]");
  if (c.top_m == 0)
    config_error("top_m must be at least 1");
  if (c.novel_momentum && !(*c.novel_momentum > 0.0 && *c.novel_momentum <= 1.0))
    config_error("novel_momentum must lie in (0, 1]");
  if (c.feature_dim < 1)
    config_error("feature_dim must be positive");
}

RunConfig with_ablation(RunConfig config, const AblationRow &row) {
  config.enable_ood_detection = row.ood_detection;
  config.enable_clustering = row.clustering;
  config.enable_expansion = row.expansion;
  config.enable_alignment = row.alignment;
  return config;
}

Engine::SourceModel Engine::build_source_model(const RunConfig &config,
                                              const SourceSet &source) {
  validate(config);
  if (source.samples.empty())
    throw Error(ErrorCode::InvalidArgument, "source set is empty");
  if (source.samples.size() != source.labels.size())
    throw Error(ErrorCode::InvalidArgument, "source samples and labels differ in length");

  auto adapter = make_adapter(config.feature_dim, source.samples.front().size(),
                              config.learning_rate, config.momentum_coeff, config.seed);
  FeatureList features;
  features.reserve(source.samples.size());
  for (const auto &x : source.samples)
    features.push_back(embed(x, adapter));
  const int k_s = *std::max_element(source.labels.begin(), source.labels.end()) + 1;
  auto stats = population_stats(features, config.beta);
  PrototypePool pool(build_source_prototypes(features, source.labels, k_s),
                     config.novel_capacity);
  return {std::move(adapter), std::move(pool), std::move(stats)};
}

Engine::Engine(const RunConfig &config, const SourceSet &source)
    : Engine(config, build_source_model(config, source)) {}

Engine::Engine(const RunConfig &config, SourceModel model)
    : config_(config),
      adapter_(std::move(model.adapter)),
      pool_(std::move(model.pool)),
      source_stats_(std::move(model.stats)),
      score_window_(config.window_length),
      extended_window_(config.window_length) {
  target_stats_.momentum = config.beta;
}

double Engine::sample_score(const Feature &z) const {
  return config_.discrete_mode ? discrete_mode_score(z, pool_, config_.top_m)
                               : ood_score(z, pool_.source());
}

int Engine::nearest_source(const Feature &z) const {
  const auto source = pool_.source();
  int best = 0;
  double best_sim = z.dot(source[0]);
  for (std::size_t k = 1; k < source.size(); ++k) {
    const double sim = z.dot(source[k]);
    if (sim > best_sim) {
      best_sim = sim;
      best = static_cast<int>(k);
    }
  }
  return best;
}

PseudoLabel Engine::pseudo_label(const Feature &z) const {
  PseudoLabel best = static_cast<PseudoLabel>(nearest_source(z));
  double best_sim = z.dot(pool_.source()[best]);
  const auto &novel = pool_.novel();
  for (std::size_t q = 0; q < novel.size(); ++q) {
    const double sim = z.dot(novel[q]);
    if (sim > best_sim) {
      best_sim = sim;
      best = pool_.num_source() + q;
    }
  }
  return best;
}

Prediction Engine::score_only(const RawSample &sample, double threshold) const {
  const Feature z = embed(sample.values, adapter_);
  Prediction p;
  p.ood_score = ood_score(z, pool_.source());
  p.threshold_used = threshold;
  p.predicted_label = p.ood_score < threshold ? nearest_source(z) : kReject;
  return p;
}

std::vector<Prediction> Engine::infer(std::span<const RawSample> batch) {
  if (batch.empty())
    throw Error(ErrorCode::InvalidArgument, "inference on an empty batch");

  batch_.assign(batch.begin(), batch.end());
  features_ = embed_all(batch, adapter_);

  std::vector<double> scores;
  scores.reserve(features_.size());
  for (const auto &z : features_)
    scores.push_back(sample_score(z));
  score_window_.push(std::span<const double>(scores));

  const auto adaptive = adaptive_threshold(score_window_, config_.threshold_clamp);
  double tau = adaptive.tau;
  if (config_.fixed_threshold)
    tau = *config_.fixed_threshold;
  if (!config_.enable_ood_detection)
    tau = std::numeric_limits<double>::infinity();
  selection_reference_ = std::isfinite(tau) ? tau : adaptive.tau;

  predictions_.clear();
  predictions_.reserve(features_.size());
  for (std::size_t i = 0; i < features_.size(); ++i) {
    Prediction p;
    p.ood_score = scores[i];
    p.threshold_used = tau;
    p.predicted_label = scores[i] < tau ? nearest_source(features_[i]) : kReject;
    predictions_.push_back(p);
  }
  last_threshold_ = tau;
  pending_ = true;
  return predictions_;
}

AdaptationSummary Engine::adapt() {
  if (!pending_)
    throw Error(ErrorCode::InvalidArgument, "adapt() called without a preceding infer()");
  pending_ = false;
  ++batches_seen_;

  AdaptationSummary summary;
  summary.losses = combine_losses(0.0, 0.0, config_.lambda, config_.temperature);

  if (config_.enable_expansion) {
    const auto expansion = expand(pool_, features_, extended_window_, config_.threshold_clamp);
    summary.prototypes_added = expansion.count_added;
    summary.expansion_threshold = expansion.threshold.tau;
    if (config_.novel_momentum && !pool_.novel().empty())
      for (std::size_t i = 0; i < features_.size(); ++i)
        if (predictions_[i].predicted_label == kReject)
          momentum_update_novel(pool_, features_[i], *config_.novel_momentum);
  }

  Matrix gradient = Matrix::Zero(adapter_.output_dim(), adapter_.input_dim());
  double clustering = 0.0, alignment = 0.0;

  if (config_.enable_alignment) {
    FeatureList weak_features;
    std::vector<RawSample> weak_inputs;
    for (std::size_t i = 0; i < features_.size(); ++i)
      if (predictions_[i].predicted_label != kReject) {
        weak_features.push_back(features_[i]);
        weak_inputs.push_back(batch_[i]);
      }
    summary.alignment_samples = weak_features.size();
    update_target_stats(target_stats_, weak_features);
    if (target_stats_.initialized) {
      alignment = kl_divergence(source_stats_, target_stats_);
      if (!weak_features.empty())
        gradient += config_.lambda *
                    kl_gradient(source_stats_, target_stats_, weak_features, adapter_, weak_inputs);
    }
  }

  if (config_.enable_clustering) {
    std::vector<double> scores;
    scores.reserve(predictions_.size());
    for (const auto &p : predictions_)
      scores.push_back(p.ood_score);
    summary.clustering_set = select_confident(scores, selection_reference_, config_.keep_ratio);
    summary.clustering_set_size = summary.clustering_set.size();

    FeatureList selected;
    std::vector<RawSample> inputs;
    std::vector<PseudoLabel> labels;
    for (std::size_t i : summary.clustering_set) {
      selected.push_back(features_[i]);
      inputs.push_back(batch_[i]);
      labels.push_back(pseudo_label(features_[i]));
    }
    clustering = clustering_loss(selected, labels, pool_, config_.temperature);
    gradient += clustering_loss_gradient(selected, labels, pool_, config_.temperature,
                                         adapter_, inputs);
  }

  summary.losses = combine_losses(clustering, alignment, config_.lambda, config_.temperature);
  if (config_.enable_clustering || config_.enable_alignment) {
    sgd_momentum_step(adapter_, gradient);
    summary.stepped = true;
  }
  return summary;
}

std::vector<std::size_t> select_confident(std::span<const double> scores, double tau,
                                          double keep_ratio) {
  const std::size_t n = scores.size();
  // Guard against keep_ratio * n landing a hair above an integer.
  auto keep = static_cast<std::size_t>(std::ceil(keep_ratio * static_cast<double>(n) - 1e-9));
  keep = std::min(keep, n);
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return std::abs(scores[a] - tau) > std::abs(scores[b] - tau);
  });
  order.resize(keep);
  return order;
}

Stream rebatch(const Stream &stream, std::size_t batch_size) {
  if (batch_size == 0)
    throw Error(ErrorCode::InvalidArgument, "batch_size must be positive");
  Stream out;
  Batch current;
  for (const auto &batch : stream)
    for (const auto &s : batch) {
      current.push_back(s);
      if (current.size() == batch_size) {
        out.push_back(std::move(current));
        current.clear();
      }
    }
  if (!current.empty())
    out.push_back(std::move(current));
  for (std::size_t b = 0; b < out.size(); ++b)
    for (auto &s : out[b])
      s.sample.timestamp = static_cast<std::uint32_t>(b);
  return out;
}

RunArtifacts run_stream(const Stream &input, const RunConfig &config, const SourceSet &source) {
  RunArtifacts artifacts;
  const Stream rebatched = config.batch_size > 0
                               ? rebatch(input, static_cast<std::size_t>(config.batch_size))
                               : Stream{};
  const Stream &stream = config.batch_size > 0 ? rebatched : input;

  Engine engine(config, source);
  const int num_known = static_cast<int>(engine.num_known());
  MetricsAccumulator cumulative(num_known);
  try {
    artifacts.pre_scores = rescore(engine, stream);
  } catch (const Error &) {
    // The batch loop hits the same sample and reports it with its batch.
    artifacts.pre_scores.clear();
  }

  std::size_t b = 0;
  try {
    for (; b < stream.size(); ++b) {
      const auto &batch = stream[b];
      const auto inputs = strip_labels(batch);
      const auto predictions = engine.infer(inputs);

      // Predictions for this batch are final from here on.
      for (std::size_t i = 0; i < batch.size(); ++i) {
        const auto &p = predictions[i];
        PredictionRecord r{static_cast<std::uint32_t>(b), static_cast<std::uint32_t>(i),
                           p.predicted_label, p.ood_score, p.threshold_used,
                           batch[i].hidden_label};
        cumulative.add(r);
        artifacts.records.push_back(r);
      }

      artifacts.adaptation.push_back(engine.adapt());
      const std::size_t novel = engine.pool().novel().size();
      artifacts.max_novel_prototypes = std::max(artifacts.max_novel_prototypes, novel);
      artifacts.trace.push_back(
          {b, cumulative.snapshot(b), novel, predictions.empty() ? 1.0 : predictions[0].threshold_used});
    }
  } catch (const Error &e) {
    artifacts.error_code = e.code();
    artifacts.error_batch = b;
    artifacts.error_message = e.what();
  }

  if (!artifacts.records.empty()) {
    auto report = cumulative.report();
    for (const auto &row : artifacts.trace)
      report.per_batch_trace.push_back(row.cumulative);
    artifacts.metrics = std::move(report);
  }
  if (artifacts.ok())
    artifacts.post_scores = rescore(engine, stream);
  return artifacts;
}

} // namespace owttt
