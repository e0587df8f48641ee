#include "experiment.hpp"

#include <owttt/error.hpp>

#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>

namespace owttt::cli {
namespace {

using nlohmann::json;

[[noreturn]] void config_error(const std::string &what) {
  throw Error(ErrorCode::ConfigError, what);
}

void reject_unknown(const json &obj, const std::string &where,
                    const std::set<std::string> &allowed) {
  if (!obj.is_object()) config_error(where + " must be an object");
  for (const auto &[key, value] : obj.items()) {
    (void)value;
    if (!allowed.contains(key)) config_error("unknown key '" + where + "." + key + "'");
  }
}

template <class T>
void read(const json &obj, const std::string &where, const char *key, T &out) {
  auto it = obj.find(key);
  if (it == obj.end()) return;
  try {
    if constexpr (std::is_same_v<T, bool>) {
      if (!it->is_boolean()) throw std::runtime_error("expected boolean");
    } else if constexpr (std::is_integral_v<T>) {
      if (!it->is_number_integer()) throw std::runtime_error("expected integer");
      if constexpr (std::is_unsigned_v<T>) {
        if (it->is_number_integer() && it->template get<long long>() < 0)
          throw std::runtime_error("expected non-negative integer");
      }
    } else if constexpr (std::is_floating_point_v<T>) {
      if (!it->is_number()) throw std::runtime_error("expected number");
    } else {
      if (!it->is_string()) throw std::runtime_error("expected string");
    }
    out = it->template get<T>();
  } catch (const std::exception &e) {
    config_error(where + "." + key + ": " + e.what());
  }
}

template <class T>
void read_optional(const json &obj, const std::string &where, const char *key,
                   std::optional<T> &out) {
  auto it = obj.find(key);
  if (it == obj.end() || it->is_null()) return;
  T value{};
  read(obj, where, key, value);
  out = value;
}

WorldSpec parse_world(const json &obj) {
  reject_unknown(obj, "world",
                 {"d_in", "k_s", "k_t", "class_sep", "radius", "within_std", "strong_std",
                  "rotation_angle", "bias_scale", "noise_std", "strong_mode", "interp", "ratio",
                  "n_source", "n_batches", "batch_size", "seed"});
  WorldSpec w;
  read(obj, "world", "d_in", w.d_in);
  read(obj, "world", "k_s", w.k_s);
  read(obj, "world", "k_t", w.k_t);
  read(obj, "world", "class_sep", w.class_sep);
  read(obj, "world", "radius", w.radius);
  read(obj, "world", "within_std", w.within_std);
  read(obj, "world", "strong_std", w.strong_std);
  read(obj, "world", "rotation_angle", w.rotation_angle);
  read(obj, "world", "bias_scale", w.bias_scale);
  read(obj, "world", "noise_std", w.noise_std);
  std::string mode(to_string(w.strong_mode));
  read(obj, "world", "strong_mode", mode);
  try {
    w.strong_mode = parse_strong_mode(mode);
  } catch (const Error &e) {
    config_error(std::string("world.strong_mode: ") + e.what());
  }
  read(obj, "world", "interp", w.interp);
  read(obj, "world", "ratio", w.ratio);
  read(obj, "world", "n_source", w.n_source);
  read(obj, "world", "n_batches", w.n_batches);
  read(obj, "world", "batch_size", w.batch_size);
  read(obj, "world", "seed", w.seed);
  try {
    validate(w);
  } catch (const Error &e) {
    config_error(std::string("world: ") + e.what());
  }
  return w;
}

RunConfig parse_run(const json &obj) {
  reject_unknown(obj, "run",
                 {"enable_ood_detection", "enable_clustering", "enable_expansion",
                  "enable_alignment", "learning_rate", "batch_size", "lambda", "temperature",
                  "novel_capacity", "window_length", "keep_ratio", "beta", "momentum_coeff",
                  "threshold_clamp", "fixed_threshold", "discrete_mode", "top_m",
                  "novel_momentum", "feature_dim", "seed"});
  RunConfig r;
  read(obj, "run", "enable_ood_detection", r.enable_ood_detection);
  read(obj, "run", "enable_clustering", r.enable_clustering);
  read(obj, "run", "enable_expansion", r.enable_expansion);
  read(obj, "run", "enable_alignment", r.enable_alignment);
  read(obj, "run", "learning_rate", r.learning_rate);
  read(obj, "run", "batch_size", r.batch_size);
  read(obj, "run", "lambda", r.lambda);
  read(obj, "run", "temperature", r.temperature);
  read(obj, "run", "novel_capacity", r.novel_capacity);
  read(obj, "run", "window_length", r.window_length);
  read(obj, "run", "keep_ratio", r.keep_ratio);
  read(obj, "run", "beta", r.beta);
  read(obj, "run", "momentum_coeff", r.momentum_coeff);
  if (auto it = obj.find("threshold_clamp"); it != obj.end() && !it->is_null()) {
    if (!it->is_array() || it->size() != 2 || !(*it)[0].is_number() || !(*it)[1].is_number())
      config_error("run.threshold_clamp: expected [lo, hi]");
    r.threshold_clamp = ThresholdRange{(*it)[0].get<double>(), (*it)[1].get<double>()};
  }
  read_optional(obj, "run", "fixed_threshold", r.fixed_threshold);
  read(obj, "run", "discrete_mode", r.discrete_mode);
  read(obj, "run", "top_m", r.top_m);
  read_optional(obj, "run", "novel_momentum", r.novel_momentum);
  read(obj, "run", "feature_dim", r.feature_dim);
  read(obj, "run", "seed", r.seed);
  validate(r); // ConfigError
  return r;
}

std::filesystem::path resolve(const std::filesystem::path &base, const std::string &p) {
  std::filesystem::path path(p);
  if (path.is_relative() && !base.empty()) path = base / path;
  return path.lexically_normal();
}

void check_writable(const std::filesystem::path &dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) config_error("output_dir '" + dir.string() + "' is not writable: " + ec.message());
  auto probe = dir / ".owttt_write_probe";
  {
    std::ofstream out(probe);
    if (!out) config_error("output_dir '" + dir.string() + "' is not writable");
  }
  std::filesystem::remove(probe, ec);
}

} // namespace

Experiment parse_experiment(const json &doc, const std::filesystem::path &base_dir) {
  reject_unknown(doc, "experiment", {"world", "run", "output_dir", "report_formats", "input"});
  Experiment e;
  if (doc.contains("world")) e.world = parse_world(doc.at("world"));
  if (doc.contains("run")) e.run = parse_run(doc.at("run"));
  if (doc.contains("output_dir")) {
    if (!doc.at("output_dir").is_string()) config_error("output_dir: expected string");
    e.output_dir = resolve(base_dir, doc.at("output_dir").get<std::string>());
  } else {
    e.output_dir = resolve(base_dir, e.output_dir.string());
  }
  if (doc.contains("report_formats")) {
    const auto &formats = doc.at("report_formats");
    if (!formats.is_array() || formats.empty())
      config_error("report_formats: expected a non-empty list");
    e.write_csv = e.write_json = false;
    for (const auto &f : formats) {
      if (f == "csv") e.write_csv = true;
      else if (f == "json") e.write_json = true;
      else config_error("report_formats: unknown format " + f.dump());
    }
  }
  if (doc.contains("input")) {
    const auto &in = doc.at("input");
    reject_unknown(in, "input", {"source_file", "stream_file"});
    if (!in.contains("source_file") || !in.contains("stream_file") ||
        !in.at("source_file").is_string() || !in.at("stream_file").is_string())
      config_error("input: both source_file and stream_file are required");
    e.input = InputFiles{resolve(base_dir, in.at("source_file").get<std::string>()),
                         resolve(base_dir, in.at("stream_file").get<std::string>())};
  }
  return e;
}

Experiment load_experiment(const std::filesystem::path &file) {
  std::ifstream in(file);
  if (!in) config_error("cannot open experiment file '" + file.string() + "'");
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error &e) {
    config_error("experiment file '" + file.string() + "': " + e.what());
  }
  Experiment e = parse_experiment(doc, file.parent_path());
  if (auto seed = seed_from_env()) apply_seed(e, *seed);
  check_writable(e.output_dir);
  return e;
}

std::optional<std::uint64_t> seed_from_env() {
  const char *raw = std::getenv("OWTT_SEED");
  if (raw == nullptr || *raw == '\0') return std::nullopt;
  char *end = nullptr;
  unsigned long long value = std::strtoull(raw, &end, 10);
  if (end == raw || *end != '\0' || raw[0] == '-')
    config_error(std::string("OWTT_SEED is not a non-negative integer: ") + raw);
  return static_cast<std::uint64_t>(value);
}

void apply_seed(Experiment &experiment, std::uint64_t seed) {
  experiment.world.seed = seed;
  experiment.run.seed = seed;
}

nlohmann::json to_json(const WorldSpec &w) {
  return {{"d_in", w.d_in},
          {"k_s", w.k_s},
          {"k_t", w.k_t},
          {"class_sep", w.class_sep},
          {"radius", w.radius},
          {"within_std", w.within_std},
          {"strong_std", w.strong_std},
          {"rotation_angle", w.rotation_angle},
          {"bias_scale", w.bias_scale},
          {"noise_std", w.noise_std},
          {"strong_mode", std::string(to_string(w.strong_mode))},
          {"interp", w.interp},
          {"ratio", w.ratio},
          {"n_source", w.n_source},
          {"n_batches", w.n_batches},
          {"batch_size", w.batch_size},
          {"seed", w.seed}};
}

nlohmann::json to_json(const RunConfig &r) {
  json out = {{"enable_ood_detection", r.enable_ood_detection},
              {"enable_clustering", r.enable_clustering},
              {"enable_expansion", r.enable_expansion},
              {"enable_alignment", r.enable_alignment},
              {"learning_rate", r.learning_rate},
              {"batch_size", r.batch_size},
              {"lambda", r.lambda},
              {"temperature", r.temperature},
              {"novel_capacity", r.novel_capacity},
              {"window_length", r.window_length},
              {"keep_ratio", r.keep_ratio},
              {"beta", r.beta},
              {"momentum_coeff", r.momentum_coeff},
              {"discrete_mode", r.discrete_mode},
              {"top_m", r.top_m},
              {"feature_dim", r.feature_dim},
              {"seed", r.seed}};
  out["threshold_clamp"] = r.threshold_clamp
                               ? json::array({r.threshold_clamp->lo, r.threshold_clamp->hi})
                               : json(nullptr);
  out["fixed_threshold"] = r.fixed_threshold ? json(*r.fixed_threshold) : json(nullptr);
  out["novel_momentum"] = r.novel_momentum ? json(*r.novel_momentum) : json(nullptr);
  return out;
}

nlohmann::json to_json(const Experiment &e) {
  json formats = json::array();
  if (e.write_csv) formats.push_back("csv");
  if (e.write_json) formats.push_back("json");
  json out = {{"world", to_json(e.world)},
              {"run", to_json(e.run)},
              {"output_dir", e.output_dir.generic_string()},
              {"report_formats", formats}};
  if (e.input)
    out["input"] = {{"source_file", e.input->source_file.generic_string()},
                    {"stream_file", e.input->stream_file.generic_string()}};
  return out;
}

std::string config_hash(const Experiment &experiment) {
  // output_dir is where results go, not what they are.
  json canonical = to_json(experiment);
  canonical.erase("output_dir");
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : canonical.dump()) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  std::ostringstream out;
  out << std::hex;
  out.width(16);
  out.fill('0');
  out << h;
  return out.str();
}

std::string provenance_line(const Experiment &experiment) {
  return "# config_hash=" + config_hash(experiment) +
         " seed=" + std::to_string(experiment.run.seed);
}

} // namespace owttt::cli
