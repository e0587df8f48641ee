#pragma once

#include <owttt/datagen.hpp>
#include <owttt/protocol.hpp>

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace owttt::cli {

struct InputFiles {
  std::filesystem::path source_file;
  std::filesystem::path stream_file;
};

struct Experiment {
  WorldSpec world;
  RunConfig run;
  std::filesystem::path output_dir = "owttt_out";
  bool write_csv = true;
  bool write_json = true;
  std::optional<InputFiles> input;
};

/// Strict parse: unknown keys, wrong types and invalid values raise
/// ConfigError. Relative paths resolve against `base_dir`.
Experiment parse_experiment(const nlohmann::json &doc,
                            const std::filesystem::path &base_dir = {});

/// Reads and parses a file, then applies the OWTT_SEED override.
Experiment load_experiment(const std::filesystem::path &file);

/// Seed override from the environment, if set and well formed.
std::optional<std::uint64_t> seed_from_env();
void apply_seed(Experiment &experiment, std::uint64_t seed);

/// Every field, including defaults, with sorted keys.
nlohmann::json to_json(const Experiment &experiment);
nlohmann::json to_json(const WorldSpec &world);
nlohmann::json to_json(const RunConfig &run);

/// FNV-1a over the canonical JSON dump, as 16 hex digits.
std::string config_hash(const Experiment &experiment);

/// "# config_hash=<hash> seed=<seed>"
std::string provenance_line(const Experiment &experiment);

} // namespace owttt::cli
