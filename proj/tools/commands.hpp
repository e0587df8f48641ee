#pragma once

#include "experiment.hpp"

#include <owttt/protocol.hpp>

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

namespace owttt::cli {

enum ExitCode : int { kExitOk = 0, kExitFailure = 1, kExitConfig = 2 };

enum class SweepAxis { Ratio, FixedThreshold, KeepRatio, Ablation };

SweepAxis parse_axis(const std::string &name);
std::string to_string(SweepAxis axis);

/// Source set and stream for an experiment: generated from the world, or
/// read back from exported stream files.
struct Inputs {
  SourceSet source;
  Stream stream;
};

Inputs load_inputs(const Experiment &experiment);
RunArtifacts execute(const Experiment &experiment);

/// One experiment per value; throws ConfigError on an empty list or a value
/// outside the axis domain.
std::vector<Experiment> sweep_points(const Experiment &base, SweepAxis axis,
                                     const std::vector<std::string> &values);

int cmd_run(const std::filesystem::path &file, std::ostream &out, std::ostream &err);
int cmd_sweep(const std::filesystem::path &file, const std::string &axis,
              const std::vector<std::string> &values, unsigned jobs, std::ostream &out,
              std::ostream &err);
int cmd_report(const std::filesystem::path &dir, std::ostream &out, std::ostream &err);
int cmd_export(const std::filesystem::path &file, const std::filesystem::path &out_dir,
               bool csv, std::ostream &out, std::ostream &err);

} // namespace owttt::cli
