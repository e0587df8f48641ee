#include "commands.hpp"

#include <CLI11.hpp>

#include <iostream>

int main(int argc, char **argv) {
  using namespace owttt::cli;

  CLI::App app{"Open-world test-time training experiments"};
  app.require_subcommand(1);

  std::string file, dir, axis, out_dir;
  std::vector<std::string> values;
  unsigned jobs = 1;
  bool csv = false;

  auto *run = app.add_subcommand("run", "Run one experiment");
  run->add_option("file", file, "Experiment file (JSON)")->required();

  auto *sweep = app.add_subcommand("sweep", "Run one experiment per value of an axis");
  sweep->add_option("file", file, "Experiment file (JSON)")->required();
  sweep->add_option("--axis", axis, "ratio | fixed_threshold | keep_ratio | ablation")
      ->required();
  auto *values_opt =
      sweep->add_option("--values", values, "Comma-separated values")->delimiter(',');
  values_opt->expected(0, -1);
  sweep->add_option("--jobs", jobs, "Parallel runs")->check(CLI::PositiveNumber);

  auto *report = app.add_subcommand("report", "Write plot data from run or sweep outputs");
  report->add_option("dir", dir, "Output directory of run or sweep")->required();

  auto *exp = app.add_subcommand("export", "Write the experiment's source set and stream");
  exp->add_option("file", file, "Experiment file (JSON)")->required();
  exp->add_option("--out", out_dir, "Destination directory (default: output_dir)");
  exp->add_flag("--csv", csv, "Also write CSV copies");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError &e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

  if (*run) return cmd_run(file, std::cout, std::cerr);
  if (*sweep) {
    // An explicit but empty --values is a configuration error, not "all rows".
    if (values_opt->count() > 0 && values.empty()) values.push_back("");
    if (values.size() == 1 && values[0].empty()) values.clear();
    if (values_opt->count() > 0 && values.empty()) {
      std::cerr << R"({"batch":null,"error":"ConfigError","message":"sweep needs at least one value"})"
                << '\n';
      return kExitConfig;
    }
    return cmd_sweep(file, axis, values, jobs, std::cout, std::cerr);
  }
  if (*report) return cmd_report(dir, std::cout, std::cerr);
  if (*exp) return cmd_export(file, out_dir, csv, std::cout, std::cerr);
  return kExitConfig;
}
