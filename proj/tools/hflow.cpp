#include <filesystem>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "hflow/app.hpp"

int main(int argc, char** argv) {
  CLI::App cli{"H^alpha-flow solver and estimate auditor"};
  cli.require_subcommand(1);
  std::string config_path;
  std::string out_dir;
  int sweep = -1;

  const char* modes[] = {"solve-aux", "cascade", "verify", "curve", "oracle-compare"};
  for (const char* name : modes) {
    auto* sub = cli.add_subcommand(name, std::string("run mode ") + name);
    sub->add_option("--config", config_path, "key=value run configuration")->required();
    sub->add_option("--out", out_dir, "output directory (overrides the config's output key)");
    sub->add_option("--resolution-sweep", sweep, "repeat at h, h/2, ..., h/2^k and tabulate");
  }
  try {
    cli.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = cli.exit(e);
    return rc == 0 ? 0 : hflow::kExitConfig;
  }
  const std::string mode = cli.get_subcommands().front()->get_name();

  hflow::RunConfig config;
  try {
    auto kv = hflow::KeyValues::read(config_path);
    const auto given = kv.get("mode");
    if (given && *given != mode) {
      std::cerr << "mode: config says '" << *given << "' but subcommand is '" << mode << "'\n";
      return hflow::kExitConfig;
    }
    kv.set("mode", mode);
    if (!out_dir.empty()) kv.set("output", out_dir);
    config = hflow::from_key_values(kv);
  } catch (const hflow::Error& e) {
    std::cerr << e.what() << "\n";
    return hflow::kExitConfig;
  }

  const std::filesystem::path out(config.output);
  const hflow::RunResult result =
      sweep >= 0 ? hflow::run_resolution_sweep(config, out, sweep) : hflow::run(config, out);
  for (const auto& f : result.failures) std::cerr << f << "\n";
  for (const auto& [name, value] : result.metrics)
    std::cout << name << "=" << hflow::format_double(value) << "\n";
  return result.exit_code;
}
