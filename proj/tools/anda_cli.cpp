// anda: train classifiers, craft transfer attacks, evaluate and ablate.
//
//   anda train  --config run.cfg
//   anda attack --config run.cfg --set attack.kind=multianda
//   anda eval   --config run.cfg
//   anda ablate --config run.cfg --set ablate.axis=k --set ablate.values=1,2,4
//
// Worker threads come from ANDA_THREADS.

#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "anda/commands.hpp"
#include "anda/error.hpp"

int main(int argc, char** argv) {
  CLI::App app{"ANDA / MultiANDA transfer attacks on small classifiers"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out;
  std::string seed;
  std::vector<std::string> overrides;

  for (const char* name : {"train", "attack", "eval", "ablate"}) {
    CLI::App* sub = app.add_subcommand(name);
    sub->add_option("--config", config_path, "flat key = value config file");
    sub->add_option("--seed", seed, "override the run seed");
    sub->add_option("--out", out, "override the output directory");
    sub->add_option("--set", overrides, "override one key (key=value); repeatable");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : anda::kExitConfig;
  }

  const std::string command = app.get_subcommands().front()->get_name();
  anda::RunConfig config;
  try {
    if (!config_path.empty()) config = anda::RunConfig::load(config_path);
    if (!seed.empty()) config.set("seed", seed);
    if (!out.empty()) config.set("out", out);
    for (const auto& o : overrides) config.set_assignment(o);
  } catch (const anda::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return anda::kExitConfig;
  }
  return anda::run_command(command, config, std::cout, std::cerr);
}
