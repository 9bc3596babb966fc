// c1split: scenario runner and catalog listing.
//
//   c1split run --config scenarios/split-minkowski.toml --out runs/mink
//   c1split catalog
//   c1split split --config scenarios/split-minkowski.toml   (only the split ops)

#include "c1split/scenario.hpp"

#include <CLI11.hpp>

#include <iostream>

namespace {

struct Flags {
  std::string config;
  std::string out = "out";
  int threads = -1;
  long long seed = -1;
  bool verbose = false;
};

CLI::App* scenario_command(CLI::App& app, const std::string& name, const std::string& help, Flags& f) {
  CLI::App* sub = app.add_subcommand(name, help);
  sub->add_option("--config", f.config, "scenario file (TOML, or JSON by extension)")->required()->check(CLI::ExistingFile);
  sub->add_option("--out", f.out, "output directory for summary.json and CSV dumps");
  sub->add_option("--threads", f.threads, "worker count (0 = available parallelism)")->check(CLI::NonNegativeNumber);
  sub->add_option("--seed", f.seed, "override the scenario seed")->check(CLI::NonNegativeNumber);
  sub->add_flag("--verbose,-v", f.verbose, "print every check");
  return sub;
}

}  // namespace

int main(int argc, char** argv) {
  namespace cli = c1split::cli;
  CLI::App app{"Numerical laboratory for splitting C1 Lorentzian metrics"};
  app.require_subcommand(1);
  Flags flags;

  app.add_subcommand("catalog", "list catalog metrics, lines and weights");
  const std::vector<std::pair<std::string, std::string>> subs = {
      {"run", "run every operation of a scenario"},
      {"distance", "run the distance and maximizer operations of a scenario"},
      {"geodesic", "run the geodesic operations of a scenario"},
      {"busemann", "run the Busemann, adaptedness, co-ray and superdifferential operations"},
      {"compare", "run the comparison, tangency and Bochner-Ohta operations"},
      {"mollify", "run the mollification operations of a scenario"},
      {"split", "run the splitting operations of a scenario"},
  };
  for (const auto& [name, help] : subs) scenario_command(app, name, help, flags);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : cli::kConfigError;
  }

  CLI::App* used = app.get_subcommands().front();
  const std::string name = used->get_name();
  if (name == "catalog") {
    cli::print_catalog(std::cout);
    return 0;
  }
  cli::RunOptions ro;
  ro.config = flags.config;
  ro.out = flags.out;
  ro.verbose = flags.verbose;
  if (flags.threads >= 0) ro.threads = flags.threads;
  if (flags.seed >= 0) ro.seed = static_cast<std::uint64_t>(flags.seed);
  if (name != "run") ro.only = cli::subcommand_ops(name);
  return cli::run_scenario(ro, std::cout).exit_code;
}
