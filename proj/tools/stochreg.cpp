#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "stochreg/harness.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Iteratively regularized stochastic gradient descent for ill-posed systems"};
  app.require_subcommand(1);

  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> k_max;
  for (const char* name : {"validate", "run", "compare", "psi-curve"}) {
    auto* sub = app.add_subcommand(name);
    sub->add_option("--config", config, "Experiment file (JSON)")->required();
    sub->add_option("--seed-override", seed, "Replace the seed list by this seed");
    sub->add_option("--k-max", k_max, "Iteration cap");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  stochreg::harness::CommandOptions options;
  options.seed_override = seed;
  options.k_max_override = k_max;
  const std::string command = app.get_subcommands().front()->get_name();
  return stochreg::harness::dispatch(command, config, options, std::cout, std::cerr);
}
