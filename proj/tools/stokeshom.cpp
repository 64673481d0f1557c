#include <CLI11.hpp>
#include <iostream>
#include <sstream>

#include "stokeshom/errors.hpp"
#include "stokeshom/pipeline.hpp"

using namespace stokeshom;

namespace {

template <class T>
std::vector<T> split_list(const std::string& s) {
  std::vector<T> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    std::size_t used = 0;
    if constexpr (std::is_same_v<T, double>) {
      out.push_back(std::stod(item, &used));
    } else {
      out.push_back(static_cast<T>(std::stoull(item, &used)));
    }
    if (used != item.size()) throw std::invalid_argument(item);
  }
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Stochastic homogenization toolkit for rigid-particle Stokes suspensions"};
  app.require_subcommand(1, 1);

  RunSpec spec;
  std::string seeds, kappas, eps;
  int grid = 0, dim = 0;
  bool print_config = false;
  for (const auto& name : subcommands()) {
    CLI::App* sub = app.add_subcommand(name);
    sub->add_option("--config", spec.config_path, "JSON config file");
    sub->add_option("--out", spec.out_dir, "output directory")->capture_default_str();
    sub->add_option("--seed", seeds, "seed list N[,N...]");
    sub->add_option("--grid", grid, "cells per axis");
    sub->add_option("--kappa-ladder", kappas, "penalty ladder a,b,c");
    sub->add_option("--eps-ladder", eps, "scale ladder for homogenize");
    sub->add_option("--dim", dim, "dimension")->check(CLI::IsMember({2, 3}));
    sub->add_flag("--print-config", print_config, "echo resolved parameters and exit");
  }
  CLI11_PARSE(app, argc, argv);
  spec.subcommand = app.get_subcommands().front()->get_name();

  try {
    if (!seeds.empty()) spec.seeds = split_list<std::uint64_t>(seeds);
    if (!kappas.empty()) spec.kappa_ladder = split_list<double>(kappas);
    if (!eps.empty()) spec.eps_ladder = split_list<double>(eps);
  } catch (const std::exception&) {
    std::cerr << "ConfigInvalid: malformed list on the command line\n";
    return 2;
  }
  if (grid != 0) spec.grid = grid;
  if (dim != 0) spec.dim = dim;

  try {
    if (print_config) {
      std::cout << emit_config(resolve_config(spec));
      return 0;
    }
    RunResult res = run(spec);
    for (const auto& s : res.manifest.steps)
      std::cerr << (s.ok ? "ok      " : "FAILED  ") << s.name << (s.ok ? "" : "  " + s.message) << "\n";
    return res.exit_code;
  } catch (const ConfigError& e) {
    for (const auto& d : e.diagnostics) std::cerr << "ConfigInvalid: " << d << "\n";
    return 2;
  }
}
