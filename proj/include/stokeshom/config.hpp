#ifndef STOKESHOM_CONFIG_HPP
#define STOKESHOM_CONFIG_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "stokeshom/effective.hpp"
#include "stokeshom/ensemble.hpp"

namespace stokeshom {

// Fully resolved run parameters. Every field has a documented default and
// appears under the same key in the JSON config and in the manifest.
struct RunConfig {
  int dim = 2;
  double box = 4.0;
  std::string target_kind = "fraction";  // fraction | count
  double target = 0.1;
  std::string radius_law = "constant";  // constant | uniform | log_uniform
  double radius_min = 0.25;
  double radius_max = 0.25;
  std::string gap_law = "constant";
  double gap_min = 0.02;
  double gap_max = 0.02;
  double delta = 0.1;
  std::uint64_t max_attempts = 2000000;
  std::vector<std::uint64_t> seeds{1};
  std::string particles;  // optional particle CSV replacing generation

  int grid = 0;  // 0 before resolution: 256 for d = 2, 64 for d = 3
  std::vector<double> kappa{1e2, 1e3, 1e4};
  double tol = 1e-8;
  int max_iter = 20000;

  int boundary_points = 0;  // 0 before resolution: 256 / 1024
  int bisection_steps = 40;

  std::vector<int> cutoff_dims{2, 3};
  std::vector<double> cutoff_rs{1, 2, 3, 4};
  std::vector<std::string> cutoff_kinds{"grad", "hess", "weighted"};
  std::vector<double> rho_grid{1e-1, 1e-2, 1e-3, 1e-4};
  double cutoff_a = 2.0;
  int cutoff_resolution = 64;

  std::vector<double> eps{1.0 / 8, 1.0 / 16, 1.0 / 32};
  int cell_grid = 64;
  double hom_kappa = 1e3;
  double pressure_q = 1.5;
  double force_amplitude = 1.0;
  bool moment = true;

  std::vector<std::uint64_t> fail_seeds;  // fault_injection.fail_seeds

  bool operator==(const RunConfig&) const = default;

  EnsembleSpec ensemble() const;
  SolverParams solver() const;
};

// Parses and validates a JSON config, filling defaults. Throws ConfigError
// listing every violation (unknown keys come with a suggestion).
RunConfig validate_config_text(const std::string& text);

// Resolved parameters as JSON text; validate_config_text(emit_config(c)) == c.
std::string emit_config(const RunConfig& config);

std::vector<std::string> config_keys();

std::size_t edit_distance(const std::string& a, const std::string& b);

std::uint64_t fnv1a(const std::string& bytes);

}  // namespace stokeshom

#endif
