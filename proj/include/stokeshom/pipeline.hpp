#ifndef STOKESHOM_PIPELINE_HPP
#define STOKESHOM_PIPELINE_HPP

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "stokeshom/config.hpp"
#include "stokeshom/ensemble.hpp"

namespace stokeshom {

inline constexpr const char* kToolkitVersion = "0.1.0";

struct RunSpec {
  std::string subcommand;  // gen | gaps | cutoff-verify | cell | effective | homogenize
  std::string config_path;
  std::string out_dir = "out";
  std::optional<std::vector<std::uint64_t>> seeds;
  std::optional<int> grid;
  std::optional<std::vector<double>> kappa_ladder;
  std::optional<std::vector<double>> eps_ladder;
  std::optional<int> dim;
};

struct StepRecord {
  std::string name;
  bool ok = true;
  std::string message;
};

struct Manifest {
  std::string version = kToolkitVersion;
  std::string subcommand;
  std::uint64_t input_hash = 0;
  std::string parameters;  // resolved config JSON
  int threads = 1;
  std::vector<StepRecord> steps;
  std::vector<std::string> artifacts;
  std::string started_at;
  std::string finished_at;
};

struct RunResult {
  int exit_code = 0;
  Manifest manifest;
};

const std::vector<std::string>& subcommands();

// Resolves the config (file plus overrides) without running anything.
RunConfig resolve_config(const RunSpec& spec);

// Runs one pipeline stage. Throws ConfigError for invalid input; step failures
// are recorded in the manifest and give a nonzero exit code.
RunResult run(const RunSpec& spec);

// Worker count: hardware concurrency capped by STOKESHOM_THREADS.
int worker_threads();

void write_particles_csv(const std::string& path, const ParticleConfig& config);
ParticleConfig read_particles_csv(const std::string& path, int dim, double box, double delta);

// Shortest round-trip decimal form.
std::string format_double(double v);

}  // namespace stokeshom

#endif
