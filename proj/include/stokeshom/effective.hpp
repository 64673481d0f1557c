#ifndef STOKESHOM_EFFECTIVE_HPP
#define STOKESHOM_EFFECTIVE_HPP

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "stokeshom/ensemble.hpp"
#include "stokeshom/stokes.hpp"

namespace stokeshom {

struct StrainBasis {
  int dim = 2;
  std::vector<Eigen::MatrixXd> elements;
  std::size_t size() const { return elements.size(); }
};

StrainBasis strain_basis(int dim);

std::uint64_t config_fingerprint(const ParticleConfig& config);

struct CellSolution {
  Eigen::MatrixXd E;
  FlowState state;
  double kappa = 1.0;
  std::uint64_t fingerprint = 0;
};

// Solves the cell problem for every basis element.
std::vector<CellSolution> solve_basis(const ParticleConfig& config, const ViscosityField& mu,
                                      const SolverParams& params = {});

enum class TensorEstimator { Energy, Flux };

struct EffectiveTensor {
  Eigen::MatrixXd B;
  double kappa = 1.0;
  double lambda = 0.0;
  TensorEstimator estimator = TensorEstimator::Energy;

  double asymmetry() const;
  double min_eigenvalue() const;
};

struct EffectiveViscosity {
  EffectiveTensor energy;
  EffectiveTensor flux;
};

EffectiveViscosity effective_viscosity(const std::vector<CellSolution>& solutions, const ViscosityField& mu,
                                       double lambda);

enum class ConstantEstimator { BoundaryIntegral, PressureAverage };

struct EffectiveConstant {
  Eigen::VectorXd components;  // b : E for each basis element
  Eigen::MatrixXd matrix;
  ConstantEstimator estimator = ConstantEstimator::PressureAverage;
};

struct EffectiveB {
  EffectiveConstant boundary;
  EffectiveConstant pressure;
  int min_shell_cells = 0;
};

EffectiveB effective_b(const std::vector<CellSolution>& solutions, const ParticleConfig& config,
                       const ViscosityField& mu);

struct Extrapolation {
  double limit = 0.0;
  double uncertainty = 0.0;
  bool non_monotone = false;
};

// Neville table in x = 1/kappa evaluated at x = 0.
Extrapolation kappa_extrapolate(const std::vector<std::pair<double, double>>& values);

struct EnsembleSpec {
  int dim = 2;
  double box = 4.0;
  Target target = Target::fraction(0.1);
  Law radius = Law::constant(0.25);
  Law min_gap = Law::constant(0.02);
  double delta = 0.1;
  std::size_t max_attempts = 2000000;
};

struct SeedResult {
  std::uint64_t seed = 0;
  double lambda = 0.0;
  std::vector<double> kappas;
  std::vector<EffectiveViscosity> tensors;
  std::vector<EffectiveB> constants;
  std::vector<double> residuals;
  Eigen::MatrixXd B_extrapolated;
  Eigen::VectorXd b_extrapolated;
  bool non_monotone = false;
};

struct SeedFailure {
  std::uint64_t seed = 0;
  std::string step;
  std::string message;
};

struct MonteCarloOptions {
  int grid_n = 256;
  std::vector<double> kappas{1e2, 1e3, 1e4};
  SolverParams params;
  std::vector<std::uint64_t> fail_seeds;  // fault injection
  int threads = 1;
};

struct MonteCarloSummary {
  std::vector<SeedResult> results;
  std::vector<SeedFailure> failures;
  Eigen::MatrixXd B_mean, B_stderr;
  Eigen::VectorXd b_mean, b_stderr;
  double lambda_mean = 0.0;
  bool stderr_defined = false;
  double anisotropy = 0.0;
};

SeedResult run_seed(const EnsembleSpec& spec, std::uint64_t seed, const MonteCarloOptions& opts);
MonteCarloSummary monte_carlo(const EnsembleSpec& spec, const std::vector<std::uint64_t>& seeds,
                              const MonteCarloOptions& opts);

// Runs tasks 0..count-1 on up to `threads` workers; results land by index.
void parallel_for(std::size_t count, int threads, const std::function<void(std::size_t)>& task);

}  // namespace stokeshom

#endif
