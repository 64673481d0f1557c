#ifndef STOKESHOM_HOMOGENIZE_HPP
#define STOKESHOM_HOMOGENIZE_HPP

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "stokeshom/effective.hpp"
#include "stokeshom/ensemble.hpp"
#include "stokeshom/stokes.hpp"

namespace stokeshom {

// -div(2 B D(u)) + grad S = (1 - lambda) f on the Dirichlet grid; mean-zero S.
FlowState solve_homogenized(const Eigen::Matrix2d& Bbar, double lambda, const ForceField& f, const Grid& grid,
                            const SolverParams& params = {});

// Cell-problem data the two-scale expansion needs, all at one kappa.
struct CellData {
  Grid grid;
  std::vector<CellSolution> solutions;
  Eigen::Matrix2d Bbar = Eigen::Matrix2d::Identity();
  Eigen::Vector2d bbar = Eigen::Vector2d::Zero();
  double lambda = 0.0;
};

CellData prepare_cell(const ParticleConfig& master, int cell_n, double kappa, const SolverParams& params = {});

struct HomRow {
  double eps = 0.0;
  double h = 0.0;
  double err_L2 = 0.0;
  double err_H1_naive = 0.0;
  double err_H1_corrected = 0.0;
  double err_pressure = 0.0;
  double err_pressure_c0 = 0.0;  // same with c = 0
  double moment_stat = 0.0;
  bool moment_zero_gap = false;
  std::size_t selected = 0;
  double ubar_H1 = 0.0;
};

// Errors of u_eps against ubar + eps sum_E psi_E(x/eps) E:D(ubar) and of the
// pressure against Sbar + b:D(ubar) + sum_E Sigma_E(x/eps) E:D(ubar) + c.
HomRow two_scale_error(const FlowState& u_eps, const ViscosityField& mu_eps, const FlowState& ubar,
                       const CellData& cell, double eps, double q = 1.5);

// Discrete H^1 norm of a Dirichlet face field (L^2 part plus difference quotients).
double h1_norm(const Grid& grid, const Eigen::ArrayXd& ux, const Eigen::ArrayXd& uy);

// min over c of the weighted L^q norm of (v - c); convex in c.
double min_shift_norm(const Eigen::ArrayXd& v, const Eigen::ArrayXd& weight, double cell_volume, double q,
                      double* argmin = nullptr);

struct EpsExperiment {
  ParticleConfig master;  // periodic, box L
  std::vector<double> eps{1.0 / 8, 1.0 / 16, 1.0 / 32};
  int cell_n = 64;
  double kappa = 1e3;
  ForceField f;
  SolverParams params;
  double q = 1.5;
  bool moment = true;
  int threads = 1;  // per-eps solves
};

struct HomReport {
  std::vector<HomRow> rows;
  std::vector<std::string> failures;
  CellData cell;
};

// Domain grid size n_dom = cell_n / (eps L); throws IncommensurateGrids otherwise.
int domain_cells(int cell_n, double box, double eps);

HomReport convergence_table(const EpsExperiment& experiment);

// Default smooth non-gradient force on the unit square.
ForceField swirl_force(double amplitude = 1.0);

}  // namespace stokeshom

#endif
