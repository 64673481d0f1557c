#ifndef STOKESHOM_STOKES_HPP
#define STOKESHOM_STOKES_HPP

#include <Eigen/Dense>
#include <functional>
#include <string>
#include <vector>

#include "stokeshom/ensemble.hpp"

namespace stokeshom {

enum class BoundaryKind { Periodic, Dirichlet };

struct Grid {
  int dim = 2;
  int n = 64;
  double length = 1.0;
  BoundaryKind kind = BoundaryKind::Periodic;

  double h() const { return length / n; }
  std::size_t cells() const;
  void validate() const;
};

// Cell-centered indicator and the derived cell / edge viscosities.
// Periodic edges (k < l) sit at the corner i - (e_k + e_l)/2 of cell i.
// Dirichlet (d = 2) nodes are stored on an (n+1)^2 lattice.
struct ViscosityField {
  Grid grid;
  double kappa = 1.0;
  Eigen::ArrayXd chi;
  Eigen::ArrayXd cell;
  std::vector<Eigen::ArrayXd> edge;
};

Eigen::ArrayXd rasterize(const ParticleConfig& config, const Grid& grid, int subsamples = 4);
ViscosityField make_viscosity(const Grid& grid, const Eigen::ArrayXd& chi, double kappa);

struct SolverParams {
  double tol_mom = 1e-8;
  double tol_div = 1e-8;
  int max_iter = 20000;

  void validate() const;
};

// Periodic: u[k] lives on faces i - e_k/2 of an n^d grid.
// Dirichlet (d = 2): u[0] on (n+1) x n x-faces, u[1] on n x (n+1) y-faces.
struct FlowState {
  Grid grid;
  std::vector<Eigen::ArrayXd> u;
  Eigen::ArrayXd p;
  double res_mom = 0.0;
  double res_div = 0.0;
  int iterations = 0;
};

// Strain of a periodic face field: diagonal at cells, off-diagonal at edges
// ordered (0,1), (0,2), (1,2).
struct StrainField {
  std::vector<Eigen::ArrayXd> diag;
  std::vector<Eigen::ArrayXd> off;
};

StrainField periodic_strain(const Grid& grid, const std::vector<Eigen::ArrayXd>& u);
std::vector<std::pair<int, int>> edge_pairs(int dim);

void check_trace_free_symmetric(const Eigen::MatrixXd& E);

// Penalized cell problem -div(2 mu (D psi + E)) + grad Sigma = 0, div psi = 0.
FlowState solve_cell(const ViscosityField& mu, const Eigen::MatrixXd& E, const SolverParams& params = {});

// <mu |D psi + E|^2> and the flux average <mu (D psi + E)>.
double cell_energy(const ViscosityField& mu, const FlowState& state, const Eigen::MatrixXd& E);
double cell_cross_energy(const ViscosityField& mu, const FlowState& a, const Eigen::MatrixXd& Ea,
                         const FlowState& b, const Eigen::MatrixXd& Eb);
Eigen::MatrixXd cell_flux(const ViscosityField& mu, const FlowState& state, const Eigen::MatrixXd& E);

// Max-norm discrete divergence, per unit strain scale.
double max_divergence(const FlowState& state);

// RMS of |D psi + E| over the eroded particle interior.
double rigidity_rms(const ViscosityField& mu, const FlowState& state, const Eigen::MatrixXd& E);

using ForceField = std::function<Eigen::Vector2d(double, double)>;

// Constant material tensor on trace-free strains in the basis
// {diag(1,-1)/sqrt2, offdiag/sqrt2}; identity gives the plain Stokes operator.
struct Anisotropy {
  Eigen::Matrix2d B = Eigen::Matrix2d::Identity();
};

// Dirichlet Stokes on [0, L]^2: -div(2 mu D u) + grad S = f (times fluid mask
// if rhs_mask), u = 0 on the boundary. Stream-function formulation.
FlowState solve_dirichlet(const ViscosityField& mu, const ForceField& f, bool rhs_mask,
                          const SolverParams& params = {}, const Anisotropy& aniso = {});

// Strain of a Dirichlet state: exx, eyy at cells; exy at (n+1)^2 nodes.
struct DirichletStrain {
  Eigen::ArrayXd exx, eyy, exy;
};
DirichletStrain dirichlet_strain(const FlowState& state);

// int 2 mu |D u|^2 (B-weighted when aniso is given) and int f . u.
double domain_energy(const ViscosityField& mu, const FlowState& state, const Anisotropy& aniso = {});
double domain_work(const ViscosityField& mu, const FlowState& state, const ForceField& f, bool rhs_mask,
                   double scale = 1.0);

// Little-endian float64 dump with a JSON sidecar next to it.
void write_field(const std::string& path, const Grid& grid, const std::string& name, const Eigen::ArrayXd& data,
                 const std::string& layout);

}  // namespace stokeshom

#endif
