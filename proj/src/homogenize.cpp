#include "stokeshom/homogenize.hpp"

#include <cmath>
#include <optional>

#include "stokeshom/errors.hpp"

namespace stokeshom {

FlowState solve_homogenized(const Eigen::Matrix2d& Bbar, double lambda, const ForceField& f, const Grid& grid,
                            const SolverParams& params) {
  if (!(lambda >= 0 && lambda < 1)) throw Error(ErrorKind::InvalidParameter, "volume fraction must lie in [0, 1)");
  ViscosityField mu = make_viscosity(grid, Eigen::ArrayXd::Zero(grid.n * grid.n), 1.0);
  const double scale = 1.0 - lambda;
  ForceField g = [&f, scale](double x, double y) -> Eigen::Vector2d { return scale * f(x, y); };
  return solve_dirichlet(mu, g, false, params, Anisotropy{Bbar});
}

CellData prepare_cell(const ParticleConfig& master, int cell_n, double kappa, const SolverParams& params) {
  if (master.dim != 2 || !master.periodic)
    throw Error(ErrorKind::InvalidParameter, "the two-scale experiment needs a periodic 2D master");
  CellData cd;
  cd.grid = Grid{2, cell_n, master.box, BoundaryKind::Periodic};
  Eigen::ArrayXd chi = rasterize(master, cd.grid);
  ViscosityField mu = make_viscosity(cd.grid, chi, kappa);
  cd.solutions = solve_basis(master, mu, params);
  cd.lambda = master.volume_fraction();
  cd.Bbar = effective_viscosity(cd.solutions, mu, cd.lambda).energy.B;
  cd.bbar = effective_b(cd.solutions, master, mu).pressure.components;
  return cd;
}

namespace {

// E : D(u) of a Dirichlet state at x-faces, y-faces and cells.
struct ProjectedStrain {
  std::vector<Eigen::ArrayXd> xface, yface, cell;
};

ProjectedStrain project_strain(const FlowState& st, const std::vector<CellSolution>& sols) {
  const int n = st.grid.n;
  DirichletStrain s = dirichlet_strain(st);
  auto cellv = [&](const Eigen::ArrayXd& a, int i, int j) {
    i = std::clamp(i, 0, n - 1), j = std::clamp(j, 0, n - 1);
    return a[i + n * j];
  };
  auto node = [&](int i, int j) { return s.exy[i + (n + 1) * j]; };
  ProjectedStrain ps;
  for (const auto& sol : sols) {
    const Eigen::MatrixXd& E = sol.E;
    Eigen::ArrayXd fx((n + 1) * n), fy(n * (n + 1)), c(n * n);
    for (int j = 0; j < n; ++j)
      for (int i = 0; i <= n; ++i) {
        double exx = 0.5 * (cellv(s.exx, i - 1, j) + cellv(s.exx, i, j));
        double eyy = 0.5 * (cellv(s.eyy, i - 1, j) + cellv(s.eyy, i, j));
        double exy = 0.5 * (node(i, j) + node(i, j + 1));
        fx[i + (n + 1) * j] = E(0, 0) * exx + E(1, 1) * eyy + 2 * E(0, 1) * exy;
      }
    for (int j = 0; j <= n; ++j)
      for (int i = 0; i < n; ++i) {
        double exx = 0.5 * (cellv(s.exx, i, j - 1) + cellv(s.exx, i, j));
        double eyy = 0.5 * (cellv(s.eyy, i, j - 1) + cellv(s.eyy, i, j));
        double exy = 0.5 * (node(i, j) + node(i + 1, j));
        fy[i + n * j] = E(0, 0) * exx + E(1, 1) * eyy + 2 * E(0, 1) * exy;
      }
    for (int j = 0; j < n; ++j)
      for (int i = 0; i < n; ++i) {
        double exy = 0.25 * (node(i, j) + node(i + 1, j) + node(i, j + 1) + node(i + 1, j + 1));
        c[i + n * j] = E(0, 0) * s.exx[i + n * j] + E(1, 1) * s.eyy[i + n * j] + 2 * E(0, 1) * exy;
      }
    ps.xface.push_back(fx);
    ps.yface.push_back(fy);
    ps.cell.push_back(c);
  }
  return ps;
}

}  // namespace

double h1_norm(const Grid& grid, const Eigen::ArrayXd& ux, const Eigen::ArrayXd& uy) {
  const int n = grid.n;
  const double h = grid.h();
  double l2 = (ux.square().sum() + uy.square().sum()) * h * h;
  double semi = 0;
  for (int j = 0; j < n; ++j)
    for (int i = 0; i < n; ++i) {
      double a = ux[i + 1 + (n + 1) * j] - ux[i + (n + 1) * j];
      double b = uy[i + n * (j + 1)] - uy[i + n * j];
      semi += a * a + b * b;
    }
  for (int j = 1; j < n; ++j)
    for (int i = 0; i <= n; ++i) {
      double a = ux[i + (n + 1) * j] - ux[i + (n + 1) * (j - 1)];
      semi += a * a;
    }
  for (int j = 0; j <= n; ++j)
    for (int i = 1; i < n; ++i) {
      double b = uy[i + n * j] - uy[i - 1 + n * j];
      semi += b * b;
    }
  return std::sqrt(l2 + semi);
}

double min_shift_norm(const Eigen::ArrayXd& v, const Eigen::ArrayXd& weight, double cell_volume, double q,
                      double* argmin) {
  auto norm = [&](double c) {
    return std::pow(((v - c).abs().pow(q) * weight).sum() * cell_volume, 1.0 / q);
  };
  const double wsum = weight.sum();
  if (wsum <= 0) {
    if (argmin) *argmin = 0;
    return 0.0;
  }
  // golden section on the convex map c -> |v - c|_q, bracket [min v, max v]
  double lo = v.minCoeff(), hi = v.maxCoeff();
  const double g = (std::sqrt(5.0) - 1) / 2;
  double x1 = hi - g * (hi - lo), x2 = lo + g * (hi - lo);
  double f1 = norm(x1), f2 = norm(x2);
  for (int it = 0; it < 200 && hi - lo > 1e-14 * (1 + std::abs(lo) + std::abs(hi)); ++it) {
    if (f1 < f2) {
      hi = x2, x2 = x1, f2 = f1;
      x1 = hi - g * (hi - lo), f1 = norm(x1);
    } else {
      lo = x1, x1 = x2, f1 = f2;
      x2 = lo + g * (hi - lo), f2 = norm(x2);
    }
  }
  const double c = 0.5 * (lo + hi);
  const double mean = (v * weight).sum() / wsum;
  double best = norm(c), best_c = c;
  if (norm(mean) < best) best = norm(mean), best_c = mean;
  if (argmin) *argmin = best_c;
  return best;
}

HomRow two_scale_error(const FlowState& u_eps, const ViscosityField& mu_eps, const FlowState& ubar,
                       const CellData& cell, double eps, double q) {
  const Grid& g = u_eps.grid;
  if (ubar.grid.n != g.n || ubar.grid.length != g.length)
    throw Error(ErrorKind::IncommensurateGrids, "heterogeneous and homogenized grids differ");
  const int n = g.n, nc = cell.grid.n;
  // domain spacing in cell units must match the cell spacing exactly
  const double ratio = g.h() / eps / cell.grid.h();
  if (std::abs(ratio - 1) > 1e-9) throw Error(ErrorKind::IncommensurateGrids, "domain and cell grids are not commensurate");

  HomRow row;
  row.eps = eps;
  row.h = g.h();
  ProjectedStrain ps = project_strain(ubar, cell.solutions);

  Eigen::ArrayXd dx = u_eps.u[0] - ubar.u[0], dy = u_eps.u[1] - ubar.u[1];
  row.err_H1_naive = h1_norm(g, dx, dy);
  row.err_L2 = std::sqrt((dx.square().sum() + dy.square().sum()) * g.h() * g.h());
  row.ubar_H1 = h1_norm(g, ubar.u[0], ubar.u[1]);

  Eigen::ArrayXd wx = dx, wy = dy;
  for (std::size_t e = 0; e < cell.solutions.size(); ++e) {
    const auto& psi = cell.solutions[e].state.u;
    for (int j = 0; j < n; ++j)
      for (int i = 0; i <= n; ++i)
        wx[i + (n + 1) * j] -= eps * psi[0][(i % nc) + nc * (j % nc)] * ps.xface[e][i + (n + 1) * j];
    for (int j = 0; j <= n; ++j)
      for (int i = 0; i < n; ++i)
        wy[i + n * j] -= eps * psi[1][(i % nc) + nc * (j % nc)] * ps.yface[e][i + n * j];
  }
  row.err_H1_corrected = h1_norm(g, wx, wy);

  Eigen::ArrayXd Q = u_eps.p - ubar.p;
  for (std::size_t e = 0; e < cell.solutions.size(); ++e) {
    const auto& sigma = cell.solutions[e].state.p;
    for (int j = 0; j < n; ++j)
      for (int i = 0; i < n; ++i) {
        const int c = i + n * j;
        Q[c] -= (cell.bbar[static_cast<Eigen::Index>(e)] + sigma[(i % nc) + nc * (j % nc)]) * ps.cell[e][c];
      }
  }
  const Eigen::ArrayXd fluid = 1.0 - mu_eps.chi;
  const double vol = g.h() * g.h();
  row.err_pressure = min_shift_norm(Q, fluid, vol, q);
  row.err_pressure_c0 = std::pow((Q.abs().pow(q) * fluid).sum() * vol, 1.0 / q);
  return row;
}

int domain_cells(int cell_n, double box, double eps) {
  const double v = cell_n / (eps * box);
  const long r = std::lround(v);
  if (r < 16 || std::abs(v - static_cast<double>(r)) > 1e-9 * v)
    throw Error(ErrorKind::IncommensurateGrids, "cell_n / (eps L) = " + std::to_string(v) + " is not a usable integer");
  const double tiles = 1.0 / (eps * box);
  if (std::abs(tiles - std::round(tiles)) > 1e-9)
    throw Error(ErrorKind::IncommensurateGrids, "1/(eps L) must be an integer number of master cells");
  return static_cast<int>(r);
}

ForceField swirl_force(double amplitude) {
  return [amplitude](double x, double y) -> Eigen::Vector2d {
    return amplitude * Eigen::Vector2d(-(y - 0.5), x - 0.5);
  };
}

HomReport convergence_table(const EpsExperiment& ex) {
  for (std::size_t i = 1; i < ex.eps.size(); ++i)
    if (!(ex.eps[i] < ex.eps[i - 1])) throw Error(ErrorKind::InvalidParameter, "eps ladder must decrease");
  HomReport rep;
  rep.cell = prepare_cell(ex.master, ex.cell_n, ex.kappa, ex.params);
  const ForceField f = ex.f ? ex.f : swirl_force();

  std::vector<std::optional<HomRow>> rows(ex.eps.size());
  std::vector<std::string> fails(ex.eps.size());
  parallel_for(ex.eps.size(), ex.threads, [&](std::size_t k) {
    const double eps = ex.eps[k];
    try {
      const int nd = domain_cells(ex.cell_n, ex.master.box, eps);
      const int copies = static_cast<int>(std::lround(1.0 / (eps * ex.master.box)));
      ParticleConfig tiled = tile(ex.master, copies);
      auto sel = select_particles(tiled, eps, 1.0);

      ParticleConfig dom;
      dom.dim = 2;
      dom.box = 1.0;
      dom.periodic = false;
      dom.delta = ex.master.delta * eps;
      for (std::size_t n : sel) dom.particles.push_back({eps * tiled.particles[n].center, eps * tiled.particles[n].radius});

      Grid gd{2, nd, 1.0, BoundaryKind::Dirichlet};
      ViscosityField mu = make_viscosity(gd, rasterize(dom, gd), ex.kappa);
      FlowState u_eps = solve_dirichlet(mu, f, true, ex.params);
      FlowState ubar = solve_homogenized(rep.cell.Bbar, rep.cell.lambda, f, gd, ex.params);
      HomRow row = two_scale_error(u_eps, mu, ubar, rep.cell, eps, ex.q);
      row.selected = sel.size();

      if (ex.moment) {
        GapSampling gs;
        gs.domain_side = 1.0 / eps;
        // gaps see the whole tiled neighborhood, so evaluate on the tiled set
        std::vector<double> rho;
        for (std::size_t n : sel) rho.push_back(rho_refined(tiled, n, gs).rho_refined);
        MomentReport mr = moment_sum(rho, eps, 2, moment_gamma(2));
        row.moment_stat = mr.value;
        row.moment_zero_gap = mr.zero_gap;
      }
      rows[k] = row;
    } catch (const Error& e) {
      fails[k] = "eps=" + std::to_string(eps) + ": " + e.what();
    }
  });
  for (std::size_t k = 0; k < rows.size(); ++k) {
    if (rows[k]) rep.rows.push_back(*rows[k]);
    if (!fails[k].empty()) rep.failures.push_back(fails[k]);
  }
  return rep;
}

}  // namespace stokeshom
