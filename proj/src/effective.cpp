#include "stokeshom/effective.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstring>
#include <thread>

#include "stokeshom/cutoff.hpp"
#include "stokeshom/errors.hpp"

namespace stokeshom {

StrainBasis strain_basis(int dim) {
  if (dim != 2 && dim != 3) throw Error(ErrorKind::InvalidParameter, "strain basis needs d in {2, 3}");
  StrainBasis b;
  b.dim = dim;
  const double s = 1 / std::sqrt(2.0);
  Eigen::MatrixXd E = Eigen::MatrixXd::Zero(dim, dim);
  E(0, 0) = s, E(1, 1) = -s;
  b.elements.push_back(E);
  if (dim == 3) {
    E.setZero();
    E(0, 0) = E(1, 1) = 1 / std::sqrt(6.0);
    E(2, 2) = -2 / std::sqrt(6.0);
    b.elements.push_back(E);
  }
  for (int k = 0; k < dim; ++k)
    for (int l = k + 1; l < dim; ++l) {
      E.setZero();
      E(k, l) = E(l, k) = s;
      b.elements.push_back(E);
    }
  return b;
}

std::uint64_t config_fingerprint(const ParticleConfig& config) {
  std::uint64_t h = 1469598103934665603ull;
  auto mix = [&](const void* p, std::size_t n) {
    const auto* c = static_cast<const unsigned char*>(p);
    for (std::size_t i = 0; i < n; ++i) h = (h ^ c[i]) * 1099511628211ull;
  };
  mix(&config.dim, sizeof(config.dim));
  mix(&config.box, sizeof(config.box));
  for (const auto& p : config.particles) {
    mix(p.center.data(), sizeof(double) * static_cast<std::size_t>(p.center.size()));
    mix(&p.radius, sizeof(double));
  }
  return h;
}

std::vector<CellSolution> solve_basis(const ParticleConfig& config, const ViscosityField& mu,
                                      const SolverParams& params) {
  const auto basis = strain_basis(mu.grid.dim);
  const auto fp = config_fingerprint(config);
  std::vector<CellSolution> out;
  for (const auto& E : basis.elements) out.push_back({E, solve_cell(mu, E, params), mu.kappa, fp});
  return out;
}

double EffectiveTensor::asymmetry() const { return (B - B.transpose()).norm() / B.norm(); }

double EffectiveTensor::min_eigenvalue() const {
  Eigen::MatrixXd S = 0.5 * (B + B.transpose());
  return Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(S).eigenvalues().minCoeff();
}

namespace {
void check_consistent(const std::vector<CellSolution>& sols, const ViscosityField& mu) {
  if (sols.empty()) throw Error(ErrorKind::InconsistentInputs, "no cell solutions");
  for (const auto& s : sols) {
    if (s.kappa != sols.front().kappa || s.fingerprint != sols.front().fingerprint || s.kappa != mu.kappa ||
        s.state.grid.n != mu.grid.n)
      throw Error(ErrorKind::InconsistentInputs, "cell solutions differ in kappa, grid or configuration");
  }
}
}  // namespace

EffectiveViscosity effective_viscosity(const std::vector<CellSolution>& sols, const ViscosityField& mu,
                                       double lambda) {
  check_consistent(sols, mu);
  const auto m = static_cast<Eigen::Index>(sols.size());
  EffectiveViscosity ev;
  ev.energy = {Eigen::MatrixXd(m, m), mu.kappa, lambda, TensorEstimator::Energy};
  ev.flux = {Eigen::MatrixXd(m, m), mu.kappa, lambda, TensorEstimator::Flux};
  std::vector<Eigen::MatrixXd> flux;
  for (const auto& s : sols) flux.push_back(cell_flux(mu, s.state, s.E));
  for (Eigen::Index a = 0; a < m; ++a)
    for (Eigen::Index b = 0; b < m; ++b) {
      ev.energy.B(a, b) =
          a <= b ? cell_cross_energy(mu, sols[a].state, sols[a].E, sols[b].state, sols[b].E) : ev.energy.B(b, a);
      ev.flux.B(a, b) = (flux[b].array() * sols[a].E.array()).sum();
    }
  return ev;
}

EffectiveB effective_b(const std::vector<CellSolution>& sols, const ParticleConfig& config, const ViscosityField& mu) {
  check_consistent(sols, mu);
  if (config_fingerprint(config) != sols.front().fingerprint)
    throw Error(ErrorKind::InconsistentInputs, "configuration differs from the one solved");
  const Grid& g = mu.grid;
  const int d = g.dim, n = g.n;
  const double h = g.h(), hd = std::pow(h, d);
  const double box_volume = std::pow(g.length, d);
  const auto m = static_cast<Eigen::Index>(sols.size());
  const auto pairs = edge_pairs(d);

  EffectiveB out;
  out.boundary = {Eigen::VectorXd::Zero(m), Eigen::MatrixXd::Zero(d, d), ConstantEstimator::BoundaryIntegral};
  out.pressure = {Eigen::VectorXd::Zero(m), Eigen::MatrixXd::Zero(d, d), ConstantEstimator::PressureAverage};
  out.min_shell_cells = config.size() ? std::numeric_limits<int>::max() : 0;

  std::vector<StrainField> strains;
  for (const auto& s : sols) strains.push_back(periodic_strain(g, s.state.u));

  auto wrap = [n](int i) { return ((i % n) + n) % n; };
  auto lin = [&](const int* idx) {
    std::size_t l = 0;
    for (int k = d - 1; k >= 0; --k) l = l * n + static_cast<std::size_t>(wrap(idx[k]));
    return static_cast<Eigen::Index>(l);
  };

  for (std::size_t p = 0; p < config.size(); ++p) {
    const auto& part = config.particles[p];
    const double a = part.radius;
    const double t = std::clamp(std::min(config.delta, rho_circ(config, p)), 3 * h, a);
    const Eigen::VectorXd xc = part.center;
    // virtual displacement w(r)(x - x_n), cubic decay over [a, a + t]
    auto v = [&](const Eigen::VectorXd& x, int k) {
      Eigen::VectorXd y = x - xc;
      for (int j = 0; j < d; ++j) y[j] -= g.length * std::round(y[j] / g.length);
      const double r = y.norm();
      if (r >= a + t) return 0.0;
      const double w = r <= a ? 1.0 : 1.0 - cubic_h((r - a) / t);
      return w * y[k];
    };
    auto face = [&](const int* idx, int k) {
      Eigen::VectorXd x(d);
      for (int j = 0; j < d; ++j) x[j] = (idx[j] + 0.5) * h - (j == k ? 0.5 * h : 0.0);
      return v(x, k);
    };
    auto dist = [&](Eigen::VectorXd x) {
      Eigen::VectorXd y = x - xc;
      for (int j = 0; j < d; ++j) y[j] -= g.length * std::round(y[j] / g.length);
      return y.norm();
    };

    int lo[3] = {0, 0, 0}, hi[3] = {0, 0, 0};
    for (int k = 0; k < d; ++k) {
      lo[k] = static_cast<int>(std::floor((xc[k] - a - t) / h)) - 2;
      hi[k] = static_cast<int>(std::floor((xc[k] + a + t) / h)) + 2;
    }
    int shell = 0;
    Eigen::VectorXd acc = Eigen::VectorXd::Zero(m);
    int idx[3] = {0, 0, 0};
    for (idx[2] = d == 3 ? lo[2] : 0; idx[2] <= (d == 3 ? hi[2] : 0); ++idx[2])
      for (idx[1] = lo[1]; idx[1] <= hi[1]; ++idx[1])
        for (idx[0] = lo[0]; idx[0] <= hi[0]; ++idx[0]) {
          const Eigen::Index c = lin(idx);
          Eigen::VectorXd xcell(d);
          for (int j = 0; j < d; ++j) xcell[j] = (idx[j] + 0.5) * h;
          const double rc = dist(xcell);
          if (rc > a && rc < a + t) ++shell;
          if (rc > a) {
            for (int k = 0; k < d; ++k) {
              int up[3] = {idx[0], idx[1], idx[2]};
              up[k] += 1;
              const double Dkk = (face(up, k) - face(idx, k)) / h;
              if (Dkk == 0) continue;
              for (Eigen::Index e = 0; e < m; ++e) {
                const double sigma =
                    2 * mu.cell[c] * (strains[e].diag[k][c] + sols[e].E(k, k)) - sols[e].state.p[c];
                acc[e] += sigma * Dkk;
              }
            }
          }
          for (std::size_t q = 0; q < pairs.size(); ++q) {
            auto [k, l] = pairs[q];
            Eigen::VectorXd xe = xcell;
            xe[k] -= 0.5 * h, xe[l] -= 0.5 * h;
            if (dist(xe) <= a) continue;
            int mk[3] = {idx[0], idx[1], idx[2]}, ml[3] = {idx[0], idx[1], idx[2]};
            mk[k] -= 1, ml[l] -= 1;
            const double Dkl = 0.5 * ((face(idx, k) - face(ml, k)) + (face(idx, l) - face(mk, l))) / h;
            if (Dkl == 0) continue;
            for (Eigen::Index e = 0; e < m; ++e) {
              const double sigma = 2 * mu.edge[q][c] * (strains[e].off[q][c] + sols[e].E(k, l));
              acc[e] += 2 * sigma * Dkl;
            }
          }
        }
    out.min_shell_cells = std::min(out.min_shell_cells, shell);
    out.boundary.components -= acc * hd / (d * box_volume);
  }
  if (config.size() && out.min_shell_cells < 32)
    throw Error(ErrorKind::SurfaceUnderResolved,
                "only " + std::to_string(out.min_shell_cells) + " fluid cells in a particle shell");

  for (Eigen::Index e = 0; e < m; ++e)
    out.pressure.components[e] = -(mu.chi * sols[e].state.p).sum() / static_cast<double>(g.cells());
  for (Eigen::Index e = 0; e < m; ++e) {
    out.boundary.matrix += out.boundary.components[e] * sols[e].E;
    out.pressure.matrix += out.pressure.components[e] * sols[e].E;
  }
  return out;
}

Extrapolation kappa_extrapolate(const std::vector<std::pair<double, double>>& values) {
  if (values.size() < 3) throw Error(ErrorKind::InvalidParameter, "need at least three kappa values");
  for (std::size_t i = 1; i < values.size(); ++i)
    if (!(values[i].first > values[i - 1].first))
      throw Error(ErrorKind::InvalidParameter, "kappa values must increase");
  const std::size_t m = values.size();
  std::vector<double> x(m), P(m);
  for (std::size_t i = 0; i < m; ++i) x[i] = 1.0 / values[i].first, P[i] = values[i].second;
  Extrapolation ex;
  bool up = true, down = true;
  for (std::size_t i = 1; i < m; ++i) {
    up = up && values[i].second >= values[i - 1].second;
    down = down && values[i].second <= values[i - 1].second;
  }
  ex.non_monotone = !(up || down);
  // Neville at x = 0; after level j, P[i] interpolates points i-j..i.
  double prev = P[m - 1];
  for (std::size_t j = 1; j < m; ++j) {
    for (std::size_t i = m - 1; i >= j; --i) P[i] = (x[i - j] * P[i] - x[i] * P[i - 1]) / (x[i - j] - x[i]);
    if (j + 1 == m) ex.uncertainty = std::abs(P[m - 1] - prev);
    prev = P[m - 1];
  }
  ex.limit = P[m - 1];
  return ex;
}

void parallel_for(std::size_t count, int threads, const std::function<void(std::size_t)>& task) {
  const int workers = std::max(1, std::min<int>(threads, static_cast<int>(count)));
  if (workers == 1) {
    for (std::size_t i = 0; i < count; ++i) task(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  for (int w = 0; w < workers; ++w)
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < count; i = next++) task(i);
    });
  for (auto& t : pool) t.join();
}

SeedResult run_seed(const EnsembleSpec& spec, std::uint64_t seed, const MonteCarloOptions& opts) {
  if (std::find(opts.fail_seeds.begin(), opts.fail_seeds.end(), seed) != opts.fail_seeds.end())
    throw NoConvergenceError("injected solver failure", 0, 1.0);
  RsaOptions ro;
  ro.delta = spec.delta;
  ro.max_attempts = spec.max_attempts;
  ParticleConfig config = generate_rsa(seed, spec.dim, spec.box, spec.target, spec.radius, spec.min_gap, ro);
  Grid g{spec.dim, opts.grid_n, spec.box, BoundaryKind::Periodic};
  Eigen::ArrayXd chi = rasterize(config, g);

  SeedResult res;
  res.seed = seed;
  res.lambda = config.volume_fraction();
  res.kappas = opts.kappas;
  for (double kappa : opts.kappas) {
    ViscosityField mu = make_viscosity(g, chi, kappa);
    auto sols = solve_basis(config, mu, opts.params);
    res.tensors.push_back(effective_viscosity(sols, mu, res.lambda));
    res.constants.push_back(effective_b(sols, config, mu));
    double worst = 0;
    for (const auto& s : sols) worst = std::max(worst, s.state.res_mom);
    res.residuals.push_back(worst);
  }
  const auto m = res.tensors.front().energy.B.rows();
  res.B_extrapolated = Eigen::MatrixXd(m, m);
  res.b_extrapolated = Eigen::VectorXd(m);
  auto series = [&](auto get) {
    std::vector<std::pair<double, double>> v;
    for (std::size_t i = 0; i < res.kappas.size(); ++i) v.emplace_back(res.kappas[i], get(i));
    return v;
  };
  const bool ladder = res.kappas.size() >= 3;
  for (Eigen::Index a = 0; a < m; ++a) {
    for (Eigen::Index b = 0; b < m; ++b) {
      auto v = series([&](std::size_t i) { return res.tensors[i].energy.B(a, b); });
      if (ladder) {
        auto ex = kappa_extrapolate(v);
        res.B_extrapolated(a, b) = ex.limit;
        if (a == b) res.non_monotone = res.non_monotone || ex.non_monotone;
      } else {
        res.B_extrapolated(a, b) = v.back().second;
      }
    }
    auto v = series([&](std::size_t i) { return res.constants[i].pressure.components[a]; });
    res.b_extrapolated[a] = ladder ? kappa_extrapolate(v).limit : v.back().second;
  }
  return res;
}

MonteCarloSummary monte_carlo(const EnsembleSpec& spec, const std::vector<std::uint64_t>& seeds,
                              const MonteCarloOptions& opts) {
  if (seeds.empty()) throw Error(ErrorKind::InvalidParameter, "at least one seed required");
  std::vector<std::optional<SeedResult>> slots(seeds.size());
  std::vector<std::optional<SeedFailure>> fails(seeds.size());
  parallel_for(seeds.size(), opts.threads, [&](std::size_t i) {
    try {
      slots[i] = run_seed(spec, seeds[i], opts);
    } catch (const Error& e) {
      fails[i] = SeedFailure{seeds[i], "cell", e.what()};
    }
  });
  MonteCarloSummary sum;
  for (std::size_t i = 0; i < seeds.size(); ++i) {
    if (slots[i]) sum.results.push_back(std::move(*slots[i]));
    if (fails[i]) sum.failures.push_back(*fails[i]);
  }
  if (sum.results.empty()) return sum;
  const auto m = sum.results.front().B_extrapolated.rows();
  const double cnt = static_cast<double>(sum.results.size());
  sum.B_mean = Eigen::MatrixXd::Zero(m, m);
  sum.b_mean = Eigen::VectorXd::Zero(m);
  for (const auto& r : sum.results) {
    sum.B_mean += r.B_extrapolated / cnt;
    sum.b_mean += r.b_extrapolated / cnt;
    sum.lambda_mean += r.lambda / cnt;
  }
  sum.B_stderr = Eigen::MatrixXd::Zero(m, m);
  sum.b_stderr = Eigen::VectorXd::Zero(m);
  sum.stderr_defined = sum.results.size() > 1;
  if (sum.stderr_defined) {
    for (const auto& r : sum.results) {
      sum.B_stderr.array() += (r.B_extrapolated - sum.B_mean).array().square();
      sum.b_stderr.array() += (r.b_extrapolated - sum.b_mean).array().square();
    }
    sum.B_stderr = (sum.B_stderr.array() / (cnt - 1) / cnt).sqrt().matrix();
    sum.b_stderr = (sum.b_stderr.array() / (cnt - 1) / cnt).sqrt().matrix();
  }
  const double iso = sum.B_mean.trace() / static_cast<double>(m);
  sum.anisotropy = (sum.B_mean - iso * Eigen::MatrixXd::Identity(m, m)).norm();
  return sum;
}

}  // namespace stokeshom
