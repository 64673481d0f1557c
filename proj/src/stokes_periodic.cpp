#include <cmath>
#include <cstdio>
#include <complex>
#include <cstring>
#include <fstream>
#include <memory>
#include <numbers>
#include <string>

#include "nlohmann/json.hpp"
#include "stokeshom/errors.hpp"
#include "stokeshom/fft.hpp"
#include "stokeshom/stokes.hpp"

namespace stokeshom {

std::size_t Grid::cells() const {
  std::size_t c = 1;
  for (int k = 0; k < dim; ++k) c *= static_cast<std::size_t>(n);
  return c;
}

void Grid::validate() const {
  if (dim != 2 && dim != 3) throw Error(ErrorKind::InvalidParameter, "grid dim must be 2 or 3");
  if (n < 16) throw Error(ErrorKind::InvalidParameter, "grid needs at least 16 cells per axis");
  if (!(length > 0)) throw Error(ErrorKind::InvalidParameter, "grid length must be positive");
  if (kind == BoundaryKind::Dirichlet && dim != 2)
    throw Error(ErrorKind::InvalidParameter, "Dirichlet grids are two-dimensional");
}

void SolverParams::validate() const {
  if (!(tol_mom > 0 && tol_mom <= 1e-3) || !(tol_div > 0 && tol_div <= 1e-3))
    throw Error(ErrorKind::InvalidParameter, "tolerances must lie in (0, 1e-3]");
  if (max_iter < 1) throw Error(ErrorKind::InvalidParameter, "max_iter must be positive");
}

std::vector<std::pair<int, int>> edge_pairs(int dim) {
  if (dim == 2) return {{0, 1}};
  return {{0, 1}, {0, 2}, {1, 2}};
}

void check_trace_free_symmetric(const Eigen::MatrixXd& E) {
  if (E.rows() != E.cols()) throw Error(ErrorKind::IllPosed, "strain must be square");
  if ((E - E.transpose()).cwiseAbs().maxCoeff() > 1e-12) throw Error(ErrorKind::IllPosed, "strain not symmetric");
  if (std::abs(E.trace()) > 1e-12) throw Error(ErrorKind::IllPosed, "strain not trace-free");
}

// ---------------------------------------------------------------- rasterize

Eigen::ArrayXd rasterize(const ParticleConfig& config, const Grid& grid, int subsamples) {
  grid.validate();
  if (config.dim != grid.dim) throw Error(ErrorKind::InvalidParameter, "config and grid dimensions differ");
  const int d = grid.dim, n = grid.n;
  const double h = grid.h();
  const bool periodic = grid.kind == BoundaryKind::Periodic;
  Eigen::ArrayXd chi = Eigen::ArrayXd::Zero(static_cast<Eigen::Index>(grid.cells()));
  const int S = subsamples;
  int sub_total = 1;
  for (int k = 0; k < d; ++k) sub_total *= S;

  for (const auto& p : config.particles) {
    if (p.radius < 2 * h)
      throw Error(ErrorKind::UnderResolved, "particle radius " + std::to_string(p.radius) + " below 2h");
    int lo[3] = {0, 0, 0}, hi[3] = {0, 0, 0};
    for (int k = 0; k < d; ++k) {
      lo[k] = static_cast<int>(std::floor((p.center[k] - p.radius) / h)) - 1;
      hi[k] = static_cast<int>(std::floor((p.center[k] + p.radius) / h)) + 1;
      if (!periodic) lo[k] = std::max(lo[k], 0), hi[k] = std::min(hi[k], n - 1);
    }
    int idx[3] = {lo[0], lo[1], d == 3 ? lo[2] : 0};
    const int top2 = d == 3 ? hi[2] : 0;
    for (idx[2] = d == 3 ? lo[2] : 0; idx[2] <= top2; ++idx[2])
      for (idx[1] = lo[1]; idx[1] <= hi[1]; ++idx[1])
        for (idx[0] = lo[0]; idx[0] <= hi[0]; ++idx[0]) {
          // cell corner relative to the center, unwrapped coordinates
          double near2 = 0, far2 = 0;
          for (int k = 0; k < d; ++k) {
            double a = idx[k] * h - p.center[k], b = a + h;
            double nk = a > 0 ? a : (b < 0 ? -b : 0.0);
            double fk = std::max(std::abs(a), std::abs(b));
            near2 += nk * nk, far2 += fk * fk;
          }
          if (near2 >= p.radius * p.radius) continue;
          double frac;
          if (far2 <= p.radius * p.radius) {
            frac = 1.0;
          } else {
            int inside = 0;
            for (int s = 0; s < sub_total; ++s) {
              int t = s;
              double r2 = 0;
              for (int k = 0; k < d; ++k) {
                double x = (idx[k] + (t % S + 0.5) / S) * h - p.center[k];
                t /= S;
                r2 += x * x;
              }
              inside += r2 < p.radius * p.radius;
            }
            frac = double(inside) / sub_total;
          }
          std::size_t lin = 0;
          for (int k = d - 1; k >= 0; --k) lin = lin * n + static_cast<std::size_t>(((idx[k] % n) + n) % n);
          chi[static_cast<Eigen::Index>(lin)] = std::min(1.0, chi[static_cast<Eigen::Index>(lin)] + frac);
        }
  }
  return chi;
}

namespace {

std::string sci(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3e", v);
  return buf;
}

// out(i) = f(i + s e_axis) on the periodic n^d lattice, s = +-1.
void shift(const Eigen::ArrayXd& f, int axis, int s, int n, Eigen::ArrayXd& out) {
  out.resize(f.size());
  std::size_t stride = 1;
  for (int k = 0; k < axis; ++k) stride *= static_cast<std::size_t>(n);
  const std::size_t block = stride * n;
  const std::size_t total = static_cast<std::size_t>(f.size());
  const double* src = f.data();
  double* dst = out.data();
  for (std::size_t b = 0; b < total; b += block) {
    if (s > 0) {
      std::copy(src + b + stride, src + b + block, dst + b);
      std::copy(src + b, src + b + stride, dst + b + block - stride);
    } else {
      std::copy(src + b, src + b + block - stride, dst + b + stride);
      std::copy(src + b + block - stride, src + b + block, dst + b);
    }
  }
}

Eigen::ArrayXd shifted(const Eigen::ArrayXd& f, int axis, int s, int n) {
  Eigen::ArrayXd out;
  shift(f, axis, s, n, out);
  return out;
}

using Fields = std::vector<Eigen::ArrayXd>;

double dot(const Fields& a, const Fields& b) {
  double s = 0;
  for (std::size_t k = 0; k < a.size(); ++k) s += (a[k] * b[k]).sum();
  return s;
}

class PeriodicStokes {
 public:
  PeriodicStokes(const ViscosityField& mu) : mu_(mu), g_(mu.grid), fft_(g_.dim, g_.n) {
    pairs_ = edge_pairs(g_.dim);
    build_symbols();
  }

  // Gradient of sum_c mu |e + E|^2 + sum_e 2 mu (e_kl + E_kl)^2 with respect to u.
  Fields gradient(const Fields& u, const Eigen::MatrixXd& E, bool with_u = true) const {
    const int d = g_.dim, n = g_.n;
    const double h = g_.h();
    const auto size = static_cast<Eigen::Index>(g_.cells());
    Fields G(d, Eigen::ArrayXd::Zero(size));
    Eigen::ArrayXd tmp, tau;
    for (int k = 0; k < d; ++k) {
      Eigen::ArrayXd e = Eigen::ArrayXd::Constant(size, E(k, k));
      if (with_u) {
        shift(u[k], k, +1, n, tmp);
        e += (tmp - u[k]) / h;
      }
      tau = 2 * mu_.cell * e;
      shift(tau, k, -1, n, tmp);
      G[k] += (tmp - tau) / h;
    }
    for (std::size_t p = 0; p < pairs_.size(); ++p) {
      auto [k, l] = pairs_[p];
      Eigen::ArrayXd e = Eigen::ArrayXd::Constant(size, E(k, l));
      if (with_u) {
        shift(u[k], l, -1, n, tmp);
        e += 0.5 * (u[k] - tmp) / h;
        shift(u[l], k, -1, n, tmp);
        e += 0.5 * (u[l] - tmp) / h;
      }
      tau = 2 * mu_.edge[p] * e;
      shift(tau, l, +1, n, tmp);
      G[k] += (tau - tmp) / h;
      shift(tau, k, +1, n, tmp);
      G[l] += (tau - tmp) / h;
    }
    return G;
  }

  // Leray projection followed by the inverse of the unit-viscosity operator.
  // Returns |P r| through `projected_norm` and <P r, z> through `energy`; the
  // latter is summed in Fourier space so it stays positive near roundoff.
  Fields precondition(const Fields& r, double* projected_norm, double* energy = nullptr) {
    const int d = g_.dim;
    std::vector<Eigen::ArrayXcd> rh(d);
    for (int k = 0; k < d; ++k) fft_.forward(r[k], rh[k]);
    const auto m = static_cast<Eigen::Index>(fft_.complex_size());
    double norm2 = 0, en = 0;
    for (Eigen::Index q = 0; q < m; ++q) {
      if (lam_[q] == 0) {
        for (int k = 0; k < d; ++k) rh[k][q] = 0;
        continue;
      }
      std::complex<double> div = 0;
      for (int k = 0; k < d; ++k) div += sym_[k][q] * rh[k][q];
      double pn = 0;
      for (int k = 0; k < d; ++k) {
        rh[k][q] -= std::conj(sym_[k][q]) * div / lam_[q];
        pn += std::norm(rh[k][q]);
        rh[k][q] /= lam_[q];
      }
      norm2 += weight_[q] * pn;
      en += weight_[q] * pn / lam_[q];
    }
    if (projected_norm) *projected_norm = std::sqrt(norm2 / static_cast<double>(fft_.real_size()));
    if (energy) *energy = en / static_cast<double>(fft_.real_size());
    Fields z(d);
    for (int k = 0; k < d; ++k) {
      fft_.inverse(rh[k], z[k]);
      z[k] /= static_cast<double>(fft_.real_size());
    }
    return z;
  }

  // Pressure with r = grad_h Sigma, anchored later.
  Eigen::ArrayXd pressure(const Fields& r) {
    const int d = g_.dim;
    std::vector<Eigen::ArrayXcd> rh(d);
    for (int k = 0; k < d; ++k) fft_.forward(r[k], rh[k]);
    Eigen::ArrayXcd ph(static_cast<Eigen::Index>(fft_.complex_size()));
    for (Eigen::Index q = 0; q < ph.size(); ++q) {
      if (lam_[q] == 0) {
        ph[q] = 0;
        continue;
      }
      std::complex<double> div = 0;
      for (int k = 0; k < d; ++k) div += sym_[k][q] * rh[k][q];
      ph[q] = -div / lam_[q];
    }
    Eigen::ArrayXd p;
    fft_.inverse(ph, p);
    return p / static_cast<double>(fft_.real_size());
  }

 private:
  void build_symbols() {
    const int d = g_.dim, n = g_.n;
    const double h = g_.h();
    const auto m = static_cast<Eigen::Index>(fft_.complex_size());
    sym_.assign(d, Eigen::ArrayXcd(m));
    lam_.resize(m);
    weight_.resize(m);
    int xi[3];
    for (Eigen::Index q = 0; q < m; ++q) {
      fft_.frequency(static_cast<std::size_t>(q), xi);
      double lam = 0;
      for (int k = 0; k < d; ++k) {
        const double th = 2 * std::numbers::pi * xi[k] / n;
        sym_[k][q] = (std::complex<double>(std::cos(th), std::sin(th)) - 1.0) / h;
        lam += std::norm(sym_[k][q]);
      }
      lam_[q] = (q == 0) ? 0.0 : lam;
      // r2c stores half of axis 0; interior frequencies count twice
      weight_[q] = (xi[0] == 0 || (n % 2 == 0 && xi[0] == n / 2)) ? 1.0 : 2.0;
    }
  }

  const ViscosityField& mu_;
  Grid g_;
  PeriodicFFT fft_;
  std::vector<std::pair<int, int>> pairs_;
  std::vector<Eigen::ArrayXcd> sym_;
  Eigen::ArrayXd lam_, weight_;
};

}  // namespace

ViscosityField make_viscosity(const Grid& grid, const Eigen::ArrayXd& chi, double kappa) {
  grid.validate();
  if (!(kappa >= 1)) throw Error(ErrorKind::InvalidParameter, "kappa must be at least 1");
  ViscosityField mu;
  mu.grid = grid;
  mu.kappa = kappa;
  mu.chi = chi;
  mu.cell = 1.0 + (kappa - 1.0) * chi;
  const int n = grid.n;
  if (grid.kind == BoundaryKind::Periodic) {
    if (static_cast<std::size_t>(chi.size()) != grid.cells())
      throw Error(ErrorKind::InvalidParameter, "indicator size does not match grid");
    for (auto [k, l] : edge_pairs(grid.dim)) {
      Eigen::ArrayXd a = shifted(mu.cell, k, -1, n);
      Eigen::ArrayXd b = shifted(mu.cell, l, -1, n);
      Eigen::ArrayXd c = shifted(a, l, -1, n);
      mu.edge.push_back(4.0 / (1.0 / mu.cell + 1.0 / a + 1.0 / b + 1.0 / c));
    }
  } else {
    if (chi.size() != static_cast<Eigen::Index>(n) * n)
      throw Error(ErrorKind::InvalidParameter, "indicator size does not match grid");
    Eigen::ArrayXd node(static_cast<Eigen::Index>(n + 1) * (n + 1));
    for (int j = 0; j <= n; ++j)
      for (int i = 0; i <= n; ++i) {
        double inv = 0;
        int cnt = 0;
        for (int dj = -1; dj <= 0; ++dj)
          for (int di = -1; di <= 0; ++di) {
            int ci = i + di, cj = j + dj;
            if (ci < 0 || cj < 0 || ci >= n || cj >= n) continue;
            inv += 1.0 / mu.cell[ci + n * cj];
            ++cnt;
          }
        node[i + (n + 1) * j] = cnt / inv;
      }
    mu.edge.push_back(node);
  }
  return mu;
}

StrainField periodic_strain(const Grid& grid, const std::vector<Eigen::ArrayXd>& u) {
  const int n = grid.n;
  const double h = grid.h();
  StrainField s;
  for (int k = 0; k < grid.dim; ++k) s.diag.push_back((shifted(u[k], k, +1, n) - u[k]) / h);
  for (auto [k, l] : edge_pairs(grid.dim))
    s.off.push_back(0.5 * ((u[k] - shifted(u[k], l, -1, n)) + (u[l] - shifted(u[l], k, -1, n))) / h);
  return s;
}

FlowState solve_cell(const ViscosityField& mu, const Eigen::MatrixXd& E, const SolverParams& params) {
  const Grid& g = mu.grid;
  if (g.kind != BoundaryKind::Periodic) throw Error(ErrorKind::InvalidParameter, "solve_cell needs a periodic grid");
  params.validate();
  if (E.rows() != g.dim) throw Error(ErrorKind::IllPosed, "strain dimension mismatch");
  check_trace_free_symmetric(E);
  const int d = g.dim;
  const auto size = static_cast<Eigen::Index>(g.cells());

  PeriodicStokes op(mu);
  FlowState st;
  st.grid = g;
  st.u.assign(d, Eigen::ArrayXd::Zero(size));

  Fields b = op.gradient(st.u, E, false);
  for (auto& f : b) f = -f;
  double bnorm = 0;
  double rz = 0;
  Fields z = op.precondition(b, &bnorm, &rz);
  Fields r = b;
  if (bnorm == 0) {
    st.p = Eigen::ArrayXd::Zero(size);
    return st;
  }
  Fields p = z;
  double rnorm = bnorm;
  int it = 0;
  while (rnorm / bnorm > params.tol_mom) {
    if (it >= params.max_iter)
      throw NoConvergenceError("cell solve stalled at relative residual " + sci(rnorm / bnorm), it,
                               rnorm / bnorm);
    Fields Ap = op.gradient(p, Eigen::MatrixXd::Zero(d, d));
    const double alpha = rz / dot(p, Ap);
    for (int k = 0; k < d; ++k) {
      st.u[k] += alpha * p[k];
      r[k] -= alpha * Ap[k];
    }
    double rz_new = 0;
    z = op.precondition(r, &rnorm, &rz_new);
    const double beta = rz_new / rz;
    rz = rz_new;
    for (int k = 0; k < d; ++k) p[k] = z[k] + beta * p[k];
    ++it;
  }
  // Recompute the residual so the pressure reflects the final iterate.
  r = op.gradient(st.u, E);
  for (auto& f : r) f = -f;
  st.p = op.pressure(r);
  const Eigen::ArrayXd fluid = 1.0 - mu.chi;
  const double fw = fluid.sum();
  if (fw > 0) st.p -= (st.p * fluid).sum() / fw;
  st.iterations = it;
  st.res_mom = rnorm / bnorm;
  st.res_div = max_divergence(st) / std::max(1.0, E.norm());
  return st;
}

double max_divergence(const FlowState& st) {
  const Grid& g = st.grid;
  if (g.kind == BoundaryKind::Periodic) {
    Eigen::ArrayXd div = Eigen::ArrayXd::Zero(static_cast<Eigen::Index>(g.cells()));
    for (int k = 0; k < g.dim; ++k) div += (shifted(st.u[k], k, +1, g.n) - st.u[k]) / g.h();
    return div.abs().maxCoeff();
  }
  const int n = g.n;
  double m = 0;
  for (int j = 0; j < n; ++j)
    for (int i = 0; i < n; ++i) {
      double v = (st.u[0][i + 1 + (n + 1) * j] - st.u[0][i + (n + 1) * j] + st.u[1][i + n * (j + 1)] -
                  st.u[1][i + n * j]) /
                 g.h();
      m = std::max(m, std::abs(v));
    }
  return m;
}

double cell_cross_energy(const ViscosityField& mu, const FlowState& a, const Eigen::MatrixXd& Ea,
                         const FlowState& b, const Eigen::MatrixXd& Eb) {
  const Grid& g = mu.grid;
  StrainField sa = periodic_strain(g, a.u), sb = periodic_strain(g, b.u);
  const double cells = static_cast<double>(g.cells());
  double s = 0;
  for (int k = 0; k < g.dim; ++k) s += (mu.cell * (sa.diag[k] + Ea(k, k)) * (sb.diag[k] + Eb(k, k))).sum();
  auto pairs = edge_pairs(g.dim);
  for (std::size_t p = 0; p < pairs.size(); ++p) {
    auto [k, l] = pairs[p];
    s += 2 * (mu.edge[p] * (sa.off[p] + Ea(k, l)) * (sb.off[p] + Eb(k, l))).sum();
  }
  return s / cells;
}

double cell_energy(const ViscosityField& mu, const FlowState& st, const Eigen::MatrixXd& E) {
  return cell_cross_energy(mu, st, E, st, E);
}

Eigen::MatrixXd cell_flux(const ViscosityField& mu, const FlowState& st, const Eigen::MatrixXd& E) {
  const Grid& g = mu.grid;
  StrainField s = periodic_strain(g, st.u);
  const double cells = static_cast<double>(g.cells());
  Eigen::MatrixXd F = Eigen::MatrixXd::Zero(g.dim, g.dim);
  for (int k = 0; k < g.dim; ++k) F(k, k) = (mu.cell * (s.diag[k] + E(k, k))).sum() / cells;
  auto pairs = edge_pairs(g.dim);
  for (std::size_t p = 0; p < pairs.size(); ++p) {
    auto [k, l] = pairs[p];
    F(k, l) = F(l, k) = (mu.edge[p] * (s.off[p] + E(k, l))).sum() / cells;
  }
  return F;
}

double rigidity_rms(const ViscosityField& mu, const FlowState& st, const Eigen::MatrixXd& E) {
  const Grid& g = mu.grid;
  StrainField s = periodic_strain(g, st.u);
  Eigen::ArrayXd q = Eigen::ArrayXd::Zero(static_cast<Eigen::Index>(g.cells()));
  for (int k = 0; k < g.dim; ++k) q += (s.diag[k] + E(k, k)).square();
  auto pairs = edge_pairs(g.dim);
  for (std::size_t p = 0; p < pairs.size(); ++p) {
    auto [k, l] = pairs[p];
    // average the squared shear over the four edges bounding the cell in the (k, l) plane
    Eigen::ArrayXd e2 = (s.off[p] + E(k, l)).square();
    Eigen::ArrayXd a = shifted(e2, k, +1, g.n);
    Eigen::ArrayXd avg = 0.25 * (e2 + a + shifted(e2, l, +1, g.n) + shifted(a, l, +1, g.n));
    q += 2 * avg;
  }
  // eroded interior: every cell sharing an edge with this one is inside too
  Eigen::ArrayXd inside = (mu.chi >= 1.0).cast<double>();
  for (int k = 0; k < g.dim; ++k) inside = inside.min(shifted(inside, k, +1, g.n)).min(shifted(inside, k, -1, g.n));
  const double cnt = inside.sum();
  if (cnt == 0) return 0.0;
  return std::sqrt((q * inside).sum() / cnt);
}

void write_field(const std::string& path, const Grid& grid, const std::string& name, const Eigen::ArrayXd& data,
                 const std::string& layout) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::InvalidParameter, "cannot open " + path);
  for (Eigen::Index i = 0; i < data.size(); ++i) {
    double v = data[i];
    unsigned char bytes[8];
    std::uint64_t bits;
    std::memcpy(&bits, &v, 8);
    for (int b = 0; b < 8; ++b) bytes[b] = static_cast<unsigned char>(bits >> (8 * b));
    out.write(reinterpret_cast<const char*>(bytes), 8);
  }
  nlohmann::ordered_json meta;
  meta["name"] = name;
  meta["dim"] = grid.dim;
  meta["cells_per_axis"] = grid.n;
  meta["spacing"] = grid.h();
  meta["length"] = grid.length;
  meta["boundary"] = grid.kind == BoundaryKind::Periodic ? "periodic" : "dirichlet";
  meta["layout"] = layout;
  meta["count"] = data.size();
  meta["dtype"] = "float64";
  meta["endianness"] = "little";
  std::ofstream(path + ".json") << meta.dump(2) << "\n";
}

}  // namespace stokeshom
