#include <cmath>
#include <cstdio>
#include <numbers>
#include <string>

#include "stokeshom/errors.hpp"
#include "stokeshom/fft.hpp"
#include "stokeshom/stokes.hpp"

namespace stokeshom {

namespace {

std::string sci(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3e", v);
  return buf;
}

// Face fields of an n x n Dirichlet grid: x-faces (n+1) x n, y-faces n x (n+1).
struct Faces {
  Eigen::ArrayXd x, y;
};

class DirichletStokes {
 public:
  DirichletStokes(const ViscosityField& mu, const Anisotropy& aniso)
      : mu_(mu), B_(aniso.B), n_(mu.grid.n), h_(mu.grid.h()), sine_(n_ - 1), cosine_(n_) {
    const int n = n_;
    weight_.resize((n + 1) * (n + 1));
    for (int j = 0; j <= n; ++j)
      for (int i = 0; i <= n; ++i)
        weight_[i + (n + 1) * j] = ((i == 0 || i == n) ? 0.5 : 1.0) * ((j == 0 || j == n) ? 0.5 : 1.0);
    const int m = n - 1;
    biharm_.resize(m * m);
    laplace_.resize(n * n);
    for (int l = 0; l < m; ++l)
      for (int k = 0; k < m; ++k) {
        double s = 4 / (h_ * h_) *
                   (std::pow(std::sin(std::numbers::pi * (k + 1) / (2.0 * n)), 2) +
                    std::pow(std::sin(std::numbers::pi * (l + 1) / (2.0 * n)), 2));
        biharm_[k + m * l] = s * s;
      }
    for (int l = 0; l < n; ++l)
      for (int k = 0; k < n; ++k)
        laplace_[k + n * l] = 4 / (h_ * h_) *
                              (std::pow(std::sin(std::numbers::pi * k / (2.0 * n)), 2) +
                               std::pow(std::sin(std::numbers::pi * l / (2.0 * n)), 2));
  }

  int n() const { return n_; }

  Faces curl(const Eigen::ArrayXd& phi) const {
    const int n = n_;
    Faces u{Eigen::ArrayXd::Zero((n + 1) * n), Eigen::ArrayXd::Zero(n * (n + 1))};
    for (int j = 0; j < n; ++j)
      for (int i = 0; i <= n; ++i) u.x[i + (n + 1) * j] = (node(phi, i, j + 1) - node(phi, i, j)) / h_;
    for (int j = 0; j <= n; ++j)
      for (int i = 0; i < n; ++i) u.y[i + n * j] = -(node(phi, i + 1, j) - node(phi, i, j)) / h_;
    return u;
  }

  Eigen::ArrayXd curl_t(const Faces& g) const {
    const int n = n_, m = n - 1;
    Eigen::ArrayXd out(m * m);
    for (int j = 1; j < n; ++j)
      for (int i = 1; i < n; ++i)
        out[(i - 1) + m * (j - 1)] =
            (g.x[i + (n + 1) * (j - 1)] - g.x[i + (n + 1) * j] + g.y[i + n * j] - g.y[(i - 1) + n * j]) / h_;
    return out;
  }

  // c1 = (exx - eyy)/sqrt2 at cells, c2 = sqrt2 exy at nodes (ghost no-slip walls).
  void invariants(const Faces& u, Eigen::ArrayXd& c1, Eigen::ArrayXd& c2) const {
    const int n = n_;
    const double s = 1 / (std::numbers::sqrt2 * h_);
    c1.resize(n * n);
    c2.resize((n + 1) * (n + 1));
    for (int j = 0; j < n; ++j)
      for (int i = 0; i < n; ++i)
        c1[i + n * j] = s * (u.x[i + 1 + (n + 1) * j] - u.x[i + (n + 1) * j] - u.y[i + n * (j + 1)] + u.y[i + n * j]);
    for (int j = 0; j <= n; ++j)
      for (int i = 0; i <= n; ++i) {
        double up = j < n ? u.x[i + (n + 1) * j] : -u.x[i + (n + 1) * (n - 1)];
        double dn = j > 0 ? u.x[i + (n + 1) * (j - 1)] : -u.x[i];
        double rt = i < n ? u.y[i + n * j] : -u.y[(n - 1) + n * j];
        double lt = i > 0 ? u.y[(i - 1) + n * j] : -u.y[n * j];
        c2[i + (n + 1) * j] = s * ((up - dn) + (rt - lt));
      }
  }

  Eigen::ArrayXd corner_average(const Eigen::ArrayXd& c2) const {
    const int n = n_;
    Eigen::ArrayXd a(n * n);
    for (int j = 0; j < n; ++j)
      for (int i = 0; i < n; ++i)
        a[i + n * j] = 0.25 * (c2[i + (n + 1) * j] + c2[i + 1 + (n + 1) * j] + c2[i + (n + 1) * (j + 1)] +
                               c2[i + 1 + (n + 1) * (j + 1)]);
    return a;
  }

  double energy(const Faces& u) const {
    Eigen::ArrayXd c1, c2;
    invariants(u, c1, c2);
    Eigen::ArrayXd a = corner_average(c2);
    return (mu_.cell * (B_(0, 0) * c1 * c1 + 2 * B_(0, 1) * c1 * a)).sum() +
           (weight_ * mu_.edge[0] * B_(1, 1) * c2 * c2).sum();
  }

  Faces gradient(const Faces& u) const {
    const int n = n_;
    const double s = 1 / (std::numbers::sqrt2 * h_);
    Eigen::ArrayXd c1, c2;
    invariants(u, c1, c2);
    Eigen::ArrayXd a = corner_average(c2);
    Eigen::ArrayXd T1 = 2 * mu_.cell * (B_(0, 0) * c1 + B_(0, 1) * a);
    Eigen::ArrayXd T2 = 2 * weight_ * mu_.edge[0] * B_(1, 1) * c2;
    if (B_(0, 1) != 0) {
      Eigen::ArrayXd q = 0.5 * mu_.cell * B_(0, 1) * c1;
      for (int j = 0; j < n; ++j)
        for (int i = 0; i < n; ++i) {
          double v = q[i + n * j];
          T2[i + (n + 1) * j] += v;
          T2[i + 1 + (n + 1) * j] += v;
          T2[i + (n + 1) * (j + 1)] += v;
          T2[i + 1 + (n + 1) * (j + 1)] += v;
        }
    }
    Faces g{Eigen::ArrayXd::Zero((n + 1) * n), Eigen::ArrayXd::Zero(n * (n + 1))};
    for (int j = 0; j < n; ++j)
      for (int i = 0; i < n; ++i) {
        double v = s * T1[i + n * j];
        g.x[i + 1 + (n + 1) * j] += v;
        g.x[i + (n + 1) * j] -= v;
        g.y[i + n * (j + 1)] -= v;
        g.y[i + n * j] += v;
      }
    for (int j = 0; j <= n; ++j)
      for (int i = 0; i <= n; ++i) {
        double v = s * T2[i + (n + 1) * j];
        if (j < n) g.x[i + (n + 1) * j] += v;
        else g.x[i + (n + 1) * (n - 1)] -= v;
        if (j > 0) g.x[i + (n + 1) * (j - 1)] -= v;
        else g.x[i] += v;
        if (i < n) g.y[i + n * j] += v;
        else g.y[(n - 1) + n * j] -= v;
        if (i > 0) g.y[(i - 1) + n * j] -= v;
        else g.y[n * j] += v;
      }
    return g;
  }

  Eigen::ArrayXd apply(const Eigen::ArrayXd& phi) const { return curl_t(gradient(curl(expand(phi)))); }

  // Inverse of the clamped-free biharmonic surrogate (square of the Dirichlet Laplacian).
  Eigen::ArrayXd precondition(const Eigen::ArrayXd& r) {
    Eigen::ArrayXd z = r;
    sine_.apply2d(z);
    const double norm = std::pow(2.0 * n_, 2);
    z /= biharm_ * norm;
    sine_.apply2d(z);
    return z;
  }

  // Solve the Neumann problem lap S = div r on cells.
  Eigen::ArrayXd pressure(const Faces& r) {
    const int n = n_;
    Eigen::ArrayXd div(n * n);
    for (int j = 0; j < n; ++j)
      for (int i = 0; i < n; ++i) {
        double rx1 = i + 1 < n ? r.x[i + 1 + (n + 1) * j] : 0.0;
        double rx0 = i > 0 ? r.x[i + (n + 1) * j] : 0.0;
        double ry1 = j + 1 < n ? r.y[i + n * (j + 1)] : 0.0;
        double ry0 = j > 0 ? r.y[i + n * j] : 0.0;
        div[i + n * j] = (rx1 - rx0 + ry1 - ry0) / h_;
      }
    cosine_.forward2d(div);
    for (int q = 0; q < n * n; ++q) div[q] = q == 0 ? 0.0 : -div[q] / laplace_[q];
    cosine_.inverse2d(div);
    return div / std::pow(2.0 * n, 2);
  }

  Eigen::ArrayXd expand(const Eigen::ArrayXd& interior) const {
    const int n = n_, m = n - 1;
    Eigen::ArrayXd phi = Eigen::ArrayXd::Zero((n + 1) * (n + 1));
    for (int j = 1; j < n; ++j)
      for (int i = 1; i < n; ++i) phi[i + (n + 1) * j] = interior[(i - 1) + m * (j - 1)];
    return phi;
  }

 private:
  double node(const Eigen::ArrayXd& phi, int i, int j) const { return phi[i + (n_ + 1) * j]; }

  const ViscosityField& mu_;
  Eigen::Matrix2d B_;
  int n_;
  double h_;
  Eigen::ArrayXd weight_, biharm_, laplace_;
  SineTransform sine_;
  CosineTransform cosine_;
};

Faces sample_force(const ViscosityField& mu, const ForceField& f, bool rhs_mask, double scale) {
  const int n = mu.grid.n;
  const double h = mu.grid.h();
  Faces F{Eigen::ArrayXd::Zero((n + 1) * n), Eigen::ArrayXd::Zero(n * (n + 1))};
  auto chi = [&](int i, int j) { return (i < 0 || j < 0 || i >= n || j >= n) ? 0.0 : mu.chi[i + n * j]; };
  for (int j = 0; j < n; ++j)
    for (int i = 1; i < n; ++i) {
      double m = rhs_mask ? 1 - 0.5 * (chi(i - 1, j) + chi(i, j)) : 1.0;
      F.x[i + (n + 1) * j] = scale * m * f(i * h, (j + 0.5) * h)[0];
    }
  for (int j = 1; j < n; ++j)
    for (int i = 0; i < n; ++i) {
      double m = rhs_mask ? 1 - 0.5 * (chi(i, j - 1) + chi(i, j)) : 1.0;
      F.y[i + n * j] = scale * m * f((i + 0.5) * h, j * h)[1];
    }
  return F;
}

}  // namespace

FlowState solve_dirichlet(const ViscosityField& mu, const ForceField& f, bool rhs_mask, const SolverParams& params,
                          const Anisotropy& aniso) {
  const Grid& g = mu.grid;
  if (g.kind != BoundaryKind::Dirichlet) throw Error(ErrorKind::InvalidParameter, "solve_dirichlet needs a Dirichlet grid");
  params.validate();
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> es(aniso.B);
  if ((aniso.B - aniso.B.transpose()).cwiseAbs().maxCoeff() > 1e-12 || es.eigenvalues().minCoeff() <= 0)
    throw Error(ErrorKind::InvalidParameter, "material tensor must be symmetric positive definite");

  DirichletStokes op(mu, aniso);
  const int n = g.n, m = n - 1;
  Faces F = sample_force(mu, f, rhs_mask, 1.0);
  Eigen::ArrayXd b = op.curl_t(F);
  Eigen::ArrayXd x = Eigen::ArrayXd::Zero(m * m);
  const double bnorm = std::sqrt((b * b).sum());

  FlowState st;
  st.grid = g;
  int it = 0;
  double rel = 0;
  if (bnorm > 0) {
    Eigen::ArrayXd r = b;
    Eigen::ArrayXd z = op.precondition(r);
    Eigen::ArrayXd p = z;
    double rz = (r * z).sum();
    rel = 1.0;
    while (rel > params.tol_mom) {
      if (it >= params.max_iter)
        throw NoConvergenceError("Dirichlet solve stalled at relative residual " + sci(rel), it, rel);
      Eigen::ArrayXd Ap = op.apply(p);
      const double alpha = rz / (p * Ap).sum();
      x += alpha * p;
      r -= alpha * Ap;
      rel = std::sqrt((r * r).sum()) / bnorm;
      z = op.precondition(r);
      const double rz_new = (r * z).sum();
      p = z + (rz_new / rz) * p;
      rz = rz_new;
      ++it;
    }
  }
  Faces u = op.curl(op.expand(x));
  Faces G = op.gradient(u);
  Faces R{F.x - G.x, F.y - G.y};
  st.u = {u.x, u.y};
  st.p = op.pressure(R);
  const Eigen::ArrayXd fluid = 1.0 - mu.chi;
  if (fluid.sum() > 0) st.p -= (st.p * fluid).sum() / fluid.sum();
  st.iterations = it;
  st.res_mom = rel;
  st.res_div = max_divergence(st);
  return st;
}

DirichletStrain dirichlet_strain(const FlowState& st) {
  const int n = st.grid.n;
  const double h = st.grid.h();
  const auto& ux = st.u[0];
  const auto& uy = st.u[1];
  DirichletStrain s;
  s.exx.resize(n * n);
  s.eyy.resize(n * n);
  s.exy.resize((n + 1) * (n + 1));
  for (int j = 0; j < n; ++j)
    for (int i = 0; i < n; ++i) {
      s.exx[i + n * j] = (ux[i + 1 + (n + 1) * j] - ux[i + (n + 1) * j]) / h;
      s.eyy[i + n * j] = (uy[i + n * (j + 1)] - uy[i + n * j]) / h;
    }
  for (int j = 0; j <= n; ++j)
    for (int i = 0; i <= n; ++i) {
      double up = j < n ? ux[i + (n + 1) * j] : -ux[i + (n + 1) * (n - 1)];
      double dn = j > 0 ? ux[i + (n + 1) * (j - 1)] : -ux[i];
      double rt = i < n ? uy[i + n * j] : -uy[(n - 1) + n * j];
      double lt = i > 0 ? uy[(i - 1) + n * j] : -uy[n * j];
      s.exy[i + (n + 1) * j] = 0.5 * ((up - dn) + (rt - lt)) / h;
    }
  return s;
}

double domain_energy(const ViscosityField& mu, const FlowState& st, const Anisotropy& aniso) {
  DirichletStokes op(mu, aniso);
  const double h = mu.grid.h();
  return 2 * h * h * op.energy(Faces{st.u[0], st.u[1]});
}

double domain_work(const ViscosityField& mu, const FlowState& st, const ForceField& f, bool rhs_mask, double scale) {
  Faces F = sample_force(mu, f, rhs_mask, scale);
  const double h = mu.grid.h();
  return h * h * ((F.x * st.u[0]).sum() + (F.y * st.u[1]).sum());
}

}  // namespace stokeshom
