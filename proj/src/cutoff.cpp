#include "stokeshom/cutoff.hpp"

#include <cmath>
#include <numbers>

#include "stokeshom/errors.hpp"
#include "stokeshom/quadrature.hpp"

namespace stokeshom {

void ParabolicGap::validate() const {
  if (!(rho >= 0)) throw Error(ErrorKind::InvalidParameter, "rho must be nonnegative");
  if (!(a > 1)) throw Error(ErrorKind::InvalidParameter, "a must exceed 1");
  if (1 - 1 / a < delta - 1e-14) throw Error(ErrorKind::InvalidParameter, "1 - 1/a must be at least delta");
  if (rho > delta) throw Error(ErrorKind::InvalidParameter, "rho must not exceed delta");
  if (dim < 2) throw Error(ErrorKind::InvalidParameter, "dim must be at least 2");
  if (sign != 1 && sign != -1) throw Error(ErrorKind::InvalidParameter, "sign must be +1 or -1");
}

bool gamma_contains(const ParabolicGap& gap, const Eigen::VectorXd& x) {
  if (!(x.norm() < gap.delta)) return false;
  const double s2 = x.tail(x.size() - 1).squaredNorm();
  const double x1 = x[0];
  // normalized radii a1 = 1, a2 = a
  if (gap.sign > 0) return -gap.rho + s2 / gap.a < x1 && x1 < s2;
  return -gap.rho - s2 < x1 && x1 < -s2 / gap.a;
}

CutoffField::CutoffField(ParabolicGap gap) : gap_(gap) { gap_.validate(); }

CutoffValue CutoffField::eval(const Eigen::VectorXd& x) const {
  const int d = static_cast<int>(x.size());
  CutoffValue out;
  out.grad = Eigen::VectorXd::Zero(d);
  out.hess = Eigen::MatrixXd::Zero(d, d);
  const double a = gap_.a, rho = gap_.rho, c = 1 - 1 / a;
  const Eigen::VectorXd xp = x.tail(d - 1);
  const double s2 = xp.squaredNorm();
  const double lower = -rho + s2 / a;
  if (x[0] >= s2) {
    out.w = 1.0;
    return out;
  }
  if (x[0] <= lower) return out;

  const double theta = rho + c * s2;
  const double t = (x[0] - lower) / theta;
  const double beta = 1 / a + t * c;
  const double h1 = cubic_h_prime(t), h2 = cubic_h_second(t);

  Eigen::VectorXd gt(d);
  gt[0] = 1 / theta;
  gt.tail(d - 1) = -2 * beta / theta * xp;

  Eigen::MatrixXd Ht = Eigen::MatrixXd::Zero(d, d);
  Ht.block(0, 1, 1, d - 1) = (-2 * c / (theta * theta)) * xp.transpose();
  Ht.block(1, 0, d - 1, 1) = Ht.block(0, 1, 1, d - 1).transpose();
  Ht.bottomRightCorner(d - 1, d - 1) = (-2 * beta / theta) * Eigen::MatrixXd::Identity(d - 1, d - 1) +
                                      (8 * c * beta / (theta * theta)) * xp * xp.transpose();

  out.w = cubic_h(t);
  out.grad = h1 * gt;
  out.hess = h2 * gt * gt.transpose() + h1 * Ht;
  return out;
}

const char* to_string(NormKind kind) {
  switch (kind) {
    case NormKind::Grad: return "grad";
    case NormKind::Hess: return "hess";
    case NormKind::Weighted: return "weighted";
  }
  return "grad";
}

NormKind norm_kind_from_string(const std::string& s) {
  if (s == "grad") return NormKind::Grad;
  if (s == "hess") return NormKind::Hess;
  if (s == "weighted") return NormKind::Weighted;
  throw Error(ErrorKind::InvalidParameter, "unknown norm kind '" + s + "'");
}

namespace {

// |F|^r integrated over one x1-column at radius s, in the variable t.
double column(const ParabolicGap& g, double s, double r, NormKind kind, const GaussRule& tr) {
  const double a = g.a, rho = g.rho, c = 1 - 1 / a;
  const double theta = rho + c * s * s;
  const double gx1 = 1 / theta;
  double sum = 0.0;
  for (std::size_t q = 0; q < tr.nodes.size(); ++q) {
    const double t = tr.nodes[q];
    const double beta = 1 / a + t * c;
    const double h1 = cubic_h_prime(t), h2 = cubic_h_second(t);
    const double gxp = -2 * s * beta / theta;
    double f;
    if (kind == NormKind::Grad) {
      f = std::abs(h1) * std::hypot(gx1, gxp);
    } else {
      // Hessian at x' = s e2; the remaining d-2 tangential directions share one eigenvalue.
      const double t1p = -2 * c * s / (theta * theta);
      const double tpp = -2 * beta / theta + 8 * c * beta * s * s / (theta * theta);
      const double tperp = -2 * beta / theta;
      const double H11 = h2 * gx1 * gx1;
      const double H1p = h2 * gx1 * gxp + h1 * t1p;
      const double Hpp = h2 * gxp * gxp + h1 * tpp;
      const double Hperp = h1 * tperp;
      f = std::sqrt(H11 * H11 + 2 * H1p * H1p + Hpp * Hpp + (g.dim - 2) * Hperp * Hperp);
      if (kind == NormKind::Weighted) {
        const double x1 = -rho + s * s / a + theta * t;
        f *= std::hypot(x1, s);
      }
    }
    sum += tr.weights[q] * std::pow(f, r);
  }
  return theta * sum;
}

double integrate(const ParabolicGap& g, double r, NormKind kind, int resolution) {
  const GaussRule tr = gauss_legendre(resolution, 0.0, 1.0);
  const GaussRule sr = gauss_legendre(8, 0.0, 1.0);
  const double s0 = std::min(1e-3 * std::sqrt(g.rho), 1e-3);
  std::vector<double> edges{0.0};
  for (int k = 0; k < resolution; ++k) edges.push_back(s0 * std::pow(0.5 / s0, double(k) / (resolution - 1)));
  double total = 0.0;
  for (std::size_t p = 0; p + 1 < edges.size(); ++p) {
    const double lo = edges[p], len = edges[p + 1] - edges[p];
    for (std::size_t q = 0; q < sr.nodes.size(); ++q) {
      const double s = lo + len * sr.nodes[q];
      // measure of the sphere |x'| = s in R^{d-1}
      double meas = 2.0;
      if (g.dim == 3) meas = 2 * std::numbers::pi * s;
      else if (g.dim > 3)
        meas = 2 * std::pow(std::numbers::pi, (g.dim - 1) / 2.0) / std::tgamma((g.dim - 1) / 2.0) *
               std::pow(s, g.dim - 2);
      total += len * sr.weights[q] * meas * column(g, s, r, kind, tr);
    }
  }
  return total;
}

}  // namespace

NormResult norm_Lr(const CutoffField& field, double r, NormKind kind, int resolution) {
  if (!(r >= 1)) throw Error(ErrorKind::InvalidParameter, "r must be at least 1");
  if (resolution < 64) throw Error(ErrorKind::InvalidParameter, "quadrature resolution must be at least 64");
  if (!(field.gap().rho > 0)) throw Error(ErrorKind::InvalidParameter, "norms require rho > 0");
  NormResult res;
  res.value = std::pow(integrate(field.gap(), r, kind, resolution), 1 / r);
  res.refined = std::pow(integrate(field.gap(), r, kind, 2 * resolution), 1 / r);
  res.under_resolved = std::abs(res.refined - res.value) > 0.01 * std::abs(res.refined);
  return res;
}

double critical_exponent(int dim, NormKind kind) {
  switch (kind) {
    case NormKind::Grad: return (dim + 1) / 2.0;
    case NormKind::Hess: return (dim + 1) / 4.0;
    case NormKind::Weighted: return (dim + 1) / 3.0;
  }
  return 0.0;
}

bool is_critical(int dim, double r, NormKind kind) { return std::abs(r - critical_exponent(dim, kind)) <= 1e-9; }

double predicted_slope(int dim, double r, NormKind kind) {
  if (r <= critical_exponent(dim, kind) + 1e-9) return 0.0;
  const double offset = kind == NormKind::Grad ? 1.0 : kind == NormKind::Hess ? 2.0 : 1.5;
  return (dim + 1) / (2 * r) - offset;
}

std::pair<double, double> linear_fit(const std::vector<double>& x, const std::vector<double>& y) {
  const auto n = static_cast<double>(x.size());
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < x.size(); ++i) mx += x[i], my += y[i];
  mx /= n, my /= n;
  double sxx = 0, sxy = 0, syy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
    syy += (y[i] - my) * (y[i] - my);
  }
  const double slope = sxy / sxx;
  const double r2 = syy > 0 ? sxy * sxy / (sxx * syy) : 1.0;
  return {slope, r2};
}

std::vector<ScalingReport> exponent_regression(const std::vector<int>& dims, const std::vector<double>& rs,
                                               NormKind kind, const std::vector<double>& rho_grid, double a,
                                               int resolution) {
  if (rho_grid.size() < 4) throw Error(ErrorKind::InvalidParameter, "rho grid needs at least 4 points");
  double lo = rho_grid.front(), hi = rho_grid.front();
  for (double v : rho_grid) lo = std::min(lo, v), hi = std::max(hi, v);
  if (std::log10(hi / lo) < 3 - 1e-9) throw Error(ErrorKind::InvalidParameter, "rho grid must span 3 decades");

  std::vector<ScalingReport> out;
  for (int d : dims) {
    for (double r : rs) {
      ScalingReport rep;
      rep.dim = d;
      rep.r = r;
      rep.kind = kind;
      rep.rho = rho_grid;
      std::vector<double> lx, ly, lg, nr;
      for (double rho : rho_grid) {
        ParabolicGap g{rho, a, 1 - 1 / a, d, +1};
        NormResult nres = norm_Lr(CutoffField(g), r, kind, resolution);
        rep.norm.push_back(nres.value);
        rep.under_resolved = rep.under_resolved || nres.under_resolved;
        lx.push_back(std::log(rho));
        ly.push_back(std::log(nres.value));
        lg.push_back(std::abs(std::log(rho)));
        nr.push_back(std::pow(nres.value, r));
      }
      rep.fitted_slope = linear_fit(lx, ly).first;
      rep.critical = is_critical(d, r, kind);
      rep.predicted_slope = predicted_slope(d, r, kind);
      rep.abs_error = std::abs(rep.fitted_slope - rep.predicted_slope);
      if (rep.critical) rep.log_fit_r2 = linear_fit(lg, nr).second;
      out.push_back(std::move(rep));
    }
  }
  return out;
}

std::pair<double, double> pointwise_bound_constants(const CutoffField& field, int samples) {
  const auto& g = field.gap();
  const int d = g.dim;
  double cg = 0.0, ch = 0.0;
  for (int i = 0; i < samples; ++i) {
    // log-graded radii resolve the axis where the bounds are tight
    const double s = 0.5 * std::pow(1e-4, 1.0 - double(i) / (samples - 1)) * (i == 0 ? 0.0 : 1.0);
    for (int az = 0; az < (d == 2 ? 2 : 4); ++az) {
      Eigen::VectorXd xp = Eigen::VectorXd::Zero(d - 1);
      if (d == 2) xp[0] = az == 0 ? s : -s;
      else {
        double phi = std::numbers::pi * az / 4;
        xp[0] = s * std::cos(phi), xp[1] = s * std::sin(phi);
      }
      const double s2 = s * s;
      const double lower = -g.rho + s2 / g.a;
      for (int j = 0; j <= samples; ++j) {
        Eigen::VectorXd x(d);
        x[0] = lower + (s2 - lower) * double(j) / samples;
        x.tail(d - 1) = xp;
        auto v = field.eval(x);
        const double base = g.rho + s2;
        cg = std::max(cg, v.grad.norm() * base);
        ch = std::max(ch, v.hess.norm() * base * base);
      }
    }
  }
  return {cg, ch};
}

}  // namespace stokeshom
