#include "stokeshom/ensemble.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "stokeshom/errors.hpp"

namespace stokeshom {

namespace {

// mt19937_64 with an explicit 53-bit mapping; std::uniform_real_distribution
// is not specified bit-for-bit across standard libraries.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}
  double uniform() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

 private:
  std::mt19937_64 gen_;
};

double draw(const Law& law, Rng& rng) {
  switch (law.kind) {
    case Law::Kind::Constant: return law.lo;
    case Law::Kind::Uniform: return rng.uniform(law.lo, law.hi);
    case Law::Kind::LogUniform:
      return std::exp(rng.uniform(std::log(law.lo), std::log(law.hi)));
  }
  return law.lo;
}

double ball_volume(int dim, double r) {
  return dim == 2 ? std::numbers::pi * r * r : 4.0 / 3.0 * std::numbers::pi * r * r * r;
}

double wrap(double v, double L) {
  v = std::fmod(v, L);
  return v < 0 ? v + L : v;
}

// Uniform bins over the periodic cell; each query visits the nearest image of
// every particle at most once.
class CellList {
 public:
  CellList(const ParticleConfig& config, double cell) : config_(config) {
    nb_ = std::max(1, static_cast<int>(std::floor(config.box / cell)));
    size_ = config.box / nb_;
    int total = 1;
    for (int k = 0; k < config.dim; ++k) total *= nb_;
    bins_.assign(total, {});
    for (std::size_t n = 0; n < config.size(); ++n) bins_[bin_of(config.particles[n].center)].push_back(n);
  }

  template <class F>
  void for_each_within(const Eigen::VectorXd& x, double radius, F&& f) const {
    const int d = config_.dim;
    int K = static_cast<int>(std::ceil(radius / size_));
    if (2 * K + 1 >= nb_) {
      for (const auto& b : bins_)
        for (std::size_t n : b) f(n);
      return;
    }
    std::vector<int> base(d), off(d, -K);
    for (int k = 0; k < d; ++k) base[k] = std::min(nb_ - 1, static_cast<int>(wrap(x[k], config_.box) / size_));
    while (true) {
      int idx = 0;
      for (int k = d - 1; k >= 0; --k) idx = idx * nb_ + ((base[k] + off[k]) % nb_ + nb_) % nb_;
      for (std::size_t n : bins_[idx]) f(n);
      int k = 0;
      while (k < d && ++off[k] > K) off[k++] = -K;
      if (k == d) break;
    }
  }

 private:
  int bin_of(const Eigen::VectorXd& c) const {
    int idx = 0;
    for (int k = config_.dim - 1; k >= 0; --k)
      idx = idx * nb_ + std::min(nb_ - 1, static_cast<int>(wrap(c[k], config_.box) / size_));
    return idx;
  }

  const ParticleConfig& config_;
  int nb_ = 1;
  double size_ = 1.0;
  std::vector<std::vector<std::size_t>> bins_;
};

double max_radius(const ParticleConfig& config) {
  double r = 0.0;
  for (const auto& p : config.particles) r = std::max(r, p.radius);
  return r;
}

struct Obstacle {
  Eigen::VectorXd center;
  double radius;
};

// Particles (as concrete positions near particle n) whose surface lies within
// `reach` of I_n, own periodic images included.
std::vector<Obstacle> obstacles_near(const ParticleConfig& config, std::size_t n, double reach) {
  std::vector<Obstacle> out;
  const auto& pn = config.particles[n];
  for (std::size_t m = 0; m < config.size(); ++m) {
    if (m == n) continue;
    Eigen::VectorXd p = pn.center + separation(config, pn.center, config.particles[m].center);
    if ((p - pn.center).norm() - pn.radius - config.particles[m].radius < reach)
      out.push_back({p, config.particles[m].radius});
  }
  if (config.periodic && config.box - 2 * pn.radius < reach) {
    for (int k = 0; k < config.dim; ++k)
      for (int s : {-1, 1}) {
        Eigen::VectorXd p = pn.center;
        p[k] += s * config.box;
        out.push_back({p, pn.radius});
      }
  }
  return out;
}

Eigen::MatrixXd frame_from_axis(const Eigen::VectorXd& e1) {
  const int d = static_cast<int>(e1.size());
  Eigen::MatrixXd Q(d, d);
  Q.col(0) = e1;
  if (d == 2) {
    Q.col(1) << -e1[1], e1[0];
    return Q;
  }
  Eigen::Vector3d a = e1.head<3>();
  Eigen::Vector3d t = std::abs(a[0]) < 0.9 ? Eigen::Vector3d::UnitX() : Eigen::Vector3d::UnitY();
  Eigen::Vector3d b = (t - t.dot(a) * a).normalized();
  Q.col(1) = b;
  Q.col(2) = a.cross(b);
  return Q;
}

std::vector<Eigen::VectorXd> sphere_points(int dim, int count) {
  std::vector<Eigen::VectorXd> pts;
  pts.reserve(count);
  if (dim == 2) {
    for (int k = 0; k < count; ++k) {
      double a = 2 * std::numbers::pi * k / count;
      Eigen::VectorXd v(2);
      v << std::cos(a), std::sin(a);
      pts.push_back(v);
    }
    return pts;
  }
  const double golden = std::numbers::pi * (3.0 - std::sqrt(5.0));
  for (int k = 0; k < count; ++k) {
    double z = 1.0 - 2.0 * (k + 0.5) / count;
    double s = std::sqrt(std::max(0.0, 1 - z * z));
    Eigen::VectorXd v(3);
    v << s * std::cos(golden * k), s * std::sin(golden * k), z;
    pts.push_back(v);
  }
  return pts;
}

// Boundary of the model region {-rho + |x'|^2/a2 < x1 < |x'|^2/a1} ∩ B_delta in
// local coordinates (x1 first).
std::vector<Eigen::VectorXd> gamma_boundary(int dim, double rho, double a1, double a2, double delta,
                                            int m) {
  std::vector<Eigen::VectorXd> pts;
  const int azimuths = dim == 2 ? 2 : 16;
  auto push = [&](double x1, double s, double az) {
    Eigen::VectorXd y = Eigen::VectorXd::Zero(dim);
    y[0] = x1;
    if (dim == 2) {
      y[1] = az < 1 ? s : -s;
    } else {
      double a = 2 * std::numbers::pi * az / azimuths;
      y[1] = s * std::cos(a);
      y[2] = s * std::sin(a);
    }
    if (y.norm() < delta) pts.push_back(y);
  };
  for (int az = 0; az < azimuths; ++az) {
    for (int i = 0; i <= m; ++i) {
      double s = delta * i / m;
      push(-rho + s * s / a2, s, az);
      push(s * s / a1, s, az);
    }
    // spherical cap between the two profiles
    for (int i = 0; i <= 2 * m; ++i) {
      double phi = std::numbers::pi * i / (2 * m);
      double r = delta * (1 - 1e-9);
      double x1 = r * std::cos(phi), s = r * std::sin(phi);
      if (x1 > -rho + s * s / a2 && x1 < s * s / a1) push(x1, s, az);
      x1 = -x1;
      if (x1 > -rho + s * s / a2 && x1 < s * s / a1) push(x1, s, az);
    }
  }
  return pts;
}

}  // namespace

double ParticleConfig::volume_fraction() const {
  double v = 0.0;
  for (const auto& p : particles) v += ball_volume(dim, p.radius);
  return v / std::pow(box, dim);
}

void validate_config(const ParticleConfig& config) {
  if (config.dim < 2 || config.dim > 3) throw Error(ErrorKind::InvalidParameter, "dim must be 2 or 3");
  if (!(config.box > 0)) throw Error(ErrorKind::InvalidParameter, "box must be positive");
  if (!(config.delta > 0)) throw Error(ErrorKind::InvalidParameter, "delta must be positive");
  for (std::size_t n = 0; n < config.size(); ++n) {
    const auto& p = config.particles[n];
    if (p.center.size() != config.dim) throw Error(ErrorKind::InvalidParameter, "center dimension mismatch");
    if (p.radius < config.delta || p.radius > 1.0)
      throw Error(ErrorKind::InvalidParameter, "radius outside [delta, 1] for particle " + std::to_string(n));
    if (config.periodic && 2 * p.radius >= config.box)
      throw Error(ErrorKind::InvalidParameter, "particle overlaps its periodic image");
    for (std::size_t m = n + 1; m < config.size(); ++m)
      if (surface_distance(config, n, m) <= 0)
        throw Error(ErrorKind::InvalidParameter,
                    "particles " + std::to_string(n) + " and " + std::to_string(m) + " overlap");
  }
}

double rsa_jamming_fraction(int dim) { return dim == 2 ? 0.547 : 0.384; }

ParticleConfig generate_rsa(std::uint64_t seed, int dim, double box, Target target, Law radius_law,
                            Law min_gap_law, RsaOptions opts) {
  if (dim != 2 && dim != 3) throw Error(ErrorKind::InvalidParameter, "dim must be 2 or 3");
  if (!(box > 0)) throw Error(ErrorKind::InvalidParameter, "box must be positive");
  if (box < 4) throw Error(ErrorKind::InvalidParameter, "box must be at least 4");
  if (target.value < 0) throw Error(ErrorKind::InvalidParameter, "negative target");
  if (target.kind == Target::Kind::Fraction && target.value >= rsa_jamming_fraction(dim))
    throw Error(ErrorKind::InvalidParameter, "target fraction at or above the RSA jamming bound");
  if (radius_law.lo < opts.delta || radius_law.hi > 1.0 || radius_law.lo > radius_law.hi)
    throw Error(ErrorKind::InvalidParameter, "radius law must lie in [delta, 1]");
  if (min_gap_law.lo < 0 || min_gap_law.lo > min_gap_law.hi ||
      (min_gap_law.kind == Law::Kind::LogUniform && min_gap_law.lo <= 0))
    throw Error(ErrorKind::InvalidParameter, "min gap law must be nonnegative (positive if log-uniform)");

  ParticleConfig config;
  config.dim = dim;
  config.box = box;
  config.periodic = true;
  config.delta = opts.delta;
  config.seed = seed;

  Rng rng(seed);
  const double cell_volume = std::pow(box, dim);
  double volume = 0.0;
  std::size_t attempts = 0;
  while (true) {
    if (target.kind == Target::Kind::Count && config.size() >= static_cast<std::size_t>(target.value)) break;
    if (target.kind == Target::Kind::Fraction && volume >= target.value * cell_volume) break;
    if (attempts++ >= opts.max_attempts)
      throw Error(ErrorKind::TargetUnreachable,
                  "retry budget of " + std::to_string(opts.max_attempts) + " proposals exhausted at " +
                      std::to_string(config.size()) + " particles");
    Eigen::VectorXd c(dim);
    for (int k = 0; k < dim; ++k) c[k] = rng.uniform(0.0, box);
    const double r = draw(radius_law, rng);
    const double gap = draw(min_gap_law, rng);
    if (target.kind == Target::Kind::Fraction) {
      const double v = ball_volume(dim, r);
      if (volume + 0.5 * v > target.value * cell_volume) break;
    }
    if (box - 2 * r <= gap) continue;
    bool ok = true;
    for (const auto& p : config.particles) {
      if (separation(config, c, p.center).norm() - r - p.radius <= gap) {
        ok = false;
        break;
      }
    }
    if (!ok) continue;
    config.particles.push_back({c, r});
    volume += ball_volume(dim, r);
  }
  return config;
}

Eigen::VectorXd separation(const ParticleConfig& config, const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  Eigen::VectorXd d = b - a;
  if (config.periodic)
    for (int k = 0; k < d.size(); ++k) d[k] -= config.box * std::round(d[k] / config.box);
  return d;
}

double surface_distance(const ParticleConfig& config, std::size_t n, std::size_t m) {
  const auto& p = config.particles[n];
  const auto& q = config.particles[m];
  return separation(config, p.center, q.center).norm() - p.radius - q.radius;
}

double distance_to_particle(const ParticleConfig& config, std::size_t n, const Eigen::VectorXd& x) {
  const auto& p = config.particles[n];
  return std::max(0.0, separation(config, p.center, x).norm() - p.radius);
}

double rho_circ(const ParticleConfig& config, std::size_t n, std::size_t* nearest) {
  if (n >= config.size()) throw Error(ErrorKind::InvalidParameter, "particle index out of range");
  const auto& pn = config.particles[n];
  double best = std::numeric_limits<double>::infinity();
  std::size_t arg = n;
  if (config.periodic) best = config.box - 2 * pn.radius;
  if (config.size() == 1 && !config.periodic)
    throw Error(ErrorKind::NoNeighbor, "single particle in a non-periodic domain");

  if (!config.periodic) {
    for (std::size_t m = 0; m < config.size(); ++m) {
      if (m == n) continue;
      double g = surface_distance(config, n, m);
      if (g < best) best = g, arg = m;
    }
  } else if (config.size() > 1) {
    const double rmax = max_radius(config);
    CellList cells(config, std::max(2 * rmax, config.box / 64));
    double reach = 2 * rmax + config.box / 16;
    while (true) {
      cells.for_each_within(pn.center, reach, [&](std::size_t m) {
        if (m == n) return;
        double g = surface_distance(config, n, m);
        if (g < best || (g == best && m < arg)) best = g, arg = m;
      });
      // any particle not yet visited has gap above reach - r_n - rmax
      if (best <= reach - pn.radius - rmax || reach > config.box) break;
      reach *= 2;
    }
  }
  if (nearest) *nearest = arg;
  return 0.5 * best;
}

bool in_neighborhood(const ParticleConfig& config, std::size_t n, const Eigen::VectorXd& x) {
  const double dn = distance_to_particle(config, n, x);
  if (!(dn < config.delta)) return false;
  for (std::size_t m = 0; m < config.size(); ++m) {
    if (m == n) continue;
    if (!(dn < distance_to_particle(config, m, x))) return false;
  }
  if (config.periodic) {
    // the nearest image is used for I_n, so other images only matter in tiny cells
    const auto& p = config.particles[n];
    Eigen::VectorXd s = separation(config, p.center, x);
    for (int k = 0; k < config.dim; ++k)
      for (int sg : {-1, 1}) {
        Eigen::VectorXd t = s;
        t[k] += sg * config.box;
        if (!(dn < std::max(0.0, t.norm() - p.radius))) return false;
      }
  }
  return true;
}

GapRecord rho_refined(const ParticleConfig& config, std::size_t n, const GapSampling& sampling) {
  if (n >= config.size()) throw Error(ErrorKind::InvalidParameter, "particle index out of range");
  if (sampling.surface_points <= 0 || sampling.boundary_points < 0)
    throw Error(ErrorKind::InvalidParameter, "sampling density must be positive");
  const int d = config.dim;
  const double delta = config.delta;
  const auto& pn = config.particles[n];

  GapRecord rec;
  rec.index = n;
  rec.rho_circ = config.size() > 1 || config.periodic ? rho_circ(config, n, &rec.nearest) : delta;

  const double a1 = 2 * pn.radius;
  const double inv_a2 = 1.0 / a1 - delta;
  if (!(a1 >= delta) || !(inv_a2 > 0))
    throw Error(ErrorKind::FitFailure, "no admissible parabola radii for particle " + std::to_string(n) +
                                           " (needs 2 a_n delta < 1)");
  const double a2 = 1.0 / inv_a2;

  const auto obstacles = obstacles_near(config, n, 2 * delta);
  const double side = sampling.domain_side;
  const int count = sampling.boundary_points > 0 ? sampling.boundary_points : (d == 2 ? 256 : 1024);
  const auto normals = sphere_points(d, count);

  auto admissible = [&](const Eigen::VectorXd& x, const Eigen::MatrixXd& Q, double rho) {
    for (const auto& yl : gamma_boundary(d, rho, a1, a2, delta, sampling.surface_points)) {
      Eigen::VectorXd y = x + Q * yl;
      const double dn = std::max(0.0, (y - pn.center).norm() - pn.radius);
      for (const auto& o : obstacles)
        if (!(dn < std::max(0.0, (y - o.center).norm() - o.radius))) return false;
      if (side > 0)
        for (int k = 0; k < d; ++k)
          if (!(y[k] > 0 && y[k] < side)) return false;
    }
    return true;
  };

  std::vector<double> rho_x(count, delta);
  std::vector<Eigen::MatrixXd> frames(count);
  std::vector<Eigen::VectorXd> points(count);
  for (int i = 0; i < count; ++i) {
    points[i] = pn.center + pn.radius * normals[i];
    frames[i] = frame_from_axis(-normals[i]);
    if (obstacles.empty() && side <= 0) continue;
    if (admissible(points[i], frames[i], delta)) continue;
    double lo = 0.0, hi = delta;
    for (int it = 0; it < sampling.bisection_steps; ++it) {
      double mid = 0.5 * (lo + hi);
      (admissible(points[i], frames[i], mid) ? lo : hi) = mid;
    }
    rho_x[i] = lo;
  }

  int arg = static_cast<int>(std::min_element(rho_x.begin(), rho_x.end()) - rho_x.begin());
  rec.rho_refined = std::clamp(rho_x[arg], 0.0, rec.rho_circ);
  auto site = [&](int i) { return ContactSite{points[i], frames[i], a1, a2, rho_x[i]}; };
  if (d == 2) {
    for (int i = 0; i < count; ++i) {
      double prev = rho_x[(i + count - 1) % count], next = rho_x[(i + 1) % count];
      if (rho_x[i] < delta && rho_x[i] <= prev && rho_x[i] < next) rec.contact_sites.push_back(site(i));
    }
  } else if (rho_x[arg] < delta) {
    rec.contact_sites.push_back(site(arg));
  }
  return rec;
}

std::vector<GapRecord> gap_records(const ParticleConfig& config, const GapSampling& sampling) {
  std::vector<GapRecord> out;
  out.reserve(config.size());
  for (std::size_t n = 0; n < config.size(); ++n) out.push_back(rho_refined(config, n, sampling));
  return out;
}

double mu_r(double rho, double r, int dim) {
  if (!(rho > 0) || rho > 1) throw Error(ErrorKind::InvalidParameter, "rho must lie in (0, 1]");
  if (!(r >= 1)) throw Error(ErrorKind::InvalidParameter, "r must be at least 1");
  const double crit = (dim + 1) / 3.0;
  if (std::abs(r - crit) <= 1e-9) return std::pow(std::abs(std::log(rho)), 1.0 / r);
  if (r > crit) return std::pow(rho, (dim + 1) / (2 * r) - 1.5);
  return 1.0;
}

double moment_gamma(int dim) { return dim <= 3 ? 1.5 : dim / 2.0 - 1.0; }

std::vector<std::size_t> select_particles(const ParticleConfig& config, double eps, double side) {
  if (!(eps > 0) || eps > 1) throw Error(ErrorKind::InvalidParameter, "eps must lie in (0, 1]");
  const double S = side / eps;
  std::vector<std::size_t> sel;
  for (std::size_t n = 0; n < config.size(); ++n) {
    const auto& p = config.particles[n];
    bool keep = true;
    for (int k = 0; k < config.dim && keep; ++k)
      keep = p.center[k] - p.radius >= config.delta && S - p.center[k] - p.radius >= config.delta;
    if (keep) sel.push_back(n);
  }
  return sel;
}

MomentReport moment_sum(const std::vector<double>& rho_selected, double eps, int dim, double gamma) {
  if (!(eps > 0)) throw Error(ErrorKind::InvalidParameter, "eps must be positive");
  MomentReport rep;
  rep.gamma = gamma;
  const double scale = std::pow(eps, dim);
  double total = 0.0;
  for (double rho : rho_selected) {
    if (rho < 0) throw Error(ErrorKind::InvalidParameter, "negative gap");
    double c;
    if (rho == 0 && gamma > 0) {
      rep.zero_gap = true;
      c = std::numeric_limits<double>::infinity();
    } else {
      c = scale * std::pow(rho, -gamma);
    }
    rep.contributions.push_back(c);
    total += c;
  }
  rep.value = total;
  return rep;
}

MomentReport moment_statistic(const ParticleConfig& config, double eps, double side, double gamma,
                              const std::vector<double>& rho) {
  if (rho.size() != config.size()) throw Error(ErrorKind::InvalidParameter, "one gap per particle required");
  auto sel = select_particles(config, eps, side);
  std::vector<double> picked;
  picked.reserve(sel.size());
  for (std::size_t n : sel) picked.push_back(rho[n]);
  MomentReport rep = moment_sum(picked, eps, config.dim, gamma);
  rep.selection = std::move(sel);
  return rep;
}

double lambda_statistic(const ParticleConfig& config, const std::vector<double>& rho, const Eigen::VectorXd& lo,
                        const Eigen::VectorXd& hi, double r, double p, std::vector<double>* mu_values) {
  if (!(p >= 1)) throw Error(ErrorKind::InvalidParameter, "p must be at least 1");
  double vol = 1.0;
  for (int k = 0; k < config.dim; ++k) vol *= std::max(0.0, hi[k] - lo[k]);
  double sum = vol;
  for (std::size_t n = 0; n < config.size(); ++n) {
    const auto& q = config.particles[n];
    // box-ball intersection test via the closest point of the box
    Eigen::VectorXd c = q.center.cwiseMax(lo).cwiseMin(hi);
    if ((c - q.center).norm() >= q.radius) continue;
    double m = mu_r(rho[n], r, config.dim);
    if (mu_values) mu_values->push_back(m);
    sum += std::pow(m, p);
  }
  return std::pow(sum, 1.0 / p);
}

ParticleConfig tile(const ParticleConfig& config, int copies) {
  if (!config.periodic || copies < 1) throw Error(ErrorKind::InvalidParameter, "tile needs a periodic config");
  ParticleConfig out = config;
  out.periodic = false;
  out.box = config.box * copies;
  out.particles.clear();
  const int d = config.dim;
  std::vector<int> k(d, -1);
  while (true) {
    for (const auto& p : config.particles) {
      Eigen::VectorXd c = p.center;
      for (int i = 0; i < d; ++i) c[i] += k[i] * config.box;
      bool touches = true;
      for (int i = 0; i < d; ++i)
        touches = touches && c[i] + p.radius > 0 && c[i] - p.radius < out.box;
      if (touches) out.particles.push_back({c, p.radius});
    }
    int i = 0;
    while (i < d && ++k[i] > copies) k[i++] = -1;
    if (i == d) break;
  }
  return out;
}

}  // namespace stokeshom
