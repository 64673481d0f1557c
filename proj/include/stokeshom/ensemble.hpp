#ifndef STOKESHOM_ENSEMBLE_HPP
#define STOKESHOM_ENSEMBLE_HPP

#include <Eigen/Dense>
#include <cstdint>
#include <limits>
#include <vector>

namespace stokeshom {

struct Particle {
  Eigen::VectorXd center;
  double radius = 0.0;
};

// Realization of the inclusion set. periodic == true means the cell [0, box)^d
// is repeated; otherwise particles live in R^d and `box` is informative only.
struct ParticleConfig {
  int dim = 2;
  double box = 1.0;
  bool periodic = true;
  double delta = 0.1;
  std::uint64_t seed = 0;
  std::vector<Particle> particles;

  std::size_t size() const { return particles.size(); }
  double volume_fraction() const;
};

// Checks the hardcore, radius and diameter invariants; throws InvalidParameter.
void validate_config(const ParticleConfig& config);

struct Law {
  enum class Kind { Constant, Uniform, LogUniform };
  Kind kind = Kind::Constant;
  double lo = 0.0;
  double hi = 0.0;

  static Law constant(double v) { return {Kind::Constant, v, v}; }
  static Law uniform(double lo, double hi) { return {Kind::Uniform, lo, hi}; }
  static Law log_uniform(double lo, double hi) { return {Kind::LogUniform, lo, hi}; }
};

struct Target {
  enum class Kind { Count, Fraction };
  Kind kind = Kind::Count;
  double value = 0.0;

  static Target count(std::size_t n) { return {Kind::Count, static_cast<double>(n)}; }
  static Target fraction(double phi) { return {Kind::Fraction, phi}; }
};

// Jamming fractions of RSA for equal disks / balls.
double rsa_jamming_fraction(int dim);

struct RsaOptions {
  double delta = 0.1;
  std::size_t max_attempts = 2000000;
};

// Periodized random sequential adsorption. A proposal is rejected unless its
// gap to every accepted particle exceeds its own draw from min_gap_law.
ParticleConfig generate_rsa(std::uint64_t seed, int dim, double box, Target target,
                            Law radius_law, Law min_gap_law, RsaOptions opts = {});

// Displacement from a to b, minimum image if periodic.
Eigen::VectorXd separation(const ParticleConfig& config, const Eigen::VectorXd& a,
                           const Eigen::VectorXd& b);
double surface_distance(const ParticleConfig& config, std::size_t n, std::size_t m);
double distance_to_particle(const ParticleConfig& config, std::size_t n,
                            const Eigen::VectorXd& x);

// Half distance to the nearest other particle (own periodic images included).
double rho_circ(const ParticleConfig& config, std::size_t n, std::size_t* nearest = nullptr);

bool in_neighborhood(const ParticleConfig& config, std::size_t n, const Eigen::VectorXd& x);

struct ContactSite {
  Eigen::VectorXd point;
  Eigen::MatrixXd rotation;
  double a1 = 0.0;
  double a2 = 0.0;
  double rho = 0.0;
};

struct GapRecord {
  std::size_t index = 0;
  double rho_circ = 0.0;
  double rho_refined = 0.0;
  std::size_t nearest = 0;
  std::vector<ContactSite> contact_sites;
};

struct GapSampling {
  int boundary_points = 0;  // 0 selects 256 (d=2) or 1024 (d=3)
  int surface_points = 64;  // samples per parabola profile
  int bisection_steps = 40;
  // Optional bounded window [0, domain_side]^d intersected with the neighborhood.
  double domain_side = 0.0;
};

GapRecord rho_refined(const ParticleConfig& config, std::size_t n, const GapSampling& sampling = {});
std::vector<GapRecord> gap_records(const ParticleConfig& config, const GapSampling& sampling = {});

double mu_r(double rho, double r, int dim);

// Lower set {n : I_n ⊂ [0, side/eps]^d, dist(I_n, boundary) >= delta}.
std::vector<std::size_t> select_particles(const ParticleConfig& config, double eps, double side = 1.0);

struct MomentReport {
  double gamma = 0.0;
  double value = 0.0;
  bool zero_gap = false;
  std::vector<std::size_t> selection;
  std::vector<double> contributions;
  double lambda = std::numeric_limits<double>::quiet_NaN();
  std::vector<double> mu_values;
};

// eps^d * sum over the selection of rho_n^{-gamma}; rho indexed by particle.
MomentReport moment_statistic(const ParticleConfig& config, double eps, double side, double gamma,
                              const std::vector<double>& rho);
MomentReport moment_sum(const std::vector<double>& rho_selected, double eps, int dim, double gamma);

// (|D| + sum over particles meeting D of mu_r(rho_n)^p)^{1/p}, D = [lo, hi]^d.
double lambda_statistic(const ParticleConfig& config, const std::vector<double>& rho,
                        const Eigen::VectorXd& lo, const Eigen::VectorXd& hi, double r, double p,
                        std::vector<double>* mu_values = nullptr);

// Gamma used for the moment condition: 3/2 for d <= 3, d/2 - 1 above.
double moment_gamma(int dim);

// Tile a periodic config onto [0, copies*box)^d as a non-periodic config.
ParticleConfig tile(const ParticleConfig& config, int copies);

}  // namespace stokeshom

#endif
