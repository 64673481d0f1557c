#ifndef STOKESHOM_CUTOFF_HPP
#define STOKESHOM_CUTOFF_HPP

#include <Eigen/Dense>
#include <string>
#include <vector>

namespace stokeshom {

// Normalized gap geometry: inner parabola x1 = |x'|^2, outer x1 = -rho + |x'|^2/a.
struct ParabolicGap {
  double rho = 0.1;
  double a = 2.0;
  double delta = 0.5;
  int dim = 2;
  int sign = +1;

  void validate() const;
};

bool gamma_contains(const ParabolicGap& gap, const Eigen::VectorXd& x);

inline double cubic_h(double t) { return t * t * (3 - 2 * t); }
inline double cubic_h_prime(double t) { return 6 * t * (1 - t); }
inline double cubic_h_second(double t) { return 6 - 12 * t; }

struct CutoffValue {
  double w = 0.0;
  Eigen::VectorXd grad;
  Eigen::MatrixXd hess;
};

class CutoffField {
 public:
  explicit CutoffField(ParabolicGap gap);
  const ParabolicGap& gap() const { return gap_; }
  CutoffValue eval(const Eigen::VectorXd& x) const;

 private:
  ParabolicGap gap_;
};

enum class NormKind { Grad, Hess, Weighted };

const char* to_string(NormKind kind);
NormKind norm_kind_from_string(const std::string& s);

struct NormResult {
  double value = 0.0;
  double refined = 0.0;  // value at doubled resolution
  bool under_resolved = false;
};

// L^r norm over E = {x1 >= -1, |x'| <= 1/2}. The x1 integral is done in the
// interpolation variable t, the x' integral radially on log-graded rings.
NormResult norm_Lr(const CutoffField& field, double r, NormKind kind, int resolution = 64);

// Critical exponent of each kind and the predicted slope of log norm vs log rho.
double critical_exponent(int dim, NormKind kind);
double predicted_slope(int dim, double r, NormKind kind);
bool is_critical(int dim, double r, NormKind kind);

struct ScalingReport {
  int dim = 2;
  double r = 1.0;
  NormKind kind = NormKind::Grad;
  std::vector<double> rho;
  std::vector<double> norm;
  double fitted_slope = 0.0;
  double predicted_slope = 0.0;
  double abs_error = 0.0;
  bool critical = false;
  bool under_resolved = false;
  // critical branch only: R^2 of norm^r against |log rho|
  double log_fit_r2 = 0.0;
};

std::vector<ScalingReport> exponent_regression(const std::vector<int>& dims, const std::vector<double>& rs,
                                               NormKind kind, const std::vector<double>& rho_grid,
                                               double a = 2.0, int resolution = 64);

// max over the sample of |grad w| (rho + |x'|^2) and |hess w| (rho + |x'|^2)^2.
std::pair<double, double> pointwise_bound_constants(const CutoffField& field, int samples_per_axis);

// Ordinary least squares slope and R^2.
std::pair<double, double> linear_fit(const std::vector<double>& x, const std::vector<double>& y);

}  // namespace stokeshom

#endif
