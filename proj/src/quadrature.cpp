#include "stokeshom/quadrature.hpp"

#include <Eigen/Eigenvalues>
#include <cmath>

namespace stokeshom {

GaussRule gauss_legendre(int n, double lo, double hi) {
  Eigen::MatrixXd J = Eigen::MatrixXd::Zero(n, n);
  for (int k = 1; k < n; ++k) J(k, k - 1) = J(k - 1, k) = k / std::sqrt(4.0 * k * k - 1.0);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(J);
  GaussRule rule;
  const double half = 0.5 * (hi - lo);
  for (int k = 0; k < n; ++k) {
    const double v0 = es.eigenvectors()(0, k);
    rule.nodes.push_back(lo + half * (es.eigenvalues()[k] + 1.0));
    rule.weights.push_back(half * 2.0 * v0 * v0);
  }
  return rule;
}

}  // namespace stokeshom
