#ifndef STOKESHOM_QUADRATURE_HPP
#define STOKESHOM_QUADRATURE_HPP

#include <vector>

namespace stokeshom {

struct GaussRule {
  std::vector<double> nodes;
  std::vector<double> weights;
};

// Gauss-Legendre rule on [lo, hi] from the Golub-Welsch eigenproblem.
GaussRule gauss_legendre(int n, double lo = -1.0, double hi = 1.0);

}  // namespace stokeshom

#endif
