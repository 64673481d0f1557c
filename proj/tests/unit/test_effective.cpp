#include <doctest.h>

#include <atomic>
#include <cmath>

#include "stokeshom/effective.hpp"
#include "stokeshom/errors.hpp"

using namespace stokeshom;

namespace {

Eigen::VectorXd vec(std::initializer_list<double> v) {
  Eigen::VectorXd x(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double e : v) x[i++] = e;
  return x;
}

ParticleConfig config(std::vector<Particle> ps, int dim = 2, double box = 4.0) {
  ParticleConfig c;
  c.dim = dim;
  c.box = box;
  c.delta = 0.1;
  c.particles = std::move(ps);
  return c;
}

struct Solved {
  ParticleConfig cfg;
  ViscosityField mu;
  std::vector<CellSolution> sols;
};

Solved solve(const ParticleConfig& c, int n, double kappa, SolverParams prm = {}) {
  Grid g{c.dim, n, c.box, BoundaryKind::Periodic};
  auto mu = make_viscosity(g, rasterize(c, g), kappa);
  return {c, mu, solve_basis(c, mu, prm)};
}

}  // namespace

TEST_SUITE("effective") {
  TEST_CASE("strain basis is orthonormal and trace free") {
    for (int d : {2, 3}) {
      auto b = strain_basis(d);
      CHECK(b.size() == static_cast<std::size_t>(d * (d + 1) / 2 - 1));
      for (std::size_t i = 0; i < b.size(); ++i) {
        CHECK(std::abs(b.elements[i].trace()) < 1e-15);
        CHECK((b.elements[i] - b.elements[i].transpose()).norm() == 0);
        for (std::size_t j = 0; j < b.size(); ++j) {
          double g = (b.elements[i].array() * b.elements[j].array()).sum();
          CHECK(g == doctest::Approx(i == j ? 1.0 : 0.0).scale(1.0).epsilon(1e-15));
        }
      }
    }
    auto b2 = strain_basis(2);
    CHECK(b2.elements[0](0, 0) == doctest::Approx(1 / std::sqrt(2.0)).scale(0));
    CHECK(b2.elements[1](0, 1) == doctest::Approx(1 / std::sqrt(2.0)).scale(0));
    CHECK_THROWS_AS(strain_basis(4), Error);
  }

  TEST_CASE("empty suspension is exact") {
    for (int d : {2, 3}) {
      auto s = solve(config({}, d), d == 2 ? 64 : 16, 1e4);
      auto ev = effective_viscosity(s.sols, s.mu, 0.0);
      const auto m = ev.energy.B.rows();
      CHECK((ev.energy.B - Eigen::MatrixXd::Identity(m, m)).norm() < 1e-10);
      CHECK((ev.flux.B - Eigen::MatrixXd::Identity(m, m)).norm() < 1e-10);
      auto eb = effective_b(s.sols, s.cfg, s.mu);
      CHECK(eb.pressure.components.norm() < 1e-10);
      CHECK(eb.boundary.components.norm() < 1e-10);
    }
  }

  TEST_CASE("unit contrast leaves b at zero") {
    auto s = solve(config({{vec({2, 2}), 0.6}}), 64, 1.0);
    auto eb = effective_b(s.sols, s.cfg, s.mu);
    CHECK(eb.pressure.components.norm() < 1e-10);
    CHECK(eb.boundary.components.norm() < 1e-10);
    auto ev = effective_viscosity(s.sols, s.mu, 0.07);
    CHECK((ev.energy.B - Eigen::MatrixXd::Identity(2, 2)).norm() < 1e-10);
  }

  TEST_CASE("two disks: lower bound, symmetry, estimator agreement") {
    SolverParams prm;
    auto s = solve(config({{vec({1.3, 2.1}), 0.5}, {vec({2.8, 1.2}), 0.4}}), 128, 1e3, prm);
    auto ev = effective_viscosity(s.sols, s.mu, 0.1);
    CHECK(ev.energy.min_eigenvalue() >= 1 - 1e-6);
    CHECK(ev.energy.asymmetry() <= 10 * prm.tol_mom);
    CHECK(ev.flux.asymmetry() <= 10 * prm.tol_mom);
    CHECK((ev.energy.B - ev.flux.B).norm() / ev.energy.B.norm() <= 10 * prm.tol_mom);
    for (const auto& sol : s.sols) {
      double e = cell_energy(s.mu, sol.state, sol.E);
      CHECK(e >= 1.0);
    }
  }

  TEST_CASE("inconsistent inputs are rejected") {
    auto c = config({{vec({2, 2}), 0.5}});
    auto a = solve(c, 32, 1e2);
    auto b = solve(c, 32, 1e3);
    std::vector<CellSolution> mixed{a.sols[0], b.sols[1]};
    CHECK_THROWS_AS(effective_viscosity(mixed, a.mu, 0.05), Error);
    auto other = config({{vec({2, 2}), 0.6}});
    CHECK_THROWS_AS(effective_b(a.sols, other, a.mu), Error);
  }

  TEST_CASE("kappa extrapolation") {
    const double a = 2.5, b = 3.0;
    auto ex = kappa_extrapolate({{1e2, a - b / 1e2}, {1e3, a - b / 1e3}, {1e4, a - b / 1e4}});
    CHECK(std::abs(ex.limit - a) < 1e-10);
    CHECK_FALSE(ex.non_monotone);
    auto c = kappa_extrapolate({{1e2, 1.7}, {1e3, 1.7}, {1e4, 1.7}});
    CHECK(c.limit == 1.7);
    CHECK(c.uncertainty == 0);
    auto nm = kappa_extrapolate({{1e2, 1.0}, {1e3, 1.2}, {1e4, 1.1}});
    CHECK(nm.non_monotone);
    CHECK(std::isfinite(nm.limit));
    CHECK_THROWS_AS(kappa_extrapolate({{1e2, 1.0}, {1e3, 1.1}}), Error);
    CHECK_THROWS_AS(kappa_extrapolate({{1e3, 1.0}, {1e2, 1.1}, {1e4, 1.2}}), Error);
  }

  TEST_CASE("extrapolated single-disk energy sits in the monotone bracket") {
    auto c = config({{vec({2, 2}), 0.64}});
    std::vector<std::pair<double, double>> v;
    for (double kappa : {1e2, 1e3, 1e4}) {
      auto s = solve(c, 128, kappa);
      v.emplace_back(kappa, cell_energy(s.mu, s.sols[0].state, s.sols[0].E));
    }
    CHECK(v[1].second >= v[0].second);
    CHECK(v[2].second >= v[1].second);
    auto ex = kappa_extrapolate(v);
    const double inc = v[2].second - v[1].second;
    CHECK(ex.limit >= v[2].second);
    CHECK(ex.limit <= v[2].second + 2 * inc);
  }

  TEST_CASE("Monte Carlo bookkeeping") {
    EnsembleSpec spec;
    MonteCarloOptions opts;
    opts.grid_n = 64;
    opts.kappas = {1e2, 1e3, 1e4};
    auto one = monte_carlo(spec, {5}, opts);
    REQUIRE(one.results.size() == 1);
    CHECK_FALSE(one.stderr_defined);
    CHECK((one.B_mean - one.results[0].B_extrapolated).norm() == 0);
    CHECK(one.B_stderr.norm() == 0);

    auto twin = monte_carlo(spec, {5, 5}, opts);
    CHECK(twin.stderr_defined);
    CHECK(twin.B_stderr.norm() == 0);
    CHECK(twin.b_stderr.norm() == 0);

    opts.fail_seeds = {6};
    opts.threads = 2;
    auto part = monte_carlo(spec, {5, 6, 7}, opts);
    CHECK(part.results.size() == 2);
    REQUIRE(part.failures.size() == 1);
    CHECK(part.failures[0].seed == 6);
    CHECK(part.results[0].seed == 5);
    CHECK(part.results[1].seed == 7);
    CHECK((part.results[0].B_extrapolated - one.results[0].B_extrapolated).norm() == 0);
    CHECK_THROWS_AS(monte_carlo(spec, {}, opts), Error);
  }

  TEST_CASE("parallel_for visits every index once") {
    std::vector<std::atomic<int>> hits(37);
    parallel_for(hits.size(), 4, [&](std::size_t i) { hits[i]++; });
    for (const auto& h : hits) CHECK(h.load() == 1);
  }
}
