#include <random>

#include "doctest.h"
#include "oracles.hpp"
#include "tdmpc/pgm.hpp"

using namespace tdmpc;

namespace {

struct Problem {
  LtiModel model;
  CostSpec cost;
  CondensedQp qp;
  SpectralData spectral;
  BoxSet box;
};

Problem random_problem(std::mt19937_64& rng, int n, int m, int N) {
  std::uniform_real_distribution<double> bound(0.5, 2.0);
  for (;;) {
    const Matrix a = oracle::random_matrix(rng, n, n, 1.2);
    const Matrix b = oracle::random_matrix(rng, n, m, 1.0);
    if (!is_stabilizable(a, b)) continue;
    LtiModel model(a, b);
    CostSpec cost = solve_dare(model, oracle::random_spd(rng, n), oracle::random_spd(rng, m));
    CondensedQp qp = build_condensed(model, cost, N);
    SpectralData spectral = compute_spectral(qp);
    Vector lo(m);
    Vector hi(m);
    for (int i = 0; i < m; ++i) {
      lo(i) = -bound(rng);
      hi(i) = bound(rng);
    }
    return {model, cost, qp, spectral, BoxSet(lo, hi)};
  }
}

}  // namespace

TEST_SUITE("pgm") {
  TEST_CASE("box projection clamps each block") {
    Vector lo(2);
    lo << -1, -2;
    Vector hi(2);
    hi << 1, 0.5;
    const BoxSet box(lo, hi);
    Vector nu(4);
    nu << 3, -3, -0.5, 0.2;
    Vector expected(4);
    expected << 1, -2, -0.5, 0.2;
    CHECK((box.project(nu) - expected).norm() == 0.0);
    CHECK(box.contains(expected));
    CHECK_FALSE(box.contains(nu));
    CHECK(box.upper_at(3) == 0.5);
    CHECK_THROWS_AS(box.project(Vector::Zero(3)), Error);
  }

  TEST_CASE("box must contain the origin") {
    CHECK_THROWS_AS(BoxSet(Vector::Constant(1, 0.1), Vector::Constant(1, 1.0)), Error);
    CHECK_THROWS_AS(BoxSet(Vector::Constant(1, -1.0), Vector::Constant(2, 1.0)), Error);
    CHECK(BoxSet::symmetric(2, 3.0).lower()(1) == -3.0);
  }

  TEST_CASE("one step follows the projected gradient formula") {
    std::mt19937_64 rng(12);
    const Problem p = random_problem(rng, 2, 2, 3);
    const Vector x = oracle::random_matrix(rng, 2, 1, 1.0);
    const Vector nu = oracle::random_matrix(rng, 6, 1, 1.0);
    const Vector grad = 2.0 * (p.qp.H * nu + p.qp.G * x);
    const double alpha = 1.0 / (p.spectral.lamH_min + p.spectral.lamH_max);
    Vector expected = nu - alpha * grad;
    for (int i = 0; i < 6; ++i) expected(i) = std::clamp(expected(i), p.box.lower_at(i), p.box.upper_at(i));
    CHECK((pgm_step(p.qp, p.spectral, x, nu, p.box) - expected).norm() < 1e-13);
    Vector twice = pgm_step(p.qp, p.spectral, x, pgm_step(p.qp, p.spectral, x, nu, p.box), p.box);
    CHECK((pgm_iterate(p.qp, p.spectral, x, nu, p.box, 2) - twice).norm() < 1e-14);
  }

  TEST_CASE("the step map contracts at rate eta") {
    std::mt19937_64 rng(13);
    for (int trial = 0; trial < 20; ++trial) {
      const Problem p = random_problem(rng, 2, 1 + trial % 2, 1 + trial % 3);
      const int nm = p.qp.size();
      const Vector x = oracle::random_matrix(rng, 2, 1, 1.0);
      const Vector a = oracle::random_matrix(rng, nm, 1, 2.0);
      const Vector b = oracle::random_matrix(rng, nm, 1, 2.0);
      const double lhs = (pgm_step(p.qp, p.spectral, x, a, p.box) - pgm_step(p.qp, p.spectral, x, b, p.box)).norm();
      CHECK(lhs <= p.spectral.eta * (a - b).norm() + 1e-12);
    }
  }

  TEST_CASE("traced iteration records shrinking steps") {
    std::mt19937_64 rng(14);
    const Problem p = random_problem(rng, 2, 1, 2);
    const Vector x = oracle::random_matrix(rng, 2, 1, 1.0);
    const PgmTrace trace = pgm_iterate_traced(p.qp, p.spectral, x, Vector::Zero(2), p.box, 10);
    REQUIRE(trace.step_norms.size() == 10);
    for (size_t i = 1; i < trace.step_norms.size(); ++i) {
      CHECK(trace.step_norms[i] <= p.spectral.eta * trace.step_norms[i - 1] + 1e-14);
    }
    CHECK((trace.nu - pgm_iterate(p.qp, p.spectral, x, Vector::Zero(2), p.box, 10)).norm() == 0.0);
  }

  TEST_CASE("solve_optimal agrees with KKT enumeration") {
    std::mt19937_64 rng(15);
    for (int trial = 0; trial < 40; ++trial) {
      const Problem p = random_problem(rng, 1 + trial % 2, 1 + (trial / 2) % 2, 1 + trial % 3);
      const Vector x = oracle::random_matrix(rng, p.qp.n, 1, 3.0);
      const Vector ref = active_set_enumerate(p.qp, x, p.box);
      for (OptimalMethod method : {OptimalMethod::kActiveSetPolish, OptimalMethod::kProjectedGradient}) {
        SolveStats stats;
        const Vector mu = solve_optimal(p.qp, p.spectral, x, p.box, 1e-12, method, &stats);
        CHECK((mu - ref).norm() <= 1e-6);
        CHECK(p.qp.cost(x, mu) == doctest::Approx(p.qp.cost(x, ref)).epsilon(1e-8));
        CHECK(fixed_point_residual(p.qp, p.spectral, x, mu, p.box) <= 1e-10);
      }
    }
  }

  TEST_CASE("unconstrained minimizer when the box is inactive") {
    std::mt19937_64 rng(16);
    Problem p = random_problem(rng, 2, 1, 3);
    const BoxSet wide = BoxSet::symmetric(1, 1e6);
    const Vector x = oracle::random_matrix(rng, 2, 1, 1.0);
    const Vector expected = -p.qp.H.ldlt().solve(p.qp.G * x);
    const ValueResult v = value_function(p.qp, p.spectral, x, wide);
    CHECK((v.mu - expected).norm() < 1e-9);
    const double v_ref = x.dot(p.qp.W * x) - (p.qp.G * x).dot(p.qp.H.ldlt().solve(p.qp.G * x));
    CHECK(v.V == doctest::Approx(v_ref).epsilon(1e-9));
  }

  TEST_CASE("active-set solver on a hand problem") {
    Matrix h(2, 2);
    h << 2, 0, 0, 1;
    Vector g(2);
    g << -10, 0.5;
    const BoxSet box = BoxSet::symmetric(2, 1.0);
    int its = 0;
    const Vector nu = box_qp_active_set(h, g, box, Vector::Zero(2), &its);
    // min nu'H nu + 2 nu'g: unconstrained (5, -0.5), first coordinate clipped to 1.
    CHECK(nu(0) == doctest::Approx(1.0));
    CHECK(nu(1) == doctest::Approx(-0.5));
    CHECK(its >= 1);
  }

  TEST_CASE("enumeration refuses large problems") {
    std::mt19937_64 rng(17);
    const Problem p = random_problem(rng, 1, 1, 13);
    try {
      active_set_enumerate(p.qp, Vector::Ones(1), p.box);
      FAIL("expected an error");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::kInvalidArgument);
    }
  }
}
