#include <cmath>
#include <vector>

#include "doctest.h"
#include "oracles.hpp"
#include "tdmpc/scenario.hpp"

using namespace tdmpc;

namespace {

ContractionConstants synthetic() { return {0.5, 1.0, 2.0, 1.0, 0.5}; }

struct Built {
  LtiModel model;
  CostSpec cost;
  BoxSet box;
  Design design;
  CertificateSet cert;
};

Built build(const std::string& name, int horizon) {
  const ScenarioConfig cfg = preset(name);
  LtiModel model = build_model(cfg);
  CostSpec cost = build_cost(cfg, model);
  BoxSet box = build_box(cfg);
  Design design = make_design(model, cost, box, horizon);
  CertificateSet cert = compute_certificates(model, cost, design.qp, design.spectral, box);
  return {model, cost, box, design, cert};
}

}  // namespace

TEST_SUITE("certificates") {
  TEST_CASE("tau interval and rate on the synthetic constants") {
    // q = 0.5^3 = 1/8: interval (1 / (1 - q omega), (1 - beta) / (q kappa)) = (4/3, 4).
    const TauChoice t = select_tau(synthetic(), 3);
    CHECK(t.lo == doctest::Approx(4.0 / 3.0).epsilon(1e-12));
    CHECK(t.hi == doctest::Approx(4.0).epsilon(1e-12));
    const double tau_ref = oracle::tau_root(0.5, 1.0, 2.0, 1.0, 0.5, 3);
    CHECK(tau_ref == doctest::Approx(2.0).epsilon(1e-14));
    CHECK(t.tau == doctest::Approx(tau_ref).epsilon(1e-10));
    CHECK(t.epsilon == doctest::Approx(0.75).epsilon(1e-10));
    CHECK(epsilon_for(synthetic(), 2.0, 3) == doctest::Approx(0.75).epsilon(1e-14));
    CHECK(t.epsilon <= epsilon_for(synthetic(), 1.5, 3));
    CHECK(t.epsilon <= epsilon_for(synthetic(), 3.5, 3));
  }

  TEST_CASE("tau minimizes the rate over the interval") {
    for (int ell : {3, 4, 6, 10}) {
      const TauChoice t = select_tau(synthetic(), ell);
      CHECK(t.tau > t.lo);
      CHECK(t.tau < t.hi);
      for (int i = 1; i < 200; ++i) {
        const double tau = t.lo + (t.hi - t.lo) * i / 200.0;
        CHECK(t.epsilon <= epsilon_for(synthetic(), tau, ell) + 1e-12);
      }
      CHECK(t.epsilon < 1.0);
    }
  }

  TEST_CASE("empty interval is refused") {
    // q = 1/4 at ell = 2: sigma / (1 - q omega) = 2 = (1 - beta) / (q kappa). Interval empty.
    try {
      select_tau(synthetic(), 2);
      FAIL("expected a refusal");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::kCertificate);
      CHECK(std::string(e.what()).find("ell*") != std::string::npos);
    }
  }

  TEST_CASE("ell* is the boundary of the tau interval") {
    const ContractionConstants k = synthetic();
    const double ell_star = (std::log(1.0 - k.beta) - std::log(k.sigma * k.kappa + k.omega * (1.0 - k.beta))) /
                            std::log(k.eta);
    CHECK(ell_star == doctest::Approx(2.0).epsilon(1e-12));
  }

  TEST_CASE("switch time from the closed form") {
    // [log(1 * 1) - 2 log(1 * 4)] / (2 log 0.5) = 2.
    CHECK(switch_time_raw(1.0, 1.0, 1.0, 4.0, 0.5) == doctest::Approx(2.0).epsilon(1e-14));
    CHECK(switch_time_raw(1.0, 1.0, 1.0, 0.5, 0.5) < 0.0);
  }

  TEST_CASE("pendulum N=2 constants") {
    const Built b = build("pendulum_certified", 2);
    const CertificateSet& c = b.cert;
    const double lam_wq = weighted_eig_bounds(b.design.qp.W, b.cost.Q).lo;
    CHECK(c.beta == doctest::Approx(std::sqrt(1.0 - lam_wq)).epsilon(1e-12));
    CHECK(c.sigma == doctest::Approx(spectral_norm(sym_sqrt(b.design.qp.W) * b.model.B())).epsilon(1e-10));
    // Largest sublevel set of ||x||_P^2 on which the LQR input stays in the box.
    const double kmax = oracle::ellipse_max_abs(b.cost.K.row(0), b.cost.P);
    const double u = std::min(b.box.upper()(0), -b.box.lower()(0));
    CHECK(c.c_terminal == doctest::Approx(u * u / (kmax * kmax)).epsilon(1e-8));
    const Eigen::SelfAdjointEigenSolver<Matrix> ep(b.cost.P);
    const Eigen::SelfAdjointEigenSolver<Matrix> eq(b.cost.Q);
    const double d_ref = c.c_terminal * eq.eigenvalues().minCoeff() / ep.eigenvalues().maxCoeff();
    CHECK(c.d == doctest::Approx(d_ref).epsilon(1e-12));
    CHECK(c.r_N == doctest::Approx(std::sqrt(2.0 * d_ref + c.c_terminal)).epsilon(1e-12));
    const double ell_ref = (std::log(1.0 - c.beta) - std::log(c.sigma * c.kappa + c.omega * (1.0 - c.beta))) /
                           std::log(c.eta);
    CHECK(c.ell_star == doctest::Approx(ell_ref).epsilon(1e-12));
    CHECK(c.ell_star == doctest::Approx(33.2377401003).epsilon(1e-9));
    CHECK(minimum_certified_budget(c) == 34);
    CHECK(auto_budget(c) == 35);
  }

  TEST_CASE("budget part of the certificate") {
    const Built b = build("pendulum_certified", 2);
    const CertificateSet c = with_budget(b.cert, 35, 35);
    REQUIRE(c.has_budget);
    CHECK(c.tau > c.tau_lo);
    CHECK(c.tau < c.tau_hi);
    const double q = std::pow(c.eta, 35);
    const double tau_ref = oracle::tau_root(c.beta, c.sigma, c.omega, c.kappa, c.eta, 35);
    CHECK(c.tau == doctest::Approx(tau_ref).epsilon(1e-9));
    CHECK(c.epsilon == doctest::Approx(std::max(c.beta + c.tau * c.kappa * q, (c.sigma + c.tau * q * c.omega) / c.tau))
                           .epsilon(1e-12));
    CHECK(c.epsilon < 1.0);
    CHECK(c.h0 == doctest::Approx(1.0 + c.tau * q * c.L * c.norm_W_inv_sqrt).epsilon(1e-12));
    CHECK(c.c_delta_mu == doctest::Approx(std::max(1.0 / c.tau, c.norm_H_inv_sqrt * c.norm_H_inv_sqrt_G_P_inv_sqrt))
                            .epsilon(1e-12));
    CHECK(c.b0 == doctest::Approx(c.c_delta_mu * c.h0).epsilon(1e-12));
    CHECK(epsilon_rate(c, 35) == doctest::Approx(c.epsilon).epsilon(1e-12));
    CHECK(epsilon_rate(c, 80) <= c.epsilon);
    CHECK_THROWS_AS(epsilon_rate(c, 34), Error);
    CHECK_THROWS_AS(with_budget(b.cert, 33, 33), Error);
  }

  TEST_CASE("pendulum N=15 with l=5000 is refused") {
    const Built b = build("pendulum_tdmpc", 15);
    CHECK(b.cert.ell_star == doctest::Approx(4483666.6).epsilon(1e-6));
    try {
      select_tau(contraction_constants(b.cert), 5000);
      FAIL("expected a refusal");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::kCertificate);
    }
  }

  TEST_CASE("region membership") {
    const Built b = build("pendulum_certified", 2);
    const CertificateSet c = with_budget(b.cert, 35, 35);
    const Vector x = Vector::Zero(2);
    const RegionStatus at_origin = region_membership(c, b.design.qp, b.design.spectral, x, Vector::Zero(2), b.box);
    CHECK(at_origin.in_gamma);
    CHECK(at_origin.in_sigma);
    CHECK(at_origin.gamma == Membership::kInside);
    Vector far(2);
    far << 5.0, 5.0;
    const RegionStatus outside = region_membership(c, b.design.qp, b.design.spectral, far, Vector::Zero(2), b.box);
    CHECK_FALSE(outside.in_gamma);
    CHECK(outside.gamma == Membership::kOutside);
  }

  TEST_CASE("bound sequences") {
    const Built b = build("pendulum_certified", 2);
    const CertificateSet c = with_budget(b.cert, 35, 35);
    const std::vector<int> schedule(10, 35);
    const double x0w = 0.7;
    const double e = c.epsilon;
    CHECK(bound_delta_mu(c, x0w, schedule, 0) == doctest::Approx(c.b0 * x0w + c.c_delta_mu * x0w).epsilon(1e-12));
    CHECK(bound_delta_mu(c, x0w, schedule, 3) ==
          doctest::Approx(c.b0 * x0w * std::pow(e, 3) + c.c_delta_mu * x0w * std::pow(c.beta, 3)).epsilon(1e-12));
    CHECK(bound_state(c, x0w, schedule, 2) ==
          doctest::Approx(c.h0 * c.norm_P_inv_sqrt * x0w * std::pow(e, 3)).epsilon(1e-12));
    const SuboptimalityBound s = bound_suboptimality(c, x0w, schedule, 9);
    double sum = 0.0;
    for (int k = 0; k <= 9; ++k) sum += std::pow(e, 2 * k);
    CHECK(s.finite_sum == doctest::Approx(c.cbar * x0w * x0w * sum).epsilon(1e-12));
    CHECK(s.geometric == doctest::Approx(c.cbar * x0w * x0w / (1.0 - e * e)).epsilon(1e-12));
    CHECK(s.finite_sum <= s.geometric);
  }

  TEST_CASE("bound report") {
    const BoundReport ok = make_bound_report(BoundKind::kStateNorm, {1.0, 2.0, 3.0}, {0.5, 2.0, 1.0});
    CHECK(ok.satisfied);
    CHECK(ok.margin == doctest::Approx(0.0));
    CHECK(ok.first_violation == -1);
    const BoundReport bad = make_bound_report(BoundKind::kStateNorm, {1.0, 2.0, 3.0}, {0.5, 2.1, 4.0});
    CHECK_FALSE(bad.satisfied);
    CHECK(bad.first_violation == 1);
    CHECK(bad.margin == doctest::Approx(-1.0));
    CHECK(std::string(to_string(BoundKind::kDimSumpc)).size() > 0);
  }

  TEST_CASE("a corrupted rate makes the state bound fail") {
    // Negative control: constants that certify a much faster rate must flag a violation on a real run.
    const Built b = build("pendulum_certified", 2);
    CertificateSet c = with_budget(b.cert, 35, 35);
    const ScenarioConfig cfg = preset("pendulum_certified");
    const std::vector<int> budgets(cfg.T, 35);
    const Trajectory traj = run_tdmpc(b.design, cfg.x0, Vector::Zero(b.design.qp.size()), cfg.T, budgets);
    const double x0w = std::sqrt(cfg.x0.dot(b.design.qp.W * cfg.x0));
    auto check = [&](const CertificateSet& cc) {
      std::vector<double> th;
      std::vector<double> em;
      for (int k = 0; k < 20; ++k) {
        th.push_back(bound_state(cc, x0w, budgets, k));
        em.push_back(traj.states[k].norm());
      }
      return make_bound_report(BoundKind::kStateNorm, th, em);
    };
    CHECK(check(c).satisfied);
    c.beta = 0.1;
    c.sigma = 0.01;
    c.eta = 0.01;
    CHECK(epsilon_rate(c, 35) < 0.2);
    CHECK_FALSE(check(c).satisfied);
  }
}
