#include <cmath>
#include <sstream>
#include <vector>

#include "doctest.h"
#include "oracles.hpp"
#include "tdmpc/commands.hpp"

using namespace tdmpc;

namespace {

struct Setup {
  ScenarioConfig cfg;
  LtiModel model;
  CostSpec cost;
  BoxSet box;
};

Setup setup(const std::string& name) {
  ScenarioConfig cfg = preset(name);
  LtiModel model = build_model(cfg);
  CostSpec cost = build_cost(cfg, model);
  BoxSet box = build_box(cfg);
  return {cfg, model, cost, box};
}

}  // namespace

TEST_SUITE("simulation") {
  TEST_CASE("small initial states follow the LQR loop") {
    const Setup s = setup("pendulum_optimal");
    const Design d = make_design(s.model, s.cost, s.box, 5);
    Vector x0(2);
    x0 << 1e-4, -2e-4;
    const Trajectory t = run_optimal(d, x0, 30, 1e-12);
    Vector x = x0;
    const Matrix acl = s.model.A() - s.model.B() * s.cost.K;
    double j = 0.0;
    for (int k = 0; k < 30; ++k) {
      const Vector u = -s.cost.K * x;
      CHECK((t.inputs[k] - u).norm() <= 1e-9 * std::max(1e-6, u.norm()) + 1e-14);
      j += x.dot(s.cost.Q * x) + u.dot(s.cost.R * u);
      x = acl * x;
    }
    CHECK((t.states[30] - x).norm() < 1e-12);
    j += x.dot(s.cost.P * x);
    CHECK(t.total_cost() == doctest::Approx(j).epsilon(1e-8));
  }

  TEST_CASE("stage costs and reconstruction") {
    const Setup s = setup("pendulum_certified");
    const Design d = make_design(s.model, s.cost, s.box, 2);
    const std::vector<int> budgets(s.cfg.T, 35);
    const Trajectory t = run_tdmpc(d, s.cfg.x0, Vector::Zero(2), s.cfg.T, budgets);
    REQUIRE(t.states.size() == static_cast<size_t>(s.cfg.T + 1));
    for (int k = 0; k < s.cfg.T; ++k) {
      const Vector& x = t.states[k];
      const Vector& u = t.inputs[k];
      CHECK(t.stage_costs[k] == doctest::Approx(x.dot(s.cost.Q * x) + u.dot(s.cost.R * u)).epsilon(1e-12));
      CHECK(s.box.contains(u));
      CHECK(t.iter_counts[k] == 35);
    }
    CHECK(t.terminal_cost == doctest::Approx(t.states.back().dot(s.cost.P * t.states.back())).epsilon(1e-12));
    CHECK(reconstruction_error(t, s.model) < 1e-12);
  }

  TEST_CASE("large budgets reproduce the optimal loop") {
    const Setup s = setup("pendulum_certified");
    const Design d = make_design(s.model, s.cost, s.box, 2);
    const std::vector<int> budgets(s.cfg.T, 400);
    const Trajectory td = run_tdmpc(d, s.cfg.x0, Vector::Zero(2), s.cfg.T, budgets);
    const Trajectory opt = run_optimal(d, s.cfg.x0, s.cfg.T, 1e-12);
    double worst = 0.0;
    for (int k = 0; k <= s.cfg.T; ++k) worst = std::max(worst, (td.states[k] - opt.states[k]).norm());
    CHECK(worst < 1e-6);
    CHECK(std::abs(incurred_suboptimality(td, opt)) < 1e-6);
  }

  TEST_CASE("pendulum golden numbers") {
    const ScenarioRun opt = run_scenario(preset("pendulum_optimal"));
    CHECK(opt.trajectory.total_cost() == doctest::Approx(7.452519704667729).epsilon(1e-9));
    CHECK(opt.trajectory.settling_step(0, 1e-3) == 62);
    const ScenarioRun td = run_scenario(preset("pendulum_tdmpc"));
    CHECK(td.trajectory.total_cost() == doctest::Approx(1320.2037).epsilon(1e-6));
    CHECK(td.trajectory.settling_step(0, 1e-3) == -1);
    CHECK(td.trajectory.cumulative_flops() == doctest::Approx(150.0 * (5000.0 * 225.0 + 30.0)).epsilon(1e-12));
    CHECK(td.trajectory.uncertified);
  }

  TEST_CASE("flop proxy per step") {
    const Setup s = setup("pendulum_certified");
    const Design d = make_design(s.model, s.cost, s.box, 2);
    std::vector<int> budgets(10);
    for (int k = 0; k < 10; ++k) budgets[k] = 35 + k;
    const Trajectory t = run_tdmpc(d, s.cfg.x0, Vector::Zero(2), 10, budgets);
    double total = 0.0;
    for (int k = 0; k < 10; ++k) {
      const double ref = budgets[k] * 4.0 + 2.0 * 2.0;
      CHECK(t.flop_proxy[k] == ref);
      CHECK(t.flop_h_term[k] == budgets[k] * 4.0);
      total += ref;
    }
    CHECK(t.cumulative_flops() == total);
  }

  TEST_CASE("a single-phase schedule is plain time-distributed MPC") {
    const Setup s = setup("pendulum_certified");
    const Design d = make_design(s.model, s.cost, s.box, 2);
    const std::vector<int> budgets(s.cfg.T, 35);
    const Trajectory td = run_tdmpc(d, s.cfg.x0, Vector::Zero(2), s.cfg.T, budgets);
    DimSchedule sched;
    sched.horizons = {2};
    sched.phase_budgets = {35};
    const Trajectory dim = run_dim_sumpc(s.model, s.cost, s.box, s.cfg.x0, sched, s.cfg.T);
    for (int k = 0; k <= s.cfg.T; ++k) CHECK((td.states[k] - dim.states[k]).norm() == 0.0);
    CHECK(dim.switches.empty());
  }

  TEST_CASE("transitions of the certified Dim-SuMPC preset") {
    const ScenarioRun run = run_scenario(preset("scalar_dimsumpc_certified"));
    const Trajectory& t = run.trajectory;
    REQUIRE(t.switches.size() == 2);
    CHECK(t.switches[0].k == 104);
    CHECK(t.switches[1].k == 105);
    for (const SwitchRecord& sw : t.switches) {
      CHECK(sw.V_prev <= sw.level + 1e-6);
      CHECK(sw.V_next <= sw.level + 1e-6);
      CHECK(t.horizon_at_step[sw.k] == sw.horizon_next);
      CHECK(t.horizon_at_step[sw.k - 1] == sw.horizon_prev);
    }
    CHECK_FALSE(t.uncertified);
  }

  TEST_CASE("warm start across a horizon switch") {
    const Setup s = setup("pendulum_certified");
    TimeDistributedController ctrl(s.model, s.cost, s.box, 4);
    Vector z(4);
    z << 0.1, 0.2, 0.3, 0.4;
    ctrl.set_iterate(z);
    ctrl.set_horizon(2, WarmStart::kTruncate);
    CHECK(ctrl.iterate()(0) == 0.1);
    CHECK(ctrl.iterate()(1) == 0.2);
    ctrl.set_horizon(4, WarmStart::kZeroPad);
    CHECK(ctrl.iterate()(0) == 0.1);
    CHECK(ctrl.iterate().tail(3).norm() == 0.0);
    ctrl.set_horizon(3, WarmStart::kCold);
    CHECK(ctrl.iterate().norm() == 0.0);
    CHECK(ctrl.horizon() == 3);
  }

  TEST_CASE("controller steps match the simulation") {
    const Setup s = setup("pendulum_certified");
    TimeDistributedController ctrl(s.model, s.cost, s.box, 2);
    const Design& d = ctrl.design();
    const std::vector<int> budgets(5, 35);
    const Trajectory t = run_tdmpc(d, s.cfg.x0, Vector::Zero(2), 5, budgets);
    Vector x = s.cfg.x0;
    for (int k = 0; k < 5; ++k) {
      const Vector u = ctrl.step(x, 35);
      CHECK((u - t.inputs[k]).norm() == 0.0);
      x = s.model.step(x, u);
    }
    CHECK(ctrl.last_flop_proxy() == 35.0 * 4.0 + 4.0);
    ctrl.reset();
    CHECK(ctrl.iterate().norm() == 0.0);
    CHECK_THROWS_AS(ctrl.step(x, 0), Error);
  }

  TEST_CASE("suboptimality requires matching runs") {
    const Setup s = setup("pendulum_certified");
    const Design d = make_design(s.model, s.cost, s.box, 2);
    const Trajectory a = run_optimal(d, s.cfg.x0, 20, 1e-10);
    const std::vector<int> budgets(20, 40);
    const Trajectory b = run_tdmpc(d, s.cfg.x0, Vector::Zero(2), 20, budgets);
    const std::vector<double> curve = cumulative_suboptimality_curve(b, a);
    REQUIRE(curve.size() == 21);
    CHECK(curve.back() == doctest::Approx(incurred_suboptimality(b, a)).epsilon(1e-12));
    const Trajectory c = run_optimal(d, s.cfg.x0 * 0.5, 20, 1e-10);
    try {
      incurred_suboptimality(b, c);
      FAIL("expected an error");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::kInvalidArgument);
    }
  }

  TEST_CASE("schedule validation") {
    DimSchedule s;
    s.horizons = {5, 5};
    s.switch_times = {3};
    s.phase_budgets = {10, 10};
    auto code = [&](int T) {
      try {
        validate_schedule(s, T);
      } catch (const Error& e) {
        return static_cast<int>(e.code());
      }
      return -1;
    };
    CHECK(code(10) == static_cast<int>(ErrorCode::kConfig));
    s.horizons = {5, 3};
    CHECK(code(10) == -1);
    s.switch_times = {};
    CHECK(code(10) == static_cast<int>(ErrorCode::kConfig));
    s.switch_times = {3};
    s.step_budgets = {1, 2};
    CHECK(code(10) == static_cast<int>(ErrorCode::kConfig));
  }

  TEST_CASE("uncertified budgets are refused unless allowed") {
    const Setup s = setup("scalar_certified");
    DimSchedule sched;
    sched.horizons = {3, 2};
    sched.switch_times = {5};
    sched.phase_budgets = {2, 2};
    try {
      run_dim_sumpc(s.model, s.cost, s.box, s.cfg.x0, sched, 20);
      FAIL("expected a refusal");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::kCertificate);
    }
    sched.allow_uncertified = true;
    const Trajectory t = run_dim_sumpc(s.model, s.cost, s.box, s.cfg.x0, sched, 20);
    CHECK(t.uncertified);
    CHECK(t.horizon_at_step[5] == 2);
  }

  TEST_CASE("CSV layout") {
    const Setup s = setup("scalar_certified");
    const Design d = make_design(s.model, s.cost, s.box, 3);
    const Trajectory opt = run_optimal(d, s.cfg.x0, 4, 1e-10);
    std::ostringstream out;
    write_trajectory_csv(out, opt, &opt, {"hello"});
    std::istringstream in(out.str());
    std::string line;
    std::getline(in, line);
    CHECK(line == "# hello");
    std::getline(in, line);
    CHECK(line == "k,x_1,u_1,V,psi,lyapunov,d_norm,ell_k,horizon,stage_cost,cum_cost,cum_suboptimality,flop_proxy,"
                  "wall_time_us");
    int rows = 0;
    while (std::getline(in, line)) ++rows;
    CHECK(rows == 5);
  }

  TEST_CASE("settling step") {
    Trajectory t;
    for (double v : {1.0, 0.5, 1e-4, 0.01, 1e-4, 0.0}) t.states.push_back(Vector::Constant(1, v));
    CHECK(t.settling_step(0, 1e-3) == 4);
    CHECK(t.settling_step(0, 2.0) == 0);
    t.states.push_back(Vector::Constant(1, 1.0));
    CHECK(t.settling_step(0, 1e-3) == -1);
  }
}
