#include "dcmg/sim.hpp"

#include <doctest.h>

#include <cmath>

using namespace dcmg;

namespace {

Scenario short_nominal(double horizon) {
  Scenario sc;
  sc.kind = ControllerKind::Nominal;
  sc.horizon = horizon;
  return sc;
}

double rk4_decay_error(double h) {
  Eigen::VectorXd x(1);
  x[0] = 1.0;
  auto f = [](double, const Eigen::VectorXd& y) -> Eigen::VectorXd { return -y; };
  const int n = static_cast<int>(std::lround(1.0 / h));
  for (int k = 0; k < n; ++k) x = step_rk4(f, k * h, x, h);
  return std::abs(x[0] - std::exp(-1.0));
}

}  // namespace

TEST_CASE("rk4 basics") {
  Eigen::VectorXd x(2);
  x << 1.0, -2.0;
  auto zero = [](double, const Eigen::VectorXd& y) -> Eigen::VectorXd {
    return Eigen::VectorXd::Zero(y.size());
  };
  CHECK(step_rk4(zero, 0.0, x, 0.1) == x);

  Eigen::VectorXd y(1);
  y[0] = 1.0;
  auto decay = [](double, const Eigen::VectorXd& v) -> Eigen::VectorXd { return -v; };
  CHECK(std::abs(step_rk4(decay, 0.0, y, 0.1)[0] - 0.904837) < 1e-6);
  CHECK(std::abs(step_rk4(decay, 0.0, y, 0.1)[0] - std::exp(-0.1)) < 1e-7);
}

TEST_CASE("rk4 is fourth order") {
  const double ratio = rk4_decay_error(0.1) / rk4_decay_error(0.05);
  CHECK(ratio == doctest::Approx(16.0).epsilon(2.0 / 16.0));
}

TEST_CASE("scenario validation") {
  Scenario sc;
  CHECK_NOTHROW(sc.validate());
  sc.control_period = 1.5e-5;
  CHECK_THROWS_AS(sc.validate(), InputError);
  sc = Scenario{};
  sc.step = 2e-4;
  CHECK_THROWS_AS(sc.validate(), InputError);
  sc = Scenario{};
  sc.attack = AttackSpec::none(2);
  CHECK_THROWS_AS(sc.validate(), InputError);
  sc = Scenario{};
  sc.initial_overrides["vx"] = 1.0;
  CHECK_THROWS_AS(sc.validate(), InputError);
}

TEST_CASE("equilibrium is invariant under the nominal law") {
  const RunResult r = run_scenario(short_nominal(0.2));
  for (const auto& rec : r.trace.records) {
    CHECK((rec.state.vec() - r.equilibrium.state.vec()).norm() <= 1e-6);
  }
  CHECK(r.metrics.pre_attack_h_increases == 0);
  CHECK(r.metrics.verdict == "CONVERGED");
}

TEST_CASE("nominal law recovers from a bus sag with nonincreasing energy") {
  Scenario sc = short_nominal(0.5);
  sc.initial_overrides["vb"] = 20.0;
  const RunResult r = run_scenario(sc);
  const auto& recs = r.trace.records;
  for (std::size_t i = 1; i < recs.size(); ++i) {
    CHECK(recs[i].hamiltonian - recs[i - 1].hamiltonian <= 1e-9);
  }
  CHECK(r.metrics.verdict == "CONVERGED");
  const double e0 = (recs.front().state.vec() - r.equilibrium.state.vec()).norm();
  const double e1 = (recs.back().state.vec() - r.equilibrium.state.vec()).norm();
  CHECK(e1 < 1e-3 * e0);
}

TEST_CASE("trace layout") {
  Scenario sc = short_nominal(0.05);
  sc.log_interval = 1e-3;
  const RunResult r = run_scenario(sc);
  CHECK(r.trace.records.size() == 51);
  for (std::size_t i = 1; i < r.trace.records.size(); ++i) {
    CHECK(r.trace.records[i].t > r.trace.records[i - 1].t);
  }
  const auto& rec = r.trace.records.front();
  CHECK(rec.command.size() == 3);
  CHECK(rec.attack.size() == 3);
  CHECK(rec.clf.size() == 3);
  CHECK(rec.rho.size() == 3);
  CHECK(state_labels(2) == std::vector<std::string>{"v1", "it1", "v2", "it2", "vb", "if", "vl"});
}

TEST_CASE("determinism and parallel batch") {
  std::vector<Scenario> batch;
  for (int i = 0; i < 4; ++i) {
    Scenario sc;
    sc.attack = AttackSpec::exponential(0.1, 100 + static_cast<std::uint64_t>(i));
    for (auto& ch : sc.attack.channels) ch.start *= 0.01;
    sc.horizon = 0.3;
    batch.push_back(sc);
  }
  const auto serial = run_batch_serial(batch);
  const auto parallel = run_batch(batch);
  const auto again = run_scenario(batch[2]);
  REQUIRE(serial.size() == parallel.size());
  for (std::size_t i = 0; i < serial.size(); ++i) {
    const auto& a = serial[i].trace.records;
    const auto& b = parallel[i].trace.records;
    REQUIRE(a.size() == b.size());
    for (std::size_t k = 0; k < a.size(); ++k) {
      CHECK(a[k].state.vec() == b[k].state.vec());
      CHECK(a[k].rho == b[k].rho);
    }
  }
  CHECK(again.trace.records.back().state.vec() == serial[2].trace.records.back().state.vec());
  // Distinct seeds give distinct noise.
  CHECK(serial[0].trace.records.back().state.vec() != serial[1].trace.records.back().state.vec());
}

TEST_CASE("step-size robustness") {
  Scenario a = short_nominal(0.2);
  a.initial_overrides["vb"] = 22.0;
  Scenario b = a;
  b.step = 5e-6;
  const auto xa = run_scenario(a).trace.records.back().state.vec();
  const auto xb = run_scenario(b).trace.records.back().state.vec();
  CHECK((xa - xb).norm() / xa.norm() < 1e-6);
}

TEST_CASE("adaptive gains are nondecreasing") {
  Scenario sc;
  sc.attack = AttackSpec::exponential(0.1, 3);
  for (auto& ch : sc.attack.channels) ch.start *= 0.02;
  sc.horizon = 0.6;
  const RunResult r = run_scenario(sc);
  const auto& recs = r.trace.records;
  for (std::size_t i = 1; i < recs.size(); ++i) {
    for (std::size_t j = 0; j < 3; ++j) CHECK(recs[i].rho[j] >= recs[i - 1].rho[j]);
  }
  CHECK(recs.back().rho[2] > 0.0);
}

TEST_CASE("blow-up threshold stops the run and trims the metrics window") {
  Scenario sc = short_nominal(1.0);
  sc.attack = AttackSpec::constant(3, 5.0, 0.1);
  sc.divergence_threshold = 26.0;
  const RunResult r = run_scenario(sc);
  CHECK(r.metrics.diverged);
  CHECK(r.metrics.verdict == "DIVERGED");
  CHECK(r.metrics.divergence_time < 1.0);
  CHECK(r.trace.records.back().t == doctest::Approx(r.metrics.divergence_time));
  // The offending sample lies outside the evaluated window.
  const double vb_star = r.equilibrium.state.vb();
  for (const auto& rec : r.trace.records) {
    if (rec.t < r.metrics.divergence_time) {
      CHECK(100.0 * std::abs(rec.state.vb() - vb_star) / vb_star <=
            r.metrics.bus_deviation_pct + 1e-12);
    }
  }
}

TEST_CASE("metrics on synthetic traces") {
  Scenario sc;
  sc.attack = AttackSpec::constant(3, 0.0, 1.0);
  const Equilibrium eq = solve_opf(sc.params, 24.0, 0.5);

  Trace pinned;
  pinned.n_sources = 2;
  for (int k = 0; k <= 20; ++k) {
    TraceRecord rec;
    rec.t = 0.1 * k;
    rec.state = eq.state;
    rec.qp_feasible_mask = 0b111;
    pinned.records.push_back(rec);
  }
  Metrics m = compute_metrics(pinned, sc, eq);
  CHECK(m.bus_deviation_pct == 0.0);
  CHECK(m.max_current_deviation_pct == 0.0);
  CHECK(m.uub_radius == 0.0);
  CHECK(m.uub_settled);
  CHECK(m.qp_feasible_fraction == 1.0);
  CHECK(m.verdict == "CONVERGED");

  Trace dip = pinned;
  dip.records[15].state.vb() = 21.6;
  dip.records[3].state.vb() = 10.0;  // before the attack window
  m = compute_metrics(dip, sc, eq);
  CHECK(m.bus_deviation_pct == doctest::Approx(10.0));
  CHECK(m.window_start == 1.0);
  CHECK(m.settling_time == doctest::Approx(1.6));

  Trace growing = pinned;
  for (std::size_t k = 10; k < growing.records.size(); ++k) {
    growing.records[k].state.it(0) += 0.5 * static_cast<double>(k - 9);
  }
  m = compute_metrics(growing, sc, eq);
  CHECK(m.diverged);
  CHECK(m.verdict == "DIVERGED");
  CHECK(m.current_deviation_pct[0] > 0.0);
}

TEST_CASE("weighted error norm") {
  Scenario sc;
  const Equilibrium eq = solve_opf(sc.params, 24.0, 0.5);
  GridState x = eq.state;
  x.vb() += 2.0;
  CHECK(weighted_error_norm(sc.params, x, eq) ==
        doctest::Approx(std::sqrt(sc.params.bus_capacitance * 4.0)));
}
