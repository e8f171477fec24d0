// Acceptance run: one PASS/FAIL line per criterion. Exits nonzero when a
// gating line fails.

#include "dcmg/config.hpp"
#include "oracles.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <random>
#include <string>

using namespace dcmg;

namespace {

const std::filesystem::path kScenarios = DCMG_SCENARIO_DIR;

int gating_failures = 0;
int target_failures = 0;

void report(const std::string& id, bool pass, const std::string& detail, bool gating = true) {
  std::printf("%-4s %s  %s%s\n", id.c_str(), pass ? "PASS" : "FAIL", detail.c_str(),
              gating ? "" : "  [target, non-gating]");
  std::fflush(stdout);
  if (!pass) ++(gating ? gating_failures : target_failures);
}

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

Scenario bundled(const char* name) { return load_scenario(kScenarios / name).scenario; }

bool all_finite(const Trace& trace) {
  for (const auto& rec : trace.records) {
    if (!rec.state.vec().allFinite()) return false;
  }
  return true;
}

void criterion_1() {
  const Scenario sc = bundled("table1.json");
  const auto t0 = std::chrono::steady_clock::now();
  const Equilibrium eq = solve_opf(sc.params, sc.bus_voltage_target, sc.duty_target, sc.balance);
  const double ms = 1e3 * seconds_since(t0);
  const bool ok = std::abs(eq.state.it(0) - 8.75) <= 0.02 && std::abs(eq.state.it(1) - 9.25) <= 0.02 &&
                  std::abs(eq.state.v(0) - 24.16) <= 0.01 && std::abs(eq.state.v(1) - 24.16) <= 0.01 &&
                  std::abs(eq.state.i_f() - 12.0) <= 1e-6 && std::abs(eq.state.vl() - 12.0) <= 1e-6;
  report("1", ok && ms < 1.0,
         fmt("equilibrium it=(%.5f, %.5f) v=(%.5f, %.5f) if=%.9f vl=%.9f in %.4f ms",
             eq.state.it(0), eq.state.it(1), eq.state.v(0), eq.state.v(1), eq.state.i_f(),
             eq.state.vl(), ms));
}

void criterion_2() {
  const Scenario sc = bundled("nominal_step.json");
  const auto t0 = std::chrono::steady_clock::now();
  const RunResult r = run_scenario(sc);
  const double secs = seconds_since(t0);
  const auto& recs = r.trace.records;
  double worst_rise = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 1; i < recs.size(); ++i) {
    worst_rise = std::max(worst_rise, recs[i].hamiltonian - recs[i - 1].hamiltonian);
  }
  const double e0 = (recs.front().state.vec() - r.equilibrium.state.vec()).norm();
  const double e1 = (recs.back().state.vec() - r.equilibrium.state.vec()).norm();
  const bool ok = sc.kind == ControllerKind::Nominal && recs.front().state.vb() == 20.0 &&
                  worst_rise <= 1e-9 && e1 < 1e-3 * e0 && recs.back().t >= 2.0 - 1e-12 &&
                  secs < 10.0;
  report("2", ok,
         fmt("nominal v_b=20 V recovery: max dH/step=%.3g, |e(T)|/|e(0)|=%.3g at T=%.1f s, %.2f s",
             worst_rise, e1 / e0, recs.back().t, secs));
}

struct CaseRuns {
  RunResult constant, poly1, poly2, expo;
  double expo_seconds = 0.0;
  Scenario expo_scenario;
};

CaseRuns run_cases() {
  CaseRuns c;
  const std::vector<Scenario> batch = {bundled("case1_constant.json"), bundled("case1_poly.json"),
                                       bundled("case2_poly.json")};
  auto results = run_batch(batch);
  c.constant = std::move(results[0]);
  c.poly1 = std::move(results[1]);
  c.poly2 = std::move(results[2]);
  c.expo_scenario = bundled("case2_expo.json");
  const auto t0 = std::chrono::steady_clock::now();
  c.expo = run_scenario(c.expo_scenario);
  c.expo_seconds = seconds_since(t0);
  return c;
}

void criterion_3(const RunResult& r) {
  const bool ok = !r.metrics.diverged && r.metrics.final_bus_offset > 0.1 &&
                  r.trace.records.back().t >= 20.0 - 1e-9;
  report("3", ok,
         fmt("case I constant: %s, final bus offset %.3f V, max current deviation %.1f%%",
             r.metrics.verdict.c_str(), r.metrics.final_bus_offset,
             r.metrics.max_current_deviation_pct));
}

void criterion_4(const RunResult& r) {
  const bool ok = r.metrics.verdict == "DIVERGED" && r.metrics.divergence_time < 20.0;
  report("4", ok,
         fmt("case I polynomial: %s at t=%.3f s", r.metrics.verdict.c_str(),
             r.metrics.divergence_time));
}

void criterion_5(const RunResult& r) {
  const bool ok = r.metrics.verdict == "BOUNDED-UNDER-ATTACK" && all_finite(r.trace) &&
                  r.trace.records.back().t >= 20.0 - 1e-9 && std::isfinite(r.metrics.bus_deviation_pct);
  report("5", ok,
         fmt("case II polynomial: %s, bus deviation %.2f%%, UUB radius %.3g", r.metrics.verdict.c_str(),
             r.metrics.bus_deviation_pct, r.metrics.uub_radius));
}

void criterion_6(const RunResult& r, double secs) {
  const Metrics& m = r.metrics;
  const bool gate = m.verdict == "BOUNDED-UNDER-ATTACK" && all_finite(r.trace) && m.uub_settled &&
                    std::isfinite(m.uub_radius) && secs < 60.0;
  report("6", gate,
         fmt("case II exponential: %s, UUB radius %.3g settled at t=%.2f s, %.1f s runtime",
             m.verdict.c_str(), m.uub_radius, m.settling_time, secs));
  report("6a", m.bus_deviation_pct < 12.0, fmt("bus deviation %.2f%% (< 12%%)", m.bus_deviation_pct),
         false);
  std::string peaks;
  for (double d : m.current_deviation_pct) peaks += fmt(" %.1f%%", d);
  report("6b", m.max_current_deviation_pct < 11.0,
         fmt("per-channel current peaks%s (< 11%%)", peaks.c_str()), false);
}

void criterion_7() {
  const auto p = MicrogridParams::table1();
  DampingGains damping;
  damping.source = {1.0, 1.0};
  damping.load = 0.1;
  const auto ph = build_ph(p, damping, 0.5);
  std::mt19937_64 rng(7);
  double worst = 0.0;
  for (int k = 0; k < 10000; ++k) {
    const GridState x = oracle::random_state(2, rng);
    const ControlVector u = oracle::random_input(2, rng);
    worst = std::max(worst, oracle::max_relative_discrepancy(circuit_vector_field(p, x, u).vec(),
                                                             ph_vector_field(ph, x, u).vec()));
  }
  report("7", worst < 1e-9, fmt("PH vs circuit, 10000 samples: max relative discrepancy %.3g", worst));
}

void criterion_8() {
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> coef(-10.0, 10.0), pos(0.0, 5.0), box(0.0, 10.0);
  int mismatched = 0, feasible = 0;
  double worst = 0.0;
  for (int k = 0; k < 10000; ++k) {
    ClfQp qp;
    qp.a = coef(rng);
    qp.b = coef(rng);
    qp.resilience = pos(rng);
    qp.decay = pos(rng);
    qp.u_nom = coef(rng) + 5.0;
    const double lo = box(rng), hi = box(rng);
    qp.u_min = std::min(lo, hi);
    qp.u_max = std::max(lo, hi) + 1e-3;
    const QpResult r = solve_clf_qp(qp);
    const auto g = oracle::grid_qp(qp);
    if (r.feasible != g.feasible) {
      ++mismatched;
    } else if (r.feasible) {
      ++feasible;
      worst = std::max(worst, std::abs((r.u - qp.u_nom) * (r.u - qp.u_nom) - g.objective));
    }
  }
  report("8", mismatched == 0 && worst < 1e-6,
         fmt("QP vs grid, 10000 instances (%d feasible): class mismatches %d, max objective gap %.3g",
             feasible, mismatched, worst));
}

void criterion_9() {
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> cap(0.1e-3, 1e-3), ind(0.05e-3, 0.5e-3), res(1e-3, 0.1),
      load(0.5, 10.0), vb(5.0, 400.0), duty(0.0, 1.0);
  std::uniform_int_distribution<std::size_t> count(1, 6);
  double worst = 0.0;
  for (int k = 0; k < 100; ++k) {
    MicrogridParams p;
    const std::size_t n = count(rng);
    for (std::size_t j = 0; j < n; ++j) p.sources.push_back({cap(rng), ind(rng), res(rng)});
    p.bus_capacitance = cap(rng);
    p.filter_inductance = ind(rng);
    p.load_capacitance = cap(rng);
    p.linear_load = load(rng);
    p.nonlinear_load = load(rng);
    const double v = vb(rng), d = duty(rng);
    const Equilibrium eq = solve_opf(p, v, d);
    const auto ref = opf_oracle(p, v, d);
    for (std::size_t j = 0; j < n; ++j) worst = std::max(worst, std::abs(eq.state.it(j) - ref[j]));
  }
  report("9", worst < 1e-8, fmt("OPF vs KKT oracle, 100 parameter sets: max |di| %.3g A", worst));
}

void criterion_10() {
  auto error = [](double h) {
    Eigen::VectorXd x(1);
    x[0] = 1.0;
    auto f = [](double, const Eigen::VectorXd& y) -> Eigen::VectorXd { return -y; };
    const int n = static_cast<int>(std::lround(1.0 / h));
    for (int k = 0; k < n; ++k) x = step_rk4(f, k * h, x, h);
    return std::abs(x[0] - std::exp(-1.0));
  };
  const double ratio = error(0.1) / error(0.05);
  report("10", std::abs(ratio - 16.0) <= 2.0, fmt("RK4 error ratio under halving %.3f", ratio));
}

void criterion_11(const RunResult& r, const Scenario& sc) {
  const auto& recs = r.trace.records;
  const std::size_t k = sc.attack.channels.size();
  bool monotone = true;
  for (std::size_t i = 1; i < recs.size(); ++i) {
    for (std::size_t j = 0; j < k; ++j) monotone = monotone && recs[i].rho[j] >= recs[i - 1].rho[j];
  }
  bool dominated = true;
  std::string detail;
  for (std::size_t j = 0; j < k; ++j) {
    const auto& ch = sc.attack.channels[j];
    const double gamma = ch.exp_scale * (ch.exp_offset + ch.exp_gain);
    // Fraction of e^rho the resilience term delivers: |b| / (|b| + e^{-alpha t}).
    std::vector<double> share;
    for (const auto& rec : recs) {
      if (rec.t < ch.start) continue;
      const double b = std::abs(lie_derivatives(sc.params, r.equilibrium, rec.state, j).b);
      share.push_back(b / (b + std::exp(-sc.controller.denominator_decay * rec.t)));
    }
    std::nth_element(share.begin(), share.begin() + static_cast<long>(share.size() / 2), share.end());
    const double c_bar = share.empty() ? 0.0 : share[share.size() / 2];
    double first = std::numeric_limits<double>::infinity();
    for (const auto& rec : recs) {
      if (rec.t < ch.start || !(c_bar > 0.0)) continue;
      if (rec.rho[j] > ch.exp_rate * (rec.t - ch.start) + std::log(gamma / c_bar)) {
        first = rec.t;
        break;
      }
    }
    dominated = dominated && std::isfinite(first);
    detail += fmt(" ch%zu: c=%.3f from t=%.3f s;", j + 1, c_bar, first);
  }
  report("11", monotone && dominated,
         fmt("rho nondecreasing=%s, dominance%s", monotone ? "yes" : "no", detail.c_str()));
}

}  // namespace

int main() {
  try {
    criterion_1();
    criterion_2();
    const CaseRuns cases = run_cases();
    criterion_3(cases.constant);
    criterion_4(cases.poly1);
    criterion_5(cases.poly2);
    criterion_6(cases.expo, cases.expo_seconds);
    criterion_7();
    criterion_8();
    criterion_9();
    criterion_10();
    criterion_11(cases.expo, cases.expo_scenario);
  } catch (const std::exception& e) {
    std::printf("acceptance aborted: %s\n", e.what());
    return 1;
  }
  std::printf("summary: %d gating failure(s), %d target miss(es)\n", gating_failures,
              target_failures);
  return gating_failures == 0 ? 0 : 1;
}
