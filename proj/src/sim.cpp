#include "dcmg/sim.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace dcmg {

namespace {

std::size_t ratio_steps(double numer, double denom, const char* what) {
  const double r = numer / denom;
  const double rounded = std::round(r);
  if (rounded < 1.0 || std::abs(r - rounded) > 1e-6 * std::max(1.0, r)) {
    throw InputError(std::string(what) + " must be a positive integer multiple of the step");
  }
  return static_cast<std::size_t>(rounded);
}

bool out_of_bounds(const Scenario& sc, const GridState& x) {
  if (!x.finite()) return true;
  if (x.vec().cwiseAbs().maxCoeff() > sc.divergence_threshold) return true;
  if (sc.bus_collapse_fraction > 0.0) {
    const double dev = std::abs(x.vb() - sc.bus_voltage_target) / sc.bus_voltage_target;
    if (dev > sc.bus_collapse_fraction) return true;
  }
  return false;
}

}  // namespace

void Scenario::validate() const {
  params.validate();
  controller.validate(params);
  attack.validate();
  if (attack.channels.size() != params.n_sources() + 1) {
    throw InputError("attack must define one channel per source plus the load");
  }
  if (!(step > 0.0 && step <= control_period && control_period <= horizon)) {
    throw InputError("need 0 < step <= control_period <= horizon");
  }
  ratio_steps(control_period, step, "control_period");
  ratio_steps(log_interval, step, "log_interval");
  if (!(bus_voltage_target > 0.0)) throw InputError("bus voltage target must be positive");
  if (!(duty_target >= 0.0 && duty_target <= 1.0)) throw InputError("duty target outside [0, 1]");
  if (!(divergence_threshold > 0.0)) throw InputError("divergence threshold must be positive");
  if (!(growth_tolerance >= 0.0)) throw InputError("growth tolerance must be >= 0");
  const auto labels = state_labels(params.n_sources());
  for (const auto& [key, value] : initial_overrides) {
    if (std::find(labels.begin(), labels.end(), key) == labels.end()) {
      throw InputError("unknown initial-state component '" + key + "'");
    }
    if (!std::isfinite(value)) throw InputError("initial-state component '" + key + "' not finite");
  }
}

std::vector<std::string> state_labels(std::size_t n_sources) {
  std::vector<std::string> out;
  for (std::size_t j = 0; j < n_sources; ++j) {
    out.push_back("v" + std::to_string(j + 1));
    out.push_back("it" + std::to_string(j + 1));
  }
  out.insert(out.end(), {"vb", "if", "vl"});
  return out;
}

GridState initial_state(const Scenario& scenario, const Equilibrium& eq) {
  GridState x = eq.state;
  const auto labels = state_labels(scenario.n_sources());
  for (const auto& [key, value] : scenario.initial_overrides) {
    const auto it = std::find(labels.begin(), labels.end(), key);
    if (it == labels.end()) throw InputError("unknown initial-state component '" + key + "'");
    x.vec()[it - labels.begin()] = value;
  }
  return x;
}

double attack_window_start(const AttackSpec& attack) {
  double start = std::numeric_limits<double>::infinity();
  for (const auto& ch : attack.channels) {
    if (ch.kind != AttackKind::None) start = std::min(start, ch.start);
  }
  return start;
}

double weighted_error_norm(const MicrogridParams& params, const GridState& state,
                           const Equilibrium& eq) {
  return std::sqrt(2.0 * hamiltonian(params, state, &eq.state));
}

RunResult run_scenario(const Scenario& sc) {
  sc.validate();
  const MicrogridParams& params = sc.params;
  const ControllerConfig& cfg = sc.controller;
  const std::size_t n = params.n_sources();
  const std::size_t n_sub = n + 1;

  RunResult out;
  out.equilibrium = solve_opf(params, sc.bus_voltage_target, sc.duty_target, sc.balance);
  const Equilibrium& eq = out.equilibrium;
  out.trace.n_sources = n;
  out.diagnostics.qp_infeasible_steps.assign(n_sub, 0);
  out.diagnostics.qp_nominal_steps.assign(n_sub, 0);

  GridState x = initial_state(sc, eq);
  ControllerState ctrl = ControllerState::start(cfg, eq, x, 0.0);
  std::vector<double> rho = ctrl.rho;

  const auto n_steps = static_cast<std::size_t>(std::llround(sc.horizon / sc.step));
  const std::size_t control_every = ratio_steps(sc.control_period, sc.step, "control_period");
  const std::size_t log_every = ratio_steps(sc.log_interval, sc.step, "log_interval");
  const bool adaptive = sc.kind == ControllerKind::ArClfQp;

  ControlVector command;
  std::vector<double> held_b(n_sub, 0.0);
  std::vector<double> clf(n_sub, 0.0);
  std::uint32_t feasible_mask = 0;

  // Augmented state: grid state followed by the adaptive gains.
  const auto dim = static_cast<Eigen::Index>(params.state_dim());
  Eigen::VectorXd z(dim + static_cast<Eigen::Index>(n_sub));

  auto applied_input = [&](double t, const std::vector<double>& noise) {
    ControlVector u = command;
    for (std::size_t i = 0; i < n_sub; ++i) {
      u.channel(i) +=
          deterministic_attack(sc.attack.channels[i], t, sc.attack.polynomial_absolute_time) +
          noise[i];
    }
    // Physical transformer ratio cannot leave [0, 1] whatever is injected.
    u.duty = std::clamp(u.duty, 0.0, 1.0);
    return u;
  };

  for (std::size_t k = 0; k <= n_steps; ++k) {
    const double t = static_cast<double>(k) * sc.step;

    if (k % control_every == 0) {
      ++out.diagnostics.control_steps;
      command = nominal_inputs(params, cfg, eq, x, ctrl, t);
      feasible_mask = 0;
      for (std::size_t j = 0; j < n_sub; ++j) {
        const LieDerivatives ld = lie_derivatives(params, eq, x, j);
        clf[j] = ld.V;
        held_b[j] = ld.b;
        if (!adaptive) {
          feasible_mask |= (1u << j);
          continue;
        }
        const double u_nom = command.channel(j);
        const QpResult qp = ar_clf_qp(ld, u_nom, rho[j], t, cfg, j, cfg.lower_bound(j),
                                      cfg.upper_bound(j));
        command.channel(j) = qp.u;
        if (qp.feasible) {
          feasible_mask |= (1u << j);
        } else {
          ++out.diagnostics.qp_infeasible_steps[j];
        }
        if (qp.active == QpActive::None) ++out.diagnostics.qp_nominal_steps[j];
      }
    }

    const std::vector<double> noise = attack_noise(sc.attack, t);

    if (k % log_every == 0) {
      TraceRecord rec;
      rec.t = t;
      rec.state = x;
      rec.command.resize(n_sub);
      rec.attack.resize(n_sub);
      for (std::size_t i = 0; i < n_sub; ++i) {
        rec.command[i] = command.channel(i);
        rec.attack[i] = deterministic_attack(sc.attack.channels[i], t,
                                             sc.attack.polynomial_absolute_time) +
                        noise[i];
        rec.clf.push_back(lie_derivatives(params, eq, x, i).V);
      }
      rec.hamiltonian = hamiltonian(params, x, &eq.state);
      rec.rho = rho;
      rec.qp_feasible_mask = feasible_mask;
      out.trace.records.push_back(std::move(rec));
    }
    if (k == n_steps) break;

    z.head(dim) = x.vec();
    for (std::size_t j = 0; j < n_sub; ++j) z[dim + static_cast<Eigen::Index>(j)] = rho[j];

    auto field = [&](double ts, const Eigen::VectorXd& zs) {
      Eigen::VectorXd dz(zs.size());
      const GridState xs(n, zs.head(dim));
      dz.head(dim) = circuit_vector_field(params, xs, applied_input(ts, noise)).vec();
      for (std::size_t j = 0; j < n_sub; ++j) {
        const bool saturated = rho[j] >= cfg.rho_max;
        dz[dim + static_cast<Eigen::Index>(j)] =
            adaptive && !saturated ? rho_derivative(held_b[j], cfg.adaptation_gain[j]) : 0.0;
      }
      return dz;
    };
    z = step_rk4(field, t, z, sc.step);

    x = GridState(n, z.head(dim));
    for (std::size_t j = 0; j < n_sub; ++j) {
      rho[j] = std::min(z[dim + static_cast<Eigen::Index>(j)], cfg.rho_max);
    }

    if (out_of_bounds(sc, x)) {
      TraceRecord rec;
      rec.t = t + sc.step;
      rec.state = x;
      rec.command.resize(n_sub);
      rec.attack.resize(n_sub);
      for (std::size_t i = 0; i < n_sub; ++i) {
        rec.command[i] = command.channel(i);
        rec.attack[i] = deterministic_attack(sc.attack.channels[i], rec.t,
                                             sc.attack.polynomial_absolute_time) +
                        noise[i];
        rec.clf.push_back(x.finite() ? lie_derivatives(params, eq, x, i).V
                                     : std::numeric_limits<double>::quiet_NaN());
      }
      rec.hamiltonian = x.finite() ? hamiltonian(params, x, &eq.state)
                                   : std::numeric_limits<double>::quiet_NaN();
      rec.rho = rho;
      rec.qp_feasible_mask = feasible_mask;
      out.trace.records.push_back(std::move(rec));
      break;
    }
  }

  out.metrics = compute_metrics(out.trace, sc, eq);
  return out;
}

Metrics compute_metrics(const Trace& trace, const Scenario& sc, const Equilibrium& eq) {
  Metrics m;
  const auto& recs = trace.records;
  const std::size_t n = trace.n_sources;
  m.current_deviation_pct.assign(n + 1, 0.0);
  if (recs.empty()) {
    m.verdict = "DIVERGED";
    m.diverged = true;
    return m;
  }

  // Pre-divergence window only.
  std::size_t end = recs.size();
  for (std::size_t i = 0; i < recs.size(); ++i) {
    if (out_of_bounds(sc, recs[i].state)) {
      m.diverged = true;
      m.divergence_time = recs[i].t;
      end = i;
      break;
    }
  }
  if (end == 0) {
    m.verdict = "DIVERGED";
    return m;
  }

  const double attack_start = attack_window_start(sc.attack);
  m.window_start = std::isfinite(attack_start) ? attack_start : recs.front().t;
  const double vb_star = eq.state.vb();

  std::size_t qp_total = 0;
  std::size_t qp_ok = 0;
  const std::uint32_t full_mask = (n + 1 >= 32) ? 0xffffffffu : ((1u << (n + 1)) - 1u);
  for (std::size_t r = 0; r < end; ++r) {
    const auto& rec = recs[r];
    ++qp_total;
    if ((rec.qp_feasible_mask & full_mask) == full_mask) ++qp_ok;
    if (rec.t + 1e-12 < m.window_start) continue;
    m.bus_deviation_pct =
        std::max(m.bus_deviation_pct, 100.0 * std::abs(rec.state.vb() - vb_star) / vb_star);
    for (std::size_t c = 0; c <= n; ++c) {
      const double ref = c < n ? eq.state.it(c) : eq.state.i_f();
      const double val = c < n ? rec.state.it(c) : rec.state.i_f();
      const double dev = std::abs(ref) > 0.0 ? 100.0 * std::abs(val - ref) / std::abs(ref)
                                             : 100.0 * std::abs(val - ref);
      m.current_deviation_pct[c] = std::max(m.current_deviation_pct[c], dev);
    }
  }
  m.qp_feasible_fraction = static_cast<double>(qp_ok) / static_cast<double>(qp_total);
  for (double d : m.current_deviation_pct) {
    m.max_current_deviation_pct = std::max(m.max_current_deviation_pct, d);
  }
  const GridState& last = recs[end - 1].state;
  m.final_bus_offset = std::abs(last.vb() - vb_star);

  // Energy should not rise before any attack starts.
  constexpr double kHSlack = 1e-9;
  for (std::size_t r = 1; r < end && recs[r].t < attack_start; ++r) {
    const double rise = recs[r].hamiltonian - recs[r - 1].hamiltonian;
    if (rise > kHSlack) {
      ++m.pre_attack_h_increases;
      m.pre_attack_max_h_increase = std::max(m.pre_attack_max_h_increase, rise);
    }
  }

  // Ultimate bound on the Q-weighted error: radius = max over the final
  // quarter of the window, settling time = first instant after which the
  // norm never exceeds it.
  const double t_end = recs[end - 1].t;
  const double span = t_end - m.window_start;
  const double final_start = t_end - 0.25 * span;
  const double prev_start = t_end - 0.5 * span;
  double prev_max = 0.0;
  std::vector<double> norms(end);
  for (std::size_t r = 0; r < end; ++r) {
    norms[r] = weighted_error_norm(sc.params, recs[r].state, eq);
    if (recs[r].t >= final_start) m.uub_radius = std::max(m.uub_radius, norms[r]);
    else if (recs[r].t >= prev_start) prev_max = std::max(prev_max, norms[r]);
  }
  m.settling_time = recs.front().t;
  for (std::size_t r = end; r-- > 0;) {
    if (norms[r] > m.uub_radius) {
      m.settling_time = r + 1 < end ? recs[r + 1].t : recs[r].t;
      break;
    }
  }
  // Settled: the error stopped growing, i.e. the last quarter does not
  // exceed the quarter before it by more than 5%.
  constexpr double kTinyNorm = 1e-9;
  const double growth_bound = (1.0 + sc.growth_tolerance) * prev_max;
  m.uub_settled = !m.diverged && span > 0.0 &&
                  (m.uub_radius <= kTinyNorm || m.uub_radius <= growth_bound);

  // Under attack, an error that keeps growing through the end of the
  // window is not ultimately bounded.
  const bool attacked = std::isfinite(attack_start) && attack_start < t_end;
  if (!m.diverged && attacked && sc.growth_tolerance > 0.0 && !m.uub_settled && span > 0.0) {
    m.diverged = true;
    m.divergence_time = t_end;
    for (std::size_t r = 0; r < end; ++r) {
      if (recs[r].t >= final_start && norms[r] > growth_bound) {
        m.divergence_time = recs[r].t;
        break;
      }
    }
  }

  if (m.diverged) {
    m.verdict = "DIVERGED";
  } else {
    const Eigen::VectorXd err = last.vec() - eq.state.vec();
    m.verdict = err.cwiseAbs().maxCoeff() <= sc.convergence_tol ? "CONVERGED"
                                                                 : "BOUNDED-UNDER-ATTACK";
  }
  return m;
}

std::vector<RunResult> run_batch_serial(std::span<const Scenario> scenarios) {
  std::vector<RunResult> out;
  out.reserve(scenarios.size());
  for (const auto& sc : scenarios) out.push_back(run_scenario(sc));
  return out;
}

std::vector<RunResult> run_batch(std::span<const Scenario> scenarios) {
  std::vector<RunResult> out(scenarios.size());
  const auto count = static_cast<std::ptrdiff_t>(scenarios.size());
  std::vector<std::exception_ptr> errors(scenarios.size());
#pragma omp parallel for schedule(dynamic, 1)
  for (std::ptrdiff_t i = 0; i < count; ++i) {
    try {
      out[static_cast<std::size_t>(i)] = run_scenario(scenarios[static_cast<std::size_t>(i)]);
    } catch (...) {
      errors[static_cast<std::size_t>(i)] = std::current_exception();
    }
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return out;
}

}  // namespace dcmg
