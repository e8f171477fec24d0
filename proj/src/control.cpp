#include "dcmg/control.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace dcmg {

namespace {

void require_size(const std::vector<double>& v, std::size_t n, const char* name) {
  if (v.size() != n) {
    throw InputError(std::string(name) + ": expected " + std::to_string(n) + " entries, got " +
                     std::to_string(v.size()));
  }
}

void require_all_positive(const std::vector<double>& v, const char* name) {
  for (double x : v) {
    if (!(x > 0.0)) throw InputError(std::string(name) + " entries must be > 0");
  }
}

}  // namespace

ControllerConfig ControllerConfig::defaults(std::size_t n_sources) {
  ControllerConfig c;
  c.source_damping.assign(n_sources, 1.0);
  c.load_damping = 0.1;
  c.clf_rate.assign(n_sources + 1, 5.0);
  c.adaptation_gain.assign(n_sources + 1, 10.0);
  c.initial_rho.assign(n_sources + 1, 0.0);
  return c;
}

void ControllerConfig::validate(const MicrogridParams& params) const {
  const std::size_t n = params.n_sources();
  require_size(source_damping, n, "source_damping");
  require_size(clf_rate, n + 1, "clf_rate");
  require_size(adaptation_gain, n + 1, "adaptation_gain");
  require_size(initial_rho, n + 1, "initial_rho");
  require_all_positive(source_damping, "source_damping");
  require_all_positive(clf_rate, "clf_rate");
  require_all_positive(adaptation_gain, "adaptation_gain");
  if (!(load_damping > 0.0)) throw InputError("load_damping must be > 0");
  if (!(denominator_decay > 0.0)) throw InputError("denominator_decay must be > 0");
  for (double r : initial_rho) {
    if (r < 0.0) throw InputError("initial_rho entries must be >= 0");
    if (r > rho_max) throw InputError("initial_rho exceeds rho_max");
  }
  if (!(source_current_max > 0.0)) throw InputError("source_current_max must be > 0");
  if (!(duty_min >= 0.0 && duty_min <= duty_max && duty_max <= 1.0)) {
    throw InputError("duty bounds must satisfy 0 <= duty_min <= duty_max <= 1");
  }
  if (bus_voltage_guard < 0.0) throw InputError("bus_voltage_guard must be >= 0");
  if (!lambda.empty()) {
    require_size(lambda, params.state_dim(), "lambda");
    const Eigen::VectorXd rstar = closed_loop_dissipation(params, *this);
    for (std::size_t i = 0; i < lambda.size(); ++i) {
      if (lambda[i] < 0.0) throw InputError("lambda entries must be >= 0");
      if (!(lambda[i] < rstar[static_cast<Eigen::Index>(i)])) {
        throw InputError("lambda entry " + std::to_string(i) +
                         " must stay below the shaped dissipation R*");
      }
    }
  }
}

double ControllerConfig::lower_bound(std::size_t subsystem) const {
  return subsystem < n_sources() ? 0.0 : duty_min;
}

double ControllerConfig::upper_bound(std::size_t subsystem) const {
  return subsystem < n_sources() ? source_current_max : duty_max;
}

ControllerState ControllerState::start(const ControllerConfig& config, const Equilibrium& eq,
                                       const GridState& state, double t0) {
  ControllerState s;
  s.rho = config.initial_rho;
  s.initial_current_error.resize(state.n_sources());
  for (std::size_t j = 0; j < state.n_sources(); ++j) {
    s.initial_current_error[j] = state.it(j) - eq.state.it(j);
  }
  s.start_time = t0;
  return s;
}

double nominal_source_input(const MicrogridParams& params, const ControllerConfig& config,
                            const Equilibrium& eq, const GridState& state,
                            const ControllerState& ctrl, double t, std::size_t j) {
  const auto& src = params.sources[j];
  const double v_err = state.v(j) - eq.state.v(j);
  const double decay = std::exp(-src.resistance * (t - ctrl.start_time) / src.inductance);
  const double u = eq.input.source_current[j] - config.source_damping[j] * v_err +
                   decay * ctrl.initial_current_error[j];
  return std::clamp(u, 0.0, config.source_current_max);
}

double nominal_load_input(const MicrogridParams& /*params*/, const ControllerConfig& config,
                          const Equilibrium& eq, const GridState& state) {
  double correction = 0.0;
  if (state.vb() > config.bus_voltage_guard) {
    correction = -config.load_damping * (state.i_f() - eq.state.i_f()) / state.vb();
  }
  return std::clamp(eq.duty + correction, config.duty_min, config.duty_max);
}

ControlVector nominal_inputs(const MicrogridParams& params, const ControllerConfig& config,
                             const Equilibrium& eq, const GridState& state,
                             const ControllerState& ctrl, double t) {
  ControlVector u;
  u.source_current.resize(params.n_sources());
  for (std::size_t j = 0; j < params.n_sources(); ++j) {
    u.source_current[j] = nominal_source_input(params, config, eq, state, ctrl, t, j);
  }
  u.duty = nominal_load_input(params, config, eq, state);
  return u;
}

LieDerivatives lie_derivatives(const MicrogridParams& params, const Equilibrium& eq,
                               const GridState& state, std::size_t j) {
  const std::size_t n = params.n_sources();
  if (j > n) throw StructuralError("subsystem index out of range");
  const double vb_err = state.vb() - eq.state.vb();
  LieDerivatives ld;
  if (j < n) {
    const auto& src = params.sources[j];
    const double v_err = state.v(j) - eq.state.v(j);
    const double i_err = state.it(j) - eq.state.it(j);
    ld.V = 0.5 * (src.capacitance * v_err * v_err + src.inductance * i_err * i_err);
    ld.b = v_err;
    ld.a = -v_err * eq.input.source_current[j] - src.resistance * i_err * i_err - i_err * vb_err;
    return ld;
  }
  const double if_err = state.i_f() - eq.state.i_f();
  const double vl_err = state.vl() - eq.state.vl();
  ld.V = 0.5 * (params.bus_capacitance * vb_err * vb_err +
                params.filter_inductance * if_err * if_err +
                params.load_capacitance * vl_err * vl_err);
  ld.b = -vb_err * state.i_f() + if_err * state.vb();
  ld.a = vb_err * (state.sum_line_currents() - state.vb() / params.linear_load) -
         if_err * state.vl() + vl_err * (state.i_f() - state.vl() / params.nonlinear_load);
  return ld;
}

double resilience_term(double b, double rho, double t, double alpha) {
  if (b == 0.0) return 0.0;
  return b * b * std::exp(rho) / (std::abs(b) + std::exp(-alpha * t));
}

QpResult solve_clf_qp(const ClfQp& qp) {
  // Feasible set: b u <= c intersected with the box.
  const double c = -qp.decay - qp.a - qp.resilience;
  double lo = qp.u_min;
  double hi = qp.u_max;
  bool halfline_upper = false;
  bool halfline_lower = false;
  bool feasible = true;
  if (qp.b > 0.0) {
    const double bound = c / qp.b;
    if (bound < hi) {
      hi = bound;
      halfline_upper = true;
    }
  } else if (qp.b < 0.0) {
    const double bound = c / qp.b;
    if (bound > lo) {
      lo = bound;
      halfline_lower = true;
    }
  } else {
    feasible = c >= 0.0;
  }
  if (lo > hi) feasible = false;

  QpResult res;
  if (feasible) {
    res.u = std::clamp(qp.u_nom, lo, hi);
    if (res.u == qp.u_nom) {
      res.active = QpActive::None;
    } else if (res.u == hi) {
      res.active = halfline_upper ? QpActive::Clf : QpActive::BoxUpper;
    } else {
      res.active = halfline_lower ? QpActive::Clf : QpActive::BoxLower;
    }
    return res;
  }

  // Least violation: the box endpoint that minimizes b u.
  res.feasible = false;
  res.active = QpActive::Infeasible;
  if (qp.b > 0.0) {
    res.u = qp.u_min;
  } else if (qp.b < 0.0) {
    res.u = qp.u_max;
  } else {
    res.u = std::clamp(qp.u_nom, qp.u_min, qp.u_max);
  }
  res.violation = std::max(0.0, qp.a + qp.b * res.u + qp.resilience + qp.decay);
  return res;
}

QpResult ar_clf_qp(const LieDerivatives& ld, double u_nom, double rho, double t,
                   const ControllerConfig& config, std::size_t subsystem, double u_min,
                   double u_max) {
  if (u_min > u_max) throw InputError("QP box is empty");
  const double r = resilience_term(ld.b, std::min(rho, config.rho_max), t, config.denominator_decay);
  return solve_clf_qp({.a = ld.a,
                       .b = ld.b,
                       .resilience = r,
                       .decay = config.clf_rate[subsystem] * ld.V,
                       .u_nom = u_nom,
                       .u_min = u_min,
                       .u_max = u_max});
}

double rho_derivative(double b, double q) { return q * std::abs(b); }

Eigen::VectorXd closed_loop_dissipation(const MicrogridParams& params,
                                        const ControllerConfig& config) {
  const std::size_t n = params.n_sources();
  Eigen::VectorXd r(static_cast<Eigen::Index>(params.state_dim()));
  for (std::size_t j = 0; j < n; ++j) {
    const auto& s = params.sources[j];
    r[static_cast<Eigen::Index>(2 * j)] =
        config.source_damping[j] / (s.capacitance * s.capacitance);
    r[static_cast<Eigen::Index>(2 * j + 1)] = s.resistance / (s.inductance * s.inductance);
  }
  const auto base = static_cast<Eigen::Index>(2 * n);
  r[base] = 1.0 / (params.linear_load * params.bus_capacitance * params.bus_capacitance);
  r[base + 1] = config.load_damping / (params.filter_inductance * params.filter_inductance);
  r[base + 2] = 1.0 / (params.nonlinear_load * params.load_capacitance * params.load_capacitance);
  return r;
}

DecayCheck global_clf_decay_check(const MicrogridParams& params, const ControllerConfig& config,
                                  const Equilibrium& eq, const GridState& state,
                                  const ControlVector& inputs, double tol) {
  const Eigen::VectorXd q = hamiltonian_weights(params);
  const Eigen::VectorXd err = state.vec() - eq.state.vec();
  const Eigen::VectorXd grad = q.cwiseProduct(err);  // dH = Q xhat
  const GridState f = circuit_vector_field(params, state, inputs);

  Eigen::VectorXd shaped = closed_loop_dissipation(params, config);
  if (!config.lambda.empty()) {
    shaped -= Eigen::Map<const Eigen::VectorXd>(config.lambda.data(),
                                                static_cast<Eigen::Index>(config.lambda.size()));
  }
  DecayCheck out;
  out.hdot = grad.dot(f.vec());
  out.bound = -grad.cwiseAbs2().dot(shaped);
  out.pass = out.hdot <= out.bound + tol * (1.0 + std::abs(out.bound));
  return out;
}

}  // namespace dcmg
