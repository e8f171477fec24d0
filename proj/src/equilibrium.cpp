#include "dcmg/equilibrium.hpp"

#include <cmath>
#include <string>

namespace dcmg {

namespace {

void validate_targets(double bus_voltage, double duty) {
  if (!(bus_voltage > 0.0) || !std::isfinite(bus_voltage)) {
    throw InputError("target bus voltage must be positive, got " + std::to_string(bus_voltage));
  }
  if (!(duty >= 0.0 && duty <= 1.0)) {
    throw InputError("target duty ratio must lie in [0, 1], got " + std::to_string(duty));
  }
}

}  // namespace

double total_load_current(const MicrogridParams& params, double bus_voltage, double duty,
                          LoadBalance balance) {
  const double converter = balance == LoadBalance::Circuit
                               ? duty * duty * bus_voltage / params.nonlinear_load
                               : duty * bus_voltage / params.nonlinear_load;
  return bus_voltage / params.linear_load + converter;
}

Equilibrium solve_opf(const MicrogridParams& params, double bus_voltage, double duty,
                      LoadBalance balance) {
  params.validate();
  validate_targets(bus_voltage, duty);

  const std::size_t n = params.n_sources();
  Equilibrium eq;
  eq.bus_voltage = bus_voltage;
  eq.duty = duty;
  eq.total_load_current = total_load_current(params, bus_voltage, duty, balance);
  eq.state = GridState(n);
  eq.input.source_current.resize(n);
  eq.input.duty = duty;

  for (std::size_t j = 0; j < n; ++j) {
    const double rj = params.sources[j].resistance;
    double ratio_sum = 0.0;
    for (const auto& p : params.sources) ratio_sum += rj / p.resistance;
    const double it = eq.total_load_current / ratio_sum;
    eq.state.it(j) = it;
    eq.state.v(j) = it * rj + bus_voltage;
    eq.input.source_current[j] = it;
  }
  eq.state.vb() = bus_voltage;
  eq.state.vl() = duty * bus_voltage;
  eq.state.i_f() = eq.state.vl() / params.nonlinear_load;
  return eq;
}

std::vector<double> opf_oracle(const MicrogridParams& params, double bus_voltage, double duty,
                               LoadBalance balance) {
  params.validate();
  validate_targets(bus_voltage, duty);

  // Stationarity 2 R_j i_j + lambda = 0, primal feasibility sum i_j = I_L.
  const auto n = static_cast<Eigen::Index>(params.n_sources());
  Eigen::MatrixXd kkt = Eigen::MatrixXd::Zero(n + 1, n + 1);
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(n + 1);
  for (Eigen::Index j = 0; j < n; ++j) {
    kkt(j, j) = 2.0 * params.sources[static_cast<std::size_t>(j)].resistance;
    kkt(j, n) = 1.0;
    kkt(n, j) = 1.0;
  }
  rhs[n] = total_load_current(params, bus_voltage, duty, balance);
  const Eigen::VectorXd sol = kkt.fullPivLu().solve(rhs);
  return {sol.data(), sol.data() + n};
}

double line_losses(const MicrogridParams& params, const std::vector<double>& currents) {
  if (currents.size() != params.n_sources()) throw StructuralError("one current per source");
  double loss = 0.0;
  for (std::size_t j = 0; j < currents.size(); ++j) {
    loss += params.sources[j].resistance * currents[j] * currents[j];
  }
  return loss;
}

}  // namespace dcmg
