#pragma once

#include "dcmg/model.hpp"

#include <vector>

namespace dcmg {

/// How the bus-balance constraint of the loss-minimizing dispatch counts the
/// load converter's current.
enum class LoadBalance {
  /// v_b/R_l + d^2 v_b / r_l: what the circuit actually draws in steady state.
  Circuit,
  /// v_b/R_l + d v_b / r_l: kept for side-by-side comparison only.
  Printed,
};

/// Optimal steady state (x*, u*) and the targets that parameterize it.
struct Equilibrium {
  GridState state;
  ControlVector input;
  double bus_voltage = 0.0;  // v_b*
  double duty = 0.0;         // d_l*
  double total_load_current = 0.0;
};

/// Total current the sources must deliver at the operating point.
double total_load_current(const MicrogridParams& params, double bus_voltage, double duty,
                          LoadBalance balance = LoadBalance::Circuit);

/// Closed-form loss-minimizing current sharing, i_tj proportional to 1/R_j,
/// plus the remaining steady-state quantities.
Equilibrium solve_opf(const MicrogridParams& params, double bus_voltage, double duty,
                      LoadBalance balance = LoadBalance::Circuit);

/// Independent check of the sharing rule: solves the KKT system of
/// min sum R_j i_j^2 s.t. sum i_j = I_L as a dense linear system.
std::vector<double> opf_oracle(const MicrogridParams& params, double bus_voltage, double duty,
                               LoadBalance balance = LoadBalance::Circuit);

/// Total line loss sum R_j i_j^2 of a current split.
double line_losses(const MicrogridParams& params, const std::vector<double>& currents);

}  // namespace dcmg
