#pragma once

// Nominal IDA-PBC laws and the decentralized attack-resilient CLF-QP filter.
//
// Subsystem indexing: 0..k-2 are the DER sources, k-1 is the bus/load
// subsystem. Every law below reads only local measurements of its own
// subsystem plus the bus quantity it is wired to (v_b for sources,
// sum of line currents for the load).

#include "dcmg/equilibrium.hpp"
#include "dcmg/model.hpp"

#include <cstdint>
#include <vector>

namespace dcmg {

struct ControllerConfig {
  std::vector<double> source_damping;     // alpha_j, one per source
  double load_damping = 0.1;              // alpha_k
  std::vector<double> clf_rate;           // beta_j, one per subsystem [1/s]
  std::vector<double> adaptation_gain;    // q_j, one per subsystem
  std::vector<double> initial_rho;        // rho_j0, one per subsystem
  double denominator_decay = 1.0;         // alpha in e^{-alpha t} [1/s]
  double rho_max = 30.0;
  std::vector<double> lambda;             // diag(Lambda), one per state; empty = 0
  double source_current_max = 100.0;      // i_s,max [A]
  double duty_min = 0.0;
  double duty_max = 1.0;
  double bus_voltage_guard = 0.5;         // epsilon_vb [V]

  /// Defaults for a grid with n sources.
  static ControllerConfig defaults(std::size_t n_sources);

  std::size_t n_sources() const { return source_damping.size(); }
  /// Throws InputError on nonpositive gains, wrong sizes, or Lambda >= R*.
  void validate(const MicrogridParams& params) const;

  double lower_bound(std::size_t subsystem) const;
  double upper_bound(std::size_t subsystem) const;
};

struct ControllerState {
  std::vector<double> rho;                  // one per subsystem
  std::vector<double> initial_current_error;  // i_tj(t0) - i_tj*
  double start_time = 0.0;

  /// Captures the initial line-current errors at t0 and resets rho to rho_0.
  static ControllerState start(const ControllerConfig& config, const Equilibrium& eq,
                               const GridState& state, double t0);
};

/// Vdot_j = a + b u along the circuit dynamics with input u on channel j.
struct LieDerivatives {
  double a = 0.0;  // drift part [W]
  double b = 0.0;  // input coefficient [W per input unit]
  double V = 0.0;  // local CLF value [J]
};

double nominal_source_input(const MicrogridParams& params, const ControllerConfig& config,
                            const Equilibrium& eq, const GridState& state,
                            const ControllerState& ctrl, double t, std::size_t j);

double nominal_load_input(const MicrogridParams& params, const ControllerConfig& config,
                          const Equilibrium& eq, const GridState& state);

/// Nominal command for every channel.
ControlVector nominal_inputs(const MicrogridParams& params, const ControllerConfig& config,
                             const Equilibrium& eq, const GridState& state,
                             const ControllerState& ctrl, double t);

LieDerivatives lie_derivatives(const MicrogridParams& params, const Equilibrium& eq,
                               const GridState& state, std::size_t j);

/// b^2 e^rho / (|b| + e^{-alpha t}).
double resilience_term(double b, double rho, double t, double alpha);

enum class QpActive : std::uint8_t {
  None = 0,        // u = u_nom
  Clf = 1,         // CLF half-line bound is binding
  BoxLower = 2,
  BoxUpper = 3,
  Infeasible = 4,  // least-violation fallback
};

struct QpResult {
  double u = 0.0;
  bool feasible = true;
  QpActive active = QpActive::None;
  double violation = 0.0;  // a + b u + r + beta V at the returned u, if > 0
};

/// Scalar CLF-QP data, kept separate from LieDerivatives so the solver can
/// be exercised on arbitrary instances.
struct ClfQp {
  double a = 0.0;
  double b = 0.0;
  double resilience = 0.0;  // r
  double decay = 0.0;       // beta V
  double u_nom = 0.0;
  double u_min = 0.0;
  double u_max = 0.0;
};

/// Closed-form solution of min (u - u_nom)^2 s.t. a + b u + r <= -beta V,
/// u in [u_min, u_max].
QpResult solve_clf_qp(const ClfQp& qp);

QpResult ar_clf_qp(const LieDerivatives& ld, double u_nom, double rho, double t,
                   const ControllerConfig& config, std::size_t subsystem, double u_min,
                   double u_max);

/// q_j |b_j|.
double rho_derivative(double b, double q);

struct DecayCheck {
  double hdot = 0.0;
  double bound = 0.0;  // -xhat^T Q (R* - Lambda) Q xhat
  bool pass = false;
};

/// Evaluates dH/dt along the circuit field with the given inputs and checks
/// it against the shaped dissipation bound.
DecayCheck global_clf_decay_check(const MicrogridParams& params, const ControllerConfig& config,
                                  const Equilibrium& eq, const GridState& state,
                                  const ControlVector& inputs, double tol = 1e-9);

/// Diagonal of the shaped dissipation R* in global state order.
Eigen::VectorXd closed_loop_dissipation(const MicrogridParams& params,
                                        const ControllerConfig& config);

}  // namespace dcmg
