#pragma once

// Averaged single-bus DC microgrid: (k-1) current-controlled DER sources
// feeding a common bus through RL lines, a linear load R_l and a load
// converter (ideal DC transformer d_l + L_f/C_l filter + r_l).

#include <Eigen/Dense>

#include <cstddef>
#include <span>
#include <stdexcept>
#include <vector>

namespace dcmg {

/// Raised when vectors and parameter sets disagree on the number of sources.
class StructuralError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Raised for out-of-domain user inputs (negative capacitances, d_l > 1, ...).
class InputError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct SourceParams {
  double capacitance;  // C_j [F]
  double inductance;   // L_j [H]
  double resistance;   // R_j [Ohm]
};

struct MicrogridParams {
  std::vector<SourceParams> sources;
  double bus_capacitance = 0.0;     // C_b [F]
  double filter_inductance = 0.0;   // L_f [H]
  double load_capacitance = 0.0;    // C_l [F]
  double linear_load = 0.0;         // R_l [Ohm]
  double nonlinear_load = 0.0;      // r_l [Ohm]

  std::size_t n_sources() const { return sources.size(); }
  /// Dimension of the full state vector, 2(k-1)+3.
  std::size_t state_dim() const { return 2 * sources.size() + 3; }

  /// Throws InputError unless every constant is strictly positive and
  /// there is at least one source.
  void validate() const;

  /// Two-DER parameter set used throughout the reproduction scenarios.
  static MicrogridParams table1();
};

/// Full state in circuit coordinates, laid out as
/// [v_1, i_t1, ..., v_{k-1}, i_t{k-1}, v_b, i_f, v_l].
class GridState {
 public:
  GridState() = default;
  explicit GridState(std::size_t n_sources)
      : n_(n_sources), x_(Eigen::VectorXd::Zero(2 * n_sources + 3)) {}
  GridState(std::size_t n_sources, Eigen::VectorXd x);

  std::size_t n_sources() const { return n_; }
  std::size_t dim() const { return static_cast<std::size_t>(x_.size()); }

  double& v(std::size_t j) { return x_[2 * j]; }
  double v(std::size_t j) const { return x_[2 * j]; }
  double& it(std::size_t j) { return x_[2 * j + 1]; }
  double it(std::size_t j) const { return x_[2 * j + 1]; }
  double& vb() { return x_[2 * n_]; }
  double vb() const { return x_[2 * n_]; }
  double& i_f() { return x_[2 * n_ + 1]; }
  double i_f() const { return x_[2 * n_ + 1]; }
  double& vl() { return x_[2 * n_ + 2]; }
  double vl() const { return x_[2 * n_ + 2]; }

  double sum_line_currents() const;
  bool finite() const { return x_.allFinite(); }

  const Eigen::VectorXd& vec() const { return x_; }
  Eigen::VectorXd& vec() { return x_; }

  GridState operator-(const GridState& other) const;

 private:
  std::size_t n_ = 0;
  Eigen::VectorXd x_;
};

/// Per-source current commands i_sj and the load duty ratio d_l.
struct ControlVector {
  std::vector<double> source_current;
  double duty = 0.0;

  std::size_t dim() const { return source_current.size() + 1; }
  /// Channel accessor: 0..k-2 are sources, k-1 is the duty.
  double channel(std::size_t i) const {
    return i < source_current.size() ? source_current[i] : duty;
  }
  double& channel(std::size_t i) {
    return i < source_current.size() ? source_current[i] : duty;
  }
};

/// Circuit-form vector field. Requires duty in [0, 1].
GridState circuit_vector_field(const MicrogridParams& params, const GridState& state,
                               const ControlVector& input);

/// One port-Hamiltonian subsystem xdot = (J - R) Q x + g(x) u + g_z z.
/// `g` is stored as the state-dependent coefficient evaluated by input_map().
struct PHSubsystem {
  enum class Kind { Source, Load };
  Kind kind = Kind::Source;
  std::size_t index = 0;        // source index, unused for the load
  Eigen::VectorXd q;            // diagonal of Q (Hamiltonian weights)
  Eigen::MatrixXd J;            // open-loop interconnection
  Eigen::MatrixXd R;            // open-loop dissipation
  Eigen::MatrixXd J_cl;         // shaped interconnection J*
  Eigen::MatrixXd R_cl;         // shaped dissipation R*
  Eigen::MatrixXd g_z;          // port map (constant)
  // Load only: coefficients of the state-dependent input map
  // g_k(x) = [-i_f / C_b, v_b / L_f, 0]^T.
  double inv_bus_capacitance = 0.0;
  double inv_filter_inductance = 0.0;
  // Source only: constant input map [1/C_j, 0]^T.
  Eigen::Vector2d g_source = Eigen::Vector2d::Zero();

  std::size_t dim() const { return static_cast<std::size_t>(q.size()); }
  Eigen::VectorXd input_map(const Eigen::VectorXd& x_local) const;
};

struct DampingGains {
  std::vector<double> source;  // alpha_j
  double load = 0.0;           // alpha_k
};

/// Builds the k PH subsystems (sources first, load last). Closed-loop J*, R*
/// use the supplied damping gains and target duty.
std::vector<PHSubsystem> build_ph(const MicrogridParams& params, const DampingGains& damping,
                                  double duty_star);

/// Global PH vector field, wiring z_j = -v_b and z_k = -[i_t1 ... i_t,k-1].
GridState ph_vector_field(std::span<const PHSubsystem> subsystems, const GridState& state,
                          const ControlVector& input);

/// Diagonal of the global Hamiltonian weight Q = diag(C_1, L_1, ..., C_b, L_f, C_l).
Eigen::VectorXd hamiltonian_weights(const MicrogridParams& params);

/// H(x - ref) = 1/2 (x - ref)^T Q (x - ref); with no reference, H(x).
double hamiltonian(const MicrogridParams& params, const GridState& state,
                   const GridState* reference = nullptr);

/// Sum over subsystems of y_j^T z_j; zero up to rounding for every state.
double check_port_cancellation(std::span<const PHSubsystem> subsystems, const GridState& state);

}  // namespace dcmg
