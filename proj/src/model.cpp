#include "dcmg/model.hpp"

#include <cmath>
#include <string>

namespace dcmg {

namespace {

void require_positive(double value, const char* name) {
  if (!(value > 0.0) || !std::isfinite(value)) {
    throw InputError(std::string(name) + " must be strictly positive, got " + std::to_string(value));
  }
}

void require_dim(const MicrogridParams& params, const GridState& state) {
  if (state.n_sources() != params.n_sources() || state.dim() != params.state_dim()) {
    throw StructuralError("state has " + std::to_string(state.n_sources()) +
                          " sources but parameters describe " +
                          std::to_string(params.n_sources()));
  }
}

}  // namespace

void MicrogridParams::validate() const {
  if (sources.empty()) throw InputError("at least one source is required");
  for (const auto& s : sources) {
    require_positive(s.capacitance, "source capacitance");
    require_positive(s.inductance, "source inductance");
    require_positive(s.resistance, "source line resistance");
  }
  require_positive(bus_capacitance, "bus capacitance");
  require_positive(filter_inductance, "filter inductance");
  require_positive(load_capacitance, "load capacitance");
  require_positive(linear_load, "linear load");
  require_positive(nonlinear_load, "nonlinear load");
}

MicrogridParams MicrogridParams::table1() {
  MicrogridParams p;
  p.sources = {{0.49e-3, 0.09e-3, 18.78e-3}, {0.57e-3, 0.08e-3, 17.78e-3}};
  p.bus_capacitance = 0.47e-3;
  p.filter_inductance = 0.16e-3;
  p.load_capacitance = 0.47e-3;
  p.linear_load = 2.0;
  p.nonlinear_load = 1.0;
  return p;
}

GridState::GridState(std::size_t n_sources, Eigen::VectorXd x) : n_(n_sources), x_(std::move(x)) {
  if (static_cast<std::size_t>(x_.size()) != 2 * n_ + 3) {
    throw StructuralError("state vector length " + std::to_string(x_.size()) +
                          " does not match " + std::to_string(n_) + " sources");
  }
}

double GridState::sum_line_currents() const {
  double s = 0.0;
  for (std::size_t j = 0; j < n_; ++j) s += it(j);
  return s;
}

GridState GridState::operator-(const GridState& other) const {
  if (other.n_ != n_) throw StructuralError("state difference between mismatched grids");
  return GridState(n_, x_ - other.x_);
}

GridState circuit_vector_field(const MicrogridParams& params, const GridState& state,
                               const ControlVector& input) {
  require_dim(params, state);
  if (input.source_current.size() != params.n_sources()) {
    throw StructuralError("control vector has wrong number of source channels");
  }
  if (!(input.duty >= 0.0 && input.duty <= 1.0)) {
    throw InputError("duty ratio outside [0, 1]: " + std::to_string(input.duty));
  }

  const std::size_t n = params.n_sources();
  GridState dx(n);
  const double vb = state.vb();
  for (std::size_t j = 0; j < n; ++j) {
    const auto& s = params.sources[j];
    dx.v(j) = (input.source_current[j] - state.it(j)) / s.capacitance;
    dx.it(j) = (state.v(j) - s.resistance * state.it(j) - vb) / s.inductance;
  }
  const double d = input.duty;
  dx.vb() = (state.sum_line_currents() - vb / params.linear_load - state.i_f() * d) /
            params.bus_capacitance;
  dx.i_f() = (-state.vl() + vb * d) / params.filter_inductance;
  dx.vl() = (state.i_f() - state.vl() / params.nonlinear_load) / params.load_capacitance;
  return dx;
}

Eigen::VectorXd PHSubsystem::input_map(const Eigen::VectorXd& x_local) const {
  if (kind == Kind::Source) return g_source;
  Eigen::VectorXd g(3);
  g << -x_local[1] * inv_bus_capacitance, x_local[0] * inv_filter_inductance, 0.0;
  return g;
}

std::vector<PHSubsystem> build_ph(const MicrogridParams& params, const DampingGains& damping,
                                  double duty_star) {
  params.validate();
  const std::size_t n = params.n_sources();
  if (damping.source.size() != n) throw StructuralError("one damping gain per source required");

  std::vector<PHSubsystem> out;
  out.reserve(n + 1);
  for (std::size_t j = 0; j < n; ++j) {
    const auto& s = params.sources[j];
    PHSubsystem ph;
    ph.kind = PHSubsystem::Kind::Source;
    ph.index = j;
    ph.q = Eigen::Vector2d(s.capacitance, s.inductance);
    const double w = 1.0 / (s.inductance * s.capacitance);
    ph.J = Eigen::Matrix2d{{0.0, -w}, {w, 0.0}};
    ph.R = Eigen::Matrix2d::Zero();
    ph.R(1, 1) = s.resistance / (s.inductance * s.inductance);
    ph.J_cl = ph.J;
    ph.R_cl = ph.R;
    ph.R_cl(0, 0) = damping.source[j] / (s.capacitance * s.capacitance);
    ph.g_source = Eigen::Vector2d(1.0 / s.capacitance, 0.0);
    ph.g_z = Eigen::MatrixXd::Zero(2, 1);
    ph.g_z(1, 0) = 1.0 / s.inductance;
    out.push_back(std::move(ph));
  }

  PHSubsystem load;
  load.kind = PHSubsystem::Kind::Load;
  const double cb = params.bus_capacitance;
  const double lf = params.filter_inductance;
  const double cl = params.load_capacitance;
  load.q = Eigen::Vector3d(cb, lf, cl);
  load.J = Eigen::Matrix3d::Zero();
  load.J(1, 2) = -1.0 / (lf * cl);
  load.J(2, 1) = 1.0 / (lf * cl);
  load.R = Eigen::Matrix3d::Zero();
  load.R(0, 0) = 1.0 / (params.linear_load * cb * cb);
  load.R(2, 2) = 1.0 / (params.nonlinear_load * cl * cl);
  load.J_cl = load.J;
  load.J_cl(0, 1) = duty_star / (cb * lf);
  load.J_cl(1, 0) = -duty_star / (cb * lf);
  load.R_cl = load.R;
  load.R_cl(1, 1) = damping.load / (lf * lf);
  load.g_z = Eigen::MatrixXd::Zero(3, static_cast<Eigen::Index>(n));
  load.g_z.row(0).setConstant(-1.0 / cb);
  load.inv_bus_capacitance = 1.0 / cb;
  load.inv_filter_inductance = 1.0 / lf;
  out.push_back(std::move(load));
  return out;
}

GridState ph_vector_field(std::span<const PHSubsystem> subsystems, const GridState& state,
                          const ControlVector& input) {
  const std::size_t n = state.n_sources();
  if (subsystems.size() != n + 1 || input.source_current.size() != n) {
    throw StructuralError("port wiring: expected " + std::to_string(n + 1) + " subsystems");
  }
  const auto& load = subsystems.back();
  if (load.kind != PHSubsystem::Kind::Load || static_cast<std::size_t>(load.g_z.cols()) != n) {
    throw StructuralError("port wiring: load subsystem must close over every source");
  }

  GridState dx(n);
  const Eigen::VectorXd& x = state.vec();
  for (std::size_t j = 0; j < n; ++j) {
    const auto& ph = subsystems[j];
    if (ph.kind != PHSubsystem::Kind::Source || ph.dim() != 2) {
      throw StructuralError("port wiring: subsystem " + std::to_string(j) + " is not a source");
    }
    const Eigen::Vector2d xj = x.segment<2>(static_cast<Eigen::Index>(2 * j));
    const Eigen::Vector2d dH = ph.q.cwiseProduct(xj);
    Eigen::Vector2d f = (ph.J - ph.R) * dH + ph.g_source * input.source_current[j];
    f += ph.g_z.col(0) * (-state.vb());
    dx.vec().segment<2>(static_cast<Eigen::Index>(2 * j)) = f;
  }

  const Eigen::Vector3d xk = x.tail<3>();
  const Eigen::Vector3d dH = load.q.cwiseProduct(xk);
  Eigen::VectorXd z(static_cast<Eigen::Index>(n));
  for (std::size_t j = 0; j < n; ++j) z[static_cast<Eigen::Index>(j)] = -state.it(j);
  Eigen::Vector3d f = (load.J - load.R) * dH + load.input_map(xk) * input.duty + load.g_z * z;
  dx.vec().tail<3>() = f;
  return dx;
}

Eigen::VectorXd hamiltonian_weights(const MicrogridParams& params) {
  const std::size_t n = params.n_sources();
  Eigen::VectorXd q(static_cast<Eigen::Index>(params.state_dim()));
  for (std::size_t j = 0; j < n; ++j) {
    q[static_cast<Eigen::Index>(2 * j)] = params.sources[j].capacitance;
    q[static_cast<Eigen::Index>(2 * j + 1)] = params.sources[j].inductance;
  }
  const auto base = static_cast<Eigen::Index>(2 * n);
  q[base] = params.bus_capacitance;
  q[base + 1] = params.filter_inductance;
  q[base + 2] = params.load_capacitance;
  return q;
}

double hamiltonian(const MicrogridParams& params, const GridState& state,
                   const GridState* reference) {
  require_dim(params, state);
  Eigen::VectorXd e = state.vec();
  if (reference != nullptr) {
    require_dim(params, *reference);
    e -= reference->vec();
  }
  return 0.5 * hamiltonian_weights(params).dot(e.cwiseAbs2());
}

double check_port_cancellation(std::span<const PHSubsystem> subsystems, const GridState& state) {
  const std::size_t n = state.n_sources();
  if (subsystems.size() != n + 1) throw StructuralError("port wiring: subsystem count mismatch");
  double total = 0.0;
  // sources: y_j = i_tj, z_j = -v_b
  for (std::size_t j = 0; j < n; ++j) total += state.it(j) * (-state.vb());
  // load: y_k = -[v_b ... v_b], z_k = -[i_t1 ... i_t,k-1]
  for (std::size_t j = 0; j < n; ++j) total += (-state.vb()) * (-state.it(j));
  return total;
}

}  // namespace dcmg
