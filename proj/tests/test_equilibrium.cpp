#include "dcmg/equilibrium.hpp"

#include <doctest.h>

#include <random>

using namespace dcmg;

namespace {

MicrogridParams random_params(std::size_t n, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> cap(0.1e-3, 1e-3), ind(0.05e-3, 0.5e-3),
      res(1e-3, 100e-3), load(0.5, 10.0);
  MicrogridParams p;
  for (std::size_t j = 0; j < n; ++j) p.sources.push_back({cap(rng), ind(rng), res(rng)});
  p.bus_capacitance = cap(rng);
  p.filter_inductance = ind(rng);
  p.load_capacitance = cap(rng);
  p.linear_load = load(rng);
  p.nonlinear_load = load(rng);
  return p;
}

}  // namespace

TEST_CASE("reference operating point") {
  const Equilibrium eq = solve_opf(MicrogridParams::table1(), 24.0, 0.5);
  // Frozen from an independent dense KKT solve.
  CHECK(eq.state.it(0) == doctest::Approx(8.75382932166302).epsilon(1e-12));
  CHECK(eq.state.it(1) == doctest::Approx(9.24617067833698).epsilon(1e-12));
  CHECK(eq.state.v(0) == doctest::Approx(24.16439691466083).epsilon(1e-12));
  CHECK(eq.state.v(1) == doctest::Approx(24.16439691466083).epsilon(1e-12));
  CHECK(eq.state.i_f() == doctest::Approx(12.0).epsilon(1e-15));
  CHECK(eq.state.vl() == doctest::Approx(12.0).epsilon(1e-15));
  CHECK(eq.total_load_current == doctest::Approx(18.0));
  for (std::size_t j = 0; j < 2; ++j) CHECK(eq.input.source_current[j] == eq.state.it(j));
  CHECK(eq.input.duty == 0.5);
}

TEST_CASE("printed load balance") {
  const auto p = MicrogridParams::table1();
  CHECK(total_load_current(p, 24.0, 0.5, LoadBalance::Printed) == doctest::Approx(24.0));
  const Equilibrium eq = solve_opf(p, 24.0, 0.5, LoadBalance::Printed);
  CHECK(eq.state.it(0) + eq.state.it(1) == doctest::Approx(24.0));
}

TEST_CASE("single source carries the load") {
  MicrogridParams p = MicrogridParams::table1();
  p.sources.resize(1);
  const Equilibrium eq = solve_opf(p, 24.0, 0.5);
  CHECK(eq.state.it(0) == eq.total_load_current);
}

TEST_CASE("equal resistances share equally") {
  MicrogridParams p = MicrogridParams::table1();
  p.sources[1].resistance = p.sources[0].resistance;
  const Equilibrium eq = solve_opf(p, 24.0, 0.5);
  CHECK(eq.state.it(0) == doctest::Approx(9.0));
  CHECK(eq.state.it(1) == doctest::Approx(9.0));
  const auto oracle = opf_oracle(p, 24.0, 0.5);
  CHECK(oracle[0] == doctest::Approx(oracle[1]));
}

TEST_CASE("oracle reproduces the inverse-resistance split") {
  MicrogridParams p = MicrogridParams::table1();
  p.sources = {{1e-3, 1e-4, 1e-3}, {1e-3, 1e-4, 2e-3}, {1e-3, 1e-4, 4e-3}};
  // Pick R_l so that I_L = 7 A with r_l = 1, v_b = 24, d = 0.5: 24/R_l + 6 = 7.
  p.linear_load = 24.0;
  const auto cur = opf_oracle(p, 24.0, 0.5);
  CHECK(cur[0] == doctest::Approx(4.0));
  CHECK(cur[1] == doctest::Approx(2.0));
  CHECK(cur[2] == doctest::Approx(1.0));
}

TEST_CASE("closed form matches the oracle on random parameter sets") {
  std::mt19937_64 rng(2024);
  std::uniform_int_distribution<std::size_t> count(1, 6);
  std::uniform_real_distribution<double> vb(5.0, 400.0), duty(0.0, 1.0);
  double worst = 0.0;
  for (int k = 0; k < 100; ++k) {
    const auto p = random_params(count(rng), rng);
    const double v = vb(rng), d = duty(rng);
    const Equilibrium eq = solve_opf(p, v, d);
    const auto oracle = opf_oracle(p, v, d);
    for (std::size_t j = 0; j < p.n_sources(); ++j) {
      worst = std::max(worst, std::abs(eq.state.it(j) - oracle[j]));
    }
  }
  CHECK(worst < 1e-8);
}

TEST_CASE("loss optimality against random splits") {
  const auto p = MicrogridParams::table1();
  const Equilibrium eq = solve_opf(p, 24.0, 0.5);
  const double best = line_losses(p, eq.input.source_current);
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> share(-10.0, 30.0);
  for (int k = 0; k < 1000; ++k) {
    const double a = share(rng);
    CHECK(line_losses(p, {a, eq.total_load_current - a}) >= best);
  }
}

TEST_CASE("proportional sharing and steady-state consistency") {
  std::mt19937_64 rng(77);
  for (int k = 0; k < 50; ++k) {
    const auto p = random_params(4, rng);
    const Equilibrium eq = solve_opf(p, 48.0, 0.3);
    for (std::size_t j = 0; j < 4; ++j) {
      for (std::size_t q = 0; q < 4; ++q) {
        CHECK(eq.state.it(j) / eq.state.it(q) ==
              doctest::Approx(p.sources[q].resistance / p.sources[j].resistance));
      }
    }
    const GridState dx = circuit_vector_field(p, eq.state, eq.input);
    const Eigen::VectorXd imbalance = hamiltonian_weights(p).cwiseProduct(dx.vec());
    CHECK(imbalance.cwiseAbs().maxCoeff() <= 1e-9 * eq.state.vec().cwiseAbs().maxCoeff());
  }
}

TEST_CASE("target validation") {
  const auto p = MicrogridParams::table1();
  CHECK_THROWS_AS(solve_opf(p, 0.0, 0.5), InputError);
  CHECK_THROWS_AS(solve_opf(p, -24.0, 0.5), InputError);
  CHECK_THROWS_AS(solve_opf(p, 24.0, 1.5), InputError);
  CHECK_THROWS_AS(opf_oracle(p, 24.0, -0.1), InputError);
}
