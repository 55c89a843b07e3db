#include <doctest.h>

#include <cmath>

#include "covar/covariance.hpp"
#include "covar/tasks.hpp"
#include "oracles.hpp"

using namespace covar;

TEST_CASE("recompilation with zero perturbation starts at the solution") {
  auto [task, theta_init] = make_recompilation(4, 1, 7, 0.0);
  CHECK(theta_init == task.theta_star);
  const Statevector chi = prepare(task.composite(), theta_init);
  const auto m = recompilation_metrics(chi);
  CHECK(m.infidelity_to_zero < 1e-12);
  CHECK(m.infidelity_to_nearest_basis < 1e-12);
}

TEST_CASE("recompilation task is deterministic under its seed") {
  auto [task_a, init_a] = make_recompilation(4, 2, 99, 0.3);
  auto [task_b, init_b] = make_recompilation(4, 2, 99, 0.3);
  CHECK(task_a.theta_star == task_b.theta_star);
  CHECK(init_a == init_b);
}

TEST_CASE("perturbed starts have fidelity strictly between 0 and 1") {
  double total = 0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    auto [task, theta_init] = make_recompilation(6, 2, seed, 0.3);
    const double f = 1.0 - recompilation_metrics(prepare(task.composite(), theta_init))
                               .infidelity_to_zero;
    CHECK(f > 0.0);
    CHECK(f < 1.0);
    total += f;
  }
  CHECK(total / 20 > 0.05);
  CHECK(total / 20 < 0.999);
}

TEST_CASE("recompilation hamiltonian and pool structure") {
  auto [task, init] = make_recompilation(5, 1, 3, 0.1);
  CHECK(task.hamiltonian.terms.size() == 5);
  for (const auto& [coeff, str] : task.hamiltonian.terms) {
    CHECK(coeff == -1.0);
    CHECK(str.weight() == 1);
    bool all_z = true;
    for (int q = 0; q < 5; ++q) all_z &= str.letter(q) == 'I' || str.letter(q) == 'Z';
    CHECK(all_z);
  }
  CHECK(task.commuting_pool.size() == 5 + 10);  // Z_j plus Z_j Z_k
}

TEST_CASE("every computational basis state is a joint root of the recompilation problem") {
  auto [task, init] = make_recompilation(4, 1, 5, 0.0);
  const OperatorPool pool = enumerate_pool(4, 2);
  for (std::size_t basis = 0; basis < 16; basis += 3) {
    const Statevector state = Statevector::basis_state(4, basis);
    for (const auto& o : pool.members)
      CHECK(std::abs(covariance_on_state(state, o, task.hamiltonian)) < 1e-12);
  }
}

TEST_CASE("spin ring structure") {
  const SpinRingTask task = make_spin_ring(4, 0.1, 11);
  int coupling_terms = 0, onsite_terms = 0;
  for (const auto& [coeff, str] : task.hamiltonian.terms) {
    if (str.weight() == 2) ++coupling_terms;
    if (str.weight() == 1) ++onsite_terms;
  }
  CHECK(coupling_terms == 12);
  CHECK(onsite_terms == 4);
  for (double c : task.onsite) {
    CHECK(c >= -1.0);
    CHECK(c <= 1.0);
  }
  CHECK_THROWS_AS(make_spin_ring(2, 0.1, 0), std::invalid_argument);

  // Hermitian with a real spectrum and zero trace
  const Eigen::MatrixXcd m = oracle::dense(task.hamiltonian);
  CHECK((m - m.adjoint()).norm() < 1e-12);
  CHECK(std::abs(m.trace()) < 1e-12);
}

TEST_CASE("decoupled ring is diagonal with a basis-state ground state") {
  const SpinRingTask task = make_spin_ring(4, 0.0, 23);
  const Eigensystem sys = exact_eigensystem(task.hamiltonian);
  const Statevector ground = statevector_from_column(sys.vectors, 0);
  CHECK(fidelity_max_basis(ground).first == doctest::Approx(1.0).epsilon(1e-10));
}

TEST_CASE("ring ground energy matches the dense oracle") {
  const SpinRingTask task = make_spin_ring(4, 0.1, 17);
  const Eigensystem sys = exact_eigensystem(task.hamiltonian);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> solver(oracle::dense(task.hamiltonian));
  CHECK(std::abs(sys.values(0) - solver.eigenvalues()(0)) < 1e-10);
}

TEST_CASE("recompilation metrics on simple states") {
  const Statevector zero = Statevector::zero_state(3);
  auto m = recompilation_metrics(zero);
  CHECK(m.infidelity_to_zero == doctest::Approx(0.0));
  CHECK(m.infidelity_to_nearest_basis == doctest::Approx(0.0));

  const Statevector one = Statevector::basis_state(3, 1);
  m = recompilation_metrics(one);
  CHECK(m.infidelity_to_zero == doctest::Approx(1.0));
  CHECK(m.infidelity_to_nearest_basis == doctest::Approx(0.0));

  Statevector uniform = Statevector::zero_state(2);
  for (auto& a : uniform.amps) a = 0.5;
  m = recompilation_metrics(uniform);
  CHECK(m.infidelity_to_zero == doctest::Approx(0.75));
  CHECK(m.infidelity_to_nearest_basis == doctest::Approx(0.75));
}
