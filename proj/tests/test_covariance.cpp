#include <doctest.h>

#include <cmath>
#include <sstream>

#include "covar/covariance.hpp"
#include "covar/rng.hpp"
#include "covar/tasks.hpp"
#include "oracles.hpp"

using namespace covar;

namespace {

std::vector<double> random_theta(int n, std::uint64_t seed) {
  auto rng = make_rng(seed);
  std::uniform_real_distribution<double> dist(-M_PI, M_PI);
  std::vector<double> theta(n);
  for (double& t : theta) t = dist(rng);
  return theta;
}

}  // namespace

TEST_CASE("covariances vanish on every exact eigenstate (necessary conditions)") {
  const SpinRingTask task = make_spin_ring(4, 0.1, 3);
  const Eigensystem sys = exact_eigensystem(task.hamiltonian);
  const OperatorPool pool = enumerate_pool(4, 2);
  for (int k = 0; k < 16; ++k) {
    const Statevector state = statevector_from_column(sys.vectors, k);
    for (std::size_t m = 0; m < pool.size(); m += 7)
      CHECK(std::abs(covariance_on_state(state, pool.members[m], task.hamiltonian)) < 1e-9);
  }
}

TEST_CASE("sufficient conditions are contrapositive to nonzero variance") {
  const SpinRingTask task = make_spin_ring(4, 0.3, 5);
  for (int trial = 0; trial < 10; ++trial) {
    const Statevector state = oracle::random_state(4, 400 + trial);
    if (variance_on_state(state, task.hamiltonian) <= 0.01) continue;
    double max_f = 0;
    for (const auto& [coeff, str] : task.hamiltonian.terms)
      max_f = std::max(max_f, std::abs(covariance_on_state(state, str, task.hamiltonian)));
    CHECK(max_f > 1e-9);
  }
}

TEST_CASE("basis states are joint roots of a diagonal hamiltonian term pool") {
  HermitianOperator diag;
  for (int j = 0; j < 3; ++j) {
    PauliString p(3);
    p.set_letter(j, 'Z');
    diag.terms.push_back({j == 1 ? -0.5 : 1.0, p});
  }
  const Statevector basis = Statevector::basis_state(3, 5);
  for (const auto& [coeff, str] : diag.terms)
    CHECK(std::abs(covariance_on_state(basis, str, diag)) < 1e-12);
}

TEST_CASE("covariance matches the dense definition on random states") {
  const PauliString o = PauliString::from_string("XII");
  PauliString z1(3);
  z1.set_letter(1, 'Z');
  const HermitianOperator h{{{1.0, z1}}};
  for (int trial = 0; trial < 20; ++trial) {
    const Statevector state = oracle::random_state(3, 500 + trial);
    const cplx expected =
        oracle::dense_covariance(state, oracle::dense(o), oracle::dense(h));
    CHECK(std::abs(covariance_on_state(state, o, h) - expected) < 1e-12);
  }
}

TEST_CASE("provider-path covariance agrees with the dense oracle") {
  const Ansatz hea = build_hea(3, 1);
  const std::vector<double> theta = random_theta(hea.n_params, 600);
  const HermitianOperator h = oracle::random_operator(3, 5, 2, 601);
  const Statevector state = prepare(hea, theta);
  ExactProvider provider;
  const OperatorPool pool = enumerate_pool(3, 2);
  for (std::size_t m = 0; m < pool.size(); m += 5) {
    const cplx via_provider = covariance(provider, hea, theta, pool.members[m], h);
    const cplx expected =
        oracle::dense_covariance(state, oracle::dense(pool.members[m]), oracle::dense(h));
    CHECK(std::abs(via_provider - expected) < 1e-12);
  }
}

TEST_CASE("covariance vector on the sufficient set vanishes at the solution") {
  auto [task, init] = make_recompilation(4, 1, 21, 0.3);
  const Ansatz composite = task.composite();
  ExactProvider provider;
  std::vector<PauliString> sufficient;
  for (const auto& [coeff, str] : task.hamiltonian.terms) sufficient.push_back(str);
  const Eigen::VectorXcd at_root =
      covariance_vector(provider, composite, task.theta_star, sufficient, task.hamiltonian);
  CHECK(at_root.norm() < 1e-12);

  const Eigen::VectorXcd perturbed = covariance_vector(
      provider, composite, init, std::vector<PauliString>{task.commuting_pool},
      task.hamiltonian);
  CHECK(perturbed.norm() > 1e-4);
}

TEST_CASE("duplicate constraints give identical entries") {
  const Ansatz hea = build_hea(3, 1);
  const std::vector<double> theta = random_theta(hea.n_params, 700);
  const HermitianOperator h = oracle::random_operator(3, 3, 2, 701);
  ExactProvider provider;
  const PauliString o = PauliString::from_string("XZI");
  const std::vector<PauliString> twice{o, o};
  const Eigen::VectorXcd f = covariance_vector(provider, hea, theta, twice, h);
  CHECK(f(0) == f(1));
}

TEST_CASE("jacobian column vanishes for a disconnected parameter") {
  Ansatz a;
  a.n_qubits = 3;
  a.n_params = 3;
  for (int q = 0; q < 3; ++q) {
    PauliString p(3);
    p.set_letter(q, 'Y');
    a.gates.push_back(Gate::rotation(p, q));
  }
  PauliString z0(3), x1(3);
  z0.set_letter(0, 'Z');
  x1.set_letter(1, 'X');
  const HermitianOperator h{{{0.8, z0}, {-0.3, x1}}};
  const std::vector<PauliString> constraints{z0, x1};
  ExactProvider provider;
  const std::vector<double> theta{0.3, -0.9, 1.4};
  const Eigen::MatrixXcd jac = jacobian(provider, a, theta, constraints, h);
  CHECK(jac.col(2).norm() < 1e-12);   // qubit-2 rotation commutes through everything
  CHECK(jac.col(0).norm() > 1e-3);
}

TEST_CASE("jacobian matches finite differences of exact covariances") {
  const Ansatz hea = build_hea(4, 1);
  const std::vector<double> theta = random_theta(hea.n_params, 800);
  const HermitianOperator h = oracle::random_operator(4, 4, 2, 801);
  const OperatorPool pool = enumerate_pool(4, 2);
  auto rng = make_rng(802);
  const std::vector<PauliString> constraints = sample_constraints(pool, 12, rng);

  ExactProvider provider;
  const Eigen::MatrixXcd jac = jacobian(provider, hea, theta, constraints, h);
  const double step = 1e-5;
  for (int n = 0; n < hea.n_params; n += 4) {
    std::vector<double> tp = theta, tm = theta;
    tp[n] += step;
    tm[n] -= step;
    const Eigen::VectorXcd fp = covariance_vector(provider, hea, tp, constraints, h);
    const Eigen::VectorXcd fm = covariance_vector(provider, hea, tm, constraints, h);
    const Eigen::VectorXcd fd = (fp - fm) / (2 * step);
    CHECK((jac.col(n) - fd).cwiseAbs().maxCoeff() < 1e-6);
  }
}

TEST_CASE("jacobian stays finite and nonzero at an exact root") {
  auto [task, init] = make_recompilation(4, 1, 33, 0.0);
  const Ansatz composite = task.composite();
  ExactProvider provider;
  auto rng = make_rng(34);
  const std::vector<PauliString> constraints =
      sample_constraints(enumerate_pool(4, 2), 20, rng);
  const CovarianceSystem system =
      build_system(provider, composite, task.theta_star, constraints, task.hamiltonian, true);
  CHECK(system.f.norm() < 1e-12);
  CHECK(system.jacobian.allFinite());
  CHECK(system.jacobian.norm() > 1e-6);
}

TEST_CASE("building the jacobian costs exactly 2 nu + 1 provider queries") {
  const Ansatz hea = build_hea(3, 1);
  const std::vector<double> theta = random_theta(hea.n_params, 900);
  const HermitianOperator h = oracle::random_operator(3, 3, 2, 901);
  const OperatorPool pool = enumerate_pool(3, 2);
  auto rng = make_rng(902);
  const std::vector<PauliString> constraints = sample_constraints(pool, 8, rng);
  ExactProvider provider;
  build_system(provider, hea, theta, constraints, h, true);
  CHECK(provider.query_count() == static_cast<std::uint64_t>(2 * hea.n_params + 1));
}

TEST_CASE("stacking") {
  CovarianceSystem system;
  system.f.resize(1);
  system.f(0) = cplx{1.0, 2.0};
  system.jacobian.resize(1, 2);
  system.jacobian(0, 0) = cplx{3.0, 4.0};
  system.jacobian(0, 1) = cplx{-1.0, 0.5};
  const StackedSystem stacked = stack(system);
  CHECK(stacked.f(0) == 1.0);
  CHECK(stacked.f(1) == 2.0);
  CHECK(stacked.jacobian(0, 0) == 3.0);
  CHECK(stacked.jacobian(1, 0) == 4.0);

  Eigen::VectorXcd f;
  Eigen::MatrixXcd jac;
  unstack(stacked, f, jac);
  CHECK(f(0) == system.f(0));
  CHECK(jac(0, 1) == system.jacobian(0, 1));
}

TEST_CASE("a commuting pool yields a real covariance vector") {
  auto [task, init] = make_recompilation(4, 1, 41, 0.4);
  ExactProvider provider;
  const CovarianceSystem system = build_system(provider, task.composite(), init,
                                               task.commuting_pool, task.hamiltonian, false);
  const StackedSystem stacked = stack(system);
  CHECK(stacked.f.tail(system.f.size()).norm() < 1e-12);
}

TEST_CASE("variance identity") {
  // |+> with H = Z has variance 1
  Statevector plus = Statevector::zero_state(1);
  plus.amps = {cplx{M_SQRT1_2, 0}, cplx{M_SQRT1_2, 0}};
  const HermitianOperator z{{{1.0, PauliString::from_string("Z")}}};
  Eigen::VectorXcd f(1);
  f(0) = covariance_on_state(plus, z.terms[0].second, z);
  const double coeffs[] = {1.0};
  CHECK(variance_from_covariances(f, coeffs) == doctest::Approx(1.0).epsilon(1e-12));

  // eigenstates have zero variance
  const SpinRingTask ring = make_spin_ring(4, 0.1, 51);
  const Eigensystem sys = exact_eigensystem(ring.hamiltonian);
  const Statevector ground = statevector_from_column(sys.vectors, 0);
  Eigen::VectorXcd fg(ring.hamiltonian.terms.size());
  std::vector<double> hg;
  for (std::size_t a = 0; a < ring.hamiltonian.terms.size(); ++a) {
    fg(a) = covariance_on_state(ground, ring.hamiltonian.terms[a].second, ring.hamiltonian);
    hg.push_back(ring.hamiltonian.terms[a].first);
  }
  CHECK(std::abs(variance_from_covariances(fg, hg)) < 1e-10);

  // random states match the dense variance
  for (int trial = 0; trial < 10; ++trial) {
    const Statevector state = oracle::random_state(4, 1000 + trial);
    Eigen::VectorXcd fr(ring.hamiltonian.terms.size());
    for (std::size_t a = 0; a < ring.hamiltonian.terms.size(); ++a)
      fr(a) = covariance_on_state(state, ring.hamiltonian.terms[a].second, ring.hamiltonian);
    const Eigen::MatrixXcd m = oracle::dense(ring.hamiltonian);
    const Eigen::VectorXcd v = oracle::to_vector(state);
    const double dense_var = ((v.adjoint() * (m * m) * v).value() -
                              std::pow((v.adjoint() * m * v).value().real(), 2))
                                 .real();
    CHECK(std::abs(variance_from_covariances(fr, hg) - dense_var) < 1e-10);
  }
}

TEST_CASE("covariance of operators decomposed in the pool matches a^T C b") {
  const OperatorPool pool = enumerate_pool(2, 2);
  const Statevector state = oracle::random_state(2, 61);
  auto rng = make_rng(62);
  std::uniform_real_distribution<double> coeff(-1.0, 1.0);
  Eigen::VectorXd a(pool.size()), b(pool.size());
  Eigen::MatrixXcd c(pool.size(), pool.size());
  HermitianOperator op_a, op_b;
  for (std::size_t k = 0; k < pool.size(); ++k) {
    a(k) = coeff(rng);
    b(k) = coeff(rng);
    op_a.terms.push_back({a(k), pool.members[k]});
    op_b.terms.push_back({b(k), pool.members[k]});
    for (std::size_t l = 0; l < pool.size(); ++l) {
      const HermitianOperator single{{{1.0, pool.members[l]}}};
      c(k, l) = covariance_on_state(state, pool.members[k], single);
    }
  }
  const cplx via_matrix = (a.cast<cplx>().transpose() * c * b.cast<cplx>()).value();
  const cplx dense = oracle::dense_covariance(state, oracle::dense(op_a), oracle::dense(op_b));
  CHECK(std::abs(via_matrix - dense) < 1e-10);
}

TEST_CASE("orthogonal pool covariances") {
  // H = -Z with the identity circuit: f_1 = <1|-Z|0> = 0
  Ansatz identity;
  identity.n_qubits = 1;
  const HermitianOperator minus_z{{{-1.0, PauliString::from_string("Z")}}};
  const Eigen::VectorXcd f_id = orthogonal_pool_covariances(identity, {}, minus_z);
  CHECK(f_id.size() == 1);
  CHECK(std::abs(f_id(0)) < 1e-15);

  // vanishes at an expressible eigenstate
  auto [task, init] = make_recompilation(4, 1, 71, 0.0);
  const Eigen::VectorXcd at_root =
      orthogonal_pool_covariances(task.composite(), task.theta_star, task.hamiltonian);
  CHECK(at_root.norm() < 1e-10);

  // sum of squares equals the variance
  const Ansatz hea = build_hea(4, 2);
  const HermitianOperator h = oracle::random_operator(4, 6, 2, 72);
  for (int trial = 0; trial < 5; ++trial) {
    const std::vector<double> theta = random_theta(hea.n_params, 73 + trial);
    const Eigen::VectorXcd f = orthogonal_pool_covariances(hea, theta, h);
    const double var = variance_on_state(prepare(hea, theta), h);
    CHECK(std::abs(f.squaredNorm() - var) < 1e-10);
  }
}

TEST_CASE("system dump carries f and J") {
  const Ansatz hea = build_hea(3, 1);
  const std::vector<double> theta = random_theta(hea.n_params, 950);
  const HermitianOperator h = oracle::random_operator(3, 3, 2, 951);
  ExactProvider provider;
  const OperatorPool pool = enumerate_pool(3, 2);
  auto rng = make_rng(952);
  const std::vector<PauliString> constraints = sample_constraints(pool, 4, rng);
  const CovarianceSystem system = build_system(provider, hea, theta, constraints, h, true);
  std::ostringstream out;
  dump_system(system, out);
  const std::string text = out.str();
  CHECK(text.find("f 4") != std::string::npos);
  CHECK(text.find("J 4 9") != std::string::npos);
  CHECK(text.find(constraints[0].str()) != std::string::npos);
}

TEST_CASE("importance weights") {
  Eigen::VectorXcd f(3);
  f << cplx{0, 0}, cplx{0.5, 0}, cplx{0, 0};
  auto w = importance_weights(f);
  REQUIRE(w.has_value());
  CHECK((*w)[1] == doctest::Approx(1.0));

  f << cplx{0.3, 0}, cplx{0, -0.3}, cplx{0, 0};
  w = importance_weights(f);
  CHECK((*w)[0] == doctest::Approx(0.5));
  CHECK((*w)[1] == doctest::Approx(0.5));

  auto rng = make_rng(81);
  std::uniform_real_distribution<double> dist(-1, 1);
  Eigen::VectorXcd r(20);
  for (int i = 0; i < 20; ++i) r(i) = cplx{dist(rng), dist(rng)};
  w = importance_weights(r);
  double sum = 0;
  for (double p : *w) sum += p;
  CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));

  CHECK_FALSE(importance_weights(Eigen::VectorXcd::Zero(4)).has_value());
}
