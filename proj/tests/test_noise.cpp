#include <doctest.h>

#include <cmath>

#include "covar/covariance.hpp"
#include "covar/noise.hpp"
#include "oracles.hpp"

using namespace covar;

namespace {

Ansatz rx_ansatz() {
  Ansatz a;
  a.n_qubits = 1;
  a.n_params = 1;
  a.gates.push_back(Gate::rotation(PauliString::from_string("X"), 0));
  return a;
}

}  // namespace

TEST_CASE("huge shot counts reproduce the exact provider") {
  auto provider = shot_noisy_provider(std::make_shared<ExactProvider>(), {1e12, 1});
  const Ansatz a = rx_ansatz();
  const std::vector<double> theta{0.4};
  const std::vector<PauliString> z{PauliString::from_string("Z")};
  CHECK(std::abs((*provider)(a, theta, z)[0] - std::cos(0.4)) < 1e-5);
}

TEST_CASE("shot noise has standard deviation 1/sqrt(N_s)") {
  auto provider = shot_noisy_provider(std::make_shared<ExactProvider>(), {1e5, 2});
  const Ansatz a = rx_ansatz();
  const std::vector<double> theta{M_PI / 2};  // <Z> = 0, no clamping bias
  const std::vector<PauliString> z{PauliString::from_string("Z")};
  const int n = 10000;
  double sum = 0, sq = 0;
  for (int i = 0; i < n; ++i) {
    const double v = (*provider)(a, theta, z)[0];
    sum += v;
    sq += v * v;
  }
  const double mean = sum / n;
  const double std_dev = std::sqrt(sq / n - mean * mean);
  const double expected = std::pow(10.0, -2.5);
  CHECK(std_dev > 0.95 * expected);
  CHECK(std_dev < 1.05 * expected);
  // averaging recovers the exact value within 3 sigma / sqrt(n)
  CHECK(std::abs(mean) < 3 * expected / 100.0);
}

TEST_CASE("noisy values stay clamped") {
  auto provider = shot_noisy_provider(std::make_shared<ExactProvider>(), {4, 3});
  const Ansatz a = rx_ansatz();
  const std::vector<double> theta{0.0};  // <Z> = 1, noise pushes above 1
  const std::vector<PauliString> z{PauliString::from_string("Z")};
  for (int i = 0; i < 200; ++i) {
    const double v = (*provider)(a, theta, z)[0];
    CHECK(v <= 1.0);
    CHECK(v >= -1.0);
  }
}

TEST_CASE("unit fidelity circuit noise is the identity") {
  auto inner = std::make_shared<ExactProvider>();
  auto provider = circuit_noisy_provider(inner, {1.0, 0.01, 5});
  const Ansatz a = rx_ansatz();
  const std::vector<double> theta{0.9};
  const std::vector<PauliString> z{PauliString::from_string("Z")};
  CHECK((*provider)(a, theta, z)[0] == doctest::Approx(std::cos(0.9)).epsilon(1e-14));
}

TEST_CASE("circuit noise offsets are fixed per observable") {
  CircuitNoisyProvider provider(std::make_shared<ExactProvider>(), {0.9, 0.01, 6});
  const Ansatz a = rx_ansatz();
  const std::vector<double> theta{0.0};
  const std::vector<PauliString> z{PauliString::from_string("Z")};
  const double first = provider(a, theta, z)[0];
  for (int i = 0; i < 10; ++i) CHECK(provider(a, theta, z)[0] == first);

  // value = F <Z> + (1-F) eps with eps ~ N(0, sigma^2): 3-sigma band around 0.9
  CHECK(std::abs(first - 0.9) <= 0.1 * 3 * 0.01);
  CHECK(provider.observable_offset(z[0]) == provider.observable_offset(z[0]));
}

TEST_CASE("fidelity from gate error rates") {
  CHECK(fidelity_from_rates(0, 0, 100, 100) == 1.0);
  CHECK(fidelity_from_rates(0.00025, 0.001, 196, 52) == doctest::Approx(0.903).epsilon(5e-3));
  CHECK(fidelity_from_rates(0.25, 0, 1, 0) == doctest::Approx(0.75));
  CHECK_THROWS_AS(fidelity_from_rates(1.0, 0, 1, 0), std::invalid_argument);
}

TEST_CASE("pure depolarization rescales f and J without turning the step") {
  // <O> = <H> = 0 at theta = pi/2 for O = Z, H = X, so both f and the
  // jacobian column scale by exactly F
  const Ansatz a = rx_ansatz();
  const std::vector<double> theta{M_PI / 2};
  const HermitianOperator h{{{1.0, PauliString::from_string("X")}}};
  const std::vector<PauliString> constraints{PauliString::from_string("Z")};

  ExactProvider exact;
  const CovarianceSystem clean = build_system(exact, a, theta, constraints, h, true);

  const double f_factor = 0.7;
  CircuitNoisyProvider noisy(std::make_shared<ExactProvider>(), {f_factor, 0.0, 9});
  const CovarianceSystem depolarized = build_system(noisy, a, theta, constraints, h, true);

  CHECK(std::abs(depolarized.f(0) - f_factor * clean.f(0)) < 1e-12);
  CHECK(std::abs(depolarized.jacobian(0, 0) - f_factor * clean.jacobian(0, 0)) < 1e-12);
}
