#pragma once

#include <cstdint>
#include <vector>

#include "covar/statevector.hpp"

namespace covar {

/// Parameter-rediscovery benchmark: drive U(theta)^dag U(theta*) |0> to a
/// computational basis state, i.e. a joint eigenstate of the commuting pool.
struct RecompilationTask {
  Ansatz ansatz;
  std::vector<double> theta_star;
  double perturbation_scale = 0.0;
  HermitianOperator hamiltonian;          // -sum_j Z_j
  std::vector<PauliString> commuting_pool;  // {Z_j} plus weight-2 Z products

  /// U(theta)^dag applied after the frozen target circuit; same parameter
  /// count as the ansatz and |0...0> is reached exactly at theta = theta*.
  Ansatz composite() const;
};

struct SpinRingTask {
  int n_qubits = 0;
  double coupling = 0.0;
  std::vector<double> onsite;
  HermitianOperator hamiltonian;
};

std::pair<RecompilationTask, std::vector<double>> make_recompilation(int n_qubits, int n_layers,
                                                                     std::uint64_t seed,
                                                                     double perturb);

/// A fresh perturbed start theta* + delta, |delta_k| <= perturb.
std::vector<double> initial_parameters(const RecompilationTask& task, double perturb,
                                       std::uint64_t seed);

/// H = J sum_i sigma_i . sigma_{i+1} + sum_i c_i Z_i with periodic boundary
/// and c_i ~ Uniform(-1, 1).
SpinRingTask make_spin_ring(int n_qubits, double coupling, std::uint64_t seed);

struct RecompilationMetrics {
  double infidelity_to_zero = 0.0;
  double infidelity_to_nearest_basis = 0.0;
};
RecompilationMetrics recompilation_metrics(const Statevector& state);

}  // namespace covar
