#pragma once

#include <cstdint>
#include <optional>

#include "covar/lm.hpp"

namespace covar {

struct GdConfig {
  enum class Target { energy, variance };

  double learning_rate = 0.1;
  int max_iterations = 100;
  Target target = Target::energy;
  bool adaptive = false;            // halve the step while it increases the target
  double stall_threshold = 0.0;     // stop when the improvement falls below this
};

struct NatGradConfig {
  double learning_rate = 0.05;
  double pinv_tolerance = 1e-8;
  int max_iterations = 200;
  std::optional<double> stop_energy;
};

/// Energy gradient via parameter shifts: 2 nu provider queries over the
/// Hamiltonian terms.
Eigen::VectorXd energy_gradient(ExpectationProvider& provider, const Ansatz& ansatz,
                                std::span<const double> theta, const HermitianOperator& h);

/// Gradient of Var[H] as Re[J^T h] with the Jacobian over the minimal pool
/// of Hamiltonian terms.
Eigen::VectorXd variance_gradient(ExpectationProvider& provider, const Ansatz& ansatz,
                                  std::span<const double> theta, const HermitianOperator& h);

/// Real part of the quantum geometric tensor from exact state derivatives.
Eigen::MatrixXd quantum_fisher_matrix(const Ansatz& ansatz, std::span<const double> theta);

/// theta - eta F^+ grad E with a tolerance-based pseudo-inverse (exact,
/// noiseless path; this optimizer only serves as an initializer).
std::vector<double> natural_gradient_step(const Ansatz& ansatz, std::span<const double> theta,
                                          const HermitianOperator& h, const NatGradConfig& config);

enum class BaselineKind { vqe, variance_vqe, nat_grad };

struct BaselineResult {
  std::vector<double> theta;
  IterationTrace trace;
  bool stalled = false;  // stopped because the improvement fell below the threshold
};

BaselineResult run_baseline(BaselineKind kind, ExpectationProvider& provider,
                            const Ansatz& ansatz, std::span<const double> theta0,
                            const HermitianOperator& h, const GdConfig& gd,
                            const NatGradConfig& nat, const MetricsEvaluator* metrics = nullptr);

}  // namespace covar
