#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>

#include "covar/covariance.hpp"

namespace covar {

enum class Regularizer { identity, jtj_diagonal };

struct LmConfig {
  int n_constraints = 1;
  double lambda0 = 1e-4;
  double lambda_growth = 2.0;
  Regularizer regularizer = Regularizer::identity;
  double max_component_step = 1.0;
  int max_iterations = 50;
  double convergence_tol = 1e-9;
  bool resample_each_iteration = true;
  bool linesearch_enabled = false;
  int max_lambda_growths = 30;

  void validate() const;
};

struct IterationRecord {
  int iter = 0;
  double f_norm = 0;          // ||f~|| of the accepted candidate on this iteration's set
  double lambda = 0;
  double step_norm = 0;
  double energy = 0;
  double variance = 0;
  double infidelity = 0;      // NaN when no reference state is known
  double infidelity_max_basis = 0;
  bool flagged = false;       // no lambda decreased the norm; least-bad step taken
  double wall_ms = 0;
};

struct IterationTrace {
  std::vector<IterationRecord> rows;

  int flagged_count() const;
};

/// Fixed trace schema shared by CoVaR and the baseline optimizers.
void write_trace_csv(const IterationTrace& trace, std::ostream& out);

/// Noiseless diagnostics: energy, variance and infidelities are always
/// evaluated on the exact state regardless of the optimisation provider.
class MetricsEvaluator {
 public:
  MetricsEvaluator(HermitianOperator hamiltonian, std::optional<Statevector> reference);

  struct Metrics {
    double energy = 0;
    double variance = 0;
    double infidelity = 0;
    double infidelity_max_basis = 0;
  };
  Metrics evaluate(const Ansatz& ansatz, std::span<const double> theta) const;

  const HermitianOperator& hamiltonian() const { return hamiltonian_; }

 private:
  HermitianOperator hamiltonian_;
  std::optional<Statevector> reference_;
};

/// Damped normal-equations step -(J~^T J~ + lambda R)^{-1} J~^T f~, rescaled
/// so that no component exceeds max_component_step.
Eigen::VectorXd lm_step(const StackedSystem& stacked, double lambda, Regularizer regularizer,
                        double max_component_step = 1.0);

struct CovarResult {
  std::vector<double> theta;
  IterationTrace trace;
  bool converged = false;
};

/// The CoVaR iteration: resample constraints, build (f, J), stack, then an
/// inner lambda loop accepting the first step that decreases ||f~|| on the
/// iteration's own constraint set. lambda restarts at lambda0 every
/// iteration; after max_lambda_growths failures the smallest-norm candidate
/// is taken and the iteration flagged.
CovarResult covar_iterate(ExpectationProvider& provider, const Ansatz& ansatz,
                          std::span<const double> theta0, const HermitianOperator& h,
                          const OperatorPool& pool, const LmConfig& config, std::uint64_t seed,
                          const MetricsEvaluator* metrics = nullptr);

/// Same iteration over an explicit constraint pool (e.g. the commuting pool
/// of a recompilation task).
CovarResult covar_iterate(ExpectationProvider& provider, const Ansatz& ansatz,
                          std::span<const double> theta0, const HermitianOperator& h,
                          std::span<const PauliString> pool_members, const LmConfig& config,
                          std::uint64_t seed, const MetricsEvaluator* metrics = nullptr);

double single_constraint_newton(double f_k, double j_k);

struct OverdeterminationResult {
  double least_squares = 0;               // 1-D LS estimate of the update
  std::vector<double> newton_estimates;   // per stacked constraint row
  double newton_mean = 0;
};

/// Fig.-3-style experiment: all parameters at theta* except one disturbed by
/// delta0; compares single-constraint Newton updates with the joint
/// least-squares update along that parameter (exact covariances).
OverdeterminationResult overdetermination_demo(const Ansatz& ansatz,
                                               std::span<const double> theta_star,
                                               int disturbed_param, double delta0,
                                               const OperatorPool& pool, int n_c,
                                               const HermitianOperator& h, std::uint64_t seed);

using ProviderFactory = std::function<ProviderPtr(std::uint64_t seed)>;

struct NoiseFloorRow {
  int n_constraints = 0;
  double step_error_std = 0;  // std of the first-step deviation over noise seeds
};

/// Error statistics of the overdetermined single-parameter update (the
/// setting of the shot-noise-floor analysis): one parameter disturbed by
/// delta0, the first-step estimate recomputed under fresh noise per seed,
/// and its deviation from the exact estimate collected per constraint count.
/// The error stays bounded by the per-entry noise level as N_c grows.
std::vector<NoiseFloorRow> noise_floor_probe(const Ansatz& ansatz,
                                             std::span<const double> theta_star,
                                             int disturbed_param, double delta0,
                                             const HermitianOperator& h,
                                             const OperatorPool& pool,
                                             std::span<const int> constraint_counts,
                                             const ProviderFactory& noisy_factory,
                                             int n_noise_seeds, std::uint64_t seed);

}  // namespace covar
