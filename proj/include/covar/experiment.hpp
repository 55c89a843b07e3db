#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "covar/baselines.hpp"
#include "covar/noise.hpp"
#include "covar/shadows.hpp"
#include "covar/tasks.hpp"

namespace covar {

/// Configuration errors; the CLI maps these to exit code 2.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct TaskConfig {
  enum class Kind {
    recompilation,
    spin_ring,
    overdetermination_demo,
    noise_floor_probe,
    local_trap_escape
  };

  Kind kind = Kind::recompilation;
  int n_qubits = 4;
  int n_layers = 1;
  double perturb = 0.3;    // recompilation initial disturbance
  double coupling = 0.1;   // spin-ring J
  std::uint64_t seed = 0;  // fixes theta* / the onsite fields across runs

  // overdetermination_demo
  double delta0 = 0.5;
  int demo_constraints = 100;

  // noise_floor_probe
  std::vector<int> nc_values;
  int n_noise_seeds = 20;
};

struct ProviderConfig {
  enum class Kind { exact, shot_noise, circuit_noise, shadows };

  Kind kind = Kind::exact;
  double n_shots = 1e5;
  double fidelity = 0.9;
  double sigma = 0.01;
  double epsilon = 0.1;
  double delta = 0.05;
};

struct OptimizerConfig {
  enum class Kind { covar, vqe, variance_vqe, nat_grad, nat_grad_then_covar };

  Kind kind = Kind::covar;
  double nc_over_nu = 10;  // n_constraints = ceil(nc_over_nu * nu) unless set explicitly
  std::optional<int> n_constraints;
  LmConfig lm;
  GdConfig gd;
  NatGradConfig nat;

  // nat_grad_then_covar initialisation phase
  double init_stop_above_ground = 0.5;
  double init_perturb = 0.05;

  // local_trap_escape gradient-descent phase
  int gd_max_iterations = 1000;
  double stall_threshold = 2e-5;
};

struct PoolConfig {
  enum class Kind { local, commuting_z };

  Kind kind = Kind::local;
  int locality = 2;
};

struct SweepConfig {
  std::vector<double> nc_over_nu;
  std::vector<double> n_shots;

  bool empty() const { return nc_over_nu.empty() && n_shots.empty(); }
};

struct ExperimentConfig {
  TaskConfig task;
  ProviderConfig provider;
  OptimizerConfig optimizer;
  PoolConfig pool;
  std::vector<std::uint64_t> seeds;
  std::string output_dir = "out";
  std::optional<SweepConfig> sweep;
  bool convergence_distribution = false;  // spin-ring analysis mode
  std::vector<double> init_stop_energies_above_ground;  // distribution targets
  double classify_tol = 1e-3;

  void validate() const;
  static ExperimentConfig from_json_text(const std::string& text);
  static ExperimentConfig from_file(const std::filesystem::path& path);
};

struct SeedOutcome {
  std::uint64_t seed = 0;
  double energy_error = 0;  // vs the exact ground energy
  double infidelity = 0;
  double infidelity_max_basis = 0;
  int iterations = 0;
  int flagged = 0;
  std::uint64_t provider_queries = 0;
  std::uint64_t snapshots = 0;
  bool converged = false;
  int eigenstate_index = -1;        // nearest exact level within tolerance, else -1
  double initial_ground_overlap = 0;

  // local trap escape
  double stall_energy_error = 0;
  bool energy_transiently_increased = false;
};

struct RunSummary {
  std::vector<SeedOutcome> per_seed;
  double median_energy_error = 0;
  double median_infidelity = 0;
  double q1_infidelity = 0;
  double q3_infidelity = 0;

  void recompute_aggregates();
  std::string to_json() const;
};

double quantile(std::vector<double> values, double q);  // type-7 interpolation

/// Runs every seed of a validated config, writes per-seed trace CSVs, a
/// summary JSON and (when a sweep list is present) a sweep table. Returns 0,
/// or 1 on simulation failure; configuration problems throw ConfigError
/// before any file is written.
int run_experiment(const ExperimentConfig& config, int n_threads = 1);

/// Single-seed runner used by run_experiment and the tests.
SeedOutcome run_seed(const ExperimentConfig& config, std::uint64_t seed,
                     IterationTrace* trace_out = nullptr);

/// Gradient descent to a stall, then CoVaR; reports the energy errors before
/// and after and whether the energy transiently rose while escaping.
RunSummary local_trap_escape(const ExperimentConfig& config);

struct DistributionRow {
  double bucket_low = 0;   // initial ground-overlap bucket [low, low + width)
  int n_runs = 0;
  double fraction_ground = 0;
  std::vector<int> eigenstate_indices;
};

struct DistributionResult {
  std::vector<SeedOutcome> per_seed;
  std::vector<DistributionRow> buckets;
};

/// Natural-gradient initialisation to a spread of target energies followed
/// by CoVaR; classifies every run by the nearest exact eigenvalue.
DistributionResult convergence_distribution(const ExperimentConfig& config);

}  // namespace covar
