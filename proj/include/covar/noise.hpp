#pragma once

#include <cstdint>

#include "covar/provider.hpp"

namespace covar {

/// Gaussian shot noise of standard deviation 1/sqrt(N_s) added independently
/// to every returned expectation value.
struct ShotNoiseConfig {
  double n_shots = 1e5;
  std::uint64_t seed = 0;
};

/// Global-depolarization-plus-perturbation model: F <O>_ideal + (1-F) e_O
/// where e_O ~ N(0, sigma^2) is drawn once per observable and reused.
struct CircuitNoiseConfig {
  double fidelity = 0.9;
  double sigma = 0.01;
  std::uint64_t seed = 0;
};

class ShotNoisyProvider final : public ExpectationProvider {
 public:
  ShotNoisyProvider(ProviderPtr inner, ShotNoiseConfig config);

  std::uint64_t snapshot_count() const override { return inner_->snapshot_count(); }

 protected:
  std::vector<double> estimate(const Ansatz& ansatz, std::span<const double> theta,
                               std::span<const PauliString> observables) override;

 private:
  ProviderPtr inner_;
  ShotNoiseConfig config_;
  std::uint64_t query_index_ = 0;
};

class CircuitNoisyProvider final : public ExpectationProvider {
 public:
  CircuitNoisyProvider(ProviderPtr inner, CircuitNoiseConfig config);

  std::uint64_t snapshot_count() const override { return inner_->snapshot_count(); }

  /// The fixed error-state overlap for one observable; deterministic in
  /// (seed, observable) regardless of query order.
  double observable_offset(const PauliString& p) const;

 protected:
  std::vector<double> estimate(const Ansatz& ansatz, std::span<const double> theta,
                               std::span<const PauliString> observables) override;

 private:
  ProviderPtr inner_;
  CircuitNoiseConfig config_;
};

ProviderPtr shot_noisy_provider(ProviderPtr inner, ShotNoiseConfig config);
ProviderPtr circuit_noisy_provider(ProviderPtr inner, CircuitNoiseConfig config);

/// (1 - eps1)^{n1} (1 - eps2)^{n2}: circuit fidelity from per-gate error
/// rates and gate counts.
double fidelity_from_rates(double eps1, double eps2, long n1_gates, long n2_gates);

}  // namespace covar
