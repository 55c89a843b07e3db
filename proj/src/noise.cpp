#include "covar/noise.hpp"

#include <cmath>
#include <stdexcept>

#include "covar/rng.hpp"

namespace covar {

ShotNoisyProvider::ShotNoisyProvider(ProviderPtr inner, ShotNoiseConfig config)
    : inner_(std::move(inner)), config_(config) {
  if (config_.n_shots < 1) throw std::invalid_argument("shot count must be at least 1");
}

std::vector<double> ShotNoisyProvider::estimate(const Ansatz& ansatz,
                                                std::span<const double> theta,
                                                std::span<const PauliString> observables) {
  std::vector<double> values = (*inner_)(ansatz, theta, observables);
  auto rng = make_rng(derive_seed(config_.seed, query_index_++));
  std::normal_distribution<double> noise(0.0, 1.0 / std::sqrt(config_.n_shots));
  for (double& v : values) v += noise(rng);
  return values;  // base clamps to [-1, 1]
}

CircuitNoisyProvider::CircuitNoisyProvider(ProviderPtr inner, CircuitNoiseConfig config)
    : inner_(std::move(inner)), config_(config) {
  if (config_.fidelity <= 0 || config_.fidelity > 1)
    throw std::invalid_argument("fidelity must lie in (0, 1]");
  if (config_.sigma < 0) throw std::invalid_argument("sigma must be non-negative");
}

double CircuitNoisyProvider::observable_offset(const PauliString& p) const {
  auto rng = make_rng(derive_seed(config_.seed, p.x_mask(), p.z_mask()));
  std::normal_distribution<double> overlap(0.0, config_.sigma);
  return overlap(rng);
}

std::vector<double> CircuitNoisyProvider::estimate(const Ansatz& ansatz,
                                                   std::span<const double> theta,
                                                   std::span<const PauliString> observables) {
  std::vector<double> values = (*inner_)(ansatz, theta, observables);
  for (std::size_t i = 0; i < values.size(); ++i)
    values[i] = config_.fidelity * values[i] +
                (1.0 - config_.fidelity) * observable_offset(observables[i]);
  return values;
}

ProviderPtr shot_noisy_provider(ProviderPtr inner, ShotNoiseConfig config) {
  return std::make_shared<ShotNoisyProvider>(std::move(inner), config);
}

ProviderPtr circuit_noisy_provider(ProviderPtr inner, CircuitNoiseConfig config) {
  return std::make_shared<CircuitNoisyProvider>(std::move(inner), config);
}

double fidelity_from_rates(double eps1, double eps2, long n1_gates, long n2_gates) {
  if (eps1 < 0 || eps1 >= 1 || eps2 < 0 || eps2 >= 1)
    throw std::invalid_argument("error rates must lie in [0, 1)");
  return std::pow(1.0 - eps1, static_cast<double>(n1_gates)) *
         std::pow(1.0 - eps2, static_cast<double>(n2_gates));
}

}  // namespace covar
