#include "covar/provider.hpp"

#include <algorithm>

namespace covar {

std::vector<double> ExpectationProvider::operator()(const Ansatz& ansatz,
                                                    std::span<const double> theta,
                                                    std::span<const PauliString> observables) {
  ++queries_;
  observables_ += observables.size();
  std::vector<double> values = estimate(ansatz, theta, observables);
  for (double& v : values) v = std::clamp(v, -1.0, 1.0);
  return values;
}

std::vector<double> ExactProvider::estimate(const Ansatz& ansatz, std::span<const double> theta,
                                            std::span<const PauliString> observables) {
  const Statevector state = prepare(ansatz, theta);
  std::vector<double> values;
  values.reserve(observables.size());
  for (const PauliString& p : observables) values.push_back(pauli_expectation(state, p));
  return values;
}

}  // namespace covar
