#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <vector>

#include "covar/statevector.hpp"

namespace covar {

/// Source of Pauli expectation estimates on the parametrised state. One call
/// estimates every requested string from the same underlying data, which is
/// what makes large constraint sets affordable. Returned values are clamped
/// to [-1, 1]. Implementations carry their own noise/shadow configuration.
class ExpectationProvider {
 public:
  virtual ~ExpectationProvider() = default;

  std::vector<double> operator()(const Ansatz& ansatz, std::span<const double> theta,
                                 std::span<const PauliString> observables);

  std::uint64_t query_count() const { return queries_; }
  std::uint64_t observable_count() const { return observables_; }
  virtual std::uint64_t snapshot_count() const { return 0; }

 protected:
  virtual std::vector<double> estimate(const Ansatz& ansatz, std::span<const double> theta,
                                       std::span<const PauliString> observables) = 0;

 private:
  std::uint64_t queries_ = 0;
  std::uint64_t observables_ = 0;
};

/// Noiseless statevector evaluation.
class ExactProvider final : public ExpectationProvider {
 protected:
  std::vector<double> estimate(const Ansatz& ansatz, std::span<const double> theta,
                               std::span<const PauliString> observables) override;
};

using ProviderPtr = std::shared_ptr<ExpectationProvider>;

}  // namespace covar
