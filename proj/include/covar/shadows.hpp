#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "covar/provider.hpp"

namespace covar {

/// One randomized single-qubit Pauli-basis measurement: per-qubit basis
/// choice (2-bit codes 0=X, 1=Y, 2=Z) and the measured bits.
struct Snapshot {
  std::uint64_t bases = 0;
  std::uint64_t outcomes = 0;

  int basis(int qubit) const { return static_cast<int>((bases >> (2 * qubit)) & 3u); }
  int outcome(int qubit) const { return static_cast<int>((outcomes >> qubit) & 1u); }
};

struct ShadowSet {
  int n_qubits = 0;
  int n_batches = 1;
  std::vector<Snapshot> snapshots;

  std::string to_text() const;
  static ShadowSet from_text(const std::string& text);
};

/// Statement-2 bookkeeping: K = ceil(2 ln(2M/delta)) median-of-means batches
/// of ceil(34 * 3^l / eps^2) snapshots each.
struct SampleBudget {
  double epsilon = 0.1;
  double delta = 0.05;
  int locality = 2;
  int n_observables = 1;
  int n_batches = 1;
  long per_batch = 1;

  long total() const { return static_cast<long>(n_batches) * per_batch; }
};

SampleBudget plan_budget(double epsilon, double delta, int locality, int n_observables);

/// Independent snapshots with uniformly random bases and Born-rule outcomes
/// of the basis-rotated state; snapshot i is seeded from (seed, i).
ShadowSet acquire(const Statevector& state, long n_snapshots, std::uint64_t seed,
                  int n_batches = 1);

/// Median over contiguous batch means of the factorized single-snapshot
/// estimator: product over the support of 3 * (+-1), or 0 on any basis
/// mismatch.
double estimate(const ShadowSet& shadows, const PauliString& p);

class ShadowProvider final : public ExpectationProvider {
 public:
  ShadowProvider(SampleBudget budget, std::uint64_t seed) : budget_(budget), seed_(seed) {}

  std::uint64_t snapshot_count() const override { return snapshots_; }
  const SampleBudget& budget() const { return budget_; }

 protected:
  // Fresh shadows per query: each parameter configuration is a distinct
  // state, so budgets cannot be shared across configurations.
  std::vector<double> estimate(const Ansatz& ansatz, std::span<const double> theta,
                               std::span<const PauliString> observables) override;

 private:
  SampleBudget budget_;
  std::uint64_t seed_ = 0;
  std::uint64_t query_index_ = 0;
  std::uint64_t snapshots_ = 0;
};

}  // namespace covar
