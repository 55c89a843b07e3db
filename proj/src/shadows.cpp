#include "covar/shadows.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include "covar/rng.hpp"

namespace covar {

std::string ShadowSet::to_text() const {
  std::ostringstream out;
  out << "qubits " << n_qubits << " batches " << n_batches << '\n';
  static constexpr char kBasis[3] = {'X', 'Y', 'Z'};
  for (const Snapshot& s : snapshots) {
    for (int q = 0; q < n_qubits; ++q) out << kBasis[s.basis(q)];
    out << ' ';
    for (int q = 0; q < n_qubits; ++q) out << s.outcome(q);
    out << '\n';
  }
  return out.str();
}

ShadowSet ShadowSet::from_text(const std::string& text) {
  std::istringstream in(text);
  ShadowSet set;
  std::string word;
  in >> word >> set.n_qubits >> word >> set.n_batches;
  std::string bases, bits;
  while (in >> bases >> bits) {
    Snapshot s;
    for (int q = 0; q < set.n_qubits; ++q) {
      const int code = bases[q] == 'X' ? 0 : bases[q] == 'Y' ? 1 : 2;
      s.bases |= static_cast<std::uint64_t>(code) << (2 * q);
      if (bits[q] == '1') s.outcomes |= std::uint64_t{1} << q;
    }
    set.snapshots.push_back(s);
  }
  return set;
}

SampleBudget plan_budget(double epsilon, double delta, int locality, int n_observables) {
  if (epsilon <= 0) throw std::invalid_argument("epsilon must be positive");
  if (delta <= 0 || delta > 1) throw std::invalid_argument("delta must lie in (0, 1]");
  if (locality < 0 || n_observables < 1) throw std::invalid_argument("bad budget arguments");
  SampleBudget b;
  b.epsilon = epsilon;
  b.delta = delta;
  b.locality = locality;
  b.n_observables = n_observables;
  b.n_batches = std::max<long>(1, std::lround(std::ceil(2.0 * std::log(2.0 * n_observables / delta))));
  b.per_batch = std::lround(std::ceil(34.0 * std::pow(3.0, locality) / (epsilon * epsilon)));
  return b;
}

ShadowSet acquire(const Statevector& state, long n_snapshots, std::uint64_t seed,
                  int n_batches) {
  if (n_snapshots < 1) throw std::invalid_argument("need at least one snapshot");
  if (n_batches < 1 || n_batches > n_snapshots)
    throw std::invalid_argument("batch count out of range");
  ShadowSet set;
  set.n_qubits = state.n_qubits;
  set.n_batches = n_batches;
  set.snapshots.resize(n_snapshots);

  Statevector rotated;
  for (long i = 0; i < n_snapshots; ++i) {
    SplitMix64 rng(derive_seed(seed, static_cast<std::uint64_t>(i)));
    std::uniform_int_distribution<int> basis_dist(0, 2);
    Snapshot& snap = set.snapshots[i];
    rotated = state;
    for (int q = 0; q < state.n_qubits; ++q) {
      const int basis = basis_dist(rng);
      snap.bases |= static_cast<std::uint64_t>(basis) << (2 * q);
      if (basis == 0) {
        apply_h(rotated, q);
      } else if (basis == 1) {
        apply_sdg(rotated, q);
        apply_h(rotated, q);
      }
    }
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    double u = unit(rng);
    std::size_t outcome = rotated.dim() - 1;
    for (std::size_t b = 0; b < rotated.dim(); ++b) {
      u -= std::norm(rotated.amps[b]);
      if (u <= 0) {
        outcome = b;
        break;
      }
    }
    snap.outcomes = outcome;
  }
  return set;
}

namespace {

double snapshot_estimate(const Snapshot& snap, const PauliString& p) {
  double value = 1.0;
  for (int q = 0; q < p.n_qubits(); ++q) {
    const char letter = p.letter(q);
    if (letter == 'I') continue;
    const int wanted = letter == 'X' ? 0 : letter == 'Y' ? 1 : 2;
    if (snap.basis(q) != wanted) return 0.0;
    value *= snap.outcome(q) ? -3.0 : 3.0;
  }
  return value;
}

}  // namespace

double estimate(const ShadowSet& shadows, const PauliString& p) {
  if (shadows.snapshots.empty()) throw std::invalid_argument("empty shadow set");
  if (p.is_identity()) throw std::invalid_argument("estimate expects a non-identity string");
  const int k_batches = shadows.n_batches;
  const std::size_t per = shadows.snapshots.size() / k_batches;
  if (per == 0) throw std::invalid_argument("fewer snapshots than batches");

  std::vector<double> means(k_batches, 0.0);
  for (int k = 0; k < k_batches; ++k) {
    double sum = 0;
    for (std::size_t i = k * per; i < (k + 1) * per; ++i)
      sum += snapshot_estimate(shadows.snapshots[i], p);
    means[k] = sum / static_cast<double>(per);
  }
  std::sort(means.begin(), means.end());
  const int mid = k_batches / 2;
  return (k_batches % 2 == 1) ? means[mid] : 0.5 * (means[mid - 1] + means[mid]);
}

std::vector<double> ShadowProvider::estimate(const Ansatz& ansatz, std::span<const double> theta,
                                             std::span<const PauliString> observables) {
  const Statevector state = prepare(ansatz, theta);
  const ShadowSet shadows =
      acquire(state, budget_.total(), derive_seed(seed_, query_index_++), budget_.n_batches);
  snapshots_ += shadows.snapshots.size();
  std::vector<double> values;
  values.reserve(observables.size());
  for (const PauliString& p : observables)
    values.push_back(p.is_identity() ? 1.0 : covar::estimate(shadows, p));
  return values;
}

}  // namespace covar
