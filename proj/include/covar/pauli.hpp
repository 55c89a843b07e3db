#pragma once

#include <complex>
#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <vector>

namespace covar {

/// N-qubit Pauli string stored as a pair of X/Z bit masks (two bits per
/// qubit, qubit q at bit q). Carries no phase; phases live in PhasedPauli.
class PauliString {
 public:
  PauliString() = default;
  explicit PauliString(int n_qubits);

  /// Parse "XIZY" with qubit 0 leftmost.
  static PauliString from_string(std::string_view text);

  int n_qubits() const { return n_qubits_; }
  std::uint64_t x_mask() const { return x_; }
  std::uint64_t z_mask() const { return z_; }

  char letter(int qubit) const;
  void set_letter(int qubit, char letter);

  /// Number of non-identity sites.
  int weight() const;
  bool is_identity() const { return (x_ | z_) == 0; }

  std::string str() const;

  bool operator==(const PauliString&) const = default;
  bool operator<(const PauliString& other) const {
    if (n_qubits_ != other.n_qubits_) return n_qubits_ < other.n_qubits_;
    if (x_ != other.x_) return x_ < other.x_;
    return z_ < other.z_;
  }

 private:
  std::uint64_t x_ = 0;
  std::uint64_t z_ = 0;
  int n_qubits_ = 0;
};

/// Element of the Pauli group: phase in {+1, +i, -1, -i} times a string.
struct PhasedPauli {
  std::complex<double> phase{1.0, 0.0};
  PauliString string;
};

/// a * b as a matrix identity a.b = phase * c.
PhasedPauli multiply(const PauliString& a, const PauliString& b);

/// True iff [a, b] = 0, i.e. the number of sites where both act
/// non-trivially with different letters is even.
bool commutes(const PauliString& a, const PauliString& b);

/// The Hermitian halves of the product o.h = P + iQ:
/// P = (1/2){o,h} (present iff o,h commute), Q = -(i/2)[o,h] (present iff
/// they anticommute). Exactly one is set; both carry a real +-1 phase.
struct SymmetrizedProducts {
  std::optional<PhasedPauli> anticommutator_half;  // P_ka
  std::optional<PhasedPauli> commutator_half;      // Q_ka
};
SymmetrizedProducts symmetrized_products(const PauliString& o, const PauliString& h);

/// All Pauli strings of weight 1..locality_bound, deterministic order
/// (by weight, then support, then letters with X < Y < Z).
struct OperatorPool {
  std::vector<PauliString> members;
  int locality_bound = 0;
  int n_qubits = 0;

  std::size_t size() const { return members.size(); }
  std::string to_text() const;
};

OperatorPool enumerate_pool(int n_qubits, int locality_bound);

/// n_c distinct members drawn uniformly without replacement; output order is
/// the (partial) random permutation, so n_c == pool size permutes the pool.
std::vector<PauliString> sample_constraints(const OperatorPool& pool, int n_c,
                                            std::mt19937_64& rng);

}  // namespace covar

template <>
struct std::hash<covar::PauliString> {
  std::size_t operator()(const covar::PauliString& p) const noexcept {
    std::uint64_t h = p.x_mask() * 0x9e3779b97f4a7c15ull;
    h ^= (p.z_mask() + 0xbf58476d1ce4e5b9ull) + (h << 6) + (h >> 2);
    h ^= static_cast<std::uint64_t>(p.n_qubits()) * 0x94d049bb133111ebull;
    return static_cast<std::size_t>(h);
  }
};
