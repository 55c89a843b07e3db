#include "covar/pauli.hpp"

#include <algorithm>
#include <bit>
#include <numeric>
#include <set>
#include <sstream>
#include <stdexcept>

namespace covar {

namespace {

constexpr int kMaxQubits = 64;

void check_same_size(const PauliString& a, const PauliString& b) {
  if (a.n_qubits() != b.n_qubits())
    throw std::invalid_argument("pauli strings act on different qubit counts");
}

}  // namespace

PauliString::PauliString(int n_qubits) : n_qubits_(n_qubits) {
  if (n_qubits < 1 || n_qubits > kMaxQubits)
    throw std::invalid_argument("qubit count out of range");
}

PauliString PauliString::from_string(std::string_view text) {
  PauliString p(static_cast<int>(text.size()));
  for (int q = 0; q < p.n_qubits_; ++q) p.set_letter(q, text[q]);
  return p;
}

char PauliString::letter(int qubit) const {
  const bool x = (x_ >> qubit) & 1u;
  const bool z = (z_ >> qubit) & 1u;
  if (x && z) return 'Y';
  if (x) return 'X';
  if (z) return 'Z';
  return 'I';
}

void PauliString::set_letter(int qubit, char letter) {
  if (qubit < 0 || qubit >= n_qubits_) throw std::out_of_range("qubit index out of range");
  const std::uint64_t bit = 1ull << qubit;
  x_ &= ~bit;
  z_ &= ~bit;
  switch (letter) {
    case 'I': break;
    case 'X': x_ |= bit; break;
    case 'Y': x_ |= bit; z_ |= bit; break;
    case 'Z': z_ |= bit; break;
    default: throw std::invalid_argument("pauli letter must be one of I, X, Y, Z");
  }
}

int PauliString::weight() const { return std::popcount(x_ | z_); }

std::string PauliString::str() const {
  std::string out(static_cast<std::size_t>(n_qubits_), 'I');
  for (int q = 0; q < n_qubits_; ++q) out[q] = letter(q);
  return out;
}

PhasedPauli multiply(const PauliString& a, const PauliString& b) {
  check_same_size(a, b);
  const std::uint64_t ax = a.x_mask(), az = a.z_mask();
  const std::uint64_t bx = b.x_mask(), bz = b.z_mask();

  // Sites where both act non-trivially with different letters each
  // contribute a factor +-i; the sign pattern is XZ, YX, ZY -> -i.
  const std::uint64_t both = (ax | az) & (bx | bz);
  const std::uint64_t anti = both & ((ax ^ bx) | (az ^ bz));
  const std::uint64_t neg = ((ax & ~az) & (bz & ~bx)) | ((ax & az) & (bx & ~bz)) |
                            ((az & ~ax) & (bx & bz));
  const int i_power = std::popcount(anti) & 3;
  static constexpr std::complex<double> kIPow[4] = {{1, 0}, {0, 1}, {-1, 0}, {0, -1}};
  std::complex<double> phase = kIPow[i_power];
  if (std::popcount(neg) & 1) phase = -phase;

  PauliString c(a.n_qubits());
  const std::uint64_t cx = ax ^ bx, cz = az ^ bz;
  for (int q = 0; q < a.n_qubits(); ++q) {
    const bool x = (cx >> q) & 1u, z = (cz >> q) & 1u;
    c.set_letter(q, x && z ? 'Y' : x ? 'X' : z ? 'Z' : 'I');
  }
  return PhasedPauli{phase, c};
}

bool commutes(const PauliString& a, const PauliString& b) {
  check_same_size(a, b);
  const std::uint64_t both = (a.x_mask() | a.z_mask()) & (b.x_mask() | b.z_mask());
  const std::uint64_t anti = both & ((a.x_mask() ^ b.x_mask()) | (a.z_mask() ^ b.z_mask()));
  return (std::popcount(anti) & 1) == 0;
}

SymmetrizedProducts symmetrized_products(const PauliString& o, const PauliString& h) {
  SymmetrizedProducts out;
  PhasedPauli prod = multiply(o, h);
  if (commutes(o, h)) {
    // (1/2){o,h} = o.h; the phase is real since an even number of sites
    // contributed +-i.
    out.anticommutator_half = prod;
  } else {
    // -(i/2)[o,h] = -i * o.h; the raw product phase is +-i here.
    prod.phase *= std::complex<double>(0.0, -1.0);
    out.commutator_half = prod;
  }
  return out;
}

OperatorPool enumerate_pool(int n_qubits, int locality_bound) {
  if (locality_bound < 1 || locality_bound > n_qubits)
    throw std::invalid_argument("locality bound must satisfy 1 <= q <= n_qubits");

  OperatorPool pool;
  pool.locality_bound = locality_bound;
  pool.n_qubits = n_qubits;

  static constexpr char kLetters[3] = {'X', 'Y', 'Z'};
  for (int w = 1; w <= locality_bound; ++w) {
    // supports in lexicographic order over sorted index tuples
    std::vector<int> support(w);
    std::iota(support.begin(), support.end(), 0);
    while (true) {
      // letter assignments in odometer order, X < Y < Z
      std::vector<int> letters(w, 0);
      while (true) {
        PauliString p(n_qubits);
        for (int j = 0; j < w; ++j) p.set_letter(support[j], kLetters[letters[j]]);
        pool.members.push_back(p);
        int pos = w - 1;
        while (pos >= 0 && letters[pos] == 2) letters[pos--] = 0;
        if (pos < 0) break;
        ++letters[pos];
      }
      int pos = w - 1;
      while (pos >= 0 && support[pos] == n_qubits - w + pos) --pos;
      if (pos < 0) break;
      ++support[pos];
      for (int j = pos + 1; j < w; ++j) support[j] = support[j - 1] + 1;
    }
  }

  // all distinct non-identity strings; orthonormality under Tr[Pk Pl]/2^N
  // then holds automatically
  std::set<PauliString> seen(pool.members.begin(), pool.members.end());
  if (seen.size() != pool.members.size())
    throw std::logic_error("pool enumeration produced duplicates");
  return pool;
}

std::string OperatorPool::to_text() const {
  std::ostringstream out;
  for (const auto& m : members) out << m.str() << '\n';
  return out.str();
}

std::vector<PauliString> sample_constraints(const OperatorPool& pool, int n_c,
                                            std::mt19937_64& rng) {
  if (n_c < 0 || static_cast<std::size_t>(n_c) > pool.size())
    throw std::invalid_argument("requested more constraints than the pool holds");
  std::vector<std::size_t> idx(pool.size());
  std::iota(idx.begin(), idx.end(), 0u);
  std::vector<PauliString> out;
  out.reserve(n_c);
  for (int i = 0; i < n_c; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, idx.size() - 1);
    std::swap(idx[i], idx[pick(rng)]);
    out.push_back(pool.members[idx[i]]);
  }
  return out;
}

}  // namespace covar
