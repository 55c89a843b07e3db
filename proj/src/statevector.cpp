#include "covar/statevector.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <set>
#include <sstream>
#include <stdexcept>

namespace covar {

namespace {

constexpr int kMaxSimQubits = 24;
constexpr int kMaxDenseQubits = 12;
const cplx kI{0.0, 1.0};

std::size_t checked_dim(int n_qubits) {
  if (n_qubits < 1 || n_qubits > kMaxSimQubits)
    throw std::invalid_argument("qubit count out of simulable range");
  return std::size_t{1} << n_qubits;
}

cplx i_power(int k) {
  static constexpr cplx table[4] = {{1, 0}, {0, 1}, {-1, 0}, {0, -1}};
  return table[k & 3];
}

}  // namespace

Statevector Statevector::zero_state(int n_qubits) { return basis_state(n_qubits, 0); }

Statevector Statevector::basis_state(int n_qubits, std::size_t index) {
  Statevector s;
  s.n_qubits = n_qubits;
  s.amps.assign(checked_dim(n_qubits), cplx{0.0, 0.0});
  if (index >= s.amps.size()) throw std::out_of_range("basis index out of range");
  s.amps[index] = 1.0;
  return s;
}

double Statevector::norm() const {
  double n2 = 0;
  for (const cplx& a : amps) n2 += std::norm(a);
  return std::sqrt(n2);
}

Gate Gate::rotation(PauliString generator, int param_index, double scale) {
  if (generator.is_identity())
    throw std::invalid_argument("rotation generator must be non-identity");
  Gate g;
  g.kind = Kind::rotation;
  g.generator = std::move(generator);
  g.param_index = param_index;
  g.scale = scale;
  return g;
}

Gate Gate::fixed_rotation(PauliString generator, double angle) {
  Gate g = rotation(std::move(generator), -1);
  g.fixed_angle = angle;
  return g;
}

Gate Gate::cz(int a, int b) {
  Gate g;
  g.kind = Kind::cz;
  g.target_a = a;
  g.target_b = b;
  return g;
}

Gate Gate::cx(int control, int target) {
  Gate g;
  g.kind = Kind::cx;
  g.target_a = control;
  g.target_b = target;
  return g;
}

Gate Gate::h(int qubit) {
  Gate g;
  g.kind = Kind::h;
  g.target_a = qubit;
  return g;
}

void Ansatz::validate() const {
  std::vector<bool> used(n_params, false);
  for (const Gate& g : gates) {
    if (g.is_rotation()) {
      if (g.generator.n_qubits() != n_qubits)
        throw std::invalid_argument("gate generator qubit count mismatch");
      if (g.param_index >= n_params)
        throw std::invalid_argument("gate parameter index out of range");
      if (g.param_index >= 0) used[g.param_index] = true;
    }
  }
  for (int n = 0; n < n_params; ++n)
    if (!used[n]) throw std::invalid_argument("unused ansatz parameter");
}

std::string Ansatz::to_text() const {
  std::ostringstream out;
  out << "qubits " << n_qubits << "\nparams " << n_params << "\n";
  for (const Gate& g : gates) {
    switch (g.kind) {
      case Gate::Kind::rotation:
        out << "rot " << g.generator.str() << ' ' << g.param_index << ' ' << g.scale << ' '
            << g.fixed_angle << '\n';
        break;
      case Gate::Kind::cz: out << "cz " << g.target_a << ' ' << g.target_b << '\n'; break;
      case Gate::Kind::cx: out << "cx " << g.target_a << ' ' << g.target_b << '\n'; break;
      case Gate::Kind::h: out << "h " << g.target_a << '\n'; break;
    }
  }
  return out.str();
}

Ansatz Ansatz::from_text(const std::string& text) {
  std::istringstream in(text);
  Ansatz a;
  std::string word;
  while (in >> word) {
    if (word == "qubits") {
      in >> a.n_qubits;
    } else if (word == "params") {
      in >> a.n_params;
    } else if (word == "rot") {
      std::string gen;
      int param;
      double scale, angle;
      in >> gen >> param >> scale >> angle;
      Gate g = Gate::rotation(PauliString::from_string(gen), param, scale);
      g.fixed_angle = angle;
      a.gates.push_back(g);
    } else if (word == "cz" || word == "cx") {
      int x, y;
      in >> x >> y;
      a.gates.push_back(word == "cz" ? Gate::cz(x, y) : Gate::cx(x, y));
    } else if (word == "h") {
      int q;
      in >> q;
      a.gates.push_back(Gate::h(q));
    } else {
      throw std::invalid_argument("unknown circuit line: " + word);
    }
  }
  a.validate();
  return a;
}

int HermitianOperator::n_qubits() const {
  return terms.empty() ? 0 : terms.front().second.n_qubits();
}

void HermitianOperator::validate() const {
  std::set<PauliString> seen;
  for (const auto& [coeff, str] : terms) {
    if (!std::isfinite(coeff)) throw std::invalid_argument("non-finite coefficient");
    if (str.n_qubits() != n_qubits())
      throw std::invalid_argument("operator terms act on different qubit counts");
    if (!seen.insert(str).second) throw std::invalid_argument("duplicate operator term");
  }
}

void apply_pauli(Statevector& out, const Statevector& in, const PauliString& p) {
  if (p.n_qubits() != in.n_qubits) throw std::invalid_argument("pauli/state qubit mismatch");
  const std::size_t dim = in.dim();
  out.n_qubits = in.n_qubits;
  out.amps.assign(dim, cplx{0.0, 0.0});
  const std::uint64_t flip = p.x_mask();
  const std::uint64_t zmask = p.z_mask();
  const cplx front = i_power(std::popcount(p.x_mask() & p.z_mask()));
  for (std::size_t b = 0; b < dim; ++b) {
    const double sign = (std::popcount(b & zmask) & 1) ? -1.0 : 1.0;
    out.amps[b ^ flip] = front * sign * in.amps[b];
  }
}

void apply_rotation(Statevector& state, const PauliString& generator, double angle) {
  if (generator.n_qubits() != state.n_qubits)
    throw std::invalid_argument("generator/state qubit mismatch");
  const double c = std::cos(angle / 2), s = std::sin(angle / 2);
  const std::uint64_t flip = generator.x_mask();
  const std::uint64_t zmask = generator.z_mask();
  const std::size_t dim = state.dim();

  if (flip == 0) {
    // diagonal generator: amp *= exp(-i angle sign / 2)
    const cplx even{c, -s}, odd{c, s};
    for (std::size_t b = 0; b < dim; ++b)
      state.amps[b] *= (std::popcount(b & zmask) & 1) ? odd : even;
    return;
  }

  const cplx front = i_power(std::popcount(generator.x_mask() & zmask));
  const std::uint64_t pivot = std::uint64_t{1} << (63 - std::countl_zero(flip));
  for (std::size_t b = 0; b < dim; ++b) {
    if (b & pivot) continue;
    const std::size_t pb = b ^ flip;
    const double sign_b = (std::popcount(b & zmask) & 1) ? -1.0 : 1.0;
    const double sign_p = (std::popcount(pb & zmask) & 1) ? -1.0 : 1.0;
    const cplx ab = state.amps[b], ap = state.amps[pb];
    state.amps[b] = c * ab - kI * s * front * sign_p * ap;
    state.amps[pb] = c * ap - kI * s * front * sign_b * ab;
  }
}

void apply_cz(Statevector& state, int a, int b) {
  const std::uint64_t mask = (std::uint64_t{1} << a) | (std::uint64_t{1} << b);
  for (std::size_t i = 0; i < state.dim(); ++i)
    if ((i & mask) == mask) state.amps[i] = -state.amps[i];
}

void apply_cx(Statevector& state, int control, int target) {
  const std::uint64_t cbit = std::uint64_t{1} << control;
  const std::uint64_t tbit = std::uint64_t{1} << target;
  for (std::size_t i = 0; i < state.dim(); ++i)
    if ((i & cbit) && !(i & tbit)) std::swap(state.amps[i], state.amps[i | tbit]);
}

void apply_h(Statevector& state, int qubit) {
  const std::uint64_t bit = std::uint64_t{1} << qubit;
  const double inv = 1.0 / std::sqrt(2.0);
  for (std::size_t i = 0; i < state.dim(); ++i) {
    if (i & bit) continue;
    const cplx a0 = state.amps[i], a1 = state.amps[i | bit];
    state.amps[i] = inv * (a0 + a1);
    state.amps[i | bit] = inv * (a0 - a1);
  }
}

void apply_sdg(Statevector& state, int qubit) {
  const std::uint64_t bit = std::uint64_t{1} << qubit;
  for (std::size_t i = 0; i < state.dim(); ++i)
    if (i & bit) state.amps[i] *= cplx{0.0, -1.0};
}

void apply_gate(Statevector& state, const Gate& gate, std::span<const double> theta) {
  switch (gate.kind) {
    case Gate::Kind::rotation: {
      const double angle = gate.param_index >= 0 ? gate.scale * theta[gate.param_index]
                                                 : gate.fixed_angle;
      apply_rotation(state, gate.generator, angle);
      break;
    }
    case Gate::Kind::cz: apply_cz(state, gate.target_a, gate.target_b); break;
    case Gate::Kind::cx: apply_cx(state, gate.target_a, gate.target_b); break;
    case Gate::Kind::h: apply_h(state, gate.target_a); break;
  }
}

Statevector prepare(const Ansatz& ansatz, std::span<const double> theta) {
  if (static_cast<int>(theta.size()) != ansatz.n_params)
    throw std::invalid_argument("parameter vector length mismatch");
  Statevector state = Statevector::zero_state(ansatz.n_qubits);
  for (const Gate& g : ansatz.gates) apply_gate(state, g, theta);
  return state;
}

void apply_inverse(Statevector& state, const Ansatz& ansatz, std::span<const double> theta) {
  if (static_cast<int>(theta.size()) != ansatz.n_params)
    throw std::invalid_argument("parameter vector length mismatch");
  for (auto it = ansatz.gates.rbegin(); it != ansatz.gates.rend(); ++it) {
    if (it->is_rotation()) {
      const double angle = it->param_index >= 0 ? it->scale * theta[it->param_index]
                                                : it->fixed_angle;
      apply_rotation(state, it->generator, -angle);
    } else {
      apply_gate(state, *it, theta);  // cz, cx, h are involutions
    }
  }
}

Ansatz baked(const Ansatz& ansatz, std::span<const double> theta) {
  if (static_cast<int>(theta.size()) != ansatz.n_params)
    throw std::invalid_argument("parameter vector length mismatch");
  Ansatz out;
  out.n_qubits = ansatz.n_qubits;
  out.n_params = 0;
  out.gates = ansatz.gates;
  for (Gate& g : out.gates) {
    if (g.is_rotation() && g.param_index >= 0) {
      g.fixed_angle = g.scale * theta[g.param_index];
      g.param_index = -1;
      g.scale = 1.0;
    }
  }
  return out;
}

Ansatz inverted(const Ansatz& ansatz) {
  Ansatz out;
  out.n_qubits = ansatz.n_qubits;
  out.n_params = ansatz.n_params;
  out.gates.assign(ansatz.gates.rbegin(), ansatz.gates.rend());
  for (Gate& g : out.gates) {
    if (g.is_rotation()) {
      g.scale = -g.scale;
      g.fixed_angle = -g.fixed_angle;
    }
  }
  return out;
}

double pauli_expectation(const Statevector& state, const PauliString& p) {
  if (p.n_qubits() != state.n_qubits) throw std::invalid_argument("pauli/state qubit mismatch");
  const std::uint64_t flip = p.x_mask();
  const std::uint64_t zmask = p.z_mask();
  const cplx front = i_power(std::popcount(p.x_mask() & zmask));
  cplx acc{0.0, 0.0};
  for (std::size_t b = 0; b < state.dim(); ++b) {
    const double sign = (std::popcount(b & zmask) & 1) ? -1.0 : 1.0;
    acc += std::conj(state.amps[b ^ flip]) * sign * state.amps[b];
  }
  acc *= front;
  if (std::abs(acc.imag()) > 1e-10)
    throw std::logic_error("pauli expectation has a non-negligible imaginary part");
  return acc.real();
}

double expectation(const Statevector& state, const HermitianOperator& op) {
  double value = 0;
  for (const auto& [coeff, str] : op.terms) value += coeff * pauli_expectation(state, str);
  return value;
}

namespace {

Statevector prepare_with_offset(const Ansatz& ansatz, std::span<const double> theta,
                                std::size_t gate_index, double offset) {
  Statevector state = Statevector::zero_state(ansatz.n_qubits);
  for (std::size_t i = 0; i < ansatz.gates.size(); ++i) {
    const Gate& g = ansatz.gates[i];
    if (i == gate_index) {
      const double angle = g.scale * theta[g.param_index] + offset;
      apply_rotation(state, g.generator, angle);
    } else {
      apply_gate(state, g, theta);
    }
  }
  return state;
}

}  // namespace

double shift_rule_derivative(const Ansatz& ansatz, std::span<const double> theta, int param,
                             const HermitianOperator& observable) {
  if (param < 0 || param >= ansatz.n_params)
    throw std::invalid_argument("parameter index out of range");
  double deriv = 0;
  bool found = false;
  constexpr double kShift = M_PI / 2;
  for (std::size_t i = 0; i < ansatz.gates.size(); ++i) {
    const Gate& g = ansatz.gates[i];
    if (!g.is_rotation() || g.param_index != param) continue;
    found = true;
    const double plus = expectation(prepare_with_offset(ansatz, theta, i, kShift), observable);
    const double minus = expectation(prepare_with_offset(ansatz, theta, i, -kShift), observable);
    // d angle/d theta = scale folds into the chain rule
    deriv += g.scale * 0.5 * (plus - minus);
  }
  if (!found) throw std::invalid_argument("parameter drives no rotation gate");
  return deriv;
}

Ansatz build_hea(int n_qubits, int n_layers) {
  if (n_layers < 1) throw std::invalid_argument("need at least one layer");
  Ansatz a;
  a.n_qubits = n_qubits;
  a.n_params = n_qubits * (2 * n_layers + 1);
  int param = 0;
  auto single = [&](int qubit, char letter) {
    PauliString p(n_qubits);
    p.set_letter(qubit, letter);
    a.gates.push_back(Gate::rotation(p, param++));
  };
  for (int q = 0; q < n_qubits; ++q) single(q, 'Y');
  for (int l = 0; l < n_layers; ++l) {
    for (int q = 0; q < n_qubits; ++q) single(q, 'Y');
    for (int q = 0; q < n_qubits; ++q) single(q, 'Z');
    for (int q = 0; q + 1 < n_qubits; ++q) a.gates.push_back(Gate::cz(q, q + 1));
    if (n_qubits > 2) a.gates.push_back(Gate::cz(n_qubits - 1, 0));
  }
  a.validate();
  return a;
}

Eigen::MatrixXcd dense_matrix(const HermitianOperator& op) {
  const int n = op.n_qubits();
  if (n < 1 || n > kMaxDenseQubits)
    throw std::invalid_argument("operator too large for dense form");
  const std::size_t dim = std::size_t{1} << n;
  Eigen::MatrixXcd m = Eigen::MatrixXcd::Zero(dim, dim);
  for (const auto& [coeff, str] : op.terms) {
    const std::uint64_t flip = str.x_mask();
    const std::uint64_t zmask = str.z_mask();
    const cplx front = i_power(std::popcount(str.x_mask() & zmask));
    for (std::size_t b = 0; b < dim; ++b) {
      const double sign = (std::popcount(b & zmask) & 1) ? -1.0 : 1.0;
      m(b ^ flip, b) += coeff * front * sign;
    }
  }
  return m;
}

Eigensystem exact_eigensystem(const HermitianOperator& op) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> solver(dense_matrix(op));
  if (solver.info() != Eigen::Success) throw std::runtime_error("eigensolver failed");
  return Eigensystem{solver.eigenvalues(), solver.eigenvectors()};
}

Statevector statevector_from_column(const Eigen::MatrixXcd& vectors, int column) {
  Statevector s;
  s.n_qubits = std::countr_zero(static_cast<std::size_t>(vectors.rows()));
  s.amps.resize(vectors.rows());
  for (Eigen::Index i = 0; i < vectors.rows(); ++i) s.amps[i] = vectors(i, column);
  return s;
}

double fidelity(const Statevector& state, const Statevector& reference) {
  if (state.dim() != reference.dim()) throw std::invalid_argument("state dimension mismatch");
  cplx overlap{0.0, 0.0};
  for (std::size_t i = 0; i < state.dim(); ++i)
    overlap += std::conj(reference.amps[i]) * state.amps[i];
  return std::norm(overlap);
}

std::pair<double, std::size_t> fidelity_max_basis(const Statevector& state) {
  double best = -1.0;
  std::size_t arg = 0;
  for (std::size_t i = 0; i < state.dim(); ++i) {
    const double p = std::norm(state.amps[i]);
    if (p > best) {
      best = p;
      arg = i;
    }
  }
  return {best, arg};
}

}  // namespace covar
