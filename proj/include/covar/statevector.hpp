#pragma once

#include <Eigen/Dense>
#include <complex>
#include <span>
#include <string>
#include <vector>

#include "covar/pauli.hpp"

namespace covar {

using cplx = std::complex<double>;

/// Dense amplitude vector over 2^N computational basis states; basis index
/// bit q is the value of qubit q.
struct Statevector {
  int n_qubits = 0;
  std::vector<cplx> amps;

  static Statevector zero_state(int n_qubits);
  static Statevector basis_state(int n_qubits, std::size_t index);

  std::size_t dim() const { return amps.size(); }
  double norm() const;
};

/// A parametrised Pauli rotation exp(-i angle P / 2) or a fixed two-level
/// gate. Rotations take angle = scale * theta[param_index], or the baked
/// fixed_angle when param_index < 0 (used to freeze target circuits).
struct Gate {
  enum class Kind { rotation, cz, cx, h };

  Kind kind = Kind::rotation;
  PauliString generator;
  int param_index = -1;
  double scale = 1.0;
  double fixed_angle = 0.0;
  int target_a = -1;
  int target_b = -1;

  static Gate rotation(PauliString generator, int param_index, double scale = 1.0);
  static Gate fixed_rotation(PauliString generator, double angle);
  static Gate cz(int a, int b);
  static Gate cx(int control, int target);
  static Gate h(int qubit);

  bool is_rotation() const { return kind == Kind::rotation; }
};

struct Ansatz {
  int n_qubits = 0;
  int n_params = 0;
  std::vector<Gate> gates;

  void validate() const;
  std::string to_text() const;
  static Ansatz from_text(const std::string& text);
};

/// Real linear combination of distinct Pauli strings.
struct HermitianOperator {
  std::vector<std::pair<double, PauliString>> terms;

  int n_qubits() const;
  void validate() const;
};

// -- gate kernels ------------------------------------------------------

void apply_pauli(Statevector& out, const Statevector& in, const PauliString& p);
void apply_rotation(Statevector& state, const PauliString& generator, double angle);
void apply_cz(Statevector& state, int a, int b);
void apply_cx(Statevector& state, int control, int target);
void apply_h(Statevector& state, int qubit);
void apply_sdg(Statevector& state, int qubit);
void apply_gate(Statevector& state, const Gate& gate, std::span<const double> theta);

// -- circuit-level operations -----------------------------------------

Statevector prepare(const Ansatz& ansatz, std::span<const double> theta);

/// Applies U(theta)^dagger to an arbitrary state (gates reversed, angles
/// negated); used for the orthogonal operator pool.
void apply_inverse(Statevector& state, const Ansatz& ansatz, std::span<const double> theta);

/// All rotations frozen at the given parameter values; no free parameters.
Ansatz baked(const Ansatz& ansatz, std::span<const double> theta);

/// Gate-by-gate inverse with the same parameter indices (scales negated).
Ansatz inverted(const Ansatz& ansatz);

double pauli_expectation(const Statevector& state, const PauliString& p);
double expectation(const Statevector& state, const HermitianOperator& op);

/// d<obs>/d theta_n via +-pi/2 parameter shifts, summed over every rotation
/// gate driven by parameter n.
double shift_rule_derivative(const Ansatz& ansatz, std::span<const double> theta, int param,
                             const HermitianOperator& observable);

/// Hardware-efficient circuit: an initial Ry layer, then per layer Ry and Rz
/// on every qubit followed by a CZ ring (open chain for 2 qubits).
/// n_params = n_qubits * (2 * n_layers + 1).
Ansatz build_hea(int n_qubits, int n_layers);

Eigen::MatrixXcd dense_matrix(const HermitianOperator& op);

struct Eigensystem {
  Eigen::VectorXd values;   // ascending
  Eigen::MatrixXcd vectors; // column k pairs with values[k]
};
Eigensystem exact_eigensystem(const HermitianOperator& op);

Statevector statevector_from_column(const Eigen::MatrixXcd& vectors, int column);

double fidelity(const Statevector& state, const Statevector& reference);
/// (max_n |<n|psi>|^2, argmax n); ties resolved to the lowest index.
std::pair<double, std::size_t> fidelity_max_basis(const Statevector& state);

}  // namespace covar
