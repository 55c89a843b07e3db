#include "covar/baselines.hpp"

#include <chrono>
#include <cmath>
#include <stdexcept>

namespace covar {

namespace {

std::vector<PauliString> hamiltonian_strings(const HermitianOperator& h) {
  std::vector<PauliString> strings;
  strings.reserve(h.terms.size());
  for (const auto& [coeff, str] : h.terms) strings.push_back(str);
  return strings;
}

double energy_from_values(const HermitianOperator& h, const std::vector<double>& values) {
  double e = 0;
  for (std::size_t a = 0; a < h.terms.size(); ++a) e += h.terms[a].first * values[a];
  return e;
}

}  // namespace

Eigen::VectorXd energy_gradient(ExpectationProvider& provider, const Ansatz& ansatz,
                                std::span<const double> theta, const HermitianOperator& h) {
  const std::vector<PauliString> strings = hamiltonian_strings(h);
  Eigen::VectorXd grad(ansatz.n_params);
  std::vector<double> shifted(theta.begin(), theta.end());
  constexpr double kShift = M_PI / 2;
  for (int n = 0; n < ansatz.n_params; ++n) {
    shifted[n] = theta[n] + kShift;
    const double plus = energy_from_values(h, provider(ansatz, shifted, strings));
    shifted[n] = theta[n] - kShift;
    const double minus = energy_from_values(h, provider(ansatz, shifted, strings));
    shifted[n] = theta[n];
    grad(n) = 0.5 * (plus - minus);
  }
  return grad;
}

Eigen::VectorXd variance_gradient(ExpectationProvider& provider, const Ansatz& ansatz,
                                  std::span<const double> theta, const HermitianOperator& h) {
  const std::vector<PauliString> strings = hamiltonian_strings(h);
  const Eigen::MatrixXcd jac = jacobian(provider, ansatz, theta, strings, h);
  Eigen::VectorXcd grad = Eigen::VectorXcd::Zero(ansatz.n_params);
  for (Eigen::Index a = 0; a < jac.rows(); ++a)
    grad += h.terms[a].first * jac.row(a).transpose();
  if (grad.imag().norm() > 1e-9)
    throw std::logic_error("variance gradient has a non-negligible imaginary part");
  return grad.real();
}

Eigen::MatrixXd quantum_fisher_matrix(const Ansatz& ansatz, std::span<const double> theta) {
  const int nu = ansatz.n_params;
  const std::size_t n_gates = ansatz.gates.size();

  // prefix states: after applying the first g gates
  std::vector<Statevector> prefix(n_gates + 1);
  prefix[0] = Statevector::zero_state(ansatz.n_qubits);
  for (std::size_t g = 0; g < n_gates; ++g) {
    prefix[g + 1] = prefix[g];
    apply_gate(prefix[g + 1], ansatz.gates[g], theta);
  }
  const Statevector& psi = prefix[n_gates];

  // |d_n> = sum over occurrences of (-i/2 scale P) inserted after the gate
  std::vector<Statevector> deriv(nu);
  for (int n = 0; n < nu; ++n) {
    deriv[n].n_qubits = ansatz.n_qubits;
    deriv[n].amps.assign(psi.dim(), cplx{0.0, 0.0});
  }
  Statevector inserted;
  for (std::size_t g = 0; g < n_gates; ++g) {
    const Gate& gate = ansatz.gates[g];
    if (!gate.is_rotation() || gate.param_index < 0) continue;
    apply_pauli(inserted, prefix[g + 1], gate.generator);
    const cplx factor{0.0, -0.5 * gate.scale};
    for (cplx& a : inserted.amps) a *= factor;
    for (std::size_t rest = g + 1; rest < n_gates; ++rest)
      apply_gate(inserted, ansatz.gates[rest], theta);
    for (std::size_t i = 0; i < psi.dim(); ++i)
      deriv[gate.param_index].amps[i] += inserted.amps[i];
  }

  auto inner = [&](const Statevector& a, const Statevector& b) {
    cplx acc{0.0, 0.0};
    for (std::size_t i = 0; i < a.dim(); ++i) acc += std::conj(a.amps[i]) * b.amps[i];
    return acc;
  };

  std::vector<cplx> overlap(nu);
  for (int n = 0; n < nu; ++n) overlap[n] = inner(deriv[n], psi);

  Eigen::MatrixXd fisher(nu, nu);
  for (int i = 0; i < nu; ++i)
    for (int j = i; j < nu; ++j) {
      const cplx value = inner(deriv[i], deriv[j]) - overlap[i] * std::conj(overlap[j]);
      fisher(i, j) = value.real();
      fisher(j, i) = value.real();
    }
  return fisher;
}

std::vector<double> natural_gradient_step(const Ansatz& ansatz, std::span<const double> theta,
                                          const HermitianOperator& h,
                                          const NatGradConfig& config) {
  if (config.pinv_tolerance <= 0) throw std::invalid_argument("pinv tolerance must be positive");
  Eigen::VectorXd grad(ansatz.n_params);
  for (int n = 0; n < ansatz.n_params; ++n)
    grad(n) = shift_rule_derivative(ansatz, theta, n, h);

  const Eigen::MatrixXd fisher = quantum_fisher_matrix(ansatz, theta);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(fisher);
  const double cutoff = config.pinv_tolerance * std::max(1e-300, eig.eigenvalues().maxCoeff());
  Eigen::VectorXd inv_vals = eig.eigenvalues();
  for (Eigen::Index i = 0; i < inv_vals.size(); ++i)
    inv_vals(i) = inv_vals(i) > cutoff ? 1.0 / inv_vals(i) : 0.0;
  const Eigen::VectorXd update =
      eig.eigenvectors() * inv_vals.asDiagonal() * eig.eigenvectors().transpose() * grad;

  std::vector<double> out(theta.begin(), theta.end());
  for (int n = 0; n < ansatz.n_params; ++n) out[n] -= config.learning_rate * update(n);
  return out;
}

BaselineResult run_baseline(BaselineKind kind, ExpectationProvider& provider,
                            const Ansatz& ansatz, std::span<const double> theta0,
                            const HermitianOperator& h, const GdConfig& gd,
                            const NatGradConfig& nat, const MetricsEvaluator* metrics) {
  BaselineResult result;
  result.theta.assign(theta0.begin(), theta0.end());

  const int max_iters = kind == BaselineKind::nat_grad ? nat.max_iterations : gd.max_iterations;
  double eta = gd.learning_rate;

  // adaptive acceptance and stall detection use noiseless values
  auto target_value = [&](std::span<const double> theta) {
    const Statevector state = prepare(ansatz, theta);
    return gd.target == GdConfig::Target::energy ? expectation(state, h)
                                                 : variance_on_state(state, h);
  };

  double previous = target_value(result.theta);
  for (int iter = 0; iter < max_iters; ++iter) {
    const auto t0 = std::chrono::steady_clock::now();
    std::vector<double> next;
    if (kind == BaselineKind::nat_grad) {
      next = natural_gradient_step(ansatz, result.theta, h, nat);
    } else {
      const Eigen::VectorXd grad = kind == BaselineKind::vqe
                                       ? energy_gradient(provider, ansatz, result.theta, h)
                                       : variance_gradient(provider, ansatz, result.theta, h);
      next = result.theta;
      for (int n = 0; n < ansatz.n_params; ++n) next[n] -= eta * grad(n);
      if (gd.adaptive) {
        double value = target_value(next);
        int halvings = 0;
        while (value > previous && halvings < 24) {
          eta *= 0.5;
          ++halvings;
          for (int n = 0; n < ansatz.n_params; ++n) next[n] = result.theta[n] - eta * grad(n);
          value = target_value(next);
        }
        if (halvings == 0) eta = std::min(eta * 1.1, gd.learning_rate);
      }
    }

    IterationRecord row;
    row.iter = iter;
    row.lambda = 0;
    Eigen::Map<const Eigen::VectorXd> before(result.theta.data(), result.theta.size());
    Eigen::Map<const Eigen::VectorXd> after(next.data(), next.size());
    row.step_norm = (after - before).norm();
    result.theta = std::move(next);

    const double value = target_value(result.theta);
    if (metrics) {
      const auto m = metrics->evaluate(ansatz, result.theta);
      row.energy = m.energy;
      row.variance = m.variance;
      row.infidelity = m.infidelity;
      row.infidelity_max_basis = m.infidelity_max_basis;
      // ||f|| over the Hamiltonian's own terms, from the exact state
      const Statevector state = prepare(ansatz, result.theta);
      double f2 = 0;
      for (const auto& [coeff, str] : h.terms)
        f2 += std::norm(covariance_on_state(state, str, h));
      row.f_norm = std::sqrt(f2);
    }
    row.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0)
                      .count();
    result.trace.rows.push_back(row);

    const double improvement = previous - value;
    previous = value;
    if (kind == BaselineKind::nat_grad && nat.stop_energy && value <= *nat.stop_energy) break;
    if (gd.stall_threshold > 0 && iter > 0 && improvement < gd.stall_threshold &&
        kind != BaselineKind::nat_grad) {
      result.stalled = true;
      break;
    }
  }
  return result;
}

}  // namespace covar
