#include "covar/covariance.hpp"

#include <cmath>
#include <numeric>
#include <ostream>
#include <stdexcept>
#include <unordered_map>

namespace covar {

namespace {

// Per-(constraint, term) product o_k . H_a = phase * string. For the
// identity string the expectation is the constant 1 and never estimated.
struct ProductEntry {
  std::complex<double> phase;
  int string_index = -1;  // -1 marks the identity
};

struct AssemblyPlan {
  std::vector<PauliString> strings;           // deduplicated estimation targets
  std::vector<ProductEntry> products;         // N_c x r, row-major
  std::vector<int> constraint_index;          // N_c entries into `strings`
  std::vector<int> term_index;                // r entries into `strings`
};

AssemblyPlan make_plan(std::span<const PauliString> constraints, const HermitianOperator& h) {
  AssemblyPlan plan;
  std::unordered_map<PauliString, int> index;
  auto intern = [&](const PauliString& p) {
    auto [it, inserted] = index.try_emplace(p, static_cast<int>(plan.strings.size()));
    if (inserted) plan.strings.push_back(p);
    return it->second;
  };

  for (const auto& [coeff, str] : h.terms) plan.term_index.push_back(intern(str));
  for (const PauliString& o : constraints) {
    if (o.is_identity()) throw std::invalid_argument("constraints must be non-identity");
    plan.constraint_index.push_back(intern(o));
    for (const auto& [coeff, str] : h.terms) {
      const PhasedPauli prod = multiply(o, str);
      ProductEntry entry;
      entry.phase = prod.phase;
      entry.string_index = prod.string.is_identity() ? -1 : intern(prod.string);
      plan.products.push_back(entry);
    }
  }
  return plan;
}

Eigen::VectorXcd assemble_f(const AssemblyPlan& plan, const HermitianOperator& h,
                            std::span<const double> values) {
  const std::size_t n_c = plan.constraint_index.size();
  const std::size_t r = plan.term_index.size();
  Eigen::VectorXcd f(n_c);
  for (std::size_t k = 0; k < n_c; ++k) {
    const double o_k = values[plan.constraint_index[k]];
    std::complex<double> sum{0.0, 0.0};
    for (std::size_t a = 0; a < r; ++a) {
      const auto& entry = plan.products[k * r + a];
      const double prod = entry.string_index < 0 ? 1.0 : values[entry.string_index];
      const double h_a = h.terms[a].first;
      sum += h_a * (entry.phase * prod - values[plan.term_index[a]] * o_k);
    }
    f(k) = sum;
  }
  return f;
}

std::vector<double> theta_with_shift(std::span<const double> theta, int param, double delta) {
  std::vector<double> shifted(theta.begin(), theta.end());
  shifted[param] += delta;
  return shifted;
}

}  // namespace

std::complex<double> covariance(ExpectationProvider& provider, const Ansatz& ansatz,
                                std::span<const double> theta, const PauliString& o,
                                const HermitianOperator& h) {
  const PauliString constraints[] = {o};
  return covariance_vector(provider, ansatz, theta, constraints, h)(0);
}

Eigen::VectorXcd covariance_vector(ExpectationProvider& provider, const Ansatz& ansatz,
                                   std::span<const double> theta,
                                   std::span<const PauliString> constraints,
                                   const HermitianOperator& h) {
  if (constraints.empty()) throw std::invalid_argument("constraint set is empty");
  const AssemblyPlan plan = make_plan(constraints, h);
  const std::vector<double> values = provider(ansatz, theta, plan.strings);
  return assemble_f(plan, h, values);
}

namespace {

CovarianceSystem build_system_impl(ExpectationProvider& provider, const Ansatz& ansatz,
                                   std::span<const double> theta,
                                   std::span<const PauliString> constraints,
                                   const HermitianOperator& h, std::span<const int> params) {
  if (constraints.empty()) throw std::invalid_argument("constraint set is empty");
  const AssemblyPlan plan = make_plan(constraints, h);

  CovarianceSystem system;
  system.constraints.assign(constraints.begin(), constraints.end());
  system.theta.assign(theta.begin(), theta.end());

  const std::vector<double> centre = provider(ansatz, theta, plan.strings);
  system.f = assemble_f(plan, h, centre);
  if (params.empty()) return system;

  const std::size_t n_c = plan.constraint_index.size();
  const std::size_t r = plan.term_index.size();
  system.jacobian.resize(n_c, params.size());

  constexpr double kShift = M_PI / 2;
  std::vector<double> deriv(plan.strings.size());
  for (std::size_t col = 0; col < params.size(); ++col) {
    const int n = params[col];
    const std::vector<double> plus =
        provider(ansatz, theta_with_shift(theta, n, kShift), plan.strings);
    const std::vector<double> minus =
        provider(ansatz, theta_with_shift(theta, n, -kShift), plan.strings);
    for (std::size_t s = 0; s < deriv.size(); ++s) deriv[s] = 0.5 * (plus[s] - minus[s]);

    for (std::size_t k = 0; k < n_c; ++k) {
      const double o_k = centre[plan.constraint_index[k]];
      const double d_o_k = deriv[plan.constraint_index[k]];
      std::complex<double> sum{0.0, 0.0};
      for (std::size_t a = 0; a < r; ++a) {
        const auto& entry = plan.products[k * r + a];
        const double d_prod = entry.string_index < 0 ? 0.0 : deriv[entry.string_index];
        const double h_a = h.terms[a].first;
        sum += h_a * (entry.phase * d_prod - o_k * deriv[plan.term_index[a]] -
                      centre[plan.term_index[a]] * d_o_k);
      }
      system.jacobian(k, col) = sum;
    }
  }
  return system;
}

}  // namespace

CovarianceSystem build_system(ExpectationProvider& provider, const Ansatz& ansatz,
                              std::span<const double> theta,
                              std::span<const PauliString> constraints,
                              const HermitianOperator& h, bool with_jacobian) {
  std::vector<int> params;
  if (with_jacobian) {
    params.resize(ansatz.n_params);
    std::iota(params.begin(), params.end(), 0);
  }
  return build_system_impl(provider, ansatz, theta, constraints, h, params);
}

CovarianceSystem build_system_for_params(ExpectationProvider& provider, const Ansatz& ansatz,
                                         std::span<const double> theta,
                                         std::span<const PauliString> constraints,
                                         const HermitianOperator& h,
                                         std::span<const int> params) {
  return build_system_impl(provider, ansatz, theta, constraints, h, params);
}

Eigen::MatrixXcd jacobian(ExpectationProvider& provider, const Ansatz& ansatz,
                          std::span<const double> theta,
                          std::span<const PauliString> constraints, const HermitianOperator& h) {
  return build_system(provider, ansatz, theta, constraints, h, true).jacobian;
}

StackedSystem stack(const CovarianceSystem& system) {
  StackedSystem out;
  const Eigen::Index n_c = system.f.size();
  out.f.resize(2 * n_c);
  out.f.head(n_c) = system.f.real();
  out.f.tail(n_c) = system.f.imag();
  if (system.jacobian.size() > 0) {
    out.jacobian.resize(2 * n_c, system.jacobian.cols());
    out.jacobian.topRows(n_c) = system.jacobian.real();
    out.jacobian.bottomRows(n_c) = system.jacobian.imag();
  }
  return out;
}

void unstack(const StackedSystem& stacked, Eigen::VectorXcd& f, Eigen::MatrixXcd& jac) {
  const Eigen::Index n_c = stacked.f.size() / 2;
  f = stacked.f.head(n_c) + std::complex<double>(0, 1) * stacked.f.tail(n_c);
  if (stacked.jacobian.size() > 0)
    jac = stacked.jacobian.topRows(n_c).cast<std::complex<double>>() +
          std::complex<double>(0, 1) * stacked.jacobian.bottomRows(n_c).cast<std::complex<double>>();
}

double variance_from_covariances(const Eigen::VectorXcd& f_over_terms,
                                 std::span<const double> coefficients) {
  if (static_cast<std::size_t>(f_over_terms.size()) != coefficients.size())
    throw std::invalid_argument("coefficient/covariance length mismatch");
  std::complex<double> var{0.0, 0.0};
  for (Eigen::Index a = 0; a < f_over_terms.size(); ++a)
    var += coefficients[a] * f_over_terms(a);
  if (std::abs(var.imag()) > 1e-9)
    throw std::logic_error("variance assembled from covariances is not real");
  return var.real();
}

Eigen::VectorXcd orthogonal_pool_covariances(const Ansatz& ansatz, std::span<const double> theta,
                                             const HermitianOperator& h) {
  if (ansatz.n_qubits > 12) throw std::invalid_argument("dense path limited to 12 qubits");
  const Statevector psi = prepare(ansatz, theta);

  Statevector h_psi;
  h_psi.n_qubits = psi.n_qubits;
  h_psi.amps.assign(psi.dim(), cplx{0.0, 0.0});
  Statevector scratch;
  for (const auto& [coeff, str] : h.terms) {
    apply_pauli(scratch, psi, str);
    for (std::size_t i = 0; i < psi.dim(); ++i) h_psi.amps[i] += coeff * scratch.amps[i];
  }

  apply_inverse(h_psi, ansatz, theta);  // entries <k| U^dag H U |0>
  Eigen::VectorXcd f(psi.dim() - 1);
  for (std::size_t k = 1; k < psi.dim(); ++k) f(k - 1) = h_psi.amps[k];
  return f;
}

std::optional<std::vector<double>> importance_weights(const Eigen::VectorXcd& f) {
  double total = 0;
  for (Eigen::Index k = 0; k < f.size(); ++k) total += std::norm(f(k));
  if (total == 0.0) return std::nullopt;
  std::vector<double> p(f.size());
  for (Eigen::Index k = 0; k < f.size(); ++k) p[k] = std::norm(f(k)) / total;
  return p;
}

std::complex<double> covariance_on_state(const Statevector& state, const PauliString& o,
                                         const HermitianOperator& h) {
  Statevector scratch;
  Statevector h_psi;
  h_psi.n_qubits = state.n_qubits;
  h_psi.amps.assign(state.dim(), cplx{0.0, 0.0});
  for (const auto& [coeff, str] : h.terms) {
    apply_pauli(scratch, state, str);
    for (std::size_t i = 0; i < state.dim(); ++i) h_psi.amps[i] += coeff * scratch.amps[i];
  }
  apply_pauli(scratch, state, o);
  cplx oh{0.0, 0.0};
  cplx h_mean{0.0, 0.0};
  for (std::size_t i = 0; i < state.dim(); ++i) {
    oh += std::conj(scratch.amps[i]) * h_psi.amps[i];  // <psi| o H |psi>
    h_mean += std::conj(state.amps[i]) * h_psi.amps[i];
  }
  const double o_mean = pauli_expectation(state, o);
  return oh - o_mean * h_mean.real();
}

double variance_on_state(const Statevector& state, const HermitianOperator& h) {
  Statevector scratch;
  Statevector h_psi;
  h_psi.n_qubits = state.n_qubits;
  h_psi.amps.assign(state.dim(), cplx{0.0, 0.0});
  for (const auto& [coeff, str] : h.terms) {
    apply_pauli(scratch, state, str);
    for (std::size_t i = 0; i < state.dim(); ++i) h_psi.amps[i] += coeff * scratch.amps[i];
  }
  double h2 = 0;
  cplx mean{0.0, 0.0};
  for (std::size_t i = 0; i < state.dim(); ++i) {
    h2 += std::norm(h_psi.amps[i]);
    mean += std::conj(state.amps[i]) * h_psi.amps[i];
  }
  return h2 - mean.real() * mean.real();
}

void dump_system(const CovarianceSystem& system, std::ostream& out) {
  out << "%%covariance-system complex\n";
  out << "% constraints\n";
  for (const PauliString& p : system.constraints) out << "% " << p.str() << '\n';
  out << "f " << system.f.size() << '\n';
  for (Eigen::Index k = 0; k < system.f.size(); ++k)
    out << k << ' ' << system.f(k).real() << ' ' << system.f(k).imag() << '\n';
  out << "J " << system.jacobian.rows() << ' ' << system.jacobian.cols() << '\n';
  for (Eigen::Index k = 0; k < system.jacobian.rows(); ++k)
    for (Eigen::Index n = 0; n < system.jacobian.cols(); ++n)
      out << k << ' ' << n << ' ' << system.jacobian(k, n).real() << ' '
          << system.jacobian(k, n).imag() << '\n';
}

}  // namespace covar
