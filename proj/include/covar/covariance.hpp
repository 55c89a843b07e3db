#pragma once

#include <Eigen/Dense>
#include <complex>
#include <iosfwd>
#include <optional>
#include <vector>

#include "covar/provider.hpp"

namespace covar {

/// Sampled constraint set with its covariance vector f in C^{N_c} and,
/// optionally, the complex Jacobian J in C^{N_c x nu}. At an exact
/// eigenstate of the Hamiltonian f vanishes identically.
struct CovarianceSystem {
  std::vector<PauliString> constraints;
  Eigen::VectorXcd f;
  Eigen::MatrixXcd jacobian;  // 0 x 0 when not built
  std::vector<double> theta;
};

/// Real form with [Re; Im] stacked on top of each other, which forces the
/// linear-system solution to be a real parameter update.
struct StackedSystem {
  Eigen::MatrixXd jacobian;  // 2 N_c x nu
  Eigen::VectorXd f;         // 2 N_c
};

/// Cov(o, H) on the parametrised state, assembled from Pauli expectation
/// estimates as sum_a h_a (<P_ka> + i <Q_ka> - <H_a><o>). Identity products
/// (o equal to a Hamiltonian term) are folded in as exact constants.
std::complex<double> covariance(ExpectationProvider& provider, const Ansatz& ansatz,
                                std::span<const double> theta, const PauliString& o,
                                const HermitianOperator& h);

/// One provider query covering the deduplicated union of every Pauli string
/// any constraint needs.
Eigen::VectorXcd covariance_vector(ExpectationProvider& provider, const Ansatz& ansatz,
                                   std::span<const double> theta,
                                   std::span<const PauliString> constraints,
                                   const HermitianOperator& h);

/// f and J together from 2 nu + 1 provider queries: the centre configuration
/// plus one pair of +-pi/2 shifts per parameter.
CovarianceSystem build_system(ExpectationProvider& provider, const Ansatz& ansatz,
                              std::span<const double> theta,
                              std::span<const PauliString> constraints,
                              const HermitianOperator& h, bool with_jacobian);

/// Same, restricted to the given parameter subset (one jacobian column per
/// listed parameter, 2 |params| + 1 provider queries).
CovarianceSystem build_system_for_params(ExpectationProvider& provider, const Ansatz& ansatz,
                                         std::span<const double> theta,
                                         std::span<const PauliString> constraints,
                                         const HermitianOperator& h,
                                         std::span<const int> params);

Eigen::MatrixXcd jacobian(ExpectationProvider& provider, const Ansatz& ansatz,
                          std::span<const double> theta,
                          std::span<const PauliString> constraints, const HermitianOperator& h);

StackedSystem stack(const CovarianceSystem& system);
void unstack(const StackedSystem& stacked, Eigen::VectorXcd& f, Eigen::MatrixXcd& jac);

/// Var[H] = sum_a h_a f_a when f was computed over exactly the Hamiltonian's
/// own terms; the imaginary residual must vanish.
double variance_from_covariances(const Eigen::VectorXcd& f_over_terms,
                                 std::span<const double> coefficients);

/// Covariances against the pool {U X_k U^dag}: entries k = 1 .. 2^N - 1 of
/// U^dag H U |0>, computed densely. Their squared norm equals Var[H].
Eigen::VectorXcd orthogonal_pool_covariances(const Ansatz& ansatz, std::span<const double> theta,
                                             const HermitianOperator& h);

/// p_k = |f_k|^2 / sum |f_j|^2; nullopt when f is identically zero, which
/// signals an already-converged root rather than a failure.
std::optional<std::vector<double>> importance_weights(const Eigen::VectorXcd& f);

/// Exact covariance on a raw state (metrics and oracle-adjacent checks).
std::complex<double> covariance_on_state(const Statevector& state, const PauliString& o,
                                         const HermitianOperator& h);

double variance_on_state(const Statevector& state, const HermitianOperator& h);

/// Matrix-market-style text dump of f and J for offline inspection.
void dump_system(const CovarianceSystem& system, std::ostream& out);

}  // namespace covar
