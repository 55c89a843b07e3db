#include "covar/lm.hpp"

#include <chrono>
#include <cmath>
#include <limits>
#include <ostream>
#include <stdexcept>

#include "covar/rng.hpp"

namespace covar {

void LmConfig::validate() const {
  if (n_constraints < 1) throw std::invalid_argument("need at least one constraint");
  if (lambda0 <= 0) throw std::invalid_argument("lambda0 must be positive");
  if (lambda_growth <= 1) throw std::invalid_argument("lambda growth factor must exceed 1");
  if (max_component_step <= 0) throw std::invalid_argument("max component step must be positive");
  if (max_iterations < 0 || max_lambda_growths < 1)
    throw std::invalid_argument("bad iteration limits");
}

int IterationTrace::flagged_count() const {
  int n = 0;
  for (const auto& row : rows) n += row.flagged ? 1 : 0;
  return n;
}

void write_trace_csv(const IterationTrace& trace, std::ostream& out) {
  out << "iter,f_norm,lambda,step_norm,energy,variance,infidelity,infidelity_max_basis,"
         "flagged,wall_ms\n";
  out.precision(17);
  for (const auto& r : trace.rows) {
    out << r.iter << ',' << r.f_norm << ',' << r.lambda << ',' << r.step_norm << ',' << r.energy
        << ',' << r.variance << ',' << r.infidelity << ',' << r.infidelity_max_basis << ','
        << (r.flagged ? 1 : 0) << ',' << r.wall_ms << '\n';
  }
}

MetricsEvaluator::MetricsEvaluator(HermitianOperator hamiltonian,
                                   std::optional<Statevector> reference)
    : hamiltonian_(std::move(hamiltonian)), reference_(std::move(reference)) {}

MetricsEvaluator::Metrics MetricsEvaluator::evaluate(const Ansatz& ansatz,
                                                     std::span<const double> theta) const {
  const Statevector state = prepare(ansatz, theta);
  Metrics m;
  m.energy = expectation(state, hamiltonian_);
  m.variance = variance_on_state(state, hamiltonian_);
  m.infidelity = reference_ ? std::max(0.0, 1.0 - fidelity(state, *reference_))
                            : std::numeric_limits<double>::quiet_NaN();
  m.infidelity_max_basis = std::max(0.0, 1.0 - fidelity_max_basis(state).first);
  return m;
}

Eigen::VectorXd lm_step(const StackedSystem& stacked, double lambda, Regularizer regularizer,
                        double max_component_step) {
  if (lambda <= 0) throw std::invalid_argument("lambda must be positive");
  const Eigen::MatrixXd& jt = stacked.jacobian;
  Eigen::MatrixXd a = jt.transpose() * jt;
  if (regularizer == Regularizer::identity) {
    a.diagonal().array() += lambda;
  } else {
    a.diagonal() += lambda * a.diagonal();
  }
  const Eigen::VectorXd rhs = -jt.transpose() * stacked.f;
  Eigen::LDLT<Eigen::MatrixXd> solver(a);
  if (solver.info() != Eigen::Success)
    throw std::runtime_error("normal matrix is singular; grow lambda");
  Eigen::VectorXd step = solver.solve(rhs);
  if (!step.allFinite()) throw std::runtime_error("normal matrix is singular; grow lambda");

  const double max_abs = step.cwiseAbs().maxCoeff();
  if (max_abs > max_component_step) step *= max_component_step / max_abs;
  return step;
}

namespace {

struct Candidate {
  Eigen::VectorXd step;
  std::vector<double> theta;
  double norm = std::numeric_limits<double>::infinity();
  double lambda = 0;
};

std::vector<double> shifted_theta(std::span<const double> theta, const Eigen::VectorXd& step,
                                  double kappa) {
  std::vector<double> out(theta.begin(), theta.end());
  for (Eigen::Index i = 0; i < step.size(); ++i) out[i] += kappa * step(i);
  return out;
}

CovarResult covar_iterate_impl(ExpectationProvider& provider, const Ansatz& ansatz,
                               std::span<const double> theta0, const HermitianOperator& h,
                               const OperatorPool& pool, const LmConfig& config,
                               std::uint64_t seed, const MetricsEvaluator* metrics) {
  config.validate();
  if (static_cast<std::size_t>(config.n_constraints) > pool.size())
    throw std::invalid_argument("constraint count exceeds pool size");

  CovarResult result;
  result.theta.assign(theta0.begin(), theta0.end());
  auto rng = make_rng(seed);

  std::vector<PauliString> constraints;
  for (int iter = 0; iter < config.max_iterations; ++iter) {
    const auto t0 = std::chrono::steady_clock::now();
    if (constraints.empty() || config.resample_each_iteration)
      constraints = sample_constraints(pool, config.n_constraints, rng);

    const CovarianceSystem system =
        build_system(provider, ansatz, result.theta, constraints, h, true);
    const double current_norm = system.f.norm();
    if (current_norm < config.convergence_tol) {
      result.converged = true;
      break;
    }
    const StackedSystem stacked = stack(system);

    Candidate best;
    bool accepted = false;
    double lambda = config.lambda0;
    for (int growth = 0; growth < config.max_lambda_growths; ++growth) {
      Candidate cand;
      cand.lambda = lambda;
      try {
        cand.step = lm_step(stacked, lambda, config.regularizer, config.max_component_step);
      } catch (const std::runtime_error&) {
        lambda *= config.lambda_growth;
        continue;
      }

      // canonical kappa = -1 step is theta + step (the minus lives in lm_step)
      std::vector<double> kappas{1.0};
      if (config.linesearch_enabled) kappas = {1.0, 0.8, 0.6, 0.4, 0.2};
      for (double kappa : kappas) {
        std::vector<double> trial = shifted_theta(result.theta, cand.step, kappa);
        const double norm =
            covariance_vector(provider, ansatz, trial, constraints, h).norm();
        if (norm < cand.norm) {
          cand.norm = norm;
          cand.theta = std::move(trial);
        }
      }
      if (cand.norm < best.norm) best = cand;
      if (cand.norm < current_norm) {
        accepted = true;
        break;
      }
      lambda *= config.lambda_growth;
    }
    if (best.theta.empty())
      throw std::runtime_error("no solvable lambda found; system degenerate");

    IterationRecord row;
    row.iter = iter;
    row.flagged = !accepted;
    row.lambda = best.lambda;
    row.f_norm = best.norm;
    Eigen::Map<const Eigen::VectorXd> before(result.theta.data(), result.theta.size());
    Eigen::Map<const Eigen::VectorXd> after(best.theta.data(), best.theta.size());
    row.step_norm = (after - before).norm();
    result.theta = best.theta;
    if (metrics) {
      const auto m = metrics->evaluate(ansatz, result.theta);
      row.energy = m.energy;
      row.variance = m.variance;
      row.infidelity = m.infidelity;
      row.infidelity_max_basis = m.infidelity_max_basis;
    }
    row.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0)
                      .count();
    result.trace.rows.push_back(row);

    if (row.f_norm < config.convergence_tol) {
      result.converged = true;
      break;
    }
  }
  return result;
}

}  // namespace

CovarResult covar_iterate(ExpectationProvider& provider, const Ansatz& ansatz,
                          std::span<const double> theta0, const HermitianOperator& h,
                          const OperatorPool& pool, const LmConfig& config, std::uint64_t seed,
                          const MetricsEvaluator* metrics) {
  return covar_iterate_impl(provider, ansatz, theta0, h, pool, config, seed, metrics);
}

CovarResult covar_iterate(ExpectationProvider& provider, const Ansatz& ansatz,
                          std::span<const double> theta0, const HermitianOperator& h,
                          std::span<const PauliString> pool_members, const LmConfig& config,
                          std::uint64_t seed, const MetricsEvaluator* metrics) {
  OperatorPool pool;
  pool.n_qubits = ansatz.n_qubits;
  pool.members.assign(pool_members.begin(), pool_members.end());
  for (const PauliString& p : pool.members)
    pool.locality_bound = std::max(pool.locality_bound, p.weight());
  return covar_iterate_impl(provider, ansatz, theta0, h, pool, config, seed, metrics);
}

double single_constraint_newton(double f_k, double j_k) {
  if (j_k == 0.0) throw std::domain_error("zero derivative in single-constraint update");
  return -f_k / j_k;
}

OverdeterminationResult overdetermination_demo(const Ansatz& ansatz,
                                               std::span<const double> theta_star,
                                               int disturbed_param, double delta0,
                                               const OperatorPool& pool, int n_c,
                                               const HermitianOperator& h, std::uint64_t seed) {
  std::vector<double> theta(theta_star.begin(), theta_star.end());
  theta[disturbed_param] += delta0;

  auto rng = make_rng(seed);
  const std::vector<PauliString> constraints = sample_constraints(pool, n_c, rng);
  ExactProvider exact;
  const CovarianceSystem system = build_system(exact, ansatz, theta, constraints, h, true);

  // 1-D problem along the disturbed parameter, in stacked real form
  const Eigen::Index m = system.f.size();
  Eigen::VectorXd f(2 * m), j(2 * m);
  f.head(m) = system.f.real();
  f.tail(m) = system.f.imag();
  j.head(m) = system.jacobian.col(disturbed_param).real();
  j.tail(m) = system.jacobian.col(disturbed_param).imag();

  OverdeterminationResult out;
  const double jtj = j.squaredNorm();
  if (jtj == 0.0) throw std::domain_error("all constraint derivatives vanish");
  out.least_squares = -j.dot(f) / jtj;

  const double j_scale = j.cwiseAbs().maxCoeff();
  double sum = 0;
  for (Eigen::Index k = 0; k < 2 * m; ++k) {
    if (std::abs(j(k)) < 1e-9 * j_scale) continue;  // rows with no sensitivity
    out.newton_estimates.push_back(single_constraint_newton(f(k), j(k)));
    sum += out.newton_estimates.back();
  }
  if (out.newton_estimates.empty()) throw std::domain_error("no usable constraint rows");
  out.newton_mean = sum / static_cast<double>(out.newton_estimates.size());
  return out;
}

namespace {

double one_dimensional_step(const CovarianceSystem& system, double lambda) {
  // least-squares update along the single disturbed direction in stacked
  // real form: -(J~ . f~) / (J~ . J~ + lambda)
  double num = 0, den = 0;
  for (Eigen::Index k = 0; k < system.f.size(); ++k) {
    num += system.jacobian(k, 0).real() * system.f(k).real() +
           system.jacobian(k, 0).imag() * system.f(k).imag();
    den += std::norm(system.jacobian(k, 0));
  }
  return -num / (den + lambda);
}

}  // namespace

std::vector<NoiseFloorRow> noise_floor_probe(const Ansatz& ansatz,
                                             std::span<const double> theta_star,
                                             int disturbed_param, double delta0,
                                             const HermitianOperator& h,
                                             const OperatorPool& pool,
                                             std::span<const int> constraint_counts,
                                             const ProviderFactory& noisy_factory,
                                             int n_noise_seeds, std::uint64_t seed) {
  std::vector<double> theta(theta_star.begin(), theta_star.end());
  theta[disturbed_param] += delta0;
  const int params[] = {disturbed_param};

  std::vector<NoiseFloorRow> rows;
  ExactProvider exact;
  const double lambda = 1e-4;
  for (int n_c : constraint_counts) {
    auto rng = make_rng(derive_seed(seed, static_cast<std::uint64_t>(n_c)));
    const std::vector<PauliString> constraints = sample_constraints(pool, n_c, rng);
    const double exact_step = one_dimensional_step(
        build_system_for_params(exact, ansatz, theta, constraints, h, params), lambda);

    double sq_sum = 0;
    for (int s = 0; s < n_noise_seeds; ++s) {
      ProviderPtr noisy = noisy_factory(derive_seed(seed, n_c, s));
      const double step = one_dimensional_step(
          build_system_for_params(*noisy, ansatz, theta, constraints, h, params), lambda);
      sq_sum += (step - exact_step) * (step - exact_step);
    }
    rows.push_back({n_c, std::sqrt(sq_sum / n_noise_seeds)});
  }
  return rows;
}

}  // namespace covar
