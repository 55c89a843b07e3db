#include "covar/tasks.hpp"

#include <cmath>
#include <stdexcept>

#include "covar/rng.hpp"

namespace covar {

namespace {

PauliString z_on(int n_qubits, int site) {
  PauliString p(n_qubits);
  p.set_letter(site, 'Z');
  return p;
}

}  // namespace

Ansatz RecompilationTask::composite() const {
  Ansatz target = baked(ansatz, theta_star);
  Ansatz inv = inverted(ansatz);
  Ansatz out;
  out.n_qubits = ansatz.n_qubits;
  out.n_params = ansatz.n_params;
  out.gates = target.gates;
  out.gates.insert(out.gates.end(), inv.gates.begin(), inv.gates.end());
  out.validate();
  return out;
}

std::pair<RecompilationTask, std::vector<double>> make_recompilation(int n_qubits, int n_layers,
                                                                     std::uint64_t seed,
                                                                     double perturb) {
  if (perturb < 0) throw std::invalid_argument("perturbation scale must be non-negative");
  RecompilationTask task;
  task.ansatz = build_hea(n_qubits, n_layers);
  task.perturbation_scale = perturb;

  auto rng = make_rng(derive_seed(seed, 0));
  std::uniform_real_distribution<double> wide(-2 * M_PI, 2 * M_PI);
  task.theta_star.resize(task.ansatz.n_params);
  for (double& t : task.theta_star) t = wide(rng);

  for (int j = 0; j < n_qubits; ++j) task.hamiltonian.terms.push_back({-1.0, z_on(n_qubits, j)});
  task.hamiltonian.validate();

  for (int j = 0; j < n_qubits; ++j) task.commuting_pool.push_back(z_on(n_qubits, j));
  for (int j = 0; j < n_qubits; ++j)
    for (int k = j + 1; k < n_qubits; ++k) {
      PauliString p = z_on(n_qubits, j);
      p.set_letter(k, 'Z');
      task.commuting_pool.push_back(p);
    }

  std::vector<double> theta_init = initial_parameters(task, perturb, derive_seed(seed, 1));
  return {std::move(task), std::move(theta_init)};
}

std::vector<double> initial_parameters(const RecompilationTask& task, double perturb,
                                       std::uint64_t seed) {
  auto rng = make_rng(seed);
  std::uniform_real_distribution<double> delta(-perturb, perturb);
  std::vector<double> theta = task.theta_star;
  if (perturb > 0)
    for (double& t : theta) t += delta(rng);
  return theta;
}

SpinRingTask make_spin_ring(int n_qubits, double coupling, std::uint64_t seed) {
  if (n_qubits < 3) throw std::invalid_argument("spin ring needs at least 3 sites");
  SpinRingTask task;
  task.n_qubits = n_qubits;
  task.coupling = coupling;

  auto rng = make_rng(seed);
  std::uniform_real_distribution<double> onsite(-1.0, 1.0);
  task.onsite.resize(n_qubits);
  for (double& c : task.onsite) c = onsite(rng);

  for (int i = 0; i < n_qubits; ++i) {
    const int j = (i + 1) % n_qubits;
    for (char letter : {'X', 'Y', 'Z'}) {
      PauliString p(n_qubits);
      p.set_letter(i, letter);
      p.set_letter(j, letter);
      task.hamiltonian.terms.push_back({coupling, p});
    }
  }
  for (int i = 0; i < n_qubits; ++i)
    task.hamiltonian.terms.push_back({task.onsite[i], z_on(n_qubits, i)});
  task.hamiltonian.validate();
  return task;
}

RecompilationMetrics recompilation_metrics(const Statevector& state) {
  RecompilationMetrics m;
  m.infidelity_to_zero = 1.0 - std::norm(state.amps[0]);
  m.infidelity_to_nearest_basis = 1.0 - fidelity_max_basis(state).first;
  return m;
}

}  // namespace covar
