#include "covar/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <mutex>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "covar/rng.hpp"

namespace covar {

using nlohmann::json;

namespace {

void check_keys(const json& obj, const std::string& where,
                std::initializer_list<const char*> allowed) {
  if (!obj.is_object()) throw ConfigError(where + " must be an object");
  for (const auto& item : obj.items()) {
    if (std::find_if(allowed.begin(), allowed.end(), [&](const char* k) {
          return item.key() == k;
        }) == allowed.end())
      throw ConfigError("unknown key '" + item.key() + "' in " + where);
  }
}

template <typename T>
T get_or(const json& obj, const char* key, T fallback) {
  return obj.contains(key) ? obj.at(key).get<T>() : fallback;
}

TaskConfig::Kind parse_task_kind(const std::string& s) {
  static const std::map<std::string, TaskConfig::Kind> kinds = {
      {"recompilation", TaskConfig::Kind::recompilation},
      {"spin_ring", TaskConfig::Kind::spin_ring},
      {"overdetermination_demo", TaskConfig::Kind::overdetermination_demo},
      {"noise_floor_probe", TaskConfig::Kind::noise_floor_probe},
      {"local_trap_escape", TaskConfig::Kind::local_trap_escape}};
  auto it = kinds.find(s);
  if (it == kinds.end()) throw ConfigError("unknown task kind '" + s + "'");
  return it->second;
}

ProviderConfig::Kind parse_provider_kind(const std::string& s) {
  static const std::map<std::string, ProviderConfig::Kind> kinds = {
      {"exact", ProviderConfig::Kind::exact},
      {"shot_noise", ProviderConfig::Kind::shot_noise},
      {"circuit_noise", ProviderConfig::Kind::circuit_noise},
      {"shadows", ProviderConfig::Kind::shadows}};
  auto it = kinds.find(s);
  if (it == kinds.end()) throw ConfigError("unknown provider kind '" + s + "'");
  return it->second;
}

OptimizerConfig::Kind parse_optimizer_kind(const std::string& s) {
  static const std::map<std::string, OptimizerConfig::Kind> kinds = {
      {"covar", OptimizerConfig::Kind::covar},
      {"vqe", OptimizerConfig::Kind::vqe},
      {"variance_vqe", OptimizerConfig::Kind::variance_vqe},
      {"nat_grad", OptimizerConfig::Kind::nat_grad},
      {"nat_grad_then_covar", OptimizerConfig::Kind::nat_grad_then_covar}};
  auto it = kinds.find(s);
  if (it == kinds.end()) throw ConfigError("unknown optimizer kind '" + s + "'");
  return it->second;
}

}  // namespace

ExperimentConfig ExperimentConfig::from_json_text(const std::string& text) {
  json root;
  try {
    root = json::parse(text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  check_keys(root, "config",
             {"task", "provider", "optimizer", "pool", "seeds", "output_dir", "sweep",
              "convergence_distribution", "init_stop_energies_above_ground", "classify_tol"});

  ExperimentConfig cfg;
  try {
    const json& task = root.at("task");
    check_keys(task, "task",
               {"kind", "qubits", "layers", "perturb", "coupling", "seed", "delta0",
                "demo_constraints", "nc_values", "n_noise_seeds"});
    cfg.task.kind = parse_task_kind(task.at("kind").get<std::string>());
    cfg.task.n_qubits = task.at("qubits").get<int>();
    cfg.task.n_layers = get_or(task, "layers", cfg.task.n_layers);
    cfg.task.perturb = get_or(task, "perturb", cfg.task.perturb);
    cfg.task.coupling = get_or(task, "coupling", cfg.task.coupling);
    cfg.task.seed = get_or<std::uint64_t>(task, "seed", cfg.task.seed);
    cfg.task.delta0 = get_or(task, "delta0", cfg.task.delta0);
    cfg.task.demo_constraints = get_or(task, "demo_constraints", cfg.task.demo_constraints);
    cfg.task.nc_values = get_or(task, "nc_values", cfg.task.nc_values);
    cfg.task.n_noise_seeds = get_or(task, "n_noise_seeds", cfg.task.n_noise_seeds);

    if (root.contains("provider")) {
      const json& provider = root.at("provider");
      check_keys(provider, "provider",
                 {"kind", "n_shots", "fidelity", "sigma", "epsilon", "delta"});
      cfg.provider.kind = parse_provider_kind(provider.at("kind").get<std::string>());
      cfg.provider.n_shots = get_or(provider, "n_shots", cfg.provider.n_shots);
      cfg.provider.fidelity = get_or(provider, "fidelity", cfg.provider.fidelity);
      cfg.provider.sigma = get_or(provider, "sigma", cfg.provider.sigma);
      cfg.provider.epsilon = get_or(provider, "epsilon", cfg.provider.epsilon);
      cfg.provider.delta = get_or(provider, "delta", cfg.provider.delta);
    }

    if (root.contains("optimizer")) {
      const json& opt = root.at("optimizer");
      check_keys(opt, "optimizer",
                 {"kind", "nc_over_nu", "n_constraints", "max_iterations", "lambda0",
                  "lambda_growth", "regularizer", "max_component_step", "convergence_tol",
                  "resample_each_iteration", "linesearch", "learning_rate", "adaptive",
                  "init_max_iterations", "init_stop_above_ground", "init_perturb",
                  "gd_max_iterations", "stall_threshold", "pinv_tolerance"});
      cfg.optimizer.kind = parse_optimizer_kind(opt.at("kind").get<std::string>());
      cfg.optimizer.nc_over_nu = get_or(opt, "nc_over_nu", cfg.optimizer.nc_over_nu);
      if (opt.contains("n_constraints")) cfg.optimizer.n_constraints = opt.at("n_constraints").get<int>();
      cfg.optimizer.lm.max_iterations = get_or(opt, "max_iterations", cfg.optimizer.lm.max_iterations);
      cfg.optimizer.lm.lambda0 = get_or(opt, "lambda0", cfg.optimizer.lm.lambda0);
      cfg.optimizer.lm.lambda_growth = get_or(opt, "lambda_growth", cfg.optimizer.lm.lambda_growth);
      if (opt.contains("regularizer")) {
        const std::string reg = opt.at("regularizer").get<std::string>();
        if (reg == "identity") cfg.optimizer.lm.regularizer = Regularizer::identity;
        else if (reg == "jtj_diagonal") cfg.optimizer.lm.regularizer = Regularizer::jtj_diagonal;
        else throw ConfigError("unknown regularizer '" + reg + "'");
      }
      cfg.optimizer.lm.max_component_step =
          get_or(opt, "max_component_step", cfg.optimizer.lm.max_component_step);
      cfg.optimizer.lm.convergence_tol =
          get_or(opt, "convergence_tol", cfg.optimizer.lm.convergence_tol);
      cfg.optimizer.lm.resample_each_iteration =
          get_or(opt, "resample_each_iteration", cfg.optimizer.lm.resample_each_iteration);
      cfg.optimizer.lm.linesearch_enabled = get_or(opt, "linesearch", false);
      cfg.optimizer.gd.learning_rate = get_or(opt, "learning_rate", cfg.optimizer.gd.learning_rate);
      cfg.optimizer.gd.max_iterations = get_or(opt, "max_iterations", cfg.optimizer.gd.max_iterations);
      cfg.optimizer.gd.adaptive = get_or(opt, "adaptive", cfg.optimizer.gd.adaptive);
      cfg.optimizer.nat.learning_rate = get_or(opt, "learning_rate", cfg.optimizer.nat.learning_rate);
      cfg.optimizer.nat.max_iterations =
          get_or(opt, "init_max_iterations", cfg.optimizer.nat.max_iterations);
      cfg.optimizer.nat.pinv_tolerance =
          get_or(opt, "pinv_tolerance", cfg.optimizer.nat.pinv_tolerance);
      cfg.optimizer.init_stop_above_ground =
          get_or(opt, "init_stop_above_ground", cfg.optimizer.init_stop_above_ground);
      cfg.optimizer.init_perturb = get_or(opt, "init_perturb", cfg.optimizer.init_perturb);
      cfg.optimizer.gd_max_iterations =
          get_or(opt, "gd_max_iterations", cfg.optimizer.gd_max_iterations);
      cfg.optimizer.stall_threshold = get_or(opt, "stall_threshold", cfg.optimizer.stall_threshold);
    }

    if (root.contains("pool")) {
      const json& pool = root.at("pool");
      check_keys(pool, "pool", {"kind", "locality"});
      if (pool.contains("kind")) {
        const std::string kind = pool.at("kind").get<std::string>();
        if (kind == "local") cfg.pool.kind = PoolConfig::Kind::local;
        else if (kind == "commuting_z") cfg.pool.kind = PoolConfig::Kind::commuting_z;
        else throw ConfigError("unknown pool kind '" + kind + "'");
      }
      cfg.pool.locality = get_or(pool, "locality", cfg.pool.locality);
    }

    cfg.seeds = root.at("seeds").get<std::vector<std::uint64_t>>();
    cfg.output_dir = get_or<std::string>(root, "output_dir", cfg.output_dir);
    cfg.convergence_distribution = get_or(root, "convergence_distribution", false);
    cfg.init_stop_energies_above_ground =
        get_or(root, "init_stop_energies_above_ground", cfg.init_stop_energies_above_ground);
    cfg.classify_tol = get_or(root, "classify_tol", cfg.classify_tol);

    if (root.contains("sweep")) {
      const json& sweep = root.at("sweep");
      check_keys(sweep, "sweep", {"nc_over_nu", "n_shots"});
      SweepConfig s;
      s.nc_over_nu = get_or(sweep, "nc_over_nu", s.nc_over_nu);
      s.n_shots = get_or(sweep, "n_shots", s.n_shots);
      cfg.sweep = s;
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("bad config value: ") + e.what());
  }

  cfg.validate();
  return cfg;
}

ExperimentConfig ExperimentConfig::from_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return from_json_text(buf.str());
}

void ExperimentConfig::validate() const {
  if (task.n_qubits < 1 || task.n_qubits > 14) throw ConfigError("qubits must lie in [1, 14]");
  if (task.n_layers < 1) throw ConfigError("layers must be at least 1");
  if (task.kind == TaskConfig::Kind::spin_ring && task.n_qubits < 3)
    throw ConfigError("spin ring needs at least 3 qubits");
  if (task.perturb < 0) throw ConfigError("perturb must be non-negative");
  if (seeds.empty()) throw ConfigError("at least one seed is required");
  if (provider.kind == ProviderConfig::Kind::shot_noise && provider.n_shots < 1)
    throw ConfigError("n_shots must be at least 1");
  if (provider.kind == ProviderConfig::Kind::circuit_noise &&
      (provider.fidelity <= 0 || provider.fidelity > 1))
    throw ConfigError("fidelity must lie in (0, 1]");
  if (provider.kind == ProviderConfig::Kind::shadows &&
      (provider.epsilon <= 0 || provider.delta <= 0 || provider.delta >= 1))
    throw ConfigError("shadow budget needs epsilon > 0 and delta in (0, 1)");
  if (pool.locality < 1 || pool.locality > task.n_qubits)
    throw ConfigError("pool locality must lie in [1, qubits]");
  if (pool.kind == PoolConfig::Kind::commuting_z &&
      task.kind != TaskConfig::Kind::recompilation)
    throw ConfigError("the commuting-Z pool applies to recompilation only");
  if (optimizer.nc_over_nu <= 0) throw ConfigError("nc_over_nu must be positive");
  if (optimizer.n_constraints && *optimizer.n_constraints < 1)
    throw ConfigError("n_constraints must be at least 1");
  try {
    optimizer.lm.validate();
  } catch (const std::exception& e) {
    throw ConfigError(e.what());
  }
  if (optimizer.gd.learning_rate <= 0) throw ConfigError("learning rate must be positive");
  if (convergence_distribution && task.kind != TaskConfig::Kind::spin_ring)
    throw ConfigError("convergence_distribution requires the spin_ring task");
  if (convergence_distribution && provider.kind != ProviderConfig::Kind::exact)
    throw ConfigError("convergence_distribution runs with the exact provider");
  if (task.kind == TaskConfig::Kind::noise_floor_probe && task.nc_values.empty())
    throw ConfigError("noise_floor_probe needs nc_values");
  if (classify_tol <= 0) throw ConfigError("classify_tol must be positive");
}

namespace {

// Everything derived from the task that seeds share.
struct Workspace {
  Ansatz base_ansatz;   // the parametrised circuit itself
  Ansatz opt_ansatz;    // circuit the optimiser drives (composite for recompilation)
  HermitianOperator h;
  std::vector<PauliString> pool_members;
  OperatorPool pool;
  std::optional<RecompilationTask> recompilation;
  std::optional<SpinRingTask> spin_ring;
  double ground_energy = 0;
  std::optional<Eigensystem> spectrum;  // spin ring only
  Statevector reference;                // infidelity target
  int n_constraints = 0;
  int hamiltonian_locality = 1;
};

Workspace make_workspace(const ExperimentConfig& cfg) {
  Workspace ws;
  const TaskConfig& t = cfg.task;
  const bool ring_task = t.kind == TaskConfig::Kind::spin_ring ||
                         t.kind == TaskConfig::Kind::local_trap_escape;
  if (ring_task) {
    ws.spin_ring = make_spin_ring(t.n_qubits, t.coupling, t.seed);
    ws.base_ansatz = build_hea(t.n_qubits, t.n_layers);
    ws.opt_ansatz = ws.base_ansatz;
    ws.h = ws.spin_ring->hamiltonian;
    ws.spectrum = exact_eigensystem(ws.h);
    ws.ground_energy = ws.spectrum->values(0);
    ws.reference = statevector_from_column(ws.spectrum->vectors, 0);
    ws.hamiltonian_locality = 2;
  } else {
    auto [task, theta_init] = make_recompilation(t.n_qubits, t.n_layers, t.seed, t.perturb);
    (void)theta_init;  // per-seed starts are drawn separately
    ws.recompilation = std::move(task);
    ws.base_ansatz = ws.recompilation->ansatz;
    ws.opt_ansatz = ws.recompilation->composite();
    ws.h = ws.recompilation->hamiltonian;
    ws.ground_energy = -static_cast<double>(t.n_qubits);
    ws.reference = Statevector::zero_state(t.n_qubits);
    ws.hamiltonian_locality = 1;
  }

  if (cfg.pool.kind == PoolConfig::Kind::commuting_z) {
    ws.pool_members = ws.recompilation->commuting_pool;
    ws.pool.members = ws.pool_members;
    ws.pool.n_qubits = t.n_qubits;
    ws.pool.locality_bound = 2;
  } else {
    ws.pool = enumerate_pool(t.n_qubits, cfg.pool.locality);
    ws.pool_members = ws.pool.members;
  }

  const int nu = ws.opt_ansatz.n_params;
  ws.n_constraints = cfg.optimizer.n_constraints
                         ? *cfg.optimizer.n_constraints
                         : static_cast<int>(std::lround(std::ceil(cfg.optimizer.nc_over_nu * nu)));
  if (ws.n_constraints < 1 || static_cast<std::size_t>(ws.n_constraints) > ws.pool.size())
    throw ConfigError("constraint count " + std::to_string(ws.n_constraints) +
                      " outside [1, pool size " + std::to_string(ws.pool.size()) + "]");
  return ws;
}

ProviderPtr make_provider(const ExperimentConfig& cfg, const Workspace& ws, std::uint64_t seed) {
  auto exact = std::make_shared<ExactProvider>();
  switch (cfg.provider.kind) {
    case ProviderConfig::Kind::exact: return exact;
    case ProviderConfig::Kind::shot_noise:
      return shot_noisy_provider(exact, {cfg.provider.n_shots, derive_seed(seed, 0xA1)});
    case ProviderConfig::Kind::circuit_noise:
      return circuit_noisy_provider(
          exact, {cfg.provider.fidelity, cfg.provider.sigma, derive_seed(seed, 0xA2)});
    case ProviderConfig::Kind::shadows: {
      const int r = static_cast<int>(ws.h.terms.size());
      const int locality =
          std::min(ws.hamiltonian_locality + cfg.pool.locality, cfg.task.n_qubits);
      const long n_observables =
          static_cast<long>(r) + ws.n_constraints + static_cast<long>(r) * ws.n_constraints;
      return std::make_shared<ShadowProvider>(
          plan_budget(cfg.provider.epsilon, cfg.provider.delta, locality,
                      static_cast<int>(n_observables)),
          derive_seed(seed, 0xA3));
    }
  }
  throw ConfigError("unreachable provider kind");
}

std::vector<double> random_theta(int nu, std::uint64_t seed) {
  auto rng = make_rng(seed);
  std::uniform_real_distribution<double> wide(-2 * M_PI, 2 * M_PI);
  std::vector<double> theta(nu);
  for (double& x : theta) x = wide(rng);
  return theta;
}

std::vector<double> perturbed(std::span<const double> theta, double scale, std::uint64_t seed) {
  auto rng = make_rng(seed);
  std::uniform_real_distribution<double> delta(-scale, scale);
  std::vector<double> out(theta.begin(), theta.end());
  if (scale > 0)
    for (double& x : out) x += delta(rng);
  return out;
}

int classify_eigenstate(const Workspace& ws, double energy, double tol) {
  if (ws.spectrum) {
    int best = -1;
    double best_gap = tol;
    for (Eigen::Index k = 0; k < ws.spectrum->values.size(); ++k) {
      const double gap = std::abs(energy - ws.spectrum->values(k));
      if (gap < best_gap) {
        best_gap = gap;
        best = static_cast<int>(k);
      }
    }
    return best;
  }
  // -sum Z_j spectrum is -N + 2k
  const double level = (energy - ws.ground_energy) / 2.0;
  const long k = std::lround(level);
  return std::abs(level - k) * 2.0 < tol ? static_cast<int>(k) : -1;
}

SeedOutcome finish_outcome(const ExperimentConfig& cfg, const Workspace& ws,
                           const MetricsEvaluator& metrics, std::span<const double> theta_final,
                           std::uint64_t seed, const IterationTrace& trace, bool converged,
                           const ExpectationProvider& provider) {
  const auto m = metrics.evaluate(ws.opt_ansatz, theta_final);
  SeedOutcome out;
  out.seed = seed;
  out.energy_error = m.energy - ws.ground_energy;
  out.infidelity = m.infidelity;
  out.infidelity_max_basis = m.infidelity_max_basis;
  out.iterations = static_cast<int>(trace.rows.size());
  out.flagged = trace.flagged_count();
  out.provider_queries = provider.query_count();
  out.snapshots = provider.snapshot_count();
  out.converged = converged;
  out.eigenstate_index = classify_eigenstate(ws, m.energy, cfg.classify_tol);
  return out;
}

SeedOutcome run_seed_impl(const ExperimentConfig& cfg, const Workspace& ws, std::uint64_t seed,
                          IterationTrace* trace_out) {
  ProviderPtr provider = make_provider(cfg, ws, seed);
  MetricsEvaluator metrics(ws.h, ws.reference);
  LmConfig lm = cfg.optimizer.lm;
  lm.n_constraints = ws.n_constraints;

  std::vector<double> theta0 =
      ws.recompilation
          ? initial_parameters(*ws.recompilation, cfg.task.perturb, derive_seed(seed, 0xB1))
          : random_theta(ws.opt_ansatz.n_params, derive_seed(seed, 0xB2));

  IterationTrace trace;
  std::vector<double> theta_final;
  bool converged = false;
  double initial_overlap =
      fidelity(prepare(ws.opt_ansatz, theta0), ws.reference);

  switch (cfg.optimizer.kind) {
    case OptimizerConfig::Kind::covar: {
      auto result = covar_iterate(*provider, ws.opt_ansatz, theta0, ws.h, ws.pool, lm,
                                  derive_seed(seed, 0xB3), &metrics);
      theta_final = std::move(result.theta);
      trace = std::move(result.trace);
      converged = result.converged;
      break;
    }
    case OptimizerConfig::Kind::vqe:
    case OptimizerConfig::Kind::variance_vqe: {
      GdConfig gd = cfg.optimizer.gd;
      gd.target = cfg.optimizer.kind == OptimizerConfig::Kind::vqe
                      ? GdConfig::Target::energy
                      : GdConfig::Target::variance;
      auto result = run_baseline(gd.target == GdConfig::Target::energy
                                     ? BaselineKind::vqe
                                     : BaselineKind::variance_vqe,
                                 *provider, ws.opt_ansatz, theta0, ws.h, gd, cfg.optimizer.nat,
                                 &metrics);
      theta_final = std::move(result.theta);
      trace = std::move(result.trace);
      break;
    }
    case OptimizerConfig::Kind::nat_grad: {
      auto result = run_baseline(BaselineKind::nat_grad, *provider, ws.opt_ansatz, theta0, ws.h,
                                 cfg.optimizer.gd, cfg.optimizer.nat, &metrics);
      theta_final = std::move(result.theta);
      trace = std::move(result.trace);
      break;
    }
    case OptimizerConfig::Kind::nat_grad_then_covar: {
      NatGradConfig nat = cfg.optimizer.nat;
      nat.stop_energy = ws.ground_energy + cfg.optimizer.init_stop_above_ground;
      auto init = run_baseline(BaselineKind::nat_grad, *provider, ws.opt_ansatz, theta0, ws.h,
                               cfg.optimizer.gd, nat, nullptr);
      std::vector<double> start =
          perturbed(init.theta, cfg.optimizer.init_perturb, derive_seed(seed, 0xB4));
      initial_overlap = fidelity(prepare(ws.opt_ansatz, start), ws.reference);
      auto result = covar_iterate(*provider, ws.opt_ansatz, start, ws.h, ws.pool, lm,
                                  derive_seed(seed, 0xB3), &metrics);
      theta_final = std::move(result.theta);
      trace = std::move(result.trace);
      converged = result.converged;
      break;
    }
  }

  SeedOutcome out =
      finish_outcome(cfg, ws, metrics, theta_final, seed, trace, converged, *provider);
  out.initial_ground_overlap = initial_overlap;
  if (trace_out) *trace_out = std::move(trace);
  return out;
}

void for_each_seed(const ExperimentConfig& cfg, const Workspace& ws, int n_threads,
                   std::vector<SeedOutcome>& outcomes, std::vector<IterationTrace>& traces) {
  const std::size_t n = cfg.seeds.size();
  outcomes.resize(n);
  traces.resize(n);
  n_threads = std::max(1, std::min<int>(n_threads, static_cast<int>(n)));
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> workers;
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto work = [&] {
    for (std::size_t i = next.fetch_add(1); i < n; i = next.fetch_add(1)) {
      try {
        outcomes[i] = run_seed_impl(cfg, ws, cfg.seeds[i], &traces[i]);
      } catch (...) {
        std::lock_guard<std::mutex> lock(failure_mutex);
        if (!failure) failure = std::current_exception();
        return;
      }
    }
  };
  if (n_threads == 1) {
    work();
  } else {
    for (int t = 0; t < n_threads; ++t) workers.emplace_back(work);
    for (auto& w : workers) w.join();
  }
  if (failure) std::rethrow_exception(failure);
}

}  // namespace

double quantile(std::vector<double> values, double q) {
  if (values.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::sort(values.begin(), values.end());
  const double pos = q * static_cast<double>(values.size() - 1);
  const std::size_t lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, values.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return values[lo] * (1.0 - frac) + values[hi] * frac;
}

void RunSummary::recompute_aggregates() {
  std::vector<double> energy, infid;
  for (const auto& row : per_seed) {
    energy.push_back(row.energy_error);
    infid.push_back(row.infidelity);
  }
  median_energy_error = quantile(energy, 0.5);
  median_infidelity = quantile(infid, 0.5);
  q1_infidelity = quantile(infid, 0.25);
  q3_infidelity = quantile(infid, 0.75);
}

std::string RunSummary::to_json() const {
  json rows = json::array();
  for (const auto& r : per_seed) {
    rows.push_back({{"seed", r.seed},
                    {"energy_error", r.energy_error},
                    {"infidelity", r.infidelity},
                    {"infidelity_max_basis", r.infidelity_max_basis},
                    {"iterations", r.iterations},
                    {"flagged", r.flagged},
                    {"provider_queries", r.provider_queries},
                    {"snapshots", r.snapshots},
                    {"converged", r.converged},
                    {"eigenstate_index", r.eigenstate_index},
                    {"initial_ground_overlap", r.initial_ground_overlap},
                    {"stall_energy_error", r.stall_energy_error},
                    {"energy_transiently_increased", r.energy_transiently_increased}});
  }
  json out = {{"per_seed", rows},
              {"aggregates",
               {{"median_energy_error", median_energy_error},
                {"median_infidelity", median_infidelity},
                {"q1_infidelity", q1_infidelity},
                {"q3_infidelity", q3_infidelity}}}};
  return out.dump(2);
}

SeedOutcome run_seed(const ExperimentConfig& config, std::uint64_t seed,
                     IterationTrace* trace_out) {
  const Workspace ws = make_workspace(config);
  return run_seed_impl(config, ws, seed, trace_out);
}

RunSummary local_trap_escape(const ExperimentConfig& config) {
  const Workspace ws = make_workspace(config);
  MetricsEvaluator metrics(ws.h, ws.reference);
  RunSummary summary;

  for (std::uint64_t seed : config.seeds) {
    ProviderPtr provider = make_provider(config, ws, seed);
    std::vector<double> theta0 =
        random_theta(ws.opt_ansatz.n_params, derive_seed(seed, 0xC1));

    GdConfig gd = config.optimizer.gd;
    gd.adaptive = true;
    gd.max_iterations = config.optimizer.gd_max_iterations;
    gd.stall_threshold = config.optimizer.stall_threshold;
    gd.target = GdConfig::Target::energy;
    auto stall =
        run_baseline(BaselineKind::vqe, *provider, ws.opt_ansatz, theta0, ws.h, gd,
                     config.optimizer.nat, nullptr);
    const double stall_energy = expectation(prepare(ws.opt_ansatz, stall.theta), ws.h);
    const double stall_error = stall_energy - ws.ground_energy;

    SeedOutcome out;
    out.seed = seed;
    out.stall_energy_error = stall_error;
    if (stall_error < config.classify_tol) {
      // gradient descent already converged; nothing to escape from
      out = finish_outcome(config, ws, metrics, stall.theta, seed, stall.trace, true, *provider);
      out.stall_energy_error = stall_error;
      out.energy_transiently_increased = false;
      summary.per_seed.push_back(out);
      continue;
    }

    LmConfig lm = config.optimizer.lm;
    lm.n_constraints = ws.n_constraints;
    auto result = covar_iterate(*provider, ws.opt_ansatz, stall.theta, ws.h, ws.pool, lm,
                                derive_seed(seed, 0xC2), &metrics);
    out = finish_outcome(config, ws, metrics, result.theta, seed, result.trace, result.converged,
                         *provider);
    out.stall_energy_error = stall_error;
    for (const auto& row : result.trace.rows)
      if (row.energy > stall_energy + 1e-9) out.energy_transiently_increased = true;
    summary.per_seed.push_back(out);
  }
  summary.recompute_aggregates();
  return summary;
}

DistributionResult convergence_distribution(const ExperimentConfig& config) {
  if (config.task.kind != TaskConfig::Kind::spin_ring)
    throw ConfigError("convergence_distribution requires the spin_ring task");
  const Workspace ws = make_workspace(config);
  MetricsEvaluator metrics(ws.h, ws.reference);

  std::vector<double> targets = config.init_stop_energies_above_ground;
  if (targets.empty()) targets = {2.0, 1.2, 0.8, 0.5, 0.3, 0.15, 0.05};

  DistributionResult result;
  for (std::size_t i = 0; i < config.seeds.size(); ++i) {
    const std::uint64_t seed = config.seeds[i];
    ProviderPtr provider = make_provider(config, ws, seed);
    std::vector<double> theta0 =
        random_theta(ws.opt_ansatz.n_params, derive_seed(seed, 0xD1));

    NatGradConfig nat = config.optimizer.nat;
    nat.stop_energy = ws.ground_energy + targets[i % targets.size()];
    auto init = run_baseline(BaselineKind::nat_grad, *provider, ws.opt_ansatz, theta0, ws.h,
                             config.optimizer.gd, nat, nullptr);
    std::vector<double> start =
        perturbed(init.theta, config.optimizer.init_perturb, derive_seed(seed, 0xD2));

    LmConfig lm = config.optimizer.lm;
    lm.n_constraints = ws.n_constraints;
    auto covar = covar_iterate(*provider, ws.opt_ansatz, start, ws.h, ws.pool, lm,
                               derive_seed(seed, 0xD3), &metrics);
    SeedOutcome out = finish_outcome(config, ws, metrics, covar.theta, seed, covar.trace,
                                     covar.converged, *provider);
    out.initial_ground_overlap = fidelity(prepare(ws.opt_ansatz, start), ws.reference);
    result.per_seed.push_back(out);
  }

  constexpr double kWidth = 0.1;
  std::map<int, DistributionRow> buckets;
  for (const auto& row : result.per_seed) {
    const int b = std::min(9, static_cast<int>(row.initial_ground_overlap / kWidth));
    auto& bucket = buckets[b];
    bucket.bucket_low = b * kWidth;
    bucket.n_runs += 1;
    bucket.eigenstate_indices.push_back(row.eigenstate_index);
    if (row.eigenstate_index == 0) bucket.fraction_ground += 1;
  }
  for (auto& [b, bucket] : buckets) {
    bucket.fraction_ground /= bucket.n_runs;
    result.buckets.push_back(bucket);
  }
  return result;
}

namespace {

void write_text_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
}

RunSummary run_standard(const ExperimentConfig& cfg, const Workspace& ws, int n_threads,
                        const std::filesystem::path& dir) {
  std::vector<SeedOutcome> outcomes;
  std::vector<IterationTrace> traces;
  for_each_seed(cfg, ws, n_threads, outcomes, traces);
  for (std::size_t i = 0; i < cfg.seeds.size(); ++i) {
    std::ofstream out(dir / ("trace_seed" + std::to_string(cfg.seeds[i]) + ".csv"));
    write_trace_csv(traces[i], out);
  }
  RunSummary summary;
  summary.per_seed = std::move(outcomes);
  summary.recompute_aggregates();
  return summary;
}

}  // namespace

int run_experiment(const ExperimentConfig& config, int n_threads) {
  config.validate();
  const Workspace ws = make_workspace(config);  // may throw ConfigError before any output
  const std::filesystem::path dir(config.output_dir);
  std::filesystem::create_directories(dir);

  switch (config.task.kind) {
    case TaskConfig::Kind::recompilation:
    case TaskConfig::Kind::spin_ring: {
      if (config.convergence_distribution) {
        DistributionResult result = convergence_distribution(config);
        std::ostringstream csv;
        csv << "bucket_low,n_runs,fraction_ground,indices\n";
        for (const auto& b : result.buckets) {
          csv << b.bucket_low << ',' << b.n_runs << ',' << b.fraction_ground << ',';
          for (std::size_t i = 0; i < b.eigenstate_indices.size(); ++i)
            csv << (i ? " " : "") << b.eigenstate_indices[i];
          csv << '\n';
        }
        write_text_file(dir / "distribution.csv", csv.str());
        RunSummary summary;
        summary.per_seed = result.per_seed;
        summary.recompute_aggregates();
        write_text_file(dir / "summary.json", summary.to_json());
        return 0;
      }
      if (config.sweep && !config.sweep->empty()) {
        std::ostringstream table;
        table << "parameter,value,median_infidelity,q1_infidelity,q3_infidelity,"
                 "median_energy_error\n";
        auto run_point = [&](const std::string& name, double value, ExperimentConfig point) {
          point.sweep.reset();
          const Workspace pws = make_workspace(point);
          const std::filesystem::path sub = dir / (name + "_" + std::to_string(value));
          std::filesystem::create_directories(sub);
          RunSummary s = run_standard(point, pws, n_threads, sub);
          write_text_file(sub / "summary.json", s.to_json());
          table << name << ',' << value << ',' << s.median_infidelity << ',' << s.q1_infidelity
                << ',' << s.q3_infidelity << ',' << s.median_energy_error << '\n';
        };
        for (double v : config.sweep->nc_over_nu) {
          ExperimentConfig point = config;
          point.optimizer.nc_over_nu = v;
          point.optimizer.n_constraints.reset();
          run_point("nc_over_nu", v, point);
        }
        for (double v : config.sweep->n_shots) {
          ExperimentConfig point = config;
          point.provider.n_shots = v;
          run_point("n_shots", v, point);
        }
        write_text_file(dir / "sweep_table.csv", table.str());
        return 0;
      }
      RunSummary summary = run_standard(config, ws, n_threads, dir);
      write_text_file(dir / "summary.json", summary.to_json());
      return 0;
    }
    case TaskConfig::Kind::overdetermination_demo: {
      std::ostringstream csv;
      csv << "seed,least_squares,newton_mean,n_newton,ls_distance,newton_distance\n";
      const double truth = -config.task.delta0;
      // a final-layer parameter: its circuit prefix entangles, so most
      // sampled constraints are sensitive to the disturbance
      const int disturbed = ws.opt_ansatz.n_params - config.task.n_qubits;
      int ls_closer = 0;
      for (std::uint64_t seed : config.seeds) {
        const auto demo = overdetermination_demo(
            ws.opt_ansatz, ws.recompilation->theta_star, disturbed, config.task.delta0, ws.pool,
            config.task.demo_constraints, ws.h, derive_seed(seed, 0xE1));
        const double ls_dist = std::abs(demo.least_squares - truth);
        const double newton_dist = std::abs(demo.newton_mean - truth);
        if (ls_dist < newton_dist) ++ls_closer;
        csv << seed << ',' << demo.least_squares << ',' << demo.newton_mean << ','
            << demo.newton_estimates.size() << ',' << ls_dist << ',' << newton_dist << '\n';
      }
      write_text_file(dir / "overdetermination.csv", csv.str());
      write_text_file(dir / "summary.json",
                      json{{"ls_closer", ls_closer}, {"seeds", config.seeds.size()}}.dump(2));
      return 0;
    }
    case TaskConfig::Kind::noise_floor_probe: {
      const double n_shots = config.provider.n_shots;
      ProviderFactory factory = [n_shots](std::uint64_t s) {
        return shot_noisy_provider(std::make_shared<ExactProvider>(), {n_shots, s});
      };
      const int disturbed = ws.opt_ansatz.n_params - config.task.n_qubits;
      const auto rows = noise_floor_probe(ws.opt_ansatz, ws.recompilation->theta_star, disturbed,
                                          config.task.delta0, ws.h, ws.pool,
                                          config.task.nc_values, factory,
                                          config.task.n_noise_seeds, config.seeds.front());
      std::ostringstream csv;
      csv << "n_constraints,step_error_std\n";
      for (const auto& r : rows) csv << r.n_constraints << ',' << r.step_error_std << '\n';
      write_text_file(dir / "noise_floor.csv", csv.str());
      write_text_file(dir / "summary.json", json{{"rows", rows.size()}}.dump(2));
      return 0;
    }
    case TaskConfig::Kind::local_trap_escape: {
      RunSummary summary = local_trap_escape(config);
      std::ostringstream csv;
      csv << "seed,stall_energy_error,final_energy_error,transient_increase\n";
      for (const auto& r : summary.per_seed)
        csv << r.seed << ',' << r.stall_energy_error << ',' << r.energy_error << ','
            << (r.energy_transiently_increased ? 1 : 0) << '\n';
      write_text_file(dir / "trap_escape.csv", csv.str());
      write_text_file(dir / "summary.json", summary.to_json());
      return 0;
    }
  }
  return 1;
}

}  // namespace covar
