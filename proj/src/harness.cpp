#include "polyfw/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <thread>

#include "polyfw/io.hpp"
#include "polyfw/rng.hpp"
#include "polyfw/version.hpp"

namespace polyfw {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kTargetSlack = 1e-3;  // "within 1e-3 relative of best known"

[[noreturn]] void spec_error(const std::string& what) {
  throw std::invalid_argument(what);
}

nlohmann::json finite_or(double v, const char* fallback) {
  if (std::isfinite(v)) return v;
  return fallback;
}

}  // namespace

long ExperimentSpec::measurements() const {
  return std::lround(alpha * static_cast<double>(sparsity));
}

std::string ExperimentSpec::cell_id() const {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "cell_K%ld_a%g", sparsity, alpha);
  return std::string(buf);
}

SolverConfig ExperimentSpec::config_for(SolverKind kind) const {
  SolverConfig cfg;
  auto it = configs.find(kind);
  if (it != configs.end()) cfg = it->second;
  cfg.time_budget_s = budget_s;  // the cell budget always wins
  return cfg;
}

void ExperimentSpec::validate() const {
  if (sparsity < 1) spec_error("ExperimentSpec: sparsity K must be >= 1");
  if (!(alpha > 1.0)) spec_error("ExperimentSpec: alpha must be > 1");
  if (sparsity > n_features) spec_error("ExperimentSpec: K exceeds N");
  const long l = measurements();
  if (l < 1) spec_error("ExperimentSpec: L = round(alpha K) must be >= 1");
  if (l >= n_features)
    spec_error("ExperimentSpec: L = " + std::to_string(l) +
               " must be smaller than N = " + std::to_string(n_features));
  if (n_trials < 1) spec_error("ExperimentSpec: n_trials must be >= 1");
  if (!(budget_s > 0.0)) spec_error("ExperimentSpec: budget_s must be > 0");
  if (!(lambda_factor > 0.0) || lambda_factor >= 1.0)
    spec_error("ExperimentSpec: lambda_factor must be in (0, 1)");
  if (solvers.empty()) spec_error("ExperimentSpec: no solvers listed");
  for (SolverKind kind : solvers) config_for(kind).validate();
}

GeneratedInstance generate_instance(const ExperimentSpec& spec, std::uint64_t seed) {
  spec.validate();
  const long l = spec.measurements();
  const long n = spec.n_features;
  const long k = spec.sparsity;
  Rng rng(seed);

  const double scale = 1.0 / std::sqrt(static_cast<double>(l));
  Eigen::MatrixXd a(l, n);
  for (long j = 0; j < n; ++j)  // column-major fill; part of the seed contract
    for (long i = 0; i < l; ++i) a(i, j) = scale * rng.normal();

  std::vector<int> pool(static_cast<std::size_t>(n));
  std::iota(pool.begin(), pool.end(), 0);
  for (long j = 0; j < k; ++j)
    std::swap(pool[static_cast<std::size_t>(j)],
              pool[static_cast<std::size_t>(j) +
                   static_cast<std::size_t>(rng.below(static_cast<std::uint64_t>(n - j)))]);
  std::vector<int> support(pool.begin(), pool.begin() + k);
  std::sort(support.begin(), support.end());
  std::vector<double> values(static_cast<std::size_t>(k));
  for (auto& v : values) {
    do {
      v = rng.normal();
    } while (v == 0.0);
  }
  SparseIterate x0(n, std::move(support), std::move(values));

  DesignMatrix matrix(std::move(a));
  const Eigen::VectorXd ax0 = matrix.apply(x0);
  const double peak = ax0.cwiseAbs().maxCoeff();
  const double sigma = peak * std::pow(10.0, -spec.psnr_db / 20.0);
  Eigen::VectorXd y = ax0;
  for (long i = 0; i < l; ++i) y[i] += sigma * rng.normal();

  const double lmax = matrix.adjoint(y).cwiseAbs().maxCoeff();
  const double lambda = spec.lambda_factor * lmax;
  if (!(lambda > 0.0))
    throw std::runtime_error("generate_instance: degenerate instance (lambda = 0)");
  return {LassoProblem(std::move(matrix), std::move(y), lambda), std::move(x0), sigma, seed};
}

namespace {

std::vector<RunRecord> run_trial(const ExperimentSpec& spec, long trial) {
  const std::uint64_t seed = derive_seed(spec.base_seed, static_cast<std::uint64_t>(trial));
  const GeneratedInstance instance = generate_instance(spec, seed);
  std::vector<RunRecord> out;
  out.reserve(spec.solvers.size());
  for (SolverKind kind : spec.solvers) {
    RunRecord rec;
    rec.sparsity = spec.sparsity;
    rec.alpha = spec.alpha;
    rec.solver = kind;
    rec.seed = seed;
    try {
      SolveResult result = solve(instance.problem, spec.config_for(kind), kind);
      rec.final_objective = objective(instance.problem, result.x);
      rec.final_support_size = result.x.nnz();
      rec.final_x = std::move(result.x);
      rec.trajectory = std::move(result.trajectory);
    } catch (const std::exception& e) {
      rec.failed = true;
      rec.error = e.what();
    }
    out.push_back(std::move(rec));
  }
  return out;
}

}  // namespace

std::vector<RunRecord> run_cell(const ExperimentSpec& spec) {
  spec.validate();
  std::vector<std::vector<RunRecord>> per_trial(static_cast<std::size_t>(spec.n_trials));
  if (!spec.parallel_trials || spec.n_trials == 1) {
    for (long t = 0; t < spec.n_trials; ++t)
      per_trial[static_cast<std::size_t>(t)] = run_trial(spec, t);
  } else {
    const int workers = std::clamp(env_thread_cap(), 1, static_cast<int>(spec.n_trials));
    std::atomic<long> next{0};
    auto work = [&] {
      while (true) {
        const long t = next.fetch_add(1);
        if (t >= spec.n_trials) break;
        per_trial[static_cast<std::size_t>(t)] = run_trial(spec, t);
      }
    };
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w) pool.emplace_back(work);
    for (auto& th : pool) th.join();
  }
  std::vector<RunRecord> records;
  for (auto& trial : per_trial)
    for (auto& rec : trial) records.push_back(std::move(rec));
  return records;
}

double quantile(std::vector<double> values, double q) {
  if (values.empty()) spec_error("quantile: empty sample");
  std::sort(values.begin(), values.end());
  q = std::clamp(q, 0.0, 1.0);
  const double pos = q * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(pos);
  const double frac = pos - static_cast<double>(lo);
  if (frac == 0.0) return values[lo];
  const double a = values[lo];
  const double b = values[lo + 1];
  if (std::isinf(b)) return b;  // a <= b after sorting
  return a + frac * (b - a);
}

std::vector<AggregateCurve> aggregate(const std::vector<RunRecord>& records,
                                      int grid_points, double budget_s) {
  if (grid_points < 2) spec_error("aggregate: need at least 2 grid points");
  std::vector<const RunRecord*> usable;
  for (const auto& rec : records)
    if (!rec.failed && !rec.trajectory.samples.empty()) usable.push_back(&rec);
  if (usable.empty()) spec_error("aggregate: no usable records");

  double t_min = kInf;
  for (const RunRecord* rec : usable)
    for (const auto& s : rec->trajectory.samples)
      if (s.wall_time_s > 0.0) t_min = std::min(t_min, s.wall_time_s);
  if (!std::isfinite(t_min) || t_min >= budget_s) t_min = budget_s / 1e6;

  std::vector<double> grid(static_cast<std::size_t>(grid_points));
  const double log_lo = std::log(t_min);
  const double log_hi = std::log(budget_s);
  for (int i = 0; i < grid_points; ++i)
    grid[static_cast<std::size_t>(i)] =
        std::exp(log_lo + (log_hi - log_lo) * static_cast<double>(i) /
                              static_cast<double>(grid_points - 1));

  // group by solver, keeping first-appearance order
  std::vector<std::string> order;
  std::map<std::string, std::vector<const RunRecord*>> groups;
  for (const RunRecord* rec : usable) {
    const std::string name(solver_name(rec->solver));
    if (groups.find(name) == groups.end()) order.push_back(name);
    groups[name].push_back(rec);
  }

  std::vector<AggregateCurve> curves;
  for (const auto& name : order) {
    AggregateCurve curve;
    curve.solver = name;
    for (double t : grid) {
      std::vector<double> values;
      for (const RunRecord* rec : groups[name]) {
        const auto& samples = rec->trajectory.samples;
        auto it = std::upper_bound(samples.begin(), samples.end(), t,
                                   [](double lhs, const TrajectorySample& s) {
                                     return lhs < s.wall_time_s;
                                   });
        if (it == samples.begin()) continue;  // undefined before the first sample
        values.push_back(std::prev(it)->objective);
      }
      if (values.empty()) continue;
      curve.time_s.push_back(t);
      curve.p25.push_back(quantile(values, 0.25));
      curve.median.push_back(quantile(values, 0.50));
      curve.p75.push_back(quantile(values, 0.75));
      curve.count.push_back(static_cast<long>(values.size()));
    }
    curves.push_back(std::move(curve));
  }
  return curves;
}

double time_to_reach(const Trajectory& trajectory, double target) {
  for (const auto& s : trajectory.samples)
    if (s.objective <= target) return s.wall_time_s;
  return kInf;
}

CellSummary summarize_cell(const std::vector<RunRecord>& records) {
  std::map<std::uint64_t, double> best_by_seed;
  for (const auto& rec : records) {
    if (rec.failed) continue;
    auto [it, inserted] = best_by_seed.try_emplace(rec.seed, rec.final_objective);
    if (!inserted) it->second = std::min(it->second, rec.final_objective);
  }
  std::map<SolverKind, std::vector<double>> times;
  for (const auto& rec : records) {
    auto it = best_by_seed.find(rec.seed);
    if (it == best_by_seed.end()) continue;
    const double target = it->second * (1.0 + kTargetSlack);
    times[rec.solver].push_back(rec.failed ? kInf : time_to_reach(rec.trajectory, target));
  }
  CellSummary summary;
  for (const auto& [kind, ts] : times)
    summary.median_time_to_target_s[kind] = quantile(ts, 0.5);
  auto pfw = summary.median_time_to_target_s.find(SolverKind::pfw);
  if (pfw != summary.median_time_to_target_s.end()) {
    for (const auto& [kind, median] : summary.median_time_to_target_s) {
      if (kind == SolverKind::pfw) continue;
      summary.speedup_vs_pfw[kind] = median / pfw->second;
    }
  }
  return summary;
}

std::filesystem::path persist(const ExperimentSpec& spec,
                              const std::vector<RunRecord>& records,
                              const std::vector<AggregateCurve>& curves,
                              const std::filesystem::path& out_dir,
                              const nlohmann::json& extras) {
  const std::filesystem::path cell_dir = out_dir / spec.cell_id();
  std::error_code ec;
  std::filesystem::create_directories(cell_dir, ec);
  if (ec)
    throw std::runtime_error(cell_dir.string() + ": cannot create directory (" +
                             ec.message() + ")");

  {
    const auto path = cell_dir / "raw.csv";
    std::ofstream out(path);
    if (!out) throw std::runtime_error(path.string() + ": cannot open for writing");
    out << "cell_id,solver,seed,k,wall_time_s,objective,support_size,certificate_linf\n";
    for (const auto& rec : records) {
      if (rec.failed) continue;
      for (const auto& s : rec.trajectory.samples)
        out << spec.cell_id() << ',' << solver_name(rec.solver) << ',' << rec.seed << ','
            << s.k << ',' << format_double_exact(s.wall_time_s) << ','
            << format_double_exact(s.objective) << ',' << s.support_size << ','
            << format_double_exact(s.certificate_linf) << '\n';
    }
    if (!out) throw std::runtime_error(path.string() + ": write failed");
  }

  {
    const auto path = cell_dir / "agg.csv";
    std::ofstream out(path);
    if (!out) throw std::runtime_error(path.string() + ": cannot open for writing");
    out << "solver,time_s,objective_p25,objective_median,objective_p75,n\n";
    for (const auto& curve : curves)
      for (std::size_t i = 0; i < curve.time_s.size(); ++i)
        out << curve.solver << ',' << format_double_exact(curve.time_s[i]) << ','
            << format_double_exact(curve.p25[i]) << ','
            << format_double_exact(curve.median[i]) << ','
            << format_double_exact(curve.p75[i]) << ',' << curve.count[i] << '\n';
    if (!out) throw std::runtime_error(path.string() + ": write failed");
  }

  nlohmann::json manifest;
  manifest["version"] = kVersion;
  manifest["rng"] = {
      {"engine", "mt19937_64"},
      {"uniforms", "top 53 bits of the engine output"},
      {"normals", "box-muller (paired draws)"},
      {"matrix_fill_order", "column-major"},
      {"trial_seed", "splitmix64(base_seed ^ 0xa0761d6478bd642f * (trial + 1))"},
      {"bit_exactness", "guaranteed within one library version"},
  };
  manifest["psnr_definition"] = "psnr_db = 20 log10(max_abs(A x0) / sigma)";
  manifest["objective_convention"] = "0.5 ||y - A x||_2^2 + lambda ||x||_1";
  manifest["spec"] = spec_to_json(spec);
  manifest["timing_waiver"] =
      spec.parallel_trials ? "parallel trials enabled; wall times not comparable" : "";

  nlohmann::json runs = nlohmann::json::array();
  for (const auto& rec : records) {
    nlohmann::json r;
    r["solver"] = std::string(solver_name(rec.solver));
    r["seed"] = rec.seed;
    if (rec.failed) {
      r["failed"] = true;
      r["error"] = rec.error;
    } else {
      r["terminal_reason"] = std::string(to_string(rec.trajectory.terminal_reason));
      r["final_objective"] = rec.final_objective;
      r["final_support_size"] = rec.final_support_size;
      r["samples"] = rec.trajectory.samples.size();
    }
    runs.push_back(std::move(r));
  }
  manifest["runs"] = std::move(runs);

  const CellSummary summary = summarize_cell(records);
  nlohmann::json med, speed;
  for (const auto& [kind, v] : summary.median_time_to_target_s)
    med[std::string(solver_name(kind))] = finite_or(v, "unreached");
  for (const auto& [kind, v] : summary.speedup_vs_pfw) {
    if (std::isnan(v))
      speed[std::string(solver_name(kind))] = "undefined";
    else
      speed[std::string(solver_name(kind))] = finite_or(v, "inf");
  }
  manifest["summary"] = {
      {"target_rule", "per-trial best final objective * (1 + 1e-3)"},
      {"median_time_to_target_s", std::move(med)},
      {"speedup_vs_pfw", std::move(speed)},
  };
  if (!extras.is_null())
    for (auto it = extras.begin(); it != extras.end(); ++it) manifest[it.key()] = it.value();

  {
    const auto path = cell_dir / "manifest.json";
    std::ofstream out(path);
    if (!out) throw std::runtime_error(path.string() + ": cannot open for writing");
    out << manifest.dump(2) << '\n';
    if (!out) throw std::runtime_error(path.string() + ": write failed");
  }
  return cell_dir;
}

namespace {

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    out.push_back(line.substr(start, comma == std::string::npos ? std::string::npos
                                                                : comma - start));
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return out;
}

}  // namespace

std::vector<RawRow> read_raw_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error(path.string() + ": cannot open for reading");
  std::string line;
  if (!std::getline(in, line) ||
      line != "cell_id,solver,seed,k,wall_time_s,objective,support_size,certificate_linf")
    throw std::runtime_error(path.string() + ": bad raw.csv header");
  std::vector<RawRow> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto f = split_line(line);
    if (f.size() != 8) throw std::runtime_error(path.string() + ": bad raw.csv row");
    RawRow row;
    row.cell_id = f[0];
    row.solver = f[1];
    row.seed = std::stoull(f[2]);
    row.k = std::stol(f[3]);
    row.wall_time_s = std::stod(f[4]);
    row.objective = std::stod(f[5]);
    row.support_size = std::stol(f[6]);
    row.certificate_linf = std::stod(f[7]);
    rows.push_back(std::move(row));
  }
  return rows;
}

std::vector<AggregateCurve> read_agg_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error(path.string() + ": cannot open for reading");
  std::string line;
  if (!std::getline(in, line) ||
      line != "solver,time_s,objective_p25,objective_median,objective_p75,n")
    throw std::runtime_error(path.string() + ": bad agg.csv header");
  std::vector<AggregateCurve> curves;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto f = split_line(line);
    if (f.size() != 6) throw std::runtime_error(path.string() + ": bad agg.csv row");
    auto it = std::find_if(curves.begin(), curves.end(),
                           [&](const AggregateCurve& c) { return c.solver == f[0]; });
    if (it == curves.end()) {
      curves.push_back(AggregateCurve{f[0], {}, {}, {}, {}, {}});
      it = std::prev(curves.end());
    }
    it->time_s.push_back(std::stod(f[1]));
    it->p25.push_back(std::stod(f[2]));
    it->median.push_back(std::stod(f[3]));
    it->p75.push_back(std::stod(f[4]));
    it->count.push_back(std::stol(f[5]));
  }
  return curves;
}

nlohmann::json config_to_json(const SolverConfig& config) {
  return {
      {"delta", config.delta},
      {"eps0", config.eps0},
      {"max_iter", config.max_iter},
      {"time_budget_s", config.time_budget_s},
      {"kkt_tol", config.kkt_tol},
      {"record_every", config.record_every},
      {"prune_zero_weights", config.prune_zero_weights},
      {"eps_full", config.eps_full},
      {"correction_max_inner", config.correction_max_inner},
  };
}

SolverConfig config_from_json(const nlohmann::json& j, SolverConfig base) {
  base.delta = j.value("delta", base.delta);
  base.eps0 = j.value("eps0", base.eps0);
  base.max_iter = j.value("max_iter", base.max_iter);
  base.time_budget_s = j.value("time_budget_s", base.time_budget_s);
  base.kkt_tol = j.value("kkt_tol", base.kkt_tol);
  base.record_every = j.value("record_every", base.record_every);
  base.prune_zero_weights = j.value("prune_zero_weights", base.prune_zero_weights);
  base.eps_full = j.value("eps_full", base.eps_full);
  base.correction_max_inner = j.value("correction_max_inner", base.correction_max_inner);
  return base;
}

nlohmann::json spec_to_json(const ExperimentSpec& spec) {
  nlohmann::json solvers = nlohmann::json::array();
  nlohmann::json configs;
  for (SolverKind kind : spec.solvers) {
    solvers.push_back(std::string(solver_name(kind)));
    configs[std::string(solver_name(kind))] = config_to_json(spec.config_for(kind));
  }
  return {
      {"n_features", spec.n_features},
      {"sparsity", spec.sparsity},
      {"alpha", spec.alpha},
      {"measurements", spec.measurements()},
      {"psnr_db", spec.psnr_db},
      {"lambda_factor", spec.lambda_factor},
      {"n_trials", spec.n_trials},
      {"budget_s", spec.budget_s},
      {"solvers", std::move(solvers)},
      {"configs", std::move(configs)},
      {"base_seed", spec.base_seed},
      {"parallel_trials", spec.parallel_trials},
  };
}

ExperimentSpec spec_from_json(const nlohmann::json& j) {
  ExperimentSpec spec;
  spec.n_features = j.value("n_features", spec.n_features);
  spec.sparsity = j.value("sparsity", spec.sparsity);
  spec.alpha = j.value("alpha", spec.alpha);
  spec.psnr_db = j.value("psnr_db", spec.psnr_db);
  spec.lambda_factor = j.value("lambda_factor", spec.lambda_factor);
  spec.n_trials = j.value("n_trials", spec.n_trials);
  spec.budget_s = j.value("budget_s", spec.budget_s);
  spec.base_seed = j.value("base_seed", spec.base_seed);
  spec.parallel_trials = j.value("parallel_trials", spec.parallel_trials);
  SolverConfig base;
  if (j.contains("config")) base = config_from_json(j.at("config"), base);
  if (j.contains("solvers")) {
    spec.solvers.clear();
    for (const auto& name : j.at("solvers"))
      spec.solvers.push_back(parse_solver_name(name.get<std::string>()));
  }
  for (SolverKind kind : spec.solvers) spec.configs[kind] = base;
  if (j.contains("configs"))
    for (auto it = j.at("configs").begin(); it != j.at("configs").end(); ++it)
      spec.configs[parse_solver_name(it.key())] = config_from_json(it.value(), base);
  return spec;
}

int env_thread_cap() {
  if (const char* env = std::getenv("POLYFW_THREADS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end != env && v >= 1) return static_cast<int>(v);
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return hw > 0 ? static_cast<int>(hw) : 1;
}

}  // namespace polyfw
