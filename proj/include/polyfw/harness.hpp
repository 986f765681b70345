#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "polyfw/core.hpp"
#include "polyfw/solvers.hpp"

namespace polyfw {

// One benchmark grid cell: instance shape, noise level, penalty rule, trial
// protocol and the per-solver configurations.
struct ExperimentSpec {
  long n_features = 0;       // N
  long sparsity = 0;         // K
  double alpha = 0.0;        // oversampling, L = round(alpha K)
  double psnr_db = 20.0;
  double lambda_factor = 0.1;
  long n_trials = 15;
  double budget_s = 4.0;
  std::vector<SolverKind> solvers = all_solvers();
  std::map<SolverKind, SolverConfig> configs;  // missing entries use defaults
  std::uint64_t base_seed = 12345;
  bool parallel_trials = false;  // waives timing fidelity; recorded in manifest

  long measurements() const;  // L
  std::string cell_id() const;
  SolverConfig config_for(SolverKind kind) const;
  void validate() const;  // throws std::invalid_argument
};

struct GeneratedInstance {
  LassoProblem problem;
  SparseIterate ground_truth;
  double noise_sigma = 0.0;
  std::uint64_t seed = 0;
};

struct RunRecord {
  long sparsity = 0;
  double alpha = 0.0;
  SolverKind solver = SolverKind::pfw;
  std::uint64_t seed = 0;
  Trajectory trajectory;
  double final_objective = 0.0;
  long final_support_size = 0;
  SparseIterate final_x;
  bool failed = false;
  std::string error;
};

struct AggregateCurve {
  std::string solver;
  std::vector<double> time_s;
  std::vector<double> p25;
  std::vector<double> median;
  std::vector<double> p75;
  std::vector<long> count;  // trials defined at each grid point
};

// y = A x0 + w per the Gaussian compressed-sensing model; fully determined
// by the seed. Draw order: matrix entries (row-major), support, nonzero
// values, noise.
GeneratedInstance generate_instance(const ExperimentSpec& spec, std::uint64_t seed);

// Runs every (trial, solver) pair; all solvers of a trial share one instance.
// Trials execute sequentially unless spec.parallel_trials is set, in which
// case POLYFW_THREADS caps the worker count.
std::vector<RunRecord> run_cell(const ExperimentSpec& spec);

// Median and interquartile objective-vs-time curves per solver on a shared
// log-spaced grid; step (last-value-carried-forward) interpolation.
std::vector<AggregateCurve> aggregate(const std::vector<RunRecord>& records,
                                      int grid_points, double budget_s);

// Linear-interpolation quantile of an unsorted sample (0 <= q <= 1).
double quantile(std::vector<double> values, double q);

// First recorded time at which the trajectory's objective is <= target;
// +infinity if it never happens.
double time_to_reach(const Trajectory& trajectory, double target);

struct CellSummary {
  // per-trial best final objective scaled by (1 + 1e-3) defines the target
  std::map<SolverKind, double> median_time_to_target_s;
  std::map<SolverKind, double> speedup_vs_pfw;  // median_other / median_pfw
};
CellSummary summarize_cell(const std::vector<RunRecord>& records);

// Writes raw.csv, agg.csv and manifest.json under out_dir/<cell_id>/.
// `extras` is merged into the manifest (plot stats, waivers, ...).
std::filesystem::path persist(const ExperimentSpec& spec,
                              const std::vector<RunRecord>& records,
                              const std::vector<AggregateCurve>& curves,
                              const std::filesystem::path& out_dir,
                              const nlohmann::json& extras = {});

struct RawRow {
  std::string cell_id;
  std::string solver;
  std::uint64_t seed = 0;
  long k = 0;
  double wall_time_s = 0.0;
  double objective = 0.0;
  long support_size = 0;
  double certificate_linf = 0.0;
};
std::vector<RawRow> read_raw_csv(const std::filesystem::path& path);
std::vector<AggregateCurve> read_agg_csv(const std::filesystem::path& path);

nlohmann::json spec_to_json(const ExperimentSpec& spec);
ExperimentSpec spec_from_json(const nlohmann::json& j);
nlohmann::json config_to_json(const SolverConfig& config);
SolverConfig config_from_json(const nlohmann::json& j, SolverConfig base = {});

int env_thread_cap();  // POLYFW_THREADS, default hardware concurrency

}  // namespace polyfw
