#pragma once

#include <functional>
#include <span>
#include <string_view>
#include <vector>

#include "polyfw/core.hpp"

namespace polyfw {

enum class TerminalReason { kkt_converged, budget_exhausted, max_iter };

std::string_view to_string(TerminalReason reason);

struct SolverConfig {
  double delta = 1.0;            // linear-subproblem quality (pfw only)
  double eps0 = 1e-2;            // initial partial-correction accuracy
  long max_iter = 1'000'000;
  double time_budget_s = 600.0;  // wall-clock cap on solver-owned work
  double kkt_tol = 1e-4;         // stop once ||eta||_inf <= 1 + kkt_tol
  long record_every = 1;         // trajectory sampling stride
  bool prune_zero_weights = true;
  double eps_full = 1e-6;        // fc-fw correction accuracy, fixed across iterations
  long correction_max_inner = 200'000;  // safety cap on ISTA steps per correction

  void validate() const;  // throws std::invalid_argument
};

struct TrajectorySample {
  long k = 0;
  double wall_time_s = 0.0;
  double objective = 0.0;
  long support_size = 0;
  double certificate_linf = 0.0;
};

struct Trajectory {
  std::vector<TrajectorySample> samples;
  TerminalReason terminal_reason = TerminalReason::max_iter;
};

struct SolveResult {
  SparseIterate x;
  Trajectory trajectory;
  long iterations = 0;  // completed update steps
};

// Iterate on the lifted cone C = {(t, x) : ||x||_1 <= t <= M}.
struct LiftedIterate {
  SparseIterate x;
  double t = 0.0;
};

// Extreme point of C: (M, +-M e_index), or the apex (0, 0).
struct LiftedAtom {
  double t = 0.0;
  int index = -1;         // -1 for the apex
  double coefficient = 0.0;
};

struct AtomChoice {
  bool zero_atom = false;
  int index = -1;
  double sign = 0.0;
};

// gamma_k = 2 / (k + 2)
double step_size_schedule(long k);

// argmax_i |eta_i| with smallest-index tie break; the apex once
// ||eta||_inf <= 1, where it minimizes the linearized objective over C.
AtomChoice select_atom(const Certificate& cert, double lift_bound);

// I_k = { j : |eta_j| >= ||eta||_inf - delta * gamma }, sorted ascending.
std::vector<int> polyatomic_indices(const Certificate& cert, double delta, double gamma);

// Closed-form minimizer over [0, 1] of
//   g(gamma) = 1/2 ||y - A((1-gamma) x + gamma s)||^2 + lambda((1-gamma) t + gamma t_s).
double exact_line_search(const LassoProblem& problem, const LiftedIterate& current,
                         const LiftedAtom& atom);

// Warm-started ISTA on the problem restricted to `active`, stopped by the
// relative-change criterion; result is embedded in dimension N with zeros off
// the active set. Never increases the objective.
SparseIterate partial_correction(const LassoProblem& problem, const SparseIterate& x_init,
                                 std::span<const int> active, double eps);

enum class SolverKind { vfw, fcfw, pfw, fista };

std::string_view solver_name(SolverKind kind);
SolverKind parse_solver_name(std::string_view name);  // throws on unknown names
std::vector<SolverKind> all_solvers();

SolveResult vfw_solve(const LassoProblem& problem, const SolverConfig& config);
SolveResult fcfw_solve(const LassoProblem& problem, const SolverConfig& config);
SolveResult pfw_solve(const LassoProblem& problem, const SolverConfig& config);
SolveResult fista_solve(const LassoProblem& problem, const SolverConfig& config);
SolveResult solve(const LassoProblem& problem, const SolverConfig& config, SolverKind kind);

// Per-iteration trace used by tests and the acceptance suite.
struct PfwIterationRecord {
  long k = 0;
  double gamma = 0.0;
  double eps_k = 0.0;
  Eigen::VectorXd certificate;       // eta_k (before the update)
  std::vector<int> selected;         // I_k
  std::vector<int> active_after;     // S_k after optional pruning
  std::vector<int> support_after;    // support(x_{k+1})
  double objective_half = 0.0;       // L(x_{k+1/2})
  double objective_corrected = 0.0;  // L(x_{k+1})
};
using PfwObserver = std::function<void(const PfwIterationRecord&)>;
SolveResult pfw_solve(const LassoProblem& problem, const SolverConfig& config,
                      const PfwObserver& observer);

// (k, l1 norm, lift variable t) after every V-FW update; test hook.
using VfwObserver = std::function<void(long, double, double)>;
SolveResult vfw_solve(const LassoProblem& problem, const SolverConfig& config,
                      const VfwObserver& observer);

// C-bar = 4 M^2 sigma_max(A)^2, an upper bound on the curvature constant of
// the lifted problem.
double curvature_upper_bound(const LassoProblem& problem);

}  // namespace polyfw
