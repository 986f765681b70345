#include "polyfw/solvers.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <optional>
#include <stdexcept>
#include <string>

namespace polyfw {

namespace {

[[noreturn]] void contract_violation(const std::string& what) {
  throw std::invalid_argument(what);
}

double sign_of(double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); }

// Shared solve-loop bookkeeping: termination checks at the top of each
// iteration plus trajectory sampling. Wall time covers solver-owned work
// only; callers start the clock on entry.
struct InstrumentedLoop {
  explicit InstrumentedLoop(const SolverConfig& c) : config(c) {}

  const SolverConfig& config;
  Trajectory trajectory;
  long completed = 0;  // update steps done so far
  std::chrono::steady_clock::time_point t0 = std::chrono::steady_clock::now();

  double elapsed() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  }

  // Returns the terminal reason when the solve is over. Records the regular
  // sample when due and, on termination, a final sample labelled with the
  // iteration at which termination was detected (completed + 1).
  std::optional<TerminalReason> gate(double linf, double obj, long supp) {
    const double now = elapsed();
    std::optional<TerminalReason> reason;
    if (linf <= 1.0 + config.kkt_tol)
      reason = TerminalReason::kkt_converged;
    else if (now >= config.time_budget_s)
      reason = TerminalReason::budget_exhausted;
    else if (completed >= config.max_iter)
      reason = TerminalReason::max_iter;

    if (completed % config.record_every == 0)
      trajectory.samples.push_back({completed, now, obj, supp, linf});
    if (reason) {
      trajectory.samples.push_back({completed + 1, now, obj, supp, linf});
      trajectory.terminal_reason = *reason;
    }
    return reason;
  }

  void force_terminal(TerminalReason reason, double linf, double obj, long supp) {
    trajectory.samples.push_back({completed + 1, elapsed(), obj, supp, linf});
    trajectory.terminal_reason = reason;
  }
};

// Workspace for the restricted problem min 1/2 ||y - A_S u||^2 + lambda ||u||_1.
// Rebuilt whenever the active set changes; the power-iteration start vector is
// carried across rebuilds so the spectral estimate stays cheap.
class RestrictedCorrector {
 public:
  explicit RestrictedCorrector(const LassoProblem& problem) : problem_(problem) {}

  void set_active(const std::vector<int>& active, const SparseIterate& x) {
    const Eigen::Index l = problem_.rows();
    const Eigen::Index s = static_cast<Eigen::Index>(active.size());
    Eigen::MatrixXd a_s(l, s);
    Eigen::VectorXd u(s);
    Eigen::VectorXd warm(s);
    const double fill = warm_sv_.size() > 0 ? warm_sv_.cwiseAbs().mean() : 1.0;
    std::size_t old_pos = 0;
    for (Eigen::Index j = 0; j < s; ++j) {
      const int idx = active[static_cast<std::size_t>(j)];
      a_s.col(j) = problem_.matrix().entries().col(idx);
      u[j] = x.coeff(idx);
      while (old_pos < active_.size() && active_[old_pos] < idx) ++old_pos;
      warm[j] = (old_pos < active_.size() && active_[old_pos] == idx)
                    ? warm_sv_[static_cast<Eigen::Index>(old_pos)]
                    : fill;
    }
    active_ = active;
    a_s_.swap(a_s);
    u_.swap(u);
    warm_sv_.swap(warm);
    refresh_residual();
  }

  double objective() const {
    double l1 = 0.0;
    for (Eigen::Index j = 0; j < u_.size(); ++j) l1 += std::abs(u_[j]);
    return 0.5 * residual_.squaredNorm() + problem_.lambda() * l1;
  }

  long run_ista(double eps, long max_inner) {
    if (active_.empty()) return 0;
    const double sig2 = spectral_norm_sq(a_s_, 1e-4, 1000, &warm_sv_);
    if (sig2 == 0.0) {
      u_.setZero();
      refresh_residual();
      return 0;
    }
    const double tau = 1.0 / (kStepInflation * sig2);
    const double thresh = tau * problem_.lambda();
    long steps = 0;
    Eigen::VectorXd grad(u_.size()), next(u_.size());
    while (true) {
      const double prev_norm = u_.norm();
      grad.noalias() = a_s_.transpose() * (a_s_ * u_ - problem_.y());
      next = soft_threshold(Eigen::VectorXd(u_ - tau * grad), thresh);
      const double change = (next - u_).norm();
      u_.swap(next);
      ++steps;
      const double limit = prev_norm > 0.0 ? eps * prev_norm : eps;
      if (change <= limit || steps >= max_inner) break;
    }
    refresh_residual();
    return steps;
  }

  SparseIterate iterate() const {
    std::vector<double> weights(u_.data(), u_.data() + u_.size());
    return SparseIterate(problem_.cols(), active_, std::move(weights));
  }

  const Eigen::VectorXd& residual() const { return residual_; }  // A_S u - y
  const std::vector<int>& active() const { return active_; }

 private:
  void refresh_residual() { residual_ = a_s_ * u_ - problem_.y(); }

  const LassoProblem& problem_;
  std::vector<int> active_;
  Eigen::MatrixXd a_s_;
  Eigen::VectorXd u_;
  Eigen::VectorXd residual_;
  Eigen::VectorXd warm_sv_;
};

}  // namespace

void SolverConfig::validate() const {
  if (delta < 0.0) contract_violation("SolverConfig: delta must be >= 0");
  if (!(eps0 > 0.0)) contract_violation("SolverConfig: eps0 must be > 0");
  if (max_iter < 1) contract_violation("SolverConfig: max_iter must be >= 1");
  if (!(time_budget_s > 0.0)) contract_violation("SolverConfig: time_budget_s must be > 0");
  if (!(kkt_tol > 0.0)) contract_violation("SolverConfig: kkt_tol must be > 0");
  if (record_every < 1) contract_violation("SolverConfig: record_every must be >= 1");
  if (!(eps_full > 0.0)) contract_violation("SolverConfig: eps_full must be > 0");
  if (correction_max_inner < 1)
    contract_violation("SolverConfig: correction_max_inner must be >= 1");
}

std::string_view to_string(TerminalReason reason) {
  switch (reason) {
    case TerminalReason::kkt_converged: return "kkt-converged";
    case TerminalReason::budget_exhausted: return "budget-exhausted";
    case TerminalReason::max_iter: return "max-iter";
  }
  return "unknown";
}

std::string_view solver_name(SolverKind kind) {
  switch (kind) {
    case SolverKind::vfw: return "vfw";
    case SolverKind::fcfw: return "fcfw";
    case SolverKind::pfw: return "pfw";
    case SolverKind::fista: return "fista";
  }
  return "unknown";
}

SolverKind parse_solver_name(std::string_view name) {
  if (name == "vfw") return SolverKind::vfw;
  if (name == "fcfw") return SolverKind::fcfw;
  if (name == "pfw") return SolverKind::pfw;
  if (name == "fista") return SolverKind::fista;
  throw std::invalid_argument("unknown solver '" + std::string(name) +
                              "', valid names: vfw, fcfw, pfw, fista");
}

std::vector<SolverKind> all_solvers() {
  return {SolverKind::vfw, SolverKind::fcfw, SolverKind::pfw, SolverKind::fista};
}

double step_size_schedule(long k) {
  if (k < 1) contract_violation("step_size_schedule: k must be >= 1");
  return 2.0 / static_cast<double>(k + 2);
}

AtomChoice select_atom(const Certificate& cert, double /*lift_bound*/) {
  if (cert.values.size() < 1) contract_violation("select_atom: empty certificate");
  // The apex (0, 0) minimizes the linearized objective once no signed atom
  // has |eta_i| > 1: the atom value is lambda M (1 - |eta_i|) vs 0 at the apex.
  if (cert.linf <= 1.0) return {true, -1, 0.0};
  Eigen::Index best = 0;
  double best_abs = -1.0;
  for (Eigen::Index i = 0; i < cert.values.size(); ++i) {
    const double a = std::abs(cert.values[i]);
    if (a > best_abs) {
      best_abs = a;
      best = i;
    }
  }
  return {false, static_cast<int>(best), cert.values[best] > 0.0 ? 1.0 : -1.0};
}

std::vector<int> polyatomic_indices(const Certificate& cert, double delta, double gamma) {
  if (delta < 0.0) contract_violation("polyatomic_indices: delta must be >= 0");
  if (!(gamma > 0.0) || gamma > 1.0)
    contract_violation("polyatomic_indices: gamma must be in (0, 1]");
  if (cert.values.size() < 1) contract_violation("polyatomic_indices: empty certificate");
  const double threshold = cert.linf - delta * gamma;
  std::vector<int> out;
  for (Eigen::Index i = 0; i < cert.values.size(); ++i)
    if (std::abs(cert.values[i]) >= threshold) out.push_back(static_cast<int>(i));
  return out;
}

double exact_line_search(const LassoProblem& problem, const LiftedIterate& current,
                         const LiftedAtom& atom) {
  if (atom.index >= problem.cols())
    contract_violation("exact_line_search: atom index out of range");
  const Eigen::VectorXd ax = problem.matrix().apply(current.x);
  Eigen::VectorXd ad;
  if (atom.index < 0) {
    ad = -ax;  // apex
  } else {
    ad = atom.coefficient * problem.matrix().entries().col(atom.index) - ax;
  }
  const Eigen::VectorXd r = problem.y() - ax;
  const double num = ad.dot(r) - problem.lambda() * (atom.t - current.t);
  const double den = ad.squaredNorm();
  if (den <= 0.0) return 0.0;
  return std::clamp(num / den, 0.0, 1.0);
}

SparseIterate partial_correction(const LassoProblem& problem, const SparseIterate& x_init,
                                 std::span<const int> active, double eps) {
  if (!(eps > 0.0)) contract_violation("partial_correction: eps must be > 0");
  if (x_init.dimension() != problem.cols())
    contract_violation("partial_correction: iterate dimension mismatch");
  if (active.empty()) return SparseIterate::zero(problem.cols());

  std::vector<int> sorted(active.begin(), active.end());
  std::sort(sorted.begin(), sorted.end());
  sorted.erase(std::unique(sorted.begin(), sorted.end()), sorted.end());
  if (sorted.front() < 0 || sorted.back() >= problem.cols())
    contract_violation("partial_correction: active index out of range");
  for (int idx : x_init.support())
    if (!std::binary_search(sorted.begin(), sorted.end(), idx))
      contract_violation("partial_correction: support(x_init) not contained in active set");

  RestrictedCorrector corrector(problem);
  corrector.set_active(sorted, x_init);
  corrector.run_ista(eps, 10'000'000);
  return corrector.iterate();
}

namespace {

SolveResult pfw_solve_impl(const LassoProblem& problem, const SolverConfig& config,
                           const PfwObserver* observer) {
  config.validate();
  const Eigen::Index n = problem.cols();
  const double m_lift = problem.lift_bound();
  SparseIterate x = SparseIterate::zero(n);
  std::vector<int> active;
  RestrictedCorrector corrector(problem);
  InstrumentedLoop loop(config);
  Eigen::VectorXd residual = problem.y();  // y - A x
  double l1 = 0.0;

  while (true) {
    Certificate cert(problem.matrix().adjoint(residual) / problem.lambda());
    const double obj = 0.5 * residual.squaredNorm() + problem.lambda() * l1;
    if (loop.gate(cert.linf, obj, x.nnz())) break;

    const long k = loop.completed + 1;
    const double gamma = step_size_schedule(k);
    std::vector<int> selected = polyatomic_indices(cert, config.delta, gamma);
    std::vector<int> merged;
    merged.reserve(active.size() + selected.size());
    std::set_union(active.begin(), active.end(), selected.begin(), selected.end(),
                   std::back_inserter(merged));
    active.swap(merged);
    const double eps_k = config.eps0 * gamma;

    // x_{k+1/2} = (1 - gamma) x_k + gamma s_k with
    // s_k = (M / |I_k|) sum_{i in I_k} sgn(eta_i) e_i
    const double atom_weight = gamma * m_lift / static_cast<double>(selected.size());
    std::vector<double> half_weights(active.size());
    std::size_t si = 0;
    for (std::size_t j = 0; j < active.size(); ++j) {
      const int idx = active[j];
      double w = (1.0 - gamma) * x.coeff(idx);
      while (si < selected.size() && selected[si] < idx) ++si;
      if (si < selected.size() && selected[si] == idx)
        w += sign_of(cert.values[idx]) * atom_weight;
      half_weights[j] = w;
    }
    SparseIterate x_half(n, active, std::move(half_weights));

    corrector.set_active(active, x_half);
    const double obj_half = corrector.objective();
    corrector.run_ista(eps_k, config.correction_max_inner);
    x = corrector.iterate();
    residual = -corrector.residual();
    l1 = x.l1_norm();
    if (config.prune_zero_weights) active = x.support();

    if (observer != nullptr) {
      PfwIterationRecord rec;
      rec.k = k;
      rec.gamma = gamma;
      rec.eps_k = eps_k;
      rec.certificate = cert.values;
      rec.selected = std::move(selected);
      rec.active_after = active;
      rec.support_after = x.support();
      rec.objective_half = obj_half;
      rec.objective_corrected = corrector.objective();
      (*observer)(rec);
    }
    ++loop.completed;
  }
  return {std::move(x), std::move(loop.trajectory), loop.completed};
}

SolveResult vfw_solve_impl(const LassoProblem& problem, const SolverConfig& config,
                           const VfwObserver* observer) {
  config.validate();
  const Eigen::Index n = problem.cols();
  const double m_lift = problem.lift_bound();
  Eigen::VectorXd x = Eigen::VectorXd::Zero(n);
  std::vector<int> touched;
  std::vector<char> is_touched(static_cast<std::size_t>(n), 0);
  double t = 0.0;
  double l1 = 0.0;
  Eigen::VectorXd ax = Eigen::VectorXd::Zero(problem.rows());
  Eigen::VectorXd r = problem.y();  // y - A x
  InstrumentedLoop loop(config);

  while (true) {
    Certificate cert(problem.matrix().adjoint(r) / problem.lambda());
    const double obj = 0.5 * r.squaredNorm() + problem.lambda() * l1;
    long supp = 0;
    for (int idx : touched)
      if (x[idx] != 0.0) ++supp;
    if (loop.gate(cert.linf, obj, supp)) break;

    const AtomChoice atom = select_atom(cert, m_lift);
    double atom_t = 0.0;
    double coeff = 0.0;
    Eigen::VectorXd ad;
    if (atom.zero_atom) {
      ad = -ax;
    } else {
      atom_t = m_lift;
      coeff = atom.sign * m_lift;
      ad = coeff * problem.matrix().entries().col(atom.index) - ax;
    }
    const double num = ad.dot(r) - problem.lambda() * (atom_t - t);
    const double den = ad.squaredNorm();
    const double gamma = den > 0.0 ? std::clamp(num / den, 0.0, 1.0) : 0.0;

    const double keep = 1.0 - gamma;
    for (int idx : touched) x[idx] *= keep;
    ax *= keep;
    if (!atom.zero_atom) {
      if (is_touched[static_cast<std::size_t>(atom.index)] == 0) {
        is_touched[static_cast<std::size_t>(atom.index)] = 1;
        touched.push_back(atom.index);
      }
      x[atom.index] += gamma * coeff;
      ax.noalias() += gamma * coeff * problem.matrix().entries().col(atom.index);
    }
    t = keep * t + gamma * atom_t;
    ++loop.completed;
    if (loop.completed % 65536 == 0) ax.noalias() = problem.matrix().entries() * x;
    r = problem.y() - ax;
    l1 = 0.0;
    for (int idx : touched) l1 += std::abs(x[idx]);
    if (observer != nullptr) (*observer)(loop.completed, l1, t);
  }
  return {SparseIterate::from_dense(x), std::move(loop.trajectory), loop.completed};
}

}  // namespace

SolveResult pfw_solve(const LassoProblem& problem, const SolverConfig& config) {
  return pfw_solve_impl(problem, config, nullptr);
}

SolveResult pfw_solve(const LassoProblem& problem, const SolverConfig& config,
                      const PfwObserver& observer) {
  return pfw_solve_impl(problem, config, &observer);
}

SolveResult vfw_solve(const LassoProblem& problem, const SolverConfig& config) {
  return vfw_solve_impl(problem, config, nullptr);
}

SolveResult vfw_solve(const LassoProblem& problem, const SolverConfig& config,
                      const VfwObserver& observer) {
  return vfw_solve_impl(problem, config, &observer);
}

SolveResult fcfw_solve(const LassoProblem& problem, const SolverConfig& config) {
  config.validate();
  const double m_lift = problem.lift_bound();
  SparseIterate x = SparseIterate::zero(problem.cols());
  std::vector<int> active;
  RestrictedCorrector corrector(problem);
  InstrumentedLoop loop(config);
  Eigen::VectorXd residual = problem.y();
  double l1 = 0.0;

  while (true) {
    Certificate cert(problem.matrix().adjoint(residual) / problem.lambda());
    const double obj = 0.5 * residual.squaredNorm() + problem.lambda() * l1;
    if (loop.gate(cert.linf, obj, x.nnz())) break;

    const AtomChoice atom = select_atom(cert, m_lift);
    if (atom.zero_atom) {
      // unreachable while kkt_tol > 0; the gate above fires first
      loop.force_terminal(TerminalReason::kkt_converged, cert.linf, obj, x.nnz());
      break;
    }
    auto pos = std::lower_bound(active.begin(), active.end(), atom.index);
    if (pos == active.end() || *pos != atom.index) active.insert(pos, atom.index);

    corrector.set_active(active, x);
    corrector.run_ista(config.eps_full, config.correction_max_inner);
    x = corrector.iterate();
    residual = -corrector.residual();
    l1 = x.l1_norm();
    if (config.prune_zero_weights) active = x.support();
    ++loop.completed;
  }
  return {std::move(x), std::move(loop.trajectory), loop.completed};
}

SolveResult fista_solve(const LassoProblem& problem, const SolverConfig& config) {
  config.validate();
  const Eigen::Index n = problem.cols();
  const double sig2 = problem.spectral_norm_sq();
  const double tau = sig2 > 0.0 ? 1.0 / (kStepInflation * sig2) : 1.0;
  const double thresh = tau * problem.lambda();
  Eigen::VectorXd x = Eigen::VectorXd::Zero(n);
  Eigen::VectorXd x_prev = Eigen::VectorXd::Zero(n);
  Eigen::VectorXd ax = Eigen::VectorXd::Zero(problem.rows());
  Eigen::VectorXd r = ax - problem.y();            // A x - y
  Eigen::VectorXd g = problem.matrix().adjoint(r); // gradient at x
  Eigen::VectorXd g_prev = g;
  double momentum = 1.0;
  InstrumentedLoop loop(config);

  while (true) {
    const double linf = g.lpNorm<Eigen::Infinity>() / problem.lambda();
    const double obj = 0.5 * r.squaredNorm() + problem.lambda() * x.lpNorm<1>();
    const long supp = static_cast<long>((x.array() != 0.0).count());
    if (loop.gate(linf, obj, supp)) break;

    // m_{k+1} = (1 + sqrt(1 + 4 m_k^2)) / 2, z = x + beta (x - x_prev);
    // the gradient at z is the same combination of the cached gradients.
    const double m_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * momentum * momentum));
    const double beta = (momentum - 1.0) / m_next;
    Eigen::VectorXd v = (1.0 + beta) * x - beta * x_prev -
                        tau * ((1.0 + beta) * g - beta * g_prev);
    Eigen::VectorXd x_next = soft_threshold(v, thresh);
    x_prev.swap(x);
    x.swap(x_next);
    g_prev.swap(g);
    ax.noalias() = problem.matrix().entries() * x;
    r = ax - problem.y();
    g.noalias() = problem.matrix().entries().transpose() * r;
    momentum = m_next;
    ++loop.completed;
  }
  return {SparseIterate::from_dense(x), std::move(loop.trajectory), loop.completed};
}

SolveResult solve(const LassoProblem& problem, const SolverConfig& config, SolverKind kind) {
  switch (kind) {
    case SolverKind::vfw: return vfw_solve(problem, config);
    case SolverKind::fcfw: return fcfw_solve(problem, config);
    case SolverKind::pfw: return pfw_solve(problem, config);
    case SolverKind::fista: return fista_solve(problem, config);
  }
  contract_violation("solve: invalid solver kind");
}

double curvature_upper_bound(const LassoProblem& problem) {
  if (problem.y().isZero(0.0))
    contract_violation("curvature_upper_bound: y must be nonzero");
  const double m_lift = problem.lift_bound();
  return 4.0 * m_lift * m_lift * problem.spectral_norm_sq();
}

}  // namespace polyfw
