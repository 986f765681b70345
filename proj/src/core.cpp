#include "polyfw/core.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "polyfw/rng.hpp"

namespace polyfw {

namespace {

[[noreturn]] void contract_violation(const std::string& what) {
  throw std::invalid_argument(what);
}

}  // namespace

SparseIterate::SparseIterate(Eigen::Index dimension, std::vector<int> support,
                             std::vector<double> weights)
    : dimension_(dimension) {
  if (dimension < 0) contract_violation("SparseIterate: negative dimension");
  if (support.size() != weights.size())
    contract_violation("SparseIterate: support/weights size mismatch");
  support_.reserve(support.size());
  weights_.reserve(weights.size());
  int prev = -1;
  for (std::size_t i = 0; i < support.size(); ++i) {
    const int idx = support[i];
    if (idx <= prev)
      contract_violation("SparseIterate: support must be strictly increasing");
    if (idx < 0 || idx >= dimension)
      contract_violation("SparseIterate: index " + std::to_string(idx) +
                         " out of range [0, " + std::to_string(dimension) + ")");
    if (!std::isfinite(weights[i]))
      contract_violation("SparseIterate: non-finite weight");
    prev = idx;
    if (weights[i] == 0.0) continue;  // exact zeros are never stored
    support_.push_back(idx);
    weights_.push_back(weights[i]);
  }
}

SparseIterate SparseIterate::zero(Eigen::Index dimension) {
  return SparseIterate(dimension, {}, {});
}

SparseIterate SparseIterate::from_dense(const Eigen::VectorXd& x) {
  std::vector<int> support;
  std::vector<double> weights;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    if (x[i] != 0.0) {
      support.push_back(static_cast<int>(i));
      weights.push_back(x[i]);
    }
  }
  return SparseIterate(x.size(), std::move(support), std::move(weights));
}

Eigen::VectorXd SparseIterate::to_dense() const {
  Eigen::VectorXd x = Eigen::VectorXd::Zero(dimension_);
  for (std::size_t i = 0; i < support_.size(); ++i) x[support_[i]] = weights_[i];
  return x;
}

double SparseIterate::l1_norm() const {
  double sum = 0.0;
  for (double w : weights_) sum += std::abs(w);
  return sum;
}

double SparseIterate::coeff(int index) const {
  auto it = std::lower_bound(support_.begin(), support_.end(), index);
  if (it == support_.end() || *it != index) return 0.0;
  return weights_[static_cast<std::size_t>(it - support_.begin())];
}

DesignMatrix::DesignMatrix(Eigen::MatrixXd entries) : entries_(std::move(entries)) {
  if (entries_.rows() <= 0 || entries_.cols() <= 0)
    contract_violation("DesignMatrix: empty matrix");
  if (!entries_.allFinite())
    contract_violation("DesignMatrix: non-finite entries");
}

Eigen::VectorXd DesignMatrix::apply(const Eigen::VectorXd& x) const {
  if (x.size() != cols())
    contract_violation("DesignMatrix::apply: x has length " +
                       std::to_string(x.size()) + ", expected " +
                       std::to_string(cols()));
  return entries_ * x;
}

Eigen::VectorXd DesignMatrix::apply(const SparseIterate& x) const {
  if (x.dimension() != cols())
    contract_violation("DesignMatrix::apply: iterate dimension " +
                       std::to_string(x.dimension()) + ", expected " +
                       std::to_string(cols()));
  Eigen::VectorXd out = Eigen::VectorXd::Zero(rows());
  const auto& support = x.support();
  const auto& weights = x.weights();
  for (std::size_t i = 0; i < support.size(); ++i)
    out.noalias() += weights[i] * entries_.col(support[i]);
  return out;
}

Eigen::VectorXd DesignMatrix::adjoint(const Eigen::VectorXd& r) const {
  if (r.size() != rows())
    contract_violation("DesignMatrix::adjoint: r has length " +
                       std::to_string(r.size()) + ", expected " +
                       std::to_string(rows()));
  return entries_.transpose() * r;
}

DesignMatrix DesignMatrix::restrict(std::span<const int> columns) const {
  if (columns.empty()) contract_violation("DesignMatrix::restrict: empty column set");
  Eigen::MatrixXd sub(rows(), static_cast<Eigen::Index>(columns.size()));
  for (std::size_t j = 0; j < columns.size(); ++j) {
    const int c = columns[j];
    if (c < 0 || c >= cols())
      contract_violation("DesignMatrix::restrict: column index out of range");
    sub.col(static_cast<Eigen::Index>(j)) = entries_.col(c);
  }
  return DesignMatrix(std::move(sub));
}

LassoProblem::LassoProblem(DesignMatrix matrix, Eigen::VectorXd y, double lambda,
                           double spectral_tol)
    : matrix_(std::move(matrix)), y_(std::move(y)), lambda_(lambda) {
  if (!(lambda_ > 0.0)) contract_violation("LassoProblem: lambda must be positive");
  if (y_.size() != matrix_.rows())
    contract_violation("LassoProblem: y has length " + std::to_string(y_.size()) +
                       ", expected " + std::to_string(matrix_.rows()));
  if (!y_.allFinite()) contract_violation("LassoProblem: non-finite y");
  lift_bound_ = y_.squaredNorm() / (2.0 * lambda_);
  lambda_max_ = matrix_.adjoint(y_).cwiseAbs().maxCoeff();
  spectral_sq_ = spectral_norm_sq(matrix_, spectral_tol);
}

double objective(const LassoProblem& problem, const SparseIterate& x) {
  if (x.dimension() != problem.cols())
    contract_violation("objective: iterate dimension mismatch");
  const Eigen::VectorXd residual = problem.y() - problem.matrix().apply(x);
  return 0.5 * residual.squaredNorm() + problem.lambda() * x.l1_norm();
}

Certificate dual_certificate(const LassoProblem& problem, const SparseIterate& x) {
  if (x.dimension() != problem.cols())
    contract_violation("dual_certificate: iterate dimension mismatch");
  const Eigen::VectorXd residual = problem.y() - problem.matrix().apply(x);
  return Certificate(problem.matrix().adjoint(residual) / problem.lambda());
}

double lift_bound(const LassoProblem& problem) { return problem.lift_bound(); }

double lambda_max(const LassoProblem& problem) { return problem.lambda_max(); }

double spectral_norm_sq(const Eigen::MatrixXd& m, double tol, int max_iter,
                        Eigen::VectorXd* warm) {
  if (!(tol > 0.0)) contract_violation("spectral_norm_sq: tol must be positive");
  const Eigen::Index n = m.cols();
  Eigen::VectorXd v;
  if (warm != nullptr && warm->size() == n && warm->norm() > 0.0) {
    v = *warm / warm->norm();
  } else {
    Rng rng(0x9d2c5680u);  // fixed seed: deterministic start
    v.resize(n);
    for (Eigen::Index i = 0; i < n; ++i) v[i] = rng.normal();
    v.normalize();
  }

  double estimate = 0.0;
  for (int it = 0; it < max_iter; ++it) {
    Eigen::VectorXd av = m * v;
    const double next = av.squaredNorm();  // Rayleigh quotient of A^T A at v
    if (next == 0.0) {
      if (it > 0) break;
      // start vector happened to be in the null space; try a second one
      Rng rng(0x71a3c6ef5ull);
      for (Eigen::Index i = 0; i < n; ++i) v[i] = rng.normal();
      v.normalize();
      if ((m * v).squaredNorm() == 0.0) return 0.0;
      continue;
    }
    Eigen::VectorXd atav = m.transpose() * av;
    const double gain = next - estimate;
    estimate = next;
    if (it > 0 && gain <= 0.05 * tol * estimate) {
      v = atav / atav.norm();
      break;
    }
    v = atav / atav.norm();
  }
  if (warm != nullptr) *warm = v;
  return estimate;
}

double spectral_norm_sq(const DesignMatrix& m, double tol) {
  return spectral_norm_sq(m.entries(), tol);
}

double soft_threshold(double v, double threshold) {
  const double mag = std::abs(v) - threshold;
  if (mag <= 0.0) return 0.0;
  return v > 0.0 ? mag : -mag;
}

Eigen::VectorXd soft_threshold(const Eigen::VectorXd& v, double threshold) {
  if (threshold < 0.0) contract_violation("soft_threshold: negative threshold");
  return v.unaryExpr([threshold](double a) { return soft_threshold(a, threshold); });
}

}  // namespace polyfw
