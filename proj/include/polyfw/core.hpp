#pragma once

#include <Eigen/Core>
#include <span>
#include <vector>

namespace polyfw {

// Sparse solution vector: strictly increasing support indices plus aligned
// weights. Exact zeros are never stored; constructing with a zero weight
// silently drops that index.
class SparseIterate {
 public:
  SparseIterate() = default;
  SparseIterate(Eigen::Index dimension, std::vector<int> support,
                std::vector<double> weights);

  static SparseIterate zero(Eigen::Index dimension);
  static SparseIterate from_dense(const Eigen::VectorXd& x);

  Eigen::VectorXd to_dense() const;
  double l1_norm() const;
  double coeff(int index) const;  // 0.0 off the support

  Eigen::Index dimension() const { return dimension_; }
  Eigen::Index nnz() const { return static_cast<Eigen::Index>(support_.size()); }
  const std::vector<int>& support() const { return support_; }
  const std::vector<double>& weights() const { return weights_; }

  bool operator==(const SparseIterate& other) const = default;

 private:
  Eigen::Index dimension_ = 0;
  std::vector<int> support_;
  std::vector<double> weights_;
};

// Dense L x N sensing operator with forward/adjoint application and column
// restriction. Entries are validated to be finite on construction.
class DesignMatrix {
 public:
  DesignMatrix() = default;
  explicit DesignMatrix(Eigen::MatrixXd entries);

  Eigen::Index rows() const { return entries_.rows(); }
  Eigen::Index cols() const { return entries_.cols(); }
  const Eigen::MatrixXd& entries() const { return entries_; }

  Eigen::VectorXd apply(const Eigen::VectorXd& x) const;      // A x
  Eigen::VectorXd apply(const SparseIterate& x) const;        // active columns only
  Eigen::VectorXd adjoint(const Eigen::VectorXd& r) const;    // A^T r
  DesignMatrix restrict(std::span<const int> columns) const;

 private:
  Eigen::MatrixXd entries_;
};

// Empirical dual certificate eta with its cached sup norm.
struct Certificate {
  Eigen::VectorXd values;
  double linf = 0.0;

  Certificate() = default;
  explicit Certificate(Eigen::VectorXd v)
      : values(std::move(v)),
        linf(values.size() > 0 ? values.cwiseAbs().maxCoeff() : 0.0) {}
};

// (A, y, lambda) bundle. Derived constants (lift bound M, lambda_max and the
// squared spectral norm estimate of A) are computed once at construction;
// instances are immutable afterwards and safe to share across threads.
class LassoProblem {
 public:
  LassoProblem(DesignMatrix matrix, Eigen::VectorXd y, double lambda,
               double spectral_tol = 1e-4);

  const DesignMatrix& matrix() const { return matrix_; }
  const Eigen::VectorXd& y() const { return y_; }
  double lambda() const { return lambda_; }
  Eigen::Index rows() const { return matrix_.rows(); }
  Eigen::Index cols() const { return matrix_.cols(); }

  double lift_bound() const { return lift_bound_; }          // M = ||y||^2 / (2 lambda)
  double lambda_max() const { return lambda_max_; }          // ||A^T y||_inf
  double spectral_norm_sq() const { return spectral_sq_; }   // sigma_max(A)^2 estimate

 private:
  DesignMatrix matrix_;
  Eigen::VectorXd y_;
  double lambda_ = 0.0;
  double lift_bound_ = 0.0;
  double lambda_max_ = 0.0;
  double spectral_sq_ = 0.0;
};

// L(x) = 1/2 ||y - A x||^2 + lambda ||x||_1, evaluated through the active
// columns of A only.
double objective(const LassoProblem& problem, const SparseIterate& x);

// eta = (1/lambda) A^T (y - A x)
Certificate dual_certificate(const LassoProblem& problem, const SparseIterate& x);

double lift_bound(const LassoProblem& problem);
double lambda_max(const LassoProblem& problem);

// Power-iteration estimate of sigma_max^2. Deterministic start vector, fixed
// iteration cap (default 1000); returns 0 for an (effectively) zero matrix.
// Callers inflate the estimate before turning it into a step size.
double spectral_norm_sq(const Eigen::MatrixXd& m, double tol,
                        int max_iter = 1000, Eigen::VectorXd* warm = nullptr);
double spectral_norm_sq(const DesignMatrix& m, double tol = 1e-4);

// componentwise sgn(v) * max(0, |v| - threshold)
double soft_threshold(double v, double threshold);
Eigen::VectorXd soft_threshold(const Eigen::VectorXd& v, double threshold);

// Safety inflation applied to spectral estimates when building ISTA steps,
// so a slightly low estimate still yields a valid descent step.
inline constexpr double kStepInflation = 1.01;

}  // namespace polyfw
