#pragma once

// Finite-sum objectives f(x) = (1/n) sum_i f_i(x) with per-component access
// to values, gradients and Hessians, plus the smoothness constants the
// solvers need for their correction factors.

#include <cstddef>
#include <cstdint>
#include <memory>
#include <vector>

#include "iqn/matkernel.hpp"

namespace iqn {

/// mu-strong convexity, L-smoothness, Ltilde-Lipschitz Hessian and the
/// derived strong self-concordance constant M = Ltilde * mu^{-3/2}.
struct SmoothnessConstants {
  double mu = 0.0;
  double L = 0.0;
  double Ltilde = 0.0;
  double M = 0.0;
};

/// One labeled sample. Indices are 1-based and strictly increasing.
struct SparseRow {
  std::vector<std::uint32_t> indices;
  std::vector<double> values;
  int label = 0;

  friend bool operator==(const SparseRow&, const SparseRow&) = default;
};

class FiniteSumObjective {
 public:
  virtual ~FiniteSumObjective() = default;

  virtual std::size_t n() const = 0;
  virtual std::size_t d() const = 0;

  virtual double value(std::size_t i, const Vector& x) const = 0;
  virtual Vector gradient(std::size_t i, const Vector& x) const = 0;
  virtual SymMatrix hessian(std::size_t i, const Vector& x) const = 0;
  virtual Vector hessian_diag(std::size_t i, const Vector& x) const = 0;
  virtual Vector hessian_column(std::size_t i, const Vector& x,
                                std::size_t j) const = 0;

  /// grad f_i(x_new) - grad f_i(x_old).
  virtual Vector grad_difference(std::size_t i, const Vector& x_new,
                                 const Vector& x_old) const;

  virtual SmoothnessConstants estimate_constants() const = 0;

  /// sum_i grad f_i(x).
  Vector full_gradient_sum(const Vector& x) const;
  /// (1/n) sum_i f_i(x).
  double average_value(const Vector& x) const;
  /// (1/n) || sum_i grad f_i(x) ||, the stopping statistic.
  double gradient_norm(const Vector& x) const;
};

/// Diagonal quadratic components f_i(x) = 1/2 <x, A_i x> + <b_i, x>.
struct QuadraticComponents {
  std::vector<Vector> a_diag;
  std::vector<Vector> b;
};

class QuadraticObjective final : public FiniteSumObjective {
 public:
  explicit QuadraticObjective(QuadraticComponents components);

  std::size_t n() const override { return comps_.a_diag.size(); }
  std::size_t d() const override { return dim_; }

  double value(std::size_t i, const Vector& x) const override;
  Vector gradient(std::size_t i, const Vector& x) const override;
  SymMatrix hessian(std::size_t i, const Vector& x) const override;
  Vector hessian_diag(std::size_t i, const Vector& x) const override;
  Vector hessian_column(std::size_t i, const Vector& x,
                        std::size_t j) const override;
  Vector grad_difference(std::size_t i, const Vector& x_new,
                         const Vector& x_old) const override;
  SmoothnessConstants estimate_constants() const override;

  /// Closed-form minimizer -(sum A_i)^{-1} sum b_i.
  Vector minimizer() const;

  const QuadraticComponents& components() const { return comps_; }

 private:
  QuadraticComponents comps_;
  std::size_t dim_ = 0;
};

/// Regularized logistic regression. Every component carries the full
/// (lambda / 2) ||x||^p term so that the component average reproduces
///   (1/N) sum_i loss_i(x) + (lambda / 2) ||x||^p.
struct LogisticProblem {
  std::vector<SparseRow> rows;
  std::size_t dim = 0;
  double lambda = 0.0;
  double p = 2.1;
  /// Outer radius R of the ball on which the constants are certified.
  /// mu and Ltilde are taken on the shell R / 100 <= ||x|| <= R since the
  /// ||x||^p curvature vanishes at the origin.
  double radius = 1.0;
};

class LogisticObjective final : public FiniteSumObjective {
 public:
  explicit LogisticObjective(LogisticProblem problem);

  std::size_t n() const override { return prob_.rows.size(); }
  std::size_t d() const override { return prob_.dim; }

  double value(std::size_t i, const Vector& x) const override;
  Vector gradient(std::size_t i, const Vector& x) const override;
  SymMatrix hessian(std::size_t i, const Vector& x) const override;
  Vector hessian_diag(std::size_t i, const Vector& x) const override;
  Vector hessian_column(std::size_t i, const Vector& x,
                        std::size_t j) const override;
  SmoothnessConstants estimate_constants() const override;

  const LogisticProblem& problem() const { return prob_; }
  double inner_radius() const { return prob_.radius / 100.0; }

 private:
  double margin(std::size_t i, const Vector& x) const;
  Vector dense_row(std::size_t i) const;

  LogisticProblem prob_;
};

/// Below this norm the ||x||^p derivatives are returned as exact zeros.
inline constexpr double kRegularizerOriginGuard = 1e-14;

}  // namespace iqn
