#include "iqn/objectives.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <utility>

namespace iqn {

Vector FiniteSumObjective::grad_difference(std::size_t i, const Vector& x_new,
                                           const Vector& x_old) const {
  return gradient(i, x_new) - gradient(i, x_old);
}

Vector FiniteSumObjective::full_gradient_sum(const Vector& x) const {
  Vector g = Vector::Zero(static_cast<Eigen::Index>(d()));
  for (std::size_t i = 0; i < n(); ++i) g += gradient(i, x);
  return g;
}

double FiniteSumObjective::average_value(const Vector& x) const {
  double s = 0.0;
  for (std::size_t i = 0; i < n(); ++i) s += value(i, x);
  return s / static_cast<double>(n());
}

double FiniteSumObjective::gradient_norm(const Vector& x) const {
  return full_gradient_sum(x).norm() / static_cast<double>(n());
}

// ---------------------------------------------------------------------------
// Quadratic

QuadraticObjective::QuadraticObjective(QuadraticComponents components)
    : comps_(std::move(components)) {
  if (comps_.a_diag.empty() || comps_.a_diag.size() != comps_.b.size()) {
    throw Error(ErrorCode::kInvalidSpec,
                "quadratic objective needs matching non-empty A and b lists");
  }
  dim_ = static_cast<std::size_t>(comps_.a_diag.front().size());
  for (std::size_t i = 0; i < comps_.a_diag.size(); ++i) {
    if (static_cast<std::size_t>(comps_.a_diag[i].size()) != dim_ ||
        static_cast<std::size_t>(comps_.b[i].size()) != dim_) {
      throw Error(ErrorCode::kInvalidSpec, "component dimension mismatch");
    }
    if (!(comps_.a_diag[i].minCoeff() > 0.0)) {
      throw Error(ErrorCode::kInvalidSpec,
                  "A_" + std::to_string(i) + " is not positive definite");
    }
  }
}

double QuadraticObjective::value(std::size_t i, const Vector& x) const {
  const Vector& a = comps_.a_diag[i];
  return 0.5 * x.dot(a.cwiseProduct(x)) + comps_.b[i].dot(x);
}

Vector QuadraticObjective::gradient(std::size_t i, const Vector& x) const {
  return comps_.a_diag[i].cwiseProduct(x) + comps_.b[i];
}

SymMatrix QuadraticObjective::hessian(std::size_t i, const Vector&) const {
  return SymMatrix::diagonal(comps_.a_diag[i]);
}

Vector QuadraticObjective::hessian_diag(std::size_t i, const Vector&) const {
  return comps_.a_diag[i];
}

Vector QuadraticObjective::hessian_column(std::size_t i, const Vector&,
                                          std::size_t j) const {
  Vector col = Vector::Zero(static_cast<Eigen::Index>(dim_));
  col(static_cast<Eigen::Index>(j)) = comps_.a_diag[i](static_cast<Eigen::Index>(j));
  return col;
}

Vector QuadraticObjective::grad_difference(std::size_t i, const Vector& x_new,
                                           const Vector& x_old) const {
  return comps_.a_diag[i].cwiseProduct(x_new - x_old);
}

SmoothnessConstants QuadraticObjective::estimate_constants() const {
  SmoothnessConstants c;
  c.mu = std::numeric_limits<double>::infinity();
  c.L = 0.0;
  for (const auto& a : comps_.a_diag) {
    c.mu = std::min(c.mu, a.minCoeff());
    c.L = std::max(c.L, a.maxCoeff());
  }
  if (!(c.mu > 0.0)) {
    throw Error(ErrorCode::kDegenerateProblem, "mu <= 0");
  }
  return c;
}

Vector QuadraticObjective::minimizer() const {
  Vector a_sum = Vector::Zero(static_cast<Eigen::Index>(dim_));
  Vector b_sum = Vector::Zero(static_cast<Eigen::Index>(dim_));
  for (std::size_t i = 0; i < n(); ++i) {
    a_sum += comps_.a_diag[i];
    b_sum += comps_.b[i];
  }
  return -b_sum.cwiseQuotient(a_sum);
}

// ---------------------------------------------------------------------------
// Logistic

namespace {

double softplus(double u) {
  return std::max(u, 0.0) + std::log1p(std::exp(-std::abs(u)));
}

double sigmoid(double t) {
  if (t >= 0.0) return 1.0 / (1.0 + std::exp(-t));
  const double e = std::exp(t);
  return e / (1.0 + e);
}

// Coefficients of the ||x||^p derivatives:
//   grad = c1 x,  Hess = c1 I + c2 x x^T,
//   c1 = (lambda p / 2) ||x||^{p-2},  c2 = (lambda p / 2)(p - 2) ||x||^{p-4}.
struct RegCoeffs {
  double c1 = 0.0;
  double c2 = 0.0;
};

RegCoeffs regularizer_coeffs(const LogisticProblem& prob, const Vector& x) {
  const double r = x.norm();
  if (r < kRegularizerOriginGuard) return {};
  const double half = 0.5 * prob.lambda * prob.p;
  return {half * std::pow(r, prob.p - 2.0),
          half * (prob.p - 2.0) * std::pow(r, prob.p - 4.0)};
}

}  // namespace

LogisticObjective::LogisticObjective(LogisticProblem problem)
    : prob_(std::move(problem)) {
  if (prob_.rows.empty()) {
    throw Error(ErrorCode::kEmptyDataset, "logistic problem has no samples");
  }
  if (!(prob_.lambda > 0.0)) {
    throw Error(ErrorCode::kInvalidSpec, "lambda must be positive");
  }
  if (!(prob_.p > 2.0)) {
    throw Error(ErrorCode::kInvalidSpec, "regularizer exponent must exceed 2");
  }
  if (!(prob_.radius > 0.0)) {
    throw Error(ErrorCode::kInvalidSpec, "certification radius must be positive");
  }
  for (const auto& row : prob_.rows) {
    if (!row.indices.empty() && row.indices.back() > prob_.dim) {
      throw Error(ErrorCode::kInvalidSpec, "feature index exceeds dimension");
    }
  }
}

double LogisticObjective::margin(std::size_t i, const Vector& x) const {
  const SparseRow& row = prob_.rows[i];
  double t = 0.0;
  for (std::size_t k = 0; k < row.indices.size(); ++k) {
    t += row.values[k] * x(row.indices[k] - 1);
  }
  return t;
}

Vector LogisticObjective::dense_row(std::size_t i) const {
  Vector z = Vector::Zero(static_cast<Eigen::Index>(prob_.dim));
  const SparseRow& row = prob_.rows[i];
  for (std::size_t k = 0; k < row.indices.size(); ++k) {
    z(row.indices[k] - 1) = row.values[k];
  }
  return z;
}

double LogisticObjective::value(std::size_t i, const Vector& x) const {
  const double t = margin(i, x);
  const double loss = prob_.rows[i].label == 1 ? softplus(-t) : softplus(t);
  return loss + 0.5 * prob_.lambda * std::pow(x.norm(), prob_.p);
}

Vector LogisticObjective::gradient(std::size_t i, const Vector& x) const {
  const double t = margin(i, x);
  const double resid = sigmoid(t) - prob_.rows[i].label;
  const RegCoeffs reg = regularizer_coeffs(prob_, x);
  Vector g = reg.c1 * x;
  const SparseRow& row = prob_.rows[i];
  for (std::size_t k = 0; k < row.indices.size(); ++k) {
    g(row.indices[k] - 1) += resid * row.values[k];
  }
  return g;
}

// hessian(), hessian_diag() and hessian_column() share one evaluation order
// (rank-one terms through SymMatrix::add_outer, then the diagonal) so that
// slices agree with the dense matrix bit for bit.
SymMatrix LogisticObjective::hessian(std::size_t i, const Vector& x) const {
  const double s = sigmoid(margin(i, x));
  const RegCoeffs reg = regularizer_coeffs(prob_, x);
  SymMatrix h(prob_.dim);
  h.add_outer(dense_row(i), s * (1.0 - s));
  h.add_outer(x, reg.c2);
  h += SymMatrix::identity(prob_.dim, reg.c1);
  return h;
}

Vector LogisticObjective::hessian_diag(std::size_t i, const Vector& x) const {
  const double s = sigmoid(margin(i, x));
  const double w = s * (1.0 - s);
  const RegCoeffs reg = regularizer_coeffs(prob_, x);
  const Vector z = dense_row(i);
  Vector diag(static_cast<Eigen::Index>(prob_.dim));
  for (Eigen::Index k = 0; k < diag.size(); ++k) {
    double v = 0.0;
    v += (w * z(k)) * z(k);
    v += (reg.c2 * x(k)) * x(k);
    diag(k) = v + reg.c1;
  }
  return diag;
}

Vector LogisticObjective::hessian_column(std::size_t i, const Vector& x,
                                         std::size_t j) const {
  const double s = sigmoid(margin(i, x));
  const double w = s * (1.0 - s);
  const RegCoeffs reg = regularizer_coeffs(prob_, x);
  const Vector z = dense_row(i);
  const auto jj = static_cast<Eigen::Index>(j);
  Vector col(static_cast<Eigen::Index>(prob_.dim));
  for (Eigen::Index k = 0; k < col.size(); ++k) {
    const Eigen::Index lo = std::min(k, jj);
    const Eigen::Index hi = std::max(k, jj);
    double v = 0.0;
    v += (w * z(lo)) * z(hi);
    v += (reg.c2 * x(lo)) * x(hi);
    col(k) = k == jj ? v + reg.c1 : v;
  }
  return col;
}

SmoothnessConstants LogisticObjective::estimate_constants() const {
  double max_sq = 0.0;
  for (const auto& row : prob_.rows) {
    double sq = 0.0;
    for (double v : row.values) sq += v * v;
    max_sq = std::max(max_sq, sq);
  }
  const double p = prob_.p;
  const double half = 0.5 * prob_.lambda * p;
  const double r_out = prob_.radius;
  const double r_in = inner_radius();

  SmoothnessConstants c;
  // Largest Hessian eigenvalue of the regularizer on ||x|| <= R is
  // (lambda p / 2)(p - 1) R^{p-2}; the smallest on the shell is at r_in.
  c.L = max_sq / 4.0 + half * (p - 1.0) * std::pow(r_out, p - 2.0);
  c.mu = half * std::pow(r_in, p - 2.0);
  // |sigma'''| <= 1 / (6 sqrt 3); the regularizer third derivative is
  // bounded by (lambda p / 2)(p - 2)(p + 1) ||x||^{p-3}.
  const double r_third = p < 3.0 ? r_in : r_out;
  c.Ltilde = std::pow(max_sq, 1.5) / (6.0 * std::sqrt(3.0)) +
             half * (p - 2.0) * (p + 1.0) * std::pow(r_third, p - 3.0);
  if (!(c.mu > 0.0) || !std::isfinite(c.mu)) {
    throw Error(ErrorCode::kDegenerateProblem, "logistic mu <= 0");
  }
  c.M = c.Ltilde * std::pow(c.mu, -1.5);
  return c;
}

}  // namespace iqn
