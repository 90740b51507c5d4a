#pragma once

// Dense symmetric-matrix kernels shared by every solver: the Broyden-class
// curvature updates, greedy direction selection, the sigma approximation
// metric and Sherman-Morrison inverse maintenance.
//
// The curvature operators never see the target matrix K directly. They take
// its action along the update direction, ku = K u, and the curvature
// uku = <u, K u>. Classic steps supply ku = y (a gradient difference) and
// greedy steps supply a single Hessian column.

#include <Eigen/Dense>

#include <cstddef>
#include <vector>

#include "iqn/error.hpp"

namespace iqn {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Relative tolerance for update denominators.
inline constexpr double kDegeneracyTol = 1e-12;

/// Dense symmetric d x d matrix. Construction from an arbitrary square
/// matrix symmetrizes it, so entry(i, j) == entry(j, i) always holds.
class SymMatrix {
 public:
  SymMatrix() = default;
  explicit SymMatrix(std::size_t dim) : m_(Matrix::Zero(dim, dim)) {}
  explicit SymMatrix(const Matrix& m);

  static SymMatrix identity(std::size_t dim, double scale = 1.0);
  static SymMatrix diagonal(const Vector& diag);

  std::size_t dim() const { return static_cast<std::size_t>(m_.rows()); }
  double operator()(std::size_t i, std::size_t j) const {
    return m_(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
  }

  const Matrix& matrix() const { return m_; }
  Vector diag() const { return m_.diagonal(); }
  Vector operator*(const Vector& v) const { return m_ * v; }

  SymMatrix& operator*=(double s) {
    m_ *= s;
    return *this;
  }
  SymMatrix& operator+=(const SymMatrix& o) {
    m_ += o.m_;
    return *this;
  }
  SymMatrix& operator-=(const SymMatrix& o) {
    m_ -= o.m_;
    return *this;
  }
  friend SymMatrix operator*(double s, SymMatrix a) { return a *= s; }
  friend SymMatrix operator+(SymMatrix a, const SymMatrix& b) { return a += b; }
  friend SymMatrix operator-(SymMatrix a, const SymMatrix& b) { return a -= b; }

  /// Adds scale * w w^T in place, preserving exact symmetry.
  void add_outer(const Vector& w, double scale);

  bool all_finite() const { return m_.allFinite(); }

 private:
  Matrix m_;
};

/// Additive term scale * u v^T.
struct RankOneCorrection {
  Vector u;
  Vector v;
  double scale = 1.0;
};

/// (A + u v^T)^{-1} given A^{-1}. Throws kSingularUpdate when
/// |1 + <v, A^{-1} u>| falls below tol relative to the size of its terms.
Matrix sm_inverse_update(const Matrix& a_inv, const Vector& u, const Vector& v,
                         double tol = kDegeneracyTol);

/// Symmetric specialization: (A + scale * w w^T)^{-1} given A^{-1}.
SymMatrix sm_inverse_update(const SymMatrix& a_inv, const Vector& w,
                            double scale, double tol = kDegeneracyTol);

/// Applies a chain of corrections in order, symmetrizing the final result.
SymMatrix sm_inverse_chain(const SymMatrix& a_inv,
                           const std::vector<RankOneCorrection>& terms,
                           double tol = kDegeneracyTol);

/// BFGS(B, K, u) = B - B u u^T B / <u, B u> + K u u^T K / <u, K u>.
SymMatrix bfgs_update(const SymMatrix& b, const Vector& ku, double uku,
                      const Vector& u);

/// DFP(B, K, u) = B - (K u u^T B + B u u^T K) / <u, K u>
///              + (1 + <u, B u> / <u, K u>) K u u^T K / <u, K u>.
SymMatrix dfp_update(const SymMatrix& b, const Vector& ku, double uku,
                     const Vector& u);

/// Restricted Broyden family: tau * DFP + (1 - tau) * BFGS, tau in [0, 1].
SymMatrix broyden_update(double tau, const SymMatrix& b, const Vector& ku,
                         double uku, const Vector& u);

/// Rank-one decomposition of broyden_update(tau, B, ...) - B. Terms with a
/// zero coefficient are dropped; at tau = 0 the order is K u term first, then
/// the B u term, which matches the classic BFGS inverse chain.
std::vector<RankOneCorrection> broyden_correction(double tau, const Vector& bu,
                                                  double ubu,
                                                  const Vector& ku,
                                                  double uku);

/// Index (0-based) of the standard basis vector maximizing
/// q_diag[i] / h_diag[i]. Ties resolve to the lowest index.
std::size_t greedy_vector(const Vector& q_diag, const Vector& h_diag,
                          double tol = 0.0);

/// sigma(G, A) = tr(A^{-1} G) - d. A must be positive definite.
double sigma_metric(const SymMatrix& a, const SymMatrix& g);

/// True iff lambda_min(G - A) >= -tol.
bool psd_dominates(const SymMatrix& g, const SymMatrix& a, double tol);

/// Smallest eigenvalue of a symmetric matrix.
double min_eigenvalue(const SymMatrix& m);

/// Inverse of a symmetric positive definite matrix via Cholesky.
/// Throws `code` when the factorization fails.
SymMatrix spd_inverse(const SymMatrix& m,
                      ErrorCode code = ErrorCode::kSingularAggregate);

}  // namespace iqn
