#include "iqn/matkernel.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace iqn {

const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kSingularUpdate: return "SingularUpdate";
    case ErrorCode::kDegenerateDirection: return "DegenerateDirection";
    case ErrorCode::kInvalidTau: return "InvalidTau";
    case ErrorCode::kNonPositiveDiagonal: return "NonPositiveDiagonal";
    case ErrorCode::kSingularA: return "SingularA";
    case ErrorCode::kSingularAggregate: return "SingularAggregate";
    case ErrorCode::kDegenerateProblem: return "DegenerateProblem";
    case ErrorCode::kLazyInconsistency: return "LazyInconsistency";
    case ErrorCode::kMalformedLine: return "MalformedLine";
    case ErrorCode::kEmptyDataset: return "EmptyDataset";
    case ErrorCode::kInvalidSpec: return "InvalidSpec";
    case ErrorCode::kInvalidConfig: return "InvalidConfig";
    case ErrorCode::kIo: return "Io";
  }
  return "Unknown";
}

SymMatrix::SymMatrix(const Matrix& m) {
  if (m.rows() != m.cols()) {
    throw Error(ErrorCode::kInvalidSpec, "SymMatrix requires a square matrix");
  }
  m_ = 0.5 * (m + m.transpose());
}

SymMatrix SymMatrix::identity(std::size_t dim, double scale) {
  SymMatrix s(dim);
  s.m_.diagonal().setConstant(scale);
  return s;
}

SymMatrix SymMatrix::diagonal(const Vector& diag) {
  SymMatrix s(static_cast<std::size_t>(diag.size()));
  s.m_.diagonal() = diag;
  return s;
}

void SymMatrix::add_outer(const Vector& w, double scale) {
  const Eigen::Index d = m_.rows();
  for (Eigen::Index j = 0; j < d; ++j) {
    const double sw = scale * w(j);
    for (Eigen::Index i = j; i < d; ++i) {
      m_(i, j) += sw * w(i);
    }
  }
  for (Eigen::Index j = 0; j < d; ++j) {
    for (Eigen::Index i = 0; i < j; ++i) m_(i, j) = m_(j, i);
  }
}

namespace {

void check_denominator(double denom, double magnitude, double tol,
                       const char* what) {
  if (!std::isfinite(denom) || std::abs(denom) < tol * std::max(1.0, magnitude)) {
    throw Error(ErrorCode::kSingularUpdate, what);
  }
}

// <u, B u> and <u, K u> must be clearly positive relative to |Bu| |u|.
void check_curvature(double ubu, const Vector& bu, double uku,
                     const Vector& ku, const Vector& u) {
  const double un = u.norm();
  if (un == 0.0) {
    throw Error(ErrorCode::kDegenerateDirection, "zero update direction");
  }
  if (!(ubu > kDegeneracyTol * bu.norm() * un)) {
    throw Error(ErrorCode::kDegenerateDirection,
                "<u, B u> = " + std::to_string(ubu) + " is not positive");
  }
  if (!(uku > kDegeneracyTol * ku.norm() * un)) {
    throw Error(ErrorCode::kDegenerateDirection,
                "<u, K u> = " + std::to_string(uku) + " is not positive");
  }
}

}  // namespace

Matrix sm_inverse_update(const Matrix& a_inv, const Vector& u, const Vector& v,
                         double tol) {
  const Vector ainv_u = a_inv * u;
  const Vector vt_ainv = a_inv.transpose() * v;
  const double inner = v.dot(ainv_u);
  const double denom = 1.0 + inner;
  check_denominator(denom, std::abs(inner), tol,
                    "rank-one update makes the matrix singular");
  Matrix out = a_inv;
  out.noalias() -= (ainv_u / denom) * vt_ainv.transpose();
  return out;
}

SymMatrix sm_inverse_update(const SymMatrix& a_inv, const Vector& w,
                            double scale, double tol) {
  const Vector ainv_w = a_inv * w;
  const double inner = scale * w.dot(ainv_w);
  const double denom = 1.0 + inner;
  check_denominator(denom, std::abs(inner), tol,
                    "rank-one update makes the matrix singular");
  SymMatrix out = a_inv;
  out.add_outer(ainv_w, -scale / denom);
  return out;
}

SymMatrix sm_inverse_chain(const SymMatrix& a_inv,
                           const std::vector<RankOneCorrection>& terms,
                           double tol) {
  const bool all_symmetric =
      std::all_of(terms.begin(), terms.end(),
                  [](const RankOneCorrection& t) { return t.u == t.v; });
  if (all_symmetric) {
    SymMatrix out = a_inv;
    for (const auto& t : terms) out = sm_inverse_update(out, t.u, t.scale, tol);
    return out;
  }
  Matrix out = a_inv.matrix();
  for (const auto& t : terms) {
    out = sm_inverse_update(out, t.scale * t.u, t.v, tol);
  }
  return SymMatrix(out);
}

SymMatrix bfgs_update(const SymMatrix& b, const Vector& ku, double uku,
                      const Vector& u) {
  const Vector bu = b * u;
  const double ubu = u.dot(bu);
  check_curvature(ubu, bu, uku, ku, u);
  SymMatrix out = b;
  out.add_outer(bu, -1.0 / ubu);
  out.add_outer(ku, 1.0 / uku);
  return out;
}

SymMatrix dfp_update(const SymMatrix& b, const Vector& ku, double uku,
                     const Vector& u) {
  const Vector bu = b * u;
  const double ubu = u.dot(bu);
  check_curvature(ubu, bu, uku, ku, u);
  Matrix cross = ku * bu.transpose();
  cross += bu * ku.transpose();
  SymMatrix out(b.matrix() - cross / uku);
  out.add_outer(ku, (1.0 + ubu / uku) / uku);
  return out;
}

SymMatrix broyden_update(double tau, const SymMatrix& b, const Vector& ku,
                         double uku, const Vector& u) {
  if (!(tau >= 0.0 && tau <= 1.0)) {
    throw Error(ErrorCode::kInvalidTau,
                "tau = " + std::to_string(tau) + " outside [0, 1]");
  }
  if (tau == 0.0) return bfgs_update(b, ku, uku, u);
  if (tau == 1.0) return dfp_update(b, ku, uku, u);
  const SymMatrix dfp = dfp_update(b, ku, uku, u);
  const SymMatrix bfgs = bfgs_update(b, ku, uku, u);
  return SymMatrix(tau * dfp.matrix() + (1.0 - tau) * bfgs.matrix());
}

std::vector<RankOneCorrection> broyden_correction(double tau, const Vector& bu,
                                                  double ubu,
                                                  const Vector& ku,
                                                  double uku) {
  if (!(tau >= 0.0 && tau <= 1.0)) {
    throw Error(ErrorCode::kInvalidTau,
                "tau = " + std::to_string(tau) + " outside [0, 1]");
  }
  std::vector<RankOneCorrection> terms;
  terms.push_back({ku, ku, (tau * (1.0 + ubu / uku) + (1.0 - tau)) / uku});
  if (tau < 1.0) terms.push_back({bu, bu, -(1.0 - tau) / ubu});
  if (tau > 0.0) {
    terms.push_back({ku, bu, -tau / uku});
    terms.push_back({bu, ku, -tau / uku});
  }
  return terms;
}

std::size_t greedy_vector(const Vector& q_diag, const Vector& h_diag,
                          double tol) {
  if (q_diag.size() != h_diag.size() || q_diag.size() == 0) {
    throw Error(ErrorCode::kInvalidSpec, "greedy_vector dimension mismatch");
  }
  std::size_t best = 0;
  double best_ratio = -std::numeric_limits<double>::infinity();
  for (Eigen::Index i = 0; i < h_diag.size(); ++i) {
    if (!(h_diag(i) > tol)) {
      throw Error(ErrorCode::kNonPositiveDiagonal,
                  "h_diag[" + std::to_string(i) + "] = " +
                      std::to_string(h_diag(i)));
    }
    const double ratio = q_diag(i) / h_diag(i);
    if (ratio > best_ratio) {
      best_ratio = ratio;
      best = static_cast<std::size_t>(i);
    }
  }
  return best;
}

double sigma_metric(const SymMatrix& a, const SymMatrix& g) {
  Eigen::LLT<Matrix> llt(a.matrix());
  if (llt.info() != Eigen::Success) {
    throw Error(ErrorCode::kSingularA, "A is not positive definite");
  }
  const Matrix ainv_g = llt.solve(g.matrix());
  return ainv_g.trace() - static_cast<double>(a.dim());
}

double min_eigenvalue(const SymMatrix& m) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(m.matrix(), Eigen::EigenvaluesOnly);
  if (es.info() != Eigen::Success) {
    throw std::runtime_error("symmetric eigensolver failed");
  }
  return es.eigenvalues()(0);
}

bool psd_dominates(const SymMatrix& g, const SymMatrix& a, double tol) {
  return min_eigenvalue(g - a) >= -tol;
}

SymMatrix spd_inverse(const SymMatrix& m, ErrorCode code) {
  Eigen::LLT<Matrix> llt(m.matrix());
  if (llt.info() != Eigen::Success) {
    throw Error(code, "matrix is not positive definite");
  }
  const auto d = static_cast<Eigen::Index>(m.dim());
  return SymMatrix(Matrix(llt.solve(Matrix::Identity(d, d))));
}

}  // namespace iqn
