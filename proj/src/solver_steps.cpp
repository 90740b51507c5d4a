#include <cmath>
#include <string>

#include "iqn/solvers.hpp"

namespace iqn {

namespace {

// The operators are undefined at u = 0; steps this short skip the classic
// stage.
bool tiny_step(const Vector& s, const Vector& z_old) {
  return s.norm() <= 1e-15 * (1.0 + z_old.norm());
}

struct Touch {
  std::size_t i = 0;
  Vector x;
  Vector s;
  Vector grad_new;
  Vector y;  // grad f_i(x) - grad f_i(z_old), unscaled
};

// Common prologue: form x^t from the aggregates and evaluate the touched
// component at it.
Touch begin_step(SolverState& st) {
  const long t = st.agg.t + 1;
  Touch tc;
  tc.i = index_of(t, st.agg.n) - 1;
  tc.x = st.agg.H * (st.agg.phi - st.agg.g);
  const ComponentState& c = st.components[tc.i];
  tc.s = tc.x - c.z;
  tc.grad_new = st.objective->gradient(tc.i, tc.x);
  tc.y = st.objective->grad_difference(tc.i, tc.x, c.z);
  st.last = StepDiagnostics{};
  st.last.index = tc.i;
  return tc;
}

void finish_tuple(SolverState& st, const Touch& tc, SymMatrix d_new) {
  ComponentState& c = st.components[tc.i];
  st.agg.g += tc.grad_new - c.grad;
  c.z = tc.x;
  c.grad = tc.grad_new;
  c.D = std::move(d_new);
  st.x = tc.x;
}

// Greedy BFGS step of `q` toward the Hessian of component i at x.
struct GreedyStage {
  std::size_t j = 0;
  Vector hcol;    // hess f_i(x) e_j
  double uhu = 0; // <e_j, hess f_i(x) e_j>
  Vector qu;      // Q e_j
  double uqu = 0; // <e_j, Q e_j>
};

GreedyStage greedy_stage(const SolverState& st, std::size_t i, const Vector& x,
                         const SymMatrix& q) {
  GreedyStage g;
  const Vector hdiag = st.objective->hessian_diag(i, x);
  g.j = greedy_vector(q.diag(), hdiag);
  g.hcol = st.objective->hessian_column(i, x, g.j);
  g.uhu = g.hcol(static_cast<Eigen::Index>(g.j));
  g.qu = q.matrix().col(static_cast<Eigen::Index>(g.j));
  g.uqu = q(g.j, g.j);
  return g;
}

Vector basis(std::size_t d, std::size_t j) {
  Vector e = Vector::Zero(static_cast<Eigen::Index>(d));
  e(static_cast<Eigen::Index>(j)) = 1.0;
  return e;
}

// beta_t = (M / 2) ||s||_{z_old}.
double beta_factor(const SolverState& st, std::size_t i, const Vector& z_old,
                   const Vector& s) {
  const double m = st.config.beta_scale * st.constants.M;
  if (m == 0.0) return 0.0;
  const SymMatrix h = st.objective->hessian(i, z_old);
  const double q = s.dot(h * s);
  return 0.5 * m * std::sqrt(std::max(q, 0.0));
}

// Applies a correction chain to H; on a singular intermediate the aggregates
// are rebuilt directly from the (already updated) tuples.
void apply_chain_or_refresh(SolverState& st,
                            const std::vector<RankOneCorrection>& terms,
                            double inv_scale) {
  try {
    SymMatrix h = sm_inverse_chain(st.agg.H, terms);
    if (inv_scale != 1.0) h *= inv_scale;
    st.agg.H = std::move(h);
  } catch (const Error& e) {
    if (e.code() != ErrorCode::kSingularUpdate) throw;
    st.last.chain_fallback = true;
    refresh_aggregates(st);
  }
}

// Classic stage shared by the lazy methods. Returns the post-classic matrix
// and appends its inverse-chain terms.
SymMatrix lazy_classic_stage(SolverState& st, const Touch& tc,
                             const SymMatrix& d_old, double tau, double alpha,
                             std::vector<RankOneCorrection>& terms,
                             bool broyden) {
  const ComponentState& c = st.components[tc.i];
  if (tiny_step(tc.s, c.z)) {
    st.last.classic_skipped = true;
    return d_old;
  }
  const Vector y = (1.0 + alpha) * tc.y;
  const double sy = tc.s.dot(y);
  const Vector ds = d_old * tc.s;
  const double sds = tc.s.dot(ds);
  try {
    SymMatrix q = broyden ? broyden_update(tau, d_old, y, sy, tc.s)
                          : bfgs_update(d_old, y, sy, tc.s);
    if (broyden) {
      auto more = broyden_correction(tau, ds, sds, y, sy);
      terms.insert(terms.end(), more.begin(), more.end());
    } else {
      terms.push_back({y, y, 1.0 / sy});
      terms.push_back({ds, ds, -1.0 / sds});
    }
    return q;
  } catch (const Error& e) {
    if (e.code() != ErrorCode::kDegenerateDirection) throw;
    st.last.classic_skipped = true;
    return d_old;
  }
}

Vector lazy_step(SolverState& st, bool broyden) {
  const long t = st.agg.t + 1;
  const long n = static_cast<long>(st.agg.n);
  Touch tc = begin_step(st);
  ComponentState& c = st.components[tc.i];

  // Bring D_{i_t} current with the end-of-epoch scalings it has missed.
  const long completed = (t - 1) / n;
  if (completed - c.lazy_scale_epoch > 1) {
    throw Error(ErrorCode::kLazyInconsistency,
                "component " + std::to_string(tc.i) + " owes " +
                    std::to_string(completed - c.lazy_scale_epoch) + " scalings");
  }
  const double owed = pending_scale(c.lazy_scale_epoch, completed, st.config.alpha);
  if (owed != 1.0) c.D *= owed;
  c.lazy_scale_epoch = completed;
  const SymMatrix d_old = c.D;

  const double alpha = st.config.alpha.alpha(completed);
  std::vector<RankOneCorrection> terms;
  SymMatrix q = lazy_classic_stage(st, tc, d_old, st.config.tau1, alpha, terms, broyden);

  const GreedyStage g = greedy_stage(st, tc.i, tc.x, q);
  const Vector e = basis(q.dim(), g.j);
  SymMatrix d_new = broyden ? broyden_update(st.config.tau2, q, g.hcol, g.uhu, e)
                            : bfgs_update(q, g.hcol, g.uhu, e);
  if (broyden) {
    auto more = broyden_correction(st.config.tau2, g.qu, g.uqu, g.hcol, g.uhu);
    terms.insert(terms.end(), more.begin(), more.end());
  } else {
    terms.push_back({g.qu, g.qu, -1.0 / g.uqu});
    terms.push_back({g.hcol, g.hcol, 1.0 / g.uhu});
  }
  const double w = omega(t, st.agg.n, st.config.alpha);
  if (w != 1.0) d_new *= w;

  st.last.omega = w;
  st.last.greedy_index = g.j;
  st.last.greedy_input = q;
  st.last.q = std::move(q);

  // phi^t = omega (phi - D_old z_old) + D_new z_new
  Vector phi = st.agg.phi - d_old * c.z;
  if (w != 1.0) phi *= w;
  phi += d_new * tc.x;
  st.agg.phi = std::move(phi);

  finish_tuple(st, tc, std::move(d_new));
  c.lazy_scale_epoch = t / n;
  st.agg.t = t;
  apply_chain_or_refresh(st, terms, 1.0 / w);
  return st.x;
}

// Tuple update followed by direct recomputation of the aggregates.
void commit_direct(SolverState& st, const Touch& tc, SymMatrix d_new) {
  finish_tuple(st, tc, std::move(d_new));
  st.agg.t += 1;
  refresh_aggregates(st);
}

}  // namespace

Vector iqn_step(SolverState& st) {
  Touch tc = begin_step(st);
  ComponentState& c = st.components[tc.i];
  const SymMatrix& d_old = c.D;
  std::vector<RankOneCorrection> terms;
  SymMatrix d_new = d_old;
  if (tiny_step(tc.s, c.z)) {
    st.last.classic_skipped = true;
  } else {
    const double sy = tc.s.dot(tc.y);
    const Vector ds = d_old * tc.s;
    try {
      d_new = bfgs_update(d_old, tc.y, sy, tc.s);
      terms.push_back({tc.y, tc.y, 1.0 / sy});
      terms.push_back({ds, ds, -1.0 / tc.s.dot(ds)});
    } catch (const Error& e) {
      if (e.code() != ErrorCode::kDegenerateDirection) throw;
      st.last.classic_skipped = true;
    }
  }
  st.agg.phi += d_new * tc.x - d_old * c.z;
  finish_tuple(st, tc, std::move(d_new));
  st.agg.t += 1;
  if (!terms.empty()) apply_chain_or_refresh(st, terms, 1.0);
  return st.x;
}

Vector siqn_step(SolverState& st) {
  Touch tc = begin_step(st);
  const ComponentState& c = st.components[tc.i];
  const double beta = beta_factor(st, tc.i, c.z, tc.s);
  st.last.beta = beta;
  const SymMatrix scaled = (1.0 + beta) * (1.0 + beta) * c.D;
  SymMatrix q = scaled;
  if (tiny_step(tc.s, c.z)) {
    st.last.classic_skipped = true;
  } else {
    const Vector y = (1.0 + beta) * tc.y;
    try {
      q = bfgs_update(scaled, y, tc.s.dot(y), tc.s);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::kDegenerateDirection) throw;
      st.last.classic_skipped = true;
    }
  }
  const GreedyStage g = greedy_stage(st, tc.i, tc.x, q);
  SymMatrix d_new = bfgs_update(q, g.hcol, g.uhu, basis(q.dim(), g.j));
  st.last.greedy_index = g.j;
  st.last.greedy_input = q;
  st.last.q = std::move(q);
  commit_direct(st, tc, std::move(d_new));
  return st.x;
}

Vector sliqn_step(SolverState& st) { return lazy_step(st, false); }

Vector gsliqn_step(SolverState& st) { return lazy_step(st, true); }

Vector igs_step(SolverState& st) {
  Touch tc = begin_step(st);
  const ComponentState& c = st.components[tc.i];
  const double beta = beta_factor(st, tc.i, c.z, tc.s);
  st.last.beta = beta;
  SymMatrix scaled = (1.0 + beta) * (1.0 + beta) * c.D;
  const GreedyStage g = greedy_stage(st, tc.i, tc.x, scaled);
  SymMatrix d_new = bfgs_update(scaled, g.hcol, g.uhu, basis(scaled.dim(), g.j));
  st.last.greedy_index = g.j;
  st.last.greedy_input = std::move(scaled);
  commit_direct(st, tc, std::move(d_new));
  return st.x;
}

Vector nim_step(SolverState& st) {
  Touch tc = begin_step(st);
  ComponentState& c = st.components[tc.i];
  SymMatrix h_new = st.objective->hessian(tc.i, tc.x);
  // Sum and phi are updated incrementally; only the O(d^3) inverse is
  // recomputed from scratch.
  SymMatrix sum = *st.agg.d_sum;
  sum -= c.D;
  sum += h_new;
  st.agg.phi += h_new * tc.x - c.D * c.z;
  finish_tuple(st, tc, std::move(h_new));
  st.agg.t += 1;
  st.agg.H = spd_inverse(sum, ErrorCode::kSingularAggregate);
  st.agg.d_sum = std::move(sum);
  return st.x;
}

}  // namespace iqn
