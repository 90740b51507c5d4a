#include "iqn/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "iqn/data.hpp"

namespace iqn::oracle {

AuditReport make_report(std::string name, double max_deviation, double tolerance,
                        std::string context) {
  AuditReport r;
  r.name = std::move(name);
  r.max_deviation = max_deviation;
  r.tolerance = tolerance;
  r.passed = max_deviation <= tolerance;
  r.context = std::move(context);
  return r;
}

Aggregates recompute_aggregates(const std::vector<Tuple>& tuples) {
  if (tuples.empty()) throw Error(ErrorCode::kSingularAggregate, "no tuples");
  const Eigen::Index d = tuples.front().z.size();
  Matrix sum = Matrix::Zero(d, d);
  Vector phi = Vector::Zero(d);
  Vector g = Vector::Zero(d);
  for (const auto& tp : tuples) {
    sum += tp.D.matrix();
    phi += tp.D.matrix() * tp.z;
    g += tp.grad;
  }
  Eigen::LDLT<Matrix> ldlt(sum);
  if (ldlt.info() != Eigen::Success || !(ldlt.vectorD().minCoeff() > 0.0)) {
    throw Error(ErrorCode::kSingularAggregate, "sum of curvature matrices is not PD");
  }
  return {SymMatrix(Matrix(ldlt.solve(Matrix::Identity(d, d)))), phi, g};
}

std::vector<Tuple> snapshot_tuples(const SolverState& state) {
  std::vector<Tuple> out;
  out.reserve(state.components.size());
  for (std::size_t i = 0; i < state.components.size(); ++i) {
    const auto& c = state.components[i];
    out.push_back({c.z, c.grad, current_curvature(state, i)});
  }
  return out;
}

EagerState eager_init(const SolverState& state) {
  EagerState e;
  e.objective = state.objective;
  e.method = state.config.method;
  e.alpha = state.config.alpha;
  e.tau1 = state.config.tau1;
  e.tau2 = state.config.tau2;
  e.m_const = state.config.beta_scale * state.constants.M;
  e.t = state.agg.t;
  e.tuples = snapshot_tuples(state);
  return e;
}

Vector eager_reference_step(EagerState& e) {
  const FiniteSumObjective& obj = *e.objective;
  const long n = static_cast<long>(e.tuples.size());
  const long t = ++e.t;
  const std::size_t i = static_cast<std::size_t>((t - 1) % n);
  const Eigen::Index d = e.tuples.front().z.size();

  Matrix sum = Matrix::Zero(d, d);
  Vector rhs = Vector::Zero(d);
  for (const auto& tp : e.tuples) {
    sum += tp.D.matrix();
    rhs += tp.D.matrix() * tp.z - tp.grad;
  }
  const Vector x = sum.llt().solve(rhs);

  Tuple& tp = e.tuples[i];
  const Vector s = x - tp.z;
  const Vector y_raw = obj.grad_difference(i, x, tp.z);

  double lift = 0.0;  // alpha_{ceil(t/n) - 1} or beta_t
  SymMatrix start = tp.D;
  if (e.method == Method::kSiqn) {
    if (e.m_const != 0.0) {
      lift = 0.5 * e.m_const * std::sqrt(std::max(0.0, s.dot(obj.hessian(i, tp.z) * s)));
    }
    start = (1.0 + lift) * (1.0 + lift) * tp.D;
  } else {
    lift = e.alpha.alpha((t - 1) / n);
  }
  const double tau1 = e.method == Method::kGsliqn ? e.tau1 : 0.0;
  const double tau2 = e.method == Method::kGsliqn ? e.tau2 : 0.0;

  SymMatrix q = start;
  if (s.norm() > 1e-15 * (1.0 + tp.z.norm())) {
    const Vector y = (1.0 + lift) * y_raw;
    try {
      q = broyden_update(tau1, start, y, s.dot(y), s);
    } catch (const Error& err) {
      if (err.code() != ErrorCode::kDegenerateDirection) throw;
    }
  }
  const std::size_t j = greedy_vector(q.diag(), obj.hessian_diag(i, x));
  const Vector hcol = obj.hessian_column(i, x, j);
  Vector ej = Vector::Zero(d);
  ej(static_cast<Eigen::Index>(j)) = 1.0;
  SymMatrix d_new = broyden_update(tau2, q, hcol, hcol(static_cast<Eigen::Index>(j)), ej);

  tp.z = x;
  tp.grad = obj.gradient(i, x);
  tp.D = std::move(d_new);
  if (e.method != Method::kSiqn && t % n == 0) {
    const double a = e.alpha.alpha(t / n);
    const double w = (1.0 + a) * (1.0 + a);
    for (auto& other : e.tuples) other.D *= w;
  }
  return x;
}

double default_fd_step(const Vector& x) { return 1e-6 * (1.0 + x.norm()); }

Vector finite_diff_gradient(const FiniteSumObjective& obj, std::size_t i,
                            const Vector& x, double h) {
  Vector g(x.size());
  Vector xp = x;
  for (Eigen::Index k = 0; k < x.size(); ++k) {
    const double orig = xp(k);
    xp(k) = orig + h;
    const double fp = obj.value(i, xp);
    xp(k) = orig - h;
    const double fm = obj.value(i, xp);
    xp(k) = orig;
    g(k) = (fp - fm) / (2.0 * h);
  }
  return g;
}

Matrix finite_diff_jacobian(const FiniteSumObjective& obj, std::size_t i,
                            const Vector& x, double h) {
  Matrix jac(x.size(), x.size());
  Vector xp = x;
  for (Eigen::Index k = 0; k < x.size(); ++k) {
    const double orig = xp(k);
    xp(k) = orig + h;
    const Vector gp = obj.gradient(i, xp);
    xp(k) = orig - h;
    const Vector gm = obj.gradient(i, xp);
    xp(k) = orig;
    jac.col(k) = (gp - gm) / (2.0 * h);
  }
  return jac;
}

SymMatrix finite_diff_hessian(const FiniteSumObjective& obj, std::size_t i,
                              const Vector& x, double h) {
  return SymMatrix(finite_diff_jacobian(obj, i, x, h));
}

AuditReport sigma_decay_audit(const std::vector<GreedyObservation>& trace,
                              double mu, double L, double floor) {
  double worst_excess = -std::numeric_limits<double>::infinity();
  double worst_ratio = 0.0;
  std::size_t checked = 0;
  for (const auto& ob : trace) {
    const double d = static_cast<double>(ob.target.dim());
    const double bound = 1.0 - mu / (d * L);
    const double before = sigma_metric(ob.target, ob.before);
    if (!(before > floor)) continue;
    const double after = sigma_metric(ob.target, ob.after);
    const double ratio = after / before;
    ++checked;
    if (ratio - bound > worst_excess) {
      worst_excess = ratio - bound;
      worst_ratio = ratio;
    }
  }
  std::ostringstream ctx;
  ctx << checked << " greedy steps checked, worst ratio " << worst_ratio;
  return make_report("sigma_decay", std::max(0.0, worst_excess), 1e-9, ctx.str());
}

std::vector<GreedyObservation> collect_greedy_trace(const QuadraticObjective& obj,
                                                    const Vector& x0,
                                                    const SolverConfig& config,
                                                    long steps) {
  SolverState st = init_state(obj, x0, config);
  std::vector<GreedyObservation> out;
  for (long k = 0; k < steps; ++k) {
    step(st);
    if (!st.last.greedy_input) continue;
    const std::size_t i = st.last.index;
    SymMatrix after = st.components[i].D;
    if (st.last.omega != 1.0) after *= 1.0 / st.last.omega;
    out.push_back({*st.last.greedy_input, std::move(after),
                   obj.hessian(i, st.components[i].z)});
  }
  return out;
}

namespace {

double rel_frobenius(const Matrix& a, const Matrix& b) {
  return (a - b).norm() / std::max(1e-300, b.norm());
}

Matrix random_spd(Rng& rng, Eigen::Index d, double shift) {
  Matrix g(d, d);
  for (Eigen::Index i = 0; i < d; ++i)
    for (Eigen::Index j = 0; j < d; ++j) g(i, j) = rng.normal();
  return g * g.transpose() / static_cast<double>(d) + shift * Matrix::Identity(d, d);
}

Vector random_vector(Rng& rng, Eigen::Index d) {
  Vector v(d);
  for (Eigen::Index i = 0; i < d; ++i) v(i) = rng.normal();
  return v;
}

AuditReport audit_sm_chain(Rng& rng) {
  const Eigen::Index d = 24;
  Matrix a = random_spd(rng, d, 1.0);
  SymMatrix inv = spd_inverse(SymMatrix(a));
  for (int k = 0; k < 100; ++k) {
    const Vector w = random_vector(rng, d);
    const double c = 0.1 / static_cast<double>(d);
    a += c * w * w.transpose();
    inv = sm_inverse_update(inv, w, c);
  }
  const double dev = rel_frobenius(inv.matrix(), a.inverse());
  return make_report("sm_chain_100", dev, 1e-8, "d=24, 100 rank-one updates");
}

AuditReport audit_secant(Rng& rng) {
  double worst = 0.0;
  for (int k = 0; k < 300; ++k) {
    const Eigen::Index d = 2 + static_cast<Eigen::Index>(rng.next() % 15);
    const SymMatrix b(random_spd(rng, d, 0.1));
    const Matrix kmat = random_spd(rng, d, 0.1);
    const Vector u = random_vector(rng, d);
    const Vector ku = kmat * u;
    const double uku = u.dot(ku);
    const double tau = rng.uniform01();
    for (const SymMatrix& bp : {bfgs_update(b, ku, uku, u), dfp_update(b, ku, uku, u),
                                broyden_update(tau, b, ku, uku, u)}) {
      worst = std::max(worst, (bp * u - ku).norm() / ku.norm());
    }
  }
  return make_report("secant_property", worst, 1e-10, "300 random cases x 3 operators");
}

AuditReport audit_logistic_fd(Rng& rng) {
  LogisticProblem prob;
  prob.dim = 12;
  prob.rows = generate_logistic_rows(8, prob.dim, 0.6, rng.next());
  prob.lambda = 1.0 / 8.0;
  prob.radius = 10.0;
  const LogisticObjective obj(prob);
  double worst = 0.0;
  for (int k = 0; k < 20; ++k) {
    const Vector x = random_vector(rng, 12);
    const std::size_t i = rng.next() % obj.n();
    const double h = default_fd_step(x);
    const Vector g = obj.gradient(i, x);
    worst = std::max(worst, (finite_diff_gradient(obj, i, x, h) - g).norm() /
                                std::max(1.0, g.norm()));
  }
  return make_report("logistic_fd_gradient", worst, 1e-5, "20 random points");
}

LogisticObjective small_logistic(std::uint64_t seed, std::size_t n, std::size_t d) {
  LogisticProblem prob;
  prob.dim = d;
  prob.rows = generate_logistic_rows(n, d, 0.5, seed);
  prob.lambda = 1.0 / static_cast<double>(n);
  prob.radius = 10.0;
  return LogisticObjective(prob);
}

AuditReport audit_lazy_eager(std::uint64_t seed) {
  const LogisticObjective obj = small_logistic(seed, 10, 20);
  SolverConfig cfg;
  cfg.method = Method::kSliqn;
  cfg.alpha.mode = AlphaMode::kGeometric;
  cfg.alpha.epsilon = 0.05;
  cfg.alpha.rho = 0.5;
  cfg.alpha.m_sqrt_l = 1.0;
  cfg.refresh_period = 1000000;
  const Vector x0 = initial_point(20, 0.1, seed + 1);
  SolverState st = init_state(obj, x0, cfg);
  EagerState eager = eager_init(st);
  double worst = 0.0;
  for (long t = 1; t <= 30; ++t) {
    const Vector xl = step(st);
    const Vector xe = eager_reference_step(eager);
    worst = std::max(worst, (xl - xe).norm() / std::max(1e-300, xe.norm()));
  }
  return make_report("lazy_vs_eager", worst, 1e-8, "logistic n=10 d=20, 3 epochs");
}

AuditReport audit_drift(std::uint64_t seed) {
  const LogisticObjective obj = small_logistic(seed, 10, 20);
  SolverConfig cfg;
  cfg.method = Method::kSliqn;
  cfg.refresh_period = 200;
  SolverState st = init_state(obj, initial_point(20, 0.1, seed + 2), cfg);
  double worst = 0.0;
  for (long t = 1; t <= 1000; ++t) {
    step(st);
    if (st.last.refresh_drift) worst = std::max(worst, *st.last.refresh_drift);
  }
  return make_report("inverse_drift", worst, 1e-6, "1000 SLIQN steps, refresh 200");
}

AuditReport audit_memoization(std::uint64_t seed) {
  const LogisticObjective obj = small_logistic(seed, 6, 10);
  double worst = 0.0;
  for (Method m : {Method::kIqn, Method::kSliqn, Method::kGsliqn}) {
    SolverConfig cfg;
    cfg.method = m;
    cfg.tau1 = 0.3;
    cfg.tau2 = 0.7;
    SolverState st = init_state(obj, initial_point(10, 0.1, seed + 3), cfg);
    for (int t = 0; t < 30; ++t) {
      step(st);
      const Aggregates ref = recompute_aggregates(snapshot_tuples(st));
      worst = std::max(worst, (st.agg.phi - ref.phi).norm() / std::max(1.0, ref.phi.norm()));
      worst = std::max(worst, (st.agg.g - ref.g).norm() / std::max(1.0, ref.g.norm()));
      worst = std::max(worst, rel_frobenius(st.agg.H.matrix(), ref.h.matrix()));
    }
  }
  return make_report("memoization", worst, 1e-9, "IQN, SLIQN, GSLIQN; 30 steps each");
}

AuditReport audit_sigma(std::uint64_t seed) {
  GeneratorSpec spec;
  spec.n = 5;
  spec.d = 8;
  spec.xi = 2.0;
  spec.b_max = 10.0;
  spec.seed = seed;
  const QuadraticObjective obj(generate_quadratic(spec));
  SolverConfig cfg;
  cfg.method = Method::kSliqn;
  const auto trace = collect_greedy_trace(obj, initial_point(8, 1.0, seed), cfg, 5 * 5);
  const auto c = obj.estimate_constants();
  return sigma_decay_audit(trace, c.mu, c.L);
}

}  // namespace

std::vector<AuditReport> run_check_suite(std::uint64_t seed) {
  Rng rng(seed);
  std::vector<AuditReport> out;
  out.push_back(audit_sm_chain(rng));
  out.push_back(audit_secant(rng));
  out.push_back(audit_logistic_fd(rng));
  out.push_back(audit_lazy_eager(seed));
  out.push_back(audit_drift(seed));
  out.push_back(audit_memoization(seed));
  out.push_back(audit_sigma(seed));
  return out;
}

}  // namespace iqn::oracle
