#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <limits>

#include "iqn/data.hpp"
#include "iqn/oracle.hpp"
#include "iqn/solvers.hpp"

using namespace iqn;

namespace {

QuadraticObjective random_quadratic(std::size_t n, std::size_t d, double xi,
                                    std::uint64_t seed, double b_max = 10.0) {
  GeneratorSpec s;
  s.n = n;
  s.d = d;
  s.xi = xi;
  s.b_max = b_max;
  s.seed = seed;
  return QuadraticObjective(generate_quadratic(s));
}

LogisticObjective random_logistic(std::uint64_t seed, std::size_t n, std::size_t d) {
  LogisticProblem p;
  p.dim = d;
  p.rows = generate_logistic_rows(n, d, 0.6, seed);
  p.lambda = 1.0 / static_cast<double>(n);
  p.radius = 10.0;
  return LogisticObjective(p);
}

SolverConfig config_for(Method m) {
  SolverConfig c;
  c.method = m;
  return c;
}

double rel(const Vector& a, const Vector& b) { return (a - b).norm() / b.norm(); }

constexpr Method kAllMethods[] = {Method::kIqn,  Method::kSiqn, Method::kSliqn,
                                  Method::kGsliqn, Method::kIgs, Method::kNim};

}  // namespace

TEST_CASE("index_of examples") {
  CHECK(index_of(1, 5) == 1);
  CHECK(index_of(5, 5) == 5);
  CHECK(index_of(6, 5) == 1);
}

TEST_CASE("omega examples") {
  AlphaSchedule zero;
  for (long t = 1; t <= 20; ++t) CHECK(omega(t, 4, zero) == 1.0);
  AlphaSchedule geo;
  geo.mode = AlphaMode::kGeometric;
  geo.epsilon = 1.0;
  geo.rho = 0.5;
  geo.m_sqrt_l = 1.0;
  CHECK(geo.alpha(1) == 0.5);
  CHECK(omega(4, 4, geo) == 2.25);
  CHECK(omega(5, 4, geo) == 1.0);
  CHECK(pending_scale(0, 2, geo) == doctest::Approx(2.25 * 1.5625));
  CHECK(pending_scale(2, 2, geo) == 1.0);
}

TEST_CASE("method names round trip") {
  for (Method m : kAllMethods) CHECK(parse_method(method_name(m)) == m);
  CHECK(parse_method("sliqn") == Method::kSliqn);
  CHECK(parse_method("G-SLIQN") == Method::kGsliqn);
  CHECK_THROWS_AS(parse_method("SBFGS"), Error);
}

TEST_CASE("config validation") {
  SolverConfig c;
  c.tau1 = 1.5;
  CHECK_THROWS_AS(validate(c), Error);
  c = SolverConfig{};
  c.gstop = 0.0;
  CHECK_THROWS_AS(validate(c), Error);
  c = SolverConfig{};
  c.alpha.mode = AlphaMode::kGeometric;
  c.alpha.epsilon = 0.1;
  c.alpha.rho = 1.0;
  CHECK_THROWS_AS(validate(c), Error);
  c = SolverConfig{};
  c.gstop = std::numeric_limits<double>::infinity();
  CHECK_NOTHROW(validate(c));
}

TEST_CASE("init_state examples") {
  QuadraticComponents c;
  Vector a(2);
  a << 1.0, 2.0;
  c.a_diag = {a, a, a};
  c.b = {Vector::Ones(2), Vector::Zero(2), -Vector::Ones(2)};
  const QuadraticObjective q(c);
  Vector x0(2);
  x0 << 0.5, -1.5;
  const SolverState st = init_state(q, x0, config_for(Method::kSliqn));
  for (const auto& comp : st.components) {
    CHECK(comp.D.matrix() == Matrix(2.0 * Matrix::Identity(2, 2)));
  }
  CHECK((st.agg.H.matrix() - Matrix::Identity(2, 2) / 6.0).norm() <= 1e-15);
  CHECK((st.agg.g - q.full_gradient_sum(x0)).norm() <= 1e-15);
  CHECK((st.agg.phi - 6.0 * x0).norm() <= 1e-15);
}

TEST_CASE("IQN hand-traced scalar problem") {
  // f1 = x^2/2 - x, f2 = 3x^2/2 - 3x; x* = 1, L = 3, x0 = 0.
  QuadraticComponents c;
  c.a_diag = {Vector::Constant(1, 1.0), Vector::Constant(1, 3.0)};
  c.b = {Vector::Constant(1, -1.0), Vector::Constant(1, -3.0)};
  const QuadraticObjective q(c);
  SolverState st = init_state(q, Vector::Zero(1), config_for(Method::kIqn));
  // x1 = (0 + 4) / 6; D_1 becomes y / s = 1.
  CHECK(step(st)(0) == doctest::Approx(2.0 / 3.0).epsilon(1e-15));
  CHECK(st.components[0].D(0, 0) == doctest::Approx(1.0).epsilon(1e-15));
  // x2 = (2/3 + 10/3) / 4 = 1.
  CHECK(step(st)(0) == doctest::Approx(1.0).epsilon(1e-15));
}

TEST_CASE("n = 1 exact curvature gives the Newton step") {
  QuadraticComponents c;
  Vector a(2);
  a << 2.0, 0.5;
  Vector b(2);
  b << 1.0, -1.0;
  c.a_diag = {a};
  c.b = {b};
  const QuadraticObjective q(c);
  SolverConfig cfg = config_for(Method::kIqn);
  cfg.init = InitCurvature::kExactHessian;
  SolverState st = init_state(q, Vector::Ones(2), cfg);
  const Vector x1 = step(st);
  CHECK(x1(0) == doctest::Approx(-0.5));
  CHECK(x1(1) == doctest::Approx(2.0));
}

TEST_CASE("exact curvature converges in one step") {
  const auto q = random_quadratic(6, 8, 2.0, 3);
  const Vector x0 = initial_point(8, 5.0, 3);
  const Vector xs = q.minimizer();
  for (Method m : kAllMethods) {
    SolverConfig cfg = config_for(m);
    cfg.init = InitCurvature::kExactHessian;
    SolverState st = init_state(q, x0, cfg);
    const Vector x1 = step(st);
    CHECK((x1 - xs).norm() <= 1e-10 * (x0 - xs).norm());
    const RunResult r = run(q, x0, cfg);
    CHECK(r.status == RunStatus::kConverged);
    CHECK(r.trace.size() == 1);
  }
}

TEST_CASE("SIQN fixed point at exact curvature") {
  const auto q = random_quadratic(3, 4, 1.0, 9);
  SolverConfig cfg = config_for(Method::kSiqn);
  cfg.init = InitCurvature::kExactHessian;
  SolverState st = init_state(q, initial_point(4, 1.0, 1), cfg);
  step(st);
  CHECK(st.components[0].D.matrix() == q.hessian(0, st.x).matrix());
}

TEST_CASE("memoized aggregates match direct recomputation after every step") {
  const auto obj = random_logistic(21, 7, 9);
  for (Method m : kAllMethods) {
    SolverConfig cfg = config_for(m);
    cfg.tau1 = 0.4;
    cfg.tau2 = 0.6;
    cfg.beta_scale = 1e-3;
    SolverState st = init_state(obj, initial_point(9, 0.3, 4), cfg);
    double worst = 0.0;
    for (int t = 0; t < 50; ++t) {
      step(st);
      const auto ref = oracle::recompute_aggregates(oracle::snapshot_tuples(st));
      worst = std::max(worst, rel(st.agg.phi, ref.phi));
      worst = std::max(worst, (st.agg.g - ref.g).norm() / std::max(1.0, ref.g.norm()));
      worst = std::max(worst, (st.agg.H.matrix() - ref.h.matrix()).norm() / ref.h.matrix().norm());
    }
    CAPTURE(method_name(m));
    CHECK(worst <= 1e-9);
  }
}

TEST_CASE("SIQN beta equals its definition") {
  const auto obj = random_logistic(5, 4, 5);
  SolverState st = init_state(obj, initial_point(5, 0.5, 6), config_for(Method::kSiqn));
  for (int t = 0; t < 6; ++t) {
    const std::size_t i = index_of(st.agg.t + 1, st.agg.n) - 1;
    const Vector z_old = st.components[i].z;
    const Vector x = step(st);
    const Vector s = x - z_old;
    const double norm_z = std::sqrt(s.dot(obj.hessian(i, z_old) * s));
    CHECK(st.last.beta == doctest::Approx(0.5 * st.constants.M * norm_z).epsilon(1e-12));
  }
}

TEST_CASE("lazy SLIQN and G-SLIQN match the eager reference") {
  const auto obj = random_logistic(31, 8, 10);
  for (Method m : {Method::kSliqn, Method::kGsliqn}) {
    SolverConfig cfg = config_for(m);
    cfg.tau1 = 0.5;
    cfg.tau2 = 0.25;
    cfg.alpha.mode = AlphaMode::kGeometric;
    cfg.alpha.epsilon = 0.2;
    cfg.alpha.rho = 0.5;
    cfg.alpha.m_sqrt_l = 1.0;
    SolverState st = init_state(obj, initial_point(10, 0.2, 2), cfg);
    auto eager = oracle::eager_init(st);
    double worst = 0.0;
    for (int t = 0; t < 32; ++t) {
      const Vector xl = step(st);
      const Vector xe = oracle::eager_reference_step(eager);
      worst = std::max(worst, rel(xl, xe));
    }
    CHECK(worst <= 1e-10);
  }
}

TEST_CASE("G-SLIQN endpoints") {
  const auto obj = random_logistic(41, 6, 8);
  const Vector x0 = initial_point(8, 0.3, 3);
  SolverState a = init_state(obj, x0, config_for(Method::kSliqn));
  SolverState b = init_state(obj, x0, config_for(Method::kGsliqn));
  for (int t = 0; t < 12; ++t) CHECK(rel(step(b), step(a)) <= 1e-12);

  // tau = 1 on both stages uses DFP throughout.
  SolverConfig cfg = config_for(Method::kGsliqn);
  cfg.tau1 = 1.0;
  cfg.tau2 = 1.0;
  SolverState g = init_state(obj, x0, cfg);
  const SymMatrix d_old = g.components[0].D;
  const Vector z_old = g.components[0].z;
  const Vector x = step(g);
  const Vector s = x - z_old;
  const Vector y = obj.grad_difference(0, x, z_old);
  const SymMatrix q = dfp_update(d_old, y, s.dot(y), s);
  CHECK((g.last.q->matrix() - q.matrix()).norm() <= 1e-12 * q.matrix().norm());
  const std::size_t j = greedy_vector(q.diag(), obj.hessian_diag(0, x));
  const Vector hcol = obj.hessian_column(0, x, j);
  Vector ej = Vector::Zero(8);
  ej(static_cast<Eigen::Index>(j)) = 1.0;
  const SymMatrix want = dfp_update(q, hcol, hcol(static_cast<Eigen::Index>(j)), ej);
  CHECK((g.components[0].D.matrix() - want.matrix()).norm() <= 1e-12 * want.matrix().norm());
}

TEST_CASE("IGS with one component matches a standalone greedy BFGS run") {
  const auto q = random_quadratic(1, 6, 2.0, 12);
  const Vector x0 = initial_point(6, 1.0, 5);
  SolverState st = init_state(q, x0, config_for(Method::kIgs));
  SymMatrix g = SymMatrix::identity(6, q.estimate_constants().L);
  Vector z = x0;
  const SymMatrix a = q.hessian(0, z);
  for (int t = 0; t < 8; ++t) {
    const Vector x_ref = g.matrix().llt().solve(g * z - q.gradient(0, z));
    const std::size_t j = greedy_vector(g.diag(), a.diag());
    Vector ej = Vector::Zero(6);
    ej(static_cast<Eigen::Index>(j)) = 1.0;
    const Vector col = a.matrix().col(static_cast<Eigen::Index>(j));
    g = bfgs_update(g, col, col(static_cast<Eigen::Index>(j)), ej);
    z = x_ref;
    CHECK(rel(step(st), x_ref) <= 1e-12);
  }
}

TEST_CASE("IGS greedy steps contract sigma on quadratics") {
  const auto q = random_quadratic(4, 10, 2.0, 13);
  const auto c = q.estimate_constants();
  const auto trace =
      oracle::collect_greedy_trace(q, initial_point(10, 1.0, 7), config_for(Method::kIgs), 40);
  CHECK(trace.size() == 40);
  CHECK(oracle::sigma_decay_audit(trace, c.mu, c.L).passed);
}

TEST_CASE("NIM matches a textbook incremental Newton reference") {
  const auto obj = random_logistic(51, 5, 6);
  const Vector x0 = initial_point(6, 0.5, 8);
  SolverState st = init_state(obj, x0, config_for(Method::kNim));
  std::vector<Vector> z(5, x0);
  for (int t = 1; t <= 15; ++t) {
    Matrix sum = Matrix::Zero(6, 6);
    Vector rhs = Vector::Zero(6);
    for (std::size_t i = 0; i < 5; ++i) {
      const Matrix h = obj.hessian(i, z[i]).matrix();
      sum += h;
      rhs += h * z[i] - obj.gradient(i, z[i]);
    }
    const Vector x_ref = sum.ldlt().solve(rhs);
    z[index_of(t, 5) - 1] = x_ref;
    CHECK(rel(step(st), x_ref) <= 1e-10);
  }
}

TEST_CASE("SLIQN with one component falls back to a direct refresh") {
  const auto q = random_quadratic(1, 4, 1.0, 14);
  SolverState st = init_state(q, initial_point(4, 1.0, 2), config_for(Method::kSliqn));
  for (int t = 0; t < 5; ++t) step(st);
  CHECK(st.last.chain_fallback);
  CHECK(oracle::recompute_aggregates(oracle::snapshot_tuples(st)).h.matrix().isApprox(
      st.agg.H.matrix(), 1e-12));
}

TEST_CASE("run: gstop = inf records exactly max_epochs * n steps") {
  const auto q = random_quadratic(5, 6, 1.0, 15);
  SolverConfig cfg = config_for(Method::kSliqn);
  cfg.gstop = std::numeric_limits<double>::infinity();
  cfg.max_epochs = 3;
  const RunResult r = run(q, initial_point(6, 1.0, 1), cfg, q.minimizer());
  REQUIRE(r.trace.size() == 15);
  CHECK(r.status == RunStatus::kMaxIterations);
  for (std::size_t k = 0; k < r.trace.size(); ++k) {
    CHECK(r.trace[k].t == static_cast<long>(k + 1));
    CHECK(r.trace[k].epoch == static_cast<long>(k / 5 + 1));
    CHECK(r.trace[k].normalized_error.has_value());
    CHECK(r.trace[k].wall_ms >= 0.0);
  }
  CHECK(r.trace[0].normalized_error.value() <= 1.0);
}

TEST_CASE("run: per-epoch normalized error is non-increasing on a desk quadratic") {
  const auto q = random_quadratic(10, 10, 2.0, 16);
  SolverConfig cfg = config_for(Method::kSliqn);
  cfg.gstop = 1e-8;
  cfg.record_sigma = true;
  const RunResult r = run(q, initial_point(10, 1.0, 2), cfg, q.minimizer());
  CHECK(r.status == RunStatus::kConverged);
  double prev = 2.0;
  for (const auto& rec : r.trace) {
    if (rec.t % 10 != 0) continue;
    CHECK(rec.normalized_error.value() <= prev);
    CHECK(rec.sigma_max.has_value());
    prev = *rec.normalized_error;
  }
}

TEST_CASE("run: divergence is reported as a status") {
  const auto q = random_quadratic(3, 4, 1.0, 17, 1000.0);
  SolverConfig cfg = config_for(Method::kIqn);
  cfg.divergence_threshold = 1e-3;
  const RunResult r = run(q, initial_point(4, 1.0, 1), cfg);
  CHECK(r.status == RunStatus::kDiverged);
  CHECK(r.trace.size() == 1);
}

TEST_CASE("zero-alpha SLIQN keeps D above the Hessian on quadratics") {
  const auto q = random_quadratic(6, 8, 2.0, 18);
  SolverState st = init_state(q, initial_point(8, 1.0, 1), config_for(Method::kSliqn));
  for (int t = 0; t < 5 * 6; ++t) {
    step(st);
    const std::size_t i = st.last.index;
    SymMatrix d = st.components[i].D;
    d *= 1.0 / st.last.omega;
    CHECK(psd_dominates(d, q.hessian(i, st.x), 1e-8));
  }
}

TEST_CASE("frozen SLIQN and IQN epochs on a seeded quadratic") {
  const auto q = random_quadratic(8, 12, 2.0, 77, 100.0);
  const Vector x0 = initial_point(12, 1.0, 77);
  SolverConfig cfg = config_for(Method::kSliqn);
  cfg.gstop = 1e-8;
  const RunResult s = run(q, x0, cfg);
  cfg.method = Method::kIqn;
  const RunResult i = run(q, x0, cfg);
  CHECK(s.status == RunStatus::kConverged);
  CHECK(i.status == RunStatus::kConverged);
  CHECK(s.trace.back().t == 95);
  CHECK(i.trace.back().t == 232);
}
