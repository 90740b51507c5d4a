#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "iqn/data.hpp"
#include "iqn/oracle.hpp"

using namespace iqn;

TEST_CASE("make_report compares against the tolerance") {
  CHECK(oracle::make_report("a", 1e-9, 1e-8).passed);
  CHECK_FALSE(oracle::make_report("a", 1e-7, 1e-8).passed);
  CHECK_FALSE(oracle::make_report("a", std::nan(""), 1e-8).passed);
}

TEST_CASE("recompute_aggregates from definitions") {
  Vector z1(2), z2(2);
  z1 << 1.0, 2.0;
  z2 << -1.0, 0.5;
  std::vector<oracle::Tuple> tuples{
      {z1, Vector::Ones(2), SymMatrix::identity(2, 2.0)},
      {z2, -Vector::Ones(2), SymMatrix::identity(2, 3.0)}};
  const auto agg = oracle::recompute_aggregates(tuples);
  CHECK((agg.h.matrix() - Matrix::Identity(2, 2) / 5.0).norm() <= 1e-15);
  CHECK((agg.phi - (2.0 * z1 + 3.0 * z2)).norm() <= 1e-15);
  CHECK(agg.g.norm() == 0.0);

  tuples[0].D = SymMatrix(2);
  tuples[1].D = SymMatrix(2);
  CHECK_THROWS_AS(oracle::recompute_aggregates(tuples), Error);
}

TEST_CASE("finite differences on a quadratic are exact up to rounding") {
  GeneratorSpec s;
  s.n = 2;
  s.d = 6;
  s.xi = 1.0;
  s.b_max = 5.0;
  const QuadraticObjective q(generate_quadratic(s));
  const Vector x = initial_point(6, 2.0, 1);
  const double h = oracle::default_fd_step(x);
  CHECK((oracle::finite_diff_gradient(q, 1, x, h) - q.gradient(1, x)).norm() <= 1e-8);
  CHECK((oracle::finite_diff_hessian(q, 1, x, h).matrix() - q.hessian(1, x).matrix()).norm() <=
        1e-8);
}

TEST_CASE("default finite-difference step") {
  Vector x(2);
  x << 3.0, 4.0;
  CHECK(oracle::default_fd_step(x) == doctest::Approx(6e-6));
}

TEST_CASE("sigma audit flags a non-contracting step") {
  const SymMatrix a = SymMatrix::identity(2);
  const SymMatrix before = SymMatrix::identity(2, 2.0);
  std::vector<oracle::GreedyObservation> ok{{before, SymMatrix::identity(2, 1.5), a}};
  CHECK(oracle::sigma_decay_audit(ok, 1.0, 1.0).passed);
  std::vector<oracle::GreedyObservation> bad{{before, before, a}};
  CHECK_FALSE(oracle::sigma_decay_audit(bad, 1.0, 1.0).passed);
  // Below the floor nothing is checked.
  std::vector<oracle::GreedyObservation> tiny{{a, before, a}};
  CHECK(oracle::sigma_decay_audit(tiny, 1.0, 1.0).passed);
}

TEST_CASE("eager reference reproduces the hand-traced SLIQN scalar case") {
  // With n = 1, d = 1 the greedy stage restores the exact curvature, so the
  // second iterate is the Newton step from the first.
  QuadraticComponents c;
  c.a_diag = {Vector::Constant(1, 2.0)};
  c.b = {Vector::Constant(1, -4.0)};
  const QuadraticObjective q(c);
  SolverConfig cfg;
  cfg.method = Method::kSliqn;
  const SolverState st = init_state(q, Vector::Zero(1), cfg);
  auto eager = oracle::eager_init(st);
  CHECK(oracle::eager_reference_step(eager)(0) == doctest::Approx(2.0));
  CHECK(eager.tuples[0].D(0, 0) == doctest::Approx(2.0));
}

TEST_CASE("check suite passes") {
  for (const auto& r : oracle::run_check_suite(7)) {
    CAPTURE(r.name);
    CAPTURE(r.max_deviation);
    CHECK(r.passed);
  }
}
