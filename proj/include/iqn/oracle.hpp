#pragma once

// Independent verification layer. Nothing here reuses solver internals
// beyond the matkernel primitives: aggregates are rebuilt from their
// definitions and the eager reference runs the epoch-scaled recursion with
// explicit full-matrix operations.

#include <string>
#include <vector>

#include "iqn/matkernel.hpp"
#include "iqn/objectives.hpp"
#include "iqn/solvers.hpp"

namespace iqn::oracle {

struct AuditReport {
  std::string name;
  double max_deviation = 0.0;
  double tolerance = 0.0;
  bool passed = false;
  std::string context;
};

AuditReport make_report(std::string name, double max_deviation, double tolerance,
                        std::string context = {});

struct Aggregates {
  SymMatrix h;  // (sum_i D_i)^{-1}
  Vector phi;   // sum_i D_i z_i
  Vector g;     // sum_i grad_i
};

struct Tuple {
  Vector z;
  Vector grad;
  SymMatrix D;
};

/// Direct O(n d^2 + d^3) evaluation. Throws kSingularAggregate.
Aggregates recompute_aggregates(const std::vector<Tuple>& tuples);

/// Tuples of a solver state with every owed lazy scaling applied.
std::vector<Tuple> snapshot_tuples(const SolverState& state);

/// Eager, literal execution of the sharpened recursion: every D_i is
/// multiplied by omega_t at the end of each epoch, and x^t is obtained from a
/// fresh dense solve. Supports SLIQN, GSLIQN and SIQN (beta from M).
struct EagerState {
  const FiniteSumObjective* objective = nullptr;
  Method method = Method::kSliqn;
  AlphaSchedule alpha;
  double tau1 = 0.0;
  double tau2 = 0.0;
  double m_const = 0.0;
  long t = 0;
  std::vector<Tuple> tuples;
};

EagerState eager_init(const SolverState& state);

/// Advances one step; returns x^t.
Vector eager_reference_step(EagerState& state);

Vector finite_diff_gradient(const FiniteSumObjective& obj, std::size_t i,
                            const Vector& x, double h);
SymMatrix finite_diff_hessian(const FiniteSumObjective& obj, std::size_t i,
                              const Vector& x, double h);
/// Raw (unsymmetrized) central-difference Jacobian of the gradient.
Matrix finite_diff_jacobian(const FiniteSumObjective& obj, std::size_t i,
                            const Vector& x, double h);

/// Default step h = 1e-6 (1 + ||x||).
double default_fd_step(const Vector& x);

/// One greedy update observed during a quadratic run.
struct GreedyObservation {
  SymMatrix before;  // matrix entering the greedy stage
  SymMatrix after;   // greedy result, before any omega scaling
  SymMatrix target;  // exact Hessian
};

/// Checks sigma(after, A) <= (1 - mu / (d L)) sigma(before, A) + 1e-9 for
/// every observation with sigma(before, A) > floor. Reports the worst
/// excess of the observed contraction ratio over the bound.
AuditReport sigma_decay_audit(const std::vector<GreedyObservation>& trace,
                              double mu, double L, double floor = 1e-12);

/// Runs a solver (SLIQN family, SIQN or IGS) on a quadratic and collects
/// its greedy updates.
std::vector<GreedyObservation> collect_greedy_trace(
    const QuadraticObjective& obj, const Vector& x0, const SolverConfig& config,
    long steps);

/// Audits used by `iqn-lab check`.
std::vector<AuditReport> run_check_suite(std::uint64_t seed);

}  // namespace iqn::oracle
