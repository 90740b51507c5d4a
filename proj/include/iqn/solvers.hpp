#pragma once

// Incremental solvers for min (1/n) sum_i f_i(x).
//
// Every method keeps one tuple (z_i, grad f_i(z_i), D_i) per component and
// forms the next iterate from the aggregated second-order models,
//
//   x^t = H (phi - g),   H = (sum_i D_i)^{-1},  phi = sum_i D_i z_i,
//   g = sum_i grad f_i(z_i),
//
// then refreshes the tuple of component i_t = 1 + (t - 1) mod n. The methods
// differ in how D_{i_t} is refreshed and how H is maintained:
//
//   IQN     classic BFGS along s = z_new - z_old; H via two Sherman-Morrison
//           updates.
//   SIQN    (1 + beta)^2 scaling, classic BFGS, then a greedy BFGS step
//           against the true Hessian; aggregates recomputed directly. This is
//           the O(n d^2 + d^3) reference.
//   SLIQN   SIQN with beta replaced by the epoch schedule alpha_k, the epoch
//           scaling applied lazily, and H maintained by four Sherman-Morrison
//           updates followed by 1 / omega_t.
//   GSLIQN  SLIQN with restricted Broyden operators (tau1 classic,
//           tau2 greedy).
//   IGS     (1 + beta)^2 scaling followed by a greedy BFGS step only.
//   NIM     exact Hessians in place of D_i.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "iqn/matkernel.hpp"
#include "iqn/objectives.hpp"

namespace iqn {

enum class Method { kIqn, kSiqn, kSliqn, kGsliqn, kIgs, kNim };

std::string_view method_name(Method m);
Method parse_method(std::string_view name);

enum class AlphaMode { kZero, kGeometric };

/// alpha_k = M sqrt(L) * epsilon * rho^k in geometric mode, 0 otherwise.
struct AlphaSchedule {
  AlphaMode mode = AlphaMode::kZero;
  double epsilon = 0.0;
  double rho = 0.5;
  /// M sqrt(L). Filled from the objective's constants by init_state when
  /// left unset.
  std::optional<double> m_sqrt_l;

  double alpha(long k) const;
};

enum class InitCurvature {
  /// D_i = (1 + alpha_0)^2 L I.
  kScaledIdentity,
  /// D_i = (1 + alpha_0)^2 hess f_i(x0).
  kExactHessian,
};

struct SolverConfig {
  Method method = Method::kSliqn;
  double tau1 = 0.0;
  double tau2 = 0.0;
  AlphaSchedule alpha;
  /// Multiplier on M in beta_t = (M / 2) ||s||_{z_old} (SIQN, IGS); 0 turns
  /// the correction off.
  double beta_scale = 1.0;
  /// Stop once (1/n) ||sum_i grad f_i(x^t)|| < gstop; +inf disables the rule.
  double gstop = 1e-8;
  long max_epochs = 100;
  /// Direct recomputation cadence of H, phi, g in steps; 0 selects 10 n.
  long refresh_period = 0;
  std::uint64_t seed = 0;
  InitCurvature init = InitCurvature::kScaledIdentity;
  /// Record sigma diagnostics at the end of every epoch (O(n d^3)).
  bool record_sigma = false;
  double divergence_threshold = 1e12;
};

/// Validates ranges; throws kInvalidConfig.
void validate(const SolverConfig& config);

struct ComponentState {
  Vector z;
  Vector grad;
  SymMatrix D;
  /// Number of end-of-epoch scalings already folded into D (SLIQN family).
  long lazy_scale_epoch = 0;
};

struct AggregateState {
  SymMatrix H;
  Vector phi;
  Vector g;
  long t = 0;
  std::size_t n = 0;
  /// sum_i D_i, kept only by the O(d^3) methods (SIQN, IGS, NIM).
  std::optional<SymMatrix> d_sum;
};

/// What the most recent step did; consumed by audits and tests.
struct StepDiagnostics {
  std::size_t index = 0;
  bool classic_skipped = false;
  double omega = 1.0;
  double beta = 0.0;
  std::size_t greedy_index = 0;
  /// Matrix after the classic stage (SIQN family and IGS).
  std::optional<SymMatrix> q;
  /// Matrix the greedy stage started from.
  std::optional<SymMatrix> greedy_input;
  /// ||H (sum_i D_i) - I||_F measured right before a scheduled refresh.
  std::optional<double> refresh_drift;
  bool chain_fallback = false;
};

struct SolverState {
  const FiniteSumObjective* objective = nullptr;
  SolverConfig config;
  SmoothnessConstants constants;
  std::vector<ComponentState> components;
  AggregateState agg;
  Vector x;
  StepDiagnostics last;
};

SolverState init_state(const FiniteSumObjective& objective, const Vector& x0,
                       const SolverConfig& config);

/// i_t = 1 + (t - 1) mod n, 1-based.
std::size_t index_of(long t, std::size_t n);

/// (1 + alpha_{t/n})^2 when n divides t, else 1.
double omega(long t, std::size_t n, const AlphaSchedule& alpha);

/// Product of end-of-epoch scalings owed by a stored D whose tag is
/// `folded` when `completed` scalings have happened.
double pending_scale(long folded, long completed, const AlphaSchedule& alpha);

/// D_i with every owed scaling applied, as of the end of step agg.t.
SymMatrix current_curvature(const SolverState& state, std::size_t i);

Vector iqn_step(SolverState& state);
Vector siqn_step(SolverState& state);
Vector sliqn_step(SolverState& state);
Vector gsliqn_step(SolverState& state);
Vector igs_step(SolverState& state);
Vector nim_step(SolverState& state);

/// Dispatches on config.method and applies the periodic refresh.
Vector step(SolverState& state);

/// Recomputes H, phi, g (and d_sum when kept) from the tuples.
void refresh_aggregates(SolverState& state);

/// ||H (sum_i D_i) - I||_F against the current tuples.
double inverse_drift(const SolverState& state);

struct TraceRecord {
  long t = 0;
  long epoch = 0;
  double grad_norm = 0.0;
  std::optional<double> normalized_error;
  std::optional<double> sigma_max;
  double wall_ms = 0.0;
};

enum class RunStatus { kConverged, kMaxIterations, kDiverged };

std::string_view status_name(RunStatus s);

struct RunResult {
  std::vector<TraceRecord> trace;
  Vector x;
  RunStatus status = RunStatus::kMaxIterations;
};

/// Runs until the gradient rule fires, the iterate diverges, or
/// max_epochs * n steps elapse. Step failures surface as StepError.
RunResult run(const FiniteSumObjective& objective, const Vector& x0,
              const SolverConfig& config,
              const std::optional<Vector>& x_star = std::nullopt);

/// Largest sigma(D_i, hess f_i(z_i)) over all components.
double sigma_max(const SolverState& state);

}  // namespace iqn
