#include <algorithm>
#include <cctype>
#include <chrono>
#include <cmath>
#include <string>

#include "iqn/solvers.hpp"

namespace iqn {

std::string_view method_name(Method m) {
  switch (m) {
    case Method::kIqn: return "IQN";
    case Method::kSiqn: return "SIQN";
    case Method::kSliqn: return "SLIQN";
    case Method::kGsliqn: return "GSLIQN";
    case Method::kIgs: return "IGS";
    case Method::kNim: return "NIM";
  }
  return "?";
}

Method parse_method(std::string_view name) {
  for (Method m : {Method::kIqn, Method::kSiqn, Method::kSliqn, Method::kGsliqn,
                   Method::kIgs, Method::kNim}) {
    std::string_view ref = method_name(m);
    if (name.size() != ref.size()) continue;
    bool same = true;
    for (std::size_t k = 0; k < ref.size(); ++k) {
      same = same && std::toupper(static_cast<unsigned char>(name[k])) == ref[k];
    }
    if (same) return m;
  }
  if (name == "G-SLIQN" || name == "g-sliqn") return Method::kGsliqn;
  throw Error(ErrorCode::kInvalidConfig, "unknown method '" + std::string(name) + "'");
}

std::string_view status_name(RunStatus s) {
  switch (s) {
    case RunStatus::kConverged: return "converged";
    case RunStatus::kMaxIterations: return "max_epochs";
    case RunStatus::kDiverged: return "diverged";
  }
  return "?";
}

double AlphaSchedule::alpha(long k) const {
  if (mode == AlphaMode::kZero) return 0.0;
  return m_sqrt_l.value_or(0.0) * epsilon * std::pow(rho, static_cast<double>(k));
}

void validate(const SolverConfig& c) {
  auto fail = [](const std::string& what) {
    throw Error(ErrorCode::kInvalidConfig, what);
  };
  if (!(c.tau1 >= 0.0 && c.tau1 <= 1.0) || !(c.tau2 >= 0.0 && c.tau2 <= 1.0)) {
    fail("tau1 and tau2 must lie in [0, 1]");
  }
  if (!(c.gstop > 0.0)) fail("gstop must be positive");
  if (c.max_epochs < 1) fail("max_epochs must be >= 1");
  if (c.refresh_period < 0) fail("refresh_period must be >= 1 (or 0 for the default)");
  if (!(c.beta_scale >= 0.0) || !std::isfinite(c.beta_scale)) {
    fail("beta_scale must be finite and >= 0");
  }
  if (c.alpha.mode == AlphaMode::kGeometric) {
    if (!(c.alpha.epsilon > 0.0)) fail("alpha epsilon must be positive");
    if (!(c.alpha.rho > 0.0 && c.alpha.rho < 1.0)) fail("alpha rho must lie in (0, 1)");
  }
}

std::size_t index_of(long t, std::size_t n) {
  return 1 + static_cast<std::size_t>(t - 1) % n;
}

double omega(long t, std::size_t n, const AlphaSchedule& alpha) {
  const long nn = static_cast<long>(n);
  if (t % nn != 0) return 1.0;
  const double a = alpha.alpha(t / nn);
  return (1.0 + a) * (1.0 + a);
}

double pending_scale(long folded, long completed, const AlphaSchedule& alpha) {
  double s = 1.0;
  for (long k = folded + 1; k <= completed; ++k) {
    const double a = alpha.alpha(k);
    s *= (1.0 + a) * (1.0 + a);
  }
  return s;
}

namespace {

bool is_lazy(Method m) { return m == Method::kSliqn || m == Method::kGsliqn; }

bool keeps_sum(Method m) {
  return m == Method::kSiqn || m == Method::kIgs || m == Method::kNim;
}

}  // namespace

SymMatrix current_curvature(const SolverState& state, std::size_t i) {
  const ComponentState& c = state.components[i];
  if (!is_lazy(state.config.method)) return c.D;
  const long completed = state.agg.t / static_cast<long>(state.agg.n);
  const double s = pending_scale(c.lazy_scale_epoch, completed, state.config.alpha);
  return s == 1.0 ? c.D : s * c.D;
}

SolverState init_state(const FiniteSumObjective& objective, const Vector& x0,
                       const SolverConfig& config) {
  validate(config);
  if (static_cast<std::size_t>(x0.size()) != objective.d()) {
    throw Error(ErrorCode::kInvalidConfig, "x0 dimension does not match objective");
  }
  SolverState st;
  st.objective = &objective;
  st.config = config;
  st.constants = objective.estimate_constants();
  if (st.config.alpha.mode == AlphaMode::kGeometric && !st.config.alpha.m_sqrt_l) {
    st.config.alpha.m_sqrt_l = st.constants.M * std::sqrt(st.constants.L);
  }
  if (st.config.refresh_period == 0) {
    st.config.refresh_period = 10 * static_cast<long>(objective.n());
  }

  const Method m = st.config.method;
  const double a0 = is_lazy(m) ? st.config.alpha.alpha(0) : 0.0;
  const double scale0 = (1.0 + a0) * (1.0 + a0);
  const bool exact = m == Method::kNim || st.config.init == InitCurvature::kExactHessian;

  st.components.resize(objective.n());
  for (std::size_t i = 0; i < objective.n(); ++i) {
    ComponentState& c = st.components[i];
    c.z = x0;
    c.grad = objective.gradient(i, x0);
    c.D = exact ? scale0 * objective.hessian(i, x0)
                : SymMatrix::identity(objective.d(), scale0 * st.constants.L);
    c.lazy_scale_epoch = 0;
  }
  st.agg.n = objective.n();
  st.agg.t = 0;
  st.x = x0;
  refresh_aggregates(st);
  return st;
}

void refresh_aggregates(SolverState& st) {
  const auto d = static_cast<std::size_t>(st.x.size());
  SymMatrix sum(d);
  Vector phi = Vector::Zero(static_cast<Eigen::Index>(d));
  Vector g = Vector::Zero(static_cast<Eigen::Index>(d));
  for (std::size_t i = 0; i < st.components.size(); ++i) {
    const SymMatrix di = current_curvature(st, i);
    sum += di;
    phi += di * st.components[i].z;
    g += st.components[i].grad;
  }
  st.agg.H = spd_inverse(sum, ErrorCode::kSingularAggregate);
  st.agg.phi = std::move(phi);
  st.agg.g = std::move(g);
  if (keeps_sum(st.config.method)) {
    st.agg.d_sum = std::move(sum);
  } else {
    st.agg.d_sum.reset();
  }
}

double inverse_drift(const SolverState& st) {
  const auto d = static_cast<std::size_t>(st.x.size());
  SymMatrix sum(d);
  for (std::size_t i = 0; i < st.components.size(); ++i) {
    sum += current_curvature(st, i);
  }
  const auto dd = static_cast<Eigen::Index>(d);
  return (st.agg.H.matrix() * sum.matrix() - Matrix::Identity(dd, dd)).norm();
}

Vector step(SolverState& st) {
  Vector x;
  switch (st.config.method) {
    case Method::kIqn: x = iqn_step(st); break;
    case Method::kSiqn: x = siqn_step(st); break;
    case Method::kSliqn: x = sliqn_step(st); break;
    case Method::kGsliqn: x = gsliqn_step(st); break;
    case Method::kIgs: x = igs_step(st); break;
    case Method::kNim: x = nim_step(st); break;
  }
  st.last.refresh_drift.reset();
  if (st.config.refresh_period > 0 && st.agg.t % st.config.refresh_period == 0) {
    st.last.refresh_drift = inverse_drift(st);
    refresh_aggregates(st);
  }
  return x;
}

double sigma_max(const SolverState& st) {
  double worst = 0.0;
  for (std::size_t i = 0; i < st.components.size(); ++i) {
    const SymMatrix hess = st.objective->hessian(i, st.components[i].z);
    worst = std::max(worst, sigma_metric(hess, current_curvature(st, i)));
  }
  return worst;
}

RunResult run(const FiniteSumObjective& objective, const Vector& x0,
              const SolverConfig& config, const std::optional<Vector>& x_star) {
  SolverState st = init_state(objective, x0, config);
  RunResult result;
  const double e0 = x_star ? (x0 - *x_star).norm() : 0.0;
  const long n = static_cast<long>(objective.n());
  const long total = st.config.max_epochs * n;
  const bool rule_enabled = std::isfinite(st.config.gstop);
  double wall_ms = 0.0;
  result.trace.reserve(static_cast<std::size_t>(std::min<long>(total, 1 << 20)));

  for (long t = 1; t <= total; ++t) {
    const auto t0 = std::chrono::steady_clock::now();
    Vector x;
    try {
      x = step(st);
    } catch (const Error& e) {
      throw StepError(t, e);
    }
    wall_ms += std::chrono::duration<double, std::milli>(
                   std::chrono::steady_clock::now() - t0)
                   .count();

    TraceRecord rec;
    rec.t = t;
    rec.epoch = (t + n - 1) / n;
    rec.grad_norm = objective.gradient_norm(x);
    if (x_star) {
      const double err = (x - *x_star).norm();
      rec.normalized_error = e0 > 0.0 ? err / e0 : err;
    }
    if (st.config.record_sigma && t % n == 0) rec.sigma_max = sigma_max(st);
    rec.wall_ms = wall_ms;
    result.trace.push_back(rec);
    result.x = x;

    if (!std::isfinite(rec.grad_norm) || rec.grad_norm > st.config.divergence_threshold) {
      result.status = RunStatus::kDiverged;
      return result;
    }
    if (rule_enabled && rec.grad_norm < st.config.gstop) {
      result.status = RunStatus::kConverged;
      return result;
    }
  }
  result.status = RunStatus::kMaxIterations;
  if (result.trace.empty()) result.x = x0;
  return result;
}

}  // namespace iqn
