#pragma once

// Experiment runner behind `iqn-lab run`: builds a problem from a flat
// key=value config, runs each requested method from a shared x0 and writes
// one trace CSV per method, a summary table and long-format plot data.

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "iqn/data.hpp"
#include "iqn/solvers.hpp"

namespace iqn {

enum class ProblemKind { kQuadratic, kLogistic };

struct ProblemSpec {
  ProblemKind kind = ProblemKind::kQuadratic;
  /// Quadratic: generated from `gen` unless `quadratic_file` is set.
  GeneratorSpec gen;
  std::string quadratic_file;
  /// Logistic: LIBSVM path; lambda defaults to 1/N and radius to 10 ||x0||.
  std::string dataset;
  std::optional<double> lambda;
  double p = 2.1;
  std::optional<double> radius;
};

struct ExperimentConfig {
  ProblemSpec problem;
  /// One entry per method; gstop and max_epochs below override theirs.
  std::vector<SolverConfig> methods;
  double x0_scale = 1.0;
  std::uint64_t seed = 0;
  std::string output_dir = ".";
  double gstop = 1e-8;
  long max_epochs = 100;
};

/// Parses `key = value` lines; '#' starts a comment. Throws kInvalidConfig
/// naming the offending line.
ExperimentConfig parse_config(std::istream& in);
ExperimentConfig load_config(const std::string& path);

/// Command-line overrides applied after the file is parsed.
struct ConfigOverrides {
  std::optional<std::string> methods;  // comma-separated list
  std::optional<double> gstop;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> output_dir;
};

void apply_overrides(ExperimentConfig& config, const ConfigOverrides& o);

/// Checks the config invariants; throws kInvalidConfig.
void validate(const ExperimentConfig& config);

/// Parses "inf", "+inf", "infinity" (any case) or a finite number.
double parse_real(const std::string& text);

struct MethodSummary {
  std::string method;
  RunStatus status = RunStatus::kMaxIterations;
  /// Epoch in which the gradient rule fired.
  std::optional<long> epochs_to_gstop;
  double final_grad_norm = 0.0;
  /// Non-empty when the method failed with an error.
  std::string error;
  std::vector<TraceRecord> trace;
};

struct ExperimentResult {
  Vector x0;
  std::uint64_t x0_hash = 0;
  std::optional<Vector> x_star;
  std::vector<MethodSummary> methods;
  bool ok() const;
};

/// Loads or generates the problem, then runs every method. Nothing is
/// written until the problem has been built. Writes <method>.csv,
/// summary.csv and plot.csv into output_dir. Diagnostics go to `log`.
ExperimentResult run_experiment(const ExperimentConfig& config, std::ostream& log);

/// FNV-1a over the bytes of x.
std::uint64_t vector_hash(const Vector& x);

/// Shortest round-trip decimal form.
std::string format_real(double v);

inline constexpr const char* kTraceHeader =
    "t,epoch,grad_norm,normalized_error,sigma_max,wall_ms";

void write_trace_csv(std::ostream& out, const std::vector<TraceRecord>& trace);
std::vector<TraceRecord> read_trace_csv(std::istream& in);

void write_summary_csv(std::ostream& out, const std::vector<MethodSummary>& rows);

struct NamedTrace {
  std::string method;
  std::vector<TraceRecord> trace;
};

struct PlotRow {
  std::string method;
  long epoch = 0;
  double normalized_error = 0.0;
};

inline constexpr double kPlotFloor = 1e-16;

/// One row per (method, epoch) from the last record of the epoch that
/// carries a normalized error. Methods keep their input order; exact zeros
/// are replaced by kPlotFloor.
std::vector<PlotRow> emit_plot_data(const std::vector<NamedTrace>& traces);
void write_plot_csv(std::ostream& out, const std::vector<PlotRow>& rows);

}  // namespace iqn
