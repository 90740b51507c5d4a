#include "iqn/harness.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <istream>
#include <limits>
#include <map>
#include <memory>
#include <ostream>
#include <sstream>

namespace iqn {

namespace {

std::string trim(std::string_view s) {
  std::size_t b = 0;
  std::size_t e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return std::string(s.substr(b, e - b));
}

std::string lower(std::string s) {
  for (char& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

[[noreturn]] void config_error(const std::string& what) {
  throw Error(ErrorCode::kInvalidConfig, what);
}

long parse_integer(const std::string& text) {
  long v = 0;
  const char* end = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(text.data(), end, v);
  if (ec != std::errc() || ptr != end) config_error("expected an integer, got '" + text + "'");
  return v;
}

std::uint64_t parse_unsigned(const std::string& text) {
  std::uint64_t v = 0;
  const char* end = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(text.data(), end, v);
  if (ec != std::errc() || ptr != end) {
    config_error("expected a non-negative integer, got '" + text + "'");
  }
  return v;
}

bool parse_bool(const std::string& text) {
  const std::string v = lower(text);
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  config_error("expected a boolean, got '" + text + "'");
}

std::vector<Method> parse_method_list(const std::string& text) {
  std::vector<Method> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(parse_method(item));
  }
  return out;
}

// Settings shared by every method of an experiment.
struct MethodDefaults {
  std::vector<Method> methods;
  double tau1 = 0.0;
  double tau2 = 0.0;
  AlphaSchedule alpha;
  double beta_scale = 1.0;
  long refresh_period = 0;
  bool record_sigma = false;
  InitCurvature init = InitCurvature::kScaledIdentity;
};

std::vector<SolverConfig> expand(const MethodDefaults& m) {
  std::vector<SolverConfig> out;
  for (Method method : m.methods) {
    SolverConfig c;
    c.method = method;
    c.tau1 = m.tau1;
    c.tau2 = m.tau2;
    c.alpha = m.alpha;
    c.beta_scale = m.beta_scale;
    c.refresh_period = m.refresh_period;
    c.record_sigma = m.record_sigma;
    c.init = m.init;
    out.push_back(c);
  }
  return out;
}

}  // namespace

double parse_real(const std::string& text) {
  const std::string t = lower(trim(text));
  if (t == "inf" || t == "+inf" || t == "infinity" || t == "+infinity") {
    return std::numeric_limits<double>::infinity();
  }
  double v = 0.0;
  const char* begin = t.data();
  if (!t.empty() && t.front() == '+') ++begin;
  const char* end = t.data() + t.size();
  auto [ptr, ec] = std::from_chars(begin, end, v);
  if (ec != std::errc() || ptr != end || t.empty()) {
    config_error("expected a number, got '" + text + "'");
  }
  return v;
}

ExperimentConfig parse_config(std::istream& in) {
  ExperimentConfig cfg;
  MethodDefaults md;
  md.methods = {Method::kSliqn};
  std::string line;
  long line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    const std::string body = trim(line);
    if (body.empty()) continue;
    const auto eq = body.find('=');
    if (eq == std::string::npos) {
      config_error("line " + std::to_string(line_no) + ": expected key = value");
    }
    const std::string key = lower(trim(body.substr(0, eq)));
    const std::string value = trim(body.substr(eq + 1));
    try {
      ProblemSpec& p = cfg.problem;
      if (key == "problem") {
        const std::string v = lower(value);
        if (v == "quadratic") p.kind = ProblemKind::kQuadratic;
        else if (v == "logistic") p.kind = ProblemKind::kLogistic;
        else config_error("unknown problem '" + value + "'");
      } else if (key == "n") {
        p.gen.n = static_cast<std::size_t>(parse_unsigned(value));
      } else if (key == "d") {
        p.gen.d = static_cast<std::size_t>(parse_unsigned(value));
      } else if (key == "xi") {
        p.gen.xi = parse_real(value);
      } else if (key == "b_max") {
        p.gen.b_max = parse_real(value);
      } else if (key == "quadratic_file") {
        p.quadratic_file = value;
      } else if (key == "dataset") {
        p.dataset = value;
      } else if (key == "lambda") {
        p.lambda = parse_real(value);
      } else if (key == "p") {
        p.p = parse_real(value);
      } else if (key == "radius") {
        p.radius = parse_real(value);
      } else if (key == "seed") {
        cfg.seed = parse_unsigned(value);
      } else if (key == "x0_scale") {
        cfg.x0_scale = parse_real(value);
      } else if (key == "output_dir") {
        cfg.output_dir = value;
      } else if (key == "gstop") {
        cfg.gstop = parse_real(value);
      } else if (key == "max_epochs") {
        cfg.max_epochs = parse_integer(value);
      } else if (key == "methods" || key == "method") {
        md.methods = parse_method_list(value);
      } else if (key == "tau1") {
        md.tau1 = parse_real(value);
      } else if (key == "tau2") {
        md.tau2 = parse_real(value);
      } else if (key == "alpha_mode") {
        const std::string v = lower(value);
        if (v == "zero") md.alpha.mode = AlphaMode::kZero;
        else if (v == "geometric") md.alpha.mode = AlphaMode::kGeometric;
        else config_error("unknown alpha_mode '" + value + "'");
      } else if (key == "alpha_epsilon") {
        md.alpha.epsilon = parse_real(value);
      } else if (key == "alpha_rho") {
        md.alpha.rho = parse_real(value);
      } else if (key == "alpha_m_sqrt_l") {
        md.alpha.m_sqrt_l = parse_real(value);
      } else if (key == "beta_scale") {
        md.beta_scale = parse_real(value);
      } else if (key == "refresh_period") {
        md.refresh_period = parse_integer(value);
      } else if (key == "sigma_diagnostics") {
        md.record_sigma = parse_bool(value);
      } else if (key == "init") {
        const std::string v = lower(value);
        if (v == "identity") md.init = InitCurvature::kScaledIdentity;
        else if (v == "hessian") md.init = InitCurvature::kExactHessian;
        else config_error("unknown init '" + value + "'");
      } else {
        config_error("unknown key '" + key + "'");
      }
    } catch (const Error& e) {
      config_error("line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  cfg.problem.gen.seed = cfg.seed;
  cfg.methods = expand(md);
  return cfg;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIo, "cannot open config '" + path + "'");
  return parse_config(in);
}

void apply_overrides(ExperimentConfig& config, const ConfigOverrides& o) {
  if (o.methods) {
    if (config.methods.empty()) config_error("no method template to override");
    const SolverConfig base = config.methods.front();
    config.methods.clear();
    for (Method m : parse_method_list(*o.methods)) {
      SolverConfig c = base;
      c.method = m;
      config.methods.push_back(c);
    }
  }
  if (o.gstop) config.gstop = *o.gstop;
  if (o.seed) {
    config.seed = *o.seed;
    config.problem.gen.seed = *o.seed;
  }
  if (o.output_dir) config.output_dir = *o.output_dir;
}

void validate(const ExperimentConfig& c) {
  if (c.methods.empty()) config_error("at least one method is required");
  if (!(c.x0_scale >= 0.0) || !std::isfinite(c.x0_scale)) {
    config_error("x0_scale must be finite and >= 0");
  }
  if (c.output_dir.empty()) config_error("output_dir must not be empty");
  const ProblemSpec& p = c.problem;
  if (p.kind == ProblemKind::kLogistic) {
    if (p.dataset.empty()) config_error("logistic problems need a dataset path");
    if (p.lambda && !(*p.lambda > 0.0)) config_error("lambda must be positive");
    if (!(p.p > 2.0)) config_error("p must exceed 2");
    if (p.radius && !(*p.radius > 0.0)) config_error("radius must be positive");
  } else if (p.quadratic_file.empty()) {
    if (p.gen.n < 1) config_error("n must be >= 1");
    if (p.gen.d < 2 || p.gen.d % 2 != 0) config_error("d must be even and >= 2");
    if (!(p.gen.xi >= 0.0)) config_error("xi must be >= 0");
    if (!(p.gen.b_max >= 0.0)) config_error("b_max must be >= 0");
  }
  for (SolverConfig m : c.methods) {
    m.gstop = c.gstop;
    m.max_epochs = c.max_epochs;
    validate(m);
  }
}

bool ExperimentResult::ok() const {
  return std::all_of(methods.begin(), methods.end(),
                     [](const MethodSummary& m) { return m.error.empty(); });
}

std::uint64_t vector_hash(const Vector& x) {
  std::uint64_t h = 1469598103934665603ULL;
  for (Eigen::Index k = 0; k < x.size(); ++k) {
    unsigned char bytes[sizeof(double)];
    const double v = x(k);
    std::memcpy(bytes, &v, sizeof(double));
    for (unsigned char b : bytes) {
      h ^= b;
      h *= 1099511628211ULL;
    }
  }
  return h;
}

std::string format_real(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

void write_trace_csv(std::ostream& out, const std::vector<TraceRecord>& trace) {
  out << kTraceHeader << '\n';
  for (const auto& r : trace) {
    out << r.t << ',' << r.epoch << ',' << format_real(r.grad_norm) << ',';
    if (r.normalized_error) out << format_real(*r.normalized_error);
    out << ',';
    if (r.sigma_max) out << format_real(*r.sigma_max);
    out << ',' << format_real(r.wall_ms) << '\n';
  }
}

std::vector<TraceRecord> read_trace_csv(std::istream& in) {
  std::vector<TraceRecord> out;
  std::string line;
  if (!std::getline(in, line) || trim(line) != kTraceHeader) {
    throw Error(ErrorCode::kIo, "trace CSV header mismatch");
  }
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(trim(cell));
    if (cells.size() == 5) cells.emplace_back();
    if (cells.size() != 6) throw Error(ErrorCode::kIo, "bad trace row '" + line + "'");
    TraceRecord r;
    r.t = parse_integer(cells[0]);
    r.epoch = parse_integer(cells[1]);
    r.grad_norm = parse_real(cells[2]);
    if (!cells[3].empty()) r.normalized_error = parse_real(cells[3]);
    if (!cells[4].empty()) r.sigma_max = parse_real(cells[4]);
    r.wall_ms = parse_real(cells[5]);
    out.push_back(r);
  }
  return out;
}

void write_summary_csv(std::ostream& out, const std::vector<MethodSummary>& rows) {
  out << "method,status,epochs_to_gstop,final_grad_norm\n";
  for (const auto& m : rows) {
    out << m.method << ',' << (m.error.empty() ? std::string(status_name(m.status)) : "error")
        << ',';
    if (m.epochs_to_gstop) out << *m.epochs_to_gstop;
    out << ',' << format_real(m.final_grad_norm) << '\n';
  }
}

std::vector<PlotRow> emit_plot_data(const std::vector<NamedTrace>& traces) {
  std::vector<PlotRow> rows;
  for (const auto& nt : traces) {
    std::map<long, double> last;
    for (const auto& r : nt.trace) {
      if (r.normalized_error) last[r.epoch] = *r.normalized_error;
    }
    for (const auto& [epoch, err] : last) {
      rows.push_back({nt.method, epoch, err == 0.0 ? kPlotFloor : err});
    }
  }
  return rows;
}

void write_plot_csv(std::ostream& out, const std::vector<PlotRow>& rows) {
  out << "method,epoch,normalized_error\n";
  for (const auto& r : rows) {
    out << r.method << ',' << r.epoch << ',' << format_real(r.normalized_error) << '\n';
  }
}

namespace {

std::unique_ptr<FiniteSumObjective> build_problem(const ExperimentConfig& cfg,
                                                  const Vector& x0) {
  const ProblemSpec& p = cfg.problem;
  if (p.kind == ProblemKind::kQuadratic) {
    if (!p.quadratic_file.empty()) {
      std::ifstream in(p.quadratic_file);
      if (!in) throw Error(ErrorCode::kIo, "cannot open '" + p.quadratic_file + "'");
      return std::make_unique<QuadraticObjective>(read_quadratic(in));
    }
    return std::make_unique<QuadraticObjective>(generate_quadratic(p.gen));
  }
  LibsvmData data = load_libsvm(p.dataset);
  LogisticProblem prob;
  prob.dim = data.dim;
  prob.lambda = p.lambda.value_or(1.0 / static_cast<double>(data.rows.size()));
  prob.p = p.p;
  prob.rows = std::move(data.rows);
  const double r = p.radius.value_or(10.0 * x0.norm());
  prob.radius = r > 0.0 ? r : 1.0;
  return std::make_unique<LogisticObjective>(std::move(prob));
}

std::size_t problem_dim(const ExperimentConfig& cfg) {
  const ProblemSpec& p = cfg.problem;
  if (p.kind == ProblemKind::kLogistic) return load_libsvm(p.dataset).dim;
  if (!p.quadratic_file.empty()) {
    std::ifstream in(p.quadratic_file);
    if (!in) throw Error(ErrorCode::kIo, "cannot open '" + p.quadratic_file + "'");
    return static_cast<std::size_t>(read_quadratic(in).a_diag.front().size());
  }
  return p.gen.d;
}

// Reference minimizer for logistic problems: NIM driven well past gstop.
Vector logistic_reference(const FiniteSumObjective& obj, const Vector& x0) {
  SolverConfig c;
  c.method = Method::kNim;
  c.gstop = 1e-13;
  c.max_epochs = 500;
  return run(obj, x0, c).x;
}

void write_file(const std::filesystem::path& path,
                const std::function<void(std::ostream&)>& body) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::kIo, "cannot write '" + path.string() + "'");
  body(out);
  if (!out) throw Error(ErrorCode::kIo, "write failed for '" + path.string() + "'");
}

}  // namespace

ExperimentResult run_experiment(const ExperimentConfig& config, std::ostream& log) {
  validate(config);
  ExperimentResult result;
  result.x0 = initial_point(problem_dim(config), config.x0_scale, config.seed);
  result.x0_hash = vector_hash(result.x0);
  const auto objective = build_problem(config, result.x0);
  log << "problem n=" << objective->n() << " d=" << objective->d() << " x0_hash=" << std::hex
      << result.x0_hash << std::dec << '\n';

  if (const auto* q = dynamic_cast<const QuadraticObjective*>(objective.get())) {
    result.x_star = q->minimizer();
  } else {
    result.x_star = logistic_reference(*objective, result.x0);
  }

  const std::filesystem::path dir(config.output_dir);
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw Error(ErrorCode::kIo, "cannot create '" + config.output_dir + "'");

  std::vector<NamedTrace> named;
  for (SolverConfig sc : config.methods) {
    sc.gstop = config.gstop;
    sc.max_epochs = config.max_epochs;
    sc.seed = config.seed;
    MethodSummary ms;
    ms.method = std::string(method_name(sc.method));
    try {
      RunResult rr = run(*objective, result.x0, sc, result.x_star);
      ms.status = rr.status;
      ms.trace = std::move(rr.trace);
    } catch (const StepError& e) {
      ms.error = e.what();
    } catch (const Error& e) {
      ms.error = e.what();
    }
    if (!ms.trace.empty()) ms.final_grad_norm = ms.trace.back().grad_norm;
    if (ms.status == RunStatus::kConverged && !ms.trace.empty()) {
      ms.epochs_to_gstop = ms.trace.back().epoch;
    }
    write_file(dir / (ms.method + ".csv"),
               [&](std::ostream& out) { write_trace_csv(out, ms.trace); });
    log << ms.method << ": "
        << (ms.error.empty() ? std::string(status_name(ms.status)) : "error: " + ms.error)
        << ", steps=" << ms.trace.size() << ", final grad_norm="
        << format_real(ms.final_grad_norm) << '\n';
    named.push_back({ms.method, ms.trace});
    result.methods.push_back(std::move(ms));
  }
  write_file(dir / "summary.csv",
             [&](std::ostream& out) { write_summary_csv(out, result.methods); });
  write_file(dir / "plot.csv",
             [&](std::ostream& out) { write_plot_csv(out, emit_plot_data(named)); });
  return result;
}

}  // namespace iqn
