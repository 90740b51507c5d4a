#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>

#include "iqn/harness.hpp"

using namespace iqn;
namespace fs = std::filesystem;

namespace {

ExperimentConfig parse(const std::string& text) {
  std::istringstream in(text);
  return parse_config(in);
}

fs::path fresh_dir(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("iqn_harness_" + name);
  fs::remove_all(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::size_t count_lines(const fs::path& p) {
  std::ifstream in(p);
  std::size_t n = 0;
  std::string line;
  while (std::getline(in, line)) ++n;
  return n;
}

// Drops the wall_ms column so traces can be compared across runs.
std::string strip_wall(const std::string& csv) {
  std::istringstream in(csv);
  std::string line;
  std::string out;
  while (std::getline(in, line)) out += line.substr(0, line.rfind(',')) + '\n';
  return out;
}

}  // namespace

TEST_CASE("config grammar") {
  const auto c = parse(
      "# comment\n"
      "problem = quadratic\n"
      "n = 4\n d=6 \n"
      "xi = 1.5   # trailing\n"
      "b_max = 20\n"
      "seed = 9\n"
      "methods = IQN, sliqn, G-SLIQN\n"
      "gstop = inf\n"
      "max_epochs = 3\n"
      "tau1 = 0.25\n"
      "alpha_mode = geometric\n"
      "alpha_epsilon = 0.1\n"
      "refresh_period = 50\n"
      "sigma_diagnostics = true\n"
      "output_dir = out\n");
  CHECK(c.problem.kind == ProblemKind::kQuadratic);
  CHECK(c.problem.gen.n == 4);
  CHECK(c.problem.gen.d == 6);
  CHECK(c.problem.gen.xi == 1.5);
  CHECK(c.problem.gen.b_max == 20.0);
  CHECK(c.problem.gen.seed == 9);
  REQUIRE(c.methods.size() == 3);
  CHECK(c.methods[0].method == Method::kIqn);
  CHECK(c.methods[2].method == Method::kGsliqn);
  CHECK(c.methods[1].tau1 == 0.25);
  CHECK(c.methods[1].alpha.mode == AlphaMode::kGeometric);
  CHECK(c.methods[1].refresh_period == 50);
  CHECK(c.methods[1].record_sigma);
  CHECK(std::isinf(c.gstop));
  CHECK(c.max_epochs == 3);
  CHECK(c.output_dir == "out");
}

TEST_CASE("config errors name the line") {
  try {
    parse("n = 4\nbogus = 1\n");
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(std::string(e.what()).find("line 2") != std::string::npos);
  }
  CHECK_THROWS_AS(parse("n 4\n"), Error);
  CHECK_THROWS_AS(parse("gstop = fast\n"), Error);
  CHECK_THROWS_AS(parse("methods = SBFGS\n"), Error);
}

TEST_CASE("overrides") {
  auto c = parse("methods = IQN\ntau2 = 0.5\n");
  ConfigOverrides o;
  o.methods = "SLIQN,NIM";
  o.gstop = 1e-6;
  o.seed = 5;
  o.output_dir = "elsewhere";
  apply_overrides(c, o);
  REQUIRE(c.methods.size() == 2);
  CHECK(c.methods[0].method == Method::kSliqn);
  CHECK(c.methods[1].tau2 == 0.5);
  CHECK(c.gstop == 1e-6);
  CHECK(c.seed == 5);
  CHECK(c.problem.gen.seed == 5);
  CHECK(c.output_dir == "elsewhere");
}

TEST_CASE("parse_real") {
  CHECK(std::isinf(parse_real("Infinity")));
  CHECK(parse_real("+1e-3") == 1e-3);
  CHECK(parse_real(" -2.5 ") == -2.5);
  CHECK_THROWS_AS(parse_real(""), Error);
}

TEST_CASE("trace CSV round trip") {
  std::vector<TraceRecord> t(2);
  t[0] = {1, 1, 0.5, 0.25, std::nullopt, 0.125};
  t[1] = {2, 1, 0.1, std::nullopt, 3.0, 0.5};
  std::stringstream io;
  write_trace_csv(io, t);
  CHECK(io.str() == "t,epoch,grad_norm,normalized_error,sigma_max,wall_ms\n"
                    "1,1,0.5,0.25,,0.125\n"
                    "2,1,0.1,,3,0.5\n");
  const auto back = read_trace_csv(io);
  REQUIRE(back.size() == 2);
  CHECK(back[0].normalized_error == 0.25);
  CHECK_FALSE(back[0].sigma_max.has_value());
  CHECK(back[1].sigma_max == 3.0);
}

TEST_CASE("plot data uses the last record of each epoch") {
  std::vector<TraceRecord> a;
  const double errs[] = {0.9, 0.5, 0.4, 0.3, 0.2, 0.0};
  for (long t = 1; t <= 6; ++t) {
    TraceRecord r;
    r.t = t;
    r.epoch = (t + 1) / 2;
    r.normalized_error = errs[t - 1];
    a.push_back(r);
  }
  std::vector<TraceRecord> b(a.begin(), a.begin() + 2);
  const auto rows = emit_plot_data({{"SLIQN", a}, {"IQN", b}});
  REQUIRE(rows.size() == 4);
  CHECK(rows[0].method == "SLIQN");
  CHECK(rows[0].normalized_error == 0.5);
  CHECK(rows[1].normalized_error == 0.3);
  CHECK(rows[2].normalized_error == kPlotFloor);
  CHECK(rows[3].method == "IQN");
  CHECK(rows[3].epoch == 1);
  std::ostringstream out;
  write_plot_csv(out, rows);
  CHECK(out.str().rfind("method,epoch,normalized_error\n", 0) == 0);
}

TEST_CASE("run_experiment writes one CSV per method plus summary and plot") {
  const fs::path dir = fresh_dir("basic");
  auto c = parse("n = 5\nd = 6\nxi = 1\nb_max = 10\nmethods = IQN, SLIQN\n"
                 "gstop = inf\nmax_epochs = 1\n");
  c.output_dir = dir.string();
  std::ostringstream log;
  const auto r = run_experiment(c, log);
  CHECK(r.ok());
  CHECK(count_lines(dir / "IQN.csv") == 6);
  CHECK(count_lines(dir / "SLIQN.csv") == 6);
  CHECK(slurp(dir / "summary.csv").rfind("method,status,epochs_to_gstop,final_grad_norm\n", 0) ==
        0);
  CHECK(count_lines(dir / "plot.csv") == 3);
  CHECK(log.str().find("x0_hash=") != std::string::npos);
}

TEST_CASE("run_experiment is deterministic apart from wall time") {
  auto c = parse("n = 6\nd = 8\nxi = 2\nb_max = 10\nmethods = SLIQN\ngstop = 1e-8\n");
  std::ostringstream log;
  const fs::path d1 = fresh_dir("det1");
  const fs::path d2 = fresh_dir("det2");
  c.output_dir = d1.string();
  const auto r1 = run_experiment(c, log);
  c.output_dir = d2.string();
  const auto r2 = run_experiment(c, log);
  CHECK(r1.x0_hash == r2.x0_hash);
  CHECK(strip_wall(slurp(d1 / "SLIQN.csv")) == strip_wall(slurp(d2 / "SLIQN.csv")));
  CHECK(slurp(d1 / "summary.csv") == slurp(d2 / "summary.csv"));
  REQUIRE(r1.methods[0].epochs_to_gstop.has_value());
}

TEST_CASE("missing dataset fails without writing CSVs") {
  const fs::path dir = fresh_dir("missing");
  auto c = parse("problem = logistic\ndataset = /nonexistent/data.libsvm\nmethods = SLIQN\n");
  c.output_dir = dir.string();
  std::ostringstream log;
  CHECK_THROWS_AS(run_experiment(c, log), Error);
  CHECK_FALSE(fs::exists(dir));
}

TEST_CASE("logistic experiment on the bundled dataset subset") {
  const fs::path dir = fresh_dir("logistic");
  auto c = parse("problem = logistic\nmethods = SLIQN, NIM\ngstop = 1e-6\nmax_epochs = 50\n");
  c.problem.dataset = std::string(IQN_TEST_DATA_DIR) + "/breast_cancer_scale.libsvm";
  c.output_dir = dir.string();
  std::ostringstream log;
  const auto r = run_experiment(c, log);
  CHECK(r.ok());
  for (const auto& m : r.methods) CHECK(m.status == RunStatus::kConverged);
}

TEST_CASE("a diverging method is recorded without failing siblings") {
  const fs::path dir = fresh_dir("diverge");
  auto c = parse("problem = logistic\nmethods = SIQN, NIM\ngstop = 1e-6\nmax_epochs = 5\n");
  c.problem.dataset = std::string(IQN_TEST_DATA_DIR) + "/breast_cancer_scale.libsvm";
  c.output_dir = dir.string();
  // An absurd beta multiplier makes SIQN's curvature blow up.
  c.methods[0].beta_scale = 1e300;
  std::ostringstream log;
  const auto r = run_experiment(c, log);
  CHECK(r.methods[1].status == RunStatus::kConverged);
  CHECK((r.methods[0].status != RunStatus::kConverged || !r.methods[0].error.empty()));
  CHECK(fs::exists(dir / "SIQN.csv"));
}
