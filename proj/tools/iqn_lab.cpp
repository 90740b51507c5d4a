#include <fstream>
#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "iqn/data.hpp"
#include "iqn/harness.hpp"
#include "iqn/oracle.hpp"

namespace {

int cmd_run(const std::string& config_path, const iqn::ConfigOverrides& overrides) {
  iqn::ExperimentConfig cfg = iqn::load_config(config_path);
  iqn::apply_overrides(cfg, overrides);
  const iqn::ExperimentResult result = iqn::run_experiment(cfg, std::cerr);
  std::cout << "method,status,epochs_to_gstop,final_grad_norm\n";
  for (const auto& m : result.methods) {
    std::cout << m.method << ','
              << (m.error.empty() ? std::string(iqn::status_name(m.status)) : "error") << ',';
    if (m.epochs_to_gstop) std::cout << *m.epochs_to_gstop;
    std::cout << ',' << iqn::format_real(m.final_grad_norm) << '\n';
  }
  return result.ok() ? 0 : 1;
}

int cmd_gen(const iqn::GeneratorSpec& spec, const std::string& out_path) {
  const iqn::QuadraticComponents q = iqn::generate_quadratic(spec);
  if (out_path.empty() || out_path == "-") {
    iqn::write_quadratic(std::cout, q);
    return 0;
  }
  std::ofstream out(out_path);
  if (!out) throw iqn::Error(iqn::ErrorCode::kIo, "cannot write '" + out_path + "'");
  iqn::write_quadratic(out, q);
  return out ? 0 : 1;
}

int cmd_check(std::uint64_t seed) {
  const auto reports = iqn::oracle::run_check_suite(seed);
  std::size_t failed = 0;
  for (const auto& r : reports) {
    std::cout << (r.passed ? "PASS " : "FAIL ") << r.name
              << " max_deviation=" << iqn::format_real(r.max_deviation)
              << " tolerance=" << iqn::format_real(r.tolerance) << " (" << r.context << ")\n";
    if (!r.passed) ++failed;
  }
  std::cout << "summary passed=" << reports.size() - failed << " failed=" << failed << '\n';
  return failed == 0 ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Incremental quasi-Newton experiment runner"};
  app.require_subcommand(1);

  std::string config_path;
  std::string method;
  std::string gstop_text;
  std::uint64_t seed = 0;
  std::string out_dir;
  auto* run = app.add_subcommand("run", "Run an experiment from a config file");
  run->add_option("--config", config_path, "key=value config file")->required();
  auto* method_opt = run->add_option("--method", method, "Comma-separated method list");
  auto* gstop_opt = run->add_option("--gstop", gstop_text, "Gradient stopping threshold");
  auto* seed_opt = run->add_option("--seed", seed, "Seed for problem and x0");
  auto* out_opt = run->add_option("--out", out_dir, "Output directory");

  iqn::GeneratorSpec spec;
  std::string gen_out;
  auto* gen = app.add_subcommand("gen-quadratic", "Write a synthetic quadratic problem");
  gen->add_option("--n", spec.n, "Number of components")->required();
  gen->add_option("--d", spec.d, "Dimension (even)")->required();
  gen->add_option("--xi", spec.xi, "Condition exponent")->required();
  gen->add_option("--seed", spec.seed, "Seed");
  gen->add_option("--b-max", spec.b_max, "Upper bound of b coordinates");
  gen->add_option("--out", gen_out, "Output file ('-' for stdout)");

  std::uint64_t check_seed = 7;
  auto* check = app.add_subcommand("check", "Run the oracle audit suite");
  check->add_option("--seed", check_seed, "Seed for the audit instances");

  CLI11_PARSE(app, argc, argv);

  try {
    if (run->parsed()) {
      iqn::ConfigOverrides o;
      if (*method_opt) o.methods = method;
      if (*gstop_opt) o.gstop = iqn::parse_real(gstop_text);
      if (*seed_opt) o.seed = seed;
      if (*out_opt) o.output_dir = out_dir;
      return cmd_run(config_path, o);
    }
    if (gen->parsed()) return cmd_gen(spec, gen_out);
    return cmd_check(check_seed);
  } catch (const std::exception& e) {
    std::cerr << "iqn-lab: " << e.what() << '\n';
    return 2;
  }
}
