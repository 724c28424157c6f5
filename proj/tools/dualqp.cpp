// dualqp: generate, analyze, simulate, solve and benchmark separable QPs
// solved by (a)synchronous dual decomposition.

#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "dualqp/commands.hpp"

namespace {

using namespace dualqp;

std::vector<Scheme> parse_schemes(const std::vector<std::string>& names) {
  std::vector<Scheme> out;
  for (const auto& n : names) {
    out.push_back(parse_scheme(n));
  }
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Dual decomposition for separable QPs with bounded-staleness asynchrony"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(kToolVersion));

  GenArgs gen;
  std::string gen_alpha = "auto";
  auto* gen_cmd = app.add_subcommand("gen", "Generate a random problem file");
  gen_cmd->add_option("--N", gen.blocks, "Number of blocks")->check(CLI::PositiveNumber);
  gen_cmd->add_option("--n", gen.block_size, "Variables per block")->check(CLI::PositiveNumber);
  gen_cmd->add_option("--m", gen.m, "Coupling constraints")->check(CLI::PositiveNumber);
  gen_cmd->add_option("--q", gen.q, "Maximum delay")->check(CLI::PositiveNumber);
  gen_cmd->add_option("--alpha", gen_alpha, "Step size or 'auto'");
  gen_cmd->add_option("--target-rho", gen.target_rho, "rho(I - R) targeted by --alpha auto");
  gen_cmd->add_option("--seed", gen.seed);
  gen_cmd->add_option("--delay", gen.delay, "Delay file to embed");
  gen_cmd->add_option("--out", gen.out, "Output path (stdout if omitted)");

  AnalyzeArgs analyze;
  std::string analyze_alpha;
  auto* analyze_cmd = app.add_subcommand("analyze", "Mean-square stability and rate envelopes");
  analyze_cmd->add_option("--problem", analyze.problem)->required();
  analyze_cmd->add_option("--delay", analyze.delay);
  analyze_cmd->add_option("--alpha", analyze_alpha, "Override the stored step size ('auto' to retune)");
  analyze_cmd->add_option("--kmax", analyze.k_max, "Envelope horizon")->check(CLI::NonNegativeNumber);
  analyze_cmd->add_option("--y0", analyze.y0, "Initial dual value, scalar or comma list");
  analyze_cmd->add_flag("--enumerate", analyze.enumerate, "Also check against the full joint-mode system");
  analyze_cmd->add_flag("--require-stable", analyze.require_stable, "Exit 3 if not mean-square stable");
  analyze_cmd->add_option("--out", analyze.out, "Envelope CSV path");

  SimulateArgs sim;
  std::string sim_alpha;
  auto* sim_cmd = app.add_subcommand("simulate", "Monte Carlo ensemble of the stochastic iteration");
  sim_cmd->add_option("--problem", sim.problem)->required();
  sim_cmd->add_option("--delay", sim.delay);
  sim_cmd->add_option("--alpha", sim_alpha);
  sim_cmd->add_option("--runs", sim.runs)->check(CLI::PositiveNumber);
  sim_cmd->add_option("--kmax", sim.k_max)->check(CLI::NonNegativeNumber);
  sim_cmd->add_option("--y0", sim.y0);
  sim_cmd->add_option("--record-every", sim.record_every)->check(CLI::PositiveNumber);
  sim_cmd->add_option("--seed", sim.seed);
  sim_cmd->add_option("--threads", sim.threads, "Threads running the ensemble")->check(CLI::PositiveNumber);
  sim_cmd->add_flag("--per-node", sim.per_node, "Sample every node's delay instead of the reduced modes");
  sim_cmd->add_flag("--require-stable", sim.require_stable);
  sim_cmd->add_option("--out", sim.out);

  SolveArgs solve;
  std::string solve_alpha;
  std::string solve_scheme = "sync";
  Index solve_q = 0;
  auto* solve_cmd = app.add_subcommand("solve", "Run the multithreaded solver once");
  solve_cmd->add_option("--problem", solve.problem)->required();
  solve_cmd->add_option("--alpha", solve_alpha);
  solve_cmd->add_option("--scheme", solve_scheme, "sync, det_async or sto_async");
  solve_cmd->add_option("--threads", solve.threads)->check(CLI::PositiveNumber);
  solve_cmd->add_option("--q", solve_q, "Maximum delay (default: from the problem file)");
  solve_cmd->add_option("--tol", solve.tolerance);
  solve_cmd->add_option("--max-iters", solve.max_iters)->check(CLI::PositiveNumber);
  solve_cmd->add_option("--seed", solve.seed);
  solve_cmd->add_option("--jitter-us", solve.jitter_us, "Mean random worker delay per sweep");
  solve_cmd->add_option("--y0", solve.y0);
  solve_cmd->add_option("--trace", solve.trace, "Per-iteration residual CSV");
  solve_cmd->add_option("--delay-out", solve.delay_out, "Write observed staleness as a delay file");
  solve_cmd->add_option("--out", solve.out);

  BenchArgs bench;
  std::string bench_alpha;
  std::vector<std::string> bench_schemes{"sync", "det_async", "sto_async"};
  Index bench_q = 0;
  auto* bench_cmd = app.add_subcommand("bench", "Wall-time comparison of the schemes");
  bench_cmd->add_option("--problem", bench.problem)->required();
  bench_cmd->add_option("--alpha", bench_alpha);
  bench_cmd->add_option("--schemes", bench_schemes)->delimiter(',');
  bench_cmd->add_option("--threads", bench.threads)->delimiter(',')->check(CLI::PositiveNumber);
  bench_cmd->add_option("--repeats", bench.repeats)->check(CLI::PositiveNumber);
  bench_cmd->add_option("--q", bench_q);
  bench_cmd->add_option("--tol", bench.tolerance);
  bench_cmd->add_option("--max-iters", bench.max_iters)->check(CLI::PositiveNumber);
  bench_cmd->add_option("--seed", bench.seed);
  bench_cmd->add_option("--jitter-us", bench.jitter_us);
  bench_cmd->add_option("--out", bench.out);

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitInputError;
  }

  try {
    if (gen_cmd->parsed()) {
      gen.alpha = parse_alpha(gen_alpha);
      return cmd_gen(gen, std::cout, std::cerr);
    }
    if (analyze_cmd->parsed()) {
      if (!analyze_alpha.empty()) analyze.alpha = parse_alpha(analyze_alpha);
      return cmd_analyze(analyze, std::cout, std::cerr);
    }
    if (sim_cmd->parsed()) {
      if (!sim_alpha.empty()) sim.alpha = parse_alpha(sim_alpha);
      return cmd_simulate(sim, std::cout, std::cerr);
    }
    if (solve_cmd->parsed()) {
      if (!solve_alpha.empty()) solve.alpha = parse_alpha(solve_alpha);
      if (solve_q > 0) solve.q = solve_q;
      solve.scheme = parse_scheme(solve_scheme);
      return cmd_solve(solve, std::cout, std::cerr);
    }
    if (bench_cmd->parsed()) {
      if (!bench_alpha.empty()) bench.alpha = parse_alpha(bench_alpha);
      if (bench_q > 0) bench.q = bench_q;
      bench.schemes = parse_schemes(bench_schemes);
      return cmd_bench(bench, std::cout, std::cerr);
    }
  } catch (const std::exception& e) {
    std::cerr << "dualqp: " << e.what() << '\n';
    return kExitInputError;
  }
  return kExitInputError;
}
