#include "dualqp/commands.hpp"

#include <algorithm>
#include <charconv>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include "dualqp/executor.hpp"
#include "dualqp/simulator.hpp"

namespace dualqp {

namespace {

struct LoadedProblem {
  ProblemFile file;
  std::string hash;
};

double parse_number(std::string_view tok, std::string_view what) {
  double v = 0;
  const auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (ec != std::errc() || ptr != tok.data() + tok.size() || tok.empty()) {
    throw std::invalid_argument("malformed " + std::string(what) + " '" + std::string(tok) + "'");
  }
  return v;
}

SeparableQP apply_alpha(const SeparableQP& qp, const AlphaChoice& alpha) {
  if (!alpha.automatic) {
    return qp.with_alpha(alpha.value);
  }
  const auto tuned = tune_step_size(qp, 0.7);
  if (!tuned) {
    throw std::invalid_argument("cannot tune alpha to rho(I - R) = 0.7 on this problem");
  }
  return qp.with_alpha(*tuned);
}

LoadedProblem load_problem(const std::string& path, const std::optional<AlphaChoice>& alpha) {
  if (path.empty()) {
    throw std::invalid_argument("--problem is required");
  }
  ProblemFile file = read_problem(read_text_file(path));
  if (alpha) {
    file.qp = apply_alpha(file.qp, *alpha);
  }
  std::string hash = fnv1a_hex(write_problem(file));
  return {std::move(file), std::move(hash)};
}

DelayModel load_delay(const std::string& path, const ProblemFile& file) {
  const Index nodes = file.qp.num_blocks();
  if (!path.empty()) {
    return read_delay(read_text_file(path), nodes);
  }
  if (file.delay) {
    return *file.delay;
  }
  throw std::invalid_argument("no delay model: pass --delay or embed one in the problem file");
}

void emit(const std::string& path, const std::string& text, std::ostream& out) {
  if (path.empty()) {
    out << text;
  } else {
    write_text_file(path, text);
  }
}

std::string join(const VectorXd& v, char sep = ';') {
  std::string s;
  for (Index i = 0; i < v.size(); ++i) {
    if (i > 0) {
      s += sep;
    }
    s += format_double(v(i));
  }
  return s;
}

template <class T>
std::string join_counts(const std::vector<T>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i > 0) {
      s += ';';
    }
    s += std::to_string(v[i]);
  }
  return s;
}

ExecutorOptions executor_options(Scheme scheme, unsigned threads, Index q, double tol, long max_iters,
                                 std::uint64_t seed, double jitter_us) {
  ExecutorOptions opt;
  opt.scheme = scheme;
  opt.threads = threads;
  opt.q = q;
  opt.tolerance = tol;
  opt.max_iters = max_iters;
  opt.seed = seed;
  opt.jitter_us = jitter_us;
  return opt;
}

}  // namespace

AlphaChoice parse_alpha(const std::string& text) {
  if (text == "auto") {
    return {true, 0};
  }
  const double v = parse_number(text, "alpha");
  if (!(v > 0)) {
    throw std::invalid_argument("alpha must be positive or 'auto'");
  }
  return {false, v};
}

VectorXd parse_y0(const std::string& text, Index m) {
  std::vector<double> values;
  std::string_view rest = text;
  while (true) {
    const std::size_t comma = rest.find(',');
    values.push_back(parse_number(rest.substr(0, comma), "y0"));
    if (comma == std::string_view::npos) {
      break;
    }
    rest.remove_prefix(comma + 1);
  }
  if (values.size() == 1) {
    return VectorXd::Constant(m, values[0]);
  }
  if (static_cast<Index>(values.size()) != m) {
    throw std::invalid_argument("y0 has " + std::to_string(values.size()) + " entries, expected " +
                                std::to_string(m));
  }
  return Eigen::Map<const VectorXd>(values.data(), m);
}

int cmd_gen(const GenArgs& args, std::ostream& out, std::ostream& err) {
  if (args.blocks < 1 || args.block_size < 1 || args.m < 1 || args.q < 1) {
    throw std::invalid_argument("gen: N, n, m and q must be at least 1");
  }
  GeneratorOptions gopt;
  gopt.block_sizes.assign(static_cast<std::size_t>(args.blocks), args.block_size);
  gopt.m = args.m;
  gopt.seed = args.seed;
  gopt.target_rho = args.target_rho;
  if (!args.alpha.automatic) {
    gopt.alpha = args.alpha.value;
  }
  GeneratedProblem gen = generate_problem(gopt);
  if (gen.alpha_rescaled) {
    err << "gen: alpha " << args.alpha.value << " is unstable for this draw, using " << gen.qp.alpha() << '\n';
  }
  ProblemFile file{std::move(gen.qp), args.q, args.seed, std::nullopt};
  if (!args.delay.empty()) {
    file.delay = read_delay(read_text_file(args.delay), args.blocks);
    if (file.delay->q() != args.q) {
      throw std::invalid_argument("gen: delay model q differs from --q");
    }
  }
  emit(args.out, write_problem(file), out);
  return kExitOk;
}

int cmd_analyze(const AnalyzeArgs& args, std::ostream& out, std::ostream& err) {
  const LoadedProblem loaded = load_problem(args.problem, args.alpha);
  const SeparableQP& qp = loaded.file.qp;
  const DelayModel dm = load_delay(args.delay, loaded.file);
  const SwitchedSystem sys = reduce_modes(qp, dm);
  const StabilityReport report = ms_stability(sys);

  std::ostringstream summary;
  summary << "verdict=" << (report.is_ms_convergent ? "stable" : "unstable") << '\n';
  summary << "ms_spectral_radius=" << format_double(report.ms_spectral_radius) << '\n';
  summary << "lambda_spectral_radius=" << format_double(linalg::spectral_radius(report.lambda)) << '\n';
  summary << "sync_spectral_radius=" << format_double(sync_spectral_radius(qp)) << '\n';
  summary << "alpha=" << format_double(qp.alpha()) << '\n';
  summary << "q=" << sys.q << '\n';
  summary << "aggregate_pi=" << join(sys.pi) << '\n';
  if (args.enumerate) {
    const StabilityReport full = ms_stability_enumerated(enumerate_joint_modes(qp, dm), sys);
    summary << "enumerated_ms_spectral_radius=" << format_double(full.ms_spectral_radius) << '\n';
    summary << "enumerated_verdict=" << (full.is_ms_convergent ? "stable" : "unstable") << '\n';
  }

  std::optional<VectorXd> y_star;
  try {
    y_star = closed_form_optimum(qp).y_star;
  } catch (const SingularMatrixError& e) {
    err << "analyze: " << e.what() << '\n';
  }
  if (y_star) {
    summary << "y_star=" << join(*y_star) << '\n';
  }
  if (!report.notes.empty()) {
    summary << "notes=" << report.notes << '\n';
  }
  out << summary.str();

  if (y_star) {
    const VectorXd Y0 = make_augmented_state(parse_y0(args.y0, qp.num_constraints()), sys.q);
    const SchemeEnvelopes env = rate_envelopes(sys, Y0, args.k_max);
    std::ostringstream csv;
    csv << csv_metadata("analyze", loaded.file.seed, loaded.hash);
    csv << "# verdict=" << (report.is_ms_convergent ? "stable" : "unstable")
        << " ms_spectral_radius=" << format_double(report.ms_spectral_radius) << '\n';
    csv << "k,sync,det_async,sto_async\n";
    for (std::size_t k = 0; k < env.sto_async.steps.size(); ++k) {
      csv << env.sto_async.steps[k].k << ',' << format_double(env.synchronous.steps[k].bound) << ','
          << format_double(env.det_async.steps[k].bound) << ',' << format_double(env.sto_async.steps[k].bound)
          << '\n';
    }
    if (!args.out.empty()) {
      write_text_file(args.out, csv.str());
    }
  }

  if (args.require_stable && !report.is_ms_convergent) {
    return kExitUnstable;
  }
  return kExitOk;
}

int cmd_simulate(const SimulateArgs& args, std::ostream& out, std::ostream& err) {
  const LoadedProblem loaded = load_problem(args.problem, args.alpha);
  const SeparableQP& qp = loaded.file.qp;
  const DelayModel dm = load_delay(args.delay, loaded.file);
  const SwitchedSystem sys = reduce_modes(qp, dm);
  const StabilityReport report = ms_stability(sys);
  if (!report.is_ms_convergent) {
    err << "simulate: system is not certified mean-square stable (rho = " << report.ms_spectral_radius
        << ")\n";
  }

  SimConfig cfg;
  cfg.runs = args.runs;
  cfg.k_max = args.k_max;
  cfg.seed = args.seed;
  cfg.y0 = parse_y0(args.y0, qp.num_constraints());
  cfg.record_every = args.record_every;
  cfg.workers = args.threads;
  const TrajectoryEnsemble ens = args.per_node ? simulate_per_node(qp, dm, cfg) : simulate_model(sys, cfg);

  std::ostringstream csv;
  csv << csv_metadata("simulate", args.seed, loaded.hash);
  csv << "# runs=" << ens.num_runs() << " k_max=" << args.k_max << " path=" << (args.per_node ? "per_node" : "model");
  try {
    csv << " y_star=" << join(closed_form_optimum(qp).y_star);
  } catch (const SingularMatrixError&) {
  }
  csv << '\n';
  const Index dim = ens.initial.size();
  csv << 'k';
  for (Index j = 0; j < dim; ++j) {
    csv << ",mean_" << j << ",std_" << j;
  }
  csv << '\n';
  csv << 0;
  for (Index j = 0; j < dim; ++j) {
    csv << ',' << format_double(ens.initial(j)) << ",0";
  }
  csv << '\n';
  for (std::size_t r = 0; r < ens.recorded_k.size(); ++r) {
    csv << ens.recorded_k[r];
    for (Index j = 0; j < dim; ++j) {
      csv << ',' << format_double(ens.mean[r](j)) << ',' << format_double(ens.stddev[r](j));
    }
    csv << '\n';
  }
  emit(args.out, csv.str(), out);

  if (args.require_stable && !report.is_ms_convergent) {
    return kExitUnstable;
  }
  return kExitOk;
}

int cmd_solve(const SolveArgs& args, std::ostream& out, std::ostream& err) {
  const LoadedProblem loaded = load_problem(args.problem, args.alpha);
  const SeparableQP& qp = loaded.file.qp;
  ExecutorOptions opt = executor_options(args.scheme, args.threads, args.q.value_or(loaded.file.q), args.tolerance,
                                         args.max_iters, args.seed, args.jitter_us);
  opt.record_trace = !args.trace.empty();
  const RunReport report = run(qp, opt, parse_y0(args.y0, qp.num_constraints()));

  std::ostringstream csv;
  csv << csv_metadata("solve", args.seed, loaded.hash);
  csv << "scheme,threads,q,iterations,wall_time,final_residual,converged,age_histogram,y\n";
  csv << to_string(report.scheme) << ',' << report.threads << ',' << opt.q << ',' << report.iterations << ','
      << format_double(report.wall_time) << ',' << format_double(report.final_residual) << ','
      << (report.converged ? 1 : 0) << ',' << join_counts(report.observed_age_histogram) << ','
      << join(report.y) << '\n';
  emit(args.out, csv.str(), out);

  if (!args.trace.empty()) {
    std::ostringstream trace;
    trace << csv_metadata("solve", args.seed, loaded.hash);
    trace << "k,residual";
    for (Index j = 0; j < qp.num_constraints(); ++j) {
      trace << ",y_" << j;
    }
    trace << '\n';
    for (std::size_t k = 0; k < report.residual_trace.size(); ++k) {
      trace << k + 1 << ',' << format_double(report.residual_trace[k]);
      for (Index j = 0; j < qp.num_constraints(); ++j) {
        trace << ',' << format_double(report.iterate_trace[k](j));
      }
      trace << '\n';
    }
    write_text_file(args.trace, trace.str());
  }
  if (!args.delay_out.empty()) {
    write_text_file(args.delay_out, write_delay(observed_delay_model(report)));
  }
  if (!report.converged) {
    err << "solve: no convergence after " << report.iterations << " iterations (residual "
        << report.final_residual << ")\n";
    return kExitNotConverged;
  }
  return kExitOk;
}

int cmd_bench(const BenchArgs& args, std::ostream& out, std::ostream& err) {
  const LoadedProblem loaded = load_problem(args.problem, args.alpha);
  const ExecutorOptions base = executor_options(Scheme::Synchronous, 1, args.q.value_or(loaded.file.q),
                                                args.tolerance, args.max_iters, args.seed, args.jitter_us);
  BenchmarkResult result = benchmark(loaded.file.qp, args.schemes, args.threads, args.repeats, base);
  std::stable_sort(result.cells.begin(), result.cells.end(),
                   [](const BenchmarkCell& a, const BenchmarkCell& b) { return a.median_wall_time < b.median_wall_time; });

  std::ostringstream csv;
  csv << csv_metadata("bench", args.seed, loaded.hash);
  csv << "# serial_median_wall_time=" << format_double(result.serial_median_wall_time) << '\n';
  csv << "scheme,threads,repeat,iterations,wall_time,converged,median_wall_time,speedup\n";
  bool all_converged = true;
  for (const BenchmarkCell& cell : result.cells) {
    for (std::size_t r = 0; r < cell.runs.size(); ++r) {
      const RunReport& run_report = cell.runs[r];
      all_converged = all_converged && run_report.converged;
      csv << to_string(cell.scheme) << ',' << cell.threads << ',' << r << ',' << run_report.iterations << ','
          << format_double(run_report.wall_time) << ',' << (run_report.converged ? 1 : 0) << ','
          << format_double(cell.median_wall_time) << ',' << format_double(cell.speedup) << '\n';
    }
  }
  emit(args.out, csv.str(), out);
  if (!all_converged) {
    err << "bench: some runs did not converge\n";
    return kExitNotConverged;
  }
  return kExitOk;
}

}  // namespace dualqp
