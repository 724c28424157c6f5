#pragma once

// Batch subcommands behind the dualqp tool. Each returns a process exit
// code and writes human-readable output to `out`, diagnostics to `err`.

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "dualqp/analysis.hpp"
#include "dualqp/io.hpp"

namespace dualqp {

enum ExitCode : int {
  kExitOk = 0,
  kExitNotConverged = 2,
  kExitUnstable = 3,
  kExitInputError = 4,
};

/// "auto" or a positive number.
struct AlphaChoice {
  bool automatic = false;
  double value = 0;
};
AlphaChoice parse_alpha(const std::string& text);

/// "2" broadcasts to every coordinate, "1,2,3" gives them explicitly.
VectorXd parse_y0(const std::string& text, Index m);

struct GenArgs {
  Index blocks = 2;
  Index block_size = 1;
  Index m = 1;
  Index q = 1;
  AlphaChoice alpha{true, 0};
  double target_rho = 0.7;
  std::uint64_t seed = 0;
  std::string delay;  // optional delay file to embed
  std::string out;
};

struct AnalyzeArgs {
  std::string problem;
  std::string delay;
  std::optional<AlphaChoice> alpha;
  Index k_max = 100;
  std::string y0 = "0";
  bool enumerate = false;
  bool require_stable = false;
  std::string out;  // envelope CSV
};

struct SimulateArgs {
  std::string problem;
  std::string delay;
  std::optional<AlphaChoice> alpha;
  Index runs = 100;
  Index k_max = 100;
  std::string y0 = "2";
  Index record_every = 1;
  std::uint64_t seed = 0;
  unsigned threads = 1;
  bool per_node = false;
  bool require_stable = false;
  std::string out;
};

struct SolveArgs {
  std::string problem;
  std::optional<AlphaChoice> alpha;
  Scheme scheme = Scheme::Synchronous;
  unsigned threads = 1;
  std::optional<Index> q;
  double tolerance = 1e-5;
  long max_iters = 10000;
  std::uint64_t seed = 0;
  double jitter_us = 0;
  std::string y0 = "0";
  std::string trace;      // per-iteration residual CSV
  std::string delay_out;  // observed staleness as a delay file
  std::string out;
};

struct BenchArgs {
  std::string problem;
  std::optional<AlphaChoice> alpha;
  std::vector<Scheme> schemes{Scheme::Synchronous, Scheme::DetAsync, Scheme::StoAsync};
  std::vector<unsigned> threads{1};
  int repeats = 3;
  std::optional<Index> q;
  double tolerance = 1e-5;
  long max_iters = 10000;
  std::uint64_t seed = 0;
  double jitter_us = 0;
  std::string out;
};

int cmd_gen(const GenArgs& args, std::ostream& out, std::ostream& err);
int cmd_analyze(const AnalyzeArgs& args, std::ostream& out, std::ostream& err);
int cmd_simulate(const SimulateArgs& args, std::ostream& out, std::ostream& err);
int cmd_solve(const SolveArgs& args, std::ostream& out, std::ostream& err);
int cmd_bench(const BenchArgs& args, std::ostream& out, std::ostream& err);

}  // namespace dualqp
