#pragma once

// Shared-memory execution of the dual-decomposition iteration.
//
// One coordinator (the calling thread) owns y. Worker threads own contiguous
// chunks of nodes; each sweep they read a published y^j, compute A_i x_i for
// their nodes and publish the chunk tagged with j into a ring of q slots.
// The coordinator builds y^{k+1} from those records:
//
//   sync       waits for records computed from y^k (barrier per iteration)
//   det_async  uses records computed from exactly y^{max(0, k-q+1)}
//   sto_async  uses the freshest record, stalling while it is older than q-1
//
// With threads == 1 everything runs inline on the coordinator, so no
// staleness occurs: every scheme reproduces the serial synchronous sequence.

#include <cstdint>
#include <vector>

#include "dualqp/analysis.hpp"
#include "dualqp/qp.hpp"
#include "dualqp/switched.hpp"

namespace dualqp {

struct ExecutorOptions {
  Scheme scheme = Scheme::Synchronous;
  unsigned threads = 1;
  Index q = 1;
  double tolerance = 1e-5;
  long max_iters = 10000;
  std::uint64_t seed = 0;
  /// Mean of an exponential per-sweep sleep added to every worker, in
  /// microseconds; 0 disables it.
  double jitter_us = 0.0;
  bool record_trace = false;
  /// Project y onto y >= 0 after every update. Never used by the analysis.
  bool clamp_nonnegative = false;
};

struct RunReport {
  Scheme scheme = Scheme::Synchronous;
  unsigned threads = 1;
  long iterations = 0;          // dual updates performed
  double wall_time = 0;         // seconds
  double final_residual = 0;    // ||y^k - y^{k-1}||_inf at stop
  bool converged = false;
  double tolerance = 0;
  std::vector<std::int64_t> observed_age_histogram;          // ages 0..q-1, all nodes
  std::vector<std::vector<std::int64_t>> node_age_histogram;  // [node][age]
  VectorXd y;                                                 // final iterate
  std::vector<double> residual_trace;                         // per iteration, if requested
  std::vector<VectorXd> iterate_trace;                        // y^1, y^2, ... if requested
};

/// Throws std::invalid_argument for threads == 0, q < 1, tolerance <= 0 or
/// a y0 of the wrong size. y0 defaults to zero.
RunReport run(const SeparableQP& qp, const ExecutorOptions& options, const VectorXd& y0 = VectorXd());

/// Observed per-node age frequencies as a delay model.
DelayModel observed_delay_model(const RunReport& report);

struct BenchmarkCell {
  Scheme scheme = Scheme::Synchronous;
  unsigned threads = 1;
  std::vector<RunReport> runs;
  double median_wall_time = 0;
  double speedup = 0;  // serial reference median / this median
};

struct BenchmarkResult {
  double serial_median_wall_time = 0;  // sync scheme, one thread
  std::vector<BenchmarkCell> cells;
};

/// Runs every (scheme, threads) cell `repeats` times.
BenchmarkResult benchmark(const SeparableQP& qp, const std::vector<Scheme>& schemes,
                          const std::vector<unsigned>& thread_counts, int repeats,
                          const ExecutorOptions& base);

}  // namespace dualqp
