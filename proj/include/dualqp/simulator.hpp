#pragma once

// Monte Carlo ensembles of the stochastic asynchronous dual iteration at the
// model level (no threads involved in the dynamics).

#include <cstdint>
#include <vector>

#include "dualqp/qp.hpp"
#include "dualqp/switched.hpp"

namespace dualqp {

struct SimConfig {
  Index runs = 100;
  Index k_max = 100;
  std::uint64_t seed = 0;
  VectorXd y0;             // length m
  Index record_every = 1;
  bool record_full_state = false;  // record all q blocks of Y, not just y
  unsigned workers = 1;    // threads used to run the ensemble
};

struct TrajectoryEnsemble {
  std::vector<Index> recorded_k;               // record_every, 2 record_every, ...
  VectorXd initial;                            // recorded coordinates at k = 0
  std::vector<std::vector<VectorXd>> runs;     // [run][record]
  std::vector<VectorXd> mean;                  // per record
  std::vector<VectorXd> stddev;                // sample std (0 when runs == 1)
  std::vector<std::int64_t> mode_histogram;    // counts per mode
  std::uint64_t seed = 0;

  Index num_runs() const { return static_cast<Index>(runs.size()); }
};

/// Seed of run `run`: split_seed(master, run).
std::uint64_t run_seed(std::uint64_t master, Index run);

/// Samples sigma_k i.i.d. from sys.pi and evolves Y+ = W_sigma Y + C.
TrajectoryEnsemble simulate_model(const SwitchedSystem& sys, const SimConfig& cfg);

/// Per-node simulation: each step samples every node's age from its own
/// distribution, takes the oldest age xi, recomputes every block's primal
/// update from y^{k - xi} and applies the asynchronous dual update.
TrajectoryEnsemble simulate_per_node(const SeparableQP& qp, const DelayModel& dm, const SimConfig& cfg);

}  // namespace dualqp
