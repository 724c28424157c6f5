#include "dualqp/simulator.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <deque>
#include <functional>
#include <stdexcept>
#include <thread>

#include "dualqp/rng.hpp"

namespace dualqp {

namespace {

struct RunResult {
  std::vector<VectorXd> records;
  std::vector<std::int64_t> modes;
};

void validate(const SimConfig& cfg, Index m) {
  if (cfg.runs < 1 || cfg.k_max < 1 || cfg.record_every < 1) {
    throw std::invalid_argument("SimConfig: runs, k_max and record_every must be at least 1");
  }
  if (cfg.y0.size() != m) {
    throw std::invalid_argument("SimConfig: y0 has dimension " + std::to_string(cfg.y0.size()) +
                                ", expected " + std::to_string(m));
  }
}

TrajectoryEnsemble run_ensemble(const SimConfig& cfg, Index q, const VectorXd& initial,
                                const std::function<RunResult(Rng&)>& one_run) {
  TrajectoryEnsemble ens;
  ens.seed = cfg.seed;
  ens.initial = initial;
  for (Index k = cfg.record_every; k <= cfg.k_max; k += cfg.record_every) {
    ens.recorded_k.push_back(k);
  }

  std::vector<RunResult> results(static_cast<std::size_t>(cfg.runs));
  std::atomic<Index> next{0};
  const auto worker = [&] {
    for (Index r = next++; r < cfg.runs; r = next++) {
      Rng rng(run_seed(cfg.seed, r));
      results[static_cast<std::size_t>(r)] = one_run(rng);
    }
  };
  const unsigned workers = std::max(1u, std::min<unsigned>(cfg.workers, static_cast<unsigned>(cfg.runs)));
  if (workers == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    pool.reserve(workers);
    for (unsigned t = 0; t < workers; ++t) {
      pool.emplace_back(worker);
    }
  }

  // Reduction in run order keeps statistics independent of the worker count.
  const std::size_t records = ens.recorded_k.size();
  const Index width = initial.size();
  ens.mode_histogram.assign(static_cast<std::size_t>(q), 0);
  ens.mean.assign(records, VectorXd::Zero(width));
  ens.stddev.assign(records, VectorXd::Zero(width));
  ens.runs.reserve(results.size());
  for (RunResult& res : results) {
    for (std::size_t j = 0; j < records; ++j) {
      ens.mean[j] += res.records[j];
    }
    for (Index r = 0; r < q; ++r) {
      ens.mode_histogram[static_cast<std::size_t>(r)] += res.modes[static_cast<std::size_t>(r)];
    }
    ens.runs.push_back(std::move(res.records));
  }
  const double n = static_cast<double>(cfg.runs);
  for (std::size_t j = 0; j < records; ++j) {
    ens.mean[j] /= n;
  }
  if (cfg.runs > 1) {
    for (const auto& run : ens.runs) {
      for (std::size_t j = 0; j < records; ++j) {
        ens.stddev[j] += (run[j] - ens.mean[j]).cwiseAbs2();
      }
    }
    for (std::size_t j = 0; j < records; ++j) {
      ens.stddev[j] = (ens.stddev[j] / (n - 1.0)).cwiseSqrt();
    }
  }
  return ens;
}

}  // namespace

std::uint64_t run_seed(std::uint64_t master, Index run) {
  return split_seed(master, static_cast<std::uint64_t>(run));
}

TrajectoryEnsemble simulate_model(const SwitchedSystem& sys, const SimConfig& cfg) {
  validate(cfg, sys.m);
  const AugmentedState y_init = make_augmented_state(cfg.y0, sys.q);
  const Index width = cfg.record_full_state ? sys.state_dim() : sys.m;

  const auto one_run = [&](Rng& rng) {
    RunResult res;
    res.modes.assign(static_cast<std::size_t>(sys.q), 0);
    res.records.reserve(static_cast<std::size_t>(cfg.k_max / cfg.record_every));
    AugmentedState Y = y_init;
    for (Index k = 1; k <= cfg.k_max; ++k) {
      const Index mode = sample_mode(sys.pi, rng);
      ++res.modes[static_cast<std::size_t>(mode)];
      Y = step(sys, Y, mode);
      if (k % cfg.record_every == 0) {
        res.records.push_back(Y.head(width));
      }
    }
    return res;
  };
  return run_ensemble(cfg, sys.q, y_init.head(width), one_run);
}

TrajectoryEnsemble simulate_per_node(const SeparableQP& qp, const DelayModel& dm, const SimConfig& cfg) {
  const Index m = qp.num_constraints();
  validate(cfg, m);
  if (dm.num_nodes() != qp.num_blocks()) {
    throw std::invalid_argument("simulate_per_node: delay model node count mismatch");
  }
  const Index q = dm.q();
  const Index nodes = qp.num_blocks();
  const Index width = cfg.record_full_state ? q * m : m;
  const VectorXd node_share_b = qp.b() / static_cast<double>(nodes);
  const double alpha = qp.alpha();

  // Per-node cumulative distributions for inverse-CDF sampling.
  std::vector<VectorXd> cdf;
  cdf.reserve(static_cast<std::size_t>(nodes));
  for (Index i = 0; i < nodes; ++i) {
    VectorXd c(q);
    double acc = 0.0;
    for (Index a = 0; a < q; ++a) {
      acc += dm.node(i)(a);
      c(a) = acc;
    }
    cdf.push_back(c);
  }

  const auto stack = [&](const std::deque<VectorXd>& history) {
    VectorXd Y(width);
    for (Index j = 0; j * m < width; ++j) {
      Y.segment(j * m, m) = history[static_cast<std::size_t>(j)];
    }
    return Y;
  };

  const auto one_run = [&](Rng& rng) {
    RunResult res;
    res.modes.assign(static_cast<std::size_t>(q), 0);
    // history[a] = y^{k-a}
    std::deque<VectorXd> history(static_cast<std::size_t>(q), cfg.y0);
    for (Index k = 1; k <= cfg.k_max; ++k) {
      Index oldest = 0;
      for (Index i = 0; i < nodes; ++i) {
        const double u = uniform01(rng);
        const VectorXd& c = cdf[static_cast<std::size_t>(i)];
        Index age = 0;
        while (age + 1 < q && !(u < c(age))) {
          ++age;
        }
        oldest = std::max(oldest, age);
      }
      ++res.modes[static_cast<std::size_t>(oldest)];
      const VectorXd& stale = history[static_cast<std::size_t>(oldest)];
      VectorXd y_next = history.front();
      for (Index i = 0; i < nodes; ++i) {
        y_next += alpha * block_contribution(qp, i, stale) - alpha * node_share_b;
      }
      history.pop_back();
      history.push_front(std::move(y_next));
      if (k % cfg.record_every == 0) {
        res.records.push_back(stack(history));
      }
    }
    return res;
  };
  return run_ensemble(cfg, q, stack(std::deque<VectorXd>(static_cast<std::size_t>(q), cfg.y0)), one_run);
}

}  // namespace dualqp
