#include "dualqp/executor.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <memory>
#include <stdexcept>
#include <thread>

#include "dualqp/rng.hpp"

namespace dualqp {

namespace {

using Clock = std::chrono::steady_clock;

struct Chunk {
  Index lo = 0;
  Index hi = 0;
  std::atomic<std::int64_t> published{-1};
};

/// State shared between the coordinator and the workers. Every transfer
/// goes through `latest` (y history) and `Chunk::published` (contributions)
/// with release/acquire ordering.
class SharedRun {
 public:
  SharedRun(const SeparableQP& qp, const ExecutorOptions& opt, unsigned chunks)
      : qp_(qp),
        opt_(opt),
        q_(opt.q),
        history_size_(2 * opt.q + 2),
        y_history_(static_cast<std::size_t>(history_size_)),
        contributions_(static_cast<std::size_t>(opt.q), MatrixXd::Zero(qp.num_constraints(), qp.num_blocks())),
        chunks_(chunks) {
    const Index n = qp.num_blocks();
    for (unsigned c = 0; c < chunks; ++c) {
      chunks_[c].lo = n * static_cast<Index>(c) / static_cast<Index>(chunks);
      chunks_[c].hi = n * static_cast<Index>(c + 1) / static_cast<Index>(chunks);
    }
  }

  unsigned num_chunks() const { return static_cast<unsigned>(chunks_.size()); }
  Chunk& chunk(unsigned c) { return chunks_[c]; }

  void publish_y(std::int64_t index, const VectorXd& y) {
    y_history_[static_cast<std::size_t>(index % history_size_)] = y;
    latest_.store(index, std::memory_order_release);
    latest_.notify_all();
  }

  void stop() {
    stop_.store(true, std::memory_order_seq_cst);
    latest_.fetch_add(1, std::memory_order_seq_cst);
    latest_.notify_all();
  }

  const MatrixXd& contributions(std::int64_t index) const {
    return contributions_[static_cast<std::size_t>(index % q_)];
  }

  /// Blocks until chunk c has published an index >= need; returns the
  /// freshest published index.
  std::int64_t wait_for(unsigned c, std::int64_t need) {
    std::atomic<std::int64_t>& pub = chunks_[c].published;
    std::int64_t p = pub.load(std::memory_order_acquire);
    while (p < need) {
      pub.wait(p, std::memory_order_acquire);
      p = pub.load(std::memory_order_acquire);
    }
    return p;
  }

  void worker(unsigned c) {
    Chunk& chunk = chunks_[c];
    Rng jitter_rng = make_stream(opt_.seed, c);
    VectorXd scratch;
    std::int64_t next = 0;
    while (true) {
      const std::int64_t latest = latest_.load(std::memory_order_acquire);
      if (stop_.load(std::memory_order_acquire)) {
        return;
      }
      std::int64_t target = next;
      if (opt_.scheme == Scheme::StoAsync) {
        target = std::max(next, latest);
      }
      if (target > latest) {
        latest_.wait(latest, std::memory_order_acquire);
        continue;
      }
      const VectorXd& y = y_history_[static_cast<std::size_t>(target % history_size_)];
      MatrixXd& slot = contributions_[static_cast<std::size_t>(target % q_)];
      for (Index i = chunk.lo; i < chunk.hi; ++i) {
        qp_.contribution_into(i, y, slot.col(i), scratch);
      }
      if (opt_.jitter_us > 0.0) {
        const double us = -opt_.jitter_us * std::log(1.0 - uniform01(jitter_rng));
        std::this_thread::sleep_for(std::chrono::duration<double, std::micro>(us));
      }
      chunk.published.store(target, std::memory_order_release);
      chunk.published.notify_all();
      next = target + 1;
    }
  }

 private:
  const SeparableQP& qp_;
  const ExecutorOptions& opt_;
  const Index q_;
  const Index history_size_;
  std::vector<VectorXd> y_history_;
  std::vector<MatrixXd> contributions_;  // [slot] m x N, column per node
  std::vector<Chunk> chunks_;
  std::atomic<std::int64_t> latest_{0};
  std::atomic<bool> stop_{false};
};

void validate(const SeparableQP& qp, const ExecutorOptions& opt, const VectorXd& y0) {
  if (opt.threads == 0) {
    throw std::invalid_argument("run: threads must be at least 1");
  }
  if (opt.q < 1) {
    throw std::invalid_argument("run: q must be at least 1");
  }
  if (!(opt.tolerance > 0)) {
    throw std::invalid_argument("run: tolerance must be positive");
  }
  if (opt.max_iters < 1) {
    throw std::invalid_argument("run: max_iters must be at least 1");
  }
  if (y0.size() != qp.num_constraints()) {
    throw std::invalid_argument("run: y0 has the wrong dimension");
  }
}

/// Coordinator side of one dual update; returns the residual.
double advance(const SeparableQP& qp, const ExecutorOptions& opt, const VectorXd& sum_contrib, VectorXd& y,
               RunReport& report) {
  VectorXd next = y + qp.alpha() * (sum_contrib - qp.b());
  if (opt.clamp_nonnegative) {
    next = next.cwiseMax(0.0);
  }
  const double residual = (next - y).cwiseAbs().maxCoeff();
  y = std::move(next);
  if (opt.record_trace) {
    report.residual_trace.push_back(residual);
    report.iterate_trace.push_back(y);
  }
  return residual;
}

void run_inline(const SeparableQP& qp, const ExecutorOptions& opt, VectorXd y, RunReport& report) {
  const Index m = qp.num_constraints();
  const Index n = qp.num_blocks();
  MatrixXd contrib(m, n);
  VectorXd scratch;
  VectorXd sum(m);
  for (long k = 0; k < opt.max_iters; ++k) {
    for (Index i = 0; i < n; ++i) {
      qp.contribution_into(i, y, contrib.col(i), scratch);
    }
    sum.setZero();
    for (Index i = 0; i < n; ++i) {
      sum += contrib.col(i);
    }
    report.observed_age_histogram[0] += n;
    report.final_residual = advance(qp, opt, sum, y, report);
    report.iterations = k + 1;
    if (report.final_residual <= opt.tolerance) {
      report.converged = true;
      break;
    }
  }
  for (auto& node : report.node_age_histogram) {
    node[0] = report.iterations;
  }
  report.y = std::move(y);
}

void run_threaded(const SeparableQP& qp, const ExecutorOptions& opt, VectorXd y, RunReport& report) {
  const Index m = qp.num_constraints();
  const Index n = qp.num_blocks();
  const Index q = opt.q;
  const unsigned chunks = static_cast<unsigned>(std::min<Index>(opt.threads, n));
  SharedRun shared(qp, opt, chunks);
  shared.publish_y(0, y);

  std::vector<std::vector<std::int64_t>> chunk_ages(chunks, std::vector<std::int64_t>(static_cast<std::size_t>(q), 0));
  std::vector<std::int64_t> used(chunks, 0);
  VectorXd sum(m);
  {
    std::vector<std::jthread> pool;
    pool.reserve(chunks);
    for (unsigned c = 0; c < chunks; ++c) {
      pool.emplace_back([&shared, c] { shared.worker(c); });
    }

    for (long k = 0; k < opt.max_iters; ++k) {
      const std::int64_t oldest_allowed = std::max<std::int64_t>(0, k - q + 1);
      for (unsigned c = 0; c < chunks; ++c) {
        const std::int64_t need = opt.scheme == Scheme::Synchronous ? k : oldest_allowed;
        const std::int64_t freshest = shared.wait_for(c, need);
        used[c] = opt.scheme == Scheme::DetAsync ? need : freshest;
        ++chunk_ages[c][static_cast<std::size_t>(k - used[c])];
      }
      // Fixed block order, independent of arrival order.
      sum.setZero();
      for (unsigned c = 0; c < chunks; ++c) {
        const MatrixXd& slot = shared.contributions(used[c]);
        const Chunk& ch = shared.chunk(c);
        for (Index i = ch.lo; i < ch.hi; ++i) {
          sum += slot.col(i);
        }
      }
      report.final_residual = advance(qp, opt, sum, y, report);
      report.iterations = k + 1;
      shared.publish_y(k + 1, y);
      if (report.final_residual <= opt.tolerance) {
        report.converged = true;
        break;
      }
    }
    shared.stop();
  }

  for (unsigned c = 0; c < chunks; ++c) {
    const Chunk& ch = shared.chunk(c);
    for (Index a = 0; a < q; ++a) {
      const std::int64_t count = chunk_ages[c][static_cast<std::size_t>(a)];
      report.observed_age_histogram[static_cast<std::size_t>(a)] += count * (ch.hi - ch.lo);
      for (Index i = ch.lo; i < ch.hi; ++i) {
        report.node_age_histogram[static_cast<std::size_t>(i)][static_cast<std::size_t>(a)] = count;
      }
    }
  }
  report.y = std::move(y);
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace

RunReport run(const SeparableQP& qp, const ExecutorOptions& options, const VectorXd& y0) {
  const VectorXd start = y0.size() == 0 ? VectorXd::Zero(qp.num_constraints()) : y0;
  validate(qp, options, start);

  RunReport report;
  report.scheme = options.scheme;
  report.threads = options.threads;
  report.tolerance = options.tolerance;
  report.observed_age_histogram.assign(static_cast<std::size_t>(options.q), 0);
  report.node_age_histogram.assign(static_cast<std::size_t>(qp.num_blocks()),
                                   std::vector<std::int64_t>(static_cast<std::size_t>(options.q), 0));

  const auto t0 = Clock::now();
  if (options.threads == 1) {
    run_inline(qp, options, start, report);
  } else {
    run_threaded(qp, options, start, report);
  }
  report.wall_time = std::chrono::duration<double>(Clock::now() - t0).count();
  return report;
}

DelayModel observed_delay_model(const RunReport& report) {
  return DelayModel::from_age_counts(report.node_age_histogram);
}

BenchmarkResult benchmark(const SeparableQP& qp, const std::vector<Scheme>& schemes,
                          const std::vector<unsigned>& thread_counts, int repeats,
                          const ExecutorOptions& base) {
  if (schemes.empty() || thread_counts.empty()) {
    throw std::invalid_argument("benchmark: schemes and thread counts must be nonempty");
  }
  if (repeats < 1) {
    throw std::invalid_argument("benchmark: repeats must be at least 1");
  }
  BenchmarkResult result;
  {
    ExecutorOptions serial = base;
    serial.scheme = Scheme::Synchronous;
    serial.threads = 1;
    std::vector<double> times;
    for (int r = 0; r < repeats; ++r) {
      times.push_back(run(qp, serial).wall_time);
    }
    result.serial_median_wall_time = median(times);
  }
  for (const Scheme scheme : schemes) {
    for (const unsigned threads : thread_counts) {
      BenchmarkCell cell;
      cell.scheme = scheme;
      cell.threads = threads;
      ExecutorOptions opt = base;
      opt.scheme = scheme;
      opt.threads = threads;
      std::vector<double> times;
      for (int r = 0; r < repeats; ++r) {
        opt.seed = split_seed(base.seed, static_cast<std::uint64_t>(r));
        cell.runs.push_back(run(qp, opt));
        times.push_back(cell.runs.back().wall_time);
      }
      cell.median_wall_time = median(times);
      cell.speedup = cell.median_wall_time > 0 ? result.serial_median_wall_time / cell.median_wall_time : 0.0;
      result.cells.push_back(std::move(cell));
    }
  }
  return result;
}

}  // namespace dualqp
