#include "dualqp/qp.hpp"

#include <stdexcept>
#include <string>
#include <utility>

#include "dualqp/rng.hpp"

namespace dualqp {

namespace {

constexpr double kSymmetryTolerance = 1e-12;
constexpr double kGeneratorRidge = 0.1;

std::string block_name(std::size_t i) { return "block " + std::to_string(i); }

}  // namespace

SeparableQP::SeparableQP(std::vector<QpBlock> blocks, VectorXd b, double alpha)
    : blocks_(std::move(blocks)), b_(std::move(b)), alpha_(alpha) {
  if (blocks_.empty()) {
    throw std::invalid_argument("SeparableQP: at least one block is required");
  }
  if (b_.size() == 0) {
    throw std::invalid_argument("SeparableQP: b must be nonempty");
  }
  if (!(alpha_ > 0) || !std::isfinite(alpha_)) {
    throw std::invalid_argument("SeparableQP: alpha must be positive and finite");
  }
  if (!b_.allFinite()) {
    throw std::invalid_argument("SeparableQP: b has non-finite entries");
  }
  factors_.reserve(blocks_.size());
  for (std::size_t i = 0; i < blocks_.size(); ++i) {
    const QpBlock& blk = blocks_[i];
    const Index n = blk.c.size();
    if (n == 0) {
      throw std::invalid_argument("SeparableQP: " + block_name(i) + " is empty");
    }
    if (blk.Q.rows() != n || blk.Q.cols() != n) {
      throw std::invalid_argument("SeparableQP: " + block_name(i) + " Q is not n_i x n_i");
    }
    if (blk.A.rows() != b_.size() || blk.A.cols() != n) {
      throw std::invalid_argument("SeparableQP: " + block_name(i) + " A is not m x n_i");
    }
    if (!blk.Q.allFinite() || !blk.c.allFinite() || !blk.A.allFinite()) {
      throw std::invalid_argument("SeparableQP: " + block_name(i) + " has non-finite entries");
    }
    if (linalg::inf_norm(blk.Q - blk.Q.transpose()) >= kSymmetryTolerance) {
      throw std::invalid_argument("SeparableQP: " + block_name(i) + " Q is not symmetric");
    }
    Eigen::LLT<MatrixXd> llt(blk.Q);
    if (llt.info() != Eigen::Success) {
      throw std::invalid_argument("SeparableQP: " + block_name(i) + " Q is not positive definite");
    }
    factors_.push_back(std::move(llt));
    num_primal_ += n;
  }
}

MatrixXd SeparableQP::solve_block(Index i, const MatrixXd& rhs) const {
  return factors_.at(static_cast<std::size_t>(i)).solve(rhs);
}

void SeparableQP::contribution_into(Index i, const VectorXd& y, Eigen::Ref<VectorXd> out,
                                    VectorXd& scratch) const {
  const auto idx = static_cast<std::size_t>(i);
  const QpBlock& blk = blocks_[idx];
  scratch.resize(blk.c.size());
  scratch.noalias() = blk.A.transpose() * y;
  scratch += blk.c;
  factors_[idx].solveInPlace(scratch);
  out.noalias() = blk.A * scratch;
  out = -out;
}

SeparableQP SeparableQP::with_alpha(double alpha) const {
  SeparableQP copy = *this;
  if (!(alpha > 0) || !std::isfinite(alpha)) {
    throw std::invalid_argument("SeparableQP: alpha must be positive and finite");
  }
  copy.alpha_ = alpha;
  return copy;
}

VectorXd primal_update(const SeparableQP& qp, Index block, const VectorXd& y) {
  if (block < 0 || block >= qp.num_blocks()) {
    throw std::out_of_range("primal_update: block index out of range");
  }
  if (y.size() != qp.num_constraints()) {
    throw std::invalid_argument("primal_update: dual dimension mismatch");
  }
  const QpBlock& blk = qp.block(block);
  const VectorXd rhs = blk.A.transpose() * y + blk.c;
  return -qp.solve_block(block, rhs);
}

PrimalState primal_update_all(const SeparableQP& qp, const DualState& y) {
  PrimalState out;
  out.k = y.k + 1;
  out.x.reserve(static_cast<std::size_t>(qp.num_blocks()));
  for (Index i = 0; i < qp.num_blocks(); ++i) {
    out.x.push_back(primal_update(qp, i, y.y));
  }
  return out;
}

VectorXd block_contribution(const SeparableQP& qp, Index block, const VectorXd& y) {
  if (block < 0 || block >= qp.num_blocks()) {
    throw std::out_of_range("block_contribution: block index out of range");
  }
  if (y.size() != qp.num_constraints()) {
    throw std::invalid_argument("block_contribution: dual dimension mismatch");
  }
  VectorXd out(qp.num_constraints());
  VectorXd scratch;
  qp.contribution_into(block, y, out, scratch);
  return out;
}

DualState dual_update_sync(const SeparableQP& qp, const DualState& y, const PrimalState& x_new) {
  if (y.y.size() != qp.num_constraints() ||
      static_cast<Index>(x_new.x.size()) != qp.num_blocks()) {
    throw std::invalid_argument("dual_update_sync: shape mismatch");
  }
  VectorXd ax = VectorXd::Zero(qp.num_constraints());
  for (Index i = 0; i < qp.num_blocks(); ++i) {
    const auto& xi = x_new.x[static_cast<std::size_t>(i)];
    if (xi.size() != qp.block_size(i)) {
      throw std::invalid_argument("dual_update_sync: primal block dimension mismatch");
    }
    ax += qp.block(i).A * xi;
  }
  return DualState{y.y + qp.alpha() * (ax - qp.b()), y.k + 1};
}

MatrixXd dual_curvature(const SeparableQP& qp) {
  const Index m = qp.num_constraints();
  MatrixXd s = MatrixXd::Zero(m, m);
  for (Index i = 0; i < qp.num_blocks(); ++i) {
    const QpBlock& blk = qp.block(i);
    s += blk.A * qp.solve_block(i, blk.A.transpose());
  }
  return s;
}

Optimum closed_form_optimum(const SeparableQP& qp) {
  const Index m = qp.num_constraints();
  MatrixXd s = MatrixXd::Zero(m, m);
  VectorXd aqc = VectorXd::Zero(m);
  for (Index i = 0; i < qp.num_blocks(); ++i) {
    const QpBlock& blk = qp.block(i);
    s += blk.A * qp.solve_block(i, blk.A.transpose());
    aqc += blk.A * qp.solve_block(i, blk.c);
  }
  Optimum out;
  out.y_star = -linalg::solve(s, aqc + qp.b());
  out.x_star = primal_update_all(qp, DualState{out.y_star, 0});
  out.x_star.k = 0;
  return out;
}

DualMapCoefficients dual_map_coefficients(const SeparableQP& qp) {
  const Index m = qp.num_constraints();
  const double alpha = qp.alpha();
  const double share = 1.0 / static_cast<double>(qp.num_blocks());
  DualMapCoefficients out;
  out.R = MatrixXd::Zero(m, m);
  out.B = VectorXd::Zero(m);
  out.phi.reserve(static_cast<std::size_t>(qp.num_blocks()));
  for (Index i = 0; i < qp.num_blocks(); ++i) {
    const QpBlock& blk = qp.block(i);
    MatrixXd phi = alpha * (blk.A * qp.solve_block(i, blk.A.transpose()));
    out.R += phi;
    // Each node carries its 1/N share of alpha * b.
    out.B -= alpha * (blk.A * qp.solve_block(i, blk.c)) + share * alpha * qp.b();
    out.phi.push_back(std::move(phi));
  }
  return out;
}

double sync_spectral_radius(const SeparableQP& qp) {
  const MatrixXd s = dual_curvature(qp);
  const Index m = s.rows();
  return linalg::spectral_radius(MatrixXd::Identity(m, m) - qp.alpha() * s);
}

std::optional<double> tune_step_size(const SeparableQP& qp, double target_rho, double tolerance) {
  if (!(target_rho > 0 && target_rho < 1)) {
    throw std::invalid_argument("tune_step_size: target must lie in (0, 1)");
  }
  const MatrixXd s = dual_curvature(qp);
  const Index m = s.rows();
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(0.5 * (s + s.transpose()), Eigen::EigenvaluesOnly);
  const double lo_eig = es.eigenvalues().minCoeff();
  const double hi_eig = es.eigenvalues().maxCoeff();
  if (!(lo_eig > 0)) {
    return std::nullopt;
  }
  const auto rho_at = [&](double a) {
    return linalg::spectral_radius(MatrixXd::Identity(m, m) - a * s);
  };
  // rho decreases monotonically from 1 on (0, alpha_opt].
  const double alpha_opt = 2.0 / (lo_eig + hi_eig);
  if (rho_at(alpha_opt) > target_rho) {
    return std::nullopt;
  }
  double lo = 0.0;
  double hi = alpha_opt;
  while (hi - lo > tolerance * hi) {
    const double mid = 0.5 * (lo + hi);
    if (rho_at(mid) > target_rho) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

namespace {

std::vector<QpBlock> draw_blocks(const std::vector<Index>& sizes, Index m, Rng& rng) {
  std::vector<QpBlock> blocks;
  blocks.reserve(sizes.size());
  for (const Index n : sizes) {
    MatrixXd l(n, n);
    for (Index r = 0; r < n; ++r) {
      for (Index c = 0; c < n; ++c) {
        l(r, c) = uniform(rng, -1.0, 1.0);
      }
    }
    QpBlock blk;
    blk.Q = l.transpose() * l + kGeneratorRidge * MatrixXd::Identity(n, n);
    // Exact symmetry, independent of the product's rounding.
    blk.Q = (0.5 * (blk.Q + blk.Q.transpose())).eval();
    blk.c.resize(n);
    for (Index r = 0; r < n; ++r) {
      blk.c(r) = uniform(rng, -1.0, 1.0);
    }
    blk.A.resize(m, n);
    for (Index r = 0; r < m; ++r) {
      for (Index c = 0; c < n; ++c) {
        blk.A(r, c) = uniform(rng, -1.0, 1.0);
      }
    }
    blocks.push_back(std::move(blk));
  }
  return blocks;
}

}  // namespace

GeneratedProblem generate_problem(const GeneratorOptions& options) {
  if (options.block_sizes.empty() || options.m < 1) {
    throw std::invalid_argument("generate_problem: need at least one block and one constraint");
  }
  Index total = 0;
  for (const Index n : options.block_sizes) {
    if (n < 1) {
      throw std::invalid_argument("generate_problem: block sizes must be positive");
    }
    total += n;
  }
  if (options.m > total) {
    throw std::invalid_argument(
        "generate_problem: more coupling constraints than primal variables makes A Q^-1 A' singular");
  }
  if (options.alpha && !(*options.alpha > 0)) {
    throw std::invalid_argument("generate_problem: alpha must be positive");
  }

  for (int attempt = 0; attempt <= options.max_retries; ++attempt) {
    const std::uint64_t draw_seed = attempt == 0 ? options.seed : split_seed(options.seed, attempt);
    Rng rng(draw_seed);
    std::vector<QpBlock> blocks = draw_blocks(options.block_sizes, options.m, rng);
    VectorXd b(options.m);
    for (Index r = 0; r < options.m; ++r) {
      b(r) = uniform(rng, -1.0, 1.0);
    }
    SeparableQP qp(std::move(blocks), std::move(b), options.alpha.value_or(1.0));
    if (linalg::reciprocal_condition(dual_curvature(qp)) < linalg::kMinReciprocalCondition) {
      continue;
    }

    if (options.alpha) {
      double alpha = *options.alpha;
      bool rescaled = false;
      while (sync_spectral_radius(qp.with_alpha(alpha)) >= 1.0) {
        alpha *= 0.5;
        rescaled = true;
      }
      return GeneratedProblem{qp.with_alpha(alpha), draw_seed, attempt, rescaled};
    }
    if (const auto tuned = tune_step_size(qp, options.target_rho)) {
      return GeneratedProblem{qp.with_alpha(*tuned), draw_seed, attempt, false};
    }
  }
  throw std::runtime_error("generate_problem: no acceptable instance after " +
                           std::to_string(options.max_retries + 1) + " draws");
}

}  // namespace dualqp
