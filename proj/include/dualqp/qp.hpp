#pragma once

// Separable quadratic programs
//
//   minimize   sum_i 1/2 x_i' Q_i x_i + c_i' x_i
//   subject to sum_i A_i x_i <= b
//
// and the closed-form maps of the dual-decomposition iteration on them.

#include <cstdint>
#include <optional>
#include <vector>

#include <Eigen/Cholesky>

#include "dualqp/linalg.hpp"

namespace dualqp {

struct QpBlock {
  MatrixXd Q;  // n_i x n_i, symmetric positive definite
  VectorXd c;  // n_i
  MatrixXd A;  // m x n_i
};

/// Immutable block-structured QP with a uniform dual step size.
class SeparableQP {
 public:
  /// Throws std::invalid_argument if a block is not symmetric positive
  /// definite, shapes disagree, or alpha <= 0.
  SeparableQP(std::vector<QpBlock> blocks, VectorXd b, double alpha);

  Index num_blocks() const { return static_cast<Index>(blocks_.size()); }
  /// Number of coupling constraints (rows of every A_i).
  Index num_constraints() const { return b_.size(); }
  Index num_primal() const { return num_primal_; }
  Index block_size(Index i) const { return blocks_.at(static_cast<std::size_t>(i)).c.size(); }

  const QpBlock& block(Index i) const { return blocks_.at(static_cast<std::size_t>(i)); }
  const std::vector<QpBlock>& blocks() const { return blocks_; }
  const VectorXd& b() const { return b_; }
  double alpha() const { return alpha_; }

  /// Q_i^{-1} rhs using the cached Cholesky factor.
  MatrixXd solve_block(Index i, const MatrixXd& rhs) const;

  /// out = A_i x_i with x_i = -Q_i^{-1}(A_i' y + c_i), without allocating
  /// once `scratch` has size n_i.
  void contribution_into(Index i, const VectorXd& y, Eigen::Ref<VectorXd> out,
                         VectorXd& scratch) const;

  SeparableQP with_alpha(double alpha) const;

 private:
  std::vector<QpBlock> blocks_;
  std::vector<Eigen::LLT<MatrixXd>> factors_;
  VectorXd b_;
  double alpha_;
  Index num_primal_ = 0;
};

struct PrimalState {
  std::vector<VectorXd> x;  // one entry per block
  long k = 0;
};

struct DualState {
  VectorXd y;
  long k = 0;
};

/// x_i = -Q_i^{-1} (A_i' y + c_i).
VectorXd primal_update(const SeparableQP& qp, Index block, const VectorXd& y);

/// Primal update of every block at once.
PrimalState primal_update_all(const SeparableQP& qp, const DualState& y);

/// A_i x_i for the block's primal update at y; what a node ships to the
/// coordinator.
VectorXd block_contribution(const SeparableQP& qp, Index block, const VectorXd& y);

/// y+ = y + alpha (sum_i A_i x_i - b), iteration index incremented.
DualState dual_update_sync(const SeparableQP& qp, const DualState& y, const PrimalState& x_new);

struct Optimum {
  VectorXd y_star;
  PrimalState x_star;
};

/// y* = -(A Q^{-1} A')^{-1} (A Q^{-1} c + b), x* = primal_update(y*).
/// Throws SingularMatrixError when A Q^{-1} A' fails the condition check.
Optimum closed_form_optimum(const SeparableQP& qp);

struct DualMapCoefficients {
  std::vector<MatrixXd> phi;  // alpha A_i Q_i^{-1} A_i'
  MatrixXd R;                 // sum of phi
  VectorXd B;                 // -alpha (A Q^{-1} c + b)
};

/// Coefficients of the affine dual map y -> (I - R) y + B.
DualMapCoefficients dual_map_coefficients(const SeparableQP& qp);

/// A Q^{-1} A' (the dual Hessian up to sign), m x m.
MatrixXd dual_curvature(const SeparableQP& qp);

/// rho(I - R) for the problem's alpha.
double sync_spectral_radius(const SeparableQP& qp);

/// Options for random instance generation.
///
/// Q_i = L'L + 0.1 I with L uniform in [-1, 1]; A_i, c_i, b uniform in
/// [-1, 1]. With `alpha` unset the step is tuned so rho(I - R) hits
/// `target_rho`. An explicit alpha is halved until rho(I - R) < 1.
struct GeneratorOptions {
  std::vector<Index> block_sizes;
  Index m = 1;
  std::optional<double> alpha;
  double target_rho = 0.7;
  std::uint64_t seed = 0;
  int max_retries = 20;
};

struct GeneratedProblem {
  SeparableQP qp;
  std::uint64_t seed;      // seed of the draw that was accepted
  int retries = 0;         // redraws needed for auto alpha
  bool alpha_rescaled = false;
};

GeneratedProblem generate_problem(const GeneratorOptions& options);

/// The alpha in (0, alpha_opt] with rho(I - alpha A Q^{-1} A') == target,
/// found by bisection on the spectral radius; alpha_opt minimizes that radius.
/// std::nullopt when even alpha_opt cannot reach the target.
std::optional<double> tune_step_size(const SeparableQP& qp, double target_rho,
                                     double tolerance = 1e-10);

}  // namespace dualqp
