#pragma once

// Jump-linear-system view of the asynchronous dual iteration.
//
// The augmented state stacks the last q dual iterates,
//   Y^k = [y^k; y^{k-1}; ...; y^{k-q+1}],
// and every staleness pattern becomes a companion-form mode matrix W_r with
//   Y^{k+1} = W_r Y^k + C,   C = [B; 0; ...; 0].
//
// Modes are indexed from 0 in code: mode r (0-based) means the oldest value
// read by the coordinator is r iterations old, so mode 0 is "all fresh".

#include <cstdint>
#include <vector>

#include "dualqp/linalg.hpp"
#include "dualqp/qp.hpp"
#include "dualqp/rng.hpp"

namespace dualqp {

/// Stationary per-node staleness distributions.
///
/// per_node[i](a) is the probability that node i's value read by the
/// coordinator is a iterations old, a = 0..q-1.
class DelayModel {
 public:
  /// Throws std::invalid_argument unless every vector has length q, is
  /// nonnegative and sums to 1 within 1e-12.
  DelayModel(Index q, std::vector<VectorXd> per_node);

  /// Every one of `nodes` nodes shares the distribution `pi`.
  static DelayModel uniform(const VectorXd& pi, Index nodes);

  /// Identical per-node distributions whose max-age statistic over `nodes`
  /// nodes has distribution `aggregate` (per-node CDF = aggregate CDF^(1/N)).
  static DelayModel from_aggregate(const VectorXd& aggregate, Index nodes);

  /// Normalizes observed per-node age counts (rows: nodes, cols: ages).
  static DelayModel from_age_counts(const std::vector<std::vector<std::int64_t>>& counts);

  Index q() const { return q_; }
  Index num_nodes() const { return static_cast<Index>(per_node_.size()); }
  const VectorXd& node(Index i) const { return per_node_.at(static_cast<std::size_t>(i)); }
  const std::vector<VectorXd>& per_node() const { return per_node_; }

 private:
  Index q_;
  std::vector<VectorXd> per_node_;
};

/// Throws std::invalid_argument unless pi is a probability vector within tol.
void check_probability_vector(const VectorXd& pi, double tol = 1e-12);

/// Distribution of the oldest age across nodes:
///   pi_r = prod_i (sum_{j<=r} pi_{j,i}) - sum_{j<r} pi_j.
/// Residues in [-1e-12, 0) are clamped and the result renormalized; larger
/// negatives throw std::domain_error.
VectorXd aggregate_probability(const DelayModel& dm);

struct AffineSystem {
  MatrixXd W;
  VectorXd C;
};

/// Reduced q-mode switched system.
struct SwitchedSystem {
  std::vector<MatrixXd> modes;  // q matrices, each (q m) x (q m)
  VectorXd pi;                  // mode probabilities
  VectorXd C;                   // [B; 0; ...; 0]
  MatrixXd R;                   // sum_i Phi_i
  VectorXd B;
  Index q = 0;
  Index m = 0;

  Index state_dim() const { return q * m; }
};

using AugmentedState = VectorXd;

/// Companion matrix with the given first block row and identity blocks on
/// the block subdiagonal.
MatrixXd companion_matrix(const std::vector<MatrixXd>& first_block_row);

/// Mode matrix for aggregated age `age`: first block row is I at column 0
/// with -R added at column `age`.
MatrixXd mode_matrix(const MatrixXd& R, Index q, Index age);

/// General delayed mode: node i read at age ages[i] adds -Phi_i to block
/// column ages[i] of the first block row (I at column 0).
MatrixXd delayed_mode_matrix(const std::vector<MatrixXd>& phi, const std::vector<Index>& ages,
                             Index q);

/// [B; 0; ...; 0] of length q m.
VectorXd stacked_affine_term(const VectorXd& B, Index q);

/// Builds the q-mode system obtained by always reading every node at the
/// oldest sampled age.
SwitchedSystem reduce_modes(const SeparableQP& qp, const DelayModel& dm);

/// Same system from precomputed coefficients and an explicit mode
/// distribution (length q).
SwitchedSystem make_switched_system(const DualMapCoefficients& coeffs, const VectorXd& pi);

/// W_sync = companion([I - R, 0, ..., 0]).
AffineSystem build_sync_system(const SeparableQP& qp, Index q);

/// W_det = companion([I, 0, ..., -R]) (reads exactly q-1 iterations old).
AffineSystem build_det_async_system(const SeparableQP& qp, Index q);

/// Back-fills the history with q copies of y0.
AugmentedState make_augmented_state(const VectorXd& y0, Index q);

/// Mode index drawn with probability pi(r).
Index sample_mode(const VectorXd& pi, Rng& rng);

/// Y+ = W_mode Y + C.
AugmentedState step(const SwitchedSystem& sys, const AugmentedState& Y, Index mode);

/// One joint staleness outcome of the unreduced system.
struct JointMode {
  double probability = 0;
  std::vector<Index> ages;  // per node
  Index oldest_age = 0;     // mode of the reduced system it maps onto
  MatrixXd W_raw;           // per-node delays applied as sampled
  MatrixXd W_reduced;       // every node read at oldest_age
};

/// Inclusive limits on the q^N enumeration.
inline constexpr Index kMaxEnumeratedNodes = 3;
inline constexpr Index kMaxEnumeratedDelay = 3;

/// Expands all q^N joint outcomes with probability Pi_1 (x) ... (x) Pi_N.
/// Node 0 is the most significant digit of the Kronecker index. Only for
/// N <= 3 and q <= 3; throws std::invalid_argument otherwise.
std::vector<JointMode> enumerate_joint_modes(const SeparableQP& qp, const DelayModel& dm);

}  // namespace dualqp
