#include "dualqp/switched.hpp"

#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>
#include <utility>

namespace dualqp {

namespace {

constexpr double kProbabilityTolerance = 1e-12;

}  // namespace

void check_probability_vector(const VectorXd& pi, double tol) {
  if (pi.size() == 0) {
    throw std::invalid_argument("probability vector is empty");
  }
  if (!pi.allFinite() || pi.minCoeff() < 0.0) {
    throw std::invalid_argument("probability vector has negative or non-finite entries");
  }
  if (std::abs(pi.sum() - 1.0) > tol) {
    throw std::invalid_argument("probability vector sums to " + std::to_string(pi.sum()));
  }
}

DelayModel::DelayModel(Index q, std::vector<VectorXd> per_node) : q_(q), per_node_(std::move(per_node)) {
  if (q_ < 1) {
    throw std::invalid_argument("DelayModel: q must be at least 1");
  }
  if (per_node_.empty()) {
    throw std::invalid_argument("DelayModel: at least one node is required");
  }
  for (std::size_t i = 0; i < per_node_.size(); ++i) {
    if (per_node_[i].size() != q_) {
      throw std::invalid_argument("DelayModel: node " + std::to_string(i) + " has " +
                                  std::to_string(per_node_[i].size()) + " ages, expected " +
                                  std::to_string(q_));
    }
    check_probability_vector(per_node_[i], kProbabilityTolerance);
  }
}

DelayModel DelayModel::uniform(const VectorXd& pi, Index nodes) {
  if (nodes < 1) {
    throw std::invalid_argument("DelayModel::uniform: need at least one node");
  }
  return DelayModel(pi.size(), std::vector<VectorXd>(static_cast<std::size_t>(nodes), pi));
}

DelayModel DelayModel::from_aggregate(const VectorXd& aggregate, Index nodes) {
  check_probability_vector(aggregate, kProbabilityTolerance);
  if (nodes < 1) {
    throw std::invalid_argument("DelayModel::from_aggregate: need at least one node");
  }
  const Index q = aggregate.size();
  const double inv_n = 1.0 / static_cast<double>(nodes);
  VectorXd node_pi(q);
  double cdf = 0.0;
  double prev_root = 0.0;
  for (Index r = 0; r < q; ++r) {
    cdf = r + 1 == q ? 1.0 : std::min(1.0, cdf + aggregate(r));
    const double root = std::pow(cdf, inv_n);
    node_pi(r) = std::max(0.0, root - prev_root);
    prev_root = root;
  }
  node_pi /= node_pi.sum();
  return uniform(node_pi, nodes);
}

DelayModel DelayModel::from_age_counts(const std::vector<std::vector<std::int64_t>>& counts) {
  if (counts.empty() || counts.front().empty()) {
    throw std::invalid_argument("DelayModel::from_age_counts: empty histogram");
  }
  const Index q = static_cast<Index>(counts.front().size());
  std::vector<VectorXd> per_node;
  per_node.reserve(counts.size());
  for (std::size_t i = 0; i < counts.size(); ++i) {
    if (static_cast<Index>(counts[i].size()) != q) {
      throw std::invalid_argument("DelayModel::from_age_counts: ragged histogram");
    }
    const std::int64_t total = std::accumulate(counts[i].begin(), counts[i].end(), std::int64_t{0});
    if (total <= 0) {
      throw std::invalid_argument("DelayModel::from_age_counts: node " + std::to_string(i) +
                                  " has no observations");
    }
    VectorXd pi(q);
    for (Index a = 0; a < q; ++a) {
      pi(a) = static_cast<double>(counts[i][static_cast<std::size_t>(a)]) / static_cast<double>(total);
    }
    pi /= pi.sum();
    per_node.push_back(std::move(pi));
  }
  return DelayModel(q, std::move(per_node));
}

VectorXd aggregate_probability(const DelayModel& dm) {
  const Index q = dm.q();
  VectorXd pi(q);
  VectorXd cumulative = VectorXd::Zero(dm.num_nodes());
  double assigned = 0.0;  // sum of pi_j for j < r
  for (Index r = 0; r < q; ++r) {
    double joint = 1.0;
    for (Index i = 0; i < dm.num_nodes(); ++i) {
      cumulative(i) += dm.node(i)(r);
      joint *= cumulative(i);
    }
    pi(r) = joint - assigned;
    assigned += pi(r);
  }
  for (Index r = 0; r < q; ++r) {
    if (pi(r) < -kProbabilityTolerance) {
      throw std::domain_error("aggregate_probability: negative mode probability " +
                              std::to_string(pi(r)));
    }
    if (pi(r) < 0.0) {
      pi(r) = 0.0;
    }
  }
  pi /= pi.sum();
  return pi;
}

MatrixXd companion_matrix(const std::vector<MatrixXd>& first_block_row) {
  if (first_block_row.empty()) {
    throw std::invalid_argument("companion_matrix: no blocks");
  }
  const Index q = static_cast<Index>(first_block_row.size());
  const Index m = first_block_row.front().rows();
  MatrixXd w = MatrixXd::Zero(q * m, q * m);
  for (Index j = 0; j < q; ++j) {
    const MatrixXd& blk = first_block_row[static_cast<std::size_t>(j)];
    if (blk.rows() != m || blk.cols() != m) {
      throw std::invalid_argument("companion_matrix: blocks must all be m x m");
    }
    w.block(0, j * m, m, m) = blk;
  }
  for (Index j = 1; j < q; ++j) {
    w.block(j * m, (j - 1) * m, m, m).setIdentity();
  }
  return w;
}

MatrixXd mode_matrix(const MatrixXd& R, Index q, Index age) {
  if (age < 0 || age >= q) {
    throw std::out_of_range("mode_matrix: age outside [0, q)");
  }
  const Index m = R.rows();
  std::vector<MatrixXd> row(static_cast<std::size_t>(q), MatrixXd::Zero(m, m));
  row[0] = MatrixXd::Identity(m, m);
  row[static_cast<std::size_t>(age)] -= R;
  return companion_matrix(row);
}

MatrixXd delayed_mode_matrix(const std::vector<MatrixXd>& phi, const std::vector<Index>& ages,
                             Index q) {
  if (phi.empty() || phi.size() != ages.size()) {
    throw std::invalid_argument("delayed_mode_matrix: need one age per node");
  }
  const Index m = phi.front().rows();
  std::vector<MatrixXd> row(static_cast<std::size_t>(q), MatrixXd::Zero(m, m));
  row[0] = MatrixXd::Identity(m, m);
  for (std::size_t i = 0; i < phi.size(); ++i) {
    if (ages[i] < 0 || ages[i] >= q) {
      throw std::out_of_range("delayed_mode_matrix: age outside [0, q)");
    }
    row[static_cast<std::size_t>(ages[i])] -= phi[i];
  }
  return companion_matrix(row);
}

VectorXd stacked_affine_term(const VectorXd& B, Index q) {
  VectorXd c = VectorXd::Zero(q * B.size());
  c.head(B.size()) = B;
  return c;
}

SwitchedSystem make_switched_system(const DualMapCoefficients& coeffs, const VectorXd& pi) {
  check_probability_vector(pi, kProbabilityTolerance);
  SwitchedSystem sys;
  sys.q = pi.size();
  sys.m = coeffs.R.rows();
  sys.pi = pi;
  sys.R = coeffs.R;
  sys.B = coeffs.B;
  sys.C = stacked_affine_term(coeffs.B, sys.q);
  sys.modes.reserve(static_cast<std::size_t>(sys.q));
  for (Index r = 0; r < sys.q; ++r) {
    sys.modes.push_back(mode_matrix(coeffs.R, sys.q, r));
  }
  return sys;
}

SwitchedSystem reduce_modes(const SeparableQP& qp, const DelayModel& dm) {
  if (dm.num_nodes() != qp.num_blocks()) {
    throw std::invalid_argument("reduce_modes: delay model has " + std::to_string(dm.num_nodes()) +
                                " nodes, problem has " + std::to_string(qp.num_blocks()));
  }
  return make_switched_system(dual_map_coefficients(qp), aggregate_probability(dm));
}

AffineSystem build_sync_system(const SeparableQP& qp, Index q) {
  if (q < 1) {
    throw std::invalid_argument("build_sync_system: q must be at least 1");
  }
  const DualMapCoefficients coeffs = dual_map_coefficients(qp);
  return AffineSystem{mode_matrix(coeffs.R, q, 0), stacked_affine_term(coeffs.B, q)};
}

AffineSystem build_det_async_system(const SeparableQP& qp, Index q) {
  if (q < 1) {
    throw std::invalid_argument("build_det_async_system: q must be at least 1");
  }
  const DualMapCoefficients coeffs = dual_map_coefficients(qp);
  return AffineSystem{mode_matrix(coeffs.R, q, q - 1), stacked_affine_term(coeffs.B, q)};
}

AugmentedState make_augmented_state(const VectorXd& y0, Index q) {
  if (q < 1) {
    throw std::invalid_argument("make_augmented_state: q must be at least 1");
  }
  return y0.replicate(q, 1);
}

Index sample_mode(const VectorXd& pi, Rng& rng) {
  const double u = uniform01(rng);
  double cumulative = 0.0;
  Index last_supported = 0;
  for (Index r = 0; r < pi.size(); ++r) {
    if (pi(r) <= 0.0) {
      continue;
    }
    last_supported = r;
    cumulative += pi(r);
    if (u < cumulative) {
      return r;
    }
  }
  // Rounding left u above the accumulated mass.
  return last_supported;
}

AugmentedState step(const SwitchedSystem& sys, const AugmentedState& Y, Index mode) {
  if (mode < 0 || mode >= static_cast<Index>(sys.modes.size())) {
    throw std::out_of_range("step: mode index out of range");
  }
  if (Y.size() != sys.state_dim()) {
    throw std::invalid_argument("step: state dimension mismatch");
  }
  return sys.modes[static_cast<std::size_t>(mode)] * Y + sys.C;
}

std::vector<JointMode> enumerate_joint_modes(const SeparableQP& qp, const DelayModel& dm) {
  const Index n = dm.num_nodes();
  const Index q = dm.q();
  if (n != qp.num_blocks()) {
    throw std::invalid_argument("enumerate_joint_modes: node count mismatch");
  }
  if (n > kMaxEnumeratedNodes || q > kMaxEnumeratedDelay) {
    throw std::invalid_argument("enumerate_joint_modes: only N <= 3 and q <= 3 are enumerable");
  }
  const DualMapCoefficients coeffs = dual_map_coefficients(qp);

  // Row vector Pi_1 (x) Pi_2 (x) ... (x) Pi_N.
  MatrixXd joint = dm.node(0).transpose();
  for (Index i = 1; i < n; ++i) {
    joint = linalg::kron(joint, MatrixXd(dm.node(i).transpose()));
  }

  std::vector<JointMode> out;
  out.reserve(static_cast<std::size_t>(joint.cols()));
  for (Index t = 0; t < joint.cols(); ++t) {
    JointMode jm;
    jm.probability = joint(0, t);
    jm.ages.assign(static_cast<std::size_t>(n), 0);
    Index rest = t;
    for (Index i = n - 1; i >= 0; --i) {
      jm.ages[static_cast<std::size_t>(i)] = rest % q;
      rest /= q;
    }
    for (const Index a : jm.ages) {
      jm.oldest_age = std::max(jm.oldest_age, a);
    }
    jm.W_raw = delayed_mode_matrix(coeffs.phi, jm.ages, q);
    jm.W_reduced = mode_matrix(coeffs.R, q, jm.oldest_age);
    out.push_back(std::move(jm));
  }
  return out;
}

}  // namespace dualqp
