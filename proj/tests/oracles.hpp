#pragma once

// Reference computations for the tests. Everything here is written with
// plain loops on matrix entries so it shares no code path with the library.

#include <cmath>
#include <cstdint>
#include <functional>
#include <vector>

#include <Eigen/Dense>

#include "dualqp/qp.hpp"
#include "dualqp/rng.hpp"

namespace oracle {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

inline MatrixXd multiply(const MatrixXd& a, const MatrixXd& b) {
  MatrixXd out = MatrixXd::Zero(a.rows(), b.cols());
  for (Index i = 0; i < a.rows(); ++i) {
    for (Index k = 0; k < a.cols(); ++k) {
      for (Index j = 0; j < b.cols(); ++j) {
        out(i, j) += a(i, k) * b(k, j);
      }
    }
  }
  return out;
}

inline VectorXd multiply(const MatrixXd& a, const VectorXd& v) {
  VectorXd out = VectorXd::Zero(a.rows());
  for (Index i = 0; i < a.rows(); ++i) {
    for (Index k = 0; k < a.cols(); ++k) {
      out(i) += a(i, k) * v(k);
    }
  }
  return out;
}

inline double row_sum_norm(const MatrixXd& m) {
  double best = 0;
  for (Index i = 0; i < m.rows(); ++i) {
    double s = 0;
    for (Index j = 0; j < m.cols(); ++j) {
      s += std::abs(m(i, j));
    }
    best = std::max(best, s);
  }
  return best;
}

inline double max_abs(const VectorXd& v) {
  double best = 0;
  for (Index i = 0; i < v.size(); ++i) {
    best = std::max(best, std::abs(v(i)));
  }
  return best;
}

/// (a (x) b)(i * p + k, j * r + l) = a(i, j) b(k, l), expanded entry by entry.
inline MatrixXd kron_by_hand(const MatrixXd& a, const MatrixXd& b) {
  MatrixXd out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Index i = 0; i < a.rows(); ++i) {
    for (Index j = 0; j < a.cols(); ++j) {
      for (Index k = 0; k < b.rows(); ++k) {
        for (Index l = 0; l < b.cols(); ++l) {
          out(i * b.rows() + k, j * b.cols() + l) = a(i, j) * b(k, l);
        }
      }
    }
  }
  return out;
}

inline double determinant(const MatrixXd& m) {
  const Index n = m.rows();
  if (n == 1) {
    return m(0, 0);
  }
  double det = 0;
  for (Index j = 0; j < n; ++j) {
    MatrixXd minor(n - 1, n - 1);
    for (Index r = 1; r < n; ++r) {
      for (Index c = 0, cc = 0; c < n; ++c) {
        if (c != j) {
          minor(r - 1, cc++) = m(r, c);
        }
      }
    }
    det += ((j % 2 == 0) ? 1.0 : -1.0) * m(0, j) * determinant(minor);
  }
  return det;
}

/// inverse = adj(m) / det(m) by cofactors; only for small matrices.
inline MatrixXd adjugate_inverse(const MatrixXd& m) {
  const Index n = m.rows();
  if (n == 1) {
    return MatrixXd::Constant(1, 1, 1.0 / m(0, 0));
  }
  const double det = determinant(m);
  MatrixXd inv(n, n);
  for (Index i = 0; i < n; ++i) {
    for (Index j = 0; j < n; ++j) {
      MatrixXd minor(n - 1, n - 1);
      for (Index r = 0, rr = 0; r < n; ++r) {
        if (r == i) continue;
        for (Index c = 0, cc = 0; c < n; ++c) {
          if (c == j) continue;
          minor(rr, cc++) = m(r, c);
        }
        ++rr;
      }
      inv(j, i) = (((i + j) % 2 == 0) ? 1.0 : -1.0) * determinant(minor) / det;
    }
  }
  return inv;
}

/// Gauss-Jordan solve with partial pivoting.
inline MatrixXd gauss_solve(MatrixXd a, MatrixXd b) {
  const Index n = a.rows();
  for (Index col = 0; col < n; ++col) {
    Index piv = col;
    for (Index r = col + 1; r < n; ++r) {
      if (std::abs(a(r, col)) > std::abs(a(piv, col))) piv = r;
    }
    a.row(col).swap(a.row(piv));
    b.row(col).swap(b.row(piv));
    for (Index r = 0; r < n; ++r) {
      if (r == col) continue;
      const double f = a(r, col) / a(col, col);
      for (Index c = 0; c < n; ++c) a(r, c) -= f * a(col, c);
      for (Index c = 0; c < b.cols(); ++c) b(r, c) -= f * b(col, c);
    }
  }
  for (Index r = 0; r < n; ++r) {
    for (Index c = 0; c < b.cols(); ++c) b(r, c) /= a(r, r);
  }
  return b;
}

/// Spectral radius by Gelfand's formula: ||M^(2^s)||^(1/2^s) with the power
/// renormalized after every squaring.
inline double gelfand_radius(const MatrixXd& m, int squarings = 40) {
  MatrixXd p = m;
  double log_norm = 0;  // log of the accumulated scale of p
  double exponent = 1;
  for (int s = 0; s < squarings; ++s) {
    const double nrm = row_sum_norm(p);
    if (nrm == 0) return 0;
    p /= nrm;
    log_norm += std::log(nrm);
    p = multiply(p, p);
    log_norm *= 2;
    exponent *= 2;
  }
  const double nrm = row_sum_norm(p);
  if (nrm == 0) return 0;
  return std::exp((log_norm + std::log(nrm)) / exponent);
}

/// sum_j pi_j W_j P W_j' propagated `steps` times from P = I; returns the
/// geometric-mean per-step growth of ||P||_inf over the last half.
inline double second_moment_growth(const std::vector<MatrixXd>& modes, const VectorXd& pi, int steps) {
  const Index n = modes.front().rows();
  MatrixXd P = MatrixXd::Identity(n, n);
  double log_scale = 0;
  double log_at_half = 0;
  for (int s = 1; s <= steps; ++s) {
    MatrixXd next = MatrixXd::Zero(n, n);
    for (std::size_t j = 0; j < modes.size(); ++j) {
      next += pi(static_cast<Index>(j)) * multiply(multiply(modes[j], P), MatrixXd(modes[j].transpose()));
    }
    const double nrm = row_sum_norm(next);
    if (nrm == 0) return 0;
    P = next / nrm;
    log_scale += std::log(nrm);
    if (s == steps / 2) log_at_half = log_scale;
  }
  return std::exp((log_scale - log_at_half) / (steps - steps / 2));
}

/// Distribution of max_i age_i by enumerating every joint age tuple.
inline std::vector<double> brute_force_max_age(const std::vector<std::vector<double>>& per_node) {
  const std::size_t n = per_node.size();
  const std::size_t q = per_node.front().size();
  std::vector<double> out(q, 0.0);
  std::vector<std::size_t> ages(n, 0);
  while (true) {
    double p = 1;
    std::size_t oldest = 0;
    for (std::size_t i = 0; i < n; ++i) {
      p *= per_node[i][ages[i]];
      oldest = std::max(oldest, ages[i]);
    }
    out[oldest] += p;
    std::size_t d = 0;
    while (d < n && ++ages[d] == q) {
      ages[d++] = 0;
    }
    if (d == n) break;
  }
  return out;
}

/// Synchronous dual ascent written out directly from the block data.
inline VectorXd iterate_sync(const dualqp::SeparableQP& qp, VectorXd y, int iterations) {
  std::vector<MatrixXd> qinv;
  for (const auto& blk : qp.blocks()) {
    qinv.push_back(gauss_solve(blk.Q, MatrixXd::Identity(blk.Q.rows(), blk.Q.cols())));
  }
  for (int it = 0; it < iterations; ++it) {
    VectorXd residual = -qp.b();
    for (std::size_t i = 0; i < qinv.size(); ++i) {
      const auto& blk = qp.blocks()[i];
      const VectorXd rhs = multiply(MatrixXd(blk.A.transpose()), y) + blk.c;
      const VectorXd x = -multiply(qinv[i], rhs);
      residual += multiply(blk.A, x);
    }
    y += qp.alpha() * residual;
  }
  return y;
}

/// T1: N = 2, Q_i = 2, c_i = -2, A_i = 1, b = 1, alpha = 0.5.
inline dualqp::SeparableQP make_t1(double alpha = 0.5) {
  std::vector<dualqp::QpBlock> blocks;
  for (int i = 0; i < 2; ++i) {
    blocks.push_back({MatrixXd::Constant(1, 1, 2.0), VectorXd::Constant(1, -2.0), MatrixXd::Constant(1, 1, 1.0)});
  }
  return dualqp::SeparableQP(std::move(blocks), VectorXd::Constant(1, 1.0), alpha);
}

/// Random well-conditioned instance, drawn independently of the generator.
inline dualqp::SeparableQP random_qp(std::uint64_t seed, Index blocks, Index n, Index m, double alpha) {
  dualqp::Rng rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<dualqp::QpBlock> out;
  for (Index i = 0; i < blocks; ++i) {
    MatrixXd L(n, n);
    for (Index r = 0; r < n; ++r)
      for (Index c = 0; c < n; ++c) L(r, c) = u(rng);
    MatrixXd Q = multiply(MatrixXd(L.transpose()), L) + MatrixXd::Identity(n, n);
    Q = 0.5 * (Q + MatrixXd(Q.transpose()));
    VectorXd c(n);
    for (Index r = 0; r < n; ++r) c(r) = u(rng);
    MatrixXd A(m, n);
    for (Index r = 0; r < m; ++r)
      for (Index cc = 0; cc < n; ++cc) A(r, cc) = u(rng);
    out.push_back({Q, c, A});
  }
  VectorXd b(m);
  for (Index r = 0; r < m; ++r) b(r) = u(rng);
  return dualqp::SeparableQP(std::move(out), b, alpha);
}

}  // namespace oracle
