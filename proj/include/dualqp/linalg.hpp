#pragma once

// Dense kernels shared by the solver and the switched-system analysis.
// Everything here is a free function over Eigen expressions and is
// templated on the scalar type; the rest of the library instantiates it
// with double.

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

namespace dualqp {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

class SingularMatrixError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ConvergenceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

namespace linalg {

template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

/// Largest dimension for which spectral_radius runs a dense eigensolver.
inline constexpr Index kDenseEigenLimit = 256;

/// Reciprocal condition estimates below this are treated as singular.
inline constexpr double kMinReciprocalCondition = 1e-12;

template <typename DerivedA, typename DerivedB>
Matrix<typename DerivedA::Scalar> kron(const Eigen::MatrixBase<DerivedA>& a,
                                       const Eigen::MatrixBase<DerivedB>& b) {
  if (a.size() == 0 || b.size() == 0) {
    throw std::invalid_argument("kron: empty operand");
  }
  const Index br = b.rows();
  const Index bc = b.cols();
  Matrix<typename DerivedA::Scalar> out(a.rows() * br, a.cols() * bc);
  for (Index i = 0; i < a.rows(); ++i) {
    for (Index j = 0; j < a.cols(); ++j) {
      out.block(i * br, j * bc, br, bc) = a(i, j) * b;
    }
  }
  return out;
}

/// Induced infinity norm: max over rows of the absolute row sum.
template <typename Derived>
typename Derived::RealScalar inf_norm(const Eigen::MatrixBase<Derived>& m) {
  if (m.size() == 0) {
    throw std::invalid_argument("inf_norm: empty matrix");
  }
  return m.cwiseAbs().rowwise().sum().maxCoeff();
}

/// Subspace (block power) iteration with Rayleigh-Ritz extraction.
///
/// `apply(v)` must return the operator applied to v. The block keeps a few
/// vectors so complex-conjugate dominant pairs are captured. Throws
/// ConvergenceError when the estimate has not settled within max_iters.
template <typename Scalar, typename Apply>
Scalar spectral_radius_iterative(Apply&& apply, Index n, Scalar tol,
                                 int max_iters = 20000) {
  if (n <= 0) {
    throw std::invalid_argument("spectral_radius_iterative: empty operator");
  }
  const Index p = std::min<Index>(n, 6);
  Matrix<Scalar> basis(n, p);
  // Deterministic, non-degenerate start block.
  for (Index j = 0; j < p; ++j) {
    for (Index i = 0; i < n; ++i) {
      basis(i, j) = std::cos(Scalar(1 + i) * Scalar(0.7 + 0.37 * j)) + Scalar(1e-3) * Scalar(i % 7);
    }
  }
  Eigen::HouseholderQR<Matrix<Scalar>> qr(basis);
  basis = qr.householderQ() * Matrix<Scalar>::Identity(n, p);

  Scalar previous = -1;
  int settled = 0;
  Matrix<Scalar> image(n, p);
  for (int it = 0; it < max_iters; ++it) {
    for (Index j = 0; j < p; ++j) {
      image.col(j) = apply(basis.col(j));
    }
    const Matrix<Scalar> projected = basis.transpose() * image;
    Eigen::EigenSolver<Matrix<Scalar>> es(projected, false);
    if (es.info() != Eigen::Success) {
      throw ConvergenceError("spectral_radius_iterative: Ritz eigensolve failed");
    }
    const Scalar estimate = es.eigenvalues().cwiseAbs().maxCoeff();
    if (image.norm() == Scalar(0)) {
      return Scalar(0);
    }
    Eigen::HouseholderQR<Matrix<Scalar>> next(image);
    basis = next.householderQ() * Matrix<Scalar>::Identity(n, p);
    if (previous >= 0 && std::abs(estimate - previous) <= tol * std::max(Scalar(1), estimate)) {
      if (++settled >= 5) {
        return estimate;
      }
    } else {
      settled = 0;
    }
    previous = estimate;
  }
  throw ConvergenceError("spectral_radius_iterative: no convergence after " +
                         std::to_string(max_iters) + " iterations");
}

/// max |lambda| over the eigenvalues of a square matrix.
///
/// Dense eigensolver up to kDenseEigenLimit rows, subspace iteration above.
template <typename Derived>
typename Derived::RealScalar spectral_radius(const Eigen::MatrixBase<Derived>& m,
                                             typename Derived::RealScalar tol = 1e-12) {
  using Scalar = typename Derived::Scalar;
  if (m.rows() != m.cols()) {
    throw std::invalid_argument("spectral_radius: matrix is not square");
  }
  if (m.rows() == 0) {
    throw std::invalid_argument("spectral_radius: empty matrix");
  }
  if (!(tol > 0)) {
    throw std::invalid_argument("spectral_radius: tolerance must be positive");
  }
  const Matrix<Scalar> dense = m;
  if (!dense.allFinite()) {
    throw std::invalid_argument("spectral_radius: non-finite entries");
  }
  if (dense.rows() <= kDenseEigenLimit) {
    Eigen::EigenSolver<Matrix<Scalar>> es(dense, false);
    if (es.info() != Eigen::Success) {
      throw ConvergenceError("spectral_radius: dense eigensolver did not converge");
    }
    return es.eigenvalues().cwiseAbs().maxCoeff();
  }
  return spectral_radius_iterative<Scalar>(
      [&dense](const auto& v) -> Vector<Scalar> { return dense * v; }, dense.rows(), tol);
}

/// Reciprocal condition estimate of a square matrix (LU based).
template <typename Derived>
typename Derived::RealScalar reciprocal_condition(const Eigen::MatrixBase<Derived>& m) {
  if (m.rows() != m.cols() || m.rows() == 0) {
    throw std::invalid_argument("reciprocal_condition: matrix must be square and nonempty");
  }
  Eigen::PartialPivLU<Matrix<typename Derived::Scalar>> lu(m);
  return lu.rcond();
}

template <typename Derived>
Matrix<typename Derived::Scalar> inverse(const Eigen::MatrixBase<Derived>& m) {
  if (m.rows() != m.cols()) {
    throw std::invalid_argument("inverse: matrix is not square");
  }
  if (m.rows() == 0) {
    throw std::invalid_argument("inverse: empty matrix");
  }
  Eigen::PartialPivLU<Matrix<typename Derived::Scalar>> lu(m);
  const auto rc = lu.rcond();
  if (!(rc >= kMinReciprocalCondition)) {
    throw SingularMatrixError("inverse: matrix is singular (rcond " + std::to_string(rc) + ")");
  }
  return lu.inverse();
}

/// Solves m * x = rhs with the same singularity guard as inverse().
template <typename DerivedM, typename DerivedR>
Matrix<typename DerivedM::Scalar> solve(const Eigen::MatrixBase<DerivedM>& m,
                                        const Eigen::MatrixBase<DerivedR>& rhs) {
  if (m.rows() != m.cols() || m.rows() != rhs.rows()) {
    throw std::invalid_argument("solve: shape mismatch");
  }
  Eigen::PartialPivLU<Matrix<typename DerivedM::Scalar>> lu(m);
  const auto rc = lu.rcond();
  if (!(rc >= kMinReciprocalCondition)) {
    throw SingularMatrixError("solve: matrix is singular (rcond " + std::to_string(rc) + ")");
  }
  return lu.solve(rhs);
}

/// ||m^k||_inf for k = 0..k_max.
///
/// The running power is rescaled whenever its norm leaves [1e-100, 1e100],
/// so unstable matrices report +inf instead of NaN once they overflow.
template <typename Derived>
std::vector<typename Derived::RealScalar> power_inf_norms(const Eigen::MatrixBase<Derived>& m,
                                                          Index k_max) {
  using Real = typename Derived::RealScalar;
  if (m.rows() != m.cols() || m.rows() == 0) {
    throw std::invalid_argument("power_inf_norms: matrix must be square and nonempty");
  }
  if (k_max < 0) {
    throw std::invalid_argument("power_inf_norms: negative power");
  }
  const Matrix<typename Derived::Scalar> base = m;
  Matrix<typename Derived::Scalar> power =
      Matrix<typename Derived::Scalar>::Identity(base.rows(), base.cols());
  Real log_scale = 0;
  std::vector<Real> norms;
  norms.reserve(static_cast<std::size_t>(k_max) + 1);
  norms.push_back(Real(1));
  for (Index k = 1; k <= k_max; ++k) {
    power = base * power;
    const Real scaled = inf_norm(power);
    if (scaled == Real(0)) {
      norms.push_back(Real(0));
      continue;
    }
    norms.push_back(std::exp(log_scale + std::log(scaled)));
    if (scaled > Real(1e100) || scaled < Real(1e-100)) {
      power /= scaled;
      log_scale += std::log(scaled);
    }
  }
  return norms;
}

}  // namespace linalg
}  // namespace dualqp
