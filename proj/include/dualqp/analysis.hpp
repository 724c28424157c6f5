#pragma once

// Mean-square certification and rate-of-convergence envelopes for the
// synchronous, deterministic-asynchronous and stochastic-asynchronous dual
// iterations.

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "dualqp/linalg.hpp"
#include "dualqp/switched.hpp"

namespace dualqp {

enum class Scheme { Synchronous, DetAsync, StoAsync };

std::string_view to_string(Scheme scheme);
/// Accepts "sync"/"synchronous", "det_async", "sto_async".
Scheme parse_scheme(std::string_view name);

/// Verdicts require rho < 1 - kStabilityGuardBand.
inline constexpr double kStabilityGuardBand = 1e-9;

struct StabilityReport {
  double ms_spectral_radius = 0;
  bool is_ms_convergent = false;
  std::optional<VectorXd> fixed_point;
  MatrixXd lambda;
  std::string notes;
};

/// sum_j pi_j (W_j (x) W_j).
MatrixXd second_moment_matrix(const SwitchedSystem& sys);

/// Same operator applied to vec(P) without forming it:
/// P -> sum_j pi_j W_j P W_j'.
MatrixXd apply_second_moment(const SwitchedSystem& sys, const MatrixXd& P);

/// rho of the second-moment operator; dense for (q m)^2 <= 256,
/// matrix-free subspace iteration above.
double second_moment_spectral_radius(const SwitchedSystem& sys, double tol = 1e-12);

StabilityReport ms_stability(const SwitchedSystem& sys, double tol = 1e-12);

/// ms verdict and radius computed over the unreduced joint outcomes
/// (sum_t p_t W_t (x) W_t with W_t = the reduced matrix of outcome t).
StabilityReport ms_stability_enumerated(const std::vector<JointMode>& joint, const SwitchedSystem& sys,
                                        double tol = 1e-12);

/// Y* = (I - W_sync)^{-1} C; every block equals y*. Throws
/// SingularMatrixError when R is singular.
VectorXd fixed_point(const SwitchedSystem& sys);

/// max_r ||(I - W_r) Y - C||_inf.
double fixed_point_residual(const SwitchedSystem& sys, const VectorXd& Y);

/// Mean dynamics companion([I - pi_1 R, -pi_2 R, ..., -pi_q R]).
MatrixXd lambda_matrix(const SwitchedSystem& sys);

struct EnvelopePoint {
  Index k = 0;
  double bound = 0;       // ||M^t||_inf ||Y0 - Y*||_inf
  double normalized = 0;  // ||M^t||_inf
};

struct RateEnvelope {
  Scheme scheme = Scheme::StoAsync;
  std::vector<EnvelopePoint> steps;  // k = 0..k_max
  /// Synchronous only: the points k = t (q + 1) where an update lands.
  std::vector<EnvelopePoint> update_points;
  bool sync_step_schedule = false;
  double initial_error = 0;
};

/// Envelope ||M^t||_inf ||Y0 - Y*||_inf over k = 0..k_max.
///
/// Asynchronous schemes update every iteration (t = k). The synchronous
/// scheme waits q idle steps per update, so its t-th update lands at
/// k = t (q + 1) and the bound is held flat in between.
RateEnvelope rate_envelope(Scheme scheme, const MatrixXd& M, const VectorXd& Y0, const VectorXd& Y_star,
                           Index k_max, Index q);

struct SchemeEnvelopes {
  RateEnvelope synchronous;
  RateEnvelope det_async;
  RateEnvelope sto_async;
};

/// All three envelopes for a reduced system (W_sync = mode 0,
/// W_det = mode q-1, Lambda).
SchemeEnvelopes rate_envelopes(const SwitchedSystem& sys, const VectorXd& Y0, Index k_max);

/// First k whose bound is below threshold.
std::optional<Index> first_crossing(const RateEnvelope& env, double threshold);

/// E[Y^k] for k = 0..k_max via E[Y+] = Lambda E[Y] + C.
std::vector<VectorXd> expected_trajectory(const SwitchedSystem& sys, const VectorXd& Y0, Index k_max);

}  // namespace dualqp
