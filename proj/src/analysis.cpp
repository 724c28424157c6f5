#include "dualqp/analysis.hpp"

#include <sstream>
#include <stdexcept>
#include <string>

namespace dualqp {

std::string_view to_string(Scheme scheme) {
  switch (scheme) {
    case Scheme::Synchronous:
      return "sync";
    case Scheme::DetAsync:
      return "det_async";
    case Scheme::StoAsync:
      return "sto_async";
  }
  return "unknown";
}

Scheme parse_scheme(std::string_view name) {
  if (name == "sync" || name == "synchronous") {
    return Scheme::Synchronous;
  }
  if (name == "det_async" || name == "det") {
    return Scheme::DetAsync;
  }
  if (name == "sto_async" || name == "sto") {
    return Scheme::StoAsync;
  }
  throw std::invalid_argument("unknown scheme '" + std::string(name) + "'");
}

MatrixXd second_moment_matrix(const SwitchedSystem& sys) {
  const Index d = sys.state_dim();
  MatrixXd m2 = MatrixXd::Zero(d * d, d * d);
  for (Index r = 0; r < sys.q; ++r) {
    if (sys.pi(r) == 0.0) {
      continue;
    }
    const MatrixXd& w = sys.modes[static_cast<std::size_t>(r)];
    m2 += sys.pi(r) * linalg::kron(w, w);
  }
  return m2;
}

MatrixXd apply_second_moment(const SwitchedSystem& sys, const MatrixXd& P) {
  const Index d = sys.state_dim();
  MatrixXd out = MatrixXd::Zero(d, d);
  for (Index r = 0; r < sys.q; ++r) {
    if (sys.pi(r) == 0.0) {
      continue;
    }
    const MatrixXd& w = sys.modes[static_cast<std::size_t>(r)];
    out.noalias() += sys.pi(r) * (w * P * w.transpose());
  }
  return out;
}

double second_moment_spectral_radius(const SwitchedSystem& sys, double tol) {
  const Index d = sys.state_dim();
  if (d * d <= linalg::kDenseEigenLimit) {
    return linalg::spectral_radius(second_moment_matrix(sys), tol);
  }
  // (W (x) W) vec(P) = vec(W P W'), column-major vec.
  return linalg::spectral_radius_iterative<double>(
      [&sys, d](const auto& v) -> VectorXd {
        const MatrixXd P = Eigen::Map<const MatrixXd>(v.derived().data(), d, d);
        const MatrixXd image = apply_second_moment(sys, P);
        return Eigen::Map<const VectorXd>(image.data(), d * d);
      },
      d * d, tol);
}

namespace {

std::string tolerance_notes(double tol) {
  std::ostringstream os;
  os << "verdict: rho < 1 - " << kStabilityGuardBand << "; eigen tolerance " << tol
     << "; fixed point via (I - W_sync)^-1 C";
  return os.str();
}

StabilityReport finish_report(const SwitchedSystem& sys, double rho, double tol) {
  StabilityReport report;
  report.ms_spectral_radius = rho;
  report.is_ms_convergent = rho < 1.0 - kStabilityGuardBand;
  report.lambda = lambda_matrix(sys);
  report.notes = tolerance_notes(tol);
  try {
    report.fixed_point = fixed_point(sys);
  } catch (const SingularMatrixError&) {
    report.notes += "; fixed point unavailable (I - W_sync singular)";
  }
  return report;
}

}  // namespace

StabilityReport ms_stability(const SwitchedSystem& sys, double tol) {
  return finish_report(sys, second_moment_spectral_radius(sys, tol), tol);
}

StabilityReport ms_stability_enumerated(const std::vector<JointMode>& joint, const SwitchedSystem& sys,
                                        double tol) {
  if (joint.empty()) {
    throw std::invalid_argument("ms_stability_enumerated: no joint modes");
  }
  const Index d = joint.front().W_reduced.rows();
  MatrixXd m2 = MatrixXd::Zero(d * d, d * d);
  for (const JointMode& jm : joint) {
    if (jm.probability == 0.0) {
      continue;
    }
    m2 += jm.probability * linalg::kron(jm.W_reduced, jm.W_reduced);
  }
  StabilityReport report = finish_report(sys, linalg::spectral_radius(m2, tol), tol);
  report.notes += "; second moment summed over " + std::to_string(joint.size()) + " joint outcomes";
  return report;
}

VectorXd fixed_point(const SwitchedSystem& sys) {
  const Index d = sys.state_dim();
  const MatrixXd& w_sync = sys.modes.front();
  return linalg::solve(MatrixXd::Identity(d, d) - w_sync, sys.C);
}

double fixed_point_residual(const SwitchedSystem& sys, const VectorXd& Y) {
  double worst = 0.0;
  for (const MatrixXd& w : sys.modes) {
    const VectorXd r = Y - w * Y - sys.C;
    worst = std::max(worst, r.cwiseAbs().maxCoeff());
  }
  return worst;
}

MatrixXd lambda_matrix(const SwitchedSystem& sys) {
  const Index m = sys.m;
  std::vector<MatrixXd> row;
  row.reserve(static_cast<std::size_t>(sys.q));
  for (Index r = 0; r < sys.q; ++r) {
    row.push_back(-sys.pi(r) * sys.R);
  }
  row[0] += MatrixXd::Identity(m, m);
  return companion_matrix(row);
}

RateEnvelope rate_envelope(Scheme scheme, const MatrixXd& M, const VectorXd& Y0, const VectorXd& Y_star,
                           Index k_max, Index q) {
  if (k_max < 1) {
    throw std::invalid_argument("rate_envelope: k_max must be at least 1");
  }
  if (q < 1) {
    throw std::invalid_argument("rate_envelope: q must be at least 1");
  }
  if (M.rows() != Y0.size() || Y0.size() != Y_star.size()) {
    throw std::invalid_argument("rate_envelope: dimension mismatch");
  }
  RateEnvelope env;
  env.scheme = scheme;
  env.initial_error = (Y0 - Y_star).cwiseAbs().maxCoeff();
  env.sync_step_schedule = scheme == Scheme::Synchronous;
  const Index period = env.sync_step_schedule ? q + 1 : 1;
  const std::vector<double> norms = linalg::power_inf_norms(M, k_max / period);

  env.steps.reserve(static_cast<std::size_t>(k_max) + 1);
  for (Index k = 0; k <= k_max; ++k) {
    const double n = norms[static_cast<std::size_t>(k / period)];
    env.steps.push_back(EnvelopePoint{k, n * env.initial_error, n});
  }
  if (env.sync_step_schedule) {
    for (Index t = 0; t * period <= k_max; ++t) {
      const double n = norms[static_cast<std::size_t>(t)];
      env.update_points.push_back(EnvelopePoint{t * period, n * env.initial_error, n});
    }
  }
  return env;
}

SchemeEnvelopes rate_envelopes(const SwitchedSystem& sys, const VectorXd& Y0, Index k_max) {
  const VectorXd y_star = fixed_point(sys);
  return SchemeEnvelopes{
      rate_envelope(Scheme::Synchronous, sys.modes.front(), Y0, y_star, k_max, sys.q),
      rate_envelope(Scheme::DetAsync, sys.modes.back(), Y0, y_star, k_max, sys.q),
      rate_envelope(Scheme::StoAsync, lambda_matrix(sys), Y0, y_star, k_max, sys.q),
  };
}

std::optional<Index> first_crossing(const RateEnvelope& env, double threshold) {
  for (const EnvelopePoint& p : env.steps) {
    if (p.bound < threshold) {
      return p.k;
    }
  }
  return std::nullopt;
}

std::vector<VectorXd> expected_trajectory(const SwitchedSystem& sys, const VectorXd& Y0, Index k_max) {
  if (Y0.size() != sys.state_dim()) {
    throw std::invalid_argument("expected_trajectory: state dimension mismatch");
  }
  const MatrixXd lambda = lambda_matrix(sys);
  std::vector<VectorXd> out;
  out.reserve(static_cast<std::size_t>(k_max) + 1);
  out.push_back(Y0);
  for (Index k = 0; k < k_max; ++k) {
    out.push_back(lambda * out.back() + sys.C);
  }
  return out;
}

}  // namespace dualqp
