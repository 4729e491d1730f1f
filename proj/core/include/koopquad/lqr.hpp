#pragma once

#include <Eigen/Dense>
#include <nlohmann/json_fwd.hpp>

#include "koopquad/eval.hpp"
#include "koopquad/koopman.hpp"
#include "koopquad/reference.hpp"

namespace koopquad {

/// Embeds the state weight in the lifted space: Q_bar = [[Q, 0], [0, 0]],
/// p x p. The input weight is unchanged because inputs are not lifted.
/// Throws on asymmetric Q (deviation above 1e-9) or p <= n.
Eigen::MatrixXd pad_weight(const Eigen::MatrixXd& Q, Eigen::Index p);

/// Infinite-horizon discrete-time LQR solution.
struct LqrGain {
  Eigen::MatrixXd K;  // l x p
  Eigen::MatrixXd P;  // p x p Riccati solution
  double spectral_radius{0.0};  // of A - B K
  double dare_residual{0.0};    // Frobenius norm, relative to |P|_F
  int iterations{0};
};

/// Solves A'PA - P - A'PB (R + B'PB)^-1 B'PA + Q = 0 by the structure-
/// preserving doubling iteration, then K = (R + B'PB)^-1 B'PA.
///
/// Requires Q symmetric PSD and R symmetric PD. Convergence within
/// `tolerance` (relative change in P) and `max_iterations` is enforced; on
/// failure the error message carries the controllability rank of (A, B).
/// The residual check ||residual|| <= 1e-8 ||P|| runs on every solve.
LqrGain solve_dare(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B, const Eigen::MatrixXd& Q,
                   const Eigen::MatrixXd& R, double tolerance = 1e-12, int max_iterations = 200);

/// Lifted-error state feedback around the reference with hover feedforward:
/// u = u_ff - K (lift(x) - lift(x_ref)), rotor thrusts clamped at zero.
/// Saturation events are counted into *saturation_count when provided.
RotorCommand koopman_lqr_control(const LiftedModel& model, const LqrGain& gain, const StateVec& x,
                                 const StateVec& x_ref, const Vec4& u_ff,
                                 int* saturation_count = nullptr);

/// Closed-loop rollout of the nonlinear plant under koopman_lqr_control for
/// `steps` steps of the trajectory grid. Starts at the first reference
/// position, at rest, identity attitude; logs state, reference, and input;
/// reports divergence (state norm above 1e6) with the step index.
RolloutLog rollout_closed_loop(const LiftedModel& model, const LqrGain& gain,
                               const Trajectory& trajectory, const QuadParams& params,
                               Eigen::Index steps);

/// Same envelope as the model JSON plus K, P, spectral_radius, and the
/// weights Q, R the gain was synthesized for.
nlohmann::json gain_to_json(const LqrGain& gain, const LiftedModel& model,
                            const Eigen::MatrixXd& Q, const Eigen::MatrixXd& R);
LqrGain gain_from_json(const nlohmann::json& j);

}  // namespace koopquad
