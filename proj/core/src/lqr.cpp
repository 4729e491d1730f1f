#include "koopquad/lqr.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <Eigen/LU>
#include <nlohmann/json.hpp>

namespace koopquad {

namespace {
constexpr double kDivergenceNorm = 1e6;
constexpr double kResidualBound = 1e-8;

void require_symmetric(const Eigen::MatrixXd& m, const char* name, double tol) {
  if ((m - m.transpose()).cwiseAbs().maxCoeff() > tol)
    throw std::invalid_argument(std::string(name) + " must be symmetric");
}
}  // namespace

Eigen::MatrixXd pad_weight(const Eigen::MatrixXd& Q, Eigen::Index p) {
  if (Q.rows() != Q.cols()) throw std::invalid_argument("pad_weight: Q must be square");
  if (p <= Q.rows()) throw std::invalid_argument("pad_weight: lifted dim must exceed state dim");
  require_symmetric(Q, "pad_weight: Q", 1e-9);

  Eigen::MatrixXd padded = Eigen::MatrixXd::Zero(p, p);
  padded.topLeftCorner(Q.rows(), Q.cols()) = Q;
  return padded;
}

LqrGain solve_dare(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B, const Eigen::MatrixXd& Q,
                   const Eigen::MatrixXd& R, double tolerance, int max_iterations) {
  const Eigen::Index p = A.rows();
  const Eigen::Index l = B.cols();
  if (A.cols() != p || B.rows() != p || Q.rows() != p || Q.cols() != p || R.rows() != l ||
      R.cols() != l)
    throw std::invalid_argument("solve_dare: dimension mismatch");

  require_symmetric(Q, "solve_dare: Q", 1e-9);
  require_symmetric(R, "solve_dare: R", 1e-9);

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> q_eigs(Q, Eigen::EigenvaluesOnly);
  if (q_eigs.eigenvalues().minCoeff() < -1e-10)
    throw std::invalid_argument("solve_dare: Q must be positive semidefinite");

  Eigen::LLT<Eigen::MatrixXd> r_llt(R);
  if (r_llt.info() != Eigen::Success)
    throw std::invalid_argument("solve_dare: R must be positive definite");

  // Structure-preserving doubling: each pass squares the effective horizon,
  // so convergence is quadratic whenever the stabilizing solution exists.
  Eigen::MatrixXd a_k = A;
  Eigen::MatrixXd g_k = B * r_llt.solve(B.transpose());
  Eigen::MatrixXd h_k = Q;

  const Eigen::MatrixXd identity = Eigen::MatrixXd::Identity(p, p);
  int iterations = 0;
  bool converged = false;
  while (iterations < max_iterations) {
    ++iterations;
    const Eigen::MatrixXd w = identity + g_k * h_k;
    Eigen::PartialPivLU<Eigen::MatrixXd> w_lu(w);
    const Eigen::MatrixXd v1 = w_lu.solve(a_k);
    const Eigen::MatrixXd v2 = w_lu.solve(g_k.transpose()).transpose();

    g_k += a_k * v2 * a_k.transpose();
    const Eigen::MatrixXd h_next = h_k + v1.transpose() * h_k * a_k;
    a_k = a_k * v1;

    const double delta = (h_next - h_k).norm();
    h_k = h_next;
    if (delta <= tolerance * std::max(h_k.norm(), 1.0)) {
      converged = true;
      break;
    }
  }

  if (!converged || !h_k.allFinite()) {
    const RankReport ctrb = check_controllability(A, B);
    std::ostringstream msg;
    msg << "solve_dare: no convergence after " << iterations
        << " iterations (controllability rank " << ctrb.rank << " of " << p
        << (ctrb.full_rank ? ", controllable" : ", NOT controllable") << ")";
    throw std::runtime_error(msg.str());
  }

  LqrGain gain;
  gain.P = 0.5 * (h_k + h_k.transpose());  // symmetrize accumulated roundoff
  gain.iterations = iterations;

  const Eigen::MatrixXd btp = B.transpose() * gain.P;
  gain.K = (R + btp * B).ldlt().solve(btp * A);

  const Eigen::MatrixXd residual =
      A.transpose() * gain.P * A - gain.P - A.transpose() * gain.P * B * gain.K + Q;
  gain.dare_residual = residual.norm() / std::max(gain.P.norm(), 1e-300);
  if (gain.dare_residual > kResidualBound) {
    std::ostringstream msg;
    msg << "solve_dare: relative Riccati residual " << gain.dare_residual << " exceeds "
        << kResidualBound;
    throw std::runtime_error(msg.str());
  }

  gain.spectral_radius = spectrum(A - B * gain.K).spectral_radius;
  return gain;
}

RotorCommand koopman_lqr_control(const LiftedModel& model, const LqrGain& gain, const StateVec& x,
                                 const StateVec& x_ref, const Vec4& u_ff, int* saturation_count) {
  if (gain.K.cols() != model.lifted_dim() || gain.K.rows() != model.input_dim())
    throw std::invalid_argument("koopman_lqr_control: gain/model dimension mismatch");

  const Eigen::VectorXd lifted_error = model.dictionary.lift(x) - model.dictionary.lift(x_ref);
  const Vec4 raw = u_ff - gain.K * lifted_error;
  int clamp_events = 0;
  const RotorCommand cmd = RotorCommand(raw).clamped(&clamp_events);
  if (saturation_count && clamp_events > 0) ++*saturation_count;
  return cmd;
}

RolloutLog rollout_closed_loop(const LiftedModel& model, const LqrGain& gain,
                               const Trajectory& trajectory, const QuadParams& params,
                               Eigen::Index steps) {
  if (steps + 1 > trajectory.size())
    throw std::invalid_argument("rollout_closed_loop: steps exceed trajectory length");
  params.validate();

  const double dt = trajectory.dt();
  const Vec4 u_ff = params.hover_thrusts();

  RolloutLog log;
  log.times.resize(steps + 1);
  log.states.resize(12, steps + 1);
  log.references.resize(12, steps + 1);
  log.inputs.resize(4, std::max<Eigen::Index>(steps, 0));

  QuadState x;
  x.position = trajectory.positions.col(0);

  int saturations = 0;
  for (Eigen::Index k = 0; k <= steps; ++k) {
    log.times(k) = trajectory.times(k);
    log.states.col(k) = to_analysis_state(x);
    log.references.col(k) = trajectory.reference_state(k);
    if (k == steps) break;

    const RotorCommand u = koopman_lqr_control(model, gain, log.states.col(k),
                                               trajectory.reference_state(k), u_ff, &saturations);
    log.inputs.col(k) = u.thrusts;
    x = rk4_step(x, u, dt, params);
    if (!x.finite() || to_analysis_state(x).norm() > kDivergenceNorm) {
      log.diverged_at = k + 1;
      log.times.conservativeResize(k + 2);
      log.states.conservativeResize(12, k + 2);
      log.references.conservativeResize(12, k + 2);
      log.inputs.conservativeResize(4, k + 1);
      log.times(k + 1) = trajectory.times(k + 1);
      log.states.col(k + 1) = to_analysis_state(x);
      log.references.col(k + 1) = trajectory.reference_state(k + 1);
      break;
    }
  }
  log.saturation_count = saturations;
  return log;
}

nlohmann::json gain_to_json(const LqrGain& gain, const LiftedModel& model,
                            const Eigen::MatrixXd& Q, const Eigen::MatrixXd& R) {
  nlohmann::json j = model_to_json(model);
  j["K"] = matrix_to_json(gain.K);
  j["P"] = matrix_to_json(gain.P);
  j["spectral_radius"] = gain.spectral_radius;
  j["Q"] = matrix_to_json(Q);
  j["R"] = matrix_to_json(R);
  j["dare_residual"] = gain.dare_residual;
  j["dare_iterations"] = gain.iterations;
  return j;
}

LqrGain gain_from_json(const nlohmann::json& j) {
  const auto p = j.at("p").get<Eigen::Index>();
  const auto l = j.at("l").get<Eigen::Index>();

  LqrGain gain;
  gain.K = matrix_from_json(j.at("K"), l, p);
  gain.P = matrix_from_json(j.at("P"), p, p);
  gain.spectral_radius = j.at("spectral_radius").get<double>();
  gain.dare_residual = j.value("dare_residual", 0.0);
  gain.iterations = j.value("dare_iterations", 0);
  return gain;
}

}  // namespace koopquad
