#include "koopquad/quadsim.hpp"

#include <cmath>
#include <stdexcept>

namespace koopquad {

namespace {
constexpr double kUnitNormTol = 1e-6;
constexpr double kGimbalLockTol = 1e-6;  // rad, distance of |pitch| from pi/2
}  // namespace

void QuadParams::validate() const {
  if (!(mass > 0.0)) throw std::invalid_argument("QuadParams: mass must be > 0");
  if (!(gravity > 0.0)) throw std::invalid_argument("QuadParams: gravity must be > 0");
  if (!(inertia_diag.array() > 0.0).all())
    throw std::invalid_argument("QuadParams: inertia diagonal must be > 0");
  if (!(arm_length > 0.0)) throw std::invalid_argument("QuadParams: arm length must be > 0");
  if (!(drag_torque_coeff > 0.0))
    throw std::invalid_argument("QuadParams: drag torque coefficient must be > 0");
}

RotorCommand RotorCommand::clamped(int* clamp_count) const {
  RotorCommand out(thrusts.cwiseMax(0.0));
  if (clamp_count && (thrusts.array() < 0.0).any()) ++*clamp_count;
  return out;
}

bool QuadState::finite() const {
  return position.allFinite() && velocity.allFinite() && attitude.allFinite() &&
         body_rates.allFinite();
}

Quat quat_mul(const Quat& a, const Quat& b) {
  const double w1 = a(0), x1 = a(1), y1 = a(2), z1 = a(3);
  const double w2 = b(0), x2 = b(1), y2 = b(2), z2 = b(3);
  return Quat(w1 * w2 - x1 * x2 - y1 * y2 - z1 * z2,
              w1 * x2 + x1 * w2 + y1 * z2 - z1 * y2,
              w1 * y2 - x1 * z2 + y1 * w2 + z1 * x2,
              w1 * z2 + x1 * y2 - y1 * x2 + z1 * w2);
}

Quat quat_conjugate(const Quat& q) { return Quat(q(0), -q(1), -q(2), -q(3)); }

Mat3 rotation_matrix(const Quat& q) {
  const double w = q(0), x = q(1), y = q(2), z = q(3);
  Mat3 r;
  r << 1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y),
       2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x),
       2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y);
  return r;
}

Vec3 rotate_vector(const Quat& q, const Vec3& v) {
  if (std::abs(q.norm() - 1.0) > kUnitNormTol)
    throw std::invalid_argument("rotate_vector: quaternion is not unit norm");
  const Quat pv(0.0, v(0), v(1), v(2));
  const Quat rotated = quat_mul(quat_mul(q, pv), quat_conjugate(q));
  return Vec3(rotated(1), rotated(2), rotated(3));
}

EulerAngles quat_to_euler(const Quat& q) {
  const double w = q(0), x = q(1), y = q(2), z = q(3);
  EulerAngles e;

  const double sin_pitch = 2.0 * (w * y - x * z);
  // |pitch| within kGimbalLockTol of pi/2 <=> sin(pitch) >= cos(kGimbalLockTol)
  const double lock_threshold = std::cos(kGimbalLockTol);
  if (sin_pitch >= lock_threshold) {
    e.pitch = std::asin(std::min(sin_pitch, 1.0));
    e.roll = 0.0;
    // Remaining freedom folded into yaw: with roll = 0, R22 = cos(yaw - roll)
    // and R23 = sin(yaw - roll) at pitch = +pi/2.
    e.yaw = std::atan2(2.0 * (y * z - w * x), 1.0 - 2.0 * (x * x + z * z));
    e.gimbal_lock = true;
  } else if (sin_pitch <= -lock_threshold) {
    e.pitch = std::asin(std::max(sin_pitch, -1.0));
    e.roll = 0.0;
    e.yaw = std::atan2(-2.0 * (y * z - w * x), 1.0 - 2.0 * (x * x + z * z));
    e.gimbal_lock = true;
  } else {
    e.roll = std::atan2(2.0 * (y * z + w * x), 1.0 - 2.0 * (x * x + y * y));
    e.pitch = std::asin(sin_pitch);
    e.yaw = std::atan2(2.0 * (x * y + w * z), 1.0 - 2.0 * (y * y + z * z));
    e.gimbal_lock = false;
  }
  return e;
}

Quat euler_to_quat(double roll, double pitch, double yaw) {
  const Quat qx(std::cos(roll / 2), std::sin(roll / 2), 0.0, 0.0);
  const Quat qy(std::cos(pitch / 2), 0.0, std::sin(pitch / 2), 0.0);
  const Quat qz(std::cos(yaw / 2), 0.0, 0.0, std::sin(yaw / 2));
  return quat_mul(qz, quat_mul(qy, qx));
}

Mat3 euler_to_rotation(double roll, double pitch, double yaw) {
  const double cr = std::cos(roll), sr = std::sin(roll);
  const double cp = std::cos(pitch), sp = std::sin(pitch);
  const double cy = std::cos(yaw), sy = std::sin(yaw);
  Mat3 r;
  r << cy * cp, cy * sp * sr - sy * cr, cy * sp * cr + sy * sr,
       sy * cp, sy * sp * sr + cy * cr, sy * sp * cr - cy * sr,
       -sp, cp * sr, cp * cr;
  return r;
}

BodyWrench mix_rotors(const RotorCommand& u, const QuadParams& params) {
  const double t0 = u.thrusts(0), t1 = u.thrusts(1), t2 = u.thrusts(2), t3 = u.thrusts(3);
  const double l = params.arm_length;
  const double c = params.drag_torque_coeff;
  BodyWrench w;
  w.thrust = Vec3(0.0, 0.0, t0 + t1 + t2 + t3);
  w.torque = Vec3(l * (-t0 - t1 + t2 + t3),
                  l * (-t0 + t1 + t2 - t3),
                  c * (-t0 + t1 - t2 + t3));
  return w;
}

Eigen::Matrix4d mixing_matrix(const QuadParams& params) {
  const double l = params.arm_length;
  const double c = params.drag_torque_coeff;
  Eigen::Matrix4d m;
  m << 1, 1, 1, 1,
       -l, -l, l, l,
       -l, l, l, -l,
       -c, c, -c, c;
  return m;
}

Vec4 allocate_rotors(double total_thrust, const Vec3& torque, const QuadParams& params) {
  Vec4 wrench;
  wrench << total_thrust, torque(0), torque(1), torque(2);
  return mixing_matrix(params).partialPivLu().solve(wrench);
}

StateDerivative dynamics_rhs(const QuadState& x, const RotorCommand& u, const QuadParams& params) {
  const BodyWrench wrench = mix_rotors(u, params);
  const Vec3 gravity_w(0.0, 0.0, -params.gravity);

  StateDerivative d;
  d.d_position = x.velocity;
  d.d_velocity = rotation_matrix(x.attitude) * wrench.thrust / params.mass + gravity_w;
  d.d_attitude = 0.5 * quat_mul(x.attitude, Quat(0.0, x.body_rates(0), x.body_rates(1),
                                                 x.body_rates(2)));
  const Vec3 j_omega = params.inertia_diag.cwiseProduct(x.body_rates);
  d.d_body_rates =
      (wrench.torque - x.body_rates.cross(j_omega)).cwiseQuotient(params.inertia_diag);
  return d;
}

namespace {

QuadState add_scaled(const QuadState& x, const StateDerivative& d, double h) {
  QuadState out;
  out.position = x.position + h * d.d_position;
  out.velocity = x.velocity + h * d.d_velocity;
  out.attitude = x.attitude + h * d.d_attitude;
  out.body_rates = x.body_rates + h * d.d_body_rates;
  return out;
}

}  // namespace

QuadState rk4_step(const QuadState& x, const RotorCommand& u, double dt, const QuadParams& params) {
  if (!(dt > 0.0)) throw std::invalid_argument("rk4_step: dt must be > 0");

  const StateDerivative k1 = dynamics_rhs(x, u, params);
  const StateDerivative k2 = dynamics_rhs(add_scaled(x, k1, dt / 2), u, params);
  const StateDerivative k3 = dynamics_rhs(add_scaled(x, k2, dt / 2), u, params);
  const StateDerivative k4 = dynamics_rhs(add_scaled(x, k3, dt), u, params);

  QuadState next;
  next.position =
      x.position + dt / 6.0 * (k1.d_position + 2 * k2.d_position + 2 * k3.d_position + k4.d_position);
  next.velocity =
      x.velocity + dt / 6.0 * (k1.d_velocity + 2 * k2.d_velocity + 2 * k3.d_velocity + k4.d_velocity);
  next.attitude =
      x.attitude + dt / 6.0 * (k1.d_attitude + 2 * k2.d_attitude + 2 * k3.d_attitude + k4.d_attitude);
  next.body_rates = x.body_rates + dt / 6.0 * (k1.d_body_rates + 2 * k2.d_body_rates +
                                               2 * k3.d_body_rates + k4.d_body_rates);
  next.attitude.normalize();
  return next;
}

StateVec to_analysis_state(const QuadState& x) {
  const EulerAngles e = quat_to_euler(x.attitude);
  StateVec out;
  out.segment<3>(0) = x.position;
  out.segment<3>(3) = x.velocity;
  out(6) = e.roll;
  out(7) = e.pitch;
  out(8) = e.yaw;
  out.segment<3>(9) = x.body_rates;
  return out;
}

QuadState from_analysis_state(const StateVec& x) {
  QuadState out;
  out.position = x.segment<3>(0);
  out.velocity = x.segment<3>(3);
  out.attitude = euler_to_quat(x(6), x(7), x(8));
  out.body_rates = x.segment<3>(9);
  return out;
}

StateVec step_analysis_state(const StateVec& x, const RotorCommand& u, double dt,
                             const QuadParams& params) {
  return to_analysis_state(rk4_step(from_analysis_state(x), u, dt, params));
}

}  // namespace koopquad
