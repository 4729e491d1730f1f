#pragma once

#include <Eigen/Dense>

namespace koopquad {

using Vec3 = Eigen::Vector3d;
using Vec4 = Eigen::Vector4d;
using Mat3 = Eigen::Matrix3d;

/// Unit quaternion stored scalar-first: (w, x, y, z).
using Quat = Eigen::Vector4d;

/// 12-dim analysis state: [p(3), v(3), euler(roll,pitch,yaw), omega(3)].
using StateVec = Eigen::Matrix<double, 12, 1>;

/// Physical parameters of the simulated vehicle. Defaults describe the small
/// quadrotor used throughout: 180 g, diagonal inertia, 8.6 cm moment arm.
/// The drag-torque coefficient is not part of that parameter set; the default
/// 0.01 m is a typical small-rotor value and is meant to be overridden from
/// configuration when a better estimate exists.
struct QuadParams {
  double mass{0.18};                             // kg
  double gravity{9.81};                          // m/s^2, magnitude
  Vec3 inertia_diag{0.00025, 0.000232, 0.0003738};  // kg m^2
  double arm_length{0.086};                      // m, center of mass to rotor axis
  double drag_torque_coeff{0.01};                // m, rotor thrust-to-torque ratio

  /// Throws std::invalid_argument on non-physical values.
  void validate() const;

  double hover_thrust_total() const { return mass * gravity; }
  Vec4 hover_thrusts() const { return Vec4::Constant(mass * gravity / 4.0); }
};

/// Four individual rotor thrusts in newtons, each expected >= 0.
struct RotorCommand {
  Vec4 thrusts{Vec4::Zero()};

  RotorCommand() = default;
  explicit RotorCommand(const Vec4& t) : thrusts(t) {}

  /// Returns a copy with negative thrusts clamped to zero. If any component
  /// was clamped, increments *clamp_count when provided.
  RotorCommand clamped(int* clamp_count = nullptr) const;
};

/// Full simulation state with quaternion attitude (13 dimensions).
struct QuadState {
  Vec3 position{Vec3::Zero()};    // world frame, m
  Vec3 velocity{Vec3::Zero()};    // world frame, m/s
  Quat attitude{1.0, 0.0, 0.0, 0.0};  // body-to-world, scalar-first
  Vec3 body_rates{Vec3::Zero()};  // body frame, rad/s

  bool finite() const;
};

/// Time derivative of QuadState, integrated componentwise.
struct StateDerivative {
  Vec3 d_position;
  Vec3 d_velocity;
  Quat d_attitude;
  Vec3 d_body_rates;
};

/// ZYX Euler angles extracted from a quaternion. `gimbal_lock` is set when
/// |pitch| is within 1e-6 rad of pi/2; in that case roll is fixed to zero by
/// convention and yaw absorbs the free rotation.
struct EulerAngles {
  double roll{0.0};
  double pitch{0.0};
  double yaw{0.0};
  bool gimbal_lock{false};
};

/// Hamilton product a (x) b in scalar-first convention.
Quat quat_mul(const Quat& a, const Quat& b);

Quat quat_conjugate(const Quat& q);

/// Rotation matrix equivalent to q (rotates body-frame vectors into world).
Mat3 rotation_matrix(const Quat& q);

/// q v q*. Throws std::invalid_argument if |q| deviates from 1 by more
/// than 1e-6.
Vec3 rotate_vector(const Quat& q, const Vec3& v);

EulerAngles quat_to_euler(const Quat& q);

/// Quaternion for the ZYX (yaw-pitch-roll) rotation Rz(yaw) Ry(pitch) Rx(roll).
Quat euler_to_quat(double roll, double pitch, double yaw);

Mat3 euler_to_rotation(double roll, double pitch, double yaw);

/// Net body-frame thrust vector and torque produced by the four rotors:
///   thrust = (0, 0, sum Ti)
///   torque = ( l (-T0 - T1 + T2 + T3),
///              l (-T0 + T1 + T2 - T3),
///              c_tau (-T0 + T1 - T2 + T3) )
struct BodyWrench {
  Vec3 thrust;
  Vec3 torque;
};
BodyWrench mix_rotors(const RotorCommand& u, const QuadParams& params);

/// 4x4 map from rotor thrusts to (total thrust, torque_x, torque_y, torque_z).
Eigen::Matrix4d mixing_matrix(const QuadParams& params);

/// Inverse allocation: per-rotor thrusts realizing the requested total thrust
/// and body torque (exact solve of the mixing system; no clamping).
Vec4 allocate_rotors(double total_thrust, const Vec3& torque, const QuadParams& params);

/// Continuous-time rigid-body dynamics:
///   dp = v
///   dv = (1/m) R(q) T_B + g_W,   g_W = (0, 0, -g)
///   dq = 1/2 q (x) (0, omega)
///   domega = J^-1 (tau_B - omega x J omega)
StateDerivative dynamics_rhs(const QuadState& x, const RotorCommand& u, const QuadParams& params);

/// Classic fourth-order Runge-Kutta step with u held constant (zero-order
/// hold). The attitude quaternion is renormalized after the update.
QuadState rk4_step(const QuadState& x, const RotorCommand& u, double dt, const QuadParams& params);

/// Conversions between the 13-dim simulation state and the 12-dim analysis
/// state with Euler attitude.
StateVec to_analysis_state(const QuadState& x);
QuadState from_analysis_state(const StateVec& x);

/// One RK4 step expressed on analysis states:
/// to_analysis(rk4(from_analysis(x), u)). Datasets are recorded through this
/// exact path so that stored snapshot pairs replay bit-for-bit.
StateVec step_analysis_state(const StateVec& x, const RotorCommand& u, double dt,
                             const QuadParams& params);

}  // namespace koopquad
