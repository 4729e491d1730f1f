#include "koopquad/reference.hpp"

#include <cmath>
#include <random>
#include <stdexcept>

namespace koopquad {

namespace {
constexpr double kDivergenceNorm = 1e6;

double wrap_angle(double a) {
  while (a > M_PI) a -= 2.0 * M_PI;
  while (a < -M_PI) a += 2.0 * M_PI;
  return a;
}

Vec3 clamp_abs(const Vec3& v, double limit) {
  return v.cwiseMax(-limit).cwiseMin(limit);
}
}  // namespace

StateVec Trajectory::reference_state(Eigen::Index i) const {
  StateVec r = StateVec::Zero();
  r.segment<3>(0) = positions.col(i);
  r.segment<3>(3) = velocities.col(i);
  r(8) = yaws(i);
  return r;
}

Trajectory gen_helix(const HelixSpec& spec) {
  if (!(spec.dt > 0.0)) throw std::invalid_argument("gen_helix: dt must be > 0");
  if (!(spec.duration > 0.0)) throw std::invalid_argument("gen_helix: duration must be > 0");

  const Eigen::Index n = static_cast<Eigen::Index>(std::llround(spec.duration / spec.dt)) + 1;
  const double climb_rate = spec.total_height / spec.duration;

  Trajectory traj;
  traj.times.resize(n);
  traj.positions.resize(3, n);
  traj.velocities.resize(3, n);
  traj.yaws = Eigen::VectorXd::Zero(n);

  for (Eigen::Index i = 0; i < n; ++i) {
    const double t = static_cast<double>(i) * spec.dt;
    const double a = spec.angular_rate * t;
    traj.times(i) = t;
    traj.positions.col(i) = spec.center + Vec3(spec.radius * std::cos(a),
                                               spec.radius * std::sin(a), climb_rate * t);
    traj.velocities.col(i) = Vec3(-spec.radius * spec.angular_rate * std::sin(a),
                                  spec.radius * spec.angular_rate * std::cos(a), climb_rate);
  }
  return traj;
}

std::uint64_t derive_seed(std::uint64_t root, std::uint64_t stream) {
  // splitmix64 finalizer; decorrelates consecutive stream ids.
  std::uint64_t z = root + 0x9E3779B97F4A7C15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

std::vector<HelixSpec> sample_random_specs(int n, std::uint64_t seed, const HelixSampling& ranges) {
  if (n < 1) throw std::invalid_argument("sample_random_specs: n must be >= 1");

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> radius(ranges.radius_min, ranges.radius_max);
  std::uniform_real_distribution<double> height(ranges.height_min, ranges.height_max);

  std::vector<HelixSpec> specs(static_cast<std::size_t>(n), ranges.base);
  for (int i = 0; i < n; ++i) {
    specs[i].radius = radius(rng);
    specs[i].total_height = height(rng);
    specs[i].seed = derive_seed(seed, static_cast<std::uint64_t>(i));
  }
  return specs;
}

void PidGains::validate() const {
  const auto nonneg = [](const Vec3& v) { return (v.array() >= 0.0).all(); };
  if (!nonneg(pos_kp) || !nonneg(pos_ki) || !nonneg(pos_kd) || !nonneg(att_kp) ||
      !nonneg(att_ki) || !nonneg(att_kd))
    throw std::invalid_argument("PidGains: gains must be >= 0");
  if (!(max_tilt > 0.0)) throw std::invalid_argument("PidGains: max_tilt must be > 0");
}

RotorCommand pid_track(const QuadState& x, const TrajectorySample& ref, const PidGains& gains,
                       const QuadParams& params, PidState* state, double dt) {
  const Vec3 pos_err = ref.position - x.position;
  const Vec3 vel_err = ref.velocity - x.velocity;

  Vec3 pos_integral = Vec3::Zero();
  if (state) {
    state->pos_integral = clamp_abs(state->pos_integral + pos_err * dt, gains.integral_limit);
    pos_integral = state->pos_integral;
  }

  // Outer loop: commanded acceleration with gravity feedforward.
  const Vec3 accel_cmd = gains.pos_kp.cwiseProduct(pos_err) +
                         gains.pos_kd.cwiseProduct(vel_err) +
                         gains.pos_ki.cwiseProduct(pos_integral) + Vec3(0.0, 0.0, params.gravity);

  // Total thrust along the current body z-axis.
  const Vec3 body_z = rotation_matrix(x.attitude).col(2);
  const double thrust_total = std::max(0.0, params.mass * accel_cmd.dot(body_z));

  // Small-angle attitude targets realizing the horizontal acceleration at the
  // reference yaw.
  const EulerAngles euler = quat_to_euler(x.attitude);
  const double cy = std::cos(ref.yaw), sy = std::sin(ref.yaw);
  const double g = params.gravity;
  double roll_des = (accel_cmd(0) * sy - accel_cmd(1) * cy) / g;
  double pitch_des = (accel_cmd(0) * cy + accel_cmd(1) * sy) / g;
  const bool tilt_saturated =
      std::abs(roll_des) > gains.max_tilt || std::abs(pitch_des) > gains.max_tilt;
  roll_des = std::clamp(roll_des, -gains.max_tilt, gains.max_tilt);
  pitch_des = std::clamp(pitch_des, -gains.max_tilt, gains.max_tilt);

  const Vec3 att_err(wrap_angle(roll_des - euler.roll), wrap_angle(pitch_des - euler.pitch),
                     wrap_angle(ref.yaw - euler.yaw));

  Vec3 att_integral = Vec3::Zero();
  if (state) {
    state->att_integral = clamp_abs(state->att_integral + att_err * dt, gains.integral_limit);
    att_integral = state->att_integral;
  }

  // Inner loop: torque from attitude error and rate damping, scaled by the
  // inertia so gains read as angular accelerations.
  const Vec3 ang_accel_cmd = gains.att_kp.cwiseProduct(att_err) +
                             gains.att_ki.cwiseProduct(att_integral) -
                             gains.att_kd.cwiseProduct(x.body_rates);
  const Vec3 torque = params.inertia_diag.cwiseProduct(ang_accel_cmd);

  const Vec4 raw = allocate_rotors(thrust_total, torque, params);
  int clamp_events = 0;
  const RotorCommand cmd = RotorCommand(raw).clamped(&clamp_events);
  if (state && (clamp_events > 0 || tilt_saturated)) ++state->saturation_count;
  return cmd;
}

RotorCommand pd_track(const QuadState& x, const TrajectorySample& ref, const PidGains& gains,
                      const QuadParams& params) {
  return pid_track(x, ref, gains, params, nullptr, 0.0);
}

RolloutLog track_trajectory(const Trajectory& traj, const PidGains& gains,
                            const QuadParams& params, Eigen::Index steps) {
  if (steps + 1 > traj.size())
    throw std::invalid_argument("track_trajectory: steps exceed trajectory length");
  gains.validate();
  params.validate();

  const double dt = traj.dt();
  RolloutLog log;
  log.times.resize(steps + 1);
  log.states.resize(12, steps + 1);
  log.references.resize(12, steps + 1);
  log.inputs.resize(4, std::max<Eigen::Index>(steps, 0));

  QuadState x;
  x.position = traj.positions.col(0);

  PidState pid_state;
  Eigen::Index k = 0;
  for (; k <= steps; ++k) {
    log.times(k) = traj.times(k);
    log.states.col(k) = to_analysis_state(x);
    log.references.col(k) = traj.reference_state(k);
    if (k == steps) break;

    const RotorCommand u = pid_track(x, traj.sample(k), gains, params, &pid_state, dt);
    log.inputs.col(k) = u.thrusts;
    x = rk4_step(x, u, dt, params);
    if (!x.finite() || to_analysis_state(x).norm() > kDivergenceNorm) {
      log.diverged_at = k + 1;
      log.times.conservativeResize(k + 2);
      log.states.conservativeResize(12, k + 2);
      log.references.conservativeResize(12, k + 2);
      log.inputs.conservativeResize(4, k + 1);
      log.times(k + 1) = traj.times(k + 1);
      log.states.col(k + 1) = to_analysis_state(x);
      log.references.col(k + 1) = traj.reference_state(k + 1);
      break;
    }
  }
  log.saturation_count = pid_state.saturation_count;
  return log;
}

}  // namespace koopquad
