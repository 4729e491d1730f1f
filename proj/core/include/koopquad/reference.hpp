#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Dense>

#include "koopquad/quadsim.hpp"

namespace koopquad {

/// One sample of a reference trajectory.
struct TrajectorySample {
  Vec3 position;
  Vec3 velocity;
  double yaw;
};

/// Uniformly sampled reference trajectory.
struct Trajectory {
  Eigen::VectorXd times;          // seconds, uniform grid
  Eigen::Matrix3Xd positions;     // m, one column per sample
  Eigen::Matrix3Xd velocities;    // m/s
  Eigen::VectorXd yaws;           // rad

  Eigen::Index size() const { return times.size(); }
  double dt() const { return size() > 1 ? times(1) - times(0) : 0.0; }
  TrajectorySample sample(Eigen::Index i) const {
    return TrajectorySample{positions.col(i), velocities.col(i), yaws(i)};
  }

  /// 12-dim reference state at sample i: [p, v, (0, 0, yaw), 0].
  StateVec reference_state(Eigen::Index i) const;
};

/// Parameters of one helical reference.
struct HelixSpec {
  double radius{1.0};        // m
  double total_height{1.0};  // m climbed over the duration
  double duration{30.0};     // s
  double dt{0.01};           // s
  double angular_rate{0.5};  // rad/s around the helix axis
  Vec3 center{Vec3::Zero()};
  std::uint64_t seed{0};
};

/// Ranges used when drawing random helix specs.
struct HelixSampling {
  HelixSpec base;
  double radius_min{1.0};
  double radius_max{5.0};
  double height_min{1.0};
  double height_max{6.0};
};

/// p(t) = center + (r cos(w t), r sin(w t), (H / T) t), velocity analytic.
/// Produces duration/dt + 1 samples. Throws on non-positive dt or duration.
Trajectory gen_helix(const HelixSpec& spec);

/// n specs with radius ~ U[radius_min, radius_max] and total_height ~
/// U[height_min, height_max], reproducible for a fixed seed. Each spec gets a
/// per-trajectory seed derived from the root seed.
std::vector<HelixSpec> sample_random_specs(int n, std::uint64_t seed, const HelixSampling& ranges);

/// Deterministic per-stream seed derivation (splitmix64 over root ^ stream).
std::uint64_t derive_seed(std::uint64_t root, std::uint64_t stream);

/// Cascaded-loop gains. The same structure serves the PD excitation
/// controller (integral gains zero) and the PID benchmark (integral gains
/// nonzero).
struct PidGains {
  Vec3 pos_kp{Vec3::Zero()};
  Vec3 pos_ki{Vec3::Zero()};
  Vec3 pos_kd{Vec3::Zero()};
  Vec3 att_kp{Vec3::Zero()};
  Vec3 att_ki{Vec3::Zero()};
  Vec3 att_kd{Vec3::Zero()};
  double max_tilt{0.6};            // rad, clamp on desired roll/pitch
  double integral_limit{2.0};      // clamp on each accumulated error channel

  void validate() const;  // gains must be >= 0
};

/// Integrator state carried across control steps; value-semantic so rollouts
/// stay reproducible and independent.
struct PidState {
  Vec3 pos_integral{Vec3::Zero()};
  Vec3 att_integral{Vec3::Zero()};
  int saturation_count{0};
};

/// Cascaded tracking controller: the outer position loop commands an
/// acceleration (with gravity feedforward), converted to a total thrust along
/// the current body z-axis and a desired small-angle attitude; the inner
/// attitude loop commands torques; both are inverted through the rotor mixing
/// matrix and clamped at zero thrust.
///
/// `state` accumulates integral terms over `dt`; pass nullptr for the pure PD
/// form. Saturation events are counted in state->saturation_count.
RotorCommand pid_track(const QuadState& x, const TrajectorySample& ref, const PidGains& gains,
                       const QuadParams& params, PidState* state, double dt);

/// Pure PD form (no integral accumulation).
RotorCommand pd_track(const QuadState& x, const TrajectorySample& ref, const PidGains& gains,
                      const QuadParams& params);

/// Closed-loop simulation log on the analysis-state representation.
struct RolloutLog {
  Eigen::VectorXd times;        // steps+1
  Eigen::MatrixXd states;       // 12 x (steps+1), achieved
  Eigen::MatrixXd references;   // 12 x (steps+1)
  Eigen::MatrixXd inputs;       // 4 x steps, applied rotor thrusts
  int saturation_count{0};
  Eigen::Index diverged_at{-1};  // step index of divergence, -1 if none

  Eigen::Index steps() const { return inputs.cols(); }
};

/// Simulates the nonlinear plant under pid_track for `steps` steps of the
/// trajectory grid, starting at the first reference position, at rest, with
/// identity attitude. Stops early if the state norm exceeds 1e6.
RolloutLog track_trajectory(const Trajectory& traj, const PidGains& gains,
                            const QuadParams& params, Eigen::Index steps);

}  // namespace koopquad
