#pragma once

#include <array>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "koopquad/koopman.hpp"
#include "koopquad/reference.hpp"

namespace koopquad {

/// 100 * sqrt(|pred - truth|_F^2 / |truth|_F^2) over the flattened sequences.
/// Throws std::domain_error when |truth| = 0 (the metric is undefined) and
/// std::invalid_argument on shape mismatch or empty input.
double nrmse(const Eigen::MatrixXd& pred, const Eigen::MatrixXd& truth);

/// Eigenvalues sorted by modulus, descending, plus the Schur verdict
/// (strictly inside the unit disk, with a 1e-9 guard band).
struct Spectrum {
  Eigen::VectorXcd eigenvalues;
  double spectral_radius{0.0};
  bool schur_stable{false};
};
Spectrum spectrum(const Eigen::MatrixXd& m);

/// Numerical rank of the controllability matrix [B, AB, ..., A^(p-1) B].
/// The verdict is full_rank == (rank == p); the singular-value profile is
/// part of the report because the Krylov blocks are badly conditioned at
/// realistic lifted dimensions.
RankReport check_controllability(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B,
                                 double rank_tol_factor = 10.0);

/// Dual test on [C; CA; ...; C A^(p-1)].
RankReport check_observability(const Eigen::MatrixXd& A, const Eigen::MatrixXd& C,
                               double rank_tol_factor = 10.0);

/// State groups reported separately, in scan order of the analysis state.
enum StateGroup { kPosition = 0, kVelocity = 1, kEulerAngles = 2, kAngularVelocity = 3 };
inline constexpr std::array<const char*, 4> kStateGroupNames = {
    "position", "velocity", "euler_angles", "angular_velocity"};

/// Per-group NRMSE of one log against one truth signal. A group is nullopt
/// when the truth signal is identically zero there (metric undefined).
using GroupMetrics = std::array<std::optional<double>, 4>;

/// Metrics from one evaluation run. The between-controller comparison uses
/// the PID log as the denominator signal, which is the only reading defined
/// for every group when the reference carries zero attitude.
struct RunComparison {
  GroupMetrics koopman_vs_ref;
  GroupMetrics pid_vs_ref;
  GroupMetrics koopman_vs_pid;
  GroupMetrics ratio;  // koopman_vs_ref / pid_vs_ref where both defined
};

/// Grid-aligned comparison of the two controller logs against the reference
/// trajectory. Throws when the logs do not share the reference time grid.
RunComparison compare_controllers(const RolloutLog& koopman_log, const RolloutLog& pid_log,
                                  const Trajectory& reference);

struct Aggregate {
  double mean{0.0};
  double stddev{0.0};
  int count{0};
};

/// Mean +/- standard deviation across runs; undefined per-run entries are
/// skipped and the count records how many runs contributed.
using GroupAggregate = std::array<Aggregate, 4>;

struct EvalReport {
  GroupAggregate koopman_vs_pid;
  Aggregate koopman_vs_pid_mean;  // mean over the four groups, per run
  GroupAggregate koopman_vs_ref;
  GroupAggregate pid_vs_ref;
  Spectrum model_spectrum;        // eigenvalues of A
  Spectrum closed_loop_spectrum;  // eigenvalues of A - B K
  RankReport controllability;
  RankReport observability;
  int runs{0};
  std::uint64_t seed{0};
  std::string config_hash;

  /// Aligned text table in the grouped percent-NRMSE format.
  std::string text_table() const;
};

/// Aggregates per-run comparisons and attaches the model diagnostics.
EvalReport aggregate_report(const std::vector<RunComparison>& runs, const Spectrum& model_spectrum,
                            const Spectrum& closed_loop_spectrum, const RankReport& controllability,
                            const RankReport& observability);

}  // namespace koopquad
