#pragma once

#include <map>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "koopquad/reference.hpp"
#include "koopquad/quadsim.hpp"

namespace koopquad {

/// Samples recorded from one simulated trajectory. `states` holds analysis
/// states recorded through step_analysis_state, so consecutive columns replay
/// exactly; `inputs.col(k)` is the command applied between samples k and k+1
/// (the last column is the command computed at the final state).
struct TrajectoryRecord {
  int traj_id{0};
  Eigen::VectorXd times;
  Eigen::MatrixXd states;  // 12 x N
  Eigen::MatrixXd inputs;  // 4 x N
};

/// Snapshot matrices assembled from one or more trajectories. Column k of
/// X_plus is the one-step successor of column k of X under input Gamma.col(k);
/// no pair spans a trajectory boundary.
struct SnapshotDataset {
  std::vector<TrajectoryRecord> trajectories;
  Eigen::MatrixXd X;       // n x T
  Eigen::MatrixXd X_plus;  // n x T
  Eigen::MatrixXd Gamma;   // l x T
  std::vector<std::pair<Eigen::Index, Eigen::Index>> pair_ranges;  // [begin, end) per trajectory

  Eigen::Index pairs() const { return X.cols(); }
  int state_dim() const { return 12; }
  int input_dim() const { return 4; }

  /// Builds the pair matrices from per-trajectory records.
  static SnapshotDataset from_records(std::vector<TrajectoryRecord> records);
};

/// Outcome of simulating one spec during collection.
struct TrajectoryStatus {
  int traj_id{0};
  Eigen::Index samples{0};
  Eigen::Index pairs{0};
  Eigen::Index diverged_at{-1};  // -1 when the rollout stayed bounded
  int saturation_count{0};
};

struct CollectResult {
  SnapshotDataset dataset;
  std::vector<TrajectoryStatus> status;
};

/// Simulates every spec under the PD tracking controller and records
/// (state, input) snapshots. Diverged trajectories are excluded from the
/// dataset and flagged in the status list.
CollectResult collect_dataset(const std::vector<HelixSpec>& specs, const PidGains& gains,
                              const QuadParams& params);

/// CSV persistence. Layout: `# key=value` metadata lines, then a mandatory
/// header row `t,px,...,u3,traj_id`, then one row per sample with full
/// double precision (round-trippable).
void save_dataset_csv(const SnapshotDataset& dataset, const std::string& path,
                      const std::map<std::string, std::string>& metadata);
SnapshotDataset load_dataset_csv(const std::string& path);

/// Metadata parsed back from a dataset file (config hash, seed, ...).
std::map<std::string, std::string> read_csv_metadata(const std::string& path);

}  // namespace koopquad
