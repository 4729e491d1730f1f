#include "koopquad/dataset.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace koopquad {

namespace {
constexpr double kDivergenceNorm = 1e6;

const char* kCsvHeader =
    "t,px,py,pz,vx,vy,vz,roll,pitch,yaw,wx,wy,wz,u0,u1,u2,u3,traj_id";

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}
}  // namespace

SnapshotDataset SnapshotDataset::from_records(std::vector<TrajectoryRecord> records) {
  Eigen::Index total_pairs = 0;
  for (const auto& rec : records) {
    if (rec.states.cols() != rec.times.size() || rec.inputs.cols() != rec.times.size())
      throw std::invalid_argument("SnapshotDataset: record column counts mismatch");
    total_pairs += std::max<Eigen::Index>(rec.times.size() - 1, 0);
  }

  SnapshotDataset ds;
  ds.X.resize(12, total_pairs);
  ds.X_plus.resize(12, total_pairs);
  ds.Gamma.resize(4, total_pairs);

  Eigen::Index col = 0;
  for (const auto& rec : records) {
    const Eigen::Index n_pairs = std::max<Eigen::Index>(rec.times.size() - 1, 0);
    ds.pair_ranges.emplace_back(col, col + n_pairs);
    if (n_pairs > 0) {
      ds.X.middleCols(col, n_pairs) = rec.states.leftCols(n_pairs);
      ds.X_plus.middleCols(col, n_pairs) = rec.states.rightCols(n_pairs);
      ds.Gamma.middleCols(col, n_pairs) = rec.inputs.leftCols(n_pairs);
    }
    col += n_pairs;
  }
  ds.trajectories = std::move(records);
  return ds;
}

CollectResult collect_dataset(const std::vector<HelixSpec>& specs, const PidGains& gains,
                              const QuadParams& params) {
  if (specs.empty()) throw std::invalid_argument("collect_dataset: no specs");
  gains.validate();
  params.validate();

  CollectResult result;
  std::vector<TrajectoryRecord> kept;
  int traj_id = 0;
  for (const auto& spec : specs) {
    const Trajectory traj = gen_helix(spec);
    const Eigen::Index n = traj.size();
    const double dt = spec.dt;

    TrajectoryRecord rec;
    rec.traj_id = traj_id;
    rec.times = traj.times;
    rec.states.resize(12, n);
    rec.inputs.resize(4, n);

    TrajectoryStatus status;
    status.traj_id = traj_id;

    // Initial state: on the helix start point, at rest, identity attitude.
    QuadState x0;
    x0.position = traj.positions.col(0);
    StateVec x = to_analysis_state(x0);

    PidState pid_state;
    bool diverged = false;
    for (Eigen::Index k = 0; k < n; ++k) {
      const QuadState sim = from_analysis_state(x);
      const RotorCommand u = pid_track(sim, traj.sample(k), gains, params, &pid_state, dt);
      rec.states.col(k) = x;
      rec.inputs.col(k) = u.thrusts;
      if (k + 1 < n) {
        x = step_analysis_state(x, u, dt, params);
        if (!x.allFinite() || x.norm() > kDivergenceNorm) {
          status.diverged_at = k + 1;
          diverged = true;
          break;
        }
      }
    }
    status.saturation_count = pid_state.saturation_count;
    if (!diverged) {
      status.samples = n;
      status.pairs = n - 1;
      kept.push_back(std::move(rec));
    }
    result.status.push_back(status);
    ++traj_id;
  }

  if (kept.empty()) throw std::runtime_error("collect_dataset: every trajectory diverged");
  result.dataset = SnapshotDataset::from_records(std::move(kept));
  return result;
}

void save_dataset_csv(const SnapshotDataset& dataset, const std::string& path,
                      const std::map<std::string, std::string>& metadata) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("save_dataset_csv: cannot open " + path);

  for (const auto& [key, value] : metadata) out << "# " << key << "=" << value << "\n";
  out << kCsvHeader << "\n";

  for (const auto& rec : dataset.trajectories) {
    for (Eigen::Index k = 0; k < rec.times.size(); ++k) {
      out << format_double(rec.times(k));
      for (int i = 0; i < 12; ++i) out << "," << format_double(rec.states(i, k));
      for (int i = 0; i < 4; ++i) out << "," << format_double(rec.inputs(i, k));
      out << "," << rec.traj_id << "\n";
    }
  }
  if (!out) throw std::runtime_error("save_dataset_csv: write failed for " + path);
}

SnapshotDataset load_dataset_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("load_dataset_csv: cannot open " + path);

  std::string line;
  bool header_seen = false;
  std::vector<TrajectoryRecord> records;
  std::vector<double> times;
  std::vector<Eigen::VectorXd> states;
  std::vector<Eigen::VectorXd> inputs;
  int current_id = -1;

  auto flush_record = [&]() {
    if (times.empty()) return;
    TrajectoryRecord rec;
    rec.traj_id = current_id;
    rec.times = Eigen::Map<Eigen::VectorXd>(times.data(), static_cast<Eigen::Index>(times.size()));
    rec.states.resize(12, static_cast<Eigen::Index>(states.size()));
    rec.inputs.resize(4, static_cast<Eigen::Index>(inputs.size()));
    for (std::size_t i = 0; i < states.size(); ++i) {
      rec.states.col(static_cast<Eigen::Index>(i)) = states[i];
      rec.inputs.col(static_cast<Eigen::Index>(i)) = inputs[i];
    }
    records.push_back(std::move(rec));
    times.clear();
    states.clear();
    inputs.clear();
  };

  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    if (!header_seen) {
      if (line != kCsvHeader)
        throw std::runtime_error("load_dataset_csv: unexpected header in " + path);
      header_seen = true;
      continue;
    }

    std::stringstream ss(line);
    std::string field;
    std::vector<std::string> fields;
    while (std::getline(ss, field, ',')) fields.push_back(field);
    if (fields.size() != 18)
      throw std::runtime_error("load_dataset_csv: malformed row in " + path);

    const auto to_double = [&](const std::string& s) {
      double v = 0.0;
      const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
      if (res.ec != std::errc())
        throw std::runtime_error("load_dataset_csv: bad number '" + s + "'");
      return v;
    };

    const int traj_id = std::stoi(fields[17]);
    if (traj_id != current_id) {
      flush_record();
      current_id = traj_id;
    }
    times.push_back(to_double(fields[0]));
    Eigen::VectorXd state(12), input(4);
    for (int i = 0; i < 12; ++i) state(i) = to_double(fields[1 + i]);
    for (int i = 0; i < 4; ++i) input(i) = to_double(fields[13 + i]);
    if (!state.allFinite() || !input.allFinite())
      throw std::runtime_error("load_dataset_csv: non-finite sample in " + path);
    if ((input.array() < 0.0).any())
      throw std::runtime_error("load_dataset_csv: negative rotor thrust in " + path);
    states.push_back(state);
    inputs.push_back(input);
  }
  flush_record();

  if (!header_seen) throw std::runtime_error("load_dataset_csv: missing header in " + path);
  return SnapshotDataset::from_records(std::move(records));
}

std::map<std::string, std::string> read_csv_metadata(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("read_csv_metadata: cannot open " + path);

  std::map<std::string, std::string> metadata;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (line[0] != '#') break;
    const auto eq = line.find('=');
    if (eq == std::string::npos) continue;
    std::string key = line.substr(1, eq - 1);
    key.erase(0, key.find_first_not_of(' '));
    key.erase(key.find_last_not_of(' ') + 1);
    metadata[key] = line.substr(eq + 1);
  }
  return metadata;
}

}  // namespace koopquad
