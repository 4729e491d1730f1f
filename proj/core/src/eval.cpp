#include "koopquad/eval.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include <Eigen/Eigenvalues>

namespace koopquad {

double nrmse(const Eigen::MatrixXd& pred, const Eigen::MatrixXd& truth) {
  if (pred.rows() != truth.rows() || pred.cols() != truth.cols())
    throw std::invalid_argument("nrmse: shape mismatch");
  if (truth.size() == 0) throw std::invalid_argument("nrmse: empty sequences");

  const double denom = truth.squaredNorm();
  if (denom == 0.0) throw std::domain_error("nrmse: truth signal is identically zero");
  return 100.0 * std::sqrt((pred - truth).squaredNorm() / denom);
}

Spectrum spectrum(const Eigen::MatrixXd& m) {
  if (m.rows() != m.cols()) throw std::invalid_argument("spectrum: matrix must be square");
  if (!m.allFinite()) throw std::invalid_argument("spectrum: non-finite matrix");

  Eigen::EigenSolver<Eigen::MatrixXd> solver(m, /*computeEigenvectors=*/false);
  Eigen::VectorXcd eig = solver.eigenvalues();
  std::sort(eig.data(), eig.data() + eig.size(),
            [](const std::complex<double>& a, const std::complex<double>& b) {
              return std::abs(a) > std::abs(b);
            });

  Spectrum s;
  s.eigenvalues = eig;
  s.spectral_radius = eig.size() > 0 ? std::abs(eig(0)) : 0.0;
  s.schur_stable = s.spectral_radius < 1.0 - 1e-9;
  return s;
}

namespace {

RankReport krylov_rank(const Eigen::MatrixXd& blocks, double rank_tol_factor) {
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(blocks);
  const Eigen::VectorXd& sv = svd.singularValues();

  RankReport report;
  report.rows = blocks.rows();
  report.cols = blocks.cols();
  report.singular_values = sv;
  report.cutoff = sv.size() > 0
                      ? sv(0) * static_cast<double>(std::max(blocks.rows(), blocks.cols())) *
                            std::numeric_limits<double>::epsilon() * rank_tol_factor
                      : 0.0;
  report.rank = (sv.array() > report.cutoff).count();
  const double smallest = sv.size() > 0 ? sv(sv.size() - 1) : 0.0;
  report.condition = smallest > 0.0 ? sv(0) / smallest : std::numeric_limits<double>::infinity();
  return report;
}

}  // namespace

RankReport check_controllability(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B,
                                 double rank_tol_factor) {
  const Eigen::Index p = A.rows();
  if (A.cols() != p || B.rows() != p)
    throw std::invalid_argument("check_controllability: dimension mismatch");

  Eigen::MatrixXd blocks(p, p * B.cols());
  Eigen::MatrixXd term = B;
  for (Eigen::Index k = 0; k < p; ++k) {
    blocks.middleCols(k * B.cols(), B.cols()) = term;
    if (k + 1 < p) term = A * term;
  }
  RankReport report = krylov_rank(blocks, rank_tol_factor);
  report.full_rank = report.rank == p;
  return report;
}

RankReport check_observability(const Eigen::MatrixXd& A, const Eigen::MatrixXd& C,
                               double rank_tol_factor) {
  const Eigen::Index p = A.rows();
  if (A.cols() != p || C.cols() != p)
    throw std::invalid_argument("check_observability: dimension mismatch");

  Eigen::MatrixXd blocks(p * C.rows(), p);
  Eigen::MatrixXd term = C;
  for (Eigen::Index k = 0; k < p; ++k) {
    blocks.middleRows(k * C.rows(), C.rows()) = term;
    if (k + 1 < p) term = term * A;
  }
  RankReport report = krylov_rank(blocks, rank_tol_factor);
  report.full_rank = report.rank == p;
  return report;
}

namespace {

std::optional<double> group_nrmse(const Eigen::MatrixXd& pred, const Eigen::MatrixXd& truth,
                                  int group) {
  const Eigen::MatrixXd pred_rows = pred.middleRows(3 * group, 3);
  const Eigen::MatrixXd truth_rows = truth.middleRows(3 * group, 3);
  if (truth_rows.squaredNorm() == 0.0) return std::nullopt;
  return nrmse(pred_rows, truth_rows);
}

GroupMetrics all_groups(const Eigen::MatrixXd& pred, const Eigen::MatrixXd& truth) {
  GroupMetrics m;
  for (int g = 0; g < 4; ++g) m[g] = group_nrmse(pred, truth, g);
  return m;
}

}  // namespace

RunComparison compare_controllers(const RolloutLog& koopman_log, const RolloutLog& pid_log,
                                  const Trajectory& reference) {
  const Eigen::Index n = koopman_log.states.cols();
  if (pid_log.states.cols() != n)
    throw std::invalid_argument("compare_controllers: log lengths differ");
  if (reference.size() < n)
    throw std::invalid_argument("compare_controllers: reference shorter than logs");
  for (Eigen::Index k = 0; k < n; ++k) {
    if (std::abs(koopman_log.times(k) - reference.times(k)) > 1e-12 ||
        std::abs(pid_log.times(k) - reference.times(k)) > 1e-12)
      throw std::invalid_argument("compare_controllers: time grids do not match");
  }

  Eigen::MatrixXd ref_states(12, n);
  for (Eigen::Index k = 0; k < n; ++k) ref_states.col(k) = reference.reference_state(k);

  RunComparison cmp;
  cmp.koopman_vs_ref = all_groups(koopman_log.states, ref_states);
  cmp.pid_vs_ref = all_groups(pid_log.states, ref_states);
  cmp.koopman_vs_pid = all_groups(koopman_log.states, pid_log.states);
  for (int g = 0; g < 4; ++g) {
    if (cmp.koopman_vs_ref[g] && cmp.pid_vs_ref[g] && *cmp.pid_vs_ref[g] > 0.0)
      cmp.ratio[g] = *cmp.koopman_vs_ref[g] / *cmp.pid_vs_ref[g];
  }
  return cmp;
}

namespace {

Aggregate aggregate_values(const std::vector<double>& values) {
  Aggregate a;
  a.count = static_cast<int>(values.size());
  if (values.empty()) return a;
  a.mean = std::accumulate(values.begin(), values.end(), 0.0) / values.size();
  double ss = 0.0;
  for (double v : values) ss += (v - a.mean) * (v - a.mean);
  a.stddev = values.size() > 1 ? std::sqrt(ss / (values.size() - 1)) : 0.0;
  return a;
}

GroupAggregate aggregate_groups(const std::vector<RunComparison>& runs,
                                GroupMetrics RunComparison::* member) {
  GroupAggregate out;
  for (int g = 0; g < 4; ++g) {
    std::vector<double> values;
    for (const auto& run : runs)
      if ((run.*member)[g]) values.push_back(*(run.*member)[g]);
    out[g] = aggregate_values(values);
  }
  return out;
}

}  // namespace

EvalReport aggregate_report(const std::vector<RunComparison>& runs, const Spectrum& model_spectrum,
                            const Spectrum& closed_loop_spectrum, const RankReport& controllability,
                            const RankReport& observability) {
  EvalReport report;
  report.runs = static_cast<int>(runs.size());
  report.koopman_vs_pid = aggregate_groups(runs, &RunComparison::koopman_vs_pid);
  report.koopman_vs_ref = aggregate_groups(runs, &RunComparison::koopman_vs_ref);
  report.pid_vs_ref = aggregate_groups(runs, &RunComparison::pid_vs_ref);

  std::vector<double> per_run_means;
  for (const auto& run : runs) {
    double sum = 0.0;
    int defined = 0;
    for (int g = 0; g < 4; ++g) {
      if (run.koopman_vs_pid[g]) {
        sum += *run.koopman_vs_pid[g];
        ++defined;
      }
    }
    if (defined > 0) per_run_means.push_back(sum / defined);
  }
  report.koopman_vs_pid_mean = aggregate_values(per_run_means);

  report.model_spectrum = model_spectrum;
  report.closed_loop_spectrum = closed_loop_spectrum;
  report.controllability = controllability;
  report.observability = observability;
  return report;
}

std::string EvalReport::text_table() const {
  std::ostringstream os;
  os.setf(std::ios::fixed);
  os.precision(4);
  os << "state group        %NRMSE (koopman vs pid)\n";
  const std::array<const char*, 4> labels = {"position        ", "velocity        ",
                                             "euler angles    ", "angular velocity"};
  for (int g = 0; g < 4; ++g)
    os << labels[g] << "   " << koopman_vs_pid[g].mean << " +/- " << koopman_vs_pid[g].stddev
       << "\n";
  os << "mean               " << koopman_vs_pid_mean.mean << " +/- " << koopman_vs_pid_mean.stddev
     << "\n";
  os << "runs: " << runs << "  spectral radius A: " << model_spectrum.spectral_radius
     << "  A-BK: " << closed_loop_spectrum.spectral_radius << "\n";
  return os.str();
}

}  // namespace koopquad
