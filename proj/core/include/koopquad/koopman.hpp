#pragma once

#include <string>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json_fwd.hpp>

#include "koopquad/dataset.hpp"
#include "koopquad/quadsim.hpp"

namespace koopquad {

/// Observable dictionaries used to lift the 12-dim analysis state.
///
/// Dedup (p = 28):   [1, x, sin(p), cos(p), vec(R skew(omega))]
/// Literal (p = 34): [1, x, p, v, sin(p), cos(p), vec(R skew(omega))]
///                   (keeps the duplicated position/velocity blocks; the
///                   resulting regression is row-rank deficient and exists for
///                   comparison only)
/// Identity (p = 12): x itself, which reduces the fit to DMD with control.
///
/// R is the rotation matrix built from the Euler angles of x, skew(omega) the
/// cross-product matrix of the body rates, and vec stacks columns.
enum class DictionaryKind { Dedup, Literal, Identity };

DictionaryKind dictionary_from_string(const std::string& name);
std::string to_string(DictionaryKind kind);

struct LiftingDictionary {
  DictionaryKind kind{DictionaryKind::Dedup};

  int state_dim() const { return 12; }
  int lifted_dim() const;
  std::string descriptor() const;

  Eigen::VectorXd lift(const StateVec& x) const;
  Eigen::MatrixXd lift_columns(const Eigen::MatrixXd& X) const;

  /// Selector C with C * lift(x) = x exactly for every state.
  Eigen::MatrixXd selector() const;
};

/// Snapshot matrices after lifting; inputs pass through unchanged.
struct LiftedSnapshots {
  Eigen::MatrixXd Xi_X;       // p x T
  Eigen::MatrixXd Xi_Xplus;   // p x T
  Eigen::MatrixXd Gamma;      // l x T
};

LiftedSnapshots assemble(const SnapshotDataset& dataset, const LiftingDictionary& dict);

/// Numerical-rank report for a matrix, using the cutoff
/// sigma_max * max(rows, cols) * eps * tol_factor.
struct RankReport {
  Eigen::Index rank{0};
  Eigen::Index rows{0};
  Eigen::Index cols{0};
  bool full_rank{false};
  double condition{0.0};
  double cutoff{0.0};
  Eigen::VectorXd singular_values;
};

/// Rank diagnostics for the stacked regressor [Xi(X); Gamma]. Requires
/// T >= rows (the premise under which full row rank is attainable); rank
/// deficiency itself is reported, not thrown, since the pseudo-inverse still
/// returns the minimum-norm solution.
RankReport check_rank(const Eigen::MatrixXd& stacked, double rank_tol_factor = 10.0);

struct FitMetadata {
  std::string method;        // "ls" or "tls"
  double residual{0.0};      // Frobenius norm of Xi(X+) - K [Xi(X); Gamma]
  double svd_cutoff{0.0};    // singular-value truncation threshold used
  bool tls_fallback{false};  // true when TLS was degenerate and LS was used
};

/// Identified lifted-linear model  z+ = A z + B u,  x = C z.
struct LiftedModel {
  Eigen::MatrixXd A;  // p x p
  Eigen::MatrixXd B;  // p x l
  Eigen::MatrixXd C;  // n x p
  LiftingDictionary dictionary;
  FitMetadata fit;

  Eigen::Index lifted_dim() const { return A.rows(); }
  Eigen::Index state_dim() const { return C.rows(); }
  Eigen::Index input_dim() const { return B.cols(); }
};

/// Least-squares fit K = Xi(X+) pinv([Xi(X); Gamma]) with SVD truncation at
/// sigma_max * max(dim) * eps * svd_cutoff_factor.
LiftedModel fit_ls(const LiftedSnapshots& data, const LiftingDictionary& dict,
                   double svd_cutoff_factor = 10.0);

/// Total-least-squares fit from the SVD of the stacked matrix
/// [Xi(X); Gamma; Xi(X+)]: perturbations are allowed on regressors and
/// targets alike. Falls back to fit_ls (flagged in metadata) when the
/// trailing singular block is degenerate and the TLS solution does not exist.
LiftedModel fit_tls(const LiftedSnapshots& data, const LiftingDictionary& dict,
                    double svd_cutoff_factor = 10.0);

/// Open-loop rollout of the lifted model: lift once, iterate
/// z+ = A z + B u, read out x = C z. Returns 12 x (steps+1) states.
Eigen::MatrixXd predict(const LiftedModel& model, const StateVec& x0,
                        const Eigen::MatrixXd& inputs, Eigen::Index steps);

/// Moore-Penrose pseudo-inverse via SVD with the truncation cutoff
/// sigma_max * max(dim) * eps * cutoff_factor. Reports the used cutoff
/// through *used_cutoff if non-null.
Eigen::MatrixXd pseudo_inverse(const Eigen::MatrixXd& m, double cutoff_factor = 10.0,
                               double* used_cutoff = nullptr);

/// Row-major (de)serialization helpers shared by the JSON envelopes.
nlohmann::json matrix_to_json(const Eigen::MatrixXd& m);
Eigen::MatrixXd matrix_from_json(const nlohmann::json& j, Eigen::Index rows, Eigen::Index cols);

/// JSON envelope: p, n, l, dictionary, A, B, C (row-major), method,
/// residual, svd_cutoff. Round-trips at full double precision.
nlohmann::json model_to_json(const LiftedModel& model);
LiftedModel model_from_json(const nlohmann::json& j);

}  // namespace koopquad
