#include "koopquad/koopman.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

#include <Eigen/SVD>
#include <nlohmann/json.hpp>

namespace koopquad {

namespace {

Mat3 skew(const Vec3& w) {
  Mat3 s;
  s << 0.0, -w(2), w(1),
       w(2), 0.0, -w(0),
       -w(1), w(0), 0.0;
  return s;
}

// Columns of R * skew(omega), stacked. This is the attitude kinematics matrix
// dR/dt for body-frame rates.
void write_rotation_rate_block(const StateVec& x, Eigen::Ref<Eigen::VectorXd> out) {
  const Mat3 m = euler_to_rotation(x(6), x(7), x(8)) * skew(x.segment<3>(9));
  Eigen::Index k = 0;
  for (int col = 0; col < 3; ++col)
    for (int row = 0; row < 3; ++row) out(k++) = m(row, col);
}

}  // namespace

DictionaryKind dictionary_from_string(const std::string& name) {
  if (name == "dedup") return DictionaryKind::Dedup;
  if (name == "literal") return DictionaryKind::Literal;
  if (name == "identity") return DictionaryKind::Identity;
  throw std::invalid_argument("unknown dictionary '" + name + "'");
}

std::string to_string(DictionaryKind kind) {
  switch (kind) {
    case DictionaryKind::Dedup: return "dedup";
    case DictionaryKind::Literal: return "literal";
    case DictionaryKind::Identity: return "identity";
  }
  throw std::logic_error("unreachable");
}

int LiftingDictionary::lifted_dim() const {
  switch (kind) {
    case DictionaryKind::Dedup: return 28;
    case DictionaryKind::Literal: return 34;
    case DictionaryKind::Identity: return 12;
  }
  throw std::logic_error("unreachable");
}

std::string LiftingDictionary::descriptor() const {
  return to_string(kind) + "-" + std::to_string(lifted_dim());
}

Eigen::VectorXd LiftingDictionary::lift(const StateVec& x) const {
  if (!x.allFinite()) throw std::invalid_argument("lift: non-finite state");

  Eigen::VectorXd z(lifted_dim());
  switch (kind) {
    case DictionaryKind::Identity:
      z = x;
      break;
    case DictionaryKind::Dedup:
      z(0) = 1.0;
      z.segment<12>(1) = x;
      z.segment<3>(13) = x.segment<3>(0).array().sin();
      z.segment<3>(16) = x.segment<3>(0).array().cos();
      write_rotation_rate_block(x, z.segment<9>(19));
      break;
    case DictionaryKind::Literal:
      z(0) = 1.0;
      z.segment<12>(1) = x;
      z.segment<3>(13) = x.segment<3>(0);  // duplicated position block
      z.segment<3>(16) = x.segment<3>(3);  // duplicated velocity block
      z.segment<3>(19) = x.segment<3>(0).array().sin();
      z.segment<3>(22) = x.segment<3>(0).array().cos();
      write_rotation_rate_block(x, z.segment<9>(25));
      break;
  }
  return z;
}

Eigen::MatrixXd LiftingDictionary::lift_columns(const Eigen::MatrixXd& X) const {
  if (X.rows() != state_dim())
    throw std::invalid_argument("lift_columns: expected 12-row state matrix");
  Eigen::MatrixXd out(lifted_dim(), X.cols());
  for (Eigen::Index k = 0; k < X.cols(); ++k) out.col(k) = lift(X.col(k));
  return out;
}

Eigen::MatrixXd LiftingDictionary::selector() const {
  const int n = state_dim();
  Eigen::MatrixXd c = Eigen::MatrixXd::Zero(n, lifted_dim());
  if (kind == DictionaryKind::Identity) {
    c.setIdentity();
  } else {
    // The state block sits right after the constant observable.
    c.middleCols(1, n).setIdentity();
  }
  return c;
}

LiftedSnapshots assemble(const SnapshotDataset& dataset, const LiftingDictionary& dict) {
  if (dataset.pairs() == 0) throw std::invalid_argument("assemble: empty dataset");
  if (dataset.X.cols() != dataset.X_plus.cols() || dataset.X.cols() != dataset.Gamma.cols())
    throw std::invalid_argument("assemble: snapshot column counts mismatch");

  LiftedSnapshots out;
  out.Xi_X = dict.lift_columns(dataset.X);
  out.Xi_Xplus = dict.lift_columns(dataset.X_plus);
  out.Gamma = dataset.Gamma;
  return out;
}

RankReport check_rank(const Eigen::MatrixXd& stacked, double rank_tol_factor) {
  if (stacked.cols() < stacked.rows())
    throw std::invalid_argument("check_rank: need at least as many snapshots as rows");

  Eigen::BDCSVD<Eigen::MatrixXd> svd(stacked);
  const Eigen::VectorXd& sv = svd.singularValues();

  RankReport report;
  report.rows = stacked.rows();
  report.cols = stacked.cols();
  report.singular_values = sv;
  report.cutoff = sv(0) * static_cast<double>(std::max(stacked.rows(), stacked.cols())) *
                  std::numeric_limits<double>::epsilon() * rank_tol_factor;
  report.rank = (sv.array() > report.cutoff).count();
  report.full_rank = report.rank == std::min(stacked.rows(), stacked.cols());
  const double smallest = sv(sv.size() - 1);
  report.condition = smallest > 0.0 ? sv(0) / smallest : std::numeric_limits<double>::infinity();
  return report;
}

Eigen::MatrixXd pseudo_inverse(const Eigen::MatrixXd& m, double cutoff_factor,
                               double* used_cutoff) {
  Eigen::BDCSVD<Eigen::MatrixXd> svd(m, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Eigen::VectorXd& sv = svd.singularValues();
  const double cutoff = sv.size() > 0
                            ? sv(0) * static_cast<double>(std::max(m.rows(), m.cols())) *
                                  std::numeric_limits<double>::epsilon() * cutoff_factor
                            : 0.0;
  if (used_cutoff) *used_cutoff = cutoff;

  Eigen::VectorXd inv = Eigen::VectorXd::Zero(sv.size());
  for (Eigen::Index i = 0; i < sv.size(); ++i)
    if (sv(i) > cutoff) inv(i) = 1.0 / sv(i);
  return svd.matrixV() * inv.asDiagonal() * svd.matrixU().transpose();
}

namespace {

void validate_snapshots(const LiftedSnapshots& data, const LiftingDictionary& dict) {
  const Eigen::Index t = data.Xi_X.cols();
  if (data.Xi_Xplus.cols() != t || data.Gamma.cols() != t)
    throw std::invalid_argument("fit: snapshot column counts mismatch");
  if (data.Xi_X.rows() != dict.lifted_dim() || data.Xi_Xplus.rows() != dict.lifted_dim())
    throw std::invalid_argument("fit: lifted dimension mismatch");
  if (!data.Xi_X.allFinite() || !data.Xi_Xplus.allFinite() || !data.Gamma.allFinite())
    throw std::invalid_argument("fit: non-finite snapshot data");
}

LiftedModel extract_model(const Eigen::MatrixXd& koopman, const LiftingDictionary& dict,
                          const LiftedSnapshots& data, FitMetadata meta) {
  const Eigen::Index p = dict.lifted_dim();
  LiftedModel model;
  model.A = koopman.leftCols(p);
  model.B = koopman.rightCols(koopman.cols() - p);
  model.C = dict.selector();
  model.dictionary = dict;

  Eigen::MatrixXd stacked(data.Xi_X.rows() + data.Gamma.rows(), data.Xi_X.cols());
  stacked << data.Xi_X, data.Gamma;
  meta.residual = (data.Xi_Xplus - koopman * stacked).norm();
  model.fit = std::move(meta);
  return model;
}

}  // namespace

LiftedModel fit_ls(const LiftedSnapshots& data, const LiftingDictionary& dict,
                   double svd_cutoff_factor) {
  validate_snapshots(data, dict);

  Eigen::MatrixXd stacked(data.Xi_X.rows() + data.Gamma.rows(), data.Xi_X.cols());
  stacked << data.Xi_X, data.Gamma;

  FitMetadata meta;
  meta.method = "ls";
  const Eigen::MatrixXd koopman =
      data.Xi_Xplus * pseudo_inverse(stacked, svd_cutoff_factor, &meta.svd_cutoff);
  return extract_model(koopman, dict, data, std::move(meta));
}

LiftedModel fit_tls(const LiftedSnapshots& data, const LiftingDictionary& dict,
                    double svd_cutoff_factor) {
  validate_snapshots(data, dict);

  const Eigen::Index p = dict.lifted_dim();
  const Eigen::Index l = data.Gamma.rows();
  const Eigen::Index t = data.Xi_X.cols();
  if (t <= 2 * p + l)
    throw std::invalid_argument("fit_tls: need more than 2p + l snapshot columns");

  // SVD of the stacked data [Xi(X); Gamma; Xi(X+)]; the singular vectors of
  // the smallest p singular values span the residual space. With the row
  // split m = p + l regressor rows over p target rows, the TLS map is
  // K = -(V22^-1 V12^T)^T applied to that trailing block.
  Eigen::MatrixXd stacked(2 * p + l, t);
  stacked << data.Xi_X, data.Gamma, data.Xi_Xplus;

  Eigen::BDCSVD<Eigen::MatrixXd> svd(stacked.transpose(), Eigen::ComputeThinV);
  const Eigen::MatrixXd basis = svd.matrixV();  // (2p+l) x (2p+l)

  const Eigen::MatrixXd trailing = basis.rightCols(p);
  const Eigen::MatrixXd v12 = trailing.topRows(p + l);
  const Eigen::MatrixXd v22 = trailing.bottomRows(p);

  // The TLS solution exists iff the trailing target block is invertible.
  Eigen::JacobiSVD<Eigen::MatrixXd> v22_svd(v22);
  const Eigen::VectorXd& v22_sv = v22_svd.singularValues();
  const double v22_cutoff = static_cast<double>(p) * std::numeric_limits<double>::epsilon() *
                            (v22_sv.size() > 0 ? v22_sv(0) : 0.0) * 1e3;
  const bool degenerate =
      v22_sv.size() == 0 || v22_sv(v22_sv.size() - 1) <= v22_cutoff || v22_sv(0) == 0.0;

  if (degenerate) {
    LiftedModel model = fit_ls(data, dict, svd_cutoff_factor);
    model.fit.tls_fallback = true;
    return model;
  }

  const Eigen::MatrixXd koopman =
      -(v22.transpose().partialPivLu().solve(v12.transpose()));

  FitMetadata meta;
  meta.method = "tls";
  meta.svd_cutoff = v22_cutoff;
  return extract_model(koopman, dict, data, std::move(meta));
}

nlohmann::json matrix_to_json(const Eigen::MatrixXd& m) {
  // Row-major flattening.
  std::vector<double> values;
  values.reserve(static_cast<std::size_t>(m.size()));
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c) values.push_back(m(r, c));
  return nlohmann::json(values);
}

Eigen::MatrixXd matrix_from_json(const nlohmann::json& j, Eigen::Index rows, Eigen::Index cols) {
  const auto values = j.get<std::vector<double>>();
  if (static_cast<Eigen::Index>(values.size()) != rows * cols)
    throw std::invalid_argument("matrix_from_json: element count mismatch");
  Eigen::MatrixXd m(rows, cols);
  Eigen::Index k = 0;
  for (Eigen::Index r = 0; r < rows; ++r)
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = values[static_cast<std::size_t>(k++)];
  return m;
}

nlohmann::json model_to_json(const LiftedModel& model) {
  nlohmann::json j;
  j["p"] = model.lifted_dim();
  j["n"] = model.state_dim();
  j["l"] = model.input_dim();
  j["dictionary"] = model.dictionary.descriptor();
  j["A"] = matrix_to_json(model.A);
  j["B"] = matrix_to_json(model.B);
  j["C"] = matrix_to_json(model.C);
  j["method"] = model.fit.method;
  j["residual"] = model.fit.residual;
  j["svd_cutoff"] = model.fit.svd_cutoff;
  if (model.fit.tls_fallback) j["tls_fallback"] = true;
  return j;
}

LiftedModel model_from_json(const nlohmann::json& j) {
  const auto p = j.at("p").get<Eigen::Index>();
  const auto n = j.at("n").get<Eigen::Index>();
  const auto l = j.at("l").get<Eigen::Index>();

  LiftedModel model;
  const std::string descriptor = j.at("dictionary").get<std::string>();
  model.dictionary.kind = dictionary_from_string(descriptor.substr(0, descriptor.find('-')));
  if (model.dictionary.lifted_dim() != p || model.dictionary.state_dim() != n)
    throw std::invalid_argument("model_from_json: dictionary/dimension mismatch");

  model.A = matrix_from_json(j.at("A"), p, p);
  model.B = matrix_from_json(j.at("B"), p, l);
  model.C = matrix_from_json(j.at("C"), n, p);
  model.fit.method = j.at("method").get<std::string>();
  model.fit.residual = j.at("residual").get<double>();
  model.fit.svd_cutoff = j.at("svd_cutoff").get<double>();
  model.fit.tls_fallback = j.value("tls_fallback", false);
  return model;
}

Eigen::MatrixXd predict(const LiftedModel& model, const StateVec& x0,
                        const Eigen::MatrixXd& inputs, Eigen::Index steps) {
  if (steps < 0) throw std::invalid_argument("predict: steps must be >= 0");
  if (steps > 0 && inputs.cols() < steps)
    throw std::invalid_argument("predict: not enough input columns");
  if (steps > 0 && inputs.rows() != model.input_dim())
    throw std::invalid_argument("predict: input dimension mismatch");

  Eigen::MatrixXd out(model.state_dim(), steps + 1);
  Eigen::VectorXd z = model.dictionary.lift(x0);
  out.col(0) = model.C * z;
  for (Eigen::Index k = 0; k < steps; ++k) {
    z = model.A * z + model.B * inputs.col(k);
    out.col(k + 1) = model.C * z;
  }
  return out;
}

}  // namespace koopquad
