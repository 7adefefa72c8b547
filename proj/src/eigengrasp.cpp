#include "crossgrasp/eigengrasp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <Eigen/SVD>

#include "crossgrasp/errors.hpp"

namespace crossgrasp {

int EigengraspSet::dof() const { return static_cast<int>(std::count(active.begin(), active.end(), true)); }

RowMatrix EigengraspSet::compact() const {
  RowMatrix out(count(), dof());
  int c = 0;
  for (int j = 0; j < width(); ++j) {
    if (active[j]) out.col(c++) = basis.col(j);
  }
  return out;
}

EigengraspSet EigengraspSet::from_compact(const RowMatrix& compact_basis, int max_dof) {
  const int d = static_cast<int>(compact_basis.cols());
  if (d > max_dof) fail(ErrorKind::CapacityExceeded, std::to_string(d) + " DoF exceed D_max = " + std::to_string(max_dof));
  EigengraspSet set;
  set.basis = RowMatrix::Zero(compact_basis.rows(), max_dof);
  set.basis.leftCols(d) = compact_basis;
  set.active.assign(max_dof, false);
  std::fill(set.active.begin(), set.active.begin() + d, true);
  return set;
}

EigengraspSet pca_eigengrasps(const Eigen::MatrixXd& q_data, int k, int max_dof) {
  if (q_data.rows() == 0) fail(ErrorKind::EmptyData, "no articulation samples");
  if (q_data.cols() == 0) fail(ErrorKind::EmptyData, "articulation dimension is zero");
  if (k < 1) fail(ErrorKind::InvalidSpec, "eigengrasp count must be positive");

  const int d = static_cast<int>(q_data.cols());
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(q_data, Eigen::ComputeThinV);
  const Eigen::VectorXd& sigma = svd.singularValues();
  const double cutoff = std::max(q_data.rows(), q_data.cols()) * std::numeric_limits<double>::epsilon() *
                        (sigma.size() > 0 ? sigma[0] : 0.0);
  int rank = 0;
  while (rank < sigma.size() && sigma[rank] > cutoff) ++rank;

  RowMatrix compact = RowMatrix::Zero(k, d);
  for (int i = 0; i < std::min(k, rank); ++i) {
    Eigen::VectorXd row = svd.matrixV().col(i);
    int pivot = 0;
    for (int j = 1; j < d; ++j) {
      if (std::abs(row[j]) > std::abs(row[pivot])) pivot = j;
    }
    if (row[pivot] < 0) row = -row;
    compact.row(i) = row.transpose();
  }
  return EigengraspSet::from_compact(compact, max_dof);
}

Eigen::VectorXd decode_articulation(const Eigen::VectorXd& amplitudes, const EigengraspSet& set) {
  if (amplitudes.size() != set.count()) {
    fail(ErrorKind::DimensionMismatch, "expected " + std::to_string(set.count()) + " amplitudes, got " +
                                           std::to_string(amplitudes.size()));
  }
  Eigen::VectorXd q(set.dof());
  int c = 0;
  for (int j = 0; j < set.width(); ++j) {
    if (!set.active[j]) continue;
    double sum = 0.0;
    for (int i = 0; i < set.count(); ++i) sum += amplitudes[i] * set.basis(i, j);
    q[c++] = sum;
  }
  return q;
}

Eigen::VectorXd encode_amplitudes(const Eigen::VectorXd& q, const EigengraspSet& set) {
  if (q.size() != set.dof()) {
    fail(ErrorKind::DimensionMismatch,
         "articulation has " + std::to_string(q.size()) + " entries, basis spans " + std::to_string(set.dof()));
  }
  // Minimum-norm least squares: zero rows get zero coefficients.
  const Eigen::MatrixXd design = set.compact().transpose();
  return design.completeOrthogonalDecomposition().solve(q);
}

Eigen::VectorXd variance_explained(const Eigen::MatrixXd& q_data, const EigengraspSet& set) {
  if (q_data.rows() == 0) fail(ErrorKind::EmptyData, "no articulation samples");
  if (q_data.cols() != set.dof()) fail(ErrorKind::DimensionMismatch, "data width does not match basis DoF");
  const double total = q_data.squaredNorm();
  const Eigen::MatrixXd projected = q_data * set.compact().transpose();
  Eigen::VectorXd out(set.count());
  for (int i = 0; i < set.count(); ++i) out[i] = total > 0.0 ? projected.col(i).squaredNorm() / total : 0.0;
  return out;
}

nlohmann::json eigengrasps_to_json(const EigengraspSet& set) {
  const RowMatrix compact = set.compact();
  nlohmann::json rows = nlohmann::json::array();
  for (int i = 0; i < compact.rows(); ++i) {
    nlohmann::json row = nlohmann::json::array();
    for (int j = 0; j < compact.cols(); ++j) row.push_back(compact(i, j));
    rows.push_back(std::move(row));
  }
  return {{"K", set.count()}, {"d", set.dof()}, {"E", std::move(rows)}};
}

EigengraspSet eigengrasps_from_json(const nlohmann::json& doc, int max_dof) {
  try {
    const int k = doc.at("K").get<int>();
    const int d = doc.at("d").get<int>();
    const auto& rows = doc.at("E");
    if (static_cast<int>(rows.size()) != k) fail(ErrorKind::SchemaError, "E has the wrong number of rows");
    RowMatrix compact(k, d);
    for (int i = 0; i < k; ++i) {
      if (static_cast<int>(rows[i].size()) != d) fail(ErrorKind::SchemaError, "E row has the wrong width");
      for (int j = 0; j < d; ++j) compact(i, j) = rows[i][j].get<double>();
    }
    return EigengraspSet::from_compact(compact, max_dof);
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::SchemaError, e.what());
  }
}

}  // namespace crossgrasp
