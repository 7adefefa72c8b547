#pragma once

#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "crossgrasp/morphology.hpp"

namespace crossgrasp {

inline constexpr int kDefaultEigengraspCount = 9;

/// K basis rows over a D_max-wide padded articulation space. Columns where
/// `active` is false are exactly zero; the active columns, in order, are the
/// hand's revolute joints.
struct EigengraspSet {
  RowMatrix basis;           // K x D_max
  std::vector<bool> active;  // length D_max, popcount = d

  int count() const { return static_cast<int>(basis.rows()); }
  int width() const { return static_cast<int>(basis.cols()); }
  int dof() const;
  /// Rows restricted to the active columns (K x d).
  RowMatrix compact() const;
  static EigengraspSet from_compact(const RowMatrix& compact_basis, int max_dof);
};

/// Uncentered PCA: the top min(K, rank) right singular vectors of Q (n x d)
/// become the leading rows, sign-fixed so each row's largest-magnitude entry
/// is positive; the remaining rows are zero. Columns d..D_max-1 are padding.
EigengraspSet pca_eigengrasps(const Eigen::MatrixXd& q_data, int k = kDefaultEigengraspCount,
                              int max_dof = kDefaultMaxDof);

/// q = sum_i a_i e_i restricted to the active columns.
Eigen::VectorXd decode_articulation(const Eigen::VectorXd& amplitudes, const EigengraspSet& set);

/// Least-squares amplitudes; rows that are zero receive zero.
Eigen::VectorXd encode_amplitudes(const Eigen::VectorXd& q, const EigengraspSet& set);

/// Fraction of the uncentered second moment ||Q||_F^2 captured by each row.
Eigen::VectorXd variance_explained(const Eigen::MatrixXd& q_data, const EigengraspSet& set);

/// {"K", "d", "E"}; E is written in compact (K x d) form.
nlohmann::json eigengrasps_to_json(const EigengraspSet& set);
EigengraspSet eigengrasps_from_json(const nlohmann::json& doc, int max_dof = kDefaultMaxDof);

}  // namespace crossgrasp
