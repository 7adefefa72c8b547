#include <random>

#include <gtest/gtest.h>

#include "crossgrasp/eigengrasp.hpp"
#include "crossgrasp/errors.hpp"
#include "oracles.hpp"
#include "support.hpp"

using namespace crossgrasp;

namespace {

Eigen::MatrixXd gaussian(int rows, int cols, std::mt19937_64& rng) {
  std::normal_distribution<double> n;
  Eigen::MatrixXd m(rows, cols);
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c) m(r, c) = n(rng);
  return m;
}

double mean_reconstruction_error(const Eigen::MatrixXd& Q, const EigengraspSet& set) {
  double total = 0.0;
  for (Eigen::Index i = 0; i < Q.rows(); ++i) {
    const Eigen::VectorXd q = Q.row(i).transpose();
    total += (q - decode_articulation(encode_amplitudes(q, set), set)).squaredNorm();
  }
  return total / static_cast<double>(Q.rows());
}

}  // namespace

TEST(Pca, RankOneData) {
  Eigen::VectorXd v(4);
  v << 0.1, -0.7, 0.5, 0.5;
  v.normalize();
  const Eigen::MatrixXd Q = Eigen::VectorXd::Ones(10) * v.transpose();
  const EigengraspSet set = pca_eigengrasps(Q, 2, 6);
  ASSERT_EQ(set.count(), 2);
  ASSERT_EQ(set.width(), 6);
  EXPECT_LT((set.compact().row(0).transpose() + v).norm(), 1e-12);  // sign fixed: largest |entry| is -0.7 in v
  EXPECT_EQ(set.basis.row(1).cwiseAbs().maxCoeff(), 0.0);
  EXPECT_EQ(set.basis.rightCols(2).cwiseAbs().maxCoeff(), 0.0);
  EXPECT_EQ(set.dof(), 4);
}

TEST(Pca, EmptyData) { EXPECT_ERROR_KIND(pca_eigengrasps(Eigen::MatrixXd(0, 3), 2), EmptyData); }

TEST(Pca, SubspaceDataReconstructs) {
  std::mt19937_64 rng(1);
  const Eigen::MatrixXd basis = gaussian(2, 5, rng);
  const Eigen::MatrixXd Q = gaussian(1000, 2, rng) * basis;
  const EigengraspSet set = pca_eigengrasps(Q, 2);
  for (Eigen::Index i = 0; i < Q.rows(); ++i) {
    const Eigen::VectorXd q = Q.row(i).transpose();
    EXPECT_LT((decode_articulation(encode_amplitudes(q, set), set) - q).norm(), 1e-9);
  }
}

TEST(Pca, RankDeficientPadsZeroRow) {
  std::mt19937_64 rng(2);
  const EigengraspSet set = pca_eigengrasps(gaussian(50, 8, rng), 9);
  ASSERT_EQ(set.count(), 9);
  EXPECT_EQ(set.basis.row(8).cwiseAbs().maxCoeff(), 0.0);
  EXPECT_GT(set.basis.row(7).norm(), 0.5);
}

TEST(Pca, OrthonormalSignFixedRows) {
  std::mt19937_64 rng(3);
  const EigengraspSet set = pca_eigengrasps(gaussian(100, 6, rng), 4);
  const RowMatrix E = set.compact();
  EXPECT_LT((E * E.transpose() - Eigen::MatrixXd::Identity(4, 4)).cwiseAbs().maxCoeff(), 1e-10);
  for (int r = 0; r < 4; ++r) {
    Eigen::Index arg;
    E.row(r).cwiseAbs().maxCoeff(&arg);
    EXPECT_GT(E(r, arg), 0.0);
  }
}

TEST(Pca, MatchesJacobiEigenOracle) {
  std::mt19937_64 rng(4);
  const Eigen::MatrixXd Q = gaussian(200, 8, rng);
  Eigen::VectorXd values;
  Eigen::MatrixXd vectors;
  oracle::jacobi_eigen(Q.transpose() * Q, values, vectors);
  const RowMatrix E = pca_eigengrasps(Q, 8).compact();
  for (int r = 0; r < 8; ++r) {
    const Eigen::VectorXd ref = vectors.col(r);
    const double diff = std::min((E.row(r).transpose() - ref).norm(), (E.row(r).transpose() + ref).norm());
    EXPECT_LT(diff, 1e-8) << "row " << r;
  }
  for (int k = 1; k <= 8; ++k) {
    const RowMatrix Ek = pca_eigengrasps(Q, k).compact();
    EXPECT_LT(oracle::subspace_angle(Ek, vectors.leftCols(k).transpose()), 1e-8) << "K=" << k;
  }
}

TEST(Pca, ReconstructionMonotoneInK) {
  std::mt19937_64 rng(5);
  const Eigen::MatrixXd Q = gaussian(200, 8, rng);
  double previous = std::numeric_limits<double>::infinity();
  for (int k = 1; k <= 9; ++k) {
    const double err = mean_reconstruction_error(Q, pca_eigengrasps(Q, k));
    EXPECT_LE(err, previous + 1e-12) << "K=" << k;
    previous = err;
  }
  EXPECT_LT(previous, 1e-20);
}

TEST(Pca, Deterministic) {
  std::mt19937_64 rng(6);
  const Eigen::MatrixXd Q = gaussian(30, 5, rng);
  EXPECT_EQ(pca_eigengrasps(Q, 3).basis, pca_eigengrasps(Q, 3).basis);
}

TEST(Decode, BasicCases) {
  std::mt19937_64 rng(7);
  const EigengraspSet set = pca_eigengrasps(gaussian(40, 5, rng), 3);
  EXPECT_EQ(decode_articulation(Eigen::VectorXd::Zero(3), set).cwiseAbs().maxCoeff(), 0.0);
  const Eigen::VectorXd e1 = decode_articulation(Eigen::Vector3d(1, 0, 0), set);
  EXPECT_EQ(e1, set.compact().row(0).transpose());
  EXPECT_ERROR_KIND(decode_articulation(Eigen::VectorXd::Zero(2), set), DimensionMismatch);
}

TEST(Encode, BasicCases) {
  std::mt19937_64 rng(8);
  const EigengraspSet set = pca_eigengrasps(gaussian(40, 5, rng), 3);
  const RowMatrix E = set.compact();
  const Eigen::VectorXd a = encode_amplitudes(E.row(0).transpose(), set);
  EXPECT_LT((a - Eigen::Vector3d(1, 0, 0)).norm(), 1e-12);

  const Eigen::MatrixXd full = pca_eigengrasps(gaussian(40, 5, rng), 5).compact();
  const Eigen::VectorXd orth = full.row(4).transpose();  // orthogonal to rows 0..2 of a different basis, so project
  const Eigen::VectorXd residual = orth - E.transpose() * (E * orth);
  EXPECT_LT(encode_amplitudes(residual, set).norm(), 1e-12);
  EXPECT_ERROR_KIND(encode_amplitudes(Eigen::VectorXd::Zero(4), set), DimensionMismatch);
}

TEST(Encode, LeastSquaresOptimal) {
  std::mt19937_64 rng(9);
  const EigengraspSet set = pca_eigengrasps(gaussian(40, 6, rng), 3);
  std::normal_distribution<double> n;
  for (int trial = 0; trial < 10; ++trial) {
    const Eigen::VectorXd q = gaussian(6, 1, rng);
    const double best = (q - decode_articulation(encode_amplitudes(q, set), set)).norm();
    for (int other = 0; other < 100; ++other) {
      const Eigen::VectorXd a = gaussian(3, 1, rng);
      EXPECT_LE(best, (q - decode_articulation(a, set)).norm() + 1e-12);
    }
  }
}

TEST(Encode, ZeroRowsGetZeroAmplitude) {
  std::mt19937_64 rng(10);
  const EigengraspSet set = pca_eigengrasps(gaussian(50, 8, rng), 9);
  const Eigen::VectorXd a = encode_amplitudes(gaussian(8, 1, rng), set);
  EXPECT_EQ(a[8], 0.0);
}

TEST(Encode, InSpanRoundTrip) {
  std::mt19937_64 rng(11);
  const EigengraspSet set = pca_eigengrasps(gaussian(60, 8, rng), 4);
  for (int trial = 0; trial < 100; ++trial) {
    const Eigen::VectorXd q = set.compact().transpose() * gaussian(4, 1, rng);
    EXPECT_LT((decode_articulation(encode_amplitudes(q, set), set) - q).cwiseAbs().maxCoeff(), 1e-10);
  }
}

TEST(VarianceExplained, RankOne) {
  const Eigen::MatrixXd Q = Eigen::VectorXd::LinSpaced(5, 1, 5) * Eigen::RowVector3d(0, 3, 4);
  const Eigen::VectorXd v = variance_explained(Q, pca_eigengrasps(Q, 3));
  EXPECT_NEAR(v[0], 1.0, 1e-12);
  EXPECT_NEAR(v[1], 0.0, 1e-12);
  EXPECT_NEAR(v[2], 0.0, 1e-12);
}

TEST(VarianceExplained, IsotropicAndNonIncreasing) {
  std::mt19937_64 rng(12);
  const Eigen::MatrixXd Q = gaussian(20000, 4, rng);
  const Eigen::VectorXd v = variance_explained(Q, pca_eigengrasps(Q, 4));
  for (int i = 0; i < 4; ++i) EXPECT_NEAR(v[i], 0.25, 0.05);
  for (int i = 0; i + 1 < 4; ++i) EXPECT_GE(v[i], v[i + 1]);
  EXPECT_LE(v.sum(), 1.0 + 1e-12);
  EXPECT_ERROR_KIND(variance_explained(Eigen::MatrixXd(0, 4), pca_eigengrasps(Q, 4)), EmptyData);
}

TEST(EigengraspJson, RoundTrip) {
  std::mt19937_64 rng(13);
  const EigengraspSet set = pca_eigengrasps(gaussian(20, 5, rng), 3);
  const nlohmann::json doc = eigengrasps_to_json(set);
  EXPECT_EQ(doc["K"], 3);
  EXPECT_EQ(doc["d"], 5);
  const EigengraspSet back = eigengrasps_from_json(doc);
  EXPECT_EQ(back.basis, set.basis);
  EXPECT_EQ(back.active, set.active);
}
