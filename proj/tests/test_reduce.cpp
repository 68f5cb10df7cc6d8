#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "patchfer/reduce.hpp"

using namespace patchfer;
using reduce::FeatureMatrix;
using reduce::Matrix;
using reduce::Vector;

namespace {

FeatureMatrix gaussian_classes(std::uint64_t seed, int classes, int per_class, int dims, double spread) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0.0, 1.0);
  Matrix centres(classes, dims);
  for (int c = 0; c < classes; ++c)
    for (int d = 0; d < dims; ++d) centres(c, d) = spread * g(rng);
  FeatureMatrix fm{Matrix(classes * per_class, dims), {}};
  for (int i = 0; i < classes * per_class; ++i) {
    const int c = i % classes;
    for (int d = 0; d < dims; ++d) fm.values(i, d) = centres(c, d) + g(rng);
    fm.labels.push_back(c);
  }
  return fm;
}

double angle_degrees(const Vector& a, const Vector& b) {
  const double c = std::abs(a.dot(b)) / (a.norm() * b.norm());
  return std::acos(std::min(1.0, c)) * 180.0 / std::numbers::pi;
}

double fisher_ratio(const Vector& w, const reduce::Scatter& s) {
  return w.dot(s.between * w) / w.dot(s.within * w);
}

}  // namespace

TEST(Scaler, PopulationConvention) {
  const Matrix x{{1.0, 5.0}, {3.0, 5.0}};
  const auto s = reduce::fit_scaler(x);
  EXPECT_DOUBLE_EQ(s.mean[0], 2.0);
  EXPECT_DOUBLE_EQ(s.stddev[0], 1.0);
  EXPECT_DOUBLE_EQ(s.stddev[1], 1.0);  // constant column
  const Matrix z = s.apply(x);
  EXPECT_DOUBLE_EQ(z(0, 0), -1.0);
  EXPECT_DOUBLE_EQ(z(1, 0), 1.0);
  EXPECT_DOUBLE_EQ(z(0, 1), 0.0);
}

TEST(Scaler, ZScoresHaveUnitVariance) {
  const auto fm = gaussian_classes(1, 3, 20, 7, 4.0);
  const Matrix z = reduce::fit_scaler(fm.values).apply(fm.values);
  for (Eigen::Index j = 0; j < z.cols(); ++j) {
    EXPECT_NEAR(z.col(j).mean(), 0.0, 1e-12);
    EXPECT_NEAR(z.col(j).squaredNorm() / double(z.rows()), 1.0, 1e-12);
  }
  EXPECT_THROW(reduce::fit_scaler(Matrix(0, 3)), InvalidArgument);
  Matrix bad = fm.values;
  bad(0, 0) = std::nan("");
  EXPECT_THROW(reduce::fit_scaler(bad), InvalidArgument);
}

TEST(Pca, LineDataHasOneDirection) {
  FeatureMatrix fm{Matrix(10, 3), {0, 1, 0, 1, 0, 1, 0, 1, 0, 1}};
  for (int i = 0; i < 10; ++i) fm.values.row(i).setConstant(double(i) - 2.0);
  const auto pca = reduce::pca_fit(fm, 3);
  const Vector dir = Vector::Ones(3) / std::sqrt(3.0);
  EXPECT_NEAR((pca.basis.col(0) - dir).norm(), 0.0, 1e-9);
  EXPECT_NEAR(pca.eigenvalues[1], 0.0, 1e-9);
  EXPECT_NEAR(pca.eigenvalues[2], 0.0, 1e-9);
  // Population variance of 0..9 along the line, times 3 coordinates.
  EXPECT_NEAR(pca.eigenvalues[0], 3.0 * 8.25, 1e-9);
}

TEST(Pca, OrthonormalSortedAndMatchesCovariance) {
  const auto fm = gaussian_classes(2, 4, 15, 12, 2.0);
  const auto pca = reduce::pca_fit(fm, 8);
  EXPECT_NEAR((pca.basis.transpose() * pca.basis - Matrix::Identity(8, 8)).norm(), 0.0, 1e-8);
  for (Eigen::Index k = 1; k < 8; ++k) EXPECT_GE(pca.eigenvalues[k - 1], pca.eigenvalues[k]);

  // Oracle: dense population covariance eigendecomposition.
  const Matrix centred = fm.values.rowwise() - fm.values.colwise().mean();
  const Matrix cov = centred.transpose() * centred / double(fm.samples());
  Eigen::SelfAdjointEigenSolver<Matrix> es(cov);
  for (Eigen::Index k = 0; k < 8; ++k) {
    EXPECT_NEAR(pca.eigenvalues[k], es.eigenvalues()[11 - k], 1e-9);
    EXPECT_LT(angle_degrees(pca.basis.col(k), es.eigenvectors().col(11 - k)), 1e-4);
  }
}

TEST(Pca, FullRankProjectionIsAnIsometry) {
  const auto fm = gaussian_classes(3, 2, 10, 5, 1.0);
  const auto pca = reduce::pca_fit(fm, 5);
  for (int i = 0; i < 5; ++i) {
    for (int j = i + 1; j < 8; ++j) {
      const Vector d = fm.values.row(i) - fm.values.row(j);
      EXPECT_NEAR((pca.basis.transpose() * d).norm(), d.norm(), 1e-8);
    }
  }
}

TEST(Pca, RejectsDimensionAboveBound) {
  const auto fm = gaussian_classes(4, 3, 4, 50, 1.0);  // N - C = 9
  EXPECT_NO_THROW(reduce::pca_fit(fm, 9));
  EXPECT_THROW(reduce::pca_fit(fm, 10), InvalidArgument);
  EXPECT_THROW(reduce::pca_fit(fm, 0), InvalidArgument);
}

TEST(Lda, TwoGaussiansRecoverFisherDirection) {
  std::mt19937_64 rng(7);
  std::normal_distribution<double> g(0.0, 1.0);
  Matrix y(400, 2);
  std::vector<int> labels;
  for (int i = 0; i < 400; ++i) {
    const int c = i < 200 ? 0 : 1;
    y(i, 0) = (c == 0 ? -2.0 : 2.0) + g(rng);
    y(i, 1) = 3.0 * g(rng);
    labels.push_back(c);
  }
  const auto lda = reduce::lda_fit(y, labels, 1);
  EXPECT_LT(angle_degrees(lda.basis.col(0), Vector{{1.0, 0.0}}), 3.0);

  // Closed form: S_w^-1 (mu1 - mu0) from sample statistics.
  const auto s = reduce::class_scatter(y, labels);
  const Vector dmu = y.bottomRows(200).colwise().mean() - y.topRows(200).colwise().mean();
  const Vector closed = s.within.ldlt().solve(dmu);
  EXPECT_LT(angle_degrees(lda.basis.col(0), closed), 3.0);
}

TEST(Lda, BeatsRandomDirections) {
  const auto fm = gaussian_classes(8, 3, 40, 6, 1.5);
  const auto lda = reduce::lda_fit(fm.values, fm.labels, 1);
  const auto s = reduce::class_scatter(fm.values, fm.labels);
  const double best = fisher_ratio(lda.basis.col(0), s);
  std::mt19937_64 rng(9);
  std::normal_distribution<double> g(0.0, 1.0);
  for (int t = 0; t < 100; ++t) {
    Vector w(6);
    for (auto& v : w) v = g(rng);
    EXPECT_GE(best, fisher_ratio(w, s) - 1e-9);
  }
}

TEST(Lda, DimensionBoundsAndDegenerateMeans) {
  const auto fm = gaussian_classes(10, 3, 10, 4, 2.0);
  EXPECT_EQ(reduce::lda_fit(fm.values, fm.labels, 2).basis.cols(), 2);
  EXPECT_THROW(reduce::lda_fit(fm.values, fm.labels, 3), InvalidArgument);
  EXPECT_THROW(reduce::lda_fit(fm.values, fm.labels, 0), InvalidArgument);

  // Mirror-symmetric classes with identical means.
  Matrix y{{1, 0}, {-1, 0}, {0, 1}, {0, -1}};
  EXPECT_THROW(reduce::lda_fit(y, std::vector<int>{0, 0, 1, 1}, 1), DegenerateError);
}

TEST(Projection, AffineAndShapes) {
  const auto fm = gaussian_classes(11, 6, 10, 30, 2.0);
  const auto proj = reduce::fit_projection(fm);
  EXPECT_EQ(proj.input_dims(), 30);
  EXPECT_EQ(proj.output_dims(), 5);
  EXPECT_EQ(proj.pca.basis.cols(), 30);  // min(N - C, D) = min(54, 30)

  const Vector a = fm.values.row(0).transpose(), b = fm.values.row(1).transpose();
  const double t = 0.3;
  const Vector lhs = proj(Vector(t * a + (1 - t) * b));
  const Vector rhs = t * proj(a) + (1 - t) * proj(b);
  EXPECT_NEAR((lhs - rhs).norm(), 0.0, 1e-9);

  // Batch and single-vector paths agree.
  const Matrix batch = proj(fm.values);
  EXPECT_NEAR((batch.row(3).transpose() - proj(Vector(fm.values.row(3).transpose()))).norm(), 0.0, 1e-9);

  // Training mean lands at the PCA origin.
  EXPECT_NEAR(proj.to_pca(Vector(fm.values.colwise().mean().transpose())).norm(), 0.0, 1e-9);

  EXPECT_THROW(proj(Vector(Vector::Zero(29))), InvalidArgument);
  EXPECT_THROW(proj(Matrix(Matrix::Zero(2, 29))), InvalidArgument);
}

TEST(Projection, FullPcaReconstructsScaledData) {
  const auto fm = gaussian_classes(12, 3, 10, 6, 1.0);
  const auto proj = reduce::fit_projection(fm, {6, 2});
  for (int i = 0; i < 5; ++i) {
    const Vector x = fm.values.row(i).transpose();
    const Vector z = proj.scaler.apply(x);
    const Vector back = proj.pca.basis * proj.to_pca(x) + proj.pca.mean;
    EXPECT_LT((back - z).norm(), 1e-6);
  }
}

TEST(Projection, LdaCoordinateSpreadIsBetweenClassShare) {
  const auto fm = gaussian_classes(13, 6, 20, 15, 1.0);
  const auto proj = reduce::fit_projection(fm);
  const Matrix out = proj(fm.values);
  const auto s = reduce::class_scatter(out, fm.labels);
  for (Eigen::Index k = 0; k < out.cols(); ++k) {
    const double total = s.within(k, k) + s.between(k, k);
    EXPECT_NEAR(std::sqrt(total), s.between(k, k) / total, 1e-6);
    EXPECT_LE(total, 1.0 + 1e-9);
    if (k > 0) EXPECT_GE(s.between(k - 1, k - 1) / (s.within(k - 1, k - 1) + s.between(k - 1, k - 1)) + 1e-9,
                         s.between(k, k) / total);
  }
}

TEST(Projection, SignalFreeDirectionsCollapse) {
  // Class means lie on one line in 4-D: a single discriminant direction.
  std::mt19937_64 rng(14);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  FeatureMatrix fm{Matrix(60, 4), {}};
  for (int i = 0; i < 60; ++i) {
    fm.labels.push_back(i % 6);
    for (int d = 0; d < 4; ++d) fm.values(i, d) = 10.0 * (i % 6) + u(rng);
  }
  const auto proj = reduce::fit_projection(fm);
  ASSERT_EQ(proj.output_dims(), 4);
  const Matrix out = proj(fm.values);
  const double first = (out.col(0).array() - out.col(0).mean()).square().mean();
  EXPECT_GT(first, 0.99);
  for (Eigen::Index k = 1; k < 4; ++k) {
    EXPECT_LT((out.col(k).array() - out.col(k).mean()).square().mean(), 0.05);
  }
}
