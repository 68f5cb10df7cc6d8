#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <span>
#include <vector>

#include "patchfer/error.hpp"

namespace patchfer::reduce {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Samples in rows; labels are class ids 0..C-1.
struct FeatureMatrix {
  Matrix values;
  std::vector<int> labels;

  Eigen::Index samples() const { return values.rows(); }
  Eigen::Index dims() const { return values.cols(); }
};

inline int class_count(std::span<const int> labels) {
  return static_cast<int>(std::set<int>(labels.begin(), labels.end()).size());
}

/// Per-dimension z-score statistics (population convention).
struct Scaler {
  Vector mean;
  Vector stddev;  // constant dimensions store 1

  Matrix apply(const Matrix& x) const {
    return (x.rowwise() - mean.transpose()).array().rowwise() / stddev.transpose().array();
  }
  Vector apply(const Vector& x) const { return (x - mean).array() / stddev.array(); }
};

inline Scaler fit_scaler(const Matrix& x) {
  if (x.rows() == 0 || x.cols() == 0) throw InvalidArgument("cannot fit a scaler on an empty matrix");
  if (!x.allFinite()) throw InvalidArgument("feature matrix contains NaN or Inf");
  Scaler s;
  s.mean = x.colwise().mean().transpose();
  s.stddev = ((x.rowwise() - s.mean.transpose()).array().square().colwise().sum() / double(x.rows()))
                 .sqrt()
                 .transpose();
  for (Eigen::Index j = 0; j < s.stddev.size(); ++j) {
    // Tiny floating residue on a constant column counts as constant.
    if (!(s.stddev[j] > 1e-12 * std::max(1.0, std::abs(s.mean[j])))) s.stddev[j] = 1.0;
  }
  return s;
}

/// Flips each column so its largest-magnitude entry is positive.
inline void canonicalize_signs(Matrix& basis) {
  for (Eigen::Index c = 0; c < basis.cols(); ++c) {
    Eigen::Index arg = 0;
    basis.col(c).cwiseAbs().maxCoeff(&arg);
    if (basis(arg, c) < 0.0) basis.col(c) *= -1.0;
  }
}

struct Pca {
  Vector mean;         // D
  Matrix basis;        // D x p, orthonormal columns
  Vector eigenvalues;  // p, non-increasing
};

/// Top-p principal directions of the population covariance. Computed through
/// a thin SVD of the centred data, so D >> N stays cheap.
inline Pca pca_fit(const FeatureMatrix& data, Eigen::Index p) {
  const Eigen::Index n = data.samples();
  const Eigen::Index d = data.dims();
  const int c = class_count(data.labels);
  if (n < 2) throw InvalidArgument("PCA needs at least two samples");
  if (Eigen::Index(data.labels.size()) != n) throw InvalidArgument("label count does not match sample count");
  const Eigen::Index bound = std::min<Eigen::Index>(d, n - c);
  if (p < 1 || p > bound) {
    throw InvalidArgument("PCA dimension " + std::to_string(p) + " outside [1, min(D, N-C) = " +
                          std::to_string(bound) + "]");
  }
  Pca out;
  out.mean = data.values.colwise().mean().transpose();
  const Matrix centred = data.values.rowwise() - out.mean.transpose();
  Eigen::BDCSVD<Matrix> svd(centred, Eigen::ComputeThinV);
  out.basis = svd.matrixV().leftCols(p);
  out.eigenvalues = svd.singularValues().head(p).array().square() / double(n);
  canonicalize_signs(out.basis);
  return out;
}

struct Scatter {
  Matrix within;
  Matrix between;
};

/// Population-normalized within- and between-class scatter.
inline Scatter class_scatter(const Matrix& y, std::span<const int> labels) {
  const Eigen::Index n = y.rows();
  const Eigen::Index p = y.cols();
  const Vector global = y.colwise().mean().transpose();
  std::map<int, std::vector<Eigen::Index>> members;
  for (Eigen::Index i = 0; i < n; ++i) members[labels[std::size_t(i)]].push_back(i);
  Scatter s{Matrix::Zero(p, p), Matrix::Zero(p, p)};
  for (const auto& [label, rows] : members) {
    Vector mu = Vector::Zero(p);
    for (auto r : rows) mu += y.row(r).transpose();
    mu /= double(rows.size());
    for (auto r : rows) {
      const Vector dv = y.row(r).transpose() - mu;
      s.within.noalias() += dv * dv.transpose();
    }
    const Vector db = mu - global;
    s.between.noalias() += double(rows.size()) * db * db.transpose();
  }
  s.within /= double(n);
  s.between /= double(n);
  return s;
}

inline constexpr double kWithinRidge = 1e-6;

struct Lda {
  Matrix basis;        // p x q; column stddev on training data = between-class share
  Vector eigenvalues;  // q, non-increasing
};

/// Solves S_b v = lambda (S_w + ridge) v and keeps the top q directions.
inline Lda lda_fit(const Matrix& y, std::span<const int> labels, Eigen::Index q) {
  if (Eigen::Index(labels.size()) != y.rows()) throw InvalidArgument("label count does not match sample count");
  const int c = class_count(labels);
  if (c < 2) throw InvalidArgument("LDA needs at least two classes");
  if (q < 1 || q > c - 1) {
    throw InvalidArgument("LDA dimension " + std::to_string(q) + " outside [1, C-1 = " + std::to_string(c - 1) + "]");
  }
  const Eigen::Index p = y.cols();
  if (q > p) {
    throw InvalidArgument("LDA dimension " + std::to_string(q) + " exceeds the input dimension " + std::to_string(p));
  }
  Scatter s = class_scatter(y, labels);
  const double trace_w = s.within.trace();
  if (!(trace_w > 0.0)) throw DegenerateError("within-class scatter is zero");
  if (!(s.between.trace() > 1e-12 * trace_w)) {
    throw DegenerateError("class means coincide; no discriminant direction exists");
  }
  const Matrix total = s.within + s.between;
  s.within.diagonal().array() += kWithinRidge * trace_w / double(p);

  Eigen::GeneralizedSelfAdjointEigenSolver<Matrix> solver(s.between, s.within);
  if (solver.info() != Eigen::Success) throw DegenerateError("generalized eigenproblem failed");
  Lda out;
  // Eigen returns ascending eigenvalues.
  out.basis = solver.eigenvectors().rightCols(q).rowwise().reverse();
  out.eigenvalues = solver.eigenvalues().tail(q).reverse();
  // Each coordinate gets training standard deviation equal to its between-class
  // share, so directions that carry no class signal collapse instead of adding noise.
  for (Eigen::Index k = 0; k < q; ++k) {
    const auto v = out.basis.col(k);
    const double var = v.dot(total * v);
    if (!(var > 0.0)) continue;
    const double share = std::clamp(v.dot(s.between * v) / var, 0.0, 1.0);
    out.basis.col(k) *= share / std::sqrt(var);
  }
  canonicalize_signs(out.basis);
  return out;
}

/// Scaler -> PCA -> LDA.
struct Projection {
  Scaler scaler;
  Pca pca;
  Lda lda;

  Eigen::Index input_dims() const { return scaler.mean.size(); }
  Eigen::Index output_dims() const { return lda.basis.cols(); }

  Vector to_pca(const Vector& x) const {
    check(x);
    return pca.basis.transpose() * (scaler.apply(x) - pca.mean);
  }

  Vector operator()(const Vector& x) const { return lda.basis.transpose() * to_pca(x); }

  Matrix operator()(const Matrix& rows) const {
    if (rows.cols() != input_dims()) throw InvalidArgument("feature dimension mismatch in projection");
    const Matrix z = scaler.apply(rows).rowwise() - pca.mean.transpose();
    return z * pca.basis * lda.basis;
  }

private:
  void check(const Vector& x) const {
    if (x.size() != input_dims()) {
      throw InvalidArgument("feature dimension " + std::to_string(x.size()) + " does not match projection input " +
                            std::to_string(input_dims()));
    }
  }
};

struct ReductionDims {
  Eigen::Index pca = 0;  // 0 = min(N - C, D)
  Eigen::Index lda = 0;  // 0 = min(C - 1, pca)
};

inline Projection fit_projection(const FeatureMatrix& data, ReductionDims dims = {}) {
  Projection proj;
  proj.scaler = fit_scaler(data.values);
  const FeatureMatrix scaled{proj.scaler.apply(data.values), data.labels};
  const int c = class_count(data.labels);
  const Eigen::Index p = dims.pca > 0 ? dims.pca : std::min<Eigen::Index>(data.samples() - c, data.dims());
  proj.pca = pca_fit(scaled, p);
  const Matrix y = (scaled.values.rowwise() - proj.pca.mean.transpose()) * proj.pca.basis;
  proj.lda = lda_fit(y, data.labels, dims.lda > 0 ? dims.lda : std::min<Eigen::Index>(c - 1, p));
  return proj;
}

}  // namespace patchfer::reduce
