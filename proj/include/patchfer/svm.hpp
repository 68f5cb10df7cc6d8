#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "patchfer/error.hpp"

namespace patchfer::svm {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

enum class KernelKind { Linear, Polynomial, Rbf };

inline std::string to_string(KernelKind k) {
  switch (k) {
    case KernelKind::Linear: return "linear";
    case KernelKind::Polynomial: return "poly";
    case KernelKind::Rbf: return "rbf";
  }
  return "?";
}

inline KernelKind kernel_kind_from_string(const std::string& s) {
  if (s == "linear") return KernelKind::Linear;
  if (s == "poly" || s == "polynomial") return KernelKind::Polynomial;
  if (s == "rbf") return KernelKind::Rbf;
  throw InvalidArgument("unknown kernel '" + s + "'");
}

struct KernelSpec {
  KernelKind kind = KernelKind::Rbf;
  double gamma = 1.0;  // rbf
  int degree = 3;      // polynomial
  double coef0 = 1.0;  // polynomial

  static KernelSpec linear() { return {KernelKind::Linear}; }
  static KernelSpec rbf(double gamma) { return {KernelKind::Rbf, gamma}; }
  static KernelSpec polynomial(int degree, double coef0) { return {KernelKind::Polynomial, 1.0, degree, coef0}; }

  void validate() const {
    if (kind == KernelKind::Rbf && !(gamma > 0.0)) throw InvalidArgument("rbf kernel needs gamma > 0");
    if (kind == KernelKind::Polynomial && degree < 1) throw InvalidArgument("polynomial kernel needs degree >= 1");
  }

  friend bool operator==(const KernelSpec&, const KernelSpec&) = default;
};

template <class A, class B>
double kernel_eval(const KernelSpec& k, const Eigen::MatrixBase<A>& u, const Eigen::MatrixBase<B>& v) {
  if (u.size() != v.size()) throw InvalidArgument("kernel arguments differ in dimension");
  switch (k.kind) {
    case KernelKind::Linear: return u.dot(v);
    case KernelKind::Polynomial: return std::pow(u.dot(v) + k.coef0, k.degree);
    case KernelKind::Rbf: return std::exp(-k.gamma * (u - v).squaredNorm());
  }
  return 0.0;
}

struct TrainParams {
  double c = 1.0;
  double tol = 1e-3;
  std::uint64_t seed = 0;
  long long max_iter = 0;  // 0 = 10000 * N
};

/// Decision function f(x) = sum_i coef_i k(s_i, x) + bias, coef_i = alpha_i y_i.
/// Positive f votes for `first`, the smaller class id of the pair.
struct BinarySvm {
  Matrix support;  // one support vector per row
  Vector coef;
  double bias = 0.0;
  KernelSpec kernel;
  int first = 0;
  int second = 1;
  int train_count = 0;  // samples of this pair seen during training

  template <class D>
  double decision(const Eigen::MatrixBase<D>& x) const {
    if (x.size() != support.cols()) {
      throw InvalidArgument("decision input has dimension " + std::to_string(x.size()) + ", model expects " +
                            std::to_string(support.cols()));
    }
    double f = bias;
    for (Eigen::Index i = 0; i < support.rows(); ++i) f += coef[i] * kernel_eval(kernel, support.row(i).transpose(), x);
    return f;
  }
};

/// Solver diagnostics for a finished run.
struct TrainReport {
  long long iterations = 0;
  double dual_objective = 0.0;  // sum(alpha) - 1/2 alpha' Q alpha, maximized
  double primal_objective = 0.0;
  double duality_gap = 0.0;
  double max_violation = 0.0;
  std::vector<double> alpha;
};

namespace detail {

// Gram matrix, cached in full up to kFullCacheLimit samples and recomputed
// column by column beyond that.
class KernelColumns {
public:
  static constexpr Eigen::Index kFullCacheLimit = 4096;

  KernelColumns(const Matrix& x, const KernelSpec& k) : x_(x), k_(k), n_(x.rows()) {
    diag_.resize(n_);
    for (Eigen::Index i = 0; i < n_; ++i) diag_[i] = eval(i, i);
    if (n_ <= kFullCacheLimit) {
      full_.resize(n_, n_);
      for (Eigen::Index j = 0; j < n_; ++j) {
        for (Eigen::Index i = j; i < n_; ++i) full_(i, j) = full_(j, i) = eval(i, j);
      }
    } else {
      scratch_[0].resize(n_);
      scratch_[1].resize(n_);
    }
  }

  double diag(Eigen::Index i) const { return diag_[i]; }

  // `slot` picks one of two scratch buffers so two columns can be live at once.
  const double* column(Eigen::Index j, int slot) {
    if (full_.size() > 0) return full_.col(j).data();
    Vector& buf = scratch_[slot];
    for (Eigen::Index i = 0; i < n_; ++i) buf[i] = eval(i, j);
    return buf.data();
  }

private:
  double eval(Eigen::Index i, Eigen::Index j) const {
    return kernel_eval(k_, x_.row(i).transpose(), x_.row(j).transpose());
  }

  const Matrix& x_;
  KernelSpec k_;
  Eigen::Index n_;
  Vector diag_;
  Matrix full_;
  Vector scratch_[2];
};

}  // namespace detail

/// Soft-margin C-SVM dual solved by SMO with second-order working-set
/// selection. Labels must be +1/-1. Ties in the selection scan are broken by a
/// seeded visiting order.
inline BinarySvm train_binary(const Matrix& x, std::span<const int> y, const KernelSpec& kernel,
                              const TrainParams& params = {}, TrainReport* report = nullptr) {
  kernel.validate();
  const Eigen::Index n = x.rows();
  if (Eigen::Index(y.size()) != n) throw InvalidArgument("label count does not match sample count");
  if (!(params.c > 0.0)) throw InvalidArgument("SVM regularization C must be positive");
  if (!(params.tol > 0.0)) throw InvalidArgument("SVM tolerance must be positive");
  bool has_pos = false, has_neg = false;
  for (int label : y) {
    if (label == 1) has_pos = true;
    else if (label == -1) has_neg = true;
    else throw InvalidArgument("binary SVM labels must be +1 or -1");
  }
  if (!has_pos || !has_neg) throw InvalidArgument("binary SVM training needs samples of both labels");

  const double c = params.c;
  constexpr double kTau = 1e-12;
  const long long max_iter = params.max_iter > 0 ? params.max_iter : 10000LL * std::max<Eigen::Index>(n, 1);

  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::mt19937_64 rng(params.seed);
  std::shuffle(order.begin(), order.end(), rng);

  detail::KernelColumns kc(x, kernel);
  std::vector<double> alpha(std::size_t(n), 0.0);
  std::vector<double> grad(std::size_t(n), -1.0);  // gradient of 1/2 a'Qa - e'a
  auto yi = [&](Eigen::Index i) { return double(y[std::size_t(i)]); };
  auto in_up = [&](Eigen::Index t) {
    const double a = alpha[std::size_t(t)];
    return (y[std::size_t(t)] == 1 && a < c) || (y[std::size_t(t)] == -1 && a > 0.0);
  };
  auto in_low = [&](Eigen::Index t) {
    const double a = alpha[std::size_t(t)];
    return (y[std::size_t(t)] == 1 && a > 0.0) || (y[std::size_t(t)] == -1 && a < c);
  };

  long long iter = 0;
  double violation = 0.0;
  for (;; ++iter) {
    double gmax = -std::numeric_limits<double>::infinity();
    Eigen::Index i = -1;
    for (Eigen::Index t : order) {
      if (in_up(t) && -yi(t) * grad[std::size_t(t)] > gmax) {
        gmax = -yi(t) * grad[std::size_t(t)];
        i = t;
      }
    }
    double gmax2 = -std::numeric_limits<double>::infinity();
    Eigen::Index j = -1;
    double best = std::numeric_limits<double>::infinity();
    const double* qi = i >= 0 ? kc.column(i, 0) : nullptr;
    for (Eigen::Index t : order) {
      if (!in_low(t)) continue;
      const double ytg = yi(t) * grad[std::size_t(t)];
      gmax2 = std::max(gmax2, ytg);
      const double b = gmax + ytg;
      if (i >= 0 && b > 0.0) {
        double a = kc.diag(i) + kc.diag(t) - 2.0 * qi[t];
        if (a <= 0.0) a = kTau;
        if (-(b * b) / a < best) {
          best = -(b * b) / a;
          j = t;
        }
      }
    }
    violation = gmax + gmax2;
    if (violation < params.tol || j < 0) break;
    if (iter >= max_iter) break;  // reported with the duality gap below

    const double* qj = kc.column(j, 1);
    qi = kc.column(i, 0);
    const auto si = std::size_t(i), sj = std::size_t(j);
    const double old_ai = alpha[si], old_aj = alpha[sj];
    const double kij = qi[j];
    if (y[si] != y[sj]) {
      double quad = kc.diag(i) + kc.diag(j) - 2.0 * kij;
      if (quad <= 0.0) quad = kTau;
      const double delta = (-grad[si] - grad[sj]) / quad;
      const double diff = alpha[si] - alpha[sj];
      alpha[si] += delta;
      alpha[sj] += delta;
      if (diff > 0.0) {
        if (alpha[sj] < 0.0) { alpha[sj] = 0.0; alpha[si] = diff; }
      } else {
        if (alpha[si] < 0.0) { alpha[si] = 0.0; alpha[sj] = -diff; }
      }
      if (diff > 0.0) {
        if (alpha[si] > c) { alpha[si] = c; alpha[sj] = c - diff; }
      } else {
        if (alpha[sj] > c) { alpha[sj] = c; alpha[si] = c + diff; }
      }
    } else {
      double quad = kc.diag(i) + kc.diag(j) - 2.0 * kij;
      if (quad <= 0.0) quad = kTau;
      const double delta = (grad[si] - grad[sj]) / quad;
      const double sum = alpha[si] + alpha[sj];
      alpha[si] -= delta;
      alpha[sj] += delta;
      if (sum > c) {
        if (alpha[si] > c) { alpha[si] = c; alpha[sj] = sum - c; }
      } else {
        if (alpha[sj] < 0.0) { alpha[sj] = 0.0; alpha[si] = sum; }
      }
      if (sum > c) {
        if (alpha[sj] > c) { alpha[sj] = c; alpha[si] = sum - c; }
      } else {
        if (alpha[si] < 0.0) { alpha[si] = 0.0; alpha[sj] = sum; }
      }
    }
    const double dai = alpha[si] - old_ai;
    const double daj = alpha[sj] - old_aj;
    for (Eigen::Index t = 0; t < n; ++t) {
      // Q_ti = y_t y_i K_ti
      grad[std::size_t(t)] += yi(t) * (yi(i) * qi[t] * dai + yi(j) * qj[t] * daj);
    }
  }

  // Offset from free multipliers, or the midpoint of the feasible interval.
  double ub = std::numeric_limits<double>::infinity();
  double lb = -std::numeric_limits<double>::infinity();
  double free_sum = 0.0;
  int free_count = 0;
  for (Eigen::Index t = 0; t < n; ++t) {
    const auto st = std::size_t(t);
    const double ytg = yi(t) * grad[st];
    if (alpha[st] >= c) {
      if (y[st] == -1) ub = std::min(ub, ytg);
      else lb = std::max(lb, ytg);
    } else if (alpha[st] <= 0.0) {
      if (y[st] == 1) ub = std::min(ub, ytg);
      else lb = std::max(lb, ytg);
    } else {
      ++free_count;
      free_sum += ytg;
    }
  }
  const double rho = free_count > 0 ? free_sum / free_count : 0.5 * (ub + lb);

  // Objectives for the duality gap.
  double quad = 0.0, alpha_sum = 0.0, hinge = 0.0;
  for (Eigen::Index t = 0; t < n; ++t) {
    const auto st = std::size_t(t);
    quad += alpha[st] * (grad[st] + 1.0);
    alpha_sum += alpha[st];
    const double margin = (grad[st] + 1.0) - yi(t) * rho;  // y_t f(x_t)
    hinge += std::max(0.0, 1.0 - margin);
  }
  const double dual = alpha_sum - 0.5 * quad;
  const double primal = 0.5 * quad + c * hinge;

  if (violation >= params.tol && iter >= max_iter) {
    throw ConvergenceError("SMO did not reach KKT tolerance within " + std::to_string(max_iter) +
                               " iterations (duality gap " + std::to_string(primal - dual) + ")",
                           primal - dual);
  }

  BinarySvm model;
  model.kernel = kernel;
  model.bias = -rho;
  model.train_count = int(n);
  std::vector<Eigen::Index> sv;
  for (Eigen::Index t = 0; t < n; ++t) {
    if (alpha[std::size_t(t)] > 0.0) sv.push_back(t);
  }
  model.support.resize(Eigen::Index(sv.size()), x.cols());
  model.coef.resize(Eigen::Index(sv.size()));
  for (std::size_t k = 0; k < sv.size(); ++k) {
    model.support.row(Eigen::Index(k)) = x.row(sv[k]);
    model.coef[Eigen::Index(k)] = alpha[std::size_t(sv[k])] * yi(sv[k]);
  }
  if (report) {
    *report = {iter, dual, primal, primal - dual, violation, std::move(alpha)};
  }
  return model;
}

/// One binary machine per unordered class pair, ordered (0,1), (0,2), ..., (C-2,C-1).
struct OvoEnsemble {
  int n_classes = 0;
  std::vector<BinarySvm> members;

  static std::size_t pair_count(int n_classes) { return std::size_t(n_classes) * std::size_t(n_classes - 1) / 2; }
};

inline OvoEnsemble train_ovo(const Matrix& x, std::span<const int> labels, const KernelSpec& kernel,
                             const TrainParams& params = {}) {
  if (Eigen::Index(labels.size()) != x.rows()) throw InvalidArgument("label count does not match sample count");
  if (labels.empty()) throw InvalidArgument("no training samples");
  const int n_classes = *std::max_element(labels.begin(), labels.end()) + 1;
  if (*std::min_element(labels.begin(), labels.end()) < 0) throw InvalidArgument("class ids must be non-negative");
  if (n_classes < 2) throw InvalidArgument("one-against-one needs at least two classes");
  std::vector<std::vector<Eigen::Index>> members(static_cast<std::size_t>(n_classes));
  for (std::size_t i = 0; i < labels.size(); ++i) members[std::size_t(labels[i])].push_back(Eigen::Index(i));
  for (int k = 0; k < n_classes; ++k) {
    if (members[std::size_t(k)].size() < 2) {
      throw InvalidArgument("class " + std::to_string(k) + " has " + std::to_string(members[std::size_t(k)].size()) +
                            " training samples; at least 2 are required");
    }
  }

  OvoEnsemble ens;
  ens.n_classes = n_classes;
  ens.members.reserve(OvoEnsemble::pair_count(n_classes));
  for (int a = 0; a < n_classes; ++a) {
    for (int b = a + 1; b < n_classes; ++b) {
      const auto& ma = members[std::size_t(a)];
      const auto& mb = members[std::size_t(b)];
      Matrix sub(Eigen::Index(ma.size() + mb.size()), x.cols());
      std::vector<int> y;
      y.reserve(ma.size() + mb.size());
      // Keep original sample order within the pair subproblem.
      std::size_t ia = 0, ib = 0;
      Eigen::Index r = 0;
      while (ia < ma.size() || ib < mb.size()) {
        const bool take_a = ib >= mb.size() || (ia < ma.size() && ma[ia] < mb[ib]);
        const Eigen::Index src = take_a ? ma[ia++] : mb[ib++];
        sub.row(r++) = x.row(src);
        y.push_back(take_a ? 1 : -1);
      }
      BinarySvm m = train_binary(sub, y, kernel, params);
      m.first = a;
      m.second = b;
      ens.members.push_back(std::move(m));
    }
  }
  return ens;
}

struct Prediction {
  int label = -1;
  std::vector<int> votes;
  std::vector<double> decisions;  // one per ensemble member
};

/// Majority vote. Ties go to the class with the largest summed |f| over all
/// pairs it takes part in, then to the smallest class id.
inline Prediction vote(int n_classes, std::span<const std::pair<int, int>> pairs, std::span<const double> decisions) {
  Prediction p;
  p.votes.assign(std::size_t(n_classes), 0);
  p.decisions.assign(decisions.begin(), decisions.end());
  std::vector<double> strength(std::size_t(n_classes), 0.0);
  for (std::size_t m = 0; m < pairs.size(); ++m) {
    const auto [a, b] = pairs[m];
    const double f = decisions[m];
    ++p.votes[std::size_t(f >= 0.0 ? a : b)];
    strength[std::size_t(a)] += std::abs(f);
    strength[std::size_t(b)] += std::abs(f);
  }
  int best = 0;
  for (int k = 1; k < n_classes; ++k) {
    const auto sk = std::size_t(k), sb = std::size_t(best);
    if (p.votes[sk] > p.votes[sb] || (p.votes[sk] == p.votes[sb] && strength[sk] > strength[sb])) best = k;
  }
  p.label = best;
  return p;
}

template <class D>
Prediction predict_ovo(const OvoEnsemble& ens, const Eigen::MatrixBase<D>& x) {
  std::vector<std::pair<int, int>> pairs;
  std::vector<double> decisions;
  for (const BinarySvm& m : ens.members) {
    pairs.emplace_back(m.first, m.second);
    decisions.push_back(m.decision(x));
  }
  return vote(ens.n_classes, pairs, decisions);
}

}  // namespace patchfer::svm
