#pragma once

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <functional>
#include <map>
#include <numeric>
#include <ostream>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "patchfer/error.hpp"

namespace patchfer::eval {

struct FoldPlan {
  std::uint64_t seed = 0;
  std::vector<std::vector<std::size_t>> folds;  // sorted sample indices

  std::size_t k() const { return folds.size(); }

  /// Every index not in fold `f`, ascending.
  std::vector<std::size_t> training_indices(std::size_t f) const {
    std::vector<std::size_t> out;
    for (std::size_t g = 0; g < folds.size(); ++g) {
      if (g != f) out.insert(out.end(), folds[g].begin(), folds[g].end());
    }
    std::sort(out.begin(), out.end());
    return out;
  }
};

/// Shuffles each class with the seeded generator and deals its members
/// round-robin. The dealing position carries across classes so total fold
/// sizes also stay within one of each other.
inline FoldPlan stratified_folds(std::span<const int> labels, std::size_t k = 5, std::uint64_t seed = 0) {
  if (k < 2) throw InvalidArgument("cross-validation needs at least 2 folds");
  std::map<int, std::vector<std::size_t>> by_class;
  for (std::size_t i = 0; i < labels.size(); ++i) by_class[labels[i]].push_back(i);
  std::string offenders;
  for (const auto& [label, idx] : by_class) {
    if (idx.size() < k) {
      offenders += (offenders.empty() ? "" : ", ") + std::string("class ") + std::to_string(label) + " (" +
                   std::to_string(idx.size()) + " samples)";
    }
  }
  if (!offenders.empty()) {
    throw StratificationError("fewer samples than folds (" + std::to_string(k) + "): " + offenders);
  }
  FoldPlan plan{seed, std::vector<std::vector<std::size_t>>(k)};
  std::mt19937_64 rng(seed);
  std::size_t deal = 0;
  for (auto& [label, idx] : by_class) {
    std::shuffle(idx.begin(), idx.end(), rng);
    for (std::size_t i : idx) plan.folds[deal++ % k].push_back(i);
  }
  for (auto& f : plan.folds) std::sort(f.begin(), f.end());
  return plan;
}

/// Row = true class, column = predicted class.
class ConfusionMatrix {
public:
  explicit ConfusionMatrix(int n_classes = 0)
      : n_(n_classes), counts_(std::size_t(n_classes) * std::size_t(n_classes), 0) {}

  int classes() const { return n_; }
  std::uint64_t count(int t, int p) const { return counts_[idx(t, p)]; }
  void add(int t, int p, std::uint64_t n = 1) { counts_[idx(t, p)] += n; }

  std::uint64_t row_total(int t) const {
    std::uint64_t s = 0;
    for (int p = 0; p < n_; ++p) s += count(t, p);
    return s;
  }

  std::uint64_t total() const { return std::accumulate(counts_.begin(), counts_.end(), std::uint64_t{0}); }

  /// 100 * count / row total; rows without samples are all zero.
  double percent(int t, int p) const {
    const auto rt = row_total(t);
    return rt == 0 ? 0.0 : 100.0 * double(count(t, p)) / double(rt);
  }

  std::vector<int> empty_rows() const {
    std::vector<int> out;
    for (int t = 0; t < n_; ++t) {
      if (row_total(t) == 0) out.push_back(t);
    }
    return out;
  }

  ConfusionMatrix& operator+=(const ConfusionMatrix& o) {
    if (o.n_ != n_) throw InvalidArgument("confusion matrices differ in class count");
    for (std::size_t i = 0; i < counts_.size(); ++i) counts_[i] += o.counts_[i];
    return *this;
  }

  friend bool operator==(const ConfusionMatrix&, const ConfusionMatrix&) = default;

private:
  std::size_t idx(int t, int p) const {
    if (t < 0 || p < 0 || t >= n_ || p >= n_) throw InvalidArgument("class id outside confusion matrix");
    return std::size_t(t) * std::size_t(n_) + std::size_t(p);
  }

  int n_;
  std::vector<std::uint64_t> counts_;
};

inline ConfusionMatrix confusion_matrix(std::span<const int> truth, std::span<const int> pred, int n_classes) {
  if (truth.size() != pred.size()) throw InvalidArgument("truth and prediction lengths differ");
  ConfusionMatrix m(n_classes);
  for (std::size_t i = 0; i < truth.size(); ++i) m.add(truth[i], pred[i]);
  return m;
}

/// Unweighted mean of per-class recognition rates (percent).
inline double average_recognition_rate(std::span<const double> diagonal_percent) {
  if (diagonal_percent.empty()) throw InvalidArgument("no classes to average");
  return std::accumulate(diagonal_percent.begin(), diagonal_percent.end(), 0.0) / double(diagonal_percent.size());
}

inline double average_recognition_rate(const ConfusionMatrix& m) {
  if (const auto empty = m.empty_rows(); !empty.empty()) {
    throw InvalidArgument("class " + std::to_string(empty.front()) + " has no samples; recognition rate undefined");
  }
  std::vector<double> diag;
  for (int t = 0; t < m.classes(); ++t) diag.push_back(m.percent(t, t));
  return average_recognition_rate(diag);
}

/// Plain accuracy over all samples (percent).
inline double overall_accuracy(const ConfusionMatrix& m) {
  std::uint64_t hit = 0;
  for (int t = 0; t < m.classes(); ++t) hit += m.count(t, t);
  return m.total() == 0 ? 0.0 : 100.0 * double(hit) / double(m.total());
}

struct CrossValidationResult {
  FoldPlan plan;
  std::vector<ConfusionMatrix> per_fold;
  ConfusionMatrix pooled;
  double pooled_rate = 0.0;         // average recognition rate of the pooled counts
  double mean_of_fold_rates = 0.0;  // mean over folds of each fold's rate
};

/// Given training and test indices, fits on the former and returns one
/// predicted class per test index.
using FitPredict = std::function<std::vector<int>(std::span<const std::size_t> train, std::span<const std::size_t> test)>;

inline CrossValidationResult cross_validate(std::span<const int> labels, int n_classes, const FitPredict& fit_predict,
                                            std::size_t k = 5, std::uint64_t seed = 0) {
  CrossValidationResult r{stratified_folds(labels, k, seed), {}, ConfusionMatrix(n_classes)};
  double rate_sum = 0.0;
  for (std::size_t f = 0; f < r.plan.k(); ++f) {
    const auto train = r.plan.training_indices(f);
    const auto& test = r.plan.folds[f];
    std::vector<int> pred;
    try {
      pred = fit_predict(train, test);
    } catch (const Error& e) {
      rethrow_with_context(e, "fold " + std::to_string(f + 1));
    }
    if (pred.size() != test.size()) throw InvalidArgument("fold predictor returned the wrong number of labels");
    ConfusionMatrix m(n_classes);
    for (std::size_t i = 0; i < test.size(); ++i) m.add(labels[test[i]], pred[i]);
    r.pooled += m;
    rate_sum += average_recognition_rate(m);
    r.per_fold.push_back(std::move(m));
  }
  r.pooled_rate = average_recognition_rate(r.pooled);
  r.mean_of_fold_rates = rate_sum / double(r.plan.k());
  return r;
}

// ---------------------------------------------------------------------------
// Reporting

inline std::string format_fixed(double v, int decimals = 2) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", decimals, v);
  return buf;
}

/// Row-percentage table laid out like the published confusion matrices.
inline void write_table(std::ostream& os, const ConfusionMatrix& m, std::span<const std::string> names) {
  std::size_t w = 10;
  for (const auto& n : names) w = std::max(w, n.size() + 2);
  auto pad = [&](const std::string& s) { return std::string(w > s.size() ? w - s.size() : 0, ' ') + s; };
  os << std::string(w, ' ');
  for (int p = 0; p < m.classes(); ++p) os << pad(names[std::size_t(p)]);
  os << '\n';
  for (int t = 0; t < m.classes(); ++t) {
    const std::string& n = names[std::size_t(t)];
    os << n << std::string(w > n.size() ? w - n.size() : 0, ' ');
    for (int p = 0; p < m.classes(); ++p) os << pad(format_fixed(m.percent(t, p)));
    os << '\n';
  }
}

/// Long-format CSV rows: scope,true,predicted,count,row_percent.
inline void write_confusion_csv_rows(std::ostream& os, const std::string& scope, const ConfusionMatrix& m,
                                     std::span<const std::string> names) {
  for (int t = 0; t < m.classes(); ++t) {
    for (int p = 0; p < m.classes(); ++p) {
      os << scope << ',' << names[std::size_t(t)] << ',' << names[std::size_t(p)] << ',' << m.count(t, p) << ','
         << format_fixed(m.percent(t, p), 6) << '\n';
    }
  }
}

}  // namespace patchfer::eval
