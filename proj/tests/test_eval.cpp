#include <gtest/gtest.h>

#include <random>
#include <set>
#include <sstream>

#include "patchfer/eval.hpp"
#include "patchfer/model_io.hpp"
#include "patchfer/pipeline.hpp"

using namespace patchfer;

namespace {

std::vector<int> balanced_labels(int classes, int per_class) {
  std::vector<int> out;
  for (int i = 0; i < classes * per_class; ++i) out.push_back(i % classes);
  return out;
}

// Gaussian clusters; `separation` 0 gives pure noise.
reduce::FeatureMatrix clusters(std::uint64_t seed, int per_class, int dims, double separation) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0.0, 1.0);
  reduce::FeatureMatrix fm{reduce::Matrix(6 * per_class, dims), balanced_labels(6, per_class)};
  for (int i = 0; i < fm.values.rows(); ++i) {
    for (int d = 0; d < dims; ++d) fm.values(i, d) = g(rng) + (d % 6 == fm.labels[std::size_t(i)] ? separation : 0.0);
  }
  return fm;
}

}  // namespace

TEST(StratifiedFolds, EqualClassesGiveEqualFolds) {
  const auto labels = balanced_labels(6, 30);
  const auto plan = eval::stratified_folds(labels, 5, 1);
  ASSERT_EQ(plan.k(), 5u);
  for (const auto& fold : plan.folds) {
    EXPECT_EQ(fold.size(), 36u);
    std::vector<int> per(6, 0);
    for (auto i : fold) ++per[std::size_t(labels[i])];
    for (int c : per) EXPECT_EQ(c, 6);
  }
}

TEST(StratifiedFolds, FiveSamplesGoOnePerFold) {
  std::vector<int> labels = balanced_labels(2, 10);
  labels.insert(labels.end(), 5, 2);
  const auto plan = eval::stratified_folds(labels, 5, 3);
  for (const auto& fold : plan.folds) {
    EXPECT_EQ(std::count_if(fold.begin(), fold.end(), [&](auto i) { return labels[i] == 2; }), 1);
  }
}

TEST(StratifiedFolds, PartitionAndSkew) {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 30; ++trial) {
    std::vector<int> labels;
    std::uniform_int_distribution<int> size(5, 40);
    for (int c = 0; c < 6; ++c) labels.insert(labels.end(), std::size_t(size(rng)), c);
    std::shuffle(labels.begin(), labels.end(), rng);
    const auto plan = eval::stratified_folds(labels, 5, std::uint64_t(trial));
    std::set<std::size_t> all;
    std::size_t total = 0;
    for (const auto& fold : plan.folds) {
      all.insert(fold.begin(), fold.end());
      total += fold.size();
    }
    EXPECT_EQ(total, labels.size());
    EXPECT_EQ(all.size(), labels.size());
    for (int c = 0; c < 6; ++c) {
      std::vector<long> counts;
      for (const auto& fold : plan.folds) {
        counts.push_back(std::count_if(fold.begin(), fold.end(), [&](auto i) { return labels[i] == c; }));
      }
      EXPECT_LE(*std::max_element(counts.begin(), counts.end()) - *std::min_element(counts.begin(), counts.end()), 1);
    }
    const auto train0 = plan.training_indices(0);
    EXPECT_EQ(train0.size() + plan.folds[0].size(), labels.size());
    for (auto i : plan.folds[0]) EXPECT_FALSE(std::binary_search(train0.begin(), train0.end(), i));
  }
}

TEST(StratifiedFolds, SeedDeterminism) {
  const auto labels = balanced_labels(4, 25);
  EXPECT_EQ(eval::stratified_folds(labels, 5, 7).folds, eval::stratified_folds(labels, 5, 7).folds);
  EXPECT_NE(eval::stratified_folds(labels, 5, 7).folds, eval::stratified_folds(labels, 5, 8).folds);
}

TEST(StratifiedFolds, SmallClassesAreListed) {
  std::vector<int> labels = balanced_labels(3, 10);
  labels.insert(labels.end(), {3, 3, 3, 4});
  try {
    eval::stratified_folds(labels, 5, 0);
    FAIL() << "expected StratificationError";
  } catch (const StratificationError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("class 3 (3 samples)"), std::string::npos) << msg;
    EXPECT_NE(msg.find("class 4 (1 samples)"), std::string::npos) << msg;
  }
  EXPECT_THROW(eval::stratified_folds(labels, 1, 0), InvalidArgument);
}

TEST(Confusion, CountsAndPercentages) {
  const auto m = eval::confusion_matrix(std::vector<int>{0, 0, 0, 1, 2}, std::vector<int>{0, 0, 1, 1, 2}, 3);
  EXPECT_NEAR(m.percent(0, 0), 66.67, 0.005);
  EXPECT_NEAR(m.percent(0, 1), 33.33, 0.005);
  EXPECT_EQ(m.percent(0, 2), 0.0);
  for (int t = 0; t < 3; ++t) {
    double row = 0;
    for (int p = 0; p < 3; ++p) row += m.percent(t, p);
    EXPECT_NEAR(row, 100.0, 1e-9);
  }
  EXPECT_THROW(eval::confusion_matrix(std::vector<int>{0, 1}, std::vector<int>{0}, 2), InvalidArgument);
  EXPECT_THROW(eval::confusion_matrix(std::vector<int>{0, 3}, std::vector<int>{0, 1}, 2), InvalidArgument);
}

TEST(AverageRecognitionRate, PublishedDiagonals) {
  const std::vector<double> ck{95.26, 88.75, 97.78, 95.50, 94.21, 96.32};
  const std::vector<double> jaffe{98.33, 88.33, 79.59, 93.33, 83.33, 81.67};
  EXPECT_NEAR(eval::average_recognition_rate(ck), 94.63, 0.01);
  EXPECT_NEAR(eval::average_recognition_rate(jaffe), 87.43, 0.01);
}

TEST(AverageRecognitionRate, IdentityAndEmptyClass) {
  const auto labels = balanced_labels(6, 4);
  EXPECT_DOUBLE_EQ(eval::average_recognition_rate(eval::confusion_matrix(labels, labels, 6)), 100.0);
  // Unweighted: class 0 has 1 of 1 right, class 1 has 0 of 3.
  const auto m = eval::confusion_matrix(std::vector<int>{0, 1, 1, 1}, std::vector<int>{0, 0, 0, 0}, 2);
  EXPECT_DOUBLE_EQ(eval::average_recognition_rate(m), 50.0);
  EXPECT_DOUBLE_EQ(eval::overall_accuracy(m), 25.0);
  EXPECT_THROW(eval::average_recognition_rate(eval::confusion_matrix(std::vector<int>{0}, std::vector<int>{0}, 2)),
               InvalidArgument);
}

TEST(CrossValidate, SeparableRawFeaturesScorePerfectly) {
  // Disjoint value ranges per class.
  reduce::FeatureMatrix fm{reduce::Matrix(60, 4), balanced_labels(6, 10)};
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int i = 0; i < 60; ++i) {
    for (int d = 0; d < 4; ++d) fm.values(i, d) = 10.0 * fm.labels[std::size_t(i)] + u(rng);
  }
  const auto r = cross_validate(fm, PipelineConfig{}, 5, 1);
  EXPECT_DOUBLE_EQ(r.pooled_rate, 100.0);
  EXPECT_DOUBLE_EQ(r.mean_of_fold_rates, 100.0);
}

TEST(CrossValidate, FoldMatricesSumToPooled) {
  const auto fm = clusters(3, 12, 18, 1.0);
  const auto r = cross_validate(fm, PipelineConfig{}, 4, 9);
  ASSERT_EQ(r.per_fold.size(), 4u);
  eval::ConfusionMatrix sum(6);
  for (const auto& m : r.per_fold) sum += m;
  EXPECT_EQ(sum, r.pooled);
  EXPECT_EQ(r.pooled.total(), 72u);
}

TEST(CrossValidate, ShuffledLabelsStayNearChance) {
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    auto fm = clusters(100 + seed, 60, 30, 0.0);
    std::mt19937_64 rng(seed);
    std::shuffle(fm.labels.begin(), fm.labels.end(), rng);
    const auto r = cross_validate(fm, PipelineConfig{}, 5, seed);
    EXPECT_GE(r.pooled_rate, 8.0);
    EXPECT_LE(r.pooled_rate, 26.0);
  }
}

TEST(CrossValidate, FoldModelIgnoresItsTestSamples) {
  const auto fm = clusters(4, 10, 12, 1.5);
  const PipelineConfig cfg;
  const auto plan = eval::stratified_folds(fm.labels, 5, 0);
  for (std::size_t f = 0; f < plan.k(); ++f) {
    const auto train_rows = plan.training_indices(f);
    const std::string base = model_bytes(fit_model(select_rows(fm, train_rows), cfg));

    // Delete one held-out sample and refit on the same training rows.
    const std::size_t victim = plan.folds[f].front();
    std::vector<std::size_t> keep;
    for (std::size_t i = 0; i < fm.labels.size(); ++i) {
      if (i != victim) keep.push_back(i);
    }
    const auto reduced = select_rows(fm, keep);
    std::vector<std::size_t> remapped;
    for (auto r : train_rows) remapped.push_back(r < victim ? r : r - 1);
    EXPECT_EQ(model_bytes(fit_model(select_rows(reduced, remapped), cfg)), base) << "fold " << f;
  }

  // Through the evaluation driver: corrupting fold 0's test rows leaves
  // fold 0's model untouched and changes the other folds' models.
  auto record = [&](const reduce::FeatureMatrix& data) {
    std::vector<std::string> bytes;
    eval::cross_validate(
        data.labels, 6,
        [&](std::span<const std::size_t> tr, std::span<const std::size_t> te) {
          const auto model = fit_model(select_rows(data, tr), cfg);
          bytes.push_back(model_bytes(model));
          std::vector<int> pred;
          for (auto r : te) pred.push_back(predict_features(model, data.values.row(Eigen::Index(r)).transpose()).label);
          return pred;
        },
        5, 0);
    return bytes;
  };
  auto corrupted = fm;
  for (auto r : plan.folds[0]) corrupted.values.row(Eigen::Index(r)).setConstant(1e3);
  const auto a = record(fm);
  const auto b = record(corrupted);
  EXPECT_EQ(a[0], b[0]);
  for (std::size_t f = 1; f < a.size(); ++f) EXPECT_NE(a[f], b[f]);
}

TEST(CrossValidate, ErrorsNameTheFold) {
  reduce::FeatureMatrix fm{reduce::Matrix::Zero(30, 3), balanced_labels(6, 5)};
  try {
    cross_validate(fm, PipelineConfig{}, 5, 0);
    FAIL() << "expected an error";
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("fold 1"), std::string::npos) << e.what();
  }
}

TEST(Reporting, CsvRowsAndTable) {
  const auto m = eval::confusion_matrix(std::vector<int>{0, 0, 1}, std::vector<int>{0, 1, 1}, 2);
  const std::vector<std::string> names{"anger", "fear"};
  std::ostringstream csv;
  eval::write_confusion_csv_rows(csv, "pooled", m, names);
  EXPECT_NE(csv.str().find("pooled,anger,fear,1,50.000000"), std::string::npos) << csv.str();
  std::ostringstream table;
  eval::write_table(table, m, names);
  EXPECT_NE(table.str().find("100.00"), std::string::npos);
  EXPECT_EQ(eval::format_fixed(94.63666), "94.64");
}
