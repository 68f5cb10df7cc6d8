#include <gtest/gtest.h>

#include <random>

#include "patchfer/svm.hpp"

using namespace patchfer;
using svm::KernelSpec;
using svm::Matrix;
using svm::Vector;

namespace {

struct Blobs {
  Matrix x;
  std::vector<int> y;
};

// Two overlapping Gaussian clouds in the plane.
Blobs blobs(std::uint64_t seed, int per_class, double spread) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0.0, spread);
  Blobs b{Matrix(2 * per_class, 2), {}};
  for (int i = 0; i < 2 * per_class; ++i) {
    const int label = i % 2 ? -1 : 1;
    b.x(i, 0) = label * 1.0 + g(rng);
    b.x(i, 1) = label * 0.5 + g(rng);
    b.y.push_back(label);
  }
  return b;
}

Vector v2(double a, double b) { return Vector{{a, b}}; }

}  // namespace

TEST(Kernel, DocumentedValues) {
  EXPECT_EQ(svm::kernel_eval(KernelSpec::rbf(0.7), v2(3, -1), v2(3, -1)), 1.0);
  EXPECT_EQ(svm::kernel_eval(KernelSpec::linear(), v2(1, 2), v2(3, 4)), 11.0);
  EXPECT_EQ(svm::kernel_eval(KernelSpec::polynomial(2, 1.0), v2(1, 0), v2(1, 0)), 4.0);
  EXPECT_NEAR(svm::kernel_eval(KernelSpec::rbf(0.5), v2(0, 0), v2(1, 1)), std::exp(-1.0), 1e-15);
  EXPECT_THROW(svm::kernel_eval(KernelSpec::linear(), v2(1, 2), Vector::Ones(3)), InvalidArgument);
}

TEST(Kernel, NamesRoundTrip) {
  for (auto k : {svm::KernelKind::Linear, svm::KernelKind::Polynomial, svm::KernelKind::Rbf}) {
    EXPECT_EQ(svm::kernel_kind_from_string(svm::to_string(k)), k);
  }
  EXPECT_THROW(svm::kernel_kind_from_string("sigmoid"), InvalidArgument);
  EXPECT_THROW(KernelSpec::rbf(0.0).validate(), InvalidArgument);
}

TEST(TrainBinary, TwoPointMaxMargin) {
  const Matrix x{{-1.0, 0.0}, {1.0, 0.0}};
  const std::vector<int> y{-1, 1};
  const auto m = svm::train_binary(x, y, KernelSpec::linear(), {.c = 10.0});
  EXPECT_NEAR(m.decision(v2(0.5, 7.0)), 0.5, 1e-3);
  EXPECT_NEAR(m.decision(v2(0.0, 0.0)), 0.0, 1e-3);
  EXPECT_NEAR(m.decision(v2(1.0, 0.0)), 1.0, 1e-3);
  EXPECT_NEAR(m.decision(v2(-1.0, 0.0)), -1.0, 1e-3);
  EXPECT_THROW(m.decision(Vector::Zero(3)), InvalidArgument);
}

TEST(TrainBinary, XorWithRbf) {
  const Matrix x{{0, 0}, {1, 1}, {0, 1}, {1, 0}};
  const std::vector<int> y{1, 1, -1, -1};
  const auto m = svm::train_binary(x, y, KernelSpec::rbf(1.0), {.c = 10.0});
  for (int i = 0; i < 4; ++i) {
    const double f = m.decision(x.row(i).transpose());
    EXPECT_EQ(f >= 0 ? 1 : -1, y[std::size_t(i)]) << "point " << i;
  }
}

TEST(TrainBinary, RejectsBadInput) {
  const Matrix x{{0, 0}, {1, 1}};
  EXPECT_THROW(svm::train_binary(x, std::vector<int>{1, 1}, KernelSpec::linear()), InvalidArgument);
  EXPECT_THROW(svm::train_binary(x, std::vector<int>{1, 0}, KernelSpec::linear()), InvalidArgument);
  EXPECT_THROW(svm::train_binary(x, std::vector<int>{1}, KernelSpec::linear()), InvalidArgument);
  EXPECT_THROW(svm::train_binary(x, std::vector<int>{1, -1}, KernelSpec::linear(), {.c = 0.0}), InvalidArgument);
}

TEST(TrainBinary, DualFeasibilityAndObjective) {
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    for (double c : {0.1, 1.0, 10.0}) {
      for (const KernelSpec& k : {KernelSpec::linear(), KernelSpec::rbf(0.5), KernelSpec::polynomial(3, 1.0)}) {
        const Blobs b = blobs(seed, 40, 1.0);
        svm::TrainReport rep;
        const svm::TrainParams prm{.c = c};
        const auto m = svm::train_binary(b.x, b.y, k, prm, &rep);
        double sum = 0.0;
        for (std::size_t i = 0; i < rep.alpha.size(); ++i) {
          EXPECT_GE(rep.alpha[i], 0.0);
          EXPECT_LE(rep.alpha[i], c);
          sum += rep.alpha[i] * b.y[i];
        }
        EXPECT_LE(std::abs(sum), 1e-6);
        EXPECT_GE(rep.dual_objective, 0.0);
        EXPECT_LE(rep.duality_gap, prm.tol * double(b.y.size()));
        EXPECT_LT(rep.max_violation, prm.tol);
        EXPECT_EQ(m.train_count, 80);
      }
    }
  }
}

TEST(TrainBinary, FreeSupportVectorsSitOnTheMargin) {
  const Blobs b = blobs(4, 50, 0.8);
  svm::TrainReport rep;
  const double c = 1.0;
  const auto m = svm::train_binary(b.x, b.y, KernelSpec::rbf(1.0), {.c = c}, &rep);
  int free = 0;
  for (std::size_t i = 0; i < rep.alpha.size(); ++i) {
    if (rep.alpha[i] > 1e-9 && rep.alpha[i] < c - 1e-9) {
      ++free;
      EXPECT_NEAR(b.y[i] * m.decision(b.x.row(Eigen::Index(i)).transpose()), 1.0, 1e-3);
    }
  }
  EXPECT_GT(free, 0);
}

TEST(TrainBinary, SameSeedSameModel) {
  const Blobs b = blobs(5, 30, 1.2);
  const auto a = svm::train_binary(b.x, b.y, KernelSpec::rbf(0.5), {.seed = 9});
  const auto c = svm::train_binary(b.x, b.y, KernelSpec::rbf(0.5), {.seed = 9});
  EXPECT_EQ(a.support, c.support);
  EXPECT_EQ(a.coef, c.coef);
  EXPECT_EQ(a.bias, c.bias);
}

TEST(TrainBinary, SampleOrderOnlyMovesTheTolBand) {
  const Blobs b = blobs(6, 60, 1.0);
  std::vector<Eigen::Index> perm(b.y.size());
  std::iota(perm.begin(), perm.end(), 0);
  std::mt19937_64 rng(1);
  std::shuffle(perm.begin(), perm.end(), rng);
  Blobs p{Matrix(b.x.rows(), 2), {}};
  for (std::size_t i = 0; i < perm.size(); ++i) {
    p.x.row(Eigen::Index(i)) = b.x.row(perm[i]);
    p.y.push_back(b.y[std::size_t(perm[i])]);
  }
  const double tol = 1e-3;
  for (const KernelSpec& k : {KernelSpec::linear(), KernelSpec::rbf(0.7)}) {
    const auto m1 = svm::train_binary(b.x, b.y, k, {.tol = tol});
    const auto m2 = svm::train_binary(p.x, p.y, k, {.tol = tol, .seed = 77});
    int compared = 0;
    for (double gx = -3; gx <= 3; gx += 0.25) {
      for (double gy = -3; gy <= 3; gy += 0.25) {
        const double f1 = m1.decision(v2(gx, gy));
        const double f2 = m2.decision(v2(gx, gy));
        if (std::abs(f1) > 10 * tol && std::abs(f2) > 10 * tol) {
          EXPECT_EQ(f1 >= 0, f2 >= 0) << gx << "," << gy;
          ++compared;
        }
      }
    }
    EXPECT_GT(compared, 500);
  }
}

TEST(TrainBinary, IterationBudgetRaisesConvergenceError) {
  const Blobs b = blobs(7, 50, 1.5);
  try {
    svm::train_binary(b.x, b.y, KernelSpec::rbf(1.0), {.c = 100.0, .tol = 1e-9, .max_iter = 3});
    FAIL() << "expected ConvergenceError";
  } catch (const ConvergenceError& e) {
    EXPECT_EQ(e.kind(), ErrorKind::Convergence);
    EXPECT_GT(e.duality_gap, 0.0);
  }
}

TEST(Ovo, PairCountsAndOrder) {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> g(0.0, 0.3);
  for (int classes : {2, 3, 6}) {
    Matrix x(classes * 5, 2);
    std::vector<int> labels;
    for (int i = 0; i < classes * 5; ++i) {
      const int c = i % classes;
      x(i, 0) = 3.0 * c + g(rng);
      x(i, 1) = g(rng);
      labels.push_back(c);
    }
    const auto ens = svm::train_ovo(x, labels, KernelSpec::rbf(0.5));
    ASSERT_EQ(ens.members.size(), svm::OvoEnsemble::pair_count(classes));
    std::size_t k = 0;
    for (int a = 0; a < classes; ++a) {
      for (int b = a + 1; b < classes; ++b) {
        EXPECT_EQ(ens.members[k].first, a);
        EXPECT_EQ(ens.members[k].second, b);
        EXPECT_EQ(ens.members[k].train_count, 10);
        ++k;
      }
    }
    for (int i = 0; i < classes * 5; ++i) {
      EXPECT_EQ(svm::predict_ovo(ens, x.row(i).transpose()).label, labels[std::size_t(i)]);
    }
  }
  EXPECT_EQ(svm::OvoEnsemble::pair_count(6), 15u);
}

TEST(Ovo, ClassWithOneSampleIsNamed) {
  const Matrix x{{0, 0}, {0, 1}, {5, 5}, {9, 9}, {9, 8}};
  const std::vector<int> labels{0, 0, 1, 2, 2};
  try {
    svm::train_ovo(x, labels, KernelSpec::linear());
    FAIL() << "expected InvalidArgument";
  } catch (const InvalidArgument& e) {
    EXPECT_NE(std::string(e.what()).find("class 1"), std::string::npos);
  }
}

TEST(Vote, UnanimousClassGetsFiveVotes) {
  std::vector<std::pair<int, int>> pairs;
  std::vector<double> f;
  for (int a = 0; a < 6; ++a) {
    for (int b = a + 1; b < 6; ++b) {
      pairs.emplace_back(a, b);
      // Pairs with class 3 vote for 3; the rest vote for the smaller id.
      f.push_back(b == 3 ? -1.0 : 1.0);
    }
  }
  const auto p = svm::vote(6, pairs, f);
  EXPECT_EQ(p.label, 3);
  EXPECT_EQ(p.votes[3], 5);
}

TEST(Vote, CyclicTieGoesToLargestSummedDecision) {
  const std::vector<std::pair<int, int>> pairs{{0, 1}, {0, 2}, {1, 2}};
  // 0 beats 1, 2 beats 0, 1 beats 2: one vote each.
  // Summed |f|: class0 = 0.2 + 0.5, class1 = 0.2 + 0.9, class2 = 0.5 + 0.9.
  const auto p = svm::vote(3, pairs, std::vector<double>{0.2, -0.5, 0.9});
  EXPECT_EQ(p.votes, (std::vector<int>{1, 1, 1}));
  EXPECT_EQ(p.label, 2);
  const auto q = svm::vote(3, pairs, std::vector<double>{1.0, -1.0, 1.0});
  EXPECT_EQ(q.label, 0);
}

TEST(Vote, TwoClassFollowsSign) {
  const std::vector<std::pair<int, int>> pairs{{0, 1}};
  EXPECT_EQ(svm::vote(2, pairs, std::vector<double>{0.3}).label, 0);
  EXPECT_EQ(svm::vote(2, pairs, std::vector<double>{0.0}).label, 0);
  EXPECT_EQ(svm::vote(2, pairs, std::vector<double>{-0.3}).label, 1);
}
