#include <gtest/gtest.h>

#include <random>
#include <sstream>
#include <vector>

#include "sleepnet/readout.hpp"

using namespace sleepnet;

TEST(Rates, Examples) {
  std::vector<std::uint32_t> counts{0, 100, 10};
  const auto r = aggregate_rates(counts, 100.0);
  EXPECT_EQ(r[0], 0.0);
  EXPECT_DOUBLE_EQ(r[1], 1000.0);
  EXPECT_DOUBLE_EQ(r[2], 100.0);

  SpikeRaster raster(2, 100);
  for (std::size_t t = 0; t < 100; ++t) raster.set(1, t);
  const auto rr = aggregate_rates(raster, 1.0);
  EXPECT_EQ(rr[0], 0.0);
  EXPECT_DOUBLE_EQ(rr[1], 1000.0);
}

TEST(Standardize, Examples) {
  MatrixXd x(2, 2);
  x << 5, 0, 5, 2;
  const auto s = Standardizer::fit(x);
  const MatrixXd z = s.apply(x);
  EXPECT_EQ(z(0, 0), 0.0);
  EXPECT_EQ(z(1, 0), 0.0);
  EXPECT_DOUBLE_EQ(z(0, 1), -1.0);
  EXPECT_DOUBLE_EQ(z(1, 1), 1.0);
  EXPECT_EQ(s.apply(x), z);
  MatrixXd one(1, 2);
  one << 1, 2;
  EXPECT_THROW(Standardizer::fit(one), InputValidationError);
}

TEST(Pca, RankOneRecoversCoordinate) {
  MatrixXd x(20, 3);
  for (int i = 0; i < 20; ++i) x.row(i) << 0.0, i - 9.5, 0.0;
  const auto p = PCAState::fit(x);
  EXPECT_EQ(p.retained, 1);
  const MatrixXd y = p.apply(x);
  const double sign = y(0, 0) < 0 ? -1.0 : 1.0;
  for (int i = 0; i < 20; ++i) EXPECT_NEAR(sign * y(i, 0), -(i - 9.5), 1e-9);
}

TEST(Pca, IsotropicKeepsAllThree) {
  std::mt19937_64 rng(4);
  std::normal_distribution<double> n01;
  MatrixXd x(5000, 3);
  for (Eigen::Index i = 0; i < x.rows(); ++i)
    for (Eigen::Index j = 0; j < 3; ++j) x(i, j) = n01(rng);
  const auto p = PCAState::fit(x);
  EXPECT_EQ(p.retained, 3);
  for (int j = 0; j < 3; ++j) EXPECT_NEAR(p.explained_ratio[j], 1.0 / 3.0, 0.03);
}

TEST(Pca, RejectsNonFinite) {
  MatrixXd x = MatrixXd::Ones(3, 2);
  x(1, 1) = std::nan("");
  EXPECT_THROW(PCAState::fit(x), NumericError);
}

TEST(Mlr, SeparableClustersAreLearned) {
  MatrixXd x(40, 2);
  std::vector<int> y(40);
  for (int i = 0; i < 40; ++i) {
    y[i] = i % 2;
    x.row(i) << (y[i] ? 2.0 : -2.0) + 0.1 * (i % 5), 0.05 * (i % 7);
  }
  const auto m = mlr_train(x, y, 2, MLRConfig{});
  EXPECT_EQ(accuracy(m.predict(x), y), 1.0);
}

TEST(Mlr, SingleClass) {
  MatrixXd x = MatrixXd::Random(10, 3);
  std::vector<int> y(10, 0);
  const auto m = mlr_train(x, y, 1, MLRConfig{});
  for (int p : m.predict(x)) EXPECT_EQ(p, 0);
}

TEST(Mlr, ConvergesToToleranceAndSoftmaxSumsToOne) {
  MatrixXd x(5, 2);
  x << 0.1, 1.0, -0.5, 0.3, 1.2, -0.7, 0.0, 0.0, -1.0, 2.0;
  std::vector<int> y{0, 1, 2, 0, 1};
  MLRConfig cfg;
  cfg.l2 = 1e-2;
  cfg.max_iters = 20000;
  const auto m = mlr_train(x, y, 3, cfg);
  EXPECT_TRUE(m.converged);
  EXPECT_LE(m.grad_norm, 1e-5 * (1.0 + m.weights.norm()));

  const MatrixXd s = m.scores(x);
  for (Eigen::Index i = 0; i < s.rows(); ++i) {
    const Eigen::RowVectorXd e = (s.row(i).array() - s.row(i).maxCoeff()).exp();
    EXPECT_NEAR((e / e.sum()).sum(), 1.0, 1e-9);
  }
}

TEST(Mlr, TiesGoToLowestClass) {
  MLRModel m;
  m.weights = MatrixXd::Zero(2, 3);
  m.bias = Eigen::RowVectorXd::Zero(3);
  MatrixXd x = MatrixXd::Ones(2, 2);
  for (int p : m.predict(x)) EXPECT_EQ(p, 0);
}

TEST(Mlr, NotConvergedIsAFlagNotAnError) {
  MatrixXd x = MatrixXd::Random(30, 4);
  std::vector<int> y(30);
  for (int i = 0; i < 30; ++i) y[i] = i % 3;
  MLRConfig cfg;
  cfg.max_iters = 2;
  const auto m = mlr_train(x, y, 3, cfg);
  EXPECT_FALSE(m.converged);
  EXPECT_EQ(m.iterations, 2);
}

TEST(Accuracy, Examples) {
  std::vector<int> a{1, 2, 3, 4}, b{1, 2, 3, 4}, c{0, 0, 0, 0}, d{1, 2, 0, 0};
  EXPECT_EQ(accuracy(a, b), 1.0);
  EXPECT_EQ(accuracy(a, c), 0.0);
  EXPECT_EQ(accuracy(a, d), 0.5);
  std::vector<int> e{1};
  EXPECT_THROW(accuracy(a, e), InputShapeError);
}

TEST(Pipeline, TestFeaturesUseTrainState) {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> n01;
  MatrixXd train(60, 5), test(10, 5);
  std::vector<int> y(60);
  for (int i = 0; i < 60; ++i) {
    y[i] = i % 3;
    for (int j = 0; j < 5; ++j) train(i, j) = n01(rng) + 3.0 * (j == y[i]);
  }
  for (int i = 0; i < 10; ++i)
    for (int j = 0; j < 5; ++j) test(i, j) = 100.0 + n01(rng);
  const auto r = fit_readout(train, y, 3, ReadoutConfig{});
  const MatrixXd direct = r.pca.apply(r.standardizer.apply(test));
  EXPECT_EQ(r.transform(test), direct);
  EXPECT_GE(accuracy(r.predict(train), y), 0.9);
}

TEST(FeatureExport, Csv) {
  MatrixXd f(2, 2);
  f << 1, 2, 3, 4;
  std::vector<int> y{7, 8};
  std::ostringstream os;
  write_features_csv(os, f, y);
  EXPECT_EQ(os.str(), "sample_id,label,rate_1,rate_2\n0,7,1,2\n1,8,3,4\n");
}
