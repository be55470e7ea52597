#include <gtest/gtest.h>

#include <random>

#include "../support/oracles.hpp"
#include "mcomp/datagen.hpp"
#include "mcomp/metrics.hpp"

using namespace mcomp;

TEST(Rmse, Examples) {
  const DenseMatrix ones = DenseMatrix::Ones(2, 2);
  EXPECT_EQ(rmse(ones, ones), 0.0);
  EXPECT_DOUBLE_EQ(rmse(ones, DenseMatrix::Zero(2, 2)), 1.0);
  EXPECT_THROW(rmse(ones, DenseMatrix::Zero(2, 3)), InvalidArgument);
}

TEST(Rmse, MatchesEntrywiseLoopAndFrobeniusIdentity) {
  std::mt19937_64 rng(1);
  const DenseMatrix a = oracle::gaussian(6, 9, rng);
  const DenseMatrix b = oracle::gaussian(6, 9, rng);
  double sum = 0;
  for (int i = 0; i < 6; ++i)
    for (int j = 0; j < 9; ++j) sum += (a(i, j) - b(i, j)) * (a(i, j) - b(i, j));
  EXPECT_NEAR(rmse(a, b), std::sqrt(sum / 54.0), 1e-12);
  EXPECT_EQ(rmse(a, b), frobenius_norm(DenseMatrix(a - b)) / std::sqrt(54.0));
}

TEST(Rmse, FactoredEstimate) {
  const auto t = gen_gaussian_lowrank(10, 8, 2, 3);
  EXPECT_LE(rmse(t.matrix, t.factors), 1e-12);
}

TEST(MaeNmae, Examples) {
  const SparseObservations test(2, 2, {{0, 0, 3.0}, {1, 1, -2.0}});
  DenseMatrix est = DenseMatrix::Zero(2, 2);
  est(0, 0) = 3.0;
  est(1, 1) = -2.0;
  const auto perfect = mae_nmae(test, est, 10, -10);
  EXPECT_EQ(perfect.mae, 0.0);
  EXPECT_EQ(perfect.nmae, 0.0);

  est(0, 0) = 3.0 + 3.54;
  est(1, 1) = -2.0 - 3.54;
  const auto r = mae_nmae(test, est, 10, -10);
  EXPECT_NEAR(r.mae, 3.54, 1e-12);
  EXPECT_NEAR(r.nmae, 0.177, 1e-12);
}

TEST(MaeNmae, ClipsUnlessDisabled) {
  const SparseObservations test(1, 2, {{0, 0, 5.0}, {0, 1, 1.0}});
  DenseMatrix est(1, 2);
  est << 9.0, -3.0;
  EXPECT_DOUBLE_EQ(mae_nmae(test, est, 5, 1).mae, 0.0);
  EXPECT_DOUBLE_EQ(mae_nmae(test, est, 5, 1, false).mae, 4.0);
}

TEST(MaeNmae, Errors) {
  const SparseObservations empty(2, 2, {});
  EXPECT_THROW(mae_nmae(empty, DenseMatrix::Zero(2, 2), 5, 1), InvalidArgument);
  const SparseObservations one(2, 2, {{0, 0, 1.0}});
  EXPECT_THROW(mae_nmae(one, DenseMatrix::Zero(2, 2), 1, 5), InvalidArgument);
  EXPECT_THROW(mae_nmae(one, DenseMatrix::Zero(3, 2), 5, 1), InvalidArgument);
}

TEST(MaeNmae, AffineInvariance) {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(1.0, 5.0);
  std::vector<Observation> t, ts;
  DenseMatrix est(4, 5), est_s(4, 5);
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 5; ++j) {
      est(i, j) = u(rng) * 1.2 - 0.5;
      est_s(i, j) = 3.0 * est(i, j) + 7.0;
      if ((i + j) % 2) {
        const double v = u(rng);
        t.push_back({i, j, v});
        ts.push_back({i, j, 3.0 * v + 7.0});
      }
    }
  const auto a = mae_nmae(SparseObservations(4, 5, t), est, 5, 1);
  const auto b = mae_nmae(SparseObservations(4, 5, ts), est_s, 22, 10);
  EXPECT_NEAR(a.nmae, b.nmae, 1e-12);
}

TEST(MaeNmae, FactoredMatchesDense) {
  const auto t = gen_gaussian_lowrank(10, 8, 2, 4);
  const SparseObservations test(10, 8, {{0, 0, 0.5}, {3, 7, -1.0}, {9, 2, 2.0}});
  const auto a = mae_nmae(test, t.matrix, 3, -3);
  const auto b = mae_nmae(test, t.factors, 3, -3);
  EXPECT_NEAR(a.mae, b.mae, 1e-12);
}

TEST(OracleRmse, Examples) {
  EXPECT_EQ(oracle_rmse(0.0, 500, 4, 40), 0.0);
  EXPECT_NEAR(oracle_rmse(1.0, 500, 4, 40), std::sqrt(3984.0 / 20000.0), 1e-15);
  EXPECT_NEAR(oracle_rmse(1.0, 500, 4, 40), 0.44632, 5e-6);
  EXPECT_NEAR(oracle_rmse(1.0, 500, 4, 40) / oracle_rmse(1.0, 500, 4, 160), 2.0, 1e-12);
}

TEST(OracleEstimate, NoiselessExact) {
  InstanceSpec spec;
  spec.m = spec.n = 60;
  spec.r = 3;
  spec.epsilon = 15;
  const auto inst = make_instance(spec, 5);
  const auto fit = oracle_fit(inst.observations, inst.factors.left(), inst.factors.right());
  EXPECT_TRUE(fit.converged);
  EXPECT_LE((fit.estimate - inst.truth).norm() / inst.truth.norm(), 1e-8);
}

TEST(OracleEstimate, FullObservationTracksClosedForm) {
  InstanceSpec spec;
  spec.epsilon = 500;
  spec.noise = NoiseSpec::make(NoiseKind::standard_gaussian, 4.0);
  const auto inst = make_instance(spec, 6);
  const DenseMatrix est = oracle_estimate(inst.observations, inst.factors.left(), inst.factors.right());
  EXPECT_NEAR(rmse(inst.truth, est) / oracle_rmse(1.0, 500, 4, 500), 1.0, 0.10);
}

TEST(OracleEstimate, EmptyObservationsError) {
  EXPECT_THROW(oracle_estimate(SparseObservations(4, 4, {}), DenseMatrix::Identity(4, 1),
                               DenseMatrix::Identity(4, 1)),
               InvalidArgument);
}

TEST(BoundConvex, Examples) {
  EXPECT_EQ(bound_convex_relaxation(0.0, 500, 1.0, 20000), 0.0);
  const double z = std::sqrt(20000.0);
  const double want = 7 * std::sqrt(500.0 / 20000.0) * z + 2.0 / 500.0 * z;
  EXPECT_NEAR(bound_convex_relaxation(z, 500, 1.0, 20000), want, 1e-12);
  EXPECT_NEAR(bound_convex_relaxation(z, 500, 1.0, 20000), 157.1, 0.05);
  EXPECT_GT(bound_convex_relaxation_terms(2 * z, 500, 1.0, 20000).noise,
            bound_convex_relaxation_terms(z, 500, 1.0, 20000).noise);
}

TEST(BoundOptSpace, Examples) {
  EXPECT_EQ(bound_optspace(0.0, 500, 1.0, 4, 1.0, 20000), 0.0);
  const double z = std::sqrt(20000.0 / 500.0);
  EXPECT_NEAR(bound_optspace(z, 500, 1.0, 4, 1.0, 20000), 2.0 * 500.0 / 20000.0 * z, 1e-12);
  EXPECT_NEAR(bound_optspace(z, 500, 1.0, 4, 1.0, 20000), 0.316, 5e-4);
  EXPECT_NEAR(bound_optspace(z, 500, 1.0, 4, 3.0, 20000) / bound_optspace(z, 500, 1.0, 4, 1.0, 20000), 9.0,
              1e-12);
}

TEST(Bounds, LogLogSlopes) {
  std::vector<double> e, opt, conv;
  for (double s = 1000; s < 300000; s *= 1.7) {
    e.push_back(s);
    opt.push_back(bound_optspace(5.0, 500, 1.0, 4, 2.0, s));
    conv.push_back(bound_convex_relaxation_terms(50.0, 500, 1.0, s).sampling);
  }
  EXPECT_NEAR(oracle::loglog_slope(e, opt), -1.0, 1e-6);
  EXPECT_NEAR(oracle::loglog_slope(e, conv), -0.5, 1e-6);
}
