#include <gtest/gtest.h>

#include <random>

#include "../support/oracles.hpp"
#include "mcomp/admira.hpp"
#include "mcomp/datagen.hpp"
#include "mcomp/metrics.hpp"
#include "mcomp/spectral.hpp"

using namespace mcomp;

namespace {

SparseObservations full(const DenseMatrix& a) {
  std::vector<Observation> obs;
  for (int i = 0; i < a.rows(); ++i)
    for (int j = 0; j < a.cols(); ++j) obs.push_back({i, j, a(i, j)});
  return SparseObservations(static_cast<int>(a.rows()), static_cast<int>(a.cols()), obs);
}

AtomSet unit_atoms(int m, int n, int k, std::mt19937_64& rng) {
  AtomSet a;
  a.left = oracle::gaussian(m, k, rng).colwise().normalized();
  a.right = oracle::gaussian(n, k, rng).colwise().normalized();
  return a;
}

}  // namespace

TEST(AtomLeastSquares, SingleTrueAtomRecoversSingularValue) {
  std::mt19937_64 rng(1);
  AtomSet a = unit_atoms(6, 5, 1, rng);
  const DenseMatrix m = 3.5 * a.left * a.right.transpose();
  const auto obs = oracle::random_observations(m, 0.6, rng);
  EXPECT_NEAR(atom_least_squares(a, obs)(0), 3.5, 1e-10);
}

TEST(AtomLeastSquares, OrthogonalAtomsFullObservationGiveInnerProducts) {
  std::mt19937_64 rng(2);
  AtomSet a;
  a.left = oracle::orthonormal(7, 3, rng);
  a.right = oracle::orthonormal(6, 3, rng);
  const DenseMatrix n = oracle::gaussian(7, 6, rng);
  const Vector w = atom_least_squares(a, full(n));
  for (int k = 0; k < 3; ++k) EXPECT_NEAR(w(k), a.left.col(k).dot(n * a.right.col(k)), 1e-10);
}

TEST(AtomLeastSquares, MatchesDenseNormalEquations) {
  std::mt19937_64 rng(3);
  AtomSet a = unit_atoms(8, 8, 3, rng);
  const DenseMatrix n = oracle::gaussian(8, 8, rng);
  std::vector<int> cells(64);
  std::iota(cells.begin(), cells.end(), 0);
  std::shuffle(cells.begin(), cells.end(), rng);
  std::vector<Observation> picked;
  for (int k = 0; k < 30; ++k) picked.push_back({cells[k] / 8, cells[k] % 8, n(cells[k] / 8, cells[k] % 8)});
  const SparseObservations obs(8, 8, picked);

  DenseMatrix gram = DenseMatrix::Zero(3, 3);
  Vector rhs = Vector::Zero(3);
  for (const auto& o : obs.entries())
    for (int p = 0; p < 3; ++p) {
      const double ap = a.left(o.row, p) * a.right(o.col, p);
      rhs(p) += ap * o.value;
      for (int q = 0; q < 3; ++q) gram(p, q) += ap * a.left(o.row, q) * a.right(o.col, q);
    }
  const Vector ref = gram.ldlt().solve(rhs);
  const Vector w = atom_least_squares(a, obs);
  for (int k = 0; k < 3; ++k) EXPECT_NEAR(w(k), ref(k), 1e-8);
}

TEST(AtomLeastSquares, DependentAtomsGetMinimumNorm) {
  std::mt19937_64 rng(4);
  AtomSet a = unit_atoms(5, 5, 1, rng);
  a.left.conservativeResize(Eigen::NoChange, 2);
  a.right.conservativeResize(Eigen::NoChange, 2);
  a.left.col(1) = a.left.col(0);
  a.right.col(1) = a.right.col(0);
  const DenseMatrix m = 2.0 * a.left.col(0) * a.right.col(0).transpose();
  const Vector w = atom_least_squares(a, full(m));
  EXPECT_NEAR(w(0), 1.0, 1e-9);
  EXPECT_NEAR(w(1), 1.0, 1e-9);
}

TEST(Admira, FullObservationExactInOneIteration) {
  const auto t = gen_gaussian_lowrank(30, 20, 3, 5);
  AdmiraConfig cfg;
  cfg.rank = 3;
  const auto res = admira_solve(full(t.matrix), cfg);
  EXPECT_EQ(res.iterations, 1);
  EXPECT_LE(rmse(t.matrix, res.estimate), 1e-10);
}

TEST(Admira, FullObservationEqualsTruncatedSvd) {
  std::mt19937_64 rng(6);
  const DenseMatrix n = oracle::gaussian(25, 18, rng);
  AdmiraConfig cfg;
  cfg.rank = 3;
  const auto res = admira_solve(full(n), cfg);
  Eigen::JacobiSVD<DenseMatrix> svd(n, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const DenseMatrix best = svd.matrixU().leftCols(3) * svd.singularValues().head(3).asDiagonal() *
                           svd.matrixV().leftCols(3).transpose();
  EXPECT_LE((factored_to_dense(res.estimate) - best).norm(), 1e-8);
}

TEST(Admira, ZeroDataGivesZeroEstimate) {
  AdmiraConfig cfg;
  cfg.rank = 2;
  const auto res = admira_solve(full(DenseMatrix::Zero(6, 5)), cfg);
  EXPECT_EQ(factored_to_dense(res.estimate).norm(), 0.0);
  EXPECT_EQ(res.objective_trace.back(), 0.0);
}

TEST(Admira, ResidualNonincreasingAndRankBounded) {
  InstanceSpec spec;
  spec.m = spec.n = 150;
  spec.r = 3;
  spec.epsilon = 40;
  spec.noise = NoiseSpec::make(NoiseKind::standard_gaussian, 4.0);
  const auto inst = make_instance(spec, 7);
  AdmiraConfig cfg;
  cfg.rank = 3;
  const auto res = admira_solve(inst.observations, cfg);
  for (std::size_t k = 1; k < res.objective_trace.size(); ++k)
    EXPECT_LE(res.objective_trace[k], res.objective_trace[k - 1]);
  EXPECT_LE(res.estimate.rank(), 3);
  const auto& f = res.estimate;
  EXPECT_LE((f.left().transpose() * f.left() - DenseMatrix::Identity(f.rank(), f.rank())).norm(), 1e-8);
}

TEST(Admira, FullObservationNoisyMatchesProjection) {
  InstanceSpec spec;
  spec.epsilon = 500;
  spec.noise = NoiseSpec::make(NoiseKind::standard_gaussian, 4.0);
  const auto inst = make_instance(spec, 8);
  AdmiraConfig cfg;
  cfg.rank = 4;
  const double adm = rmse(inst.truth, admira_solve(inst.observations, cfg).estimate);
  const double proj = rmse(inst.truth, rank_r_projection(inst.observations, 4));
  EXPECT_LE(std::abs(adm - proj), 0.05 * proj);
}

TEST(Admira, Errors) {
  AdmiraConfig cfg;
  EXPECT_THROW(admira_solve(SparseObservations(3, 3, {}), cfg), InvalidArgument);
  cfg.rank = 4;
  EXPECT_THROW(admira_solve(full(DenseMatrix::Ones(3, 3)), cfg), InvalidArgument);
  cfg.rank = 0;
  EXPECT_THROW(admira_solve(full(DenseMatrix::Ones(3, 3)), cfg), InvalidArgument);
}
