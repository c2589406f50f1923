#include "hbmi/errors.hpp"
#include "hbmi/synergies.hpp"
#include "support.hpp"

#include <gtest/gtest.h>

#include <limits>

using namespace hbmi;

namespace {

double objective(const Eigen::MatrixXd& a, const Eigen::VectorXd& x, const Eigen::VectorXd& b) {
  return (a * x - b).squaredNorm();
}

// Brute force over every passive set: least squares on the subset, keep the
// best feasible candidate.
Eigen::VectorXd nnls_by_enumeration(const Eigen::MatrixXd& a, const Eigen::VectorXd& b) {
  const Eigen::Index n = a.cols();
  Eigen::VectorXd best = Eigen::VectorXd::Zero(n);
  double best_obj = objective(a, best, b);
  for (unsigned mask = 1; mask < (1u << n); ++mask) {
    std::vector<Eigen::Index> cols;
    for (Eigen::Index j = 0; j < n; ++j)
      if (mask & (1u << j)) cols.push_back(j);
    Eigen::MatrixXd sub(a.rows(), static_cast<Eigen::Index>(cols.size()));
    for (std::size_t k = 0; k < cols.size(); ++k) sub.col(static_cast<Eigen::Index>(k)) = a.col(cols[k]);
    const Eigen::VectorXd z = sub.colPivHouseholderQr().solve(b);
    if ((z.array() < 0.0).any()) continue;
    Eigen::VectorXd x = Eigen::VectorXd::Zero(n);
    for (std::size_t k = 0; k < cols.size(); ++k) x[cols[k]] = z[static_cast<Eigen::Index>(k)];
    const double obj = objective(a, x, b);
    if (obj < best_obj) {
      best_obj = obj;
      best = x;
    }
  }
  return best;
}

double kkt_residual(const Eigen::MatrixXd& a, const Eigen::VectorXd& x, const Eigen::VectorXd& b) {
  const Eigen::VectorXd grad = a.transpose() * (a * x - b);
  double worst = 0.0;
  for (Eigen::Index j = 0; j < x.size(); ++j) {
    if (x[j] > 0.0) worst = std::max(worst, std::abs(grad[j]));
    else worst = std::max(worst, std::max(0.0, -grad[j]));
    if (x[j] < 0.0) worst = std::numeric_limits<double>::infinity();
  }
  return worst;
}

NmfOptions opts(int k, std::uint64_t seed, int iters = 500, double tol = 1e-6) {
  NmfOptions o;
  o.n_synergies = k;
  o.seed = seed;
  o.max_iter = iters;
  o.tol = tol;
  return o;
}

}  // namespace

TEST(NmfFit, RankOneExact) {
  std::mt19937_64 rng(21);
  const Eigen::VectorXd w = testkit::random_uniform(rng, 6, 1, 0.1, 1.0);
  const Eigen::RowVectorXd h = testkit::random_uniform(rng, 1, 50, 0.1, 2.0);
  const Eigen::MatrixXd v = w * h;
  const NmfFit fit = nmf_fit(v, opts(1, 3, 2000, 0.0));
  EXPECT_LT(fit.model.fit_stats.objective, 1e-10 * v.squaredNorm());
  EXPECT_NEAR(fit.model.base.col(0).norm(), 1.0, 1e-12);
}

TEST(NmfFit, NegativeEntryIsDomainError) {
  Eigen::MatrixXd v = Eigen::MatrixXd::Constant(6, 20, 1.0);
  v(2, 3) = -0.1;
  try {
    nmf_fit(v, opts(5, 1));
    FAIL() << "expected domain error";
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::Domain);
  }
}

TEST(NmfFit, TooFewSamplesIsInsufficientData) {
  const Eigen::MatrixXd v = Eigen::MatrixXd::Constant(6, 4, 1.0);
  try {
    nmf_fit(v, opts(5, 1));
    FAIL() << "expected insufficient data";
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::InsufficientData);
  }
}

TEST(NmfFit, NoiselessLowRankRecovery) {
  std::mt19937_64 rng(22);
  const Eigen::MatrixXd w0 = testkit::random_uniform(rng, 6, 5, 0.0, 1.0);
  const Eigen::MatrixXd h0 = testkit::random_uniform(rng, 5, 200, 0.0, 1.0);
  const Eigen::MatrixXd v = w0 * h0;
  const NmfFit fit = nmf_fit(v, opts(5, 4, 20000, 1e-12));
  const double rel = (v - fit.model.base * fit.activations).squaredNorm() / v.squaredNorm();
  EXPECT_LT(rel, 1e-4);
  EXPECT_NEAR(fit.model.fit_stats.objective / v.squaredNorm(), rel, 1e-9);
}

TEST(NmfFit, ObjectiveMonotoneAndBounded) {
  std::mt19937_64 rng(23);
  for (int rep = 0; rep < 5; ++rep) {
    const Eigen::MatrixXd v = testkit::random_uniform(rng, 6, 120, 0.0, 3.0);
    const NmfFit fit = nmf_fit(v, opts(5, static_cast<std::uint64_t>(rep) + 10));
    const auto& hist = fit.model.fit_stats.objective_history;
    ASSERT_FALSE(hist.empty());
    EXPECT_LE(hist.front(), fit.model.fit_stats.initial_objective + 1e-10);
    for (std::size_t i = 1; i < hist.size(); ++i) EXPECT_LE(hist[i], hist[i - 1] + 1e-10) << "iteration " << i;
    EXPECT_LE(std::sqrt(fit.model.fit_stats.objective), v.norm());
    EXPECT_EQ(fit.model.fit_stats.iterations, static_cast<int>(hist.size()));
  }
}

TEST(NmfFit, BaseColumnsUnitNormAndNonNegative) {
  std::mt19937_64 rng(24);
  const Eigen::MatrixXd v = testkit::random_uniform(rng, 6, 80, 0.0, 1.0);
  const NmfFit fit = nmf_fit(v, opts(5, 9));
  EXPECT_EQ(fit.model.n_synergies(), 5);
  EXPECT_EQ(fit.model.channels(), 6);
  EXPECT_GE(fit.model.base.minCoeff(), 0.0);
  EXPECT_GE(fit.activations.minCoeff(), 0.0);
  for (Eigen::Index j = 0; j < 5; ++j) EXPECT_NEAR(fit.model.base.col(j).norm(), 1.0, 1e-12);
}

TEST(NmfFit, BitDeterministicForFixedSeed) {
  std::mt19937_64 rng(25);
  const Eigen::MatrixXd v = testkit::random_uniform(rng, 6, 60, 0.0, 1.0);
  const NmfFit a = nmf_fit(v, opts(5, 77));
  const NmfFit b = nmf_fit(v, opts(5, 77));
  EXPECT_EQ(a.model.base, b.model.base);
  EXPECT_EQ(a.activations, b.activations);
  const NmfFit c = nmf_fit(v, opts(5, 78));
  EXPECT_NE(a.model.base, c.model.base);
}

TEST(Nnls, MatchesEnumerationOracle) {
  std::mt19937_64 rng(26);
  for (int rep = 0; rep < 200; ++rep) {
    const Eigen::MatrixXd a = testkit::random_matrix(rng, 6, 5);
    const Eigen::VectorXd b = testkit::random_matrix(rng, 6, 1);
    const Eigen::VectorXd x = nnls(a, b);
    const Eigen::VectorXd ref = nnls_by_enumeration(a, b);
    EXPECT_LT((x - ref).cwiseAbs().maxCoeff(), 1e-9) << "rep " << rep;
    EXPECT_LT(kkt_residual(a, x, b), 1e-8);
  }
}

TEST(Nnls, DimensionMismatchRejected) {
  EXPECT_THROW(nnls(Eigen::MatrixXd::Identity(3, 3), Eigen::VectorXd::Zero(4)), Error);
}

class Transform : public ::testing::Test {
protected:
  void SetUp() override {
    std::mt19937_64 rng(27);
    Eigen::MatrixXd w = testkit::random_uniform(rng, 6, 5, 0.0, 1.0);
    w += Eigen::MatrixXd::Identity(6, 5);  // well conditioned
    for (Eigen::Index j = 0; j < 5; ++j) w.col(j).normalize();
    model.base = w;
  }
  NmfModel model;
};

TEST_F(Transform, ColumnGivesUnitVector) {
  for (Eigen::Index j = 0; j < 5; ++j) {
    const Eigen::VectorXd h = nmf_transform(model, model.base.col(j));
    Eigen::VectorXd e = Eigen::VectorXd::Zero(5);
    e[j] = 1.0;
    EXPECT_LT((h - e).cwiseAbs().maxCoeff(), 1e-10);
  }
}

TEST_F(Transform, ZeroInputGivesZero) {
  const Eigen::VectorXd h = nmf_transform(model, Eigen::VectorXd::Zero(6));
  EXPECT_EQ(h, Eigen::VectorXd::Zero(5));
}

TEST_F(Transform, RecoversKnownActivations) {
  Eigen::VectorXd h0(5);
  h0 << 0.3, 0, 1.2, 0, 0.5;
  const Eigen::VectorXd h = nmf_transform(model, model.base * h0);
  EXPECT_LT((h - h0).cwiseAbs().maxCoeff(), 1e-6);
}

TEST_F(Transform, KktOnRandomInputs) {
  std::mt19937_64 rng(28);
  for (int rep = 0; rep < 100; ++rep) {
    const Eigen::VectorXd r = testkit::random_uniform(rng, 6, 1, 0.0, 2.0);
    const Eigen::VectorXd h = nmf_transform(model, r);
    EXPECT_GE(h.minCoeff(), 0.0);
    EXPECT_LT(kkt_residual(model.base, h, r), 1e-8);
  }
}

TEST_F(Transform, RejectsNegativeOrMismatchedInput) {
  Eigen::VectorXd r = Eigen::VectorXd::Constant(6, 1.0);
  r[0] = -1.0;
  EXPECT_THROW(nmf_transform(model, r), Error);
  EXPECT_THROW(nmf_transform(model, Eigen::VectorXd::Constant(4, 1.0)), Error);
}
