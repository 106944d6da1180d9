#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "support.hpp"

using namespace abbo;

namespace {

struct Instance {
  std::shared_ptr<ModelResources> res;
  std::vector<Point> points;
  Eigen::VectorXd y;
};

Instance makeInstance(const std::string& method, std::size_t n, std::uint64_t seed) {
  Instance in;
  in.res = abbo::testing::syntheticResources();
  std::mt19937_64 rng(seed);
  Featurizer f(*findMethod(method), in.res);
  in.points = f(abbo::testing::randomVariants(in.res->parental, rng, n, 0, 4));
  std::normal_distribution<double> noise(0.0, 1.0);
  in.y.resize(static_cast<Eigen::Index>(n));
  for (auto& v : in.y) v = noise(rng);
  return in;
}

Dataset toDataset(const Instance& in) {
  Dataset d;
  for (std::size_t i = 0; i < in.points.size(); ++i) d.add(in.points[i], in.y[static_cast<Eigen::Index>(i)]);
  return d;
}

// Dense oracle: explicit inverse and log-determinant of K + noise I.
struct Dense {
  double lml;
  std::vector<Prediction> pred;
};

Dense denseOracle(GaussianProcess& gp, const Instance& in, const std::vector<Point>& queries) {
  const auto n = static_cast<Eigen::Index>(in.points.size());
  Eigen::MatrixXd k(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) k(i, j) = gp.kernel()(in.points[i], in.points[j]);
  k.diagonal().array() += gp.noise().value;
  const Eigen::FullPivLU<Eigen::MatrixXd> lu(k);
  const Eigen::MatrixXd kinv = lu.inverse();
  Eigen::VectorXd r(n);
  for (Eigen::Index i = 0; i < n; ++i) r[i] = in.y[i] - gp.mean()(in.points[i]);
  Dense d;
  d.lml = -0.5 * r.dot(kinv * r) - 0.5 * std::log(lu.determinant()) - 0.5 * n * std::log(2 * std::numbers::pi);
  for (const auto& q : queries) {
    Eigen::VectorXd kq(n);
    for (Eigen::Index i = 0; i < n; ++i) kq[i] = gp.kernel()(in.points[i], q);
    Prediction p;
    p.mean = gp.mean()(q) + kq.dot(kinv * r);
    p.std = std::sqrt(std::max(0.0, gp.kernel()(q, q) - kq.dot(kinv * kq)));
    d.pred.push_back(p);
  }
  return d;
}

}  // namespace

TEST(DatasetTest, RejectsDuplicatesAndNonFinite) {
  auto in = makeInstance("OneHot-T", 3, 1);
  Dataset d;
  d.add(in.points[0], 1.0);
  EXPECT_THROW(d.add(in.points[0], 2.0), InvalidArgument);
  EXPECT_THROW(d.add(in.points[1], std::nan("")), InvalidArgument);
  EXPECT_EQ(d.size(), 1u);
}

TEST(ZeroShot, Examples) {
  Eigen::MatrixXd table = Eigen::MatrixXd::Constant(2, 20, std::log(0.05));
  const Sequence parental("AC");
  EXPECT_EQ(zeroShotScore(table, MutationSet(parental, {})), 0.0);
  EXPECT_EQ(zeroShotScore(table, diff(parental, Sequence("WC"))), 0.0);
  table(0, residueIndex('A')) = std::log(0.5);
  table(0, residueIndex('W')) = std::log(0.1);
  table(1, residueIndex('C')) = std::log(0.2);
  table(1, residueIndex('D')) = std::log(0.4);
  const double expected = (std::log(0.1) - std::log(0.5)) + (std::log(0.4) - std::log(0.2));
  EXPECT_NEAR(zeroShotScore(table, diff(parental, Sequence("WD"))), expected, 1e-15);
  table(1, residueIndex('D')) = -std::numeric_limits<double>::infinity();
  std::size_t floored = 0;
  const double guarded = zeroShotScore(table, diff(parental, Sequence("AD")), &floored);
  EXPECT_EQ(floored, 1u);
  EXPECT_NEAR(guarded, std::log(1e-12) - std::log(0.2), 1e-12);
}

TEST(Likelihood, SinglePointAtItsMean) {
  auto in = makeInstance("OneHot-T", 1, 2);
  GaussianProcess gp(std::make_unique<TanimotoKernel>(Channel::kOneHot, 1.0), MeanKind::kConstant);
  gp.noise().value = 0.0;
  gp.mean().beta.value = 0.7;
  Dataset d;
  d.add(in.points[0], 0.7);
  gp.condition(d);
  EXPECT_NEAR(gp.logMarginalLikelihood(), -0.5 * std::log(2 * std::numbers::pi), 1e-15);
}

TEST(Likelihood, MatchesDenseOracleOnRandomInstances) {
  for (const std::string method : {"OneHot-T", "ESM-M", "IgFold-BLO-T", "Kermut-T"}) {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
      auto in = makeInstance(method, 3 + seed, 100 + seed);
      std::mt19937_64 rng(seed);
      auto gp = buildModel(*findMethod(method), *in.res, 0.05 + 0.1 * static_cast<double>(seed));
      abbo::testing::randomizeHyperparameters(gp.kernel(), rng);
      gp.mean().beta.value = 0.3;
      gp.mean().alpha.value = -0.2;
      gp.condition(toDataset(in));
      auto queries = makeInstance(method, 4, 900 + seed).points;
      queries.push_back(in.points[0]);
      const auto dense = denseOracle(gp, in, queries);
      EXPECT_NEAR(gp.logMarginalLikelihood(), dense.lml, 1e-8) << method;
      const auto pred = gp.predict(queries);
      for (std::size_t q = 0; q < queries.size(); ++q) {
        EXPECT_NEAR(pred[q].mean, dense.pred[q].mean, 1e-8) << method;
        EXPECT_NEAR(pred[q].std, dense.pred[q].std, 1e-8) << method;
      }
    }
  }
}

TEST(Likelihood, GradientMatchesCentralDifferences) {
  for (const std::string method : {"OneHot-T", "BLO-T", "ESM-M", "IgFold-M", "IgFold-ESM-M", "IgFold-BLO-T", "Kermut-T",
                                   "AbBoth-Kermut-BLO-T"}) {
    for (std::uint64_t seed = 0; seed < 3; ++seed) {
      auto in = makeInstance(method, 8, 300 + seed);
      std::mt19937_64 rng(seed + 7);
      auto gp = buildModel(*findMethod(method), *in.res, 0.2);
      abbo::testing::randomizeHyperparameters(gp.kernel(), rng);
      gp.mean().beta.value = 0.1;
      gp.mean().alpha.value = 0.4;
      const Dataset d = toDataset(in);
      gp.condition(d);
      const Eigen::VectorXd g = gp.logMarginalLikelihoodGradient();
      auto params = gp.trainableParameters();
      ASSERT_EQ(static_cast<std::size_t>(g.size()), params.size());
      for (std::size_t p = 0; p < params.size(); ++p) {
        const double raw = params[p]->raw(), h = 1e-5;
        params[p]->setRaw(raw + h);
        gp.condition(d);
        const double up = gp.logMarginalLikelihood();
        params[p]->setRaw(raw - h);
        gp.condition(d);
        const double down = gp.logMarginalLikelihood();
        params[p]->setRaw(raw);
        const double fd = (up - down) / (2 * h);
        const double rel = std::abs(fd - g[static_cast<Eigen::Index>(p)]) / std::max(1.0, std::abs(fd));
        EXPECT_LT(rel, 1e-4) << method << " " << params[p]->name;
      }
    }
  }
}

TEST(Predict, InterpolatesAtTrainingPointsWithTinyNoise) {
  auto in = makeInstance("OneHot-T", 6, 4);
  GaussianProcess gp(std::make_unique<TanimotoKernel>(Channel::kOneHot), MeanKind::kConstant, 1e-12);
  gp.condition(toDataset(in));
  for (std::size_t i = 0; i < in.points.size(); ++i) {
    const auto p = gp.predict(in.points[i]);
    EXPECT_LT(std::abs(p.mean - in.y[static_cast<Eigen::Index>(i)]), 1e-4);
    EXPECT_LT(p.std, 1e-4);
  }
}

TEST(Predict, RevertsToPriorFarFromData) {
  auto res = abbo::testing::syntheticResources();
  Dataset d;
  auto mk = [](double x) {
    Point p;
    p.sequence = Sequence("A");
    p.channels[static_cast<std::size_t>(Channel::kEmbedding)] = Eigen::VectorXd::Constant(1, x);
    return p;
  };
  Point a = mk(0.0), b = mk(0.5);
  b.sequence = Sequence("C");
  d.add(a, 1.0);
  d.add(b, 2.0);
  GaussianProcess gp(std::make_unique<Matern52Kernel>(Channel::kEmbedding, 1.0, 2.0), MeanKind::kConstant, 0.01);
  gp.mean().beta.value = -3.0;
  gp.condition(d);
  const auto p = gp.predict(mk(1e4));
  EXPECT_NEAR(p.mean, -3.0, 1e-12);
  EXPECT_NEAR(p.std, std::sqrt(2.0), 1e-12);
}

TEST(Predict, VarianceDoesNotIncreaseWhenQueryIsObserved) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    auto in = makeInstance("BLO-T", 9, 40 + seed);
    GaussianProcess gp(std::make_unique<TanimotoKernel>(Channel::kBlosum, 1.3), MeanKind::kConstant, 0.05);
    Dataset small;
    for (std::size_t i = 0; i + 1 < in.points.size(); ++i) small.add(in.points[i], in.y[static_cast<Eigen::Index>(i)]);
    gp.condition(small);
    const double before = gp.predict(in.points.back()).std;
    gp.condition(toDataset(in));
    EXPECT_LE(gp.predict(in.points.back()).std, before + 1e-12);
  }
}

TEST(Fit, ConstantTargetsRecoverTheConstant) {
  auto in = makeInstance("OneHot-T", 3, 8);
  in.y.setConstant(4.25);
  GaussianProcess proto(std::make_unique<TanimotoKernel>(Channel::kOneHot), MeanKind::kConstant);
  FitOptions opt;
  opt.restarts = 3;
  const auto gp = fit(proto, toDataset(in), opt);
  EXPECT_NEAR(gp.mean().beta.value, 4.25, 1e-6);
  auto far = makeInstance("OneHot-T", 2, 99).points;
  for (const auto& p : gp.predict(far)) {
    EXPECT_NEAR(p.mean, 4.25, 1e-3);
    // Nothing to explain: the fitted signal variance collapses toward its
    // lower bound, so the latent std stays near zero.
    EXPECT_LT(p.std, 0.05);
  }
}

TEST(Fit, MoreRestartsNeverLowerTheLikelihood) {
  for (std::uint64_t seed = 0; seed < 4; ++seed) {
    auto in = makeInstance("ESM-M", 12, 500 + seed);
    auto proto = buildModel(*findMethod("ESM-M"), *in.res);
    FitOptions one;
    one.restarts = 1;
    one.seed = seed;
    FitOptions five = one;
    five.restarts = 5;
    const Dataset d = toDataset(in);
    EXPECT_GE(fit(proto, d, five).logMarginalLikelihood(), fit(proto, d, one).logMarginalLikelihood() - 1e-12);
  }
}

TEST(Fit, DeterministicGivenSeed) {
  auto in = makeInstance("Kermut-T", 10, 17);
  auto proto = buildModel(*findMethod("Kermut-T"), *in.res);
  FitOptions opt;
  opt.restarts = 3;
  opt.seed = 42;
  const Dataset d = toDataset(in);
  std::ostringstream a, b;
  fit(proto, d, opt).writeHyperparameters(a);
  fit(proto, d, opt).writeHyperparameters(b);
  EXPECT_EQ(a.str(), b.str());
}

TEST(Fit, ShiftingTargetsShiftsMeanOnly) {
  auto in = makeInstance("OneHot-T", 10, 21);
  GaussianProcess gp(std::make_unique<TanimotoKernel>(Channel::kOneHot, 0.8), MeanKind::kConstant, 0.1);
  gp.condition(toDataset(in));
  gp.profileMean();
  const auto queries = makeInstance("OneHot-T", 5, 77).points;
  const auto before = gp.predict(queries);
  const double beta = gp.mean().beta.value;

  Instance shifted = in;
  shifted.y.array() += 3.5;
  gp.condition(toDataset(shifted));
  gp.profileMean();
  const auto after = gp.predict(queries);
  EXPECT_NEAR(gp.mean().beta.value, beta + 3.5, 1e-8);
  for (std::size_t q = 0; q < queries.size(); ++q) {
    EXPECT_NEAR(after[q].mean, before[q].mean + 3.5, 1e-8);
    EXPECT_NEAR(after[q].std, before[q].std, 1e-8);
  }

  // Same property through the full fitting procedure.
  FitOptions opt;
  opt.restarts = 2;
  const auto f1 = fit(GaussianProcess(std::make_unique<TanimotoKernel>(Channel::kOneHot), MeanKind::kConstant),
                      toDataset(in), opt);
  const auto f2 = fit(GaussianProcess(std::make_unique<TanimotoKernel>(Channel::kOneHot), MeanKind::kConstant),
                      toDataset(shifted), opt);
  EXPECT_NEAR(f2.mean().beta.value, f1.mean().beta.value + 3.5, 1e-6);
  const auto p1 = f1.predict(queries), p2 = f2.predict(queries);
  for (std::size_t q = 0; q < queries.size(); ++q) {
    EXPECT_NEAR(p2[q].mean, p1[q].mean + 3.5, 1e-6);
    EXPECT_NEAR(p2[q].std, p1[q].std, 1e-6);
  }
}

TEST(Fit, ProfiledMeanIsLikelihoodStationary) {
  auto in = makeInstance("Kermut-T", 12, 33);
  for (auto& p : in.points) p.zeroShot = 0.1 * static_cast<double>(p.mutations.size());
  auto gp = buildModel(*findMethod("Kermut-T"), *in.res);
  gp.condition(toDataset(in));
  gp.profileMean();
  const Eigen::VectorXd g = gp.logMarginalLikelihoodGradient();
  // beta and alpha are the last two entries.
  EXPECT_NEAR(g[g.size() - 2], 0.0, 1e-8);
  EXPECT_NEAR(g[g.size() - 1], 0.0, 1e-8);
}

TEST(Fit, RequiresTwoPoints) {
  auto in = makeInstance("OneHot-T", 1, 3);
  GaussianProcess proto(std::make_unique<TanimotoKernel>(Channel::kOneHot), MeanKind::kConstant);
  EXPECT_THROW(fit(proto, toDataset(in)), InvalidArgument);
}

TEST(Jitter, EscalatesOnSingularCovariance) {
  auto in = makeInstance("OneHot-T", 4, 5);
  Dataset d;
  for (std::size_t i = 0; i < 4; ++i) {
    Point p = in.points[0];
    p.sequence = in.points[i].sequence;  // identical features, distinct keys
    d.add(p, 1.0);
  }
  GaussianProcess gp(std::make_unique<TanimotoKernel>(Channel::kOneHot), MeanKind::kConstant);
  gp.noise().value = 0.0;
  gp.condition(d);
  EXPECT_GT(gp.jitter(), 0.0);
  EXPECT_LE(gp.jitter(), 1e-4 * 1.0 * (1 + 1e-9));
}
