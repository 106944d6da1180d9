#pragma once

// Shared fixtures for the test binaries: synthetic resources around a short
// parental and random variant generators.

#include <functional>
#include <memory>
#include <numeric>
#include <random>
#include <string>
#include <unordered_set>
#include <vector>

#include "abbo/abbo.hpp"

namespace abbo::testing {

inline const std::string kParental = "EVQLVESGGGLVQPGGSLRLSCAASGFTFS";

inline std::shared_ptr<ModelResources> syntheticResources(const std::string& parental = kParental,
                                                          std::uint64_t seed = 5) {
  auto res = std::make_shared<ModelResources>();
  res->parental = Sequence(parental);
  res->blosum = std::make_shared<const EncodingMatrix>(EncodingMatrix::blosum62());
  auto provider = std::make_shared<const SyntheticFeatureProvider>(res->parental, seed, *res->blosum);
  res->features = provider;
  res->generalContext = std::make_shared<const StructureContext>(provider->getStructureContext(ContextFlavor::kGeneral));
  res->antibodyContext = std::make_shared<const StructureContext>(provider->getStructureContext(ContextFlavor::kAntibody));
  res->generalLogProbs = std::make_shared<const Eigen::MatrixXd>(
      similaritySiteProbs(res->parental, *res->blosum, 2.0).array().log().matrix());
  res->antibodyLogProbs = std::make_shared<const Eigen::MatrixXd>(
      PssmLikelihood::parentalConcentrated(res->parental, *res->blosum, 0.5, 1.5).probabilities().array().log().matrix());
  return res;
}

/// Random variant with between minSites and maxSites substitutions.
inline Sequence randomVariant(const Sequence& parental, std::mt19937_64& rng, std::size_t minSites,
                              std::size_t maxSites) {
  std::uniform_int_distribution<std::size_t> count(minSites, maxSites);
  std::vector<std::size_t> pos(parental.size());
  std::iota(pos.begin(), pos.end(), 0);
  std::shuffle(pos.begin(), pos.end(), rng);
  std::string s = parental.str();
  const std::size_t k = count(rng);
  for (std::size_t m = 0; m < k; ++m) {
    char c;
    do c = kAlphabet[rng() % kAlphabetSize]; while (c == s[pos[m]]);
    s[pos[m]] = c;
  }
  return Sequence(std::move(s));
}

/// n distinct variants (may include the parental when minSites is 0).
inline std::vector<Sequence> randomVariants(const Sequence& parental, std::mt19937_64& rng, std::size_t n,
                                            std::size_t minSites, std::size_t maxSites) {
  std::vector<Sequence> out;
  std::unordered_set<Sequence, SequenceHash> seen;
  while (out.size() < n) {
    Sequence s = randomVariant(parental, rng, minSites, maxSites);
    if (seen.insert(s).second) out.push_back(std::move(s));
  }
  return out;
}

/// Minimum eigenvalue of a symmetric matrix.
inline double minEigenvalue(const Eigen::MatrixXd& k) {
  return Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(k, Eigen::EigenvaluesOnly).eigenvalues().minCoeff();
}

/// Moves every free hyperparameter to a random value in a sane sub-box of its
/// bounds.
inline void randomizeHyperparameters(Kernel& k, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (auto* p : k.parameters()) {
    if (p->fixed) continue;
    switch (p->transform) {
      case Transform::kLog: p->value = std::exp(std::log(0.05) + u(rng) * (std::log(20.0) - std::log(0.05))); break;
      case Transform::kLogit: p->value = 0.05 + 0.9 * u(rng); break;
      case Transform::kIdentity: p->value = -1.0 + 2.0 * u(rng); break;
    }
  }
}

}  // namespace abbo::testing

namespace abbo::testing {

/// Calls fn(z) for every point of the simplex over `vars` coordinates of a
/// length-`dim` vector whose entries are multiples of 1/steps.
template <class Fn>
void forEachGridPoint(std::size_t dim, const std::vector<std::size_t>& vars, int steps, Fn&& fn) {
  Eigen::VectorXd z = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(dim));
  std::function<void(std::size_t, int)> rec = [&](std::size_t k, int left) {
    const auto idx = static_cast<Eigen::Index>(vars[k]);
    if (k + 1 == vars.size()) {
      z[idx] = static_cast<double>(left) / steps;
      fn(z);
      z[idx] = 0.0;
      return;
    }
    for (int c = 0; c <= left; ++c) {
      z[idx] = static_cast<double>(c) / steps;
      rec(k + 1, left - c);
    }
    z[idx] = 0.0;
  };
  rec(0, steps);
}

/// Best Sharpe ratio over the 0.02 simplex grid. The full grid is enumerated
/// for l <= 5; above that, every face spanned by at most three candidates is
/// enumerated instead, since the full grid is combinatorially out of reach.
inline double gridBestSharpe(const Eigen::VectorXd& r, const Eigen::MatrixXd& q, int steps = 50) {
  const auto l = static_cast<std::size_t>(r.size());
  double best = 0.0;
  auto visit = [&](const Eigen::VectorXd& z) { best = std::max(best, sharpeRatio(z, r, q)); };
  if (l <= 5) {
    std::vector<std::size_t> all(l);
    std::iota(all.begin(), all.end(), 0);
    forEachGridPoint(l, all, steps, visit);
    return best;
  }
  for (std::size_t a = 0; a < l; ++a)
    for (std::size_t b = a + 1; b < l; ++b)
      for (std::size_t c = b + 1; c < l; ++c) forEachGridPoint(l, {a, b, c}, steps, visit);
  return best;
}

/// KKT residual of y = z / (r'z) for min y'Qy s.t. r'y = 1, y >= 0: the
/// largest violation of stationarity on the support and dual feasibility off
/// it, relative to the gradient scale.
inline double sharpeKktResidual(const Eigen::VectorXd& z, const Eigen::VectorXd& r, const Eigen::MatrixXd& q,
                                double support = 1e-9) {
  const Eigen::VectorXd y = z / r.dot(z);
  const Eigen::VectorXd g = 2.0 * (q * y);
  // On the support g_i = lambda r_i; elsewhere g_i >= lambda r_i.
  double num = 0.0, den = 0.0;
  for (Eigen::Index i = 0; i < z.size(); ++i)
    if (z[i] > support) {
      num += g[i] * r[i];
      den += r[i] * r[i];
    }
  const double lambda = num / den;
  double worst = 0.0;
  for (Eigen::Index i = 0; i < z.size(); ++i) {
    const double slack = g[i] - lambda * r[i];
    worst = std::max(worst, z[i] > support ? std::abs(slack) : std::max(0.0, -slack));
  }
  return worst / std::max(g.cwiseAbs().maxCoeff(), 1e-300);
}

/// Random candidate set of size l with (mean, std) in a plausible range.
inline PortfolioProblem randomPortfolioProblem(std::size_t l, std::mt19937_64& rng) {
  std::normal_distribution<double> mean(0.0, 1.0);
  std::uniform_real_distribution<double> sd(0.05, 1.5);
  std::vector<double> m(l), s(l);
  for (std::size_t i = 0; i < l; ++i) {
    m[i] = mean(rng);
    s[i] = sd(rng);
  }
  return PortfolioProblem::make(m, s);
}

}  // namespace abbo::testing
