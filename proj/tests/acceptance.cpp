// Acceptance checks: one PASS/FAIL line per criterion, nonzero exit if any
// criterion fails. The campaign checks use configs/campaign.yaml.

#include <Eigen/Geometry>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <limits>
#include <numbers>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "support.hpp"

using namespace abbo;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

double secondsSince(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(4);
  os << v;
  return os.str();
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

// ---------------------------------------------------------------- portfolio

Outcome portfolioCriterion() {
  std::mt19937_64 rng(2024);
  std::size_t formulaMismatches = 0, gridFailures = 0;
  double worstGap = 0.0, solverSeconds = 0.0;
  const auto t0 = Clock::now();
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t l = 1 + rng() % 20;
    const auto prob = abbo::testing::randomPortfolioProblem(l, rng);
    const auto ts = Clock::now();
    const Portfolio pf = buildPortfolio(prob);
    const auto sol = solveSharpe(pf.r, pf.q);
    solverSeconds += secondsSince(ts);

    const double norm = (prob.best[0] - prob.reference[0]) * (prob.best[1] - prob.reference[1]);
    for (std::size_t i = 0; i < l; ++i)
      for (std::size_t j = 0; j < l; ++j) {
        const auto& a = prob.candidates[i];
        const auto& b = prob.candidates[j];
        const auto ii = static_cast<Eigen::Index>(i), jj = static_cast<Eigen::Index>(j);
        const double p = (std::min(a[0], b[0]) - prob.reference[0]) * (std::min(a[1], b[1]) - prob.reference[1]) / norm;
        formulaMismatches += pf.p(ii, jj) != p;
        formulaMismatches += pf.q(ii, jj) != pf.p(ii, jj) - pf.p(ii, ii) * pf.p(jj, jj);
        if (i == j) formulaMismatches += pf.r[ii] != pf.p(ii, ii);
      }

    const double grid = abbo::testing::gridBestSharpe(pf.r, pf.q);
    if (std::isinf(grid)) {
      gridFailures += !std::isinf(sol.ratio);
      continue;
    }
    const double ratio = sharpeRatio(sol.z, pf.r, pf.q);
    const double gap = (grid - ratio) / grid;
    worstGap = std::max(worstGap, gap);
    gridFailures += gap > 1e-6;
  }
  const double total = secondsSince(t0);
  Outcome o;
  o.pass = formulaMismatches == 0 && gridFailures == 0 && total < 5.0;
  o.detail = "50 sets, formula mismatches " + std::to_string(formulaMismatches) + ", grid shortfalls " +
             std::to_string(gridFailures) + " (worst relative gap " + fmt(worstGap) + "), solver " + fmt(solverSeconds) +
             " s, total with grid " + fmt(total) + " s";
  return o;
}

// ------------------------------------------------------------------------ gp

struct GpInstance {
  std::vector<Point> points;
  Dataset data;
};

GpInstance gpInstance(const MethodSpec& m, const std::shared_ptr<ModelResources>& res, std::size_t n,
                      std::mt19937_64& rng) {
  GpInstance in;
  Featurizer f(m, res);
  in.points = f(abbo::testing::randomVariants(res->parental, rng, n, 0, 4));
  std::normal_distribution<double> y(0.0, 1.0);
  for (const auto& p : in.points) in.data.add(p, y(rng));
  return in;
}

Outcome gpCriterion() {
  auto res = abbo::testing::syntheticResources();
  std::vector<MethodSpec> methods;
  for (const auto& m : methodRegistry())
    if (!m.random && !m.constrained) methods.push_back(m);

  std::mt19937_64 rng(99);
  double worstValue = 0.0, worstGrad = 0.0;
  std::size_t gradientsChecked = 0;
  for (int trial = 0; trial < 20; ++trial) {
    const MethodSpec& m = methods[static_cast<std::size_t>(trial) % methods.size()];
    const std::size_t n = 2 + static_cast<std::size_t>(trial) % 9;
    const auto in = gpInstance(m, res, n, rng);
    auto gp = buildModel(m, *res, 0.05 + 0.01 * trial);
    abbo::testing::randomizeHyperparameters(gp.kernel(), rng);
    gp.mean().beta.value = 0.25;
    gp.mean().alpha.value = -0.3;
    gp.condition(in.data);

    // Naive oracle: explicit inverse of K + noise I.
    const auto nn = static_cast<Eigen::Index>(n);
    Eigen::MatrixXd k(nn, nn);
    for (Eigen::Index i = 0; i < nn; ++i)
      for (Eigen::Index j = 0; j < nn; ++j) k(i, j) = gp.kernel()(in.points[i], in.points[j]);
    k.diagonal().array() += gp.noise().value;
    const Eigen::FullPivLU<Eigen::MatrixXd> lu(k);
    const Eigen::MatrixXd kinv = lu.inverse();
    Eigen::VectorXd resid(nn);
    for (Eigen::Index i = 0; i < nn; ++i) resid[i] = in.data.target(static_cast<std::size_t>(i)) - gp.mean()(in.points[i]);
    const double lml = -0.5 * resid.dot(kinv * resid) - 0.5 * std::log(lu.determinant()) -
                       0.5 * static_cast<double>(n) * std::log(2 * std::numbers::pi);
    worstValue = std::max(worstValue, std::abs(lml - gp.logMarginalLikelihood()));

    auto queries = gpInstance(m, res, 4, rng).points;
    queries.push_back(in.points[0]);
    const auto pred = gp.predict(queries);
    for (std::size_t q = 0; q < queries.size(); ++q) {
      Eigen::VectorXd kq(nn);
      for (Eigen::Index i = 0; i < nn; ++i) kq[i] = gp.kernel()(in.points[i], queries[q]);
      const double mean = gp.mean()(queries[q]) + kq.dot(kinv * resid);
      const double sd = std::sqrt(std::max(0.0, gp.kernel()(queries[q], queries[q]) - kq.dot(kinv * kq)));
      worstValue = std::max({worstValue, std::abs(mean - pred[q].mean), std::abs(sd - pred[q].std)});
    }

    const Eigen::VectorXd g = gp.logMarginalLikelihoodGradient();
    auto params = gp.trainableParameters();
    for (std::size_t p = 0; p < params.size(); ++p) {
      const double raw = params[p]->raw(), h = 1e-5;
      params[p]->setRaw(raw + h);
      gp.condition(in.data);
      const double up = gp.logMarginalLikelihood();
      params[p]->setRaw(raw - h);
      gp.condition(in.data);
      const double down = gp.logMarginalLikelihood();
      params[p]->setRaw(raw);
      const double fd = (up - down) / (2 * h);
      worstGrad = std::max(worstGrad, std::abs(fd - g[static_cast<Eigen::Index>(p)]) / std::max(1.0, std::abs(fd)));
      ++gradientsChecked;
    }
  }
  Outcome o;
  o.pass = worstValue <= 1e-8 && worstGrad <= 1e-4;
  o.detail = "20 datasets, worst posterior/likelihood deviation " + fmt(worstValue) + ", worst relative gradient error " +
             fmt(worstGrad) + " over " + std::to_string(gradientsChecked) + " hyperparameters";
  return o;
}

// ------------------------------------------------------------------- kernels

double reparameterizationError(const std::shared_ptr<ModelResources>& res, std::mt19937_64& rng) {
  Featurizer f(*findMethod("Kermut-T"), res);
  const auto pts = f(abbo::testing::randomVariants(res->parental, rng, 25, 0, 4));
  const auto n = static_cast<Eigen::Index>(pts.size());
  std::uniform_real_distribution<double> u(0.05, 0.95);
  double worst = 0.0;
  for (int trial = 0; trial < 10; ++trial) {
    const double var = 0.1 + 5.0 * u(rng), pi = u(rng);
    KermutKernel scaled(res->generalContext, std::make_unique<TanimotoKernel>(Channel::kOneHot), var, pi);
    const Eigen::MatrixXd g = scaled.gram(pts);
    const auto hp = scaled.structParams();
    Eigen::MatrixXd s(n, n), t(n, n);
    for (Eigen::Index i = 0; i < n; ++i)
      for (Eigen::Index j = 0; j < n; ++j) {
        s(i, j) = kermutStruct(pts[i].mutations, pts[j].mutations, *res->generalContext,
                               {hp.gammaH, hp.gammaP, hp.gammaD, 1.0});
        t(i, j) = tanimoto(pts[i].channel(Channel::kOneHot), pts[j].channel(Channel::kOneHot));
      }
    auto original = [&](const KermutOriginalParams& o) {
      Eigen::MatrixXd m(n, n);
      for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < n; ++j) m(i, j) = kermutOriginal(s(i, j), t(i, j), o);
      return m;
    };
    worst = std::max(worst, (original(toOriginalParameterization({var, pi})) - g).cwiseAbs().maxCoeff());
    const KermutOriginalParams o{0.2 + 3.0 * u(rng), u(rng), 0.5 + u(rng), 0.2 + 2.0 * u(rng)};
    const auto back = toScaledParameterization(o);
    KermutKernel remapped(res->generalContext, std::make_unique<TanimotoKernel>(Channel::kOneHot), back.signalVariance,
                          back.pi);
    worst = std::max(worst, (remapped.gram(pts) - original(o)).cwiseAbs().maxCoeff());
  }
  return worst;
}

Outcome kernelCriterion() {
  auto res = abbo::testing::syntheticResources();
  std::mt19937_64 rng(31);
  std::size_t kernels = 0, violations = 0;
  double worstScaled = std::numeric_limits<double>::infinity();
  std::string worstKernel;
  for (const auto& m : methodRegistry()) {
    if (m.random || m.constrained) continue;
    ++kernels;
    Featurizer f(m, res);
    auto model = buildModel(m, *res);
    for (int trial = 0; trial < 100; ++trial) {
      const std::size_t n = 2 + rng() % 29;
      const auto pts = f(abbo::testing::randomVariants(res->parental, rng, n, 0, 4));
      abbo::testing::randomizeHyperparameters(model.kernel(), rng);
      const double lambda = abbo::testing::minEigenvalue(model.kernel().gram(pts)) / static_cast<double>(n);
      violations += lambda < -1e-8;
      if (lambda < worstScaled) {
        worstScaled = lambda;
        worstKernel = m.name;
      }
    }
  }
  const double reparam = reparameterizationError(res, rng);
  Outcome o;
  o.pass = violations == 0 && reparam <= 1e-10;
  o.detail = std::to_string(kernels) + " kernels x 100 sets, violations " + std::to_string(violations) +
             ", smallest min-eigenvalue/n " + fmt(worstScaled) + " (" + worstKernel + "), reparameterization error " +
             fmt(reparam);
  return o;
}

// -------------------------------------------------------------------- nsga-ii

std::vector<std::size_t> bruteForceRanks(const std::vector<Objectives>& pop) {
  const std::size_t n = pop.size(), unset = std::numeric_limits<std::size_t>::max();
  std::vector<std::size_t> rank(n, unset);
  std::size_t assigned = 0;
  for (std::size_t k = 0; assigned < n; ++k) {
    std::vector<std::size_t> layer;
    for (std::size_t i = 0; i < n; ++i) {
      if (rank[i] != unset) continue;
      bool dominated = false;
      for (std::size_t j = 0; j < n && !dominated; ++j) {
        if (j == i || rank[j] < k) continue;
        bool geq = true, gt = false;
        for (std::size_t d = 0; d < pop[i].size(); ++d) {
          geq = geq && pop[j][d] >= pop[i][d];
          gt = gt || pop[j][d] > pop[i][d];
        }
        dominated = geq && gt;
      }
      if (!dominated) layer.push_back(i);
    }
    for (auto i : layer) rank[i] = k;
    assigned += layer.size();
  }
  return rank;
}

Outcome nsgaCriterion() {
  std::mt19937_64 rng(1);
  std::size_t sortMismatches = 0;
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 1 + rng() % 50, dims = 2 + rng() % 2;
    std::uniform_int_distribution<int> v(0, 6);
    std::vector<Objectives> pop(n, Objectives(dims));
    for (auto& o : pop)
      for (auto& x : o) x = v(rng);
    std::vector<std::size_t> rank(n);
    const auto fronts = nonDominatedSort(pop);
    for (std::size_t f = 0; f < fronts.size(); ++f)
      for (auto i : fronts[f]) rank[i] = f;
    sortMismatches += rank != bruteForceRanks(pop);
  }

  const Sequence parental(abbo::testing::kParental);
  std::size_t elitismBreaks = 0;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    std::mt19937_64 trng(seed);
    const Sequence target = abbo::testing::randomVariant(parental, trng, 6, 12);
    BatchEvaluator eval = [target](std::span<const Sequence> seqs) {
      std::vector<Objectives> out;
      for (const auto& s : seqs)
        out.push_back({-static_cast<double>(hamming(s, target)),
                       static_cast<double>(hashKey({SequenceHash{}(s), 17}) % 1000) / 1000.0});
      return out;
    };
    GAConfig cfg;
    cfg.populationSize = 24;
    cfg.generations = 15;
    cfg.seed = seed;
    const auto res = evolve(parental, eval, cfg);
    for (std::size_t g = 1; g < res.bestPerGeneration.size(); ++g)
      for (std::size_t k = 0; k < 2; ++k) elitismBreaks += res.bestPerGeneration[g][k] < res.bestPerGeneration[g - 1][k];
  }
  Outcome o;
  o.pass = sortMismatches == 0 && elitismBreaks == 0;
  o.detail = "200 populations, rank mismatches " + std::to_string(sortMismatches) + "; 10 seeded runs, elitism breaks " +
             std::to_string(elitismBreaks);
  return o;
}

// ------------------------------------------------------------------ campaigns

struct CampaignRuns {
  CampaignConfig cfg;
  std::vector<CampaignLog> plain;  // OneHot-T, repeats 0..4
  double protocolSeconds = 0.0;
};

double finalBest(const CampaignLog& log) { return log.rounds.back().bestSoFar; }

Outcome protocolCriterion(CampaignRuns& runs) {
  runs.cfg = loadConfig(std::string(ABBO_CONFIG_DIR) + "/campaign.yaml");
  const auto& cfg = runs.cfg;
  const auto t0 = Clock::now();
  const auto env = buildEnvironment(cfg);
  runs.plain = runCampaign(cfg, env);
  runs.protocolSeconds = secondsSince(t0);

  std::size_t sizeErrors = 0, decreases = 0;
  for (const auto& log : runs.plain) {
    sizeErrors += log.rounds.size() != cfg.rounds + 1;
    for (std::size_t k = 0; k < log.rounds.size(); ++k) {
      sizeErrors += log.rounds[k].datasetSize != 50 + 50 * k;
      if (k > 0) decreases += log.rounds[k].bestSoFar < log.rounds[k - 1].bestSoFar;
    }
  }
  const bool numbers = cfg.initialSample == 50 && cfg.rounds == 9 && cfg.batchSize == 80 && cfg.dropCount == 30 &&
                       cfg.repeats == 3 && runs.plain.size() == 3;
  Outcome o;
  o.pass = numbers && sizeErrors == 0 && decreases == 0 && runs.protocolSeconds < 600.0;
  o.detail = std::to_string(runs.plain.size()) + " repeats x " + std::to_string(cfg.rounds) + " rounds (L=" +
             std::to_string(cfg.parental.size()) + "), dataset size errors " + std::to_string(sizeErrors) +
             ", best-so-far decreases " + std::to_string(decreases) + ", wall-clock " + fmt(runs.protocolSeconds) + " s";
  return o;
}

Outcome sanityCriterion(CampaignRuns& runs) {
  const auto& cfg = runs.cfg;
  const auto env = buildEnvironment(cfg);
  for (std::size_t r = runs.plain.size(); r < 5; ++r) runs.plain.push_back(runRepeat(cfg, env, requireMethod("OneHot-T"), r));
  std::vector<double> model, random;
  for (std::size_t r = 0; r < 5; ++r) {
    model.push_back(finalBest(runs.plain[r]));
    random.push_back(finalBest(runRepeat(cfg, env, requireMethod("Random"), r)));
  }
  const double a = median(model), b = median(random);
  Outcome o;
  o.pass = a > b;
  o.detail = "seeds " + std::to_string(cfg.seed) + ".." + std::to_string(cfg.seed + 4) + ", median final best OneHot-T " +
             fmt(a) + " vs Random " + fmt(b);
  return o;
}

Outcome constraintCriterion(CampaignRuns& runs) {
  const auto& cfg = runs.cfg;
  const auto env = buildEnvironment(cfg);
  auto meanLik = [](const CampaignLog& log) {
    double s = 0.0;
    for (std::size_t k = 1; k < log.rounds.size(); ++k) s += log.rounds[k].meanLikelihood;
    return s / static_cast<double>(log.rounds.size() - 1);
  };
  std::size_t wins = 0;
  std::string pairs;
  for (std::size_t r = 0; r < 3; ++r) {
    const double plain = meanLik(runs.plain[r]);
    const double constrained = meanLik(runRepeat(cfg, env, requireMethod("C-OneHot-T"), r));
    wins += constrained >= plain;
    pairs += (r ? ", " : "") + fmt(constrained) + " vs " + fmt(plain);
  }

  // Zero preservation: a zero acquisition value stays zero for every likelihood.
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(1e-6, 1.0);
  std::size_t zeroBreaks = 0, scaleBreaks = 0;
  for (int i = 0; i < 1000; ++i) zeroBreaks += softConstrain(u(rng), 0.0) != 0.0;
  // Scale invariance: a common factor on all likelihoods leaves the batch unchanged.
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t l = 2 + rng() % 19, q = 1 + rng() % l;
    auto prob = abbo::testing::randomPortfolioProblem(l, rng);
    prob.likelihoods.resize(l);
    for (auto& v : prob.likelihoods) v = u(rng);
    auto scaled = prob;
    const double c = 0.01 + 0.98 * u(rng);
    for (auto& v : scaled.likelihoods) v *= c;
    scaleBreaks += selectBatch(prob, q).selected != selectBatch(scaled, q).selected;
  }
  Outcome o;
  o.pass = wins >= 2 && zeroBreaks == 0 && scaleBreaks == 0;
  o.detail = "C-OneHot-T >= OneHot-T mean batch likelihood in " + std::to_string(wins) + "/3 repeats (" + pairs +
             "); zero-preservation breaks " + std::to_string(zeroBreaks) + "/1000, scale-invariance breaks " +
             std::to_string(scaleBreaks) + "/50";
  return o;
}

Outcome rmsdCriterion(const CampaignRuns& runs) {
  // Trajectories: every acquisition round carries an RMSD summary, and the
  // written logs expose it.
  std::size_t missing = 0;
  for (const auto& log : runs.plain)
    for (std::size_t k = 1; k < log.rounds.size(); ++k)
      missing += !log.rounds[k].rmsd || !(log.rounds[k].rmsd->mean <= log.rounds[k].rmsd->max);
  const fs::path dir = fs::temp_directory_path() / "abbo_acceptance_rmsd";
  fs::remove_all(dir);
  writeOutputs(runs.plain, dir);
  const auto report = writeReport(collectRounds(dir), dir / "report");
  std::size_t reportRows = 0;
  {
    std::ifstream in(report.rmsd);
    for (std::string line; std::getline(in, line);) reportRows += !line.empty();
  }
  const std::size_t expectedRows = 1 + runs.cfg.rounds;

  std::mt19937_64 rng(2024);
  std::normal_distribution<double> coord(0.0, 5.0), shift(0.0, 20.0), n01(0.0, 1.0);
  double worst = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const int points = 5 + trial % 20;
    Eigen::VectorXd ref(3 * points);
    for (auto& x : ref) x = coord(rng);
    Eigen::Quaterniond quat(n01(rng), n01(rng), n01(rng), n01(rng));
    quat.normalize();
    const Eigen::Matrix3d rot = quat.toRotationMatrix();
    const Eigen::Vector3d t(shift(rng), shift(rng), shift(rng));
    Eigen::VectorXd moved(ref.size());
    for (Eigen::Index i = 0; i < ref.size(); i += 3) moved.segment<3>(i) = rot * ref.segment<3>(i) + t;
    worst = std::max(worst, align(moved, ref).rmsd);
  }
  Outcome o;
  o.pass = missing == 0 && reportRows == expectedRows && worst <= 1e-9;
  o.detail = "rounds without RMSD " + std::to_string(missing) + ", report rows " + std::to_string(reportRows) + "/" +
             std::to_string(expectedRows) + ", worst recovered RMSD over 100 transforms " + fmt(worst);
  return o;
}

}  // namespace

int main() {
  CampaignRuns runs;
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"qhsri-portfolio", portfolioCriterion},
      {"gp-exact-inference", gpCriterion},
      {"kernel-validity", kernelCriterion},
      {"nsga2-sorting-elitism", nsgaCriterion},
      {"protocol-fidelity", [&] { return protocolCriterion(runs); }},
      {"optimization-sanity", [&] { return sanityCriterion(runs); }},
      {"soft-constraint", [&] { return constraintCriterion(runs); }},
      {"rmsd-metric", [&] { return rmsdCriterion(runs); }},
  };
  std::size_t failures = 0;
  for (const auto& [name, check] : criteria) {
    Outcome o;
    const auto t0 = Clock::now();
    try {
      o = check();
    } catch (const std::exception& e) {
      o.detail = std::string("exception: ") + e.what();
    }
    failures += !o.pass;
    std::cout << (o.pass ? "PASS " : "FAIL ") << name << ": " << o.detail << " [" << fmt(secondsSince(t0)) << " s]"
              << std::endl;
  }
  std::cout << (failures ? "FAILED " : "ALL PASSED ") << criteria.size() - failures << "/" << criteria.size() << std::endl;
  return failures ? 1 : 0;
}
