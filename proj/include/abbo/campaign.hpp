#pragma once

// Simulated optimization campaign: initial sampling from a pool of near-parental
// variants, then rounds of fit -> genetic search -> portfolio batch -> random
// drop -> oracle, repeated over seeds.

#include <algorithm>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <functional>
#include <memory>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <unordered_set>
#include <vector>

#include "abbo/acquisition.hpp"
#include "abbo/error.hpp"
#include "abbo/features.hpp"
#include "abbo/gp.hpp"
#include "abbo/hashing.hpp"
#include "abbo/io.hpp"
#include "abbo/methods.hpp"
#include "abbo/nsga2.hpp"
#include "abbo/oracle.hpp"
#include "abbo/plm.hpp"
#include "abbo/seqcore.hpp"

namespace abbo {

struct OracleSpec {
  OracleKind kind = OracleKind::kAffinityLike;
  std::uint64_t seed = 1;
  std::size_t epistaticPairs = 10;
  std::string path;  // fixture kind only
};

struct FeatureSpec {
  enum class Kind { kSynthetic, kFixture };
  Kind kind = Kind::kSynthetic;
  std::uint64_t seed = 0;
  std::size_t embeddingDim = 64;
  FixtureFeatureProvider::Paths paths;
};

struct PlmSpec {
  enum class Kind { kPssm, kFixture };
  Kind constraintKind = Kind::kPssm;
  double concentration = 0.6;    // synthetic parental-concentrated PSSM
  std::string constraintPssm;    // optional PSSM file replacing the synthetic one
  std::string constraintPath;    // fixture kind: sequence,likelihood CSV
  std::string generalTable;      // optional zero-shot probability tables (L x 20)
  std::string antibodyTable;
};

struct CampaignConfig {
  Sequence parental;
  std::vector<std::string> methods{"OneHot-T"};
  std::uint64_t seed = 0;

  std::size_t initialPoolSize = 159;
  std::string initialPoolPath;  // optional id<TAB>sequence list replacing the generated pool
  std::size_t initialSample = 50;
  std::size_t rounds = 9;
  std::size_t batchSize = 80;
  std::size_t dropCount = 30;
  std::size_t repeats = 3;
  std::optional<std::size_t> maxMutations;

  OracleSpec oracle;
  FeatureSpec features;
  PlmSpec plm;
  std::string blosumPath;  // empty selects the bundled matrix

  GAConfig ga;
  FitOptions fit;
  double noise = 0.1;
  std::size_t gaSeedsFromData = 16;
  bool dumpFronts = false;

  /// Structural problems (fixtures are checked when the environment is built).
  std::vector<std::string> violations() const {
    std::vector<std::string> v;
    if (parental.size() < 3) v.push_back("parental sequence must have at least 3 residues");
    if (methods.empty()) v.push_back("no method configured");
    for (const auto& m : methods)
      if (!findMethod(m)) v.push_back("method '" + m + "' is not in the registry");
    if (dropCount >= batchSize) {
      v.push_back("drop count (" + std::to_string(dropCount) + ") must be smaller than batch size (" +
                  std::to_string(batchSize) + ")");
    }
    if (initialPoolPath.empty() && initialSample > initialPoolSize) {
      v.push_back("initial sample (" + std::to_string(initialSample) + ") exceeds pool size (" +
                  std::to_string(initialPoolSize) + ")");
    }
    if (initialSample < 2) v.push_back("initial sample must contain at least 2 sequences");
    if (repeats == 0) v.push_back("repeats must be positive");
    if (fit.restarts == 0) v.push_back("gp restarts must be positive");
    if (oracle.kind == OracleKind::kFixture && oracle.path.empty()) v.push_back("fixture oracle needs a path");
    if (plm.constraintKind == PlmSpec::Kind::kFixture && plm.constraintPath.empty()) {
      v.push_back("likelihood fixture needs a path");
    }
    if (!(plm.concentration > 0.0 && plm.concentration <= 1.0)) v.push_back("pssm concentration must lie in (0, 1]");
    if (!(noise > GaussianProcess::kNoiseLower && noise < GaussianProcess::kNoiseUpper)) {
      v.push_back("initial noise must lie inside (1e-8, 10)");
    }
    GAConfig ga2 = ga;
    ga2.maxMutationsFromParental = maxMutations;
    try {
      ga2.validate();
    } catch (const Error& e) {
      v.push_back(e.what());
    }
    return v;
  }

  void validate() const {
    const auto v = violations();
    if (v.empty()) return;
    std::string msg = "invalid campaign configuration:";
    for (const auto& s : v) msg += "\n  - " + s;
    throw ConfigError(msg);
  }
};

/// Loaded fixtures, models and oracle shared by every method and repeat.
struct CampaignEnvironment {
  std::shared_ptr<ModelResources> resources;
  std::shared_ptr<const LikelihoodProvider> constraint;
  std::shared_ptr<const Oracle> oracle;
  std::vector<Sequence> pool;
};

/// Distinct random 1-2 site mutants of parental, seeded.
inline std::vector<Sequence> generateInitialPool(const Sequence& parental, std::size_t size, std::uint64_t seed) {
  const std::size_t l = parental.size();
  const double capacity = static_cast<double>(l) * 19.0 + static_cast<double>(l * (l - 1) / 2) * 361.0;
  if (static_cast<double>(size) > capacity) throw ConfigError("initial pool larger than the 1-2 site neighbourhood");
  std::mt19937_64 rng(hashKey({seed, 0x9001ULL}));
  std::uniform_int_distribution<std::size_t> site(0, l - 1);
  std::uniform_int_distribution<int> other(0, static_cast<int>(kAlphabetSize) - 2);
  std::unordered_set<Sequence, SequenceHash> seen{parental};
  std::vector<Sequence> pool;
  while (pool.size() < size) {
    std::string s = parental.str();
    const std::size_t sites = pool.size() % 2 == 0 ? 1 : 2;
    for (std::size_t k = 0; k < sites; ++k) {
      std::size_t pos = site(rng);
      while (s[pos] != parental[pos]) pos = site(rng);
      int idx = other(rng);
      if (idx >= parental.index(pos)) ++idx;
      s[pos] = kAlphabet[static_cast<std::size_t>(idx)];
    }
    Sequence seq(std::move(s));
    if (seen.insert(seq).second) pool.push_back(std::move(seq));
  }
  return pool;
}

inline CampaignEnvironment buildEnvironment(const CampaignConfig& cfg) {
  cfg.validate();
  CampaignEnvironment env;
  auto res = std::make_shared<ModelResources>();
  res->parental = cfg.parental;
  res->blosum = std::make_shared<const EncodingMatrix>(
      EncodingMatrix::blosum62(cfg.blosumPath.empty() ? defaultBlosum62Path() : cfg.blosumPath));
  const std::size_t l = cfg.parental.size();

  if (cfg.features.kind == FeatureSpec::Kind::kSynthetic) {
    res->features =
        std::make_shared<const SyntheticFeatureProvider>(cfg.parental, cfg.features.seed, *res->blosum,
                                                         cfg.features.embeddingDim);
  } else {
    res->features = std::make_shared<const FixtureFeatureProvider>(cfg.parental, cfg.features.paths);
  }
  bool needsContext = false;
  for (const auto& m : cfg.methods) needsContext = needsContext || requireMethod(m).needsContext();
  if (needsContext) {
    res->generalContext =
        std::make_shared<const StructureContext>(res->features->getStructureContext(ContextFlavor::kGeneral));
    res->antibodyContext =
        std::make_shared<const StructureContext>(res->features->getStructureContext(ContextFlavor::kAntibody));
  }

  // Zero-shot tables: files when given, otherwise similarity-derived stand-ins.
  auto logTable = [&](const std::string& path, Eigen::MatrixXd fallback) {
    Eigen::MatrixXd p = path.empty() ? std::move(fallback) : loadProbabilityTable(path, l);
    return std::make_shared<const Eigen::MatrixXd>(p.array().max(PssmLikelihood::kFloor).log().matrix());
  };
  res->generalLogProbs = logTable(cfg.plm.generalTable, similaritySiteProbs(cfg.parental, *res->blosum, 2.0));
  res->antibodyLogProbs = logTable(
      cfg.plm.antibodyTable,
      PssmLikelihood::parentalConcentrated(cfg.parental, *res->blosum, 0.5, 1.5).probabilities());

  if (cfg.plm.constraintKind == PlmSpec::Kind::kFixture) {
    env.constraint = std::make_shared<const FixtureLikelihood>(cfg.plm.constraintPath);
  } else if (!cfg.plm.constraintPssm.empty()) {
    env.constraint = std::make_shared<const PssmLikelihood>(PssmLikelihood::fromFile(cfg.plm.constraintPssm, l));
  } else {
    env.constraint = std::make_shared<const PssmLikelihood>(
        PssmLikelihood::parentalConcentrated(cfg.parental, *res->blosum, cfg.plm.concentration));
  }

  if (cfg.oracle.kind == OracleKind::kFixture) {
    env.oracle = std::make_shared<const FixtureOracle>(cfg.oracle.path);
  } else {
    SyntheticOracle::Options o;
    o.seed = cfg.oracle.seed;
    o.epistaticPairs = cfg.oracle.epistaticPairs;
    auto emb = res->features->hasEmbeddings() ? res->features : nullptr;
    env.oracle = std::make_shared<const SyntheticOracle>(cfg.oracle.kind, cfg.parental, o, emb);
  }

  if (!cfg.initialPoolPath.empty()) {
    for (auto& named : readSequenceList(cfg.initialPoolPath)) {
      if (named.sequence.size() != l) {
        throw FixtureError(cfg.initialPoolPath + ": sequence '" + named.id + "' has the wrong length");
      }
      env.pool.push_back(std::move(named.sequence));
    }
    if (env.pool.size() < cfg.initialSample) throw FixtureError(cfg.initialPoolPath + ": pool smaller than n0");
  } else {
    env.pool = generateInitialPool(cfg.parental, cfg.initialPoolSize, cfg.seed);
  }
  env.resources = std::move(res);
  return env;
}

struct Observation {
  Sequence sequence;
  double value = 0.0;
};

struct AcquiredRecord {
  Sequence sequence;
  double mean = 0.0;
  double std = 0.0;
  double allocation = 0.0;
  double likelihood = 0.0;
  bool dropped = false;
  std::optional<double> value;
};

struct RoundRecord {
  std::size_t round = 0;
  std::size_t datasetSize = 0;
  double bestSoFar = 0.0;
  std::size_t frontSize = 0;
  std::size_t padded = 0;
  double meanLikelihood = 0.0;  // over the whole acquired batch
  std::optional<RmsdSummary> rmsd;
  double logMarginalLikelihood = 0.0;
  std::string hyperparameters;
  std::vector<AcquiredRecord> batch;
  double seconds = 0.0;
};

struct CampaignLog {
  std::string method;
  std::size_t repeat = 0;
  std::uint64_t seed = 0;
  Sequence parental;
  std::vector<Observation> initial;
  std::vector<RoundRecord> rounds;  // rounds[0] summarizes the initial sample
};

struct CampaignHooks {
  std::function<void(const std::string& msg)> log;
  // (round, generation, population) for optional front dumps.
  std::function<void(std::size_t, std::size_t, std::span<const Individual>)> onGeneration;
  // (round, candidates, portfolio solution) for optional acquisition dumps.
  std::function<void(std::size_t, std::span<const Individual>, const PortfolioSolution&)> onPortfolio;
};

namespace detail {

inline std::vector<Sequence> randomProposals(const Sequence& parental, std::size_t count,
                                             const std::function<bool(const Sequence&)>& taken,
                                             std::optional<std::size_t> cap, std::mt19937_64& rng) {
  const std::size_t maxSites = std::min<std::size_t>(cap.value_or(3), 3);
  std::uniform_int_distribution<std::size_t> sites(1, maxSites), site(0, parental.size() - 1);
  std::uniform_int_distribution<int> other(0, static_cast<int>(kAlphabetSize) - 2);
  std::unordered_set<Sequence, SequenceHash> chosen;
  std::vector<Sequence> out;
  for (std::size_t attempts = 0; out.size() < count; ++attempts) {
    if (attempts > 1000 * count) throw Error("random proposals: neighbourhood exhausted");
    std::string s = parental.str();
    const std::size_t k = sites(rng);
    for (std::size_t m = 0; m < k; ++m) {
      const std::size_t pos = site(rng);
      int idx = other(rng);
      if (idx >= parental.index(pos)) ++idx;
      s[pos] = kAlphabet[static_cast<std::size_t>(idx)];
    }
    Sequence seq(std::move(s));
    if (seq == parental || taken(seq) || !chosen.insert(seq).second) continue;
    out.push_back(std::move(seq));
  }
  return out;
}

inline double bestOf(const Dataset& d) { return d.targets().maxCoeff(); }

}  // namespace detail

/// One repeat of one method. Seeds depend only on (cfg.seed + repeat, round),
/// so different methods see the same initial sample and drop stream.
inline CampaignLog runRepeat(const CampaignConfig& cfg, const CampaignEnvironment& env, const MethodSpec& method,
                             std::size_t repeat, const CampaignHooks& hooks = {}) {
  using Clock = std::chrono::steady_clock;
  const std::uint64_t seed = cfg.seed + repeat;
  CampaignLog log;
  log.method = method.name;
  log.repeat = repeat;
  log.seed = seed;
  log.parental = cfg.parental;

  Featurizer featurize(method, env.resources);
  Dataset data;
  {
    std::mt19937_64 rng(hashKey({seed, 0x1A17ULL}));
    std::vector<std::size_t> idx(env.pool.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::shuffle(idx.begin(), idx.end(), rng);
    idx.resize(cfg.initialSample);
    std::sort(idx.begin(), idx.end());
    for (std::size_t i : idx) {
      const Sequence& s = env.pool[i];
      const double y = (*env.oracle)(s);
      data.add(featurize(s), y);
      log.initial.push_back({s, y});
    }
  }
  RoundRecord initial;
  initial.datasetSize = data.size();
  initial.bestSoFar = detail::bestOf(data);
  log.rounds.push_back(std::move(initial));

  const bool hasCoords = env.resources->features && env.resources->features->hasCoords();
  for (std::size_t round = 1; round <= cfg.rounds; ++round) {
    const auto start = Clock::now();
    RoundRecord rec;
    rec.round = round;
    std::vector<AcquiredRecord> batch;
    auto taken = [&](const Sequence& s) { return data.contains(s); };

    if (method.random) {
      std::mt19937_64 rng(hashKey({seed, round, 0x7A4DULL}));
      for (auto& s : detail::randomProposals(cfg.parental, cfg.batchSize, taken, cfg.maxMutations, rng)) {
        AcquiredRecord a;
        a.sequence = std::move(s);
        batch.push_back(std::move(a));
      }
    } else {
      GaussianProcess prototype = buildModel(method, *env.resources, cfg.noise);
      FitOptions fitOpts = cfg.fit;
      fitOpts.seed = hashKey({seed, round, 0xF17ULL});
      GaussianProcess model = fit(prototype, data, fitOpts);
      rec.logMarginalLikelihood = model.logMarginalLikelihood();
      std::ostringstream hp;
      model.writeHyperparameters(hp);
      rec.hyperparameters = hp.str();

      GAConfig ga = cfg.ga;
      ga.seed = hashKey({seed, round, 0x6AULL});
      ga.maxMutationsFromParental = cfg.maxMutations;
      ga.objectiveSet = method.constrained ? ObjectiveSet::kMeanStdPlm : ObjectiveSet::kMeanStd;
      BatchEvaluator evaluate = [&](std::span<const Sequence> seqs) {
        const auto points = featurize(seqs);
        const auto preds = model.predict(points);
        std::vector<Objectives> out;
        out.reserve(seqs.size());
        for (std::size_t i = 0; i < seqs.size(); ++i) {
          Objectives o{preds[i].mean, preds[i].std};
          if (method.constrained) o.push_back(env.constraint->pseudoLikelihood(seqs[i]));
          out.push_back(std::move(o));
        }
        return out;
      };
      EvolveOptions eo;
      {
        std::vector<std::size_t> order(data.size());
        std::iota(order.begin(), order.end(), 0);
        std::stable_sort(order.begin(), order.end(),
                         [&](std::size_t a, std::size_t b) { return data.target(a) > data.target(b); });
        for (std::size_t k = 0; k < std::min(cfg.gaSeedsFromData, order.size()); ++k) {
          eo.seeds.push_back(data.points()[order[k]].sequence);
        }
      }
      eo.exclude = taken;
      eo.minCandidates = cfg.batchSize;
      if (hooks.onGeneration) {
        eo.onGeneration = [&](std::size_t gen, std::span<const Individual> pop) { hooks.onGeneration(round, gen, pop); };
      }
      EvolveResult ga_out = evolve(cfg.parental, evaluate, ga, eo);
      rec.frontSize = ga_out.front.size();
      rec.padded = ga_out.padded;
      if (ga_out.padded > 0 && hooks.log) {
        hooks.log(method.name + " repeat " + std::to_string(repeat) + " round " + std::to_string(round) +
                  ": GA front has " + std::to_string(ga_out.front.size()) + " candidates, padded with " +
                  std::to_string(ga_out.padded));
      }
      if (ga_out.candidates.size() < cfg.batchSize) {
        throw Error("GA produced only " + std::to_string(ga_out.candidates.size()) + " unseen candidates for a batch of " +
                    std::to_string(cfg.batchSize));
      }

      std::vector<double> means, stds, liks;
      for (const auto& ind : ga_out.candidates) {
        means.push_back(ind.objectives[0]);
        stds.push_back(ind.objectives[1]);
        if (method.constrained) liks.push_back(ind.objectives[2]);
      }
      const auto problem = PortfolioProblem::make(means, stds, liks);
      const PortfolioSolution sol = selectBatch(problem, cfg.batchSize);
      if (hooks.onPortfolio) hooks.onPortfolio(round, ga_out.candidates, sol);
      for (std::size_t i : sol.selected) {
        AcquiredRecord a;
        a.sequence = ga_out.candidates[i].sequence;
        a.mean = means[i];
        a.std = stds[i];
        a.allocation = sol.z[static_cast<Eigen::Index>(i)];
        batch.push_back(std::move(a));
      }
    }

    // Uniform drop without replacement, then evaluate the survivors.
    {
      std::mt19937_64 rng(hashKey({seed, round, 0xD809ULL}));
      std::vector<std::size_t> idx(batch.size());
      std::iota(idx.begin(), idx.end(), 0);
      std::shuffle(idx.begin(), idx.end(), rng);
      for (std::size_t k = 0; k < std::min(cfg.dropCount, idx.size()); ++k) batch[idx[k]].dropped = true;
    }
    double likSum = 0.0;
    std::vector<Sequence> acquired;
    for (auto& a : batch) {
      a.likelihood = env.constraint->pseudoLikelihood(a.sequence);
      likSum += a.likelihood;
      acquired.push_back(a.sequence);
      if (a.dropped) continue;
      a.value = (*env.oracle)(a.sequence);
      data.add(featurize(a.sequence), *a.value);
    }
    rec.meanLikelihood = batch.empty() ? 0.0 : likSum / static_cast<double>(batch.size());
    if (hasCoords) rec.rmsd = rmsdToParental(acquired, *env.resources->features);
    rec.datasetSize = data.size();
    rec.bestSoFar = detail::bestOf(data);
    rec.batch = std::move(batch);
    rec.seconds = std::chrono::duration<double>(Clock::now() - start).count();
    if (hooks.log) {
      hooks.log(method.name + " repeat " + std::to_string(repeat) + " round " + std::to_string(round) +
                ": n=" + std::to_string(rec.datasetSize) + " best=" + io::fmt(rec.bestSoFar) + " (" +
                io::fmt(rec.seconds) + " s)");
    }
    log.rounds.push_back(std::move(rec));
  }
  return log;
}

/// Mean and standard error (sample std / sqrt(n); 0 for n = 1).
struct MeanSe {
  double mean = 0.0;
  double se = 0.0;
  std::size_t n = 0;
};

inline MeanSe meanAndStandardError(const std::vector<double>& xs) {
  MeanSe out;
  out.n = xs.size();
  if (xs.empty()) return out;
  for (double x : xs) out.mean += x;
  out.mean /= static_cast<double>(xs.size());
  if (xs.size() < 2) return out;
  double ss = 0.0;
  for (double x : xs) ss += (x - out.mean) * (x - out.mean);
  out.se = std::sqrt(ss / static_cast<double>(xs.size() - 1)) / std::sqrt(static_cast<double>(xs.size()));
  return out;
}

namespace detail {
inline std::ofstream openOutput(const std::filesystem::path& p) {
  std::filesystem::create_directories(p.parent_path());
  std::ofstream out(p);
  if (!out) throw Error("cannot write " + p.string());
  return out;
}

inline std::string optionalField(const std::optional<double>& v) { return v ? io::fmt(*v) : std::string(); }
}  // namespace detail

/// rounds.csv, aggregate.csv, acquisitions.csv and per-repeat hyperparameter
/// dumps under `outDir`. Logs of several methods may be written together.
inline void writeOutputs(const std::vector<CampaignLog>& logs, const std::filesystem::path& outDir) {
  namespace fs = std::filesystem;
  fs::create_directories(outDir);
  auto rounds = detail::openOutput(outDir / "rounds.csv");
  rounds << "method,repeat,seed,round,dataset_size,best_so_far,front_size,padded,acquired,dropped,"
            "mean_likelihood,rmsd_mean,rmsd_max,log_marginal_likelihood,seconds\n";
  auto acq = detail::openOutput(outDir / "acquisitions.csv");
  acq << "method,repeat,round,sequence,num_mutations,status,value,posterior_mean,posterior_std,allocation,likelihood\n";
  for (const auto& log : logs) {
    for (const auto& o : log.initial) {
      acq << log.method << ',' << log.repeat << ",0," << o.sequence.str() << ',' << hamming(log.parental, o.sequence)
          << ",initial," << io::fmt(o.value) << ",,,,\n";
    }
    for (const auto& r : log.rounds) {
      std::size_t dropped = 0;
      for (const auto& a : r.batch) dropped += a.dropped ? 1 : 0;
      rounds << log.method << ',' << log.repeat << ',' << log.seed << ',' << r.round << ',' << r.datasetSize << ','
             << io::fmt(r.bestSoFar) << ',' << r.frontSize << ',' << r.padded << ',' << r.batch.size() << ','
             << dropped << ',' << (r.round == 0 ? std::string() : io::fmt(r.meanLikelihood)) << ','
             << (r.rmsd ? io::fmt(r.rmsd->mean) : std::string()) << ','
             << (r.rmsd ? io::fmt(r.rmsd->max) : std::string()) << ','
             << (r.hyperparameters.empty() ? std::string() : io::fmt(r.logMarginalLikelihood)) << ','
             << io::fmt(r.seconds) << '\n';
      for (const auto& a : r.batch) {
        acq << log.method << ',' << log.repeat << ',' << r.round << ',' << a.sequence.str() << ','
            << hamming(log.parental, a.sequence) << ',' << (a.dropped ? "dropped" : "observed") << ',' << detail::optionalField(a.value) << ',' << io::fmt(a.mean)
            << ',' << io::fmt(a.std) << ',' << io::fmt(a.allocation) << ',' << io::fmt(a.likelihood) << '\n';
      }
      if (!r.hyperparameters.empty()) {
        auto hp = detail::openOutput(outDir / log.method / ("repeat_" + std::to_string(log.repeat)) /
                                     ("hyperparams_round" + std::to_string(r.round) + ".txt"));
        hp << "# log_marginal_likelihood " << io::fmt(r.logMarginalLikelihood) << '\n' << r.hyperparameters;
      }
    }
  }

  auto agg = detail::openOutput(outDir / "aggregate.csv");
  agg << "method,round,repeats,best_so_far_mean,best_so_far_se\n";
  std::vector<std::string> methods;
  for (const auto& log : logs)
    if (std::find(methods.begin(), methods.end(), log.method) == methods.end()) methods.push_back(log.method);
  for (const auto& m : methods) {
    std::size_t maxRound = 0;
    for (const auto& log : logs)
      if (log.method == m) maxRound = std::max(maxRound, log.rounds.size());
    for (std::size_t k = 0; k < maxRound; ++k) {
      std::vector<double> xs;
      for (const auto& log : logs)
        if (log.method == m && k < log.rounds.size()) xs.push_back(log.rounds[k].bestSoFar);
      const MeanSe s = meanAndStandardError(xs);
      agg << m << ',' << k << ',' << s.n << ',' << io::fmt(s.mean) << ',' << io::fmt(s.se) << '\n';
    }
  }
}

/// Every configured method over every repeat.
inline std::vector<CampaignLog> runCampaign(const CampaignConfig& cfg, const CampaignEnvironment& env,
                                            const CampaignHooks& hooks = {}) {
  std::vector<CampaignLog> logs;
  for (const auto& name : cfg.methods) {
    const MethodSpec& method = requireMethod(name);
    for (std::size_t r = 0; r < cfg.repeats; ++r) logs.push_back(runRepeat(cfg, env, method, r, hooks));
  }
  return logs;
}

}  // namespace abbo
