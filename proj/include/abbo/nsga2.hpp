#pragma once

// NSGA-II over fixed-length sequences: fast non-dominated sorting, crowding
// distance, binary tournaments, uniform crossover, per-site mutation and
// elitist environmental selection. All objectives are maximized.

#include <algorithm>
#include <cstdint>
#include <functional>
#include <limits>
#include <map>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "abbo/error.hpp"
#include "abbo/seqcore.hpp"

namespace abbo {

using Objectives = std::vector<double>;

/// a >= b everywhere and a > b somewhere.
inline bool dominates(const Objectives& a, const Objectives& b) {
  bool strict = false;
  for (std::size_t k = 0; k < a.size(); ++k) {
    if (a[k] < b[k]) return false;
    strict = strict || a[k] > b[k];
  }
  return strict;
}

/// Fronts of indices; front 0 is the non-dominated set.
inline std::vector<std::vector<std::size_t>> nonDominatedSort(std::span<const Objectives> pop) {
  const std::size_t n = pop.size();
  for (const auto& o : pop) {
    if (o.size() != pop[0].size()) throw InvalidArgument("nonDominatedSort: inconsistent objective count");
  }
  std::vector<std::vector<std::size_t>> dominatedBy(n);
  std::vector<std::size_t> count(n, 0);
  std::vector<std::vector<std::size_t>> fronts(1);
  for (std::size_t p = 0; p < n; ++p) {
    for (std::size_t q = p + 1; q < n; ++q) {
      if (dominates(pop[p], pop[q])) {
        dominatedBy[p].push_back(q);
        ++count[q];
      } else if (dominates(pop[q], pop[p])) {
        dominatedBy[q].push_back(p);
        ++count[p];
      }
    }
  }
  for (std::size_t p = 0; p < n; ++p)
    if (count[p] == 0) fronts[0].push_back(p);
  while (!fronts.back().empty()) {
    std::vector<std::size_t> next;
    for (std::size_t p : fronts.back())
      for (std::size_t q : dominatedBy[p])
        if (--count[q] == 0) next.push_back(q);
    std::sort(next.begin(), next.end());
    fronts.push_back(std::move(next));
  }
  fronts.pop_back();
  return fronts;
}

/// Crowding distance of each member of `front` (same order). Boundary members
/// of every objective get +inf.
inline std::vector<double> crowdingDistance(std::span<const std::size_t> front, std::span<const Objectives> objectives) {
  const std::size_t m = front.size();
  std::vector<double> dist(m, 0.0);
  if (m == 0) return dist;
  if (m <= 2) return std::vector<double>(m, std::numeric_limits<double>::infinity());
  const std::size_t dims = objectives[front[0]].size();
  std::vector<std::size_t> order(m);
  for (std::size_t k = 0; k < dims; ++k) {
    for (std::size_t i = 0; i < m; ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      return objectives[front[a]][k] < objectives[front[b]][k];
    });
    const double lo = objectives[front[order.front()]][k];
    const double hi = objectives[front[order.back()]][k];
    dist[order.front()] = dist[order.back()] = std::numeric_limits<double>::infinity();
    if (hi == lo) continue;
    for (std::size_t i = 1; i + 1 < m; ++i) {
      dist[order[i]] += (objectives[front[order[i + 1]]][k] - objectives[front[order[i - 1]]][k]) / (hi - lo);
    }
  }
  return dist;
}

enum class ObjectiveSet { kMeanStd, kMeanStdPlm };

struct GAConfig {
  std::size_t populationSize = 128;
  std::size_t generations = 50;
  double mutationRatePerSite = 0.0;  // 0 selects 1 / L
  double crossoverProbability = 0.9;
  std::optional<std::size_t> maxMutationsFromParental;
  ObjectiveSet objectiveSet = ObjectiveSet::kMeanStd;
  std::uint64_t seed = 0;

  void validate() const {
    if (populationSize < 2 || populationSize % 2 != 0) throw InvalidArgument("GA population size must be even and >= 2");
    if (mutationRatePerSite < 0.0 || mutationRatePerSite >= 1.0) throw InvalidArgument("GA mutation rate must lie in (0, 1)");
    if (crossoverProbability < 0.0 || crossoverProbability > 1.0) throw InvalidArgument("GA crossover probability must lie in [0, 1]");
    if (maxMutationsFromParental && *maxMutationsFromParental == 0) throw InvalidArgument("GA mutation cap must be positive");
  }
};

struct Individual {
  Sequence sequence;
  Objectives objectives;
  std::size_t rank = 0;
  double crowding = 0.0;
};

/// Evaluates a batch of sequences; must be deterministic.
using BatchEvaluator = std::function<std::vector<Objectives>(std::span<const Sequence>)>;

struct EvolveOptions {
  std::vector<Sequence> seeds;                               // e.g. best observed sequences
  std::function<bool(const Sequence&)> exclude;              // filtered from the output
  std::size_t minCandidates = 0;                             // pad the output up to this many
  std::function<void(std::size_t, std::span<const Individual>)> onGeneration;
};

struct EvolveResult {
  std::vector<Individual> front;       // deduplicated front 0 of the final population
  std::vector<Individual> candidates;  // front, then padding in (rank, crowding) order
  std::size_t padded = 0;
  std::vector<Objectives> bestPerGeneration;  // per-objective max, generation 0 = initial
  std::size_t evaluations = 0;
};

namespace detail {

inline void assignRankAndCrowding(std::vector<Individual>& pop) {
  std::vector<Objectives> objs;
  objs.reserve(pop.size());
  for (const auto& ind : pop) objs.push_back(ind.objectives);
  const auto fronts = nonDominatedSort(objs);
  for (std::size_t f = 0; f < fronts.size(); ++f) {
    const auto crowd = crowdingDistance(fronts[f], objs);
    for (std::size_t i = 0; i < fronts[f].size(); ++i) {
      pop[fronts[f][i]].rank = f;
      pop[fronts[f][i]].crowding = crowd[i];
    }
  }
}

inline bool crowdedLess(const Individual& a, const Individual& b) {
  if (a.rank != b.rank) return a.rank < b.rank;
  return a.crowding > b.crowding;
}

class Evolver {
 public:
  Evolver(const Sequence& parental, const BatchEvaluator& evaluate, const GAConfig& cfg)
      : parental_(parental),
        evaluate_(evaluate),
        cfg_(cfg),
        rng_(cfg.seed),
        rate_(cfg.mutationRatePerSite > 0.0 ? cfg.mutationRatePerSite : 1.0 / static_cast<double>(parental.size())) {}

  Sequence randomMutant(const Sequence& base, std::size_t sites) {
    std::string s = base.str();
    std::vector<std::size_t> positions(s.size());
    for (std::size_t i = 0; i < s.size(); ++i) positions[i] = i;
    std::shuffle(positions.begin(), positions.end(), rng_);
    for (std::size_t k = 0; k < std::min(sites, s.size()); ++k) s[positions[k]] = otherResidue(s[positions[k]]);
    return capped(Sequence(std::move(s)));
  }

  char otherResidue(char current) {
    std::uniform_int_distribution<int> pick(0, static_cast<int>(kAlphabetSize) - 2);
    int idx = pick(rng_);
    if (idx >= residueIndex(current)) ++idx;
    return kAlphabet[static_cast<std::size_t>(idx)];
  }

  Sequence capped(Sequence seq) {
    if (!cfg_.maxMutationsFromParental) return seq;
    std::vector<std::size_t> mutated;
    for (std::size_t i = 0; i < seq.size(); ++i)
      if (seq[i] != parental_[i]) mutated.push_back(i);
    if (mutated.size() <= *cfg_.maxMutationsFromParental) return seq;
    std::shuffle(mutated.begin(), mutated.end(), rng_);
    std::string s = seq.str();
    for (std::size_t k = *cfg_.maxMutationsFromParental; k < mutated.size(); ++k) s[mutated[k]] = parental_[mutated[k]];
    return Sequence(std::move(s));
  }

  std::vector<Individual> evaluated(std::vector<Sequence> seqs) {
    std::vector<Sequence> fresh;
    std::unordered_set<Sequence, SequenceHash> queued;
    for (const auto& s : seqs)
      if (!archive_.count(s) && queued.insert(s).second) fresh.push_back(s);
    if (!fresh.empty()) {
      auto objs = evaluate_(fresh);
      if (objs.size() != fresh.size()) throw Error("GA evaluator returned the wrong number of results");
      for (std::size_t i = 0; i < fresh.size(); ++i) {
        for (double v : objs[i]) {
          if (!std::isfinite(v)) throw NumericalError("GA evaluation produced a non-finite objective for " + fresh[i].str());
        }
        if (dims_ == 0) dims_ = objs[i].size();
        if (objs[i].size() != dims_ || dims_ == 0) throw Error("GA evaluator returned inconsistent objective counts");
        archive_.emplace(fresh[i], objs[i]);
        archiveOrder_.push_back(fresh[i]);
      }
      evaluations_ += fresh.size();
    }
    std::vector<Individual> out;
    out.reserve(seqs.size());
    for (auto& s : seqs) {
      Objectives o = archive_.at(s);
      out.push_back({std::move(s), std::move(o), 0, 0.0});
    }
    return out;
  }

  const Individual& tournament(const std::vector<Individual>& pop) {
    std::uniform_int_distribution<std::size_t> pick(0, pop.size() - 1);
    const Individual& a = pop[pick(rng_)];
    const Individual& b = pop[pick(rng_)];
    return crowdedLess(b, a) ? b : a;
  }

  std::vector<Sequence> offspring(const std::vector<Individual>& pop) {
    std::bernoulli_distribution crossover(cfg_.crossoverProbability), coin(0.5), mutateSite(rate_);
    std::vector<Sequence> children;
    std::unordered_set<Sequence, SequenceHash> present;
    for (const auto& ind : pop) present.insert(ind.sequence);
    while (children.size() < cfg_.populationSize) {
      std::string c1 = tournament(pop).sequence.str();
      std::string c2 = tournament(pop).sequence.str();
      if (crossover(rng_)) {
        for (std::size_t i = 0; i < c1.size(); ++i)
          if (coin(rng_)) std::swap(c1[i], c2[i]);
      }
      for (std::string* c : {&c1, &c2}) {
        for (auto& ch : *c)
          if (mutateSite(rng_)) ch = otherResidue(ch);
        Sequence child = capped(Sequence(*c));
        if (present.count(child)) {
          std::uniform_int_distribution<std::size_t> site(0, child.size() - 1);
          const std::size_t pos = site(rng_);
          child = capped(mutate(child, pos, otherResidue(child[pos])));
        }
        present.insert(child);
        children.push_back(std::move(child));
      }
    }
    children.resize(cfg_.populationSize);
    return children;
  }

  std::vector<Individual> environmentalSelection(std::vector<Individual> combined) {
    assignRankAndCrowding(combined);
    std::stable_sort(combined.begin(), combined.end(), crowdedLess);
    combined.resize(cfg_.populationSize);
    // Ranks and crowding are recomputed on the survivors for the next tournament.
    assignRankAndCrowding(combined);
    return combined;
  }

  Objectives best(const std::vector<Individual>& pop) const {
    Objectives b(dims_, -std::numeric_limits<double>::infinity());
    for (const auto& ind : pop)
      for (std::size_t k = 0; k < dims_; ++k) b[k] = std::max(b[k], ind.objectives[k]);
    return b;
  }

  std::mt19937_64& rng() { return rng_; }
  std::size_t evaluations() const { return evaluations_; }
  const std::unordered_map<Sequence, Objectives, SequenceHash>& archive() const { return archive_; }
  const std::vector<Sequence>& archiveOrder() const { return archiveOrder_; }

 private:
  const Sequence& parental_;
  const BatchEvaluator& evaluate_;
  const GAConfig& cfg_;
  std::mt19937_64 rng_;
  double rate_;
  std::size_t dims_ = 0;
  std::size_t evaluations_ = 0;
  std::unordered_map<Sequence, Objectives, SequenceHash> archive_;
  std::vector<Sequence> archiveOrder_;
};

}  // namespace detail

/// Runs NSGA-II from parental, seeds and random 1-3 site mutants of parental.
inline EvolveResult evolve(const Sequence& parental, const BatchEvaluator& evaluate, const GAConfig& cfg,
                           const EvolveOptions& options = {}) {
  cfg.validate();
  if (parental.empty()) throw InvalidArgument("evolve: empty parental sequence");
  detail::Evolver ev(parental, evaluate, cfg);

  std::vector<Sequence> init{ev.capped(parental)};
  std::unordered_set<Sequence, SequenceHash> present{init.front()};
  for (const auto& s : options.seeds) {
    if (init.size() >= cfg.populationSize) break;
    if (s.size() != parental.size()) throw InvalidArgument("evolve: seed length differs from parental");
    Sequence c = ev.capped(s);
    if (present.insert(c).second) init.push_back(std::move(c));
  }
  std::uniform_int_distribution<std::size_t> sites(1, 3);
  for (std::size_t attempts = 0; init.size() < cfg.populationSize; ++attempts) {
    Sequence m = ev.randomMutant(parental, sites(ev.rng()));
    if (present.insert(m).second || attempts > 50 * cfg.populationSize) init.push_back(std::move(m));
  }

  std::vector<Individual> pop = ev.evaluated(std::move(init));
  detail::assignRankAndCrowding(pop);
  EvolveResult result;
  result.bestPerGeneration.push_back(ev.best(pop));
  if (options.onGeneration) options.onGeneration(0, pop);

  for (std::size_t gen = 1; gen <= cfg.generations; ++gen) {
    std::vector<Individual> children = ev.evaluated(ev.offspring(pop));
    std::vector<Individual> combined = std::move(pop);
    combined.insert(combined.end(), std::make_move_iterator(children.begin()), std::make_move_iterator(children.end()));
    pop = ev.environmentalSelection(std::move(combined));
    result.bestPerGeneration.push_back(ev.best(pop));
    if (options.onGeneration) options.onGeneration(gen, pop);
  }

  auto excluded = [&](const Sequence& s) { return options.exclude && options.exclude(s); };
  std::unordered_set<Sequence, SequenceHash> emitted;
  std::vector<Individual> ordered = pop;
  std::stable_sort(ordered.begin(), ordered.end(), detail::crowdedLess);
  for (const auto& ind : ordered) {
    if (ind.rank != 0) break;
    if (excluded(ind.sequence) || !emitted.insert(ind.sequence).second) continue;
    result.front.push_back(ind);
  }
  result.candidates = result.front;

  // Padding: rest of the final population, then fronts peeled off the archive
  // of everything evaluated during the run.
  for (const auto& ind : ordered) {
    if (result.candidates.size() >= options.minCandidates) break;
    if (excluded(ind.sequence) || !emitted.insert(ind.sequence).second) continue;
    result.candidates.push_back(ind);
    ++result.padded;
  }
  if (result.candidates.size() < options.minCandidates) {
    std::vector<Individual> rest;
    for (const auto& s : ev.archiveOrder()) {
      if (excluded(s) || emitted.count(s)) continue;
      rest.push_back({s, ev.archive().at(s), 0, 0.0});
    }
    std::size_t rank = 0;
    while (!rest.empty() && result.candidates.size() < options.minCandidates) {
      std::vector<bool> dominated(rest.size(), false);
      for (std::size_t i = 0; i < rest.size(); ++i)
        for (std::size_t j = 0; j < rest.size() && !dominated[i]; ++j)
          if (j != i && dominates(rest[j].objectives, rest[i].objectives)) dominated[i] = true;
      std::vector<Individual> layer, remaining;
      for (std::size_t i = 0; i < rest.size(); ++i) (dominated[i] ? remaining : layer).push_back(std::move(rest[i]));
      std::vector<Objectives> objs;
      for (const auto& ind : layer) objs.push_back(ind.objectives);
      std::vector<std::size_t> idx(layer.size());
      for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
      const auto crowd = crowdingDistance(idx, objs);
      for (std::size_t i = 0; i < layer.size(); ++i) {
        layer[i].rank = rank;
        layer[i].crowding = crowd[i];
      }
      std::stable_sort(layer.begin(), layer.end(), detail::crowdedLess);
      for (auto& ind : layer) {
        if (result.candidates.size() >= options.minCandidates) break;
        result.candidates.push_back(std::move(ind));
        ++result.padded;
      }
      rest = std::move(remaining);
      ++rank;
    }
  }
  result.evaluations = ev.evaluations();
  return result;
}

}  // namespace abbo
