#pragma once

// YAML campaign configuration. Relative fixture paths resolve against
// $ABBO_FIXTURE_ROOT when set, otherwise against the config file's directory.

#include <yaml-cpp/yaml.h>

#include <cstdlib>
#include <filesystem>
#include <set>
#include <string>

#include "abbo/campaign.hpp"
#include "abbo/error.hpp"

namespace abbo {

namespace detail {

class ConfigReader {
 public:
  ConfigReader(std::string source, std::filesystem::path root) : source_(std::move(source)), root_(std::move(root)) {}

  template <typename T>
  T get(const YAML::Node& node, const std::string& key, const T& fallback, const std::string& where) const {
    const YAML::Node v = node[key];
    if (!v || v.IsNull()) return fallback;
    try {
      return v.as<T>();
    } catch (const YAML::Exception&) {
      throw ConfigError(source_ + ": '" + where + key + "' has the wrong type");
    }
  }

  std::string path(const YAML::Node& node, const std::string& key, const std::string& where) const {
    const auto raw = get<std::string>(node, key, "", where);
    if (raw.empty()) return raw;
    std::filesystem::path p(raw);
    return p.is_absolute() ? p.string() : (root_ / p).lexically_normal().string();
  }

  YAML::Node section(const YAML::Node& node, const std::string& key, const std::set<std::string>& allowed) const {
    const YAML::Node s = node[key];
    if (!s || s.IsNull()) return YAML::Node(YAML::NodeType::Map);
    if (!s.IsMap()) throw ConfigError(source_ + ": '" + key + "' must be a mapping");
    checkKeys(s, allowed, key + ".");
    return s;
  }

  void checkKeys(const YAML::Node& node, const std::set<std::string>& allowed, const std::string& where) const {
    for (const auto& kv : node) {
      const auto k = kv.first.as<std::string>();
      if (!allowed.count(k)) throw ConfigError(source_ + ": unknown key '" + where + k + "'");
    }
  }

 private:
  std::string source_;
  std::filesystem::path root_;
};

}  // namespace detail

/// Parses without validating, so `validate` can list every problem at once.
inline CampaignConfig parseConfig(const YAML::Node& doc, const std::string& source,
                                  const std::filesystem::path& fixtureRoot) {
  if (!doc.IsMap()) throw ConfigError(source + ": top level must be a mapping");
  detail::ConfigReader r(source, fixtureRoot);
  r.checkKeys(doc, {"parental", "method", "methods", "seed", "blosum", "protocol", "oracle", "features", "plm", "gp", "ga"},
              "");
  CampaignConfig cfg;

  const auto parental = r.get<std::string>(doc, "parental", "", "");
  if (parental.empty()) throw ConfigError(source + ": 'parental' is required");
  try {
    cfg.parental = Sequence(parental);
  } catch (const Error& e) {
    throw ConfigError(source + ": parental: " + e.what());
  }
  if (doc["method"] && doc["methods"]) throw ConfigError(source + ": give either 'method' or 'methods'");
  if (doc["methods"]) {
    cfg.methods = r.get<std::vector<std::string>>(doc, "methods", {}, "");
  } else {
    cfg.methods = {r.get<std::string>(doc, "method", "OneHot-T", "")};
  }
  cfg.seed = r.get<std::uint64_t>(doc, "seed", 0, "");
  cfg.blosumPath = r.path(doc, "blosum", "");

  const auto proto = r.section(doc, "protocol",
                               {"initial_pool", "initial_pool_file", "initial_sample", "rounds", "batch_size", "drop",
                                "repeats", "max_mutations"});
  cfg.initialPoolSize = r.get<std::size_t>(proto, "initial_pool", cfg.initialPoolSize, "protocol.");
  cfg.initialPoolPath = r.path(proto, "initial_pool_file", "protocol.");
  cfg.initialSample = r.get<std::size_t>(proto, "initial_sample", cfg.initialSample, "protocol.");
  cfg.rounds = r.get<std::size_t>(proto, "rounds", cfg.rounds, "protocol.");
  cfg.batchSize = r.get<std::size_t>(proto, "batch_size", cfg.batchSize, "protocol.");
  cfg.dropCount = r.get<std::size_t>(proto, "drop", cfg.dropCount, "protocol.");
  cfg.repeats = r.get<std::size_t>(proto, "repeats", cfg.repeats, "protocol.");
  if (proto["max_mutations"] && !proto["max_mutations"].IsNull()) {
    cfg.maxMutations = r.get<std::size_t>(proto, "max_mutations", 0, "protocol.");
  }

  const auto oracle = r.section(doc, "oracle", {"kind", "seed", "epistatic_pairs", "path"});
  const auto kind = r.get<std::string>(oracle, "kind", "affinity", "oracle.");
  if (kind == "affinity") {
    cfg.oracle.kind = OracleKind::kAffinityLike;
  } else if (kind == "tm") {
    cfg.oracle.kind = OracleKind::kTmLike;
  } else if (kind == "fixture") {
    cfg.oracle.kind = OracleKind::kFixture;
  } else {
    throw ConfigError(source + ": oracle.kind must be affinity, tm or fixture");
  }
  cfg.oracle.seed = r.get<std::uint64_t>(oracle, "seed", cfg.oracle.seed, "oracle.");
  cfg.oracle.epistaticPairs = r.get<std::size_t>(oracle, "epistatic_pairs", cfg.oracle.epistaticPairs, "oracle.");
  cfg.oracle.path = r.path(oracle, "path", "oracle.");

  const auto feat = r.section(doc, "features", {"kind", "seed", "embedding_dim", "embeddings", "coords", "site_probs",
                                                "ab_site_probs", "distances"});
  const auto fkind = r.get<std::string>(feat, "kind", "synthetic", "features.");
  if (fkind == "synthetic") {
    cfg.features.kind = FeatureSpec::Kind::kSynthetic;
  } else if (fkind == "fixture") {
    cfg.features.kind = FeatureSpec::Kind::kFixture;
  } else {
    throw ConfigError(source + ": features.kind must be synthetic or fixture");
  }
  cfg.features.seed = r.get<std::uint64_t>(feat, "seed", cfg.features.seed, "features.");
  cfg.features.embeddingDim = r.get<std::size_t>(feat, "embedding_dim", cfg.features.embeddingDim, "features.");
  cfg.features.paths.embeddings = r.path(feat, "embeddings", "features.");
  cfg.features.paths.coords = r.path(feat, "coords", "features.");
  cfg.features.paths.siteProbs = r.path(feat, "site_probs", "features.");
  cfg.features.paths.abSiteProbs = r.path(feat, "ab_site_probs", "features.");
  cfg.features.paths.distances = r.path(feat, "distances", "features.");

  const auto plm = r.section(doc, "plm", {"constraint", "concentration", "pssm", "likelihoods", "zero_shot_general",
                                          "zero_shot_antibody"});
  const auto ckind = r.get<std::string>(plm, "constraint", "pssm", "plm.");
  if (ckind == "pssm") {
    cfg.plm.constraintKind = PlmSpec::Kind::kPssm;
  } else if (ckind == "fixture") {
    cfg.plm.constraintKind = PlmSpec::Kind::kFixture;
  } else {
    throw ConfigError(source + ": plm.constraint must be pssm or fixture");
  }
  cfg.plm.concentration = r.get<double>(plm, "concentration", cfg.plm.concentration, "plm.");
  cfg.plm.constraintPssm = r.path(plm, "pssm", "plm.");
  cfg.plm.constraintPath = r.path(plm, "likelihoods", "plm.");
  cfg.plm.generalTable = r.path(plm, "zero_shot_general", "plm.");
  cfg.plm.antibodyTable = r.path(plm, "zero_shot_antibody", "plm.");

  const auto gp = r.section(doc, "gp", {"restarts", "max_iterations", "noise"});
  cfg.fit.restarts = r.get<std::size_t>(gp, "restarts", cfg.fit.restarts, "gp.");
  cfg.fit.maxIterations = r.get<std::size_t>(gp, "max_iterations", cfg.fit.maxIterations, "gp.");
  cfg.noise = r.get<double>(gp, "noise", cfg.noise, "gp.");

  const auto ga = r.section(doc, "ga", {"population", "generations", "mutation_rate", "crossover", "seeds_from_data",
                                        "dump_fronts"});
  cfg.ga.populationSize = r.get<std::size_t>(ga, "population", cfg.ga.populationSize, "ga.");
  cfg.ga.generations = r.get<std::size_t>(ga, "generations", cfg.ga.generations, "ga.");
  cfg.ga.mutationRatePerSite = r.get<double>(ga, "mutation_rate", cfg.ga.mutationRatePerSite, "ga.");
  cfg.ga.crossoverProbability = r.get<double>(ga, "crossover", cfg.ga.crossoverProbability, "ga.");
  cfg.gaSeedsFromData = r.get<std::size_t>(ga, "seeds_from_data", cfg.gaSeedsFromData, "ga.");
  cfg.dumpFronts = r.get<bool>(ga, "dump_fronts", cfg.dumpFronts, "ga.");
  return cfg;
}

inline std::filesystem::path fixtureRootFor(const std::filesystem::path& configPath) {
  if (const char* env = std::getenv("ABBO_FIXTURE_ROOT"); env && *env) return env;
  const auto parent = std::filesystem::absolute(configPath).parent_path();
  return parent;
}

inline CampaignConfig loadConfig(const std::string& path) {
  if (!std::filesystem::exists(path)) throw ConfigError("config file '" + path + "' does not exist");
  YAML::Node doc;
  try {
    doc = YAML::LoadFile(path);
  } catch (const YAML::Exception& e) {
    throw ConfigError(path + ": " + e.what());
  }
  return parseConfig(doc, path, fixtureRootFor(path));
}

}  // namespace abbo
