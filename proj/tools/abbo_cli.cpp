// abbo: run simulated campaigns, validate configurations, summarize results.
//
// Exit codes: 0 success, 1 configuration error, 2 fixture error, 3 numerical
// failure, 4 validation found problems, 5 other runtime error, 64 usage error.

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "abbo/abbo.hpp"

namespace fs = std::filesystem;

namespace {

enum Exit : int {
  kOk = 0,
  kConfig = 1,
  kFixture = 2,
  kNumerical = 3,
  kValidation = 4,
  kRuntime = 5,
  kUsage = 64,
};

struct Overrides {
  std::optional<std::uint64_t> seed;
  std::vector<std::string> methods;
  std::optional<std::size_t> rounds;
};

abbo::CampaignConfig loadWithOverrides(const std::string& path, const Overrides& o) {
  abbo::CampaignConfig cfg = abbo::loadConfig(path);
  if (o.seed) cfg.seed = *o.seed;
  if (!o.methods.empty()) cfg.methods = o.methods;
  if (o.rounds) cfg.rounds = *o.rounds;
  return cfg;
}

void writeFront(const fs::path& file, std::span<const abbo::Individual> pop) {
  fs::create_directories(file.parent_path());
  std::ofstream out(file);
  out << "sequence,rank,crowding";
  if (!pop.empty())
    for (std::size_t k = 0; k < pop[0].objectives.size(); ++k) out << ",objective" << k;
  out << '\n';
  for (const auto& ind : pop) {
    if (ind.rank != 0) continue;
    out << ind.sequence.str() << ',' << ind.rank << ',' << abbo::io::fmt(ind.crowding);
    for (double v : ind.objectives) out << ',' << abbo::io::fmt(v);
    out << '\n';
  }
}

void writePortfolio(const fs::path& file, std::span<const abbo::Individual> cands, const abbo::PortfolioSolution& sol) {
  fs::create_directories(file.parent_path());
  std::ofstream out(file);
  std::vector<bool> chosen(cands.size(), false);
  for (auto i : sol.selected) chosen[i] = true;
  out << "candidate,sequence,mean,std,r,z,likelihood,selected\n";
  for (std::size_t i = 0; i < cands.size(); ++i) {
    const auto& o = cands[i].objectives;
    const auto ii = static_cast<Eigen::Index>(i);
    out << i << ',' << cands[i].sequence.str() << ',' << abbo::io::fmt(o[0]) << ',' << abbo::io::fmt(o[1]) << ','
        << abbo::io::fmt(sol.r[ii]) << ',' << abbo::io::fmt(sol.z[ii]) << ',' << (o.size() > 2 ? abbo::io::fmt(o[2]) : "")
        << ',' << (chosen[i] ? 1 : 0) << '\n';
  }
}

int run(const std::string& configPath, const std::string& outDir, const Overrides& o, bool verbose) {
  abbo::CampaignConfig cfg = loadWithOverrides(configPath, o);
  const abbo::CampaignEnvironment env = abbo::buildEnvironment(cfg);
  std::vector<abbo::CampaignLog> logs;
  for (const auto& name : cfg.methods) {
    const abbo::MethodSpec& method = abbo::requireMethod(name);
    for (std::size_t r = 0; r < cfg.repeats; ++r) {
      abbo::CampaignHooks hooks;
      if (verbose) hooks.log = [](const std::string& msg) { std::cerr << msg << '\n'; };
      if (verbose || cfg.dumpFronts) {
        const fs::path base = fs::path(outDir) / method.name / ("repeat_" + std::to_string(r));
        hooks.onGeneration = [base](std::size_t round, std::size_t gen, std::span<const abbo::Individual> pop) {
          writeFront(base / ("round" + std::to_string(round)) / ("front_gen" + std::to_string(gen) + ".csv"), pop);
        };
        hooks.onPortfolio = [base](std::size_t round, std::span<const abbo::Individual> cands,
                                   const abbo::PortfolioSolution& sol) {
          writePortfolio(base / ("round" + std::to_string(round)) / "portfolio.csv", cands, sol);
        };
      }
      logs.push_back(abbo::runRepeat(cfg, env, method, r, hooks));
    }
  }
  abbo::writeOutputs(logs, outDir);
  std::cout << "wrote " << (fs::path(outDir) / "aggregate.csv").string() << '\n';
  return kOk;
}

int validate(const std::string& configPath, const Overrides& o) {
  abbo::CampaignConfig cfg = loadWithOverrides(configPath, o);
  std::vector<std::string> problems = cfg.violations();
  auto check = [&](const std::string& what, auto&& fn) {
    try {
      fn();
    } catch (const std::exception& e) {
      problems.push_back(what + ": " + e.what());
    }
  };
  const std::size_t l = cfg.parental.size();
  check("substitution matrix", [&] {
    const auto m = abbo::loadSubstitutionMatrix(cfg.blosumPath.empty() ? abbo::defaultBlosum62Path() : cfg.blosumPath);
    if (!m.isSymmetric()) throw abbo::FixtureError("matrix is not symmetric");
  });
  const auto& p = cfg.features.paths;
  if (cfg.features.kind == abbo::FeatureSpec::Kind::kFixture) {
    if (!p.siteProbs.empty()) check("site probabilities", [&] { abbo::loadProbabilityTable(p.siteProbs, l); });
    if (!p.abSiteProbs.empty()) check("antibody site probabilities", [&] { abbo::loadProbabilityTable(p.abSiteProbs, l); });
    if (!p.distances.empty()) check("distance matrix", [&] { abbo::loadDistanceMatrix(p.distances, l); });
  }
  if (!cfg.plm.generalTable.empty()) check("zero-shot table", [&] { abbo::loadProbabilityTable(cfg.plm.generalTable, l); });
  if (!cfg.plm.antibodyTable.empty()) {
    check("antibody zero-shot table", [&] { abbo::loadProbabilityTable(cfg.plm.antibodyTable, l); });
  }
  if (!cfg.plm.constraintPssm.empty()) check("constraint pssm", [&] { abbo::PssmLikelihood::fromFile(cfg.plm.constraintPssm, l); });

  if (problems.empty()) {
    check("environment", [&] {
      const auto env = abbo::buildEnvironment(cfg);
      // Dry run: fit every configured model on the initial sample.
      for (const auto& name : cfg.methods) {
        const auto& method = abbo::requireMethod(name);
        if (method.random) continue;
        abbo::Featurizer featurize(method, env.resources);
        abbo::Dataset data;
        for (std::size_t i = 0; i < std::min(cfg.initialSample, env.pool.size()); ++i) {
          data.add(featurize(env.pool[i]), (*env.oracle)(env.pool[i]));
        }
        abbo::FitOptions fo = cfg.fit;
        fo.restarts = 1;
        abbo::fit(abbo::buildModel(method, *env.resources, cfg.noise), data, fo);
      }
    });
  }
  if (problems.empty()) {
    std::cout << "ok: " << configPath << '\n';
    return kOk;
  }
  for (const auto& s : problems) std::cout << "violation: " << s << '\n';
  return kValidation;
}

int report(const std::string& runDir, const std::string& outDir) {
  const auto rows = abbo::collectRounds(runDir);
  const auto files = abbo::writeReport(rows, outDir.empty() ? fs::path(runDir) / "report" : fs::path(outDir));
  std::cout << "wrote " << files.best.string() << " and " << files.rmsd.string() << '\n';
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Batch Bayesian optimization over antibody sequence space"};
  app.require_subcommand(1);
  std::string config, out;
  Overrides o;
  bool verbose = false;

  auto addOverrides = [&](CLI::App* sub) {
    sub->add_option("--seed", o.seed, "Base seed (repeat r uses seed + r)");
    sub->add_option("--method", o.methods, "Method name(s) from the registry");
    sub->add_option("--rounds", o.rounds, "Number of acquisition rounds");
  };
  auto* runCmd = app.add_subcommand("run", "Run a simulated campaign");
  runCmd->add_option("--config", config, "Campaign YAML file")->required();
  runCmd->add_option("--out", out, "Output directory")->required();
  runCmd->add_flag("--verbose", verbose, "Progress on stderr and per-generation front dumps");
  addOverrides(runCmd);

  auto* validateCmd = app.add_subcommand("validate", "Check a configuration and its fixtures");
  validateCmd->add_option("--config", config, "Campaign YAML file")->required();
  validateCmd->add_flag("--verbose", verbose, "Unused; accepted for symmetry");
  addOverrides(validateCmd);

  std::string runDir;
  auto* reportCmd = app.add_subcommand("report", "Summarize finished runs into plot-ready CSV");
  reportCmd->add_option("dir", runDir, "Directory containing one or more runs")->required();
  reportCmd->add_option("--out", out, "Report directory (default <dir>/report)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kUsage;
  }

  try {
    if (*runCmd) return run(config, out, o, verbose);
    if (*validateCmd) return validate(config, o);
    if (*reportCmd) return report(runDir, out);
  } catch (const abbo::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kConfig;
  } catch (const abbo::FixtureError& e) {
    std::cerr << "fixture error: " << e.what() << '\n';
    return kFixture;
  } catch (const abbo::NumericalError& e) {
    std::cerr << "numerical error: " << e.what() << '\n';
    return kNumerical;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kRuntime;
  }
  return kUsage;
}
