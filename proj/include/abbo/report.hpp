#pragma once

// Post-hoc summaries of finished runs: best-so-far and RMSD trajectories per
// (method, round), in long format for external plotting.

#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <tuple>
#include <vector>

#include "abbo/campaign.hpp"
#include "abbo/error.hpp"
#include "abbo/io.hpp"

namespace abbo {

struct RoundRow {
  std::string method;
  std::size_t repeat = 0;
  std::size_t round = 0;
  double bestSoFar = 0.0;
  std::optional<double> rmsdMean, rmsdMax, meanLikelihood;
};

/// Reads one rounds.csv as written by writeOutputs.
inline std::vector<RoundRow> readRoundsCsv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw FixtureError("cannot open '" + path.string() + "'");
  std::string line;
  if (!std::getline(in, line)) throw FixtureError(path.string() + ": empty log");
  const auto header = io::split(line, ',');
  auto col = [&](const std::string& name) {
    for (std::size_t i = 0; i < header.size(); ++i)
      if (header[i] == name) return i;
    throw FixtureError(path.string() + ": missing column '" + name + "'");
  };
  const std::size_t cMethod = col("method"), cRepeat = col("repeat"), cRound = col("round"),
                    cBest = col("best_so_far"), cRmsdMean = col("rmsd_mean"), cRmsdMax = col("rmsd_max"),
                    cLik = col("mean_likelihood");
  std::vector<RoundRow> rows;
  std::size_t lineNo = 1;
  while (std::getline(in, line)) {
    ++lineNo;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto f = io::split(line, ',');
    const std::string where = path.string() + ":" + std::to_string(lineNo);
    if (f.size() != header.size()) throw FixtureError(where + ": expected " + std::to_string(header.size()) + " fields");
    auto opt = [&](std::size_t c) -> std::optional<double> {
      if (f[c].empty()) return std::nullopt;
      return io::parseDouble(f[c], where);
    };
    RoundRow r;
    r.method = f[cMethod];
    r.repeat = static_cast<std::size_t>(io::parseDouble(f[cRepeat], where));
    r.round = static_cast<std::size_t>(io::parseDouble(f[cRound], where));
    r.bestSoFar = io::parseDouble(f[cBest], where);
    r.rmsdMean = opt(cRmsdMean);
    r.rmsdMax = opt(cRmsdMax);
    r.meanLikelihood = opt(cLik);
    rows.push_back(std::move(r));
  }
  return rows;
}

/// All rounds.csv files below `dir` (so a directory holding several runs
/// merges into one table).
inline std::vector<RoundRow> collectRounds(const std::filesystem::path& dir) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(dir)) throw FixtureError("'" + dir.string() + "' is not a directory");
  std::vector<fs::path> files;
  for (const auto& e : fs::recursive_directory_iterator(dir))
    if (e.is_regular_file() && e.path().filename() == "rounds.csv") files.push_back(e.path());
  std::sort(files.begin(), files.end());
  if (files.empty()) throw FixtureError("no rounds.csv found under '" + dir.string() + "'");
  std::vector<RoundRow> all;
  for (const auto& f : files) {
    auto rows = readRoundsCsv(f);
    all.insert(all.end(), rows.begin(), rows.end());
  }
  return all;
}

struct ReportFiles {
  std::filesystem::path best;
  std::filesystem::path rmsd;
};

/// Writes best_so_far.csv and rmsd.csv into `outDir`. Inputs are only read.
inline ReportFiles writeReport(const std::vector<RoundRow>& rows, const std::filesystem::path& outDir) {
  std::map<std::pair<std::string, std::size_t>, std::vector<const RoundRow*>> groups;
  for (const auto& r : rows) groups[{r.method, r.round}].push_back(&r);

  std::filesystem::create_directories(outDir);
  ReportFiles files{outDir / "best_so_far.csv", outDir / "rmsd.csv"};
  std::ofstream best(files.best), rmsd(files.rmsd);
  if (!best || !rmsd) throw Error("cannot write report files under " + outDir.string());
  best << "method,round,repeats,best_so_far_mean,best_so_far_se,mean_likelihood_mean\n";
  rmsd << "method,round,repeats,rmsd_mean_mean,rmsd_mean_se,rmsd_max_mean,rmsd_max_se\n";
  for (const auto& [key, members] : groups) {
    std::vector<double> b, rm, rx, lk;
    for (const auto* r : members) {
      b.push_back(r->bestSoFar);
      if (r->rmsdMean) rm.push_back(*r->rmsdMean);
      if (r->rmsdMax) rx.push_back(*r->rmsdMax);
      if (r->meanLikelihood) lk.push_back(*r->meanLikelihood);
    }
    const MeanSe sb = meanAndStandardError(b);
    best << key.first << ',' << key.second << ',' << sb.n << ',' << io::fmt(sb.mean) << ',' << io::fmt(sb.se) << ','
         << (lk.empty() ? std::string() : io::fmt(meanAndStandardError(lk).mean)) << '\n';
    if (!rm.empty()) {
      const MeanSe a = meanAndStandardError(rm), m = meanAndStandardError(rx);
      rmsd << key.first << ',' << key.second << ',' << a.n << ',' << io::fmt(a.mean) << ',' << io::fmt(a.se) << ','
           << io::fmt(m.mean) << ',' << io::fmt(m.se) << '\n';
    }
  }
  return files;
}

}  // namespace abbo
