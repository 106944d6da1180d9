#pragma once

// Protein language model stand-ins: per-sequence pseudo-likelihoods for the
// soft constraint and per-site log-probability tables for the zero-shot prior
// mean.

#include <Eigen/Core>

#include <atomic>
#include <cmath>
#include <memory>
#include <optional>
#include <string>
#include <unordered_map>

#include "abbo/error.hpp"
#include "abbo/features.hpp"
#include "abbo/io.hpp"
#include "abbo/seqcore.hpp"

namespace abbo {

class LikelihoodProvider {
 public:
  LikelihoodProvider() = default;
  LikelihoodProvider(const LikelihoodProvider& o) : floored_(o.floored_.load()) {}
  LikelihoodProvider& operator=(const LikelihoodProvider& o) {
    floored_.store(o.floored_.load());
    return *this;
  }
  virtual ~LikelihoodProvider() = default;

  /// Length-normalized pseudo-likelihood in (0, 1].
  virtual double pseudoLikelihood(const Sequence& seq) const = 0;

  /// L x 20 natural-log probabilities, rows normalized.
  virtual Eigen::MatrixXd logProbTable() const = 0;

  /// Number of zero probabilities that had to be floored at 1e-12.
  std::size_t flooredCount() const noexcept { return floored_.load(); }

 protected:
  mutable std::atomic<std::size_t> floored_{0};
};

/// Position-specific scoring model: independent per-site residue
/// distributions.
class PssmLikelihood final : public LikelihoodProvider {
 public:
  static constexpr double kFloor = 1e-12;

  explicit PssmLikelihood(Eigen::MatrixXd probs) : probs_(std::move(probs)) {
    if (probs_.cols() != static_cast<Eigen::Index>(kAlphabetSize)) {
      throw InvalidArgument("PSSM must have 20 columns");
    }
    for (Eigen::Index i = 0; i < probs_.rows(); ++i) {
      if ((probs_.row(i).array() < 0.0).any() || std::abs(probs_.row(i).sum() - 1.0) > 1e-9) {
        throw FixtureError("PSSM row " + std::to_string(i) + " is not a probability distribution");
      }
    }
  }

  static PssmLikelihood uniform(std::size_t length) {
    return PssmLikelihood(Eigen::MatrixXd::Constant(static_cast<Eigen::Index>(length),
                                                    static_cast<Eigen::Index>(kAlphabetSize),
                                                    1.0 / static_cast<double>(kAlphabetSize)));
  }

  /// Puts mass `concentration` on the parental residue at every site and
  /// spreads the rest by substitution-matrix similarity.
  static PssmLikelihood parentalConcentrated(const Sequence& parental, const EncodingMatrix& blosum,
                                             double concentration, double temperature = 1.0) {
    if (!(concentration > 0.0 && concentration <= 1.0)) {
      throw InvalidArgument("PSSM concentration must lie in (0, 1]");
    }
    Eigen::MatrixXd p = similaritySiteProbs(parental, blosum, temperature);
    for (Eigen::Index i = 0; i < p.rows(); ++i) {
      const int wt = parental.index(static_cast<std::size_t>(i));
      p(i, wt) = 0.0;
      const double rest = p.row(i).sum();
      p.row(i) *= (1.0 - concentration) / rest;
      p(i, wt) = concentration;
      p.row(i) /= p.row(i).sum();
    }
    return PssmLikelihood(std::move(p));
  }

  static PssmLikelihood fromFile(const std::string& path, std::size_t length) {
    return PssmLikelihood(loadProbabilityTable(path, length));
  }

  double pseudoLikelihood(const Sequence& seq) const override {
    if (seq.size() != static_cast<std::size_t>(probs_.rows())) {
      throw InvalidArgument("PSSM covers length " + std::to_string(probs_.rows()) + ", sequence has " +
                            std::to_string(seq.size()));
    }
    if (seq.empty()) return 1.0;
    double logSum = 0.0;
    for (std::size_t i = 0; i < seq.size(); ++i) {
      double p = probs_(static_cast<Eigen::Index>(i), seq.index(i));
      if (p < kFloor) {
        p = kFloor;
        floored_.fetch_add(1, std::memory_order_relaxed);
      }
      logSum += std::log(p);
    }
    return std::exp(logSum / static_cast<double>(seq.size()));
  }

  Eigen::MatrixXd logProbTable() const override { return probs_.array().max(kFloor).log().matrix(); }

  const Eigen::MatrixXd& probabilities() const noexcept { return probs_; }

 private:
  Eigen::MatrixXd probs_;
};

/// Externally computed pseudo-likelihoods (`sequence,likelihood` CSV), with
/// an optional second provider supplying the log-probability table.
class FixtureLikelihood final : public LikelihoodProvider {
 public:
  explicit FixtureLikelihood(const std::string& path, std::shared_ptr<const LikelihoodProvider> table = nullptr)
      : path_(path), table_(std::move(table)) {
    const auto csv = io::readKeyedCsv(path);
    if (csv.header.size() != 2) throw FixtureError(path + ": expected columns sequence,likelihood");
    for (const auto& [key, values] : csv.rows) {
      if (!(values[0] > 0.0 && values[0] <= 1.0)) {
        throw FixtureError(path + ": likelihood for " + key + " outside (0, 1]");
      }
      values_.emplace(key, values[0]);
    }
  }

  double pseudoLikelihood(const Sequence& seq) const override {
    auto it = values_.find(seq.str());
    if (it == values_.end()) throw FixtureError(path_ + ": fixture does not cover sequence " + seq.str());
    return it->second;
  }

  Eigen::MatrixXd logProbTable() const override {
    if (!table_) throw FixtureError(path_ + ": likelihood fixture has no per-site table");
    return table_->logProbTable();
  }

 private:
  std::string path_;
  std::shared_ptr<const LikelihoodProvider> table_;
  std::unordered_map<std::string, double> values_;
};

}  // namespace abbo
