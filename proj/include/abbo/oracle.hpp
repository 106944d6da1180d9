#pragma once

// Ground-truth stand-ins used by the campaign simulator.

#include <Eigen/Core>

#include <cmath>
#include <memory>
#include <string>
#include <unordered_map>
#include <vector>

#include "abbo/error.hpp"
#include "abbo/features.hpp"
#include "abbo/hashing.hpp"
#include "abbo/io.hpp"
#include "abbo/seqcore.hpp"

namespace abbo {

enum class OracleKind { kAffinityLike, kTmLike, kFixture };

inline const char* oracleKindName(OracleKind k) {
  switch (k) {
    case OracleKind::kAffinityLike: return "affinity";
    case OracleKind::kTmLike: return "tm";
    case OracleKind::kFixture: return "fixture";
  }
  return "?";
}

class Oracle {
 public:
  virtual ~Oracle() = default;
  virtual double operator()(const Sequence& seq) const = 0;
  virtual std::string describe() const = 0;
};

/// Seeded landscape: per-site table + sparse pairwise epistasis + a bounded
/// term along a random direction of the embedding space.
///
/// The affinity-like variant reports log10-fold improvement over parental, so
/// parental scores exactly 0. The Tm-like variant reports degrees Celsius
/// around a 65 C baseline and uses three times as many epistatic pairs.
class SyntheticOracle final : public Oracle {
 public:
  struct Options {
    std::uint64_t seed = 0;
    std::size_t epistaticPairs = 10;
    double siteScale = 0.25;
    double epistasisScale = 0.2;
    double embeddingScale = 0.3;
  };

  SyntheticOracle(OracleKind kind, Sequence parental, Options opt,
                  std::shared_ptr<const FeatureProvider> embeddings = nullptr)
      : kind_(kind), parental_(std::move(parental)), opt_(opt), embeddings_(std::move(embeddings)) {
    if (kind_ == OracleKind::kFixture) throw InvalidArgument("synthetic oracle cannot be of fixture kind");
    if (parental_.size() < 2) throw InvalidArgument("synthetic oracle needs a parental of length >= 2");
    const std::uint64_t tag = kind_ == OracleKind::kAffinityLike ? 0xAFF1ULL : 0x7E3ULL;
    const auto n = static_cast<Eigen::Index>(parental_.size());
    // Most substitutions are mildly deleterious: entries are uniform on
    // [-1.35, 0.65) * siteScale, with the parental residue pinned to 0.
    site_.resize(n, static_cast<Eigen::Index>(kAlphabetSize));
    for (Eigen::Index i = 0; i < n; ++i) {
      for (std::size_t a = 0; a < kAlphabetSize; ++a) {
        site_(i, static_cast<Eigen::Index>(a)) =
            opt_.siteScale * (hashSigned(hashKey({opt_.seed, tag, 1, static_cast<std::uint64_t>(i), a})) - 0.35);
      }
      site_(i, parental_.index(static_cast<std::size_t>(i))) = 0.0;
    }
    const std::size_t pairs = kind_ == OracleKind::kTmLike ? 3 * opt_.epistaticPairs : opt_.epistaticPairs;
    for (std::size_t k = 0; k < pairs; ++k) {
      const auto i = static_cast<std::size_t>(hashUnit(hashKey({opt_.seed, tag, 2, k, 0})) * static_cast<double>(n));
      auto j = static_cast<std::size_t>(hashUnit(hashKey({opt_.seed, tag, 2, k, 1})) * static_cast<double>(n - 1));
      if (j >= i) ++j;
      pairs_.push_back({std::min(i, j), std::max(i, j), k});
    }
    if (embeddings_ && embeddings_->hasEmbeddings()) {
      const Eigen::VectorXd e = *embeddings_->getFeatures(parental_).embedding;
      direction_.resize(e.size());
      for (Eigen::Index d = 0; d < e.size(); ++d)
        direction_[d] = hashNormal(hashKey({opt_.seed, tag, 3, static_cast<std::uint64_t>(d)}));
      direction_.normalize();
      parentalProjection_ = direction_.dot(e);
    }
    baseline_ = raw(parental_);
  }

  double operator()(const Sequence& seq) const override {
    const double delta = raw(seq) - baseline_;
    return kind_ == OracleKind::kAffinityLike ? delta : 65.0 + 3.0 * delta;
  }

  std::string describe() const override {
    return std::string("synthetic-") + oracleKindName(kind_) + "(seed=" + std::to_string(opt_.seed) + ")";
  }

  /// Per-site component alone (0 at parental).
  double additive(const Sequence& seq) const {
    requireLength(seq);
    double s = 0.0;
    for (std::size_t i = 0; i < seq.size(); ++i) s += site_(static_cast<Eigen::Index>(i), seq.index(i));
    return s;
  }

  /// Sequence maximizing the per-site component.
  Sequence additiveArgmax() const {
    std::string s(parental_.size(), 'A');
    for (Eigen::Index i = 0; i < site_.rows(); ++i) {
      Eigen::Index best = 0;
      site_.row(i).maxCoeff(&best);
      s[static_cast<std::size_t>(i)] = kAlphabet[static_cast<std::size_t>(best)];
    }
    return Sequence(std::move(s));
  }

  const Eigen::MatrixXd& siteTable() const noexcept { return site_; }

 private:
  struct Pair {
    std::size_t i, j, id;
  };

  void requireLength(const Sequence& seq) const {
    if (seq.size() != parental_.size()) {
      throw InvalidArgument("oracle: sequence length " + std::to_string(seq.size()) + " differs from parental " +
                            std::to_string(parental_.size()));
    }
  }

  double raw(const Sequence& seq) const {
    double v = additive(seq);
    const std::uint64_t tag = kind_ == OracleKind::kAffinityLike ? 0xAFF1ULL : 0x7E3ULL;
    for (const auto& p : pairs_) {
      v += opt_.epistasisScale * hashSigned(hashKey({opt_.seed, tag, 4, p.id, static_cast<std::uint64_t>(seq.index(p.i)),
                                                      static_cast<std::uint64_t>(seq.index(p.j))}));
    }
    if (direction_.size() > 0) {
      const double proj = direction_.dot(*embeddings_->getFeatures(seq).embedding) - parentalProjection_;
      v += opt_.embeddingScale * std::tanh(0.25 * static_cast<double>(seq.size()) * proj);
    }
    return v;
  }

  OracleKind kind_;
  Sequence parental_;
  Options opt_;
  std::shared_ptr<const FeatureProvider> embeddings_;
  Eigen::MatrixXd site_;
  std::vector<Pair> pairs_;
  Eigen::VectorXd direction_;
  double parentalProjection_ = 0.0;
  double baseline_ = 0.0;
};

/// Lookup table oracle (`sequence,value` CSV).
class FixtureOracle final : public Oracle {
 public:
  explicit FixtureOracle(const std::string& path) : path_(path) {
    const auto csv = io::readKeyedCsv(path);
    if (csv.header.size() != 2) throw FixtureError(path + ": expected columns sequence,value");
    for (const auto& [key, values] : csv.rows) values_.emplace(key, values[0]);
  }

  double operator()(const Sequence& seq) const override {
    auto it = values_.find(seq.str());
    if (it == values_.end()) throw FixtureError(path_ + ": fixture does not cover sequence " + seq.str());
    return it->second;
  }

  std::string describe() const override { return "fixture(" + path_ + ")"; }

 private:
  std::string path_;
  std::unordered_map<std::string, double> values_;
};

}  // namespace abbo
