#pragma once

// Per-sequence feature providers (embeddings, aligned alpha-carbon
// coordinates), parental structure context for the Kermut kernel, and rigid
// superposition / RMSD.

#include <Eigen/Dense>
#include <Eigen/SVD>

#include <atomic>
#include <cmath>
#include <cstdint>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "abbo/error.hpp"
#include "abbo/hashing.hpp"
#include "abbo/io.hpp"
#include "abbo/seqcore.hpp"

namespace abbo {

struct AlignResult {
  Eigen::VectorXd aligned;  // mobile after superposition, flattened xyz
  Eigen::Matrix3d rotation = Eigen::Matrix3d::Identity();
  Eigen::Vector3d translation = Eigen::Vector3d::Zero();
  double rmsd = 0.0;
};

namespace detail {
inline Eigen::Matrix3Xd asPoints(const Eigen::VectorXd& flat) {
  return Eigen::Map<const Eigen::Matrix3Xd>(flat.data(), 3, flat.size() / 3);
}

inline bool degenerate(const Eigen::Matrix3Xd& centered) {
  Eigen::JacobiSVD<Eigen::Matrix3Xd> svd(centered);
  const auto s = svd.singularValues();
  return s[0] <= 1e-12 || s[1] <= 1e-9 * s[0];
}
}  // namespace detail

/// Root-mean-square deviation without any superposition.
inline double rmsd(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  if (a.size() != b.size() || a.size() % 3 != 0) throw InvalidArgument("rmsd: shape mismatch");
  if (a.size() == 0) return 0.0;
  return std::sqrt((a - b).squaredNorm() / static_cast<double>(a.size() / 3));
}

/// Optimal rigid superposition of `mobile` onto `reference` (Kabsch, proper
/// rotations only). Both are flattened x0,y0,z0,x1,... coordinate vectors.
inline AlignResult align(const Eigen::VectorXd& mobile, const Eigen::VectorXd& reference) {
  if (mobile.size() != reference.size() || mobile.size() % 3 != 0) {
    throw InvalidArgument("align: coordinate length mismatch");
  }
  if (mobile.size() < 9) throw InvalidArgument("align: need at least 3 points");
  const Eigen::Matrix3Xd p = detail::asPoints(mobile);
  const Eigen::Matrix3Xd q = detail::asPoints(reference);
  const Eigen::Vector3d pc = p.rowwise().mean();
  const Eigen::Vector3d qc = q.rowwise().mean();
  const Eigen::Matrix3Xd p0 = p.colwise() - pc;
  const Eigen::Matrix3Xd q0 = q.colwise() - qc;
  if (detail::degenerate(p0) || detail::degenerate(q0)) {
    throw InvalidArgument("align: degenerate (collinear) point set");
  }
  if (mobile == reference) {
    AlignResult same;
    same.aligned = mobile;
    return same;
  }

  const Eigen::Matrix3d h = p0 * q0.transpose();
  Eigen::JacobiSVD<Eigen::Matrix3d> svd(h, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Eigen::Matrix3d d = Eigen::Matrix3d::Identity();
  if ((svd.matrixV() * svd.matrixU().transpose()).determinant() < 0) d(2, 2) = -1.0;

  AlignResult out;
  out.rotation = svd.matrixV() * d * svd.matrixU().transpose();
  out.translation = qc - out.rotation * pc;
  Eigen::Matrix3Xd moved = (out.rotation * p).colwise() + out.translation;
  out.aligned = Eigen::Map<const Eigen::VectorXd>(moved.data(), moved.size());
  out.rmsd = rmsd(out.aligned, reference);
  return out;
}

/// Parental inputs for the Kermut structure kernel.
struct StructureContext {
  Sequence parental;
  Eigen::MatrixXd siteProbs;  // L x 20, rows on the simplex, kAlphabet column order
  Eigen::MatrixXd distances;  // L x L, Angstrom
  Eigen::VectorXd parentalCoords;

  std::size_t length() const noexcept { return parental.size(); }

  /// Throws FixtureError naming the first violated invariant.
  void validate() const {
    const auto n = static_cast<Eigen::Index>(parental.size());
    if (siteProbs.rows() != n || siteProbs.cols() != static_cast<Eigen::Index>(kAlphabetSize)) {
      throw FixtureError("site probabilities must be L x 20 (L = " + std::to_string(n) + ")");
    }
    for (Eigen::Index i = 0; i < n; ++i) {
      if ((siteProbs.row(i).array() < 0.0).any() || !siteProbs.row(i).allFinite()) {
        throw FixtureError("site probability row " + std::to_string(i) + " has negative entries");
      }
      const double s = siteProbs.row(i).sum();
      if (std::abs(s - 1.0) > 1e-9) {
        throw FixtureError("site probability row " + std::to_string(i) + " sums to " +
                           io::fmt(s) + ", expected 1");
      }
    }
    if (distances.rows() != n || distances.cols() != n) {
      throw FixtureError("distance matrix must be L x L (L = " + std::to_string(n) + ")");
    }
    for (Eigen::Index i = 0; i < n; ++i) {
      if (distances(i, i) != 0.0) throw FixtureError("distance matrix diagonal must be zero");
      for (Eigen::Index j = 0; j < n; ++j) {
        if (distances(i, j) < 0.0 || distances(i, j) != distances(j, i)) {
          throw FixtureError("distance matrix must be symmetric and nonnegative");
        }
      }
    }
    if (parentalCoords.size() != 0 && parentalCoords.size() != 3 * n) {
      throw FixtureError("parental coordinates must have 3L entries");
    }
  }
};

inline Eigen::MatrixXd pairwiseDistances(const Eigen::VectorXd& coords) {
  const Eigen::Matrix3Xd p = detail::asPoints(coords);
  const Eigen::Index n = p.cols();
  Eigen::MatrixXd d = Eigen::MatrixXd::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = i + 1; j < n; ++j) d(i, j) = d(j, i) = (p.col(i) - p.col(j)).norm();
  return d;
}

/// Loads an L x 20 probability table (tab separated); shared by the
/// site-probability and PSSM fixtures.
inline Eigen::MatrixXd loadProbabilityTable(const std::string& path, std::size_t length) {
  const auto rows = io::readNumericTable(path);
  if (rows.size() != length) {
    throw FixtureError(path + ": expected " + std::to_string(length) + " rows, got " +
                       std::to_string(rows.size()));
  }
  Eigen::MatrixXd m(static_cast<Eigen::Index>(length), static_cast<Eigen::Index>(kAlphabetSize));
  for (std::size_t i = 0; i < length; ++i) {
    if (rows[i].size() != kAlphabetSize) {
      throw FixtureError(path + ": row " + std::to_string(i) + " must have 20 probabilities");
    }
    double sum = 0.0;
    for (std::size_t a = 0; a < kAlphabetSize; ++a) {
      if (rows[i][a] < 0.0) throw FixtureError(path + ": negative probability in row " + std::to_string(i));
      m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(a)) = rows[i][a];
      sum += rows[i][a];
    }
    if (std::abs(sum - 1.0) > 1e-9) {
      throw FixtureError(path + ": row " + std::to_string(i) + " sums to " + io::fmt(sum) +
                         ", expected 1");
    }
  }
  return m;
}

inline Eigen::MatrixXd loadDistanceMatrix(const std::string& path, std::size_t length) {
  const auto rows = io::readNumericTable(path);
  if (rows.size() != length) throw FixtureError(path + ": distance matrix must have L rows");
  const auto n = static_cast<Eigen::Index>(length);
  Eigen::MatrixXd d(n, n);
  for (std::size_t i = 0; i < length; ++i) {
    if (rows[i].size() != length) throw FixtureError(path + ": distance matrix must be L x L");
    for (std::size_t j = 0; j < length; ++j) {
      d(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
    }
  }
  return d;
}

/// Softmax over substitution-matrix similarity to the parental residue at each
/// site. Stands in for inverse-folding site distributions.
inline Eigen::MatrixXd similaritySiteProbs(const Sequence& parental, const EncodingMatrix& blosum,
                                           double temperature) {
  const auto n = static_cast<Eigen::Index>(parental.size());
  Eigen::MatrixXd probs(n, static_cast<Eigen::Index>(kAlphabetSize));
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& row = blosum.row(parental[static_cast<std::size_t>(i)]);
    double maxv = row[0];
    for (double v : row) maxv = std::max(maxv, v);
    double z = 0.0;
    for (std::size_t a = 0; a < kAlphabetSize; ++a) {
      z += probs(i, static_cast<Eigen::Index>(a)) = std::exp((row[a] - maxv) / temperature);
    }
    probs.row(i) /= z;
  }
  return probs;
}

struct FeatureBundle {
  std::optional<Eigen::VectorXd> embedding;
  std::optional<Eigen::VectorXd> coords;  // aligned to the parental reference

  friend bool operator==(const FeatureBundle& a, const FeatureBundle& b) {
    auto same = [](const std::optional<Eigen::VectorXd>& x, const std::optional<Eigen::VectorXd>& y) {
      if (x.has_value() != y.has_value()) return false;
      return !x || (x->size() == y->size() && *x == *y);
    };
    return same(a.embedding, b.embedding) && same(a.coords, b.coords);
  }
};

/// Inverse-folding source used to build a StructureContext. The antibody
/// flavour stands in for an antibody-specific inverse-folding model.
enum class ContextFlavor { kGeneral, kAntibody };

/// Cached, deterministic source of per-sequence features. Thread-safe.
class FeatureProvider {
 public:
  explicit FeatureProvider(Sequence parental) : parental_(std::move(parental)) {}
  virtual ~FeatureProvider() = default;
  FeatureProvider(const FeatureProvider&) = delete;
  FeatureProvider& operator=(const FeatureProvider&) = delete;

  const Sequence& parental() const noexcept { return parental_; }

  FeatureBundle getFeatures(const Sequence& seq) const {
    if (seq.size() != parental_.size()) {
      throw InvalidArgument("feature request for a sequence of length " +
                            std::to_string(seq.size()) + ", campaign length is " +
                            std::to_string(parental_.size()));
    }
    {
      std::lock_guard lock(mutex_);
      if (auto it = cache_.find(seq); it != cache_.end()) return it->second;
    }
    FeatureBundle bundle = compute(seq);
    computations_.fetch_add(1, std::memory_order_relaxed);
    std::lock_guard lock(mutex_);
    return cache_.emplace(seq, std::move(bundle)).first->second;
  }

  /// Number of uncached feature computations performed so far.
  std::size_t computations() const noexcept { return computations_.load(); }

  virtual StructureContext getStructureContext(ContextFlavor flavor = ContextFlavor::kGeneral) const = 0;
  virtual Eigen::VectorXd parentalCoords() const = 0;
  virtual bool hasEmbeddings() const = 0;
  virtual bool hasCoords() const = 0;

 protected:
  virtual FeatureBundle compute(const Sequence& seq) const = 0;

  Sequence parental_;

 private:
  mutable std::mutex mutex_;
  mutable std::unordered_map<Sequence, FeatureBundle, SequenceHash> cache_;
  mutable std::atomic<std::size_t> computations_{0};
};

/// Deterministic stand-ins for the embedding, folding and inverse-folding
/// models. Residue i sits on an ideal helix (radius 2.3 A, rise 1.5 A, 100
/// degree turn) and is displaced by at most 0.8 A by a hash of the residues at
/// i-1, i, i+1; embeddings are mean-pooled hashed per-position vectors.
class SyntheticFeatureProvider final : public FeatureProvider {
 public:
  static constexpr double kHelixRadius = 2.3;
  static constexpr double kHelixRise = 1.5;
  static constexpr double kHelixTurnDegrees = 100.0;
  static constexpr double kMaxOffset = 0.8;

  SyntheticFeatureProvider(Sequence parental, std::uint64_t seed, EncodingMatrix blosum,
                           std::size_t embeddingDim = 64)
      : FeatureProvider(std::move(parental)),
        seed_(seed),
        blosum_(std::move(blosum)),
        embeddingDim_(embeddingDim) {
    if (parental_.size() < 3) throw InvalidArgument("synthetic structures need L >= 3");
    parentalCoords_ = rawCoords(parental_);
  }

  /// Generator output before superposition onto the parental structure.
  Eigen::VectorXd rawCoords(const Sequence& seq) const {
    const std::size_t n = seq.size();
    Eigen::VectorXd out(static_cast<Eigen::Index>(3 * n));
    constexpr double kTurn = kHelixTurnDegrees * 3.14159265358979323846 / 180.0;
    constexpr double kWeights[3] = {0.25, 0.5, 0.25};
    for (std::size_t i = 0; i < n; ++i) {
      Eigen::Vector3d pos(kHelixRadius * std::cos(kTurn * static_cast<double>(i)),
                          kHelixRadius * std::sin(kTurn * static_cast<double>(i)),
                          kHelixRise * static_cast<double>(i));
      for (int k = -1; k <= 1; ++k) {
        const auto j = static_cast<long long>(i) + k;
        if (j < 0 || j >= static_cast<long long>(n)) continue;
        pos += kWeights[k + 1] * siteOffset(static_cast<std::size_t>(j), seq[static_cast<std::size_t>(j)]);
      }
      out.segment<3>(static_cast<Eigen::Index>(3 * i)) = pos;
    }
    return out;
  }

  StructureContext getStructureContext(ContextFlavor flavor) const override {
    StructureContext ctx;
    ctx.parental = parental_;
    ctx.siteProbs = similaritySiteProbs(parental_, blosum_, flavor == ContextFlavor::kGeneral ? 1.0 : 1.5);
    ctx.parentalCoords = parentalCoords_;
    ctx.distances = pairwiseDistances(parentalCoords_);
    ctx.validate();
    return ctx;
  }

  Eigen::VectorXd parentalCoords() const override { return parentalCoords_; }
  bool hasEmbeddings() const override { return true; }
  bool hasCoords() const override { return true; }
  std::size_t embeddingDim() const noexcept { return embeddingDim_; }

 protected:
  FeatureBundle compute(const Sequence& seq) const override {
    FeatureBundle b;
    Eigen::VectorXd emb = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(embeddingDim_));
    for (std::size_t i = 0; i < seq.size(); ++i) {
      for (std::size_t k = 0; k < embeddingDim_; ++k) {
        emb[static_cast<Eigen::Index>(k)] +=
            hashNormal(hashKey({seed_, 0xE3BULL, i, static_cast<std::uint64_t>(seq.index(i)), k}));
      }
    }
    b.embedding = emb / static_cast<double>(seq.size());
    b.coords = seq == parental_ ? parentalCoords_ : align(rawCoords(seq), parentalCoords_).aligned;
    return b;
  }

 private:
  // Norm is at most kMaxOffset: each component lies in [-1, 1) before scaling.
  Eigen::Vector3d siteOffset(std::size_t position, char residue) const {
    const auto r = static_cast<std::uint64_t>(residueIndex(residue));
    Eigen::Vector3d v;
    for (int c = 0; c < 3; ++c) v[c] = hashSigned(hashKey({seed_, 0xC0DULL, position, r, static_cast<std::uint64_t>(c)}));
    return v * (kMaxOffset / std::sqrt(3.0));
  }

  std::uint64_t seed_;
  EncodingMatrix blosum_;
  std::size_t embeddingDim_;
  Eigen::VectorXd parentalCoords_;
};

/// Fixture-backed provider: exact sequence lookup in CSV tables. Coordinates
/// are superposed onto the parental entry of the coordinate table.
class FixtureFeatureProvider final : public FeatureProvider {
 public:
  struct Paths {
    std::string embeddings;   // sequence,e0,e1,...
    std::string coords;       // sequence,x0,y0,z0,...
    std::string siteProbs;    // L rows x 20
    std::string abSiteProbs;  // optional antibody-specific table
    std::string distances;    // L x L
  };

  FixtureFeatureProvider(Sequence parental, Paths paths)
      : FeatureProvider(std::move(parental)), paths_(std::move(paths)) {
    if (!paths_.embeddings.empty()) embeddings_ = loadTable(paths_.embeddings, 0);
    if (!paths_.coords.empty()) {
      coords_ = loadTable(paths_.coords, 3 * parental_.size());
      auto it = coords_.find(parental_.str());
      if (it == coords_.end()) {
        throw FixtureError(paths_.coords + ": parental sequence missing from coordinate fixture");
      }
      parentalCoords_ = it->second;
    }
  }

  StructureContext getStructureContext(ContextFlavor flavor) const override {
    const std::string& probsPath =
        flavor == ContextFlavor::kAntibody && !paths_.abSiteProbs.empty() ? paths_.abSiteProbs
                                                                          : paths_.siteProbs;
    if (probsPath.empty() || paths_.distances.empty()) {
      throw FixtureError("structure context requires site probability and distance fixtures");
    }
    StructureContext ctx;
    ctx.parental = parental_;
    ctx.siteProbs = loadProbabilityTable(probsPath, parental_.size());
    ctx.distances = loadDistanceMatrix(paths_.distances, parental_.size());
    ctx.parentalCoords = parentalCoords_;
    ctx.validate();
    return ctx;
  }

  Eigen::VectorXd parentalCoords() const override {
    if (parentalCoords_.size() == 0) throw FixtureError("no coordinate fixture configured");
    return parentalCoords_;
  }
  bool hasEmbeddings() const override { return !embeddings_.empty(); }
  bool hasCoords() const override { return !coords_.empty(); }

 protected:
  FeatureBundle compute(const Sequence& seq) const override {
    FeatureBundle b;
    if (!embeddings_.empty()) b.embedding = lookup(embeddings_, seq, paths_.embeddings);
    if (!coords_.empty()) {
      b.coords = align(lookup(coords_, seq, paths_.coords), parentalCoords_).aligned;
    }
    return b;
  }

 private:
  using Table = std::unordered_map<std::string, Eigen::VectorXd>;

  static Table loadTable(const std::string& path, std::size_t expectedDim) {
    const auto csv = io::readKeyedCsv(path);
    const std::size_t dim = csv.header.size() - 1;
    if (expectedDim != 0 && dim != expectedDim) {
      throw FixtureError(path + ": expected " + std::to_string(expectedDim) + " value columns, got " +
                         std::to_string(dim));
    }
    Table t;
    for (const auto& [key, values] : csv.rows) {
      t.emplace(key, Eigen::Map<const Eigen::VectorXd>(values.data(), static_cast<Eigen::Index>(values.size())));
    }
    return t;
  }

  static Eigen::VectorXd lookup(const Table& t, const Sequence& seq, const std::string& path) {
    auto it = t.find(seq.str());
    if (it == t.end()) {
      throw FixtureError(path + ": fixture does not cover sequence " + seq.str());
    }
    return it->second;
  }

  Paths paths_;
  Table embeddings_;
  Table coords_;
  Eigen::VectorXd parentalCoords_;
};

struct RmsdSummary {
  double mean = 0.0;
  double max = 0.0;
};

/// Mean and max RMSD of the provider's aligned coordinates against the
/// parental coordinates.
inline RmsdSummary rmsdToParental(const std::vector<Sequence>& batch, const FeatureProvider& provider) {
  RmsdSummary s;
  if (batch.empty()) return s;
  const Eigen::VectorXd ref = provider.parentalCoords();
  double total = 0.0;
  for (const auto& seq : batch) {
    const auto f = provider.getFeatures(seq);
    if (!f.coords) throw FixtureError("no coordinates available for " + seq.str());
    const double r = align(*f.coords, ref).rmsd;
    total += r;
    s.max = std::max(s.max, r);
  }
  s.mean = total / static_cast<double>(batch.size());
  return s;
}

}  // namespace abbo
