#pragma once

// Registry of surrogate-model recipes and the featurizer that turns sequences
// into kernel inputs for a given recipe.

#include <Eigen/Core>

#include <algorithm>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "abbo/error.hpp"
#include "abbo/features.hpp"
#include "abbo/gp.hpp"
#include "abbo/kernels.hpp"
#include "abbo/plm.hpp"
#include "abbo/seqcore.hpp"

namespace abbo {

enum class MeanSource { kConstant, kGeneralPlm, kAntibodyPlm };
enum class SeqRep { kNone, kOneHot, kBlosum, kEmbedding };
enum class StructInput { kNone, kCoords, kComposite, kCompositeAntibody };
enum class Combination { kNone, kSum, kConcat };

struct MethodSpec {
  std::string name;
  MeanSource mean = MeanSource::kConstant;
  SeqRep seqRep = SeqRep::kNone;
  StructInput structure = StructInput::kNone;
  Combination combination = Combination::kNone;
  bool constrained = false;
  bool random = false;  // acquisition ignores the model

  bool needsEmbedding() const {
    return seqRep == SeqRep::kEmbedding;
  }
  bool needsCoords() const { return structure == StructInput::kCoords; }
  bool needsContext() const {
    return structure == StructInput::kComposite || structure == StructInput::kCompositeAntibody;
  }
};

namespace detail {
inline std::vector<MethodSpec> baseMethods() {
  using M = MethodSpec;
  return {
      M{"OneHot-T", MeanSource::kConstant, SeqRep::kOneHot, StructInput::kNone, Combination::kNone},
      M{"BLO-T", MeanSource::kConstant, SeqRep::kBlosum, StructInput::kNone, Combination::kNone},
      M{"ESM-M", MeanSource::kConstant, SeqRep::kEmbedding, StructInput::kNone, Combination::kNone},
      M{"IgFold-M", MeanSource::kConstant, SeqRep::kNone, StructInput::kCoords, Combination::kNone},
      M{"IgFold-ESM-M", MeanSource::kConstant, SeqRep::kEmbedding, StructInput::kCoords, Combination::kConcat},
      M{"IgFold-BLO-T", MeanSource::kConstant, SeqRep::kBlosum, StructInput::kCoords, Combination::kSum},
      M{"Kermut-T", MeanSource::kGeneralPlm, SeqRep::kOneHot, StructInput::kComposite, Combination::kSum},
      M{"AbMPNN-Kermut-T", MeanSource::kGeneralPlm, SeqRep::kOneHot, StructInput::kCompositeAntibody,
        Combination::kSum},
      M{"Const-Kermut-T", MeanSource::kConstant, SeqRep::kOneHot, StructInput::kComposite, Combination::kSum},
      M{"AbSeq-Kermut-T", MeanSource::kAntibodyPlm, SeqRep::kOneHot, StructInput::kComposite, Combination::kSum},
      M{"Kermut-BLO-T", MeanSource::kGeneralPlm, SeqRep::kBlosum, StructInput::kComposite, Combination::kSum},
      M{"AbBoth-Kermut-BLO-T", MeanSource::kAntibodyPlm, SeqRep::kBlosum, StructInput::kCompositeAntibody,
        Combination::kSum},
  };
}
}  // namespace detail

/// Every base recipe, each followed by its "C-" soft-constrained twin, plus
/// the model-free "Random" baseline.
inline const std::vector<MethodSpec>& methodRegistry() {
  static const std::vector<MethodSpec> registry = [] {
    std::vector<MethodSpec> out;
    for (const auto& m : detail::baseMethods()) {
      out.push_back(m);
      MethodSpec c = m;
      c.name = "C-" + m.name;
      c.constrained = true;
      out.push_back(std::move(c));
    }
    MethodSpec random;
    random.name = "Random";
    random.random = true;
    out.push_back(random);
    return out;
  }();
  return registry;
}

inline std::optional<MethodSpec> findMethod(std::string_view name) {
  for (const auto& m : methodRegistry())
    if (m.name == name) return m;
  return std::nullopt;
}

inline const MethodSpec& requireMethod(std::string_view name) {
  for (const auto& m : methodRegistry())
    if (m.name == name) return m;
  throw ConfigError("unknown method '" + std::string(name) + "'");
}

/// Shared read-only resources a method draws on.
struct ModelResources {
  Sequence parental;
  EncodingMatrix oneHot = EncodingMatrix::oneHot();
  std::shared_ptr<const EncodingMatrix> blosum;
  std::shared_ptr<const FeatureProvider> features;
  std::shared_ptr<const StructureContext> generalContext;
  std::shared_ptr<const StructureContext> antibodyContext;
  std::shared_ptr<const Eigen::MatrixXd> generalLogProbs;   // zero-shot table, general pLM
  std::shared_ptr<const Eigen::MatrixXd> antibodyLogProbs;  // zero-shot table, antibody pLM
};

/// Builds kernel inputs for one method. Only the channels the method reads
/// are populated.
class Featurizer {
 public:
  Featurizer(MethodSpec method, std::shared_ptr<const ModelResources> res)
      : method_(std::move(method)), res_(std::move(res)) {
    if (!res_) throw InvalidArgument("featurizer: missing resources");
    if (usesBlosum() && !res_->blosum) throw ConfigError(method_.name + " needs a BLOSUM-62 encoding");
    if ((method_.needsEmbedding() || method_.needsCoords()) && !res_->features) {
      throw ConfigError(method_.name + " needs a feature provider");
    }
    if (method_.needsEmbedding() && !res_->features->hasEmbeddings()) {
      throw ConfigError(method_.name + " needs embeddings, which the feature provider lacks");
    }
    if (method_.needsCoords() && !res_->features->hasCoords()) {
      throw ConfigError(method_.name + " needs coordinates, which the feature provider lacks");
    }
    if (logProbs() == nullptr && method_.mean != MeanSource::kConstant) {
      throw ConfigError(method_.name + " needs a zero-shot log-probability table");
    }
  }

  const MethodSpec& method() const noexcept { return method_; }

  Point operator()(const Sequence& seq) const {
    Point p;
    p.sequence = seq;
    p.mutations = diff(res_->parental, seq);
    if (method_.seqRep == SeqRep::kOneHot) {
      p.channels[static_cast<std::size_t>(Channel::kOneHot)] = encode(seq, res_->oneHot);
    }
    if (usesBlosum()) p.channels[static_cast<std::size_t>(Channel::kBlosum)] = encode(seq, *res_->blosum);
    if (method_.needsEmbedding() || method_.needsCoords()) {
      const FeatureBundle b = res_->features->getFeatures(seq);
      if (method_.combination == Combination::kConcat) {
        Eigen::VectorXd cat(b.embedding->size() + b.coords->size());
        cat << *b.embedding, *b.coords;
        p.channels[static_cast<std::size_t>(Channel::kEmbeddingCoords)] = std::move(cat);
      } else {
        if (method_.needsEmbedding()) p.channels[static_cast<std::size_t>(Channel::kEmbedding)] = *b.embedding;
        if (method_.needsCoords()) p.channels[static_cast<std::size_t>(Channel::kCoords)] = *b.coords;
      }
    }
    if (const auto* table = logProbs()) p.zeroShot = zeroShotScore(*table, p.mutations);
    return p;
  }

  std::vector<Point> operator()(std::span<const Sequence> seqs) const {
    std::vector<Point> out;
    out.reserve(seqs.size());
    for (const auto& s : seqs) out.push_back((*this)(s));
    return out;
  }

 private:
  bool usesBlosum() const { return method_.seqRep == SeqRep::kBlosum; }

  const Eigen::MatrixXd* logProbs() const {
    switch (method_.mean) {
      case MeanSource::kGeneralPlm: return res_->generalLogProbs.get();
      case MeanSource::kAntibodyPlm: return res_->antibodyLogProbs.get();
      case MeanSource::kConstant: return nullptr;
    }
    return nullptr;
  }

  MethodSpec method_;
  std::shared_ptr<const ModelResources> res_;
};

namespace detail {
// Inside a sum or a Kermut composite the outer weights carry the scale.
inline std::unique_ptr<Kernel> unitVariance(std::unique_ptr<Kernel> k) {
  auto params = k->parameters();
  params.front()->value = 1.0;
  params.front()->fixed = true;
  return k;
}

inline Channel seqChannel(SeqRep r) {
  switch (r) {
    case SeqRep::kOneHot: return Channel::kOneHot;
    case SeqRep::kBlosum: return Channel::kBlosum;
    case SeqRep::kEmbedding: return Channel::kEmbedding;
    case SeqRep::kNone: break;
  }
  throw InvalidArgument("method has no sequence representation");
}
}  // namespace detail

/// Untrained surrogate for `method`; fitting happens per round.
inline GaussianProcess buildModel(const MethodSpec& method, const ModelResources& res, double noise = 0.1) {
  if (method.random) throw InvalidArgument("the Random baseline has no surrogate model");
  std::unique_ptr<Kernel> kernel;
  if (method.needsContext()) {
    auto ctx = method.structure == StructInput::kCompositeAntibody ? res.antibodyContext : res.generalContext;
    if (!ctx) throw ConfigError(method.name + " needs a structure context");
    auto seq = detail::unitVariance(std::make_unique<TanimotoKernel>(detail::seqChannel(method.seqRep)));
    kernel = std::make_unique<KermutKernel>(std::move(ctx), std::move(seq));
  } else if (method.combination == Combination::kConcat) {
    kernel = std::make_unique<Matern52Kernel>(Channel::kEmbeddingCoords);
  } else if (method.combination == Combination::kSum) {
    std::vector<std::unique_ptr<Kernel>> children;
    children.push_back(detail::unitVariance(std::make_unique<TanimotoKernel>(detail::seqChannel(method.seqRep))));
    children.push_back(detail::unitVariance(std::make_unique<Matern52Kernel>(Channel::kCoords)));
    kernel = std::make_unique<SumKernel>(std::move(children), std::vector<double>{0.5, 0.5});
  } else if (method.structure == StructInput::kCoords) {
    kernel = std::make_unique<Matern52Kernel>(Channel::kCoords);
  } else if (method.seqRep == SeqRep::kEmbedding) {
    kernel = std::make_unique<Matern52Kernel>(Channel::kEmbedding);
  } else {
    kernel = std::make_unique<TanimotoKernel>(detail::seqChannel(method.seqRep));
  }
  const MeanKind mean = method.mean == MeanSource::kConstant ? MeanKind::kConstant : MeanKind::kAffine;
  return GaussianProcess(std::move(kernel), mean, noise);
}

}  // namespace abbo
