#pragma once

// Positive-semidefinite kernels over featurized sequences: Tanimoto,
// Matern-5/2, squared-exponential, weighted sum / product combinators and the
// Kermut structure-sequence composite. All kernels report Gram derivatives with
// respect to their hyperparameters in unconstrained ("raw") coordinates.

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <cstring>
#include <memory>
#include <mutex>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "abbo/error.hpp"
#include "abbo/features.hpp"
#include "abbo/hashing.hpp"
#include "abbo/seqcore.hpp"

namespace abbo {

/// Feature channel a vector kernel reads from a Point.
enum class Channel { kOneHot = 0, kBlosum, kEmbedding, kCoords, kEmbeddingCoords };
inline constexpr std::size_t kNumChannels = 5;

inline const char* channelName(Channel c) {
  switch (c) {
    case Channel::kOneHot: return "onehot";
    case Channel::kBlosum: return "blosum";
    case Channel::kEmbedding: return "embedding";
    case Channel::kCoords: return "coords";
    case Channel::kEmbeddingCoords: return "embedding+coords";
  }
  return "?";
}

/// A sequence together with everything any kernel or prior mean may read.
struct Point {
  Sequence sequence;
  MutationSet mutations;  // against the campaign parental
  std::array<Eigen::VectorXd, kNumChannels> channels;
  double zeroShot = 0.0;

  const Eigen::VectorXd& channel(Channel c) const {
    const auto& v = channels[static_cast<std::size_t>(c)];
    if (v.size() == 0 && !sequence.empty()) {
      throw InvalidArgument(std::string("feature channel '") + channelName(c) + "' not populated");
    }
    return v;
  }
};

enum class Transform { kLog, kLogit, kIdentity };

/// Named scalar hyperparameter. `lower`/`upper` bound the value; the optimizer
/// works on raw() = log(value), logit(value) or value.
struct Hyperparameter {
  std::string name;
  double value = 1.0;
  double lower = 1e-3;
  double upper = 1e3;
  Transform transform = Transform::kLog;
  bool fixed = false;

  static double logit(double p) { return std::log(p / (1.0 - p)); }
  static double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

  double toRaw(double v) const {
    switch (transform) {
      case Transform::kLog: return std::log(v);
      case Transform::kLogit: return logit(v);
      case Transform::kIdentity: return v;
    }
    return v;
  }
  double fromRaw(double r) const {
    switch (transform) {
      case Transform::kLog: return std::exp(r);
      case Transform::kLogit: return sigmoid(r);
      case Transform::kIdentity: return r;
    }
    return r;
  }
  double raw() const { return toRaw(value); }
  void setRaw(double r) { value = fromRaw(r); }
  double rawLower() const { return toRaw(lower); }
  double rawUpper() const { return toRaw(upper); }
  /// d value / d raw at the current value.
  double jacobian() const {
    switch (transform) {
      case Transform::kLog: return value;
      case Transform::kLogit: return value * (1.0 - value);
      case Transform::kIdentity: return 1.0;
    }
    return 1.0;
  }
};

inline Hyperparameter positiveParam(std::string name, double value, double lower = 1e-3,
                                    double upper = 1e3) {
  if (!(value > 0.0)) throw InvalidArgument("hyperparameter '" + name + "' must be positive");
  return Hyperparameter{std::move(name), value, lower, upper, Transform::kLog, false};
}

inline Hyperparameter fractionParam(std::string name, double value) {
  if (!(value > 0.0 && value < 1.0)) {
    throw InvalidArgument("hyperparameter '" + name + "' must lie strictly inside (0, 1)");
  }
  return Hyperparameter{std::move(name), value, 1e-4, 1.0 - 1e-4, Transform::kLogit, false};
}

// ---------------------------------------------------------------------------
// Scalar kernel functions.

inline double tanimoto(const Eigen::VectorXd& u, const Eigen::VectorXd& v, double variance = 1.0) {
  if (u.size() != v.size()) throw InvalidArgument("tanimoto: dimension mismatch");
  const double uv = u.dot(v);
  const double denom = u.squaredNorm() + v.squaredNorm() - uv;
  if (denom == 0.0) throw InvalidArgument("tanimoto: undefined for two zero vectors");
  return variance * uv / denom;
}

inline double matern52FromDistance(double distance, double lengthscale, double variance) {
  if (!(lengthscale > 0.0)) throw InvalidArgument("matern52: lengthscale must be positive");
  const double s = std::sqrt(5.0) * distance / lengthscale;
  return variance * (1.0 + s + s * s / 3.0) * std::exp(-s);
}

inline double matern52(const Eigen::VectorXd& u, const Eigen::VectorXd& v, double lengthscale,
                       double variance = 1.0) {
  if (u.size() != v.size()) throw InvalidArgument("matern52: dimension mismatch");
  return matern52FromDistance((u - v).norm(), lengthscale, variance);
}

inline double sqexp(const Eigen::VectorXd& u, const Eigen::VectorXd& v, double lengthscale,
                    double variance = 1.0) {
  if (u.size() != v.size()) throw InvalidArgument("sqexp: dimension mismatch");
  if (!(lengthscale > 0.0)) throw InvalidArgument("sqexp: lengthscale must be positive");
  return variance * std::exp(-0.5 * (u - v).squaredNorm() / (lengthscale * lengthscale));
}

/// Hellinger distance in [0, 1]: (1/sqrt 2) * || sqrt p - sqrt q ||.
inline double hellinger(const Eigen::VectorXd& p, const Eigen::VectorXd& q) {
  return (p.array().sqrt() - q.array().sqrt()).matrix().norm() / std::sqrt(2.0);
}

namespace detail {
/// Orders a pair of mutation sets so the double sum runs in the same order
/// for (a, b) and (b, a); keeps the kernel exactly symmetric.
inline bool mutationSetLess(const MutationSet& a, const MutationSet& b) {
  return std::lexicographical_compare(
      a.entries().begin(), a.entries().end(), b.entries().begin(), b.entries().end(),
      [](const Mutation& x, const Mutation& y) {
        return x.position != y.position ? x.position < y.position : x.to < y.to;
      });
}
}  // namespace detail

struct KermutStructParams {
  double gammaH = 1.0;
  double gammaP = 1.0;
  double gammaD = 1.0;
  double lambda = 1.0;
};

/// Sum over mutated-site pairs of lambda * k_H * k_p * k_d.
inline double kermutStruct(const MutationSet& first, const MutationSet& second,
                           const StructureContext& ctx, const KermutStructParams& hp) {
  const bool swap = detail::mutationSetLess(second, first);
  const MutationSet& a = swap ? second : first;
  const MutationSet& b = swap ? first : second;
  if (a.parental() != ctx.parental || b.parental() != ctx.parental) {
    throw InvalidArgument("kermut: mutation sets do not share the context parental");
  }
  double total = 0.0;
  for (const auto& ma : a.entries()) {
    for (const auto& mb : b.entries()) {
      const auto i = static_cast<Eigen::Index>(ma.position);
      const auto j = static_cast<Eigen::Index>(mb.position);
      if (i >= ctx.siteProbs.rows() || j >= ctx.siteProbs.rows()) {
        throw InvalidArgument("kermut: position outside structure context");
      }
      const double h = hellinger(ctx.siteProbs.row(i).transpose(), ctx.siteProbs.row(j).transpose());
      const double pa = ctx.siteProbs(i, residueIndex(ma.to));
      const double pb = ctx.siteProbs(j, residueIndex(mb.to));
      total += hp.lambda * std::exp(-hp.gammaH * h) * std::exp(-hp.gammaP * std::abs(pa - pb)) *
               std::exp(-hp.gammaD * ctx.distances(i, j));
    }
  }
  return total;
}

/// Scaled composite: variance * (pi * struct + (1 - pi) * seq), struct with
/// lambda = 1.
inline double kermutComposite(double structValue, double seqValue, double variance, double pi) {
  if (!(pi > 0.0 && pi < 1.0)) throw InvalidArgument("kermut: pi must lie in (0, 1)");
  return variance * (pi * structValue + (1.0 - pi) * seqValue);
}

/// Kermut's original weighting: the signal variance scales only the structure
/// term, which also carries lambda; the sequence kernel has its own variance.
struct KermutOriginalParams {
  double signalVariance = 1.0;
  double pi = 0.5;
  double lambda = 1.0;
  double seqVariance = 1.0;
};

struct KermutScaledParams {
  double signalVariance = 1.0;
  double pi = 0.5;
};

inline double kermutOriginal(double structUnitLambda, double seqUnitVariance, const KermutOriginalParams& p) {
  return p.signalVariance * p.pi * p.lambda * structUnitLambda + (1.0 - p.pi) * p.seqVariance * seqUnitVariance;
}

inline KermutOriginalParams toOriginalParameterization(const KermutScaledParams& s) {
  return {s.signalVariance, s.pi, 1.0, s.signalVariance};
}

inline KermutScaledParams toScaledParameterization(const KermutOriginalParams& o) {
  const double structWeight = o.signalVariance * o.pi * o.lambda;
  const double seqWeight = (1.0 - o.pi) * o.seqVariance;
  const double variance = structWeight + seqWeight;
  return {variance, structWeight / variance};
}

// ---------------------------------------------------------------------------
// Kernel objects.

class Kernel {
 public:
  virtual ~Kernel() = default;

  virtual std::string describe() const = 0;
  virtual double operator()(const Point& a, const Point& b) const = 0;

  virtual Eigen::MatrixXd cross(std::span<const Point> a, std::span<const Point> b) const {
    Eigen::MatrixXd k(static_cast<Eigen::Index>(a.size()), static_cast<Eigen::Index>(b.size()));
    for (std::size_t i = 0; i < a.size(); ++i)
      for (std::size_t j = 0; j < b.size(); ++j)
        k(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = (*this)(a[i], b[j]);
    return k;
  }

  virtual Eigen::MatrixXd gram(std::span<const Point> x) const {
    const auto n = static_cast<Eigen::Index>(x.size());
    Eigen::MatrixXd k(n, n);
    for (Eigen::Index i = 0; i < n; ++i)
      for (Eigen::Index j = 0; j <= i; ++j) k(i, j) = k(j, i) = (*this)(x[i], x[j]);
    return k;
  }

  virtual Eigen::VectorXd diagonal(std::span<const Point> x) const {
    Eigen::VectorXd d(static_cast<Eigen::Index>(x.size()));
    for (std::size_t i = 0; i < x.size(); ++i) d[static_cast<Eigen::Index>(i)] = (*this)(x[i], x[i]);
    return d;
  }

  /// d gram / d raw(theta) for every entry of parameters(), same order.
  virtual std::vector<Eigen::MatrixXd> gramGradients(std::span<const Point> x) const = 0;

  /// Own hyperparameters first, then children's, depth first.
  virtual void collectParameters(std::vector<Hyperparameter*>& out) = 0;

  std::vector<Hyperparameter*> parameters() {
    std::vector<Hyperparameter*> out;
    collectParameters(out);
    return out;
  }
  std::vector<const Hyperparameter*> parameters() const {
    std::vector<Hyperparameter*> tmp;
    const_cast<Kernel*>(this)->collectParameters(tmp);
    return {tmp.begin(), tmp.end()};
  }

  virtual std::unique_ptr<Kernel> clone() const = 0;
};

namespace detail {
inline Eigen::MatrixXd stack(std::span<const Point> x, Channel c) {
  if (x.empty()) return {};
  const Eigen::Index d = x[0].channel(c).size();
  Eigen::MatrixXd m(static_cast<Eigen::Index>(x.size()), d);
  for (std::size_t i = 0; i < x.size(); ++i) {
    const auto& v = x[i].channel(c);
    if (v.size() != d) throw InvalidArgument(std::string("feature dimension mismatch on channel ") + channelName(c));
    m.row(static_cast<Eigen::Index>(i)) = v.transpose();
  }
  return m;
}

/// Content hash of a matrix (shape and every entry's bit pattern).
inline std::uint64_t fingerprint(const Eigen::MatrixXd& m) {
  std::uint64_t h = hashKey({static_cast<std::uint64_t>(m.rows()), static_cast<std::uint64_t>(m.cols())});
  for (Eigen::Index k = 0; k < m.size(); ++k) {
    std::uint64_t bits;
    std::memcpy(&bits, m.data() + k, sizeof bits);
    h = mix64(h ^ bits);
  }
  return h;
}

/// Remembers the last hyperparameter-free matrix a kernel derived from its
/// training inputs (inner products or squared distances), so repeated
/// likelihood evaluations during fitting skip the O(n^2 d) rebuild. Shared by
/// clones; keyed by content, so a stale entry can never be returned for
/// different inputs short of a 64-bit hash collision.
class MatrixCache {
 public:
  template <class Build>
  std::shared_ptr<const Eigen::MatrixXd> get(const Eigen::MatrixXd& input, Build&& build) {
    const std::uint64_t key = fingerprint(input);
    {
      std::lock_guard<std::mutex> lock(mutex_);
      if (value_ && key_ == key) return value_;
    }
    auto value = std::make_shared<const Eigen::MatrixXd>(build(input));
    std::lock_guard<std::mutex> lock(mutex_);
    key_ = key;
    value_ = value;
    return value;
  }

 private:
  std::mutex mutex_;
  std::uint64_t key_ = 0;
  std::shared_ptr<const Eigen::MatrixXd> value_;
};

inline Eigen::MatrixXd squaredDistances(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  if (a.cols() != b.cols()) throw InvalidArgument("feature dimension mismatch");
  if (b.rows() == 0 || a.rows() == 0) return Eigen::MatrixXd(a.rows(), b.rows());
  // Centering first limits cancellation in |a|^2 + |b|^2 - 2ab.
  const Eigen::RowVectorXd c = b.colwise().mean();
  const Eigen::MatrixXd ac = a.rowwise() - c, bc = b.rowwise() - c;
  Eigen::MatrixXd d = (-2.0 * ac * bc.transpose()).colwise() + ac.rowwise().squaredNorm();
  d.rowwise() += bc.rowwise().squaredNorm().transpose();
  return d.cwiseMax(0.0);
}

inline Eigen::MatrixXd symmetricSquaredDistances(const Eigen::MatrixXd& a) {
  Eigen::MatrixXd d = squaredDistances(a, a);
  d.diagonal().setZero();
  return 0.5 * (d + d.transpose());
}

inline Eigen::MatrixXd tanimotoFromInner(const Eigen::MatrixXd& inner, const Eigen::VectorXd& na,
                                         const Eigen::VectorXd& nb) {
  Eigen::MatrixXd k(inner.rows(), inner.cols());
  for (Eigen::Index j = 0; j < inner.cols(); ++j)
    for (Eigen::Index i = 0; i < inner.rows(); ++i) {
      const double denom = na[i] + nb[j] - inner(i, j);
      if (denom == 0.0) throw InvalidArgument("tanimoto: undefined for two zero vectors");
      k(i, j) = inner(i, j) / denom;
    }
  return k;
}
}  // namespace detail

/// variance * <u,v> / (|u|^2 + |v|^2 - <u,v>).
class TanimotoKernel final : public Kernel {
 public:
  explicit TanimotoKernel(Channel channel, double variance = 1.0)
      : channel_(channel), variance_(positiveParam("variance", variance, 1e-4, 1e3)) {}

  Hyperparameter& variance() { return variance_; }
  Channel channel() const { return channel_; }

  std::string describe() const override { return std::string("tanimoto(") + channelName(channel_) + ")"; }

  double operator()(const Point& a, const Point& b) const override {
    return tanimoto(a.channel(channel_), b.channel(channel_), variance_.value);
  }

  Eigen::MatrixXd cross(std::span<const Point> a, std::span<const Point> b) const override {
    const Eigen::MatrixXd xa = detail::stack(a, channel_), xb = detail::stack(b, channel_);
    if (xa.cols() != xb.cols()) throw InvalidArgument("feature dimension mismatch");
    return variance_.value * detail::tanimotoFromInner(xa * xb.transpose(), xa.rowwise().squaredNorm(),
                                                       xb.rowwise().squaredNorm());
  }

  Eigen::MatrixXd gram(std::span<const Point> x) const override { return variance_.value * unitGram(x); }

  Eigen::VectorXd diagonal(std::span<const Point> x) const override {
    return Eigen::VectorXd::Constant(static_cast<Eigen::Index>(x.size()), variance_.value);
  }

  std::vector<Eigen::MatrixXd> gramGradients(std::span<const Point> x) const override {
    return {gram(x)};
  }

  void collectParameters(std::vector<Hyperparameter*>& out) override { out.push_back(&variance_); }
  std::unique_ptr<Kernel> clone() const override { return std::make_unique<TanimotoKernel>(*this); }

 private:
  Eigen::MatrixXd unitGram(std::span<const Point> x) const {
    return *cache_->get(detail::stack(x, channel_), [](const Eigen::MatrixXd& m) {
      const Eigen::MatrixXd inner = m * m.transpose();
      const Eigen::VectorXd norms = inner.diagonal();
      Eigen::MatrixXd k = detail::tanimotoFromInner(inner, norms, norms);
      return Eigen::MatrixXd(0.5 * (k + k.transpose()));
    });
  }

  Channel channel_;
  Hyperparameter variance_;
  std::shared_ptr<detail::MatrixCache> cache_ = std::make_shared<detail::MatrixCache>();
};

/// Stationary kernel of the Euclidean distance with one shared lengthscale.
class StationaryKernel : public Kernel {
 public:
  StationaryKernel(Channel channel, double lengthscale, double variance)
      : channel_(channel),
        lengthscale_(positiveParam("lengthscale", lengthscale)),
        variance_(positiveParam("variance", variance, 1e-4, 1e3)) {}

  Hyperparameter& lengthscale() { return lengthscale_; }
  Hyperparameter& variance() { return variance_; }
  Channel channel() const { return channel_; }

  double operator()(const Point& a, const Point& b) const override {
    const auto& u = a.channel(channel_);
    const auto& v = b.channel(channel_);
    if (u.size() != v.size()) throw InvalidArgument("feature dimension mismatch");
    return variance_.value * profile((u - v).squaredNorm() / sq(lengthscale_.value));
  }

  Eigen::MatrixXd cross(std::span<const Point> a, std::span<const Point> b) const override {
    Eigen::MatrixXd d2 = detail::squaredDistances(detail::stack(a, channel_), detail::stack(b, channel_));
    return apply(d2 / sq(lengthscale_.value), false);
  }

  Eigen::MatrixXd gram(std::span<const Point> x) const override {
    return apply(*trainingDistances(x) / sq(lengthscale_.value), false);
  }

  Eigen::VectorXd diagonal(std::span<const Point> x) const override {
    return Eigen::VectorXd::Constant(static_cast<Eigen::Index>(x.size()), variance_.value);
  }

  std::vector<Eigen::MatrixXd> gramGradients(std::span<const Point> x) const override {
    const Eigen::MatrixXd r2 = *trainingDistances(x) / sq(lengthscale_.value);
    return {apply(r2, false), apply(r2, true)};
  }

  void collectParameters(std::vector<Hyperparameter*>& out) override {
    out.push_back(&variance_);
    out.push_back(&lengthscale_);
  }

 protected:
  /// Unit-variance kernel value as a function of r^2 = |u-v|^2 / l^2.
  virtual double profile(double r2) const = 0;
  /// d profile / d log(l) at r^2.
  virtual double profileLogLengthscaleDerivative(double r2) const = 0;

 private:
  static double sq(double v) { return v * v; }

  std::shared_ptr<const Eigen::MatrixXd> trainingDistances(std::span<const Point> x) const {
    return cache_->get(detail::stack(x, channel_),
                       [](const Eigen::MatrixXd& m) { return detail::symmetricSquaredDistances(m); });
  }

  Eigen::MatrixXd apply(const Eigen::MatrixXd& r2, bool derivative) const {
    Eigen::MatrixXd k(r2.rows(), r2.cols());
    for (Eigen::Index j = 0; j < r2.cols(); ++j)
      for (Eigen::Index i = 0; i < r2.rows(); ++i)
        k(i, j) = variance_.value *
                  (derivative ? profileLogLengthscaleDerivative(r2(i, j)) : profile(r2(i, j)));
    return k;
  }

  Channel channel_;
  Hyperparameter lengthscale_;
  Hyperparameter variance_;
  std::shared_ptr<detail::MatrixCache> cache_ = std::make_shared<detail::MatrixCache>();
};

/// variance * (1 + sqrt5 r + 5 r^2 / 3) exp(-sqrt5 r), r = |u - v| / l.
class Matern52Kernel final : public StationaryKernel {
 public:
  explicit Matern52Kernel(Channel channel, double lengthscale = 1.0, double variance = 1.0)
      : StationaryKernel(channel, lengthscale, variance) {}

  std::string describe() const override { return std::string("matern52(") + channelName(channel()) + ")"; }
  std::unique_ptr<Kernel> clone() const override { return std::make_unique<Matern52Kernel>(*this); }

 protected:
  double profile(double r2) const override {
    const double s = std::sqrt(5.0 * r2);
    return (1.0 + s + s * s / 3.0) * std::exp(-s);
  }
  double profileLogLengthscaleDerivative(double r2) const override {
    const double s = std::sqrt(5.0 * r2);
    return s * s / 3.0 * (1.0 + s) * std::exp(-s);
  }
};

/// variance * exp(-|u - v|^2 / (2 l^2)).
class SqExpKernel final : public StationaryKernel {
 public:
  explicit SqExpKernel(Channel channel, double lengthscale = 1.0, double variance = 1.0)
      : StationaryKernel(channel, lengthscale, variance) {}

  std::string describe() const override { return std::string("sqexp(") + channelName(channel()) + ")"; }
  std::unique_ptr<Kernel> clone() const override { return std::make_unique<SqExpKernel>(*this); }

 protected:
  double profile(double r2) const override { return std::exp(-0.5 * r2); }
  double profileLogLengthscaleDerivative(double r2) const override { return r2 * std::exp(-0.5 * r2); }
};

/// sum_c w_c k_c with positive weights.
class SumKernel final : public Kernel {
 public:
  SumKernel(std::vector<std::unique_ptr<Kernel>> children, std::vector<double> weights)
      : children_(std::move(children)) {
    if (children_.empty() || children_.size() != weights.size()) {
      throw InvalidArgument("sum kernel: need one weight per child");
    }
    for (std::size_t c = 0; c < weights.size(); ++c) {
      weights_.push_back(positiveParam("weight" + std::to_string(c), weights[c], 1e-4, 1e3));
    }
  }
  SumKernel(const SumKernel& other) : weights_(other.weights_) {
    for (const auto& c : other.children_) children_.push_back(c->clone());
  }

  Kernel& child(std::size_t c) { return *children_.at(c); }
  Hyperparameter& weight(std::size_t c) { return weights_.at(c); }

  std::string describe() const override {
    std::string s = "sum(";
    for (std::size_t c = 0; c < children_.size(); ++c) s += (c ? ", " : "") + children_[c]->describe();
    return s + ")";
  }

  double operator()(const Point& a, const Point& b) const override {
    double v = 0.0;
    for (std::size_t c = 0; c < children_.size(); ++c) v += weights_[c].value * (*children_[c])(a, b);
    return v;
  }
  Eigen::MatrixXd cross(std::span<const Point> a, std::span<const Point> b) const override {
    Eigen::MatrixXd k = weights_[0].value * children_[0]->cross(a, b);
    for (std::size_t c = 1; c < children_.size(); ++c) k += weights_[c].value * children_[c]->cross(a, b);
    return k;
  }
  Eigen::MatrixXd gram(std::span<const Point> x) const override {
    Eigen::MatrixXd k = weights_[0].value * children_[0]->gram(x);
    for (std::size_t c = 1; c < children_.size(); ++c) k += weights_[c].value * children_[c]->gram(x);
    return k;
  }
  Eigen::VectorXd diagonal(std::span<const Point> x) const override {
    Eigen::VectorXd d = weights_[0].value * children_[0]->diagonal(x);
    for (std::size_t c = 1; c < children_.size(); ++c) d += weights_[c].value * children_[c]->diagonal(x);
    return d;
  }

  std::vector<Eigen::MatrixXd> gramGradients(std::span<const Point> x) const override {
    std::vector<Eigen::MatrixXd> own, rest;
    for (std::size_t c = 0; c < children_.size(); ++c) {
      own.push_back(weights_[c].value * children_[c]->gram(x));
      for (auto& g : children_[c]->gramGradients(x)) rest.push_back(weights_[c].value * g);
    }
    own.insert(own.end(), std::make_move_iterator(rest.begin()), std::make_move_iterator(rest.end()));
    return own;
  }

  void collectParameters(std::vector<Hyperparameter*>& out) override {
    for (auto& w : weights_) out.push_back(&w);
    for (auto& c : children_) c->collectParameters(out);
  }
  std::unique_ptr<Kernel> clone() const override { return std::make_unique<SumKernel>(*this); }

 private:
  std::vector<std::unique_ptr<Kernel>> children_;
  std::vector<Hyperparameter> weights_;
};

/// prod_c k_c.
class ProductKernel final : public Kernel {
 public:
  explicit ProductKernel(std::vector<std::unique_ptr<Kernel>> children) : children_(std::move(children)) {
    if (children_.empty()) throw InvalidArgument("product kernel: no children");
  }
  ProductKernel(const ProductKernel& other) {
    for (const auto& c : other.children_) children_.push_back(c->clone());
  }

  std::string describe() const override {
    std::string s = "product(";
    for (std::size_t c = 0; c < children_.size(); ++c) s += (c ? ", " : "") + children_[c]->describe();
    return s + ")";
  }

  double operator()(const Point& a, const Point& b) const override {
    double v = 1.0;
    for (const auto& c : children_) v *= (*c)(a, b);
    return v;
  }
  Eigen::MatrixXd cross(std::span<const Point> a, std::span<const Point> b) const override {
    Eigen::MatrixXd k = children_[0]->cross(a, b);
    for (std::size_t c = 1; c < children_.size(); ++c) k = k.cwiseProduct(children_[c]->cross(a, b));
    return k;
  }
  Eigen::MatrixXd gram(std::span<const Point> x) const override {
    Eigen::MatrixXd k = children_[0]->gram(x);
    for (std::size_t c = 1; c < children_.size(); ++c) k = k.cwiseProduct(children_[c]->gram(x));
    return k;
  }

  std::vector<Eigen::MatrixXd> gramGradients(std::span<const Point> x) const override {
    std::vector<Eigen::MatrixXd> grams;
    for (const auto& c : children_) grams.push_back(c->gram(x));
    std::vector<Eigen::MatrixXd> out;
    for (std::size_t c = 0; c < children_.size(); ++c) {
      Eigen::MatrixXd others = Eigen::MatrixXd::Ones(grams[c].rows(), grams[c].cols());
      for (std::size_t o = 0; o < children_.size(); ++o)
        if (o != c) others = others.cwiseProduct(grams[o]);
      for (auto& g : children_[c]->gramGradients(x)) out.push_back(g.cwiseProduct(others));
    }
    return out;
  }

  void collectParameters(std::vector<Hyperparameter*>& out) override {
    for (auto& c : children_) c->collectParameters(out);
  }
  std::unique_ptr<Kernel> clone() const override { return std::make_unique<ProductKernel>(*this); }

 private:
  std::vector<std::unique_ptr<Kernel>> children_;
};

/// variance * (pi * k_struct + (1 - pi) * k_seq), with k_struct the
/// mutated-site double sum at lambda = 1 and k_seq a unit-variance child.
class KermutKernel final : public Kernel {
 public:
  KermutKernel(std::shared_ptr<const StructureContext> ctx, std::unique_ptr<Kernel> seqKernel,
               double variance = 1.0, double pi = 0.5, double gammaH = 1.0, double gammaP = 1.0,
               double gammaD = 0.1)
      : ctx_(std::move(ctx)),
        seq_(std::move(seqKernel)),
        variance_(positiveParam("variance", variance, 1e-4, 1e3)),
        pi_(fractionParam("pi", pi)),
        gammaH_(positiveParam("gamma_h", gammaH)),
        gammaP_(positiveParam("gamma_p", gammaP)),
        gammaD_(positiveParam("gamma_d", gammaD)) {
    if (!ctx_) throw InvalidArgument("kermut: missing structure context");
    ctx_->validate();
    const Eigen::Index n = static_cast<Eigen::Index>(ctx_->length());
    hellinger_.resize(n, n);
    for (Eigen::Index i = 0; i < n; ++i)
      for (Eigen::Index j = 0; j <= i; ++j)
        hellinger_(i, j) = hellinger_(j, i) =
            hellinger(ctx_->siteProbs.row(i).transpose(), ctx_->siteProbs.row(j).transpose());
  }
  KermutKernel(const KermutKernel& other)
      : ctx_(other.ctx_),
        seq_(other.seq_->clone()),
        variance_(other.variance_),
        pi_(other.pi_),
        gammaH_(other.gammaH_),
        gammaP_(other.gammaP_),
        gammaD_(other.gammaD_),
        hellinger_(other.hellinger_) {}

  Hyperparameter& variance() { return variance_; }
  Hyperparameter& pi() { return pi_; }
  Hyperparameter& gammaH() { return gammaH_; }
  Hyperparameter& gammaP() { return gammaP_; }
  Hyperparameter& gammaD() { return gammaD_; }
  Kernel& sequenceKernel() { return *seq_; }
  const StructureContext& context() const { return *ctx_; }

  KermutStructParams structParams() const {
    return {gammaH_.value, gammaP_.value, gammaD_.value, 1.0};
  }

  std::string describe() const override { return "kermut(" + seq_->describe() + ")"; }

  double structValue(const MutationSet& a, const MutationSet& b) const {
    return structTerms(a, b).value;
  }

  double operator()(const Point& a, const Point& b) const override {
    return kermutComposite(structValue(a.mutations, b.mutations), (*seq_)(a, b), variance_.value, pi_.value);
  }

  Eigen::MatrixXd cross(std::span<const Point> a, std::span<const Point> b) const override {
    Eigen::MatrixXd s(static_cast<Eigen::Index>(a.size()), static_cast<Eigen::Index>(b.size()));
    for (std::size_t i = 0; i < a.size(); ++i)
      for (std::size_t j = 0; j < b.size(); ++j)
        s(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = structValue(a[i].mutations, b[j].mutations);
    return variance_.value * (pi_.value * s + (1.0 - pi_.value) * seq_->cross(a, b));
  }

  Eigen::MatrixXd gram(std::span<const Point> x) const override {
    return variance_.value * (pi_.value * structGram(x).value + (1.0 - pi_.value) * seq_->gram(x));
  }

  std::vector<Eigen::MatrixXd> gramGradients(std::span<const Point> x) const override {
    const StructGram s = structGram(x);
    const Eigen::MatrixXd kseq = seq_->gram(x);
    const double v = variance_.value, p = pi_.value;
    std::vector<Eigen::MatrixXd> out;
    out.push_back(v * (p * s.value + (1.0 - p) * kseq));
    out.push_back(v * p * (1.0 - p) * (s.value - kseq));
    out.push_back(v * p * s.dGammaH);
    out.push_back(v * p * s.dGammaP);
    out.push_back(v * p * s.dGammaD);
    for (auto& g : seq_->gramGradients(x)) out.push_back(v * (1.0 - p) * g);
    return out;
  }

  void collectParameters(std::vector<Hyperparameter*>& out) override {
    out.push_back(&variance_);
    out.push_back(&pi_);
    out.push_back(&gammaH_);
    out.push_back(&gammaP_);
    out.push_back(&gammaD_);
    seq_->collectParameters(out);
  }
  std::unique_ptr<Kernel> clone() const override { return std::make_unique<KermutKernel>(*this); }

 private:
  struct StructTerms {
    double value = 0.0;
    double dGammaH = 0.0;  // derivatives w.r.t. log gamma
    double dGammaP = 0.0;
    double dGammaD = 0.0;
  };
  struct StructGram {
    Eigen::MatrixXd value, dGammaH, dGammaP, dGammaD;
  };

  StructTerms structTerms(const MutationSet& first, const MutationSet& second) const {
    const bool swap = detail::mutationSetLess(second, first);
    const MutationSet& a = swap ? second : first;
    const MutationSet& b = swap ? first : second;
    if (a.parental() != ctx_->parental || b.parental() != ctx_->parental) {
      throw InvalidArgument("kermut: mutation sets do not share the context parental");
    }
    StructTerms t;
    const double gh = gammaH_.value, gp = gammaP_.value, gd = gammaD_.value;
    for (const auto& ma : a.entries()) {
      const auto i = static_cast<Eigen::Index>(ma.position);
      const double pa = ctx_->siteProbs(i, residueIndex(ma.to));
      for (const auto& mb : b.entries()) {
        const auto j = static_cast<Eigen::Index>(mb.position);
        const double h = hellinger_(i, j);
        const double dp = std::abs(pa - ctx_->siteProbs(j, residueIndex(mb.to)));
        const double d = ctx_->distances(i, j);
        const double term = std::exp(-gh * h - gp * dp - gd * d);
        t.value += term;
        t.dGammaH -= gh * h * term;
        t.dGammaP -= gp * dp * term;
        t.dGammaD -= gd * d * term;
      }
    }
    return t;
  }

  StructGram structGram(std::span<const Point> x) const {
    const auto n = static_cast<Eigen::Index>(x.size());
    StructGram g{Eigen::MatrixXd(n, n), Eigen::MatrixXd(n, n), Eigen::MatrixXd(n, n), Eigen::MatrixXd(n, n)};
    for (Eigen::Index i = 0; i < n; ++i)
      for (Eigen::Index j = 0; j <= i; ++j) {
        const StructTerms t = structTerms(x[i].mutations, x[j].mutations);
        g.value(i, j) = g.value(j, i) = t.value;
        g.dGammaH(i, j) = g.dGammaH(j, i) = t.dGammaH;
        g.dGammaP(i, j) = g.dGammaP(j, i) = t.dGammaP;
        g.dGammaD(i, j) = g.dGammaD(j, i) = t.dGammaD;
      }
    return g;
  }

  std::shared_ptr<const StructureContext> ctx_;
  std::unique_ptr<Kernel> seq_;
  Hyperparameter variance_;
  Hyperparameter pi_;
  Hyperparameter gammaH_;
  Hyperparameter gammaP_;
  Hyperparameter gammaD_;
  Eigen::MatrixXd hellinger_;
};

}  // namespace abbo
