#pragma once

// Exact Gaussian-process regression with Cholesky inference, analytic log
// marginal likelihood gradients and multi-restart hyperparameter fitting.

#include <Eigen/Dense>
#include <gsl/gsl_errno.h>
#include <gsl/gsl_multimin.h>

#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <memory>
#include <numbers>
#include <ostream>
#include <random>
#include <span>
#include <string>
#include <unordered_set>
#include <vector>

#include "abbo/error.hpp"
#include "abbo/io.hpp"
#include "abbo/kernels.hpp"
#include "abbo/seqcore.hpp"

namespace abbo {

/// Observed (point, y) pairs. Sequences are unique and targets finite.
class Dataset {
 public:
  void add(Point point, double y) {
    if (!std::isfinite(y)) throw InvalidArgument("dataset: non-finite target for " + point.sequence.str());
    if (!seen_.insert(point.sequence).second) {
      throw InvalidArgument("dataset: duplicate sequence " + point.sequence.str());
    }
    points_.push_back(std::move(point));
    targets_.push_back(y);
  }

  std::size_t size() const noexcept { return points_.size(); }
  bool contains(const Sequence& s) const { return seen_.count(s) != 0; }
  const std::vector<Point>& points() const noexcept { return points_; }
  Eigen::VectorXd targets() const {
    return Eigen::Map<const Eigen::VectorXd>(targets_.data(), static_cast<Eigen::Index>(targets_.size()));
  }
  double target(std::size_t i) const { return targets_.at(i); }

 private:
  std::vector<Point> points_;
  std::vector<double> targets_;
  std::unordered_set<Sequence, SequenceHash> seen_;
};

/// Sum over mutated sites of log p(to) - log p(from), from an L x 20 table of
/// natural-log probabilities. Entries below log(1e-12) are floored; the count
/// of floored lookups is added to `floored` when given.
inline double zeroShotScore(const Eigen::MatrixXd& logProbs, const MutationSet& m,
                            std::size_t* floored = nullptr) {
  static const double kFloor = std::log(1e-12);
  double score = 0.0;
  for (const auto& mut : m.entries()) {
    const auto i = static_cast<Eigen::Index>(mut.position);
    if (i >= logProbs.rows() || logProbs.cols() != static_cast<Eigen::Index>(kAlphabetSize)) {
      throw InvalidArgument("zero-shot table does not cover position " + std::to_string(mut.position));
    }
    double lpTo = logProbs(i, residueIndex(mut.to));
    double lpFrom = logProbs(i, residueIndex(mut.from));
    for (double* lp : {&lpTo, &lpFrom}) {
      if (!(*lp >= kFloor)) {
        *lp = kFloor;
        if (floored) ++*floored;
      }
    }
    score += lpTo - lpFrom;
  }
  return score;
}

enum class MeanKind { kConstant, kAffine };

/// m(x) = alpha * zeroShot(x) + beta; alpha is pinned to 0 for kConstant.
struct PriorMean {
  MeanKind kind = MeanKind::kConstant;
  Hyperparameter beta{"beta", 0.0, -1e6, 1e6, Transform::kIdentity, false};
  Hyperparameter alpha{"alpha", 0.0, -1e6, 1e6, Transform::kIdentity, false};

  double operator()(const Point& p) const {
    return kind == MeanKind::kAffine ? alpha.value * p.zeroShot + beta.value : beta.value;
  }
};

struct Prediction {
  double mean = 0.0;
  double std = 0.0;
};

struct FitOptions {
  std::size_t restarts = 8;
  std::uint64_t seed = 0;
  std::size_t maxIterations = 100;
  double gradientTolerance = 1e-5;
};

class GaussianProcess {
 public:
  static constexpr double kNoiseLower = 1e-8;
  static constexpr double kNoiseUpper = 10.0;

  GaussianProcess(std::unique_ptr<Kernel> kernel, MeanKind meanKind, double noise = 0.1)
      : kernel_(std::move(kernel)),
        noise_(positiveParam("noise", noise, kNoiseLower, kNoiseUpper)) {
    if (!kernel_) throw InvalidArgument("gaussian process: missing kernel");
    mean_.kind = meanKind;
  }
  GaussianProcess(const GaussianProcess& o)
      : kernel_(o.kernel_->clone()),
        mean_(o.mean_),
        noise_(o.noise_),
        train_(o.train_),
        chol_(o.chol_),
        alpha_(o.alpha_),
        jitter_(o.jitter_),
        conditioned_(o.conditioned_) {}
  GaussianProcess& operator=(const GaussianProcess& o) {
    if (this != &o) {
      GaussianProcess tmp(o);
      *this = std::move(tmp);
    }
    return *this;
  }
  GaussianProcess(GaussianProcess&&) = default;
  GaussianProcess& operator=(GaussianProcess&&) = default;

  Kernel& kernel() { return *kernel_; }
  const Kernel& kernel() const { return *kernel_; }
  PriorMean& mean() { return mean_; }
  const PriorMean& mean() const { return mean_; }
  Hyperparameter& noise() { return noise_; }
  double jitter() const { return jitter_; }
  bool conditioned() const { return conditioned_; }
  std::size_t trainingSize() const { return train_ ? train_->size() : 0; }

  /// Hyperparameters the likelihood is differentiated against: free kernel
  /// parameters, then noise (unless fixed), then beta, then alpha (affine only).
  std::vector<Hyperparameter*> trainableParameters() {
    std::vector<Hyperparameter*> out;
    for (auto* p : kernel_->parameters())
      if (!p->fixed) out.push_back(p);
    if (!noise_.fixed) out.push_back(&noise_);
    out.push_back(&mean_.beta);
    if (mean_.kind == MeanKind::kAffine) out.push_back(&mean_.alpha);
    return out;
  }

  /// Factorizes K + noise*I for `data` at the current hyperparameters.
  void condition(std::shared_ptr<const Dataset> data) {
    if (!data || data->size() == 0) throw InvalidArgument("gaussian process: empty dataset");
    train_ = std::move(data);
    conditioned_ = false;
    const auto& pts = train_->points();
    Eigen::MatrixXd k = kernel_->gram(pts);
    k.diagonal().array() += noise_.value;
    factorize(k);
    alpha_ = chol_.solve(residuals());
    conditioned_ = true;
  }
  void condition(const Dataset& data) { condition(std::make_shared<const Dataset>(data)); }

  double logMarginalLikelihood() const {
    requireConditioned();
    const Eigen::VectorXd r = residuals();
    const double logDet = 2.0 * chol_.matrixLLT().diagonal().array().log().sum();
    const double n = static_cast<double>(r.size());
    const double lml = -0.5 * r.dot(alpha_) - 0.5 * logDet - 0.5 * n * std::log(2.0 * std::numbers::pi);
    if (!std::isfinite(lml)) throw NumericalError("log marginal likelihood is not finite");
    return lml;
  }

  /// d LML / d raw(theta), ordered as trainableParameters().
  Eigen::VectorXd logMarginalLikelihoodGradient() {
    requireConditioned();
    const auto& pts = train_->points();
    const auto n = static_cast<Eigen::Index>(pts.size());
    const Eigen::MatrixXd kinv = chol_.solve(Eigen::MatrixXd::Identity(n, n));
    const Eigen::MatrixXd w = alpha_ * alpha_.transpose() - kinv;

    std::vector<double> grad;
    const auto params = kernel_->parameters();
    const auto grads = kernel_->gramGradients(pts);
    for (std::size_t p = 0; p < params.size(); ++p) {
      if (!params[p]->fixed) grad.push_back(0.5 * w.cwiseProduct(grads[p]).sum());
    }
    if (!noise_.fixed) grad.push_back(0.5 * noise_.value * w.trace());
    grad.push_back(alpha_.sum());
    if (mean_.kind == MeanKind::kAffine) {
      Eigen::VectorXd f0(n);
      for (Eigen::Index i = 0; i < n; ++i) f0[i] = pts[static_cast<std::size_t>(i)].zeroShot;
      grad.push_back(alpha_.dot(f0));
    }
    return Eigen::Map<Eigen::VectorXd>(grad.data(), static_cast<Eigen::Index>(grad.size()));
  }

  /// Sets the prior-mean parameters to their generalized-least-squares
  /// optimum given the current kernel and noise; this is the exact maximizer
  /// of the likelihood over (beta, alpha). Re-conditions on the same data.
  void profileMean() {
    requireConditioned();
    const auto& pts = train_->points();
    const auto n = static_cast<Eigen::Index>(pts.size());
    const Eigen::Index m = mean_.kind == MeanKind::kAffine ? 2 : 1;
    Eigen::MatrixXd h(n, m);
    for (Eigen::Index i = 0; i < n; ++i) {
      h(i, 0) = 1.0;
      if (m == 2) h(i, 1) = pts[static_cast<std::size_t>(i)].zeroShot;
    }
    const Eigen::MatrixXd kh = chol_.solve(h);
    const Eigen::VectorXd ky = chol_.solve(train_->targets());
    const Eigen::MatrixXd a = h.transpose() * kh;
    const Eigen::VectorXd b = h.transpose() * ky;
    // Rank-deficient when every zero-shot score is equal; fall back to alpha = 0.
    Eigen::VectorXd coef;
    Eigen::LDLT<Eigen::MatrixXd> ldlt(a);
    if (m == 2 && std::abs(a.determinant()) <= 1e-12 * a.norm() * a.norm()) {
      coef = Eigen::VectorXd::Zero(2);
      coef[0] = b[0] / a(0, 0);
    } else {
      coef = ldlt.solve(b);
    }
    mean_.beta.value = coef[0];
    if (m == 2) mean_.alpha.value = coef[1];
    alpha_ = chol_.solve(residuals());
  }

  Prediction predict(const Point& query) const {
    return predict(std::span<const Point>(&query, 1)).front();
  }

  std::vector<Prediction> predict(std::span<const Point> queries) const {
    requireConditioned();
    std::vector<Prediction> out(queries.size());
    if (queries.empty()) return out;
    const Eigen::MatrixXd kx = kernel_->cross(train_->points(), queries);  // n x m
    const Eigen::VectorXd prior = kernel_->diagonal(queries);
    const Eigen::VectorXd mu = kx.transpose() * alpha_;
    const Eigen::MatrixXd v = chol_.matrixL().solve(kx);
    for (std::size_t q = 0; q < queries.size(); ++q) {
      const auto qi = static_cast<Eigen::Index>(q);
      const double var = prior[qi] - v.col(qi).squaredNorm();
      out[q].mean = mean_(queries[q]) + mu[qi];
      out[q].std = std::sqrt(std::max(var, 0.0));
    }
    return out;
  }

  /// `name = value` lines, one per hyperparameter.
  void writeHyperparameters(std::ostream& os) const {
    std::map<std::string, int> seen;
    for (const auto* p : kernel_->parameters()) {
      std::string name = "kernel." + p->name;
      if (int k = seen[name]++; k > 0) name += "#" + std::to_string(k);
      os << name << " = " << io::fmt(p->value) << (p->fixed ? " (fixed)" : "") << "\n";
    }
    os << "noise = " << io::fmt(noise_.value) << "\n";
    os << "mean.beta = " << io::fmt(mean_.beta.value) << "\n";
    if (mean_.kind == MeanKind::kAffine) os << "mean.alpha = " << io::fmt(mean_.alpha.value) << "\n";
    os << "kernel = " << kernel_->describe() << "\n";
    os << "jitter = " << io::fmt(jitter_) << "\n";
    if (conditioned_) os << "log_marginal_likelihood = " << io::fmt(logMarginalLikelihood()) << "\n";
  }

 private:
  void requireConditioned() const {
    if (!conditioned_) throw InvalidArgument("gaussian process has not been conditioned on data");
  }

  Eigen::VectorXd residuals() const {
    const auto& pts = train_->points();
    Eigen::VectorXd r = train_->targets();
    for (std::size_t i = 0; i < pts.size(); ++i) r[static_cast<Eigen::Index>(i)] -= mean_(pts[i]);
    return r;
  }

  // Jitter policy: 0, then 1e-10 * mean(diag) escalating x10 up to 1e-4 * mean(diag).
  void factorize(Eigen::MatrixXd& k) {
    if (!k.allFinite()) throw NumericalError("covariance matrix has non-finite entries");
    const double scale = k.diagonal().mean();
    double added = 0.0;
    jitter_ = 0.0;
    for (double jitter = 0.0;;) {
      if (jitter != added) {
        k.diagonal().array() += jitter - added;
        added = jitter;
      }
      chol_.compute(k);
      if (chol_.info() == Eigen::Success) {
        jitter_ = jitter;
        return;
      }
      jitter = jitter == 0.0 ? 1e-10 * scale : jitter * 10.0;
      if (jitter > 1e-4 * scale * (1.0 + 1e-9)) break;
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(k, Eigen::EigenvaluesOnly);
    throw NumericalError("Cholesky failed after maximum jitter " + io::fmt(1e-4 * scale) + " (n = " +
                         std::to_string(k.rows()) + ", eigenvalue range [" +
                         io::fmt(eig.eigenvalues().minCoeff()) + ", " +
                         io::fmt(eig.eigenvalues().maxCoeff()) + "])");
  }

  std::unique_ptr<Kernel> kernel_;
  PriorMean mean_;
  Hyperparameter noise_;
  std::shared_ptr<const Dataset> train_;
  Eigen::LLT<Eigen::MatrixXd> chol_;
  Eigen::VectorXd alpha_;
  double jitter_ = 0.0;
  bool conditioned_ = false;
};

namespace detail {

// Bounded raw coordinates are mapped to an unconstrained vector u through
// raw = lo + (hi - lo) * sigmoid(u); BFGS runs on u.
struct FitProblem {
  GaussianProcess* model;
  std::shared_ptr<const Dataset> data;
  std::vector<Hyperparameter*> params;  // kernel + noise, free only
  std::size_t evaluations = 0;

  // The line search often asks for the value and then the gradient at the same
  // point; the last evaluation is remembered.
  std::vector<double> lastU;
  double lastValue = 0.0;
  std::vector<double> lastGrad;

  double toRaw(std::size_t k, double u) const {
    const double lo = params[k]->rawLower(), hi = params[k]->rawUpper();
    return lo + (hi - lo) * Hyperparameter::sigmoid(u);
  }
  double toU(std::size_t k, double raw) const {
    const double lo = params[k]->rawLower(), hi = params[k]->rawUpper();
    double f = (raw - lo) / (hi - lo);
    f = std::clamp(f, 1e-6, 1.0 - 1e-6);
    return Hyperparameter::logit(f);
  }

  // Returns -LML at u and fills d(-LML)/du; +huge when the covariance fails.
  double evaluate(const gsl_vector* u, gsl_vector* grad) {
    std::vector<double> key(params.size());
    for (std::size_t k = 0; k < params.size(); ++k) key[k] = gsl_vector_get(u, k);
    if (key == lastU && (!grad || !lastGrad.empty())) {
      if (grad)
        for (std::size_t k = 0; k < params.size(); ++k) gsl_vector_set(grad, k, lastGrad[k]);
      return lastValue;
    }
    const double value = compute(u, grad);
    lastU = std::move(key);
    lastValue = value;
    lastGrad.clear();
    if (grad)
      for (std::size_t k = 0; k < params.size(); ++k) lastGrad.push_back(gsl_vector_get(grad, k));
    return value;
  }

  double compute(const gsl_vector* u, gsl_vector* grad) {
    ++evaluations;
    for (std::size_t k = 0; k < params.size(); ++k) params[k]->setRaw(toRaw(k, gsl_vector_get(u, k)));
    try {
      model->condition(data);
      model->profileMean();
      const double lml = model->logMarginalLikelihood();
      if (grad) {
        const Eigen::VectorXd g = model->logMarginalLikelihoodGradient();
        for (std::size_t k = 0; k < params.size(); ++k) {
          const double lo = params[k]->rawLower(), hi = params[k]->rawUpper();
          const double raw = params[k]->raw();
          const double dRawDu = (raw - lo) * (hi - raw) / (hi - lo);
          gsl_vector_set(grad, k, -g[static_cast<Eigen::Index>(k)] * dRawDu);
        }
      }
      return -lml;
    } catch (const Error&) {
      if (grad) gsl_vector_set_zero(grad);
      return 1e300;
    }
  }

  static double f(const gsl_vector* u, void* self) { return static_cast<FitProblem*>(self)->evaluate(u, nullptr); }
  static void df(const gsl_vector* u, void* self, gsl_vector* g) { static_cast<FitProblem*>(self)->evaluate(u, g); }
  static void fdf(const gsl_vector* u, void* self, double* value, gsl_vector* g) {
    *value = static_cast<FitProblem*>(self)->evaluate(u, g);
  }
};

}  // namespace detail

/// Maximizes the log marginal likelihood over kernel hyperparameters and noise
/// (BFGS in bounded log/logit coordinates) with the prior-mean parameters at
/// their exact conditional optimum. Restart 0 starts from `prototype`'s
/// values, the others log-uniformly inside the bounds. Deterministic in
/// `options.seed`.
inline GaussianProcess fit(const GaussianProcess& prototype, const Dataset& data, const FitOptions& options = {}) {
  if (data.size() < 2) throw InvalidArgument("fit: need at least 2 observations");
  if (options.restarts == 0) throw InvalidArgument("fit: need at least one restart");
  gsl_set_error_handler_off();

  GaussianProcess model(prototype);
  auto shared = std::make_shared<const Dataset>(data);
  detail::FitProblem problem{&model, shared, {}};
  for (auto* p : model.kernel().parameters())
    if (!p->fixed) problem.params.push_back(p);
  if (!model.noise().fixed) problem.params.push_back(&model.noise());
  const std::size_t dim = problem.params.size();

  std::vector<double> initial;
  for (auto* p : problem.params) initial.push_back(std::clamp(p->raw(), p->rawLower(), p->rawUpper()));

  std::mt19937_64 rng(options.seed);
  std::vector<double> bestRaw;
  double bestLml = -std::numeric_limits<double>::infinity();

  auto consider = [&](const std::vector<double>& raw) {
    for (std::size_t k = 0; k < dim; ++k) problem.params[k]->setRaw(raw[k]);
    try {
      model.condition(shared);
      model.profileMean();
      const double lml = model.logMarginalLikelihood();
      if (lml > bestLml) {
        bestLml = lml;
        bestRaw = raw;
      }
    } catch (const Error&) {
    }
  };

  for (std::size_t restart = 0; restart < options.restarts; ++restart) {
    std::vector<double> start = initial;
    if (restart > 0) {
      for (std::size_t k = 0; k < dim; ++k) {
        std::uniform_real_distribution<double> u(problem.params[k]->rawLower(), problem.params[k]->rawUpper());
        start[k] = u(rng);
      }
    }
    if (dim == 0) {
      consider(start);
      continue;
    }

    gsl_vector* x = gsl_vector_alloc(dim);
    for (std::size_t k = 0; k < dim; ++k) gsl_vector_set(x, k, problem.toU(k, start[k]));
    gsl_multimin_function_fdf fn{&detail::FitProblem::f, &detail::FitProblem::df, &detail::FitProblem::fdf, dim, &problem};
    gsl_multimin_fdfminimizer* s = gsl_multimin_fdfminimizer_alloc(gsl_multimin_fdfminimizer_vector_bfgs2, dim);
    consider(start);
    if (gsl_multimin_fdfminimizer_set(s, &fn, x, 0.1, 0.1) == GSL_SUCCESS) {
      for (std::size_t it = 0; it < options.maxIterations; ++it) {
        if (gsl_multimin_fdfminimizer_iterate(s) != GSL_SUCCESS) break;
        if (gsl_multimin_test_gradient(s->gradient, options.gradientTolerance) == GSL_SUCCESS) break;
      }
      std::vector<double> raw(dim);
      for (std::size_t k = 0; k < dim; ++k) raw[k] = problem.toRaw(k, gsl_vector_get(s->x, k));
      consider(raw);
    }
    gsl_multimin_fdfminimizer_free(s);
    gsl_vector_free(x);
  }

  if (bestRaw.empty() && dim > 0) {
    throw NumericalError("fit: no restart produced a finite log marginal likelihood (n = " +
                         std::to_string(data.size()) + ")");
  }
  for (std::size_t k = 0; k < dim; ++k) problem.params[k]->setRaw(bestRaw[k]);
  model.condition(shared);
  model.profileMean();
  if (!std::isfinite(model.logMarginalLikelihood())) throw NumericalError("fit: non-finite likelihood");
  return model;
}

}  // namespace abbo
