#pragma once

// Acquisition functions (EI, UCB, constrained EI, language-model soft
// constraint) and the qHSRI portfolio batch selector: hypervolume-derived
// returns r and covariance Q over (posterior mean, posterior std), a maximum
// Sharpe-ratio allocation z on the simplex, and the top-q batch by z.

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "abbo/error.hpp"

namespace abbo {

inline double normalPdf(double u) { return std::exp(-0.5 * u * u) / std::sqrt(2.0 * std::numbers::pi); }
inline double normalCdf(double u) { return 0.5 * std::erfc(-u / std::numbers::sqrt2); }

/// Closed-form expected improvement for maximization.
inline double expectedImprovement(double mean, double std, double incumbent) {
  if (!std::isfinite(mean) || !std::isfinite(std) || !std::isfinite(incumbent)) {
    throw InvalidArgument("expected improvement: non-finite input");
  }
  if (std < 0.0) throw InvalidArgument("expected improvement: negative std");
  const double gap = mean - incumbent;
  if (std == 0.0) return std::max(gap, 0.0);
  const double u = gap / std;
  return std::max(gap * normalCdf(u) + std * normalPdf(u), 0.0);
}

/// Probability of feasibility times EI.
inline double constrainedEI(double pf, double ei) {
  if (!(pf >= 0.0 && pf <= 1.0)) throw InvalidArgument("constrained EI: pf outside [0, 1]");
  if (!(ei >= 0.0)) throw InvalidArgument("constrained EI: negative EI");
  return pf * ei;
}

/// Language-model likelihood times acquisition value.
inline double softConstrain(double likelihood, double acquisition) {
  if (!(likelihood > 0.0 && likelihood <= 1.0)) {
    throw InvalidArgument("soft constraint: likelihood outside (0, 1]");
  }
  if (!(acquisition >= 0.0)) throw InvalidArgument("soft constraint: negative acquisition value");
  return likelihood * acquisition;
}

inline double upperConfidenceBound(double mean, double std, double beta) {
  if (beta < 0.0) throw InvalidArgument("UCB: negative beta");
  if (std < 0.0) throw InvalidArgument("UCB: negative std");
  return mean + beta * std;
}

/// Candidates a^i = (mean, std) with reference point R below all of them and
/// f* the componentwise maximum.
struct PortfolioProblem {
  std::vector<std::array<double, 2>> candidates;
  std::array<double, 2> reference{};
  std::array<double, 2> best{};
  std::vector<double> likelihoods;  // empty, or one per candidate

  /// Builds a problem with R_t = min_t - 0.05 (max_t - min_t). When every
  /// candidate shares the same value in a dimension, the offset is
  /// 0.05 * max(|min_t|, 1).
  static PortfolioProblem make(const std::vector<double>& means, const std::vector<double>& stds,
                               std::vector<double> likelihoods = {}) {
    if (means.size() != stds.size() || means.empty()) {
      throw InvalidArgument("portfolio: need matching, nonempty mean and std lists");
    }
    PortfolioProblem p;
    for (std::size_t i = 0; i < means.size(); ++i) p.candidates.push_back({means[i], stds[i]});
    for (int t = 0; t < 2; ++t) {
      double lo = p.candidates[0][t], hi = lo;
      for (const auto& a : p.candidates) {
        lo = std::min(lo, a[t]);
        hi = std::max(hi, a[t]);
      }
      const double span = hi > lo ? hi - lo : std::max(std::abs(lo), 1.0);
      p.reference[t] = lo - 0.05 * span;
      p.best[t] = hi;
    }
    p.likelihoods = std::move(likelihoods);
    p.validate();
    return p;
  }

  std::size_t size() const noexcept { return candidates.size(); }

  void validate() const {
    if (candidates.empty()) throw InvalidArgument("portfolio: no candidates");
    for (int t = 0; t < 2; ++t) {
      double hi = candidates[0][t];
      for (const auto& a : candidates) {
        if (!std::isfinite(a[t])) throw InvalidArgument("portfolio: non-finite candidate");
        if (!(reference[t] < a[t])) throw InvalidArgument("portfolio: reference point not strictly below candidates");
        hi = std::max(hi, a[t]);
      }
      if (best[t] != hi) throw InvalidArgument("portfolio: best point is not the componentwise max");
      if (best[t] == reference[t]) throw InvalidArgument("portfolio: degenerate normalization");
    }
    if (!likelihoods.empty()) {
      if (likelihoods.size() != candidates.size()) throw InvalidArgument("portfolio: one likelihood per candidate");
      for (double l : likelihoods)
        if (!(l > 0.0 && l <= 1.0)) throw InvalidArgument("portfolio: likelihood outside (0, 1]");
    }
  }
};

struct Portfolio {
  Eigen::MatrixXd p;  // p_ij
  Eigen::VectorXd r;  // p_ii
  Eigen::MatrixXd q;  // p_ij - p_ii p_jj
};

/// p_ij = prod_t (min(a_t^i, a_t^j) - R_t) / prod_t (f*_t - R_t).
inline Portfolio buildPortfolio(const PortfolioProblem& problem) {
  problem.validate();
  const auto l = static_cast<Eigen::Index>(problem.size());
  const double norm = (problem.best[0] - problem.reference[0]) * (problem.best[1] - problem.reference[1]);
  if (!(norm > 0.0)) throw InvalidArgument("portfolio: degenerate normalization");
  Portfolio out;
  out.p.resize(l, l);
  for (Eigen::Index i = 0; i < l; ++i) {
    const auto& ai = problem.candidates[static_cast<std::size_t>(i)];
    for (Eigen::Index j = 0; j <= i; ++j) {
      const auto& aj = problem.candidates[static_cast<std::size_t>(j)];
      double num = 1.0;
      for (int t = 0; t < 2; ++t) num *= std::min(ai[t], aj[t]) - problem.reference[t];
      out.p(i, j) = out.p(j, i) = num / norm;
    }
  }
  out.r = out.p.diagonal();
  out.q = out.p - out.r * out.r.transpose();
  return out;
}

inline double sharpeRatio(const Eigen::VectorXd& z, const Eigen::VectorXd& r, const Eigen::MatrixXd& q) {
  const double risk = z.dot(q * z);
  if (risk <= 0.0) return r.dot(z) > 0.0 ? std::numeric_limits<double>::infinity() : 0.0;
  return r.dot(z) / std::sqrt(risk);
}

namespace detail {
/// Euclidean projection of v onto {y >= 0, r'y = 1} for r > 0:
/// y = max(v - lambda r, 0) with lambda chosen by the sorted breakpoints v_i / r_i.
inline Eigen::VectorXd projectOntoWeightedSimplex(const Eigen::VectorXd& v, const Eigen::VectorXd& r) {
  const auto n = v.size();
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](Eigen::Index a, Eigen::Index b) { return v[a] / r[a] > v[b] / r[b]; });
  double s1 = 0.0, s2 = 0.0, lambda = 0.0;
  for (std::size_t k = 0; k < order.size(); ++k) {
    const auto i = order[k];
    s1 += r[i] * v[i];
    s2 += r[i] * r[i];
    const double candidate = (s1 - 1.0) / s2;
    const double nextBreak =
        k + 1 < order.size() ? v[order[k + 1]] / r[order[k + 1]] : -std::numeric_limits<double>::infinity();
    if (candidate >= nextBreak) {
      lambda = candidate;
      break;
    }
  }
  return (v - lambda * r).cwiseMax(0.0);
}
}  // namespace detail

struct SharpeSolution {
  Eigen::VectorXd z;
  double ratio = 0.0;
  double regularization = 0.0;
  std::size_t iterations = 0;
};

struct SharpeOptions {
  std::size_t maxIterations = 5000;
  double objectiveTolerance = 1e-12;
};

/// Maximizes r'z / sqrt(z'Qz) over the probability simplex through the
/// equivalent problem min y'Q~y s.t. r'y = 1, y >= 0 (Q~ = Q + eps I, eps
/// escalated from 1e-10 until Cholesky succeeds), solved by projected
/// gradient; z = y / sum(y).
inline SharpeSolution solveSharpe(const Eigen::VectorXd& r, const Eigen::MatrixXd& q,
                                  const SharpeOptions& options = {}) {
  const auto l = r.size();
  if (l == 0 || q.rows() != l || q.cols() != l) throw InvalidArgument("sharpe: shape mismatch");
  if ((r.array() <= 0.0).any()) throw InvalidArgument("sharpe: returns must be positive");
  if (!q.isApprox(q.transpose(), 1e-12)) throw InvalidArgument("sharpe: Q must be symmetric");
  SharpeSolution sol;
  if (l == 1) {
    sol.z = Eigen::VectorXd::Ones(1);
    sol.ratio = sharpeRatio(sol.z, r, q);
    return sol;
  }

  // A candidate with zero variance (it sits at f* in both coordinates) has an
  // unbounded ratio; the allocation goes entirely, and evenly, to such points.
  std::vector<Eigen::Index> riskless;
  for (Eigen::Index i = 0; i < l; ++i)
    if (q(i, i) <= 0.0) riskless.push_back(i);
  if (!riskless.empty()) {
    sol.z = Eigen::VectorXd::Zero(l);
    for (auto i : riskless) sol.z[i] = 1.0 / static_cast<double>(riskless.size());
    sol.ratio = sharpeRatio(sol.z, r, q);
    return sol;
  }

  Eigen::MatrixXd qt = q;
  double eps = 1e-10;
  for (;; eps *= 10.0) {
    qt = q;
    qt.diagonal().array() += eps;
    Eigen::LLT<Eigen::MatrixXd> llt(qt);
    if (llt.info() == Eigen::Success) break;
    if (eps > 1.0) throw NumericalError("sharpe: could not regularize Q to positive definite");
  }
  sol.regularization = eps;

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(qt, Eigen::EigenvaluesOnly);
  const double lipschitz = 2.0 * eig.eigenvalues().maxCoeff();
  const double step = 1.0 / lipschitz;

  // Accelerated projected gradient with function-value restart.
  Eigen::VectorXd y = Eigen::VectorXd::Constant(l, 1.0 / r.sum());
  Eigen::VectorXd w = y;
  double obj = y.dot(qt * y), t = 1.0;
  std::size_t it = 0;
  for (; it < options.maxIterations; ++it) {
    Eigen::VectorXd next = detail::projectOntoWeightedSimplex(w - step * (2.0 * (qt * w)), r);
    const double nextObj = next.dot(qt * next);
    if (nextObj > obj) {
      // Momentum overshot: restart from a plain gradient step at y.
      t = 1.0;
      next = detail::projectOntoWeightedSimplex(y - step * (2.0 * (qt * y)), r);
      const double plainObj = next.dot(qt * next);
      const double change = std::abs(obj - plainObj);
      w = next;
      y = std::move(next);
      obj = plainObj;
      if (change < options.objectiveTolerance) {
        ++it;
        break;
      }
      continue;
    }
    const double tNext = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
    w = next + ((t - 1.0) / tNext) * (next - y);
    t = tNext;
    const double change = std::abs(obj - nextObj);
    y = std::move(next);
    obj = nextObj;
    if (change < options.objectiveTolerance) {
      ++it;
      break;
    }
  }
  if (!y.allFinite() || y.sum() <= 0.0) {
    throw NumericalError("sharpe: solver did not converge after " + std::to_string(it) + " iterations");
  }
  sol.iterations = it;
  sol.z = y / y.sum();
  sol.ratio = sharpeRatio(sol.z, r, q);
  return sol;
}

struct PortfolioSolution {
  Eigen::VectorXd r;  // returns after the optional likelihood scaling
  Eigen::MatrixXd q;
  Eigen::VectorXd z;
  std::vector<std::size_t> selected;
  double ratio = 0.0;
};

/// Indices of the q largest allocations; ties by larger return, then lower index.
inline std::vector<std::size_t> topByAllocation(const Eigen::VectorXd& z, const Eigen::VectorXd& r,
                                                std::size_t count) {
  std::vector<std::size_t> order(static_cast<std::size_t>(z.size()));
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    const auto ia = static_cast<Eigen::Index>(a), ib = static_cast<Eigen::Index>(b);
    if (z[ia] != z[ib]) return z[ia] > z[ib];
    if (r[ia] != r[ib]) return r[ia] > r[ib];
    return a < b;
  });
  order.resize(count);
  return order;
}

/// qHSRI batch: returns are multiplied by the candidates' likelihoods when the
/// problem carries them, then the Sharpe allocation picks the batch.
inline PortfolioSolution selectBatch(const PortfolioProblem& problem, std::size_t batchSize,
                                     const SharpeOptions& options = {}) {
  if (batchSize > problem.size()) {
    throw InvalidArgument("selectBatch: batch size " + std::to_string(batchSize) + " exceeds " +
                          std::to_string(problem.size()) + " candidates");
  }
  Portfolio portfolio = buildPortfolio(problem);
  PortfolioSolution out;
  out.r = portfolio.r;
  if (!problem.likelihoods.empty()) {
    for (std::size_t i = 0; i < problem.size(); ++i) out.r[static_cast<Eigen::Index>(i)] *= problem.likelihoods[i];
  }
  out.q = std::move(portfolio.q);
  const SharpeSolution sharpe = solveSharpe(out.r, out.q, options);
  out.z = sharpe.z;
  out.ratio = sharpe.ratio;
  out.selected = topByAllocation(out.z, out.r, batchSize);
  return out;
}

}  // namespace abbo
