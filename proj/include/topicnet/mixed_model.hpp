// Copyright 2026 The topicnet Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Random-intercept linear mixed model
//
//   y = X beta + Z b + e,   b ~ N(0, tau2 I_g),   e ~ N(0, sigma2 I_n)
//
// fitted by restricted maximum likelihood, with Satterthwaite t-tests for
// fixed-effect contrasts, variance inflation factors and residual checks.
//
// Writing theta = tau2 / sigma2 and V(theta) = I + theta Z Z', the residual
// variance profiles out and REML reduces to a one-dimensional search over
// theta >= 0. Z is a group indicator, so V is block diagonal with blocks
// I + theta 1 1' and every V^{-1} product reduces to per-group sums.

#ifndef TOPICNET_MIXED_MODEL_HPP_
#define TOPICNET_MIXED_MODEL_HPP_

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numbers>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <boost/math/distributions/normal.hpp>
#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "topicnet/corpus.hpp"
#include "topicnet/detail/io.hpp"
#include "topicnet/error.hpp"
#include "topicnet/network.hpp"
#include "topicnet/special_functions.hpp"

namespace topicnet {

using Eigen::MatrixXd;
using Eigen::VectorXd;

// ---------------------------------------------------------------------------
// Design

struct DesignMatrices {
  VectorXd y;
  MatrixXd X;
  MatrixXd Z;                              // n x g indicator
  std::vector<std::size_t> group;          // row -> group index
  std::vector<std::string> group_ids;      // group index -> video id
  std::vector<std::string> column_names;   // "(Intercept)", topic labels, "change videos"
  std::vector<std::pair<std::string, std::string>> row_meta;  // (video_id, topic)
  std::string reference_topic;
  std::string reference_stance;

  std::size_t n() const { return static_cast<std::size_t>(y.size()); }
  std::size_t p() const { return static_cast<std::size_t>(X.cols()); }
  std::size_t g() const { return group_ids.size(); }

  std::vector<std::size_t> group_sizes() const {
    std::vector<std::size_t> m(g(), 0);
    for (auto j : group) ++m[j];
    return m;
  }
};

namespace detail {

inline std::size_t numeric_rank(const MatrixXd& A) {
  Eigen::ColPivHouseholderQR<MatrixXd> qr(A);
  qr.setThreshold(1e-10);
  return static_cast<std::size_t>(qr.rank());
}

// Name of the first column that adds nothing to the span of its
// predecessors, if any.
inline std::optional<std::string> first_dependent_column(const MatrixXd& X,
                                                         const std::vector<std::string>& names) {
  for (Eigen::Index j = 1; j <= X.cols(); ++j) {
    if (numeric_rank(X.leftCols(j)) < static_cast<std::size_t>(j)) {
      return names[static_cast<std::size_t>(j - 1)];
    }
  }
  return std::nullopt;
}

}  // namespace detail

// Builds a design from explicit parts. `group` holds a group index per row.
inline DesignMatrices make_design(VectorXd y, MatrixXd X, std::vector<std::size_t> group,
                                  std::vector<std::string> column_names = {}) {
  if (X.rows() != y.size() || group.size() != static_cast<std::size_t>(y.size())) {
    throw DataError("design parts have mismatched row counts");
  }
  DesignMatrices d;
  d.y = std::move(y);
  d.X = std::move(X);
  d.group = std::move(group);
  std::size_t g = 0;
  for (auto j : d.group) g = std::max(g, j + 1);
  for (std::size_t j = 0; j < g; ++j) d.group_ids.push_back(fmt::format("g{}", j + 1));
  d.Z = MatrixXd::Zero(d.X.rows(), static_cast<Eigen::Index>(g));
  for (std::size_t i = 0; i < d.group.size(); ++i) {
    d.Z(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(d.group[i])) = 1.0;
  }
  if (column_names.empty()) {
    for (Eigen::Index j = 0; j < d.X.cols(); ++j) column_names.push_back(fmt::format("x{}", j));
  }
  d.column_names = std::move(column_names);
  if (auto bad = detail::first_dependent_column(d.X, d.column_names)) {
    throw DataError(fmt::format("fixed-effects design is rank deficient at column '{}'", *bad));
  }
  return d;
}

// Treatment coding: intercept, one indicator per non-reference topic (in
// first-appearance order), one indicator for the non-reference stance.
inline DesignMatrices encode_design(const std::vector<EngagementRow>& rows,
                                    const std::string& reference_topic, Stance reference_stance) {
  std::vector<std::string> topics, videos;
  bool stance_seen[2] = {false, false};
  for (const auto& r : rows) {
    if (std::find(topics.begin(), topics.end(), r.topic) == topics.end()) topics.push_back(r.topic);
    if (std::find(videos.begin(), videos.end(), r.video_id) == videos.end()) {
      videos.push_back(r.video_id);
    }
    stance_seen[r.stance == Stance::kChange ? 0 : 1] = true;
  }
  if (videos.size() < 2) {
    throw DataError(fmt::format("model needs at least 2 videos, got {}", videos.size()));
  }
  if (topics.size() < 2) {
    throw DataError(fmt::format("model needs at least 2 topics, got {}", topics.size()));
  }
  if (std::find(topics.begin(), topics.end(), reference_topic) == topics.end()) {
    throw DataError(fmt::format("reference topic '{}' does not occur in the data", reference_topic));
  }
  if (!stance_seen[reference_stance == Stance::kChange ? 0 : 1]) {
    throw DataError(fmt::format("reference stance '{}' does not occur in the data",
                                to_string(reference_stance)));
  }
  const Stance other = reference_stance == Stance::kChange ? Stance::kHoax : Stance::kChange;
  const bool both_stances = stance_seen[0] && stance_seen[1];

  std::vector<std::string> names{"(Intercept)"};
  std::vector<std::string> topic_columns;
  for (const auto& t : topics) {
    if (t != reference_topic) topic_columns.push_back(t);
  }
  names.insert(names.end(), topic_columns.begin(), topic_columns.end());
  if (both_stances) names.push_back(fmt::format("{} videos", to_string(other)));

  const auto n = static_cast<Eigen::Index>(rows.size());
  MatrixXd X = MatrixXd::Zero(n, static_cast<Eigen::Index>(names.size()));
  VectorXd y(n);
  std::vector<std::size_t> group(rows.size());
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& r = rows[static_cast<std::size_t>(i)];
    y(i) = r.normalized_avg_degree;
    X(i, 0) = 1.0;
    auto t = std::find(topic_columns.begin(), topic_columns.end(), r.topic);
    if (t != topic_columns.end()) X(i, 1 + (t - topic_columns.begin())) = 1.0;
    if (both_stances && r.stance == other) X(i, X.cols() - 1) = 1.0;
    group[static_cast<std::size_t>(i)] = static_cast<std::size_t>(
        std::find(videos.begin(), videos.end(), r.video_id) - videos.begin());
  }
  auto d = make_design(std::move(y), std::move(X), std::move(group), std::move(names));
  d.group_ids = videos;
  for (const auto& r : rows) d.row_meta.emplace_back(r.video_id, r.topic);
  d.reference_topic = reference_topic;
  d.reference_stance = std::string(to_string(reference_stance));
  return d;
}

// ---------------------------------------------------------------------------
// Profiled REML criterion

namespace detail {

// Everything the criterion and its derivative need at one theta.
struct GlsState {
  double theta = 0.0;
  VectorXd beta;
  VectorXd residual;           // y - X beta
  VectorXd vinv_residual;      // V^{-1} r
  Eigen::LLT<MatrixXd> xtvx;   // X' V^{-1} X
  MatrixXd vinv_x;             // V^{-1} X
  double rvr = 0.0;            // r' V^{-1} r
  double logdet_v = 0.0;
  double logdet_xtvx = 0.0;
};

// c_j = theta / (1 + theta m_j): V^{-1} = I - sum_j c_j 1_j 1_j'.
inline VectorXd woodbury_weights(double theta, const std::vector<std::size_t>& sizes) {
  VectorXd c(static_cast<Eigen::Index>(sizes.size()));
  for (std::size_t j = 0; j < sizes.size(); ++j) {
    c(static_cast<Eigen::Index>(j)) = theta / (1.0 + theta * static_cast<double>(sizes[j]));
  }
  return c;
}

inline MatrixXd apply_vinv(const DesignMatrices& d, const VectorXd& c, const MatrixXd& M) {
  MatrixXd group_sums = d.Z.transpose() * M;
  return M - d.Z * (c.asDiagonal() * group_sums);
}

inline GlsState gls_state(double theta, const DesignMatrices& d,
                          const std::vector<std::size_t>& sizes) {
  if (!(theta >= 0.0) || !std::isfinite(theta)) {
    throw NumericalError(fmt::format("variance ratio {} is not a finite non-negative number", theta));
  }
  GlsState s;
  s.theta = theta;
  const VectorXd c = woodbury_weights(theta, sizes);
  s.vinv_x = apply_vinv(d, c, d.X);
  const VectorXd vinv_y = apply_vinv(d, c, d.y);
  MatrixXd xtvx = d.X.transpose() * s.vinv_x;
  s.xtvx.compute(xtvx);
  if (s.xtvx.info() != Eigen::Success) throw NumericalError("X' V^-1 X is singular");
  s.beta = s.xtvx.solve(d.X.transpose() * vinv_y);
  s.residual = d.y - d.X * s.beta;
  s.vinv_residual = vinv_y - s.vinv_x * s.beta;
  s.rvr = s.residual.dot(s.vinv_residual);
  for (auto m : sizes) s.logdet_v += std::log1p(theta * static_cast<double>(m));
  s.logdet_xtvx = 2.0 * s.xtvx.matrixLLT().diagonal().array().log().sum();
  return s;
}

inline constexpr double kSigmaFloor = 1e-300;

inline double logdet_xtx(const DesignMatrices& d) {
  Eigen::LLT<MatrixXd> llt(d.X.transpose() * d.X);
  if (llt.info() != Eigen::Success) throw NumericalError("X' X is singular");
  return 2.0 * llt.matrixLLT().diagonal().array().log().sum();
}

inline double criterion_from_state(const GlsState& s, const DesignMatrices& d, double logdet_xtx) {
  const double dof = static_cast<double>(d.n() - d.p());
  const double sigma2 = std::max(s.rvr / dof, kSigmaFloor);
  return dof * std::log(2.0 * std::numbers::pi * sigma2) + s.logdet_v + s.logdet_xtvx -
         logdet_xtx + dof;
}

// d criterion / d theta.
inline double criterion_slope(const GlsState& s, const DesignMatrices& d,
                              const std::vector<std::size_t>& sizes) {
  const double dof = static_cast<double>(d.n() - d.p());
  double slope = 0.0;
  for (auto m : sizes) slope += static_cast<double>(m) / (1.0 + s.theta * static_cast<double>(m));
  const MatrixXd w = d.Z.transpose() * s.vinv_x;  // Z' V^{-1} X
  slope -= (s.xtvx.solve(w.transpose() * w)).trace();
  const VectorXd zr = d.Z.transpose() * s.vinv_residual;
  if (s.rvr > 0.0) slope -= dof * zr.squaredNorm() / s.rvr;
  return slope;
}

}  // namespace detail

// -2 x restricted log-likelihood with sigma2 profiled out, including the
// log det(X'X) normalization so the value does not depend on how the
// fixed-effect columns are parameterized.
inline double reml_criterion(double theta, const DesignMatrices& d) {
  if (d.n() <= d.p()) throw DataError("REML needs more rows than fixed-effect columns");
  const auto sizes = d.group_sizes();
  return detail::criterion_from_state(detail::gls_state(theta, d, sizes), d, detail::logdet_xtx(d));
}

// GLS estimate of beta at a fixed variance ratio.
inline VectorXd gls_beta(double theta, const DesignMatrices& d) {
  return detail::gls_state(theta, d, d.group_sizes()).beta;
}

struct VarianceComponents {
  double sigma2 = 0.0;
  double tau2 = 0.0;
  double theta = 0.0;
};

struct MixedFit {
  VectorXd beta;
  MatrixXd beta_cov;
  VarianceComponents vc;
  double reml_criterion = 0.0;
  VectorXd blups;
  bool converged = false;
  bool at_boundary = false;  // theta = 0
  int iterations = 0;
  std::size_t n = 0;
  std::size_t p = 0;
};

struct FitOptions {
  double tol = 1e-10;    // bracket width in theta, relative to max(1, theta)
  int max_iter = 200;    // golden-section iterations
  double epsilon = 1e-12;  // search runs over log(theta + epsilon)
};

// Minimizes the profiled criterion over theta in [0, inf): a log-spaced
// scan brackets the minimum, golden-section search narrows the bracket, and
// bisection on the analytic slope pins the stationary point once the
// criterion is flat to rounding. theta = 0 is accepted when it is no worse
// than any interior point.
inline MixedFit fit_reml(const DesignMatrices& d, const FitOptions& opt = {}) {
  const auto n = d.n(), p = d.p();
  if (n <= p + 1) {
    throw DataError(fmt::format("REML fit needs n > p + 1 (n={}, p={})", n, p));
  }
  if (detail::numeric_rank(d.X) < p) throw DataError("fixed-effects design is rank deficient");
  const auto sizes = d.group_sizes();
  const double ldxtx = detail::logdet_xtx(d);
  auto crit = [&](double theta) {
    return detail::criterion_from_state(detail::gls_state(theta, d, sizes), d, ldxtx);
  };
  const double eps = opt.epsilon;
  auto theta_of = [eps](double u) { return std::max(0.0, std::exp(u) - eps); };
  auto f = [&](double u) { return crit(theta_of(u)); };

  // Upper end: grow by decades while the criterion keeps falling.
  double theta_hi = 1.0;
  while (theta_hi < 1e12 && crit(10.0 * theta_hi) < crit(theta_hi)) theta_hi *= 10.0;
  const double u_lo = std::log(eps), u_hi = std::log(10.0 * theta_hi + eps);
  constexpr int kGrid = 96;
  int best = 0;
  double best_f = std::numeric_limits<double>::infinity();
  std::vector<double> grid(kGrid + 1);
  for (int i = 0; i <= kGrid; ++i) {
    grid[i] = u_lo + (u_hi - u_lo) * i / kGrid;
    double fi = f(grid[i]);
    if (fi < best_f) {
      best_f = fi;
      best = i;
    }
  }
  double a = grid[std::max(best - 1, 0)], b = grid[std::min(best + 1, kGrid)];

  constexpr double kInvPhi = 0.6180339887498949;
  double x1 = b - kInvPhi * (b - a), x2 = a + kInvPhi * (b - a);
  double f1 = f(x1), f2 = f(x2);
  MixedFit fit;
  fit.n = n;
  fit.p = p;
  int it = 0;
  auto width = [&] { return theta_of(b) - theta_of(a); };
  while (width() > opt.tol * std::max(1.0, theta_of(b)) && b - a > 4e-16 * std::fabs(b)) {
    if (++it > opt.max_iter) {
      throw NumericalError(fmt::format("REML search did not converge in {} iterations", opt.max_iter));
    }
    if (f1 <= f2) {
      b = x2;
      x2 = x1;
      f2 = f1;
      x1 = b - kInvPhi * (b - a);
      f1 = f(x1);
    } else {
      a = x1;
      x1 = x2;
      f1 = f2;
      x2 = a + kInvPhi * (b - a);
      f2 = f(x2);
    }
  }
  double theta = theta_of(0.5 * (a + b));

  // Polish. Near the optimum the criterion is flat to rounding, so the
  // golden-section bracket may sit slightly off the stationary point.
  // Re-bracket the sign change of the analytic slope around theta, then
  // bisect on it.
  if (theta > 0.0) {
    auto slope = [&](double t) {
      return detail::criterion_slope(detail::gls_state(t, d, sizes), d, sizes);
    };
    double lo = theta, hi = theta;
    double step = 1e-6 * theta;
    for (int k = 0; k < 60 && lo > 0.0 && slope(lo) >= 0.0; ++k, step *= 2.0) {
      lo = std::max(0.0, lo - step);
    }
    step = 1e-6 * theta;
    for (int k = 0; k < 60 && slope(hi) <= 0.0; ++k, step *= 2.0) hi += step;
    if (slope(lo) < 0.0 && slope(hi) > 0.0) {
      for (int k = 0; k < 200 && hi - lo > 1e-15 * hi; ++k) {
        const double mid = 0.5 * (lo + hi);
        (slope(mid) < 0.0 ? lo : hi) = mid;
        ++it;
      }
      theta = 0.5 * (lo + hi);
    }
  }
  if (crit(0.0) <= crit(theta)) theta = 0.0;

  const auto s = detail::gls_state(theta, d, sizes);
  const double dof = static_cast<double>(n - p);
  fit.vc.theta = theta;
  fit.vc.sigma2 = std::max(s.rvr / dof, detail::kSigmaFloor);
  fit.vc.tau2 = theta * fit.vc.sigma2;
  fit.at_boundary = theta == 0.0;
  fit.beta = s.beta;
  fit.beta_cov = fit.vc.sigma2 * s.xtvx.solve(MatrixXd::Identity(static_cast<Eigen::Index>(p),
                                                                 static_cast<Eigen::Index>(p)));
  fit.reml_criterion = detail::criterion_from_state(s, d, ldxtx);
  fit.blups = theta * (d.Z.transpose() * s.vinv_residual);
  fit.converged = std::isfinite(fit.reml_criterion);
  fit.iterations = it;
  if (!fit.converged) throw NumericalError("REML criterion is not finite at the optimum");
  return fit;
}

// ---------------------------------------------------------------------------
// Restricted likelihood in (sigma2, tau2), for Satterthwaite

namespace detail {

// Solves with Sigma = sigma2 I + tau2 Z Z' through the ratio form.
struct SigmaState {
  double sigma2 = 0.0;
  GlsState gls;
  VectorXd c;  // Woodbury weights at theta = tau2 / sigma2
};

inline SigmaState sigma_state(double sigma2, double tau2, const DesignMatrices& d,
                              const std::vector<std::size_t>& sizes) {
  if (!(sigma2 > 0.0)) throw NumericalError("residual variance must be positive");
  SigmaState s;
  s.sigma2 = sigma2;
  s.gls = gls_state(tau2 / sigma2, d, sizes);
  s.c = woodbury_weights(tau2 / sigma2, sizes);
  return s;
}

// Gradient of -2 log L_R with respect to (sigma2, tau2):
//   d_k = tr(P V_k) - y' P V_k P y,   V_sigma = I, V_tau = Z Z'.
inline Eigen::Vector2d deviance_score(double sigma2, double tau2, const DesignMatrices& d,
                                      const std::vector<std::size_t>& sizes) {
  const auto s = sigma_state(sigma2, tau2, d, sizes);
  const auto& g = s.gls;
  // Sigma^{-1} = V^{-1} / sigma2; C_Sigma = sigma2 (X'V^{-1}X)^{-1}.
  double tr_vinv = static_cast<double>(d.n());
  for (std::size_t j = 0; j < sizes.size(); ++j) {
    tr_vinv -= s.c(static_cast<Eigen::Index>(j)) * static_cast<double>(sizes[j]);
  }
  const double tr_p_sigma =
      tr_vinv / sigma2 - g.xtvx.solve(g.vinv_x.transpose() * g.vinv_x).trace() / sigma2;
  const VectorXd py = g.vinv_residual / sigma2;
  const MatrixXd zvx = d.Z.transpose() * g.vinv_x;
  double tr_zvz = 0.0;
  for (std::size_t j = 0; j < sizes.size(); ++j) {
    double m = static_cast<double>(sizes[j]);
    tr_zvz += m - s.c(static_cast<Eigen::Index>(j)) * m * m;
  }
  const double tr_p_tau = tr_zvz / sigma2 - g.xtvx.solve(zvx.transpose() * zvx).trace() / sigma2;
  Eigen::Vector2d score;
  score(0) = tr_p_sigma - py.squaredNorm();
  score(1) = tr_p_tau - (d.Z.transpose() * py).squaredNorm();
  return score;
}

inline double contrast_variance(double sigma2, double tau2, const DesignMatrices& d,
                                const std::vector<std::size_t>& sizes, const VectorXd& contrast) {
  const auto g = gls_state(tau2 / sigma2, d, sizes);
  return sigma2 * contrast.dot(g.xtvx.solve(contrast));
}

}  // namespace detail

struct CoefficientRow {
  std::string name;
  double estimate = 0.0;
  double std_error = 0.0;
  double df = 0.0;
  double t_value = 0.0;
  double p_value = 1.0;
  std::string stars;
  bool df_fallback = false;  // Hessian not positive definite; residual df used
};

inline std::string significance_stars(double p) {
  if (p < 0.001) return "***";
  if (p < 0.01) return "**";
  if (p < 0.05) return "*";
  if (p < 0.1) return ".";
  return "";
}

// Covariance of the variance-parameter estimates, 2 H^{-1}, with H the
// Hessian of -2 log L_R. H is differentiated numerically from the analytic
// score with central differences (relative step 1e-5). At theta = 0 the
// variance ratio sits on its boundary and only sigma2 is free.
struct VarianceParameterCovariance {
  std::vector<int> free;  // 0 = sigma2, 1 = tau2
  MatrixXd cov;
  bool positive_definite = true;
};

inline VarianceParameterCovariance variance_parameter_covariance(const MixedFit& fit,
                                                                 const DesignMatrices& d) {
  constexpr double kRelStep = 1e-5;
  const auto sizes = d.group_sizes();
  VarianceParameterCovariance out;
  out.free = fit.at_boundary ? std::vector<int>{0} : std::vector<int>{0, 1};
  const double phi[2] = {fit.vc.sigma2, fit.vc.tau2};
  const auto k = static_cast<Eigen::Index>(out.free.size());
  MatrixXd H(k, k);
  for (Eigen::Index j = 0; j < k; ++j) {
    const int pj = out.free[static_cast<std::size_t>(j)];
    const double h = kRelStep * phi[pj];
    double plus[2] = {phi[0], phi[1]}, minus[2] = {phi[0], phi[1]};
    plus[pj] += h;
    minus[pj] -= h;
    const auto sp = detail::deviance_score(plus[0], plus[1], d, sizes);
    const auto sm = detail::deviance_score(minus[0], minus[1], d, sizes);
    for (Eigen::Index i = 0; i < k; ++i) {
      const int pi = out.free[static_cast<std::size_t>(i)];
      H(i, j) = (sp(pi) - sm(pi)) / (2.0 * h);
    }
  }
  H = 0.5 * (H + H.transpose()).eval();
  Eigen::LLT<MatrixXd> llt(H);
  if (llt.info() != Eigen::Success) {
    out.positive_definite = false;
    return out;
  }
  out.cov = 2.0 * llt.solve(MatrixXd::Identity(k, k));
  return out;
}

// t-test of contrast' beta with Satterthwaite degrees of freedom
// 2 v^2 / (grad' A grad), v = contrast' Cov(beta) contrast.
inline CoefficientRow satterthwaite_ttest(const MixedFit& fit, const DesignMatrices& d,
                                          const VectorXd& contrast,
                                          const VarianceParameterCovariance* precomputed = nullptr) {
  if (static_cast<std::size_t>(contrast.size()) != d.p()) {
    throw UsageError(fmt::format("contrast has length {}, design has {} columns", contrast.size(), d.p()));
  }
  if (!fit.converged) throw NumericalError("cannot test a fit that did not converge");
  constexpr double kRelStep = 1e-5;
  const auto sizes = d.group_sizes();
  const double residual_df = static_cast<double>(d.n() - d.p());
  CoefficientRow row;
  row.estimate = contrast.dot(fit.beta);
  const double v = contrast.dot(fit.beta_cov * contrast);
  if (!(v > 0.0)) throw NumericalError("contrast variance is not positive");
  row.std_error = std::sqrt(v);
  row.t_value = row.estimate / row.std_error;

  VarianceParameterCovariance local;
  if (precomputed == nullptr) {
    local = variance_parameter_covariance(fit, d);
    precomputed = &local;
  }
  if (!precomputed->positive_definite) {
    row.df = residual_df;
    row.df_fallback = true;
  } else {
    const double phi[2] = {fit.vc.sigma2, fit.vc.tau2};
    VectorXd grad(static_cast<Eigen::Index>(precomputed->free.size()));
    for (std::size_t i = 0; i < precomputed->free.size(); ++i) {
      const int pi = precomputed->free[i];
      const double h = kRelStep * phi[pi];
      double plus[2] = {phi[0], phi[1]}, minus[2] = {phi[0], phi[1]};
      plus[pi] += h;
      minus[pi] -= h;
      grad(static_cast<Eigen::Index>(i)) =
          (detail::contrast_variance(plus[0], plus[1], d, sizes, contrast) -
           detail::contrast_variance(minus[0], minus[1], d, sizes, contrast)) /
          (2.0 * h);
    }
    const double denom = grad.dot(precomputed->cov * grad);
    if (denom > 0.0) {
      row.df = std::min(2.0 * v * v / denom, residual_df);
    } else {
      row.df = residual_df;
      row.df_fallback = true;
    }
  }
  row.p_value = p_from_t(row.t_value, row.df);
  row.stars = significance_stars(row.p_value);
  return row;
}

// One row per fixed-effect column.
inline std::vector<CoefficientRow> coefficient_table(const MixedFit& fit, const DesignMatrices& d) {
  const auto cov = variance_parameter_covariance(fit, d);
  std::vector<CoefficientRow> rows;
  for (std::size_t j = 0; j < d.p(); ++j) {
    VectorXd c = VectorXd::Zero(static_cast<Eigen::Index>(d.p()));
    c(static_cast<Eigen::Index>(j)) = 1.0;
    auto row = satterthwaite_ttest(fit, d, c, &cov);
    row.name = d.column_names[j];
    rows.push_back(std::move(row));
  }
  return rows;
}

// ---------------------------------------------------------------------------
// Collinearity

struct VifEntry {
  std::string column;
  double vif = 1.0;
  bool infinite = false;
};

// 1 / (1 - R^2_j) from regressing each non-intercept column on all others.
// Column 0 must be the intercept.
inline std::vector<VifEntry> vif(const DesignMatrices& d) {
  const auto p = static_cast<Eigen::Index>(d.p());
  if (p < 3) throw DataError("VIF needs at least 2 non-intercept columns");
  if (!(d.X.col(0).array() == 1.0).all()) throw DataError("first design column is not an intercept");
  std::vector<VifEntry> out;
  for (Eigen::Index j = 1; j < p; ++j) {
    MatrixXd others(d.X.rows(), p - 1);
    for (Eigen::Index k = 0, c = 0; k < p; ++k) {
      if (k != j) others.col(c++) = d.X.col(k);
    }
    const VectorXd target = d.X.col(j);
    Eigen::ColPivHouseholderQR<MatrixXd> qr(others);
    const VectorXd fitted = others * qr.solve(target);
    const double rss = (target - fitted).squaredNorm();
    const double tss = (target.array() - target.mean()).matrix().squaredNorm();
    VifEntry e{d.column_names[static_cast<std::size_t>(j)]};
    if (tss <= 0.0 || rss <= 1e-12 * tss) {
      e.infinite = true;
      e.vif = std::numeric_limits<double>::infinity();
    } else {
      e.vif = tss / rss;  // 1 / (1 - R^2)
    }
    out.push_back(std::move(e));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Residual diagnostics

struct ResidualDiagnostics {
  std::vector<std::pair<double, double>> quantiles;  // (theoretical, empirical), standardized
  double skewness = 0.0;
  double excess_kurtosis = 0.0;
  double upper_tail_deviation = 0.0;  // max empirical - theoretical over the top 5%
  bool heavy_upper_tail = false;
  bool degenerate = false;  // residuals (numerically) constant
};

inline constexpr std::size_t kMaxQuantilePoints = 512;
inline constexpr double kUpperTailFlag = 0.5;

// Conditional residuals y - X beta - Z b, standardized by their mean and
// standard deviation, against standard normal quantiles at (i - 0.5) / k.
inline ResidualDiagnostics residual_diagnostics(const MixedFit& fit, const DesignMatrices& d) {
  ResidualDiagnostics out;
  const VectorXd e = d.y - d.X * fit.beta - d.Z * fit.blups;
  const auto n = static_cast<std::size_t>(e.size());
  if (n == 0) {
    out.degenerate = true;
    return out;
  }
  const double mean = e.mean();
  const VectorXd centered = e.array() - mean;
  const double m2 = centered.squaredNorm() / static_cast<double>(n);
  const double scale = std::max(1.0, d.y.cwiseAbs().maxCoeff());
  std::vector<double> z(n);
  if (!(m2 > 1e-24 * scale * scale)) {
    out.degenerate = true;
  } else {
    const double sd = std::sqrt(m2);
    double m3 = 0.0, m4 = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      z[i] = centered(static_cast<Eigen::Index>(i)) / sd;
      m3 += z[i] * z[i] * z[i];
      m4 += z[i] * z[i] * z[i] * z[i];
    }
    out.skewness = m3 / static_cast<double>(n);
    out.excess_kurtosis = m4 / static_cast<double>(n) - 3.0;
  }
  std::sort(z.begin(), z.end());
  const std::size_t k = std::min(n, kMaxQuantilePoints);
  boost::math::normal_distribution<double> normal;
  for (std::size_t i = 0; i < k; ++i) {
    const double prob = (static_cast<double>(i) + 0.5) / static_cast<double>(k);
    double empirical;
    if (k == n) {
      empirical = z[i];
    } else {
      const double pos = prob * static_cast<double>(n) - 0.5;
      const auto lo = static_cast<std::size_t>(std::clamp(std::floor(pos), 0.0, static_cast<double>(n - 1)));
      const auto hi = std::min(lo + 1, n - 1);
      const double w = std::clamp(pos - static_cast<double>(lo), 0.0, 1.0);
      empirical = z[lo] * (1.0 - w) + z[hi] * w;
    }
    out.quantiles.emplace_back(boost::math::quantile(normal, prob), empirical);
  }
  if (!out.degenerate) {
    const auto tail_start = static_cast<std::size_t>(std::floor(0.95 * static_cast<double>(k)));
    for (std::size_t i = tail_start; i < k; ++i) {
      out.upper_tail_deviation =
          std::max(out.upper_tail_deviation, out.quantiles[i].second - out.quantiles[i].first);
    }
    out.heavy_upper_tail = out.upper_tail_deviation > kUpperTailFlag;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Output

inline constexpr std::string_view kStarsFooter =
    "(0: ‘***’; 0.001: ‘**’; 0.01: ‘*’; 0.05: ‘.’; "
    "0.1: ‘ ’)";

inline const std::vector<std::string>& coefficient_columns() {
  static const std::vector<std::string> cols{"Variable", "Estimate", "Std. Error", "df",
                                             "t value",  "Pr(>|t|)", "Significance"};
  return cols;
}

inline std::string coefficient_tsv(const std::vector<CoefficientRow>& rows) {
  detail::TsvWriter w(coefficient_columns());
  for (const auto& r : rows) {
    w.row({r.name, detail::format_real(r.estimate), detail::format_real(r.std_error),
           detail::format_real(r.df), detail::format_real(r.t_value),
           detail::format_real(r.p_value), r.stars});
  }
  return w.str();
}

inline std::vector<CoefficientRow> parse_coefficients(std::string_view text) {
  auto t = detail::parse_tsv(text);
  if (t.header != coefficient_columns()) throw DataError("coefficient table has unexpected columns");
  std::vector<CoefficientRow> rows;
  for (const auto& f : t.rows) {
    CoefficientRow r;
    r.name = f[0];
    r.estimate = detail::parse_double(f[1], "Estimate");
    r.std_error = detail::parse_double(f[2], "Std. Error");
    r.df = detail::parse_double(f[3], "df");
    r.t_value = detail::parse_double(f[4], "t value");
    r.p_value = detail::parse_double(f[5], "Pr(>|t|)");
    r.stars = f.size() > 6 ? f[6] : "";
    rows.push_back(std::move(r));
  }
  return rows;
}

namespace detail {

inline std::string format_p(double p) {
  return p < 1e-6 ? fmt::format("{:.2e}", p) : fmt::format("{:.6f}", p);
}

}  // namespace detail

// Fixed-width rendering with the significance legend underneath.
inline std::string coefficient_text(const std::vector<CoefficientRow>& rows) {
  std::vector<std::vector<std::string>> cells{coefficient_columns()};
  cells.front().back() = "";
  for (const auto& r : rows) {
    cells.push_back({r.name, fmt::format("{:.6f}", r.estimate), fmt::format("{:.6f}", r.std_error),
                     fmt::format("{:.2f}", r.df), fmt::format("{:.3f}", r.t_value),
                     detail::format_p(r.p_value), r.stars});
  }
  std::vector<std::size_t> width(cells.front().size(), 0);
  for (const auto& row : cells) {
    for (std::size_t i = 0; i < row.size(); ++i) width[i] = std::max(width[i], row[i].size());
  }
  std::string out;
  for (const auto& row : cells) {
    std::string line = fmt::format("{:<{}}", row[0], width[0]);
    for (std::size_t i = 1; i + 1 < row.size(); ++i) line += fmt::format("  {:>{}}", row[i], width[i]);
    line += " " + row.back();
    while (!line.empty() && line.back() == ' ') line.pop_back();
    out += line + '\n';
  }
  out += "---\nSignif. codes: ";
  out += kStarsFooter;
  out += '\n';
  return out;
}

inline std::string quantile_tsv(const ResidualDiagnostics& diag) {
  detail::TsvWriter w({"theoretical", "empirical"});
  for (const auto& [q, e] : diag.quantiles) {
    w.row({detail::format_real(q), detail::format_real(e)});
  }
  return w.str();
}

inline nlohmann::ordered_json fit_manifest_json(const MixedFit& fit, const DesignMatrices& d,
                                                const std::vector<VifEntry>& vifs,
                                                const ResidualDiagnostics& diag) {
  nlohmann::ordered_json j;
  j["criterion_label"] = "REML criterion (-2 restricted log-likelihood)";
  j["reml_criterion"] = fit.reml_criterion;
  j["theta"] = fit.vc.theta;
  j["sigma2"] = fit.vc.sigma2;
  j["tau2"] = fit.vc.tau2;
  j["at_boundary"] = fit.at_boundary;
  j["converged"] = fit.converged;
  j["iterations"] = fit.iterations;
  j["n"] = fit.n;
  j["p"] = fit.p;
  j["groups"] = d.g();
  j["reference_topic"] = d.reference_topic;
  j["reference_stance"] = d.reference_stance;
  j["columns"] = d.column_names;
  auto& blups = j["blups"] = nlohmann::ordered_json::object();
  for (std::size_t k = 0; k < d.g(); ++k) {
    blups[d.group_ids[k]] = fit.blups(static_cast<Eigen::Index>(k));
  }
  auto& v = j["vif"] = nlohmann::ordered_json::object();
  for (const auto& e : vifs) {
    if (e.infinite) {
      v[e.column] = "inf";
    } else {
      v[e.column] = e.vif;
    }
  }
  j["residuals"] = {{"skewness", diag.skewness},
                    {"excess_kurtosis", diag.excess_kurtosis},
                    {"upper_tail_deviation", diag.upper_tail_deviation},
                    {"heavy_upper_tail", diag.heavy_upper_tail},
                    {"degenerate", diag.degenerate},
                    {"quantile_points", diag.quantiles.size()}};
  return j;
}

}  // namespace topicnet

#endif  // TOPICNET_MIXED_MODEL_HPP_
