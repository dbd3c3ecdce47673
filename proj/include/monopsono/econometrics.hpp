#pragma once

// Linear panel estimation: fixed-effects absorption by alternating
// projections, OLS and 2SLS with classical / HC1 / clustered (CR1)
// covariance, union-of-intervals bounds for plausibly exogenous
// instruments, and a pairs cluster bootstrap.

#include <Eigen/Dense>

#include <algorithm>
#include <boost/math/distributions/normal.hpp>
#include <boost/math/distributions/students_t.hpp>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <numeric>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "csv.hpp"
#include "errors.hpp"
#include "random.hpp"

namespace monopsono::econ {

using Eigen::MatrixXd;
using Eigen::VectorXd;

/// Categorical column with dense codes 0..levels-1.
struct Factor {
  std::string name;
  std::vector<int> codes;
  int levels = 0;
};

/// Dense codes assigned in sorted label order.
template <class Label>
Factor make_factor(std::string name, const std::vector<Label>& labels) {
  std::map<Label, int> ids;
  for (const auto& l : labels) ids.emplace(l, 0);
  int next = 0;
  for (auto& [l, id] : ids) id = next++;
  Factor f;
  f.name = std::move(name);
  f.levels = next;
  f.codes.reserve(labels.size());
  for (const auto& l : labels) f.codes.push_back(ids.at(l));
  return f;
}

struct RegressionFrame {
  std::string y_name = "y";
  VectorXd y;
  std::vector<std::string> x_names;
  MatrixXd X;  // exogenous regressors
  std::vector<std::string> endog_names;
  MatrixXd endog;
  std::vector<std::string> z_names;
  MatrixXd Z;  // excluded instruments
  std::vector<Factor> fe;
  Factor cluster;
  std::optional<VectorXd> weights;
  bool demeaned = false;

  Eigen::Index rows() const { return y.size(); }

  void validate() const {
    const Eigen::Index n = y.size();
    auto check = [&](const MatrixXd& m, const std::vector<std::string>& names, const char* what) {
      if (m.cols() > 0 && m.rows() != n)
        throw DomainError(std::string(what) + " has " + std::to_string(m.rows()) + " rows, expected " +
                          std::to_string(n));
      if (static_cast<std::size_t>(m.cols()) != names.size())
        throw DomainError(std::string(what) + " names do not match its columns");
      if (!m.allFinite()) throw DomainError(std::string(what) + " has missing or non-finite values");
    };
    if (!y.allFinite()) throw DomainError("outcome has missing or non-finite values");
    check(X, x_names, "X");
    check(endog, endog_names, "endogenous block");
    check(Z, z_names, "instrument block");
    if (endog.cols() > 0 && Z.cols() < endog.cols())
      throw DomainError("fewer instruments than endogenous regressors");
    for (const auto& f : fe)
      if (static_cast<Eigen::Index>(f.codes.size()) != n)
        throw DomainError("fixed effect '" + f.name + "' length mismatch");
    if (!cluster.codes.empty() && static_cast<Eigen::Index>(cluster.codes.size()) != n)
      throw DomainError("cluster column length mismatch");
    if (weights) {
      if (weights->size() != n) throw DomainError("weight column length mismatch");
      if ((weights->array() < 0.0).any()) throw DomainError("negative weights");
    }
  }
};

inline MatrixXd hcat(const MatrixXd& a, const MatrixXd& b, Eigen::Index rows) {
  MatrixXd out(rows, a.cols() + b.cols());
  if (a.cols()) out.leftCols(a.cols()) = a;
  if (b.cols()) out.rightCols(b.cols()) = b;
  return out;
}

// ---------------------------------------------------------------------------
// Fixed-effects absorption

struct AbsorbResult {
  RegressionFrame frame;
  int iterations = 0;
  double max_change = 0.0;
};

/// Sweeps group-mean removal over every factor until the largest change in
/// any column during a sweep falls below tol. A single factor is exact after
/// one sweep.
inline AbsorbResult absorb_fixed_effects(const RegressionFrame& in, double tol = 1e-8,
                                         int max_iter = 10000) {
  in.validate();
  if (in.fe.empty()) throw DomainError("no fixed effects to absorb");
  const Eigen::Index n = in.rows();
  const Eigen::Index kx = in.X.cols(), ke = in.endog.cols(), kz = in.Z.cols();
  MatrixXd M(n, 1 + kx + ke + kz);
  M.col(0) = in.y;
  if (kx) M.middleCols(1, kx) = in.X;
  if (ke) M.middleCols(1 + kx, ke) = in.endog;
  if (kz) M.middleCols(1 + kx + ke, kz) = in.Z;
  const Eigen::Index p = M.cols();

  VectorXd w = in.weights ? *in.weights : VectorXd::Ones(n);
  std::vector<std::vector<double>> group_weight;
  for (const auto& f : in.fe) {
    std::vector<double> gw(static_cast<std::size_t>(f.levels), 0.0);
    for (Eigen::Index i = 0; i < n; ++i) gw[static_cast<std::size_t>(f.codes[i])] += w[i];
    group_weight.push_back(std::move(gw));
  }

  AbsorbResult res;
  std::vector<double> sums;
  while (true) {
    double change = 0.0;
    for (std::size_t fi = 0; fi < in.fe.size(); ++fi) {
      const auto& f = in.fe[fi];
      const auto& gw = group_weight[fi];
      sums.assign(static_cast<std::size_t>(f.levels) * static_cast<std::size_t>(p), 0.0);
      for (Eigen::Index c = 0; c < p; ++c) {
        double* s = sums.data() + static_cast<std::size_t>(c) * static_cast<std::size_t>(f.levels);
        const double* col = M.col(c).data();
        for (Eigen::Index i = 0; i < n; ++i) s[f.codes[i]] += w[i] * col[i];
      }
      for (Eigen::Index c = 0; c < p; ++c) {
        double* s = sums.data() + static_cast<std::size_t>(c) * static_cast<std::size_t>(f.levels);
        for (int g = 0; g < f.levels; ++g) s[g] = gw[static_cast<std::size_t>(g)] > 0.0 ? s[g] / gw[static_cast<std::size_t>(g)] : 0.0;
        double* col = M.col(c).data();
        for (Eigen::Index i = 0; i < n; ++i) {
          const double m = s[f.codes[i]];
          col[i] -= m;
          change = std::max(change, std::abs(m));
        }
      }
    }
    ++res.iterations;
    res.max_change = change;
    if (in.fe.size() == 1 || change < tol) break;
    if (res.iterations >= max_iter)
      throw EstimationError("fixed-effect absorption did not converge after " +
                            std::to_string(max_iter) + " sweeps (last change " + csv::fmt(change) + ")");
  }

  res.frame = in;
  res.frame.y = M.col(0);
  if (kx) res.frame.X = M.middleCols(1, kx);
  if (ke) res.frame.endog = M.middleCols(1 + kx, ke);
  if (kz) res.frame.Z = M.middleCols(1 + kx + ke, kz);
  res.frame.demeaned = true;
  return res;
}

// ---------------------------------------------------------------------------
// Covariance

enum class VcovKind { classical, hc1, cluster };

struct VcovOptions {
  VcovKind kind = VcovKind::cluster;
  bool small_sample = true;  // CR1 / HC1 scaling
};

/// Liang-Zeger sandwich bread * (sum_g s_g s_g') * bread with scores
/// s_g = sum_{i in g} w_i u_i x_i, scaled by G/(G-1) * (N-1)/(N-K) when
/// small_sample is set.
inline MatrixXd cluster_vcov(const MatrixXd& scores_design, const VectorXd& residuals,
                             const MatrixXd& bread, const Factor& cluster,
                             const std::optional<VectorXd>& weights, bool small_sample = true) {
  const Eigen::Index n = scores_design.rows(), k = scores_design.cols();
  if (static_cast<Eigen::Index>(cluster.codes.size()) != n)
    throw DomainError("cluster column length mismatch");
  std::vector<char> seen(static_cast<std::size_t>(cluster.levels), 0);
  for (int c : cluster.codes) seen[static_cast<std::size_t>(c)] = 1;
  const auto g = std::count(seen.begin(), seen.end(), 1);
  if (g < 2) throw EstimationError("clustered covariance needs at least two clusters");

  MatrixXd S = MatrixXd::Zero(cluster.levels, k);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double wi = weights ? (*weights)[i] : 1.0;
    S.row(cluster.codes[static_cast<std::size_t>(i)]) += (wi * residuals[i]) * scores_design.row(i);
  }
  const MatrixXd meat = S.transpose() * S;
  MatrixXd V = bread * meat * bread;
  if (small_sample) {
    const double G = static_cast<double>(g), N = static_cast<double>(n), K = static_cast<double>(k);
    V *= (G / (G - 1.0)) * ((N - 1.0) / (N - K));
  }
  return 0.5 * (V + V.transpose());
}

inline MatrixXd hc1_vcov(const MatrixXd& scores_design, const VectorXd& residuals,
                         const MatrixXd& bread, const std::optional<VectorXd>& weights,
                         bool small_sample = true) {
  const Eigen::Index n = scores_design.rows(), k = scores_design.cols();
  MatrixXd meat = MatrixXd::Zero(k, k);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double wi = weights ? (*weights)[i] : 1.0;
    const double s = wi * residuals[i];
    meat.noalias() += (s * s) * scores_design.row(i).transpose() * scores_design.row(i);
  }
  MatrixXd V = bread * meat * bread;
  if (small_sample) V *= static_cast<double>(n) / static_cast<double>(n - k);
  return 0.5 * (V + V.transpose());
}

// ---------------------------------------------------------------------------
// Fits

struct FitResult {
  std::vector<std::string> names;
  VectorXd beta;
  MatrixXd vcov;
  VectorXd residuals;
  std::size_t n = 0, k = 0, g = 0;
  double r2_within = 0.0;
  std::optional<double> first_stage_f;   // smallest across endogenous columns
  std::vector<double> first_stage_fs;    // one per endogenous column
  std::vector<VectorXd> first_stage_coef;  // coefficients on the excluded instruments
  int dof = 0;
  VcovKind vcov_kind = VcovKind::cluster;

  std::size_t index_of(const std::string& name) const {
    for (std::size_t i = 0; i < names.size(); ++i)
      if (names[i] == name) return i;
    throw DomainError("no coefficient named '" + name + "'");
  }
  double coef(const std::string& name) const { return beta[static_cast<Eigen::Index>(index_of(name))]; }
  double se(std::size_t i) const {
    return std::sqrt(std::max(0.0, vcov(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(i))));
  }
  double se(const std::string& name) const { return se(index_of(name)); }
  double t(std::size_t i) const { return beta[static_cast<Eigen::Index>(i)] / se(i); }

  double critical(double level) const {
    const double q = 0.5 + 0.5 * level;
    if (dof > 0) return boost::math::quantile(boost::math::students_t(dof), q);
    return boost::math::quantile(boost::math::normal(), q);
  }
  double p(std::size_t i) const {
    const double tt = std::abs(t(i));
    if (!std::isfinite(tt)) return std::isnan(tt) ? tt : 0.0;
    if (dof > 0) return 2.0 * boost::math::cdf(boost::math::complement(boost::math::students_t(dof), tt));
    return 2.0 * boost::math::cdf(boost::math::complement(boost::math::normal(), tt));
  }
  std::pair<double, double> ci(std::size_t i, double level) const {
    const double c = critical(level);
    const double b = beta[static_cast<Eigen::Index>(i)];
    return {b - c * se(i), b + c * se(i)};
  }
};

namespace detail {

inline MatrixXd weighted(const MatrixXd& m, const std::optional<VectorXd>& w) {
  if (!w) return m;
  return w->cwiseSqrt().asDiagonal() * m;
}

inline VectorXd weighted(const VectorXd& v, const std::optional<VectorXd>& w) {
  if (!w) return v;
  return w->cwiseSqrt().cwiseProduct(v);
}

/// Throws naming the first column that is linearly dependent on earlier ones.
inline void require_full_rank(const MatrixXd& D, const std::vector<std::string>& names,
                              const char* what) {
  if (D.cols() == 0) throw EstimationError(std::string(what) + ": no regressors");
  if (D.rows() < D.cols())
    throw EstimationError(std::string(what) + ": fewer observations than regressors");
  const double scale = std::max(1.0, D.cwiseAbs().maxCoeff());
  {
    Eigen::ColPivHouseholderQR<MatrixXd> qr(D);
    qr.setThreshold(1e-10);
    bool tiny = false;
    for (Eigen::Index j = 0; j < D.cols(); ++j)
      tiny = tiny || D.col(j).norm() <= 1e-12 * scale * std::sqrt(static_cast<double>(D.rows()));
    if (!tiny && qr.rank() == D.cols()) return;
  }
  for (Eigen::Index j = 0; j < D.cols(); ++j) {
    Eigen::ColPivHouseholderQR<MatrixXd> qr(D.leftCols(j + 1));
    qr.setThreshold(1e-10);
    const bool tiny = D.col(j).norm() <= 1e-12 * scale * std::sqrt(static_cast<double>(D.rows()));
    if (tiny || qr.rank() < j + 1)
      throw EstimationError(std::string(what) + ": regressor '" + names[static_cast<std::size_t>(j)] +
                            "' is collinear with earlier columns");
  }
}

inline std::size_t cluster_count(const Factor& f) {
  std::vector<char> seen(static_cast<std::size_t>(f.levels), 0);
  for (int c : f.codes) seen[static_cast<std::size_t>(c)] = 1;
  return static_cast<std::size_t>(std::count(seen.begin(), seen.end(), 1));
}

inline VcovKind effective_kind(const RegressionFrame& f, VcovOptions opt) {
  if (opt.kind == VcovKind::cluster && f.cluster.codes.empty()) return VcovKind::hc1;
  return opt.kind;
}

inline MatrixXd compute_vcov(const MatrixXd& scores, const VectorXd& u, const MatrixXd& bread,
                             const RegressionFrame& f, VcovKind kind, bool small_sample) {
  switch (kind) {
    case VcovKind::classical: {
      const double n = static_cast<double>(scores.rows()), k = static_cast<double>(scores.cols());
      double ssr = 0.0;
      for (Eigen::Index i = 0; i < u.size(); ++i) ssr += (f.weights ? (*f.weights)[i] : 1.0) * u[i] * u[i];
      return (ssr / (n - k)) * bread;
    }
    case VcovKind::hc1: return hc1_vcov(scores, u, bread, f.weights, small_sample);
    case VcovKind::cluster: return cluster_vcov(scores, u, bread, f.cluster, f.weights, small_sample);
  }
  return bread;
}

inline double within_r2(const RegressionFrame& f, const VectorXd& u) {
  const VectorXd w = f.weights ? *f.weights : VectorXd::Ones(f.rows());
  const double sw = w.sum();
  const double ybar = f.demeaned ? 0.0 : w.dot(f.y) / sw;
  double tss = 0.0, ssr = 0.0;
  for (Eigen::Index i = 0; i < f.rows(); ++i) {
    tss += w[i] * (f.y[i] - ybar) * (f.y[i] - ybar);
    ssr += w[i] * u[i] * u[i];
  }
  return tss > 0.0 ? 1.0 - ssr / tss : 0.0;
}

inline void finish(FitResult& r, const RegressionFrame& f, VcovKind kind) {
  r.n = static_cast<std::size_t>(f.rows());
  r.k = static_cast<std::size_t>(r.beta.size());
  r.g = f.cluster.codes.empty() ? r.n : cluster_count(f.cluster);
  r.vcov_kind = kind;
  r.dof = kind == VcovKind::cluster ? static_cast<int>(r.g) - 1 : static_cast<int>(r.n - r.k);
  r.r2_within = within_r2(f, r.residuals);
}

}  // namespace detail

/// Least squares of y on [X, endog].
inline FitResult ols(const RegressionFrame& f, VcovOptions opt = {}) {
  f.validate();
  const Eigen::Index n = f.rows();
  const MatrixXd D = hcat(f.X, f.endog, n);
  std::vector<std::string> names = f.x_names;
  names.insert(names.end(), f.endog_names.begin(), f.endog_names.end());
  const MatrixXd Dw = detail::weighted(D, f.weights);
  const VectorXd yw = detail::weighted(f.y, f.weights);
  detail::require_full_rank(Dw, names, "ols");

  FitResult r;
  r.names = std::move(names);
  Eigen::ColPivHouseholderQR<MatrixXd> qr(Dw);
  r.beta = qr.solve(yw);
  r.residuals = f.y - D * r.beta;
  const MatrixXd bread = (Dw.transpose() * Dw).ldlt().solve(MatrixXd::Identity(D.cols(), D.cols()));
  const VcovKind kind = detail::effective_kind(f, opt);
  r.vcov = detail::compute_vcov(D, r.residuals, bread, f, kind, opt.small_sample);
  detail::finish(r, f, kind);
  return r;
}

/// Two-stage least squares of y on [X, endog] with instruments [X, Z]. The
/// first-stage F is the Wald test of the excluded instruments using the same
/// covariance estimator as the main fit.
inline FitResult tsls(const RegressionFrame& f, VcovOptions opt = {}) {
  f.validate();
  if (f.endog.cols() == 0) throw EstimationError("tsls needs at least one endogenous regressor");
  if (f.Z.cols() < f.endog.cols()) throw EstimationError("tsls is under-identified");
  const Eigen::Index n = f.rows();
  const MatrixXd D = hcat(f.X, f.endog, n);
  const MatrixXd W = hcat(f.X, f.Z, n);
  std::vector<std::string> names = f.x_names;
  names.insert(names.end(), f.endog_names.begin(), f.endog_names.end());
  std::vector<std::string> wnames = f.x_names;
  wnames.insert(wnames.end(), f.z_names.begin(), f.z_names.end());

  const MatrixXd Ww = detail::weighted(W, f.weights);
  const MatrixXd Dw = detail::weighted(D, f.weights);
  const VectorXd yw = detail::weighted(f.y, f.weights);
  try {
    detail::require_full_rank(Ww, wnames, "first stage");
  } catch (const EstimationError& e) {
    throw EstimationError(std::string("rank-deficient first stage: ") + e.what());
  }
  const VcovKind kind = detail::effective_kind(f, opt);

  FitResult r;
  // First stages.
  Eigen::ColPivHouseholderQR<MatrixXd> wqr(Ww);
  const MatrixXd wbread = (Ww.transpose() * Ww).ldlt().solve(MatrixXd::Identity(W.cols(), W.cols()));
  const Eigen::Index kx = f.X.cols(), kz = f.Z.cols();
  MatrixXd Dhat = D;
  for (Eigen::Index e = 0; e < f.endog.cols(); ++e) {
    const VectorXd pi = wqr.solve(Dw.col(kx + e));
    const VectorXd fitted = W * pi;
    const VectorXd u1 = f.endog.col(e) - fitted;
    const MatrixXd V1 = detail::compute_vcov(W, u1, wbread, f, kind, opt.small_sample);
    const VectorXd piz = pi.tail(kz);
    const MatrixXd Vz = V1.bottomRightCorner(kz, kz);
    const double F = piz.dot(Vz.ldlt().solve(piz)) / static_cast<double>(kz);
    r.first_stage_fs.push_back(F);
    r.first_stage_coef.push_back(piz);
    Dhat.col(kx + e) = fitted;
  }
  const MatrixXd Dhw = detail::weighted(Dhat, f.weights);
  try {
    detail::require_full_rank(Dhw, names, "second stage");
  } catch (const EstimationError& e) {
    throw EstimationError(std::string("rank-deficient first stage: ") + e.what());
  }
  r.names = std::move(names);
  Eigen::ColPivHouseholderQR<MatrixXd> qr(Dhw);
  r.beta = qr.solve(yw);
  r.residuals = f.y - D * r.beta;
  const MatrixXd bread =
      (Dhw.transpose() * Dhw).ldlt().solve(MatrixXd::Identity(D.cols(), D.cols()));
  r.vcov = detail::compute_vcov(Dhat, r.residuals, bread, f, kind, opt.small_sample);
  r.first_stage_f = *std::min_element(r.first_stage_fs.begin(), r.first_stage_fs.end());
  if (!std::isfinite(*r.first_stage_f)) throw EstimationError("first-stage F is not finite");
  detail::finish(r, f, kind);
  return r;
}

// ---------------------------------------------------------------------------
// Plausibly exogenous bounds (union of confidence intervals)

struct ConleyPoint {
  double phi = 0.0;
  double beta = 0.0;
  double lo = 0.0;
  double hi = 0.0;
};

struct ConleyResult {
  double theta_lo = 0.0;
  double theta_hi = 0.0;
  std::vector<ConleyPoint> points;
  // Grid value of largest |phi| whose interval lies entirely below zero.
  std::optional<double> phi_negative;
};

/// For each phi on an even grid over [phi_min, phi_max], re-estimates 2SLS with
/// outcome y - phi * z and collects the level-sized interval for the first
/// endogenous coefficient; the bounds are the envelope of these intervals.
inline ConleyResult conley_bounds(const RegressionFrame& f, double phi_min, double phi_max,
                                  int grid_points = 101, double level = 0.90, VcovOptions opt = {}) {
  if (phi_min > phi_max) throw DomainError("phi_min exceeds phi_max");
  if (f.Z.cols() != 1) throw DomainError("plausibly exogenous bounds need exactly one instrument");
  if (grid_points < 1) throw DomainError("grid needs at least one point");
  const std::size_t target = static_cast<std::size_t>(f.X.cols());
  ConleyResult res;
  const int points = phi_min == phi_max ? 1 : std::max(grid_points, 2);
  RegressionFrame g = f;
  for (int i = 0; i < points; ++i) {
    const double phi =
        points == 1 ? phi_min : phi_min + (phi_max - phi_min) * static_cast<double>(i) / (points - 1);
    g.y = f.y - phi * f.Z.col(0);
    const FitResult fit = tsls(g, opt);
    const auto [lo, hi] = fit.ci(target, level);
    res.points.push_back({phi, fit.beta[static_cast<Eigen::Index>(target)], lo, hi});
  }
  res.theta_lo = res.points.front().lo;
  res.theta_hi = res.points.front().hi;
  for (const auto& p : res.points) {
    res.theta_lo = std::min(res.theta_lo, p.lo);
    res.theta_hi = std::max(res.theta_hi, p.hi);
    if (p.hi < 0.0 && (!res.phi_negative || std::abs(p.phi) > std::abs(*res.phi_negative)))
      res.phi_negative = p.phi;
  }
  return res;
}

// ---------------------------------------------------------------------------
// Cluster bootstrap

struct BootstrapResult {
  double se = 0.0;
  std::vector<double> draws;  // successful replicates, in replicate order
  int failed = 0;
};

/// Runs stat on b cluster draws (G clusters drawn with replacement from
/// 0..G-1). Replicates that throw or return nothing are dropped; more than
/// 20% failures is an error.
template <class Stat>
BootstrapResult bootstrap_clusters(int cluster_count, int b, std::uint64_t seed, Stat&& stat,
                                   int threads = 1) {
  if (b < 2) throw DomainError("bootstrap needs at least two replicates");
  if (cluster_count < 2) throw DomainError("bootstrap needs at least two clusters");
  std::vector<std::optional<double>> out(static_cast<std::size_t>(b));
  auto work = [&](int begin, int end) {
    std::vector<int> draw(static_cast<std::size_t>(cluster_count));
    for (int r = begin; r < end; ++r) {
      std::mt19937_64 rng(derived_seed(seed, static_cast<std::uint64_t>(r)));
      std::uniform_int_distribution<int> pick(0, cluster_count - 1);
      for (auto& d : draw) d = pick(rng);
      try {
        std::optional<double> v = stat(std::span<const int>(draw));
        if (v && std::isfinite(*v)) out[static_cast<std::size_t>(r)] = v;
      } catch (const std::exception&) {
      }
    }
  };
  threads = std::clamp(threads, 1, b);
  if (threads == 1) {
    work(0, b);
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < threads; ++t)
      pool.emplace_back(work, b * t / threads, b * (t + 1) / threads);
    for (auto& th : pool) th.join();
  }
  BootstrapResult res;
  for (const auto& v : out) {
    if (v)
      res.draws.push_back(*v);
    else
      ++res.failed;
  }
  if (res.failed * 5 > b)
    throw EstimationError("bootstrap: " + std::to_string(res.failed) + " of " + std::to_string(b) +
                          " replicates failed");
  if (res.draws.size() < 2) throw EstimationError("bootstrap: fewer than two successful replicates");
  const double m = std::accumulate(res.draws.begin(), res.draws.end(), 0.0) /
                   static_cast<double>(res.draws.size());
  double ss = 0.0;
  for (double d : res.draws) ss += (d - m) * (d - m);
  res.se = std::sqrt(ss / static_cast<double>(res.draws.size() - 1));
  return res;
}

/// Row lists per cluster code.
inline std::vector<std::vector<Eigen::Index>> cluster_rows(const Factor& cluster) {
  std::vector<std::vector<Eigen::Index>> rows(static_cast<std::size_t>(cluster.levels));
  for (std::size_t i = 0; i < cluster.codes.size(); ++i)
    rows[static_cast<std::size_t>(cluster.codes[i])].push_back(static_cast<Eigen::Index>(i));
  return rows;
}

/// Frame built from drawn clusters; each draw becomes its own cluster.
inline RegressionFrame resample_clusters(const RegressionFrame& f,
                                         const std::vector<std::vector<Eigen::Index>>& rows,
                                         std::span<const int> draw) {
  std::vector<Eigen::Index> idx;
  std::vector<int> new_cluster;
  for (std::size_t d = 0; d < draw.size(); ++d) {
    for (Eigen::Index i : rows[static_cast<std::size_t>(draw[d])]) {
      idx.push_back(i);
      new_cluster.push_back(static_cast<int>(d));
    }
  }
  const auto n = static_cast<Eigen::Index>(idx.size());
  RegressionFrame g;
  g.y_name = f.y_name;
  g.x_names = f.x_names;
  g.endog_names = f.endog_names;
  g.z_names = f.z_names;
  g.demeaned = false;
  g.y.resize(n);
  g.X.resize(n, f.X.cols());
  g.endog.resize(n, f.endog.cols());
  g.Z.resize(n, f.Z.cols());
  if (f.weights) g.weights = VectorXd(n);
  for (Eigen::Index r = 0; r < n; ++r) {
    const Eigen::Index i = idx[static_cast<std::size_t>(r)];
    g.y[r] = f.y[i];
    if (f.X.cols()) g.X.row(r) = f.X.row(i);
    if (f.endog.cols()) g.endog.row(r) = f.endog.row(i);
    if (f.Z.cols()) g.Z.row(r) = f.Z.row(i);
    if (f.weights) (*g.weights)[r] = (*f.weights)[i];
  }
  for (const auto& fac : f.fe) {
    Factor h;
    h.name = fac.name;
    h.levels = fac.levels;
    h.codes.reserve(idx.size());
    for (Eigen::Index i : idx) h.codes.push_back(fac.codes[static_cast<std::size_t>(i)]);
    g.fe.push_back(std::move(h));
  }
  g.cluster.name = f.cluster.name;
  g.cluster.levels = static_cast<int>(draw.size());
  g.cluster.codes = std::move(new_cluster);
  return g;
}

/// Pairs cluster bootstrap standard error of a frame statistic.
template <class Estimator>
BootstrapResult cluster_bootstrap(const RegressionFrame& f, Estimator&& estimator, int b,
                                  std::uint64_t seed, int threads = 1) {
  if (f.cluster.codes.empty()) throw DomainError("bootstrap needs a cluster column");
  const auto rows = cluster_rows(f.cluster);
  // Compact to clusters that actually occur.
  std::vector<std::vector<Eigen::Index>> present;
  for (const auto& r : rows)
    if (!r.empty()) present.push_back(r);
  return bootstrap_clusters(
      static_cast<int>(present.size()), b, seed,
      [&](std::span<const int> draw) -> std::optional<double> {
        return estimator(resample_clusters(f, present, draw));
      },
      threads);
}

// ---------------------------------------------------------------------------
// Output

inline std::string fit_result_csv(const FitResult& r) {
  csv::Writer w({"term", "coefficient", "se", "t", "p"});
  for (std::size_t i = 0; i < r.names.size(); ++i)
    w.row({r.names[i], csv::fmt(r.beta[static_cast<Eigen::Index>(i)]), csv::fmt(r.se(i)),
           csv::fmt(r.t(i)), csv::fmt(r.p(i))});
  w.row({"#diagnostics", "", "", "", ""});
  w.row({"n", std::to_string(r.n), "", "", ""});
  w.row({"g", std::to_string(r.g), "", "", ""});
  w.row({"k", std::to_string(r.k), "", "", ""});
  w.row({"dof", std::to_string(r.dof), "", "", ""});
  w.row({"first_stage_f", r.first_stage_f ? csv::fmt(*r.first_stage_f) : "", "", "", ""});
  w.row({"r2_within", csv::fmt(r.r2_within), "", "", ""});
  return w.str();
}

}  // namespace monopsono::econ
