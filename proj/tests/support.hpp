#pragma once

// Independent reference computations used by the tests. Nothing here calls
// the estimators it is compared against.

#include <Eigen/Dense>

#include <cmath>
#include <random>
#include <string>
#include <vector>

#include <monopsono/econometrics.hpp>

namespace oracle {

using Eigen::MatrixXd;
using Eigen::VectorXd;

struct RandomFrame {
  monopsono::econ::RegressionFrame frame;
  VectorXd beta_true;
};

// y = X b + a_f1 + g_f2 + u, with a small X block correlated with the factors.
inline RandomFrame random_fe_frame(std::mt19937_64& rng, int rows, int levels1, int levels2, int k) {
  std::normal_distribution<double> n01;
  std::uniform_int_distribution<int> pick1(0, levels1 - 1), pick2(0, levels2 - 1);
  std::vector<int> f1(static_cast<std::size_t>(rows)), f2(static_cast<std::size_t>(rows));
  for (int i = 0; i < rows; ++i) {
    f1[static_cast<std::size_t>(i)] = i < levels1 ? i : pick1(rng);
    f2[static_cast<std::size_t>(i)] = i < levels2 ? i : pick2(rng);
  }
  VectorXd a(levels1), g(levels2);
  for (auto& v : a) v = n01(rng);
  for (auto& v : g) v = n01(rng);
  RandomFrame out;
  auto& f = out.frame;
  f.X.resize(rows, k);
  out.beta_true.resize(k);
  for (int j = 0; j < k; ++j) {
    out.beta_true[j] = n01(rng);
    f.x_names.push_back("x" + std::to_string(j));
  }
  f.y.resize(rows);
  for (int i = 0; i < rows; ++i) {
    const auto ui = static_cast<std::size_t>(i);
    for (int j = 0; j < k; ++j) f.X(i, j) = n01(rng) + 0.5 * a[f1[ui]] - 0.3 * g[f2[ui]];
    f.y[i] = f.X.row(i).dot(out.beta_true) + a[f1[ui]] + g[f2[ui]] + n01(rng);
  }
  f.fe.push_back(monopsono::econ::make_factor("f1", f1));
  f.fe.push_back(monopsono::econ::make_factor("f2", f2));
  std::vector<int> cl(static_cast<std::size_t>(rows));
  for (int i = 0; i < rows; ++i) cl[static_cast<std::size_t>(i)] = f1[static_cast<std::size_t>(i)] / 2;
  f.cluster = monopsono::econ::make_factor("cl", cl);
  return out;
}

// OLS with every factor level as an explicit dummy column (first level of
// each factor after the first dropped), solved by complete orthogonal
// decomposition. Returns the coefficients of the X block only.
inline VectorXd dummy_ols(const monopsono::econ::RegressionFrame& f) {
  const Eigen::Index n = f.rows();
  Eigen::Index cols = f.X.cols();
  for (std::size_t q = 0; q < f.fe.size(); ++q) cols += f.fe[q].levels - (q == 0 ? 0 : 1);
  MatrixXd D = MatrixXd::Zero(n, cols);
  D.leftCols(f.X.cols()) = f.X;
  Eigen::Index off = f.X.cols();
  for (std::size_t q = 0; q < f.fe.size(); ++q) {
    const int drop = q == 0 ? 0 : 1;
    for (Eigen::Index i = 0; i < n; ++i) {
      const int c = f.fe[q].codes[static_cast<std::size_t>(i)];
      if (c >= drop) D(i, off + c - drop) = 1.0;
    }
    off += f.fe[q].levels - drop;
  }
  const VectorXd b = D.completeOrthogonalDecomposition().solve(f.y);
  return b.head(f.X.cols());
}

// bread * (sum_i sum_j 1[c_i = c_j] u_i u_j x_i x_j') * bread, CR1-scaled.
inline MatrixXd naive_cluster_vcov(const MatrixXd& X, const VectorXd& u, const std::vector<int>& cluster,
                                   int groups) {
  const Eigen::Index n = X.rows(), k = X.cols();
  const MatrixXd bread = (X.transpose() * X).inverse();
  MatrixXd meat = MatrixXd::Zero(k, k);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j)
      if (cluster[static_cast<std::size_t>(i)] == cluster[static_cast<std::size_t>(j)])
        meat += u[i] * u[j] * X.row(i).transpose() * X.row(j);
  const double g = groups;
  const double scale = g / (g - 1.0) * (static_cast<double>(n) - 1.0) / static_cast<double>(n - k);
  return scale * bread * meat * bread;
}

inline double cov(const VectorXd& a, const VectorXd& b) {
  const double ma = a.mean(), mb = b.mean();
  return ((a.array() - ma) * (b.array() - mb)).sum() / static_cast<double>(a.size() - 1);
}

// Clustered linear IV design: x = pi z + v, y = theta x + phi z + u with
// u and v correlated within clusters.
inline monopsono::econ::RegressionFrame iv_frame(std::mt19937_64& rng, int clusters, int per_cluster,
                                                 double theta, double phi, double pi = 0.6) {
  std::normal_distribution<double> n01;
  const int n = clusters * per_cluster;
  monopsono::econ::RegressionFrame f;
  f.y.resize(n);
  f.X = MatrixXd::Ones(n, 1);
  f.x_names = {"const"};
  f.endog.resize(n, 1);
  f.endog_names = {"x"};
  f.Z.resize(n, 1);
  f.z_names = {"z"};
  std::vector<int> cl(static_cast<std::size_t>(n));
  for (int c = 0; c < clusters; ++c) {
    const double zc = n01(rng), ec = n01(rng);
    for (int r = 0; r < per_cluster; ++r) {
      const int i = c * per_cluster + r;
      const double z = zc + n01(rng);
      const double e = 0.5 * ec + n01(rng);
      const double v = 0.6 * e + 0.8 * n01(rng);
      const double x = pi * z + v;
      f.Z(i, 0) = z;
      f.endog(i, 0) = x;
      f.y[i] = 1.0 + theta * x + phi * z + 0.3 * e;
      cl[static_cast<std::size_t>(i)] = c;
    }
  }
  f.cluster = monopsono::econ::make_factor("cl", cl);
  return f;
}

}  // namespace oracle
