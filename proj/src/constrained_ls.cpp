#include "tdr/constrained_ls.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include <fmt/format.h>

#include "tdr/errors.hpp"

namespace tdr {

namespace {

Eigen::VectorXd gather(const Eigen::VectorXd& v, const std::vector<Eigen::Index>& idx) {
  Eigen::VectorXd out(static_cast<Eigen::Index>(idx.size()));
  for (std::size_t k = 0; k < idx.size(); ++k) out[static_cast<Eigen::Index>(k)] = v[idx[k]];
  return out;
}

Eigen::MatrixXd gather_cols(const Eigen::MatrixXd& m, const std::vector<Eigen::Index>& idx) {
  Eigen::MatrixXd out(m.rows(), static_cast<Eigen::Index>(idx.size()));
  for (std::size_t k = 0; k < idx.size(); ++k) out.col(static_cast<Eigen::Index>(k)) = m.col(idx[k]);
  return out;
}

// Multiplier of the equality constraint that best satisfies g_F + mu c_F = 0.
double equality_multiplier(const Eigen::VectorXd& g, const Eigen::VectorXd& c, const Eigen::VectorXd& beta) {
  double num = 0.0, den = 0.0;
  for (Eigen::Index i = 0; i < beta.size(); ++i)
    if (beta[i] > 0.0) {
      num += c[i] * g[i];
      den += c[i] * c[i];
    }
  return den > 0.0 ? -num / den : 0.0;
}

}  // namespace

double constrained_ls_kkt_residual(const Eigen::MatrixXd& H, const Eigen::VectorXd& c, const Eigen::VectorXd& beta) {
  const double h_scale = std::max(H.cwiseAbs().maxCoeff(), std::numeric_limits<double>::min());
  const Eigen::MatrixXd Hs = H / h_scale;
  const Eigen::VectorXd g = Hs.transpose() * (Hs * beta);
  const double mu = equality_multiplier(g, c, beta);
  const Eigen::VectorXd lambda = g + mu * c;
  const double scale = 1.0 + g.cwiseAbs().maxCoeff() + std::abs(mu) * c.cwiseAbs().maxCoeff();
  double worst = std::abs(c.dot(beta) - 1.0);
  for (Eigen::Index i = 0; i < beta.size(); ++i) {
    worst = std::max(worst, -beta[i]);
    if (beta[i] > 0.0)
      worst = std::max(worst, std::abs(lambda[i]) / scale);
    else
      worst = std::max(worst, -lambda[i] / scale);
  }
  return worst;
}

ConstrainedLsResult solve_constrained_ls(const Eigen::MatrixXd& H, const Eigen::VectorXd& c,
                                         const ConstrainedLsOptions& options) {
  const Eigen::Index m = c.size();
  if (H.cols() != m) throw InvalidInput("solve_constrained_ls: H and c dimensions differ");
  if (m == 0 || c.maxCoeff() <= 0.0) throw InvalidInput("solve_constrained_ls: c needs a positive entry");

  const double h_scale = std::max(H.size() > 0 ? H.cwiseAbs().maxCoeff() : 0.0, std::numeric_limits<double>::min());
  const Eigen::MatrixXd Hs = H / h_scale;
  const std::size_t cap = options.max_iterations > 0 ? options.max_iterations : 50 * static_cast<std::size_t>(m) + 200;

  // Feasible start: equal weights on the coordinates with positive c.
  Eigen::VectorXd beta = Eigen::VectorXd::Zero(m);
  std::vector<bool> free(static_cast<std::size_t>(m), false);
  {
    double mass = 0.0;
    for (Eigen::Index i = 0; i < m; ++i)
      if (c[i] > 0.0) mass += c[i];
    for (Eigen::Index i = 0; i < m; ++i)
      if (c[i] > 0.0) {
        beta[i] = 1.0 / mass;
        free[static_cast<std::size_t>(i)] = true;
      }
  }

  std::size_t iter = 0;
  for (; iter < cap; ++iter) {
    std::vector<Eigen::Index> idx;
    for (Eigen::Index i = 0; i < m; ++i)
      if (free[static_cast<std::size_t>(i)]) idx.push_back(i);

    // Step within {x_F : c_F^T x_F = 1}: p = Z y with y the minimum-norm minimizer of ||H_F (beta_F + Z y)||.
    const Eigen::VectorXd cF = gather(c, idx);
    const Eigen::VectorXd bF = gather(beta, idx);
    Eigen::VectorXd p = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(idx.size()));
    if (idx.size() > 1) {
      Eigen::HouseholderQR<Eigen::MatrixXd> qr(cF);
      const Eigen::MatrixXd Q = qr.householderQ() * Eigen::MatrixXd::Identity(cF.size(), cF.size());
      const Eigen::MatrixXd Z = Q.rightCols(cF.size() - 1);
      const Eigen::MatrixXd HF = gather_cols(Hs, idx);
      const Eigen::MatrixXd A = HF * Z;
      Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(A);
      cod.setThreshold(1e-13);
      const Eigen::VectorXd y = cod.solve(-(HF * bF));
      p = Z * y;
    }

    const double step_scale = 1.0 + bF.cwiseAbs().maxCoeff();
    if (p.cwiseAbs().maxCoeff() <= 1e-15 * step_scale) {
      // Stationary on the current face: check multipliers of the active bounds.
      const Eigen::VectorXd g = Hs.transpose() * (Hs * beta);
      double num = 0.0, den = 0.0;
      for (auto i : idx) {
        num += c[i] * g[i];
        den += c[i] * c[i];
      }
      const double mu = den > 0.0 ? -num / den : 0.0;
      const double scale = 1.0 + g.cwiseAbs().maxCoeff() + std::abs(mu) * c.cwiseAbs().maxCoeff();
      Eigen::Index entering = -1;
      double most_negative = -options.tolerance * 1e-3 * scale;
      for (Eigen::Index i = 0; i < m; ++i) {
        if (free[static_cast<std::size_t>(i)]) continue;
        const double lambda = g[i] + mu * c[i];
        if (lambda < most_negative) {
          most_negative = lambda;
          entering = i;
        }
      }
      if (entering < 0) break;
      free[static_cast<std::size_t>(entering)] = true;
      continue;
    }

    // Ratio test keeps beta >= 0.
    double alpha = 1.0;
    std::size_t blocking = idx.size();
    for (std::size_t k = 0; k < idx.size(); ++k) {
      const double pk = p[static_cast<Eigen::Index>(k)];
      if (pk < 0.0) {
        const double limit = -bF[static_cast<Eigen::Index>(k)] / pk;
        if (limit < alpha) {
          alpha = limit;
          blocking = k;
        }
      }
    }
    for (std::size_t k = 0; k < idx.size(); ++k) beta[idx[k]] += alpha * p[static_cast<Eigen::Index>(k)];
    if (blocking < idx.size()) {
      beta[idx[blocking]] = 0.0;
      free[static_cast<std::size_t>(idx[blocking])] = false;
    }
  }

  for (Eigen::Index i = 0; i < m; ++i) beta[i] = std::max(beta[i], 0.0);
  beta /= c.dot(beta);

  ConstrainedLsResult result;
  result.iterations = iter;
  result.kkt_residual = constrained_ls_kkt_residual(H, c, beta);
  result.objective = (H * beta).squaredNorm();
  result.beta = std::move(beta);
  if (iter >= cap || !(result.kkt_residual <= options.tolerance))
    throw NumericalError(fmt::format("solve_constrained_ls: stopped after {} iterations with KKT residual {:.3e}",
                                     iter, result.kkt_residual),
                         result.kkt_residual);
  return result;
}

}  // namespace tdr
