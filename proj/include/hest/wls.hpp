#pragma once

#include <Eigen/Dense>
#include <optional>
#include <string>

#include "hest/errors.hpp"
#include "hest/gnss.hpp"

namespace hest {
namespace gnss {

/// Snapshot weighted least squares position/velocity/clock solution.
struct WlsSolution {
  NavState state = NavState::Zero();
  int iterations = 0;
  bool converged = false;
  double residual_norm = 0.0;  ///< final stacked residual 2-norm
};

inline constexpr double kWlsStepTolerance = 1e-4;  // meters, below the GNSS noise floor
inline constexpr int kWlsMaxIterations = 20;

/// Gauss-Newton on the stacked pseudorange/rate residuals weighted by the
/// measurement information. Solves all eight states jointly; starts from
/// `initial` or from the Earth-center-zero default.
inline WlsSolution wls_solve(const Epoch& epoch, const std::optional<NavState>& initial = {}) {
  int n_pr = 0;
  int n_rate = 0;
  for (const auto& s : epoch.sats) {
    ++n_pr;
    if (s.prr) ++n_rate;
  }
  if (n_pr < 4 || n_rate < 4)
    throw UnderdeterminedError("wls_solve: need >= 4 satellites with pseudoranges and rates, got " +
                               std::to_string(n_pr) + "/" + std::to_string(n_rate));

  const Eigen::VectorXd y = stacked_measurements(epoch);
  const Eigen::MatrixXd r_cov = measurement_covariance(epoch);
  const Eigen::VectorXd w = r_cov.diagonal().cwiseInverse();  // diagonal weighting

  WlsSolution sol;
  sol.state = initial.value_or(NavState::Zero());

  double prev_residual = std::numeric_limits<double>::infinity();
  int growth_streak = 0;
  for (int iter = 1; iter <= kWlsMaxIterations; ++iter) {
    const auto [h, c] = measurement_model(sol.state, epoch);
    const Eigen::VectorXd resid = y - h;
    sol.residual_norm = resid.norm();
    if (sol.residual_norm > prev_residual) {
      if (++growth_streak >= 5)
        throw NonConvergenceError("wls_solve: residual grew for 5 consecutive iterations");
    } else {
      growth_streak = 0;
    }
    prev_residual = sol.residual_norm;

    const Eigen::MatrixXd cw = c.transpose() * w.asDiagonal();
    const Eigen::MatrixXd normal = cw * c;
    Eigen::LLT<Eigen::MatrixXd> llt(normal);
    if (llt.info() != Eigen::Success)
      throw NumericError("wls_solve: normal matrix is singular (degenerate geometry)");
    const Eigen::VectorXd step = llt.solve(cw * resid);
    sol.state += step;
    sol.iterations = iter;
    if (step.norm() < kWlsStepTolerance) {
      sol.converged = true;
      break;
    }
  }
  const auto [h_final, c_unused] = measurement_model(sol.state, epoch);
  sol.residual_norm = (y - h_final).norm();
  return sol;
}

}  // namespace gnss
}  // namespace hest
