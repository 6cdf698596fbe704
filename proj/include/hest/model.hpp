#pragma once

#include <Eigen/Dense>
#include <functional>
#include <string>

#include "hest/errors.hpp"

namespace hest {

/// Nonlinear time-variant discrete system
///   x_{k+1} = f_k(x_k) + w_k
///   y_k     = h_k(x_k) + v_k
///
/// Dynamics, measurement and their analytic Jacobians are caller-supplied
/// closures over immutable data; the measurement dimension may change from
/// epoch to epoch. f and h must be deterministic (same inputs, same bits):
/// the estimators rely on re-evaluating them at stored points.
struct NltvModel {
  Eigen::Index state_dim = 0;
  std::function<Eigen::VectorXd(int, const Eigen::VectorXd&)> f;
  std::function<Eigen::VectorXd(int, const Eigen::VectorXd&)> h;
  std::function<Eigen::MatrixXd(int, const Eigen::VectorXd&)> df_dx;
  std::function<Eigen::MatrixXd(int, const Eigen::VectorXd&)> dh_dx;
  std::function<Eigen::Index(int)> meas_dim;
};

/// First-order expansion of f_k about a point xt: f_k(x) ~ A x + u.
/// u absorbs the expansion point (u = f_k(xt) - A xt), so A xt + u
/// reproduces f_k(xt) to rounding.
struct LinearizedDynamics {
  Eigen::MatrixXd A;
  Eigen::VectorXd u;
};

/// First-order expansion of h_k: h_k(x) ~ C x + d, d = h_k(xt) - C xt.
struct LinearizedMeasurement {
  Eigen::MatrixXd C;
  Eigen::VectorXd d;
};

inline LinearizedDynamics linearize_dynamics(const NltvModel& model, int k,
                                             const Eigen::VectorXd& x_tilde) {
  if (x_tilde.size() != model.state_dim)
    throw ContractViolation("linearize_dynamics: point has length " +
                            std::to_string(x_tilde.size()) + ", expected " +
                            std::to_string(model.state_dim));
  LinearizedDynamics lin;
  lin.A = model.df_dx(k, x_tilde);
  if (lin.A.rows() != model.state_dim || lin.A.cols() != model.state_dim)
    throw ContractViolation("linearize_dynamics: Jacobian shape mismatch at k=" +
                            std::to_string(k));
  if (!lin.A.allFinite())
    throw NumericError("linearize_dynamics: non-finite Jacobian at k=" + std::to_string(k));
  lin.u = model.f(k, x_tilde) - lin.A * x_tilde;
  if (!lin.u.allFinite())
    throw NumericError("linearize_dynamics: non-finite offset at k=" + std::to_string(k));
  return lin;
}

inline LinearizedMeasurement linearize_measurement(const NltvModel& model, int k,
                                                   const Eigen::VectorXd& x_tilde) {
  if (x_tilde.size() != model.state_dim)
    throw ContractViolation("linearize_measurement: point has length " +
                            std::to_string(x_tilde.size()) + ", expected " +
                            std::to_string(model.state_dim));
  const Eigen::Index m = model.meas_dim(k);
  if (m < 1)
    throw ContractViolation("linearize_measurement: empty measurement at k=" + std::to_string(k));
  LinearizedMeasurement lin;
  lin.C = model.dh_dx(k, x_tilde);
  if (lin.C.rows() != m || lin.C.cols() != model.state_dim)
    throw ContractViolation("linearize_measurement: Jacobian shape mismatch at k=" +
                            std::to_string(k));
  if (!lin.C.allFinite())
    throw NumericError("linearize_measurement: non-finite Jacobian at k=" + std::to_string(k));
  lin.d = model.h(k, x_tilde) - lin.C * x_tilde;
  if (!lin.d.allFinite())
    throw NumericError("linearize_measurement: non-finite offset at k=" + std::to_string(k));
  return lin;
}

/// Central-difference Jacobian J[i][j] = (fn_i(x + s e_j) - fn_i(x - s e_j)) / (2 s).
/// Test oracle for analytic Jacobians; step should be ~1e-6 for unit-scaled states.
inline Eigen::MatrixXd fd_jacobian(const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& fn,
                                   const Eigen::VectorXd& x, double step) {
  if (!(step > 0.0)) throw ContractViolation("fd_jacobian: step must be positive");
  const Eigen::Index n = x.size();
  Eigen::MatrixXd jac;
  for (Eigen::Index j = 0; j < n; ++j) {
    Eigen::VectorXd xp = x;
    Eigen::VectorXd xm = x;
    xp[j] += step;
    xm[j] -= step;
    const Eigen::VectorXd fp = fn(xp);
    const Eigen::VectorXd fm = fn(xm);
    if (!fp.allFinite() || !fm.allFinite())
      throw NumericError("fd_jacobian: non-finite evaluation along basis direction " +
                         std::to_string(j));
    if (j == 0) jac.resize(fp.size(), n);
    if (fp.size() != jac.rows() || fm.size() != jac.rows())
      throw ContractViolation("fd_jacobian: fn output dimension varies with input");
    jac.col(j) = (fp - fm) / (2.0 * step);
  }
  return jac;
}

}  // namespace hest
