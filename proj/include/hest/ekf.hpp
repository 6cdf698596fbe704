#pragma once

#include <Eigen/Dense>

#include "hest/mhe.hpp"
#include "hest/model.hpp"

namespace hest {

/// Extended Kalman filter state. Value type, same contract as EstimatorState.
struct EkfState {
  int k = -1;              ///< last processed epoch
  Eigen::VectorXd x_pred;  ///< xhat_{k+1|k}
  Eigen::VectorXd x_filt;  ///< xhat_{k|k} (empty before the first step)
  Eigen::MatrixXd P;       ///< Riccati matrix P_{k+1}
};

inline EkfState ekf_init(const Eigen::VectorXd& x0, const Eigen::MatrixXd& P0) {
  if (P0.rows() != x0.size() || P0.cols() != x0.size())
    throw ContractViolation("ekf_init: P0/x0 dimension mismatch");
  if (!is_spd(P0)) throw NumericError("ekf_init: P0 is not symmetric positive definite");
  return EkfState{-1, x0, Eigen::VectorXd(), P0};
}

/// One predict-update cycle: gain from the information form, filtered point
/// x + K (y - h(x)), prediction through the full nonlinear dynamics, Riccati
/// update. Uses the same gain and Riccati code paths as the horizon estimator
/// so the two stay numerically aligned.
inline EkfState ekf_step(EkfState state, const Eigen::VectorXd& y, const NltvModel& model,
                         const Eigen::MatrixXd& Q, const Eigen::MatrixXd& R) {
  const int t = state.k + 1;
  try {
    if (y.size() != model.meas_dim(t))
      throw ContractViolation("ekf_step: measurement dimension mismatch at epoch " +
                              std::to_string(t));
    const LinearizedMeasurement meas = linearize_measurement(model, t, state.x_pred);
    const Eigen::MatrixXd gain = kalman_gain(state.P, meas.C, R);
    state.x_filt = theorem1_filter_point(state.x_pred, y, gain, model, t);
    const LinearizedDynamics dyn = linearize_dynamics(model, t, state.x_filt);
    const Eigen::MatrixXd p_t = state.P;
    state.x_pred = model.f(t, state.x_filt);
    state.P = riccati_update(p_t, dyn.A, meas.C, Q, R);
    state.k = t;
    return state;
  } catch (const NumericError& e) {
    throw NumericError("epoch " + std::to_string(t) + ": " + e.what());
  }
}

}  // namespace hest
