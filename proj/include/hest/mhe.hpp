#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <deque>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "hest/errors.hpp"
#include "hest/linalg.hpp"
#include "hest/model.hpp"

namespace hest {

/// Per-epoch noise statistics. Q(j) covers the transition j -> j+1, R(j) the
/// measurement at epoch j. All matrices must be symmetric positive definite;
/// this is checked when a horizon is assembled.
struct NoiseSchedule {
  std::function<Eigen::MatrixXd(int)> Q;
  std::function<Eigen::MatrixXd(int)> R;
};

enum class MheVariant {
  kWithArrivalCost,  ///< full recursive MHE: prior information enters the window
  kNoArrivalCost,    ///< filtering FGO: the prior information block is zeroed
};

/// Sliding window of everything needed to assemble one horizon problem.
/// Entry r corresponds to absolute epoch j = start + r. The window holds the
/// current epoch plus up to N past ones; while fewer epochs exist the window
/// is simply shorter (truncated horizon).
struct HorizonWindow {
  int start = 0;                          ///< absolute epoch index of the oldest entry
  Eigen::VectorXd prior_state;            ///< xhat_{start|start-1}, state entering the window
  Eigen::MatrixXd prior_cov;              ///< P_start, covariance of the prior estimate
  std::vector<Eigen::VectorXd> y;         ///< measurements, epochs start..k
  std::vector<Eigen::MatrixXd> R;         ///< measurement covariances
  std::vector<Eigen::MatrixXd> Q;         ///< process covariances (transition j -> j+1)
  std::vector<Eigen::VectorXd> lin_pred;  ///< x~_{j|j-1}: linearization points for h
  std::vector<Eigen::VectorXd> lin_filt;  ///< x~_{j|j}:   linearization points for f

  int size() const { return static_cast<int>(y.size()); }
  int k() const { return start + size() - 1; }  ///< newest epoch
  int horizon() const { return size() - 1; }    ///< effective N of this window
};

/// The stacked linear least squares problem over the window's noise estimates
/// Omega = [w_{start-1}, w_{start}, ..., w_{k-1}] (block length = state_dim):
///
///   min  Omega^T Qtilde Omega + (B - D Omega)^T Rbig (B - D Omega)
///
/// Qtilde carries the prior and process information blocks, Rbig the
/// measurement information, B the measurement residuals against the
/// deterministic propagation of the prior, and D maps noise estimates to
/// measurement space (block lower triangular with C A-chain entries).
/// Atilde maps the noise stack to the one-step prediction, drift is the
/// deterministic part of that prediction.
struct HorizonSystem {
  Eigen::MatrixXd Qtilde;
  Eigen::MatrixXd Rbig;
  Eigen::VectorXd B;
  Eigen::MatrixXd D;
  Eigen::MatrixXd Atilde;
  Eigen::VectorXd drift;
  std::vector<LinearizedDynamics> dyn;     ///< per-epoch linearized dynamics
  std::vector<LinearizedMeasurement> meas; ///< per-epoch linearized measurements
  std::vector<Eigen::Index> row_offset;    ///< start row of each epoch block; last = total rows

  /// Information matrix of the noise stack, E = D^T Rbig D.
  Eigen::MatrixXd E() const { return D.transpose() * Rbig * D; }
  /// Weighting matrix G = D^T Rbig.
  Eigen::MatrixXd G() const { return D.transpose() * Rbig; }
};

/// Product of transition matrices A_k A_{k-1} ... A_{k-n+1}; n == 0 gives the
/// identity. a[j] holds the transition matrix at time j.
inline Eigen::MatrixXd chained_transition(std::span<const Eigen::MatrixXd> a, Eigen::Index k,
                                          Eigen::Index n) {
  if (a.empty()) throw ContractViolation("chained_transition: empty sequence");
  const Eigen::Index dim = a.front().rows();
  Eigen::MatrixXd prod = Eigen::MatrixXd::Identity(dim, dim);
  if (n == 0) return prod;
  if (n < 0 || k >= static_cast<Eigen::Index>(a.size()) || k - n + 1 < 0)
    throw ContractViolation("chained_transition: sequence does not cover [k-n+1, k]");
  for (Eigen::Index i = 0; i < n; ++i) prod = prod * a[k - i];
  return prod;
}

/// State estimate at epoch j from the prior and the stacked noise estimates:
/// the chained transition of the prior, plus accumulated offsets, plus the
/// noise terms each propagated from its insertion epoch to j.
/// dyn[r] is the linearized dynamics at epoch start + r.
inline Eigen::VectorXd lemma1_state(const HorizonWindow& win,
                                    std::span<const LinearizedDynamics> dyn,
                                    const Eigen::VectorXd& omega, int j) {
  const int r = j - win.start;
  const int W = win.size();
  const Eigen::Index n = win.prior_state.size();
  if (r < 0 || r >= W)
    throw ContractViolation("lemma1_state: epoch " + std::to_string(j) + " outside window");
  if (omega.size() != static_cast<Eigen::Index>(W) * n)
    throw ContractViolation("lemma1_state: noise stack has wrong length");
  if (static_cast<int>(dyn.size()) < r)
    throw ContractViolation("lemma1_state: missing linearized dynamics");

  // psi tracks the transition from epoch start+i to j while i runs backwards.
  Eigen::VectorXd x = omega.segment(static_cast<Eigen::Index>(r) * n, n);
  Eigen::MatrixXd psi = Eigen::MatrixXd::Identity(n, n);
  for (int i = r - 1; i >= 0; --i) {
    x += psi * dyn[i].u;  // offset at i enters one step later than its noise
    psi = psi * dyn[i].A;
    x += psi * omega.segment(static_cast<Eigen::Index>(i) * n, n);
  }
  x += psi * win.prior_state;
  return x;
}

namespace detail {

/// Core assembly once all epochs are linearized. Shared by assemble_horizon
/// and by oracles that rebuild sub-horizons from already-linearized pieces.
inline HorizonSystem assemble_from_linearized(const HorizonWindow& win,
                                              std::vector<LinearizedDynamics> dyn,
                                              std::vector<LinearizedMeasurement> meas,
                                              MheVariant variant) {
  const int W = win.size();
  if (W < 1) throw ContractViolation("assemble_horizon: empty window");
  const Eigen::Index n = win.prior_state.size();
  if (win.prior_cov.rows() != n || win.prior_cov.cols() != n)
    throw ContractViolation("assemble_horizon: prior covariance shape mismatch");
  if (static_cast<int>(win.R.size()) != W || static_cast<int>(win.lin_pred.size()) != W ||
      static_cast<int>(win.lin_filt.size()) != W)
    throw ContractViolation("assemble_horizon: window sequences inconsistent with size");
  if (static_cast<int>(win.Q.size()) < W - 1)
    throw ContractViolation("assemble_horizon: missing process noise blocks");

  HorizonSystem sys;
  sys.dyn = std::move(dyn);
  sys.meas = std::move(meas);

  sys.row_offset.resize(W + 1);
  sys.row_offset[0] = 0;
  for (int r = 0; r < W; ++r) sys.row_offset[r + 1] = sys.row_offset[r] + sys.meas[r].C.rows();
  const Eigen::Index m_total = sys.row_offset[W];
  const Eigen::Index nw = static_cast<Eigen::Index>(W) * n;

  // prior + process information blocks
  sys.Qtilde = Eigen::MatrixXd::Zero(nw, nw);
  if (variant == MheVariant::kWithArrivalCost)
    sys.Qtilde.topLeftCorner(n, n) =
        spd_inverse(win.prior_cov, "prior covariance P_" + std::to_string(win.start));
  for (int r = 0; r + 1 < W; ++r)
    sys.Qtilde.block((r + 1) * n, (r + 1) * n, n, n) =
        spd_inverse(win.Q[r], "process noise Q_" + std::to_string(win.start + r));

  // measurement information blocks
  sys.Rbig = Eigen::MatrixXd::Zero(m_total, m_total);
  for (int r = 0; r < W; ++r) {
    const Eigen::Index mr = sys.meas[r].C.rows();
    if (win.y[r].size() != mr)
      throw ContractViolation("assemble_horizon: measurement length mismatch at epoch " +
                              std::to_string(win.start + r));
    sys.Rbig.block(sys.row_offset[r], sys.row_offset[r], mr, mr) =
        spd_inverse(win.R[r], "measurement noise R_" + std::to_string(win.start + r));
  }

  // deterministic propagation of the prior through the window
  std::vector<Eigen::VectorXd> xbar(W + 1);
  xbar[0] = win.prior_state;
  for (int r = 0; r < W; ++r) xbar[r + 1] = sys.dyn[r].A * xbar[r] + sys.dyn[r].u;
  sys.drift = xbar[W];

  // residual stack and the block-lower-triangular noise-to-measurement map
  sys.B.resize(m_total);
  sys.D = Eigen::MatrixXd::Zero(m_total, nw);
  for (int r = 0; r < W; ++r) {
    const Eigen::Index mr = sys.meas[r].C.rows();
    const Eigen::Index row = sys.row_offset[r];
    sys.B.segment(row, mr) = win.y[r] - sys.meas[r].C * xbar[r] - sys.meas[r].d;
    Eigen::MatrixXd cpsi = sys.meas[r].C;  // C_j times the transition from i to j
    sys.D.block(row, static_cast<Eigen::Index>(r) * n, mr, n) = cpsi;
    for (int i = r - 1; i >= 0; --i) {
      cpsi = cpsi * sys.dyn[i].A;
      sys.D.block(row, static_cast<Eigen::Index>(i) * n, mr, n) = cpsi;
    }
  }

  // transitions from each insertion epoch to the one-step prediction
  sys.Atilde.resize(n, nw);
  Eigen::MatrixXd at = sys.dyn[W - 1].A;
  sys.Atilde.block(0, static_cast<Eigen::Index>(W - 1) * n, n, n) = at;
  for (int i = W - 2; i >= 0; --i) {
    at = at * sys.dyn[i].A;
    sys.Atilde.block(0, static_cast<Eigen::Index>(i) * n, n, n) = at;
  }
  return sys;
}

}  // namespace detail

/// Linearizes every epoch of the window at its stored points and assembles the
/// horizon least squares problem.
inline HorizonSystem assemble_horizon(const HorizonWindow& win, const NltvModel& model,
                                      MheVariant variant = MheVariant::kWithArrivalCost) {
  const int W = win.size();
  std::vector<LinearizedDynamics> dyn(W);
  std::vector<LinearizedMeasurement> meas(W);
  for (int r = 0; r < W; ++r) {
    const int t = win.start + r;
    dyn[r] = linearize_dynamics(model, t, win.lin_filt[r]);
    meas[r] = linearize_measurement(model, t, win.lin_pred[r]);
  }
  return detail::assemble_from_linearized(win, std::move(dyn), std::move(meas), variant);
}

/// Minimizer of the horizon cost: Omega = (E + Qtilde)^{-1} G B.
/// The gradient of the cost vanishes at the returned stack.
inline Eigen::VectorXd solve_noise_estimates(const HorizonSystem& sys, SolveInfo* info = nullptr) {
  const Eigen::MatrixXd g = sys.D.transpose() * sys.Rbig;
  const Eigen::MatrixXd m = g * sys.D + sys.Qtilde;
  return solve_normal_equations(m, g * sys.B, info, "horizon solve");
}

/// One-step prediction from the window: deterministic drift plus the
/// propagated noise corrections.
inline Eigen::VectorXd predict_state(const HorizonWindow& win, const HorizonSystem& sys,
                                     const Eigen::VectorXd& omega) {
  (void)win;
  if (omega.size() != sys.Atilde.cols())
    throw ContractViolation("predict_state: noise stack has wrong length");
  return sys.drift + sys.Atilde * omega;
}

/// Filtering Riccati recursion in information form:
///   P_next = Q + A (P^{-1} + C^T R^{-1} C)^{-1} A^T
/// The result is explicitly re-symmetrized; losing positive definiteness is an
/// error. Q only enters additively and may be positive semidefinite.
inline Eigen::MatrixXd riccati_update(const Eigen::MatrixXd& P_prev, const Eigen::MatrixXd& A,
                                      const Eigen::MatrixXd& C, const Eigen::MatrixXd& Q,
                                      const Eigen::MatrixXd& R) {
  const Eigen::Index n = P_prev.rows();
  if (A.rows() != n || A.cols() != n || Q.rows() != n || Q.cols() != n || C.cols() != n ||
      R.rows() != C.rows() || R.cols() != C.rows())
    throw ContractViolation("riccati_update: shape mismatch");
  detail::require_symmetric(R, "riccati_update: R");
  Eigen::LLT<Eigen::MatrixXd> rllt(R);
  if (rllt.info() != Eigen::Success)
    throw NumericError("riccati_update: R is not positive definite");
  const Eigen::MatrixXd s =
      spd_inverse(P_prev, "riccati_update: P") + C.transpose() * rllt.solve(C);
  const Eigen::MatrixXd filtered_cov = spd_inverse(s, "riccati_update: information matrix");
  Eigen::MatrixXd p = symmetrize(Q + A * filtered_cov * A.transpose());
  if (Eigen::LLT<Eigen::MatrixXd>(p).info() != Eigen::Success)
    throw NumericError("riccati_update: positive definiteness lost");
  return p;
}

/// Riccati matrix computed through the assembled horizon instead of the
/// recursion: P_{k+1} = Atilde (E + Qtilde)^{-1} Atilde^T + Q_k for a window
/// ending at epoch k. Oracle for riccati_update; requires the window to carry
/// the process noise of its newest epoch.
inline Eigen::MatrixXd riccati_via_horizon(const HorizonWindow& win, const HorizonSystem& sys) {
  if (static_cast<int>(win.Q.size()) != win.size())
    throw ContractViolation("riccati_via_horizon: window must carry Q at its newest epoch");
  const Eigen::MatrixXd g = sys.D.transpose() * sys.Rbig;
  const Eigen::MatrixXd m = g * sys.D + sys.Qtilde;
  const Eigen::MatrixXd x = solve_normal_equations(m, sys.Atilde.transpose(), nullptr,
                                                   "riccati_via_horizon");
  return symmetrize(sys.Atilde * x + win.Q.back());
}

/// Information-form Kalman gain K = (P^{-1} + C^T R^{-1} C)^{-1} C^T R^{-1}.
/// Equals the covariance-form gain P C^T (C P C^T + R)^{-1} by the matrix
/// inversion lemma.
inline Eigen::MatrixXd kalman_gain(const Eigen::MatrixXd& P, const Eigen::MatrixXd& C,
                                   const Eigen::MatrixXd& R) {
  if (C.cols() != P.rows() || R.rows() != C.rows() || R.cols() != C.rows())
    throw ContractViolation("kalman_gain: shape mismatch");
  detail::require_symmetric(R, "kalman_gain: R");
  Eigen::LLT<Eigen::MatrixXd> rllt(R);
  if (rllt.info() != Eigen::Success) throw NumericError("kalman_gain: R is not positive definite");
  const Eigen::MatrixXd ct_rinv = rllt.solve(C).transpose();
  const Eigen::MatrixXd s = spd_inverse(P, "kalman_gain: P") + ct_rinv * C;
  Eigen::LLT<Eigen::MatrixXd> sllt(s);
  if (sllt.info() != Eigen::Success)
    throw NumericError("kalman_gain: information matrix is not positive definite");
  return sllt.solve(ct_rinv);
}

/// Measurement-updated linearization point x~_{k|k} = x~_{k|k-1} + K (y - h_k(x~_{k|k-1})).
/// With this schedule the window solution reproduces the extended Kalman
/// filter for every horizon size.
inline Eigen::VectorXd theorem1_filter_point(const Eigen::VectorXd& x_pred,
                                             const Eigen::VectorXd& y, const Eigen::MatrixXd& K,
                                             const NltvModel& model, int k) {
  if (K.rows() != x_pred.size() || K.cols() != y.size())
    throw ContractViolation("theorem1_filter_point: gain shape mismatch");
  const Eigen::VectorXd predicted = model.h(k, x_pred);
  if (predicted.size() != y.size())
    throw ContractViolation("theorem1_filter_point: measurement dimension mismatch at k=" +
                            std::to_string(k));
  return x_pred + K * (y - predicted);
}

/// Horizon cost of a candidate state sequence x_{start..k}: arrival cost plus
/// transition and measurement quadratic forms, all residuals taken against the
/// window's linearized models.
inline double mhe_cost(const HorizonWindow& win, const NltvModel& model,
                       std::span<const Eigen::VectorXd> candidates,
                       MheVariant variant = MheVariant::kWithArrivalCost) {
  const int W = win.size();
  if (static_cast<int>(candidates.size()) != W)
    throw ContractViolation("mhe_cost: candidate sequence must cover the window");
  double cost = 0.0;
  if (variant == MheVariant::kWithArrivalCost) {
    const Eigen::VectorXd w0 = candidates[0] - win.prior_state;
    cost += w0.dot(spd_inverse(win.prior_cov, "mhe_cost: prior covariance") * w0);
  }
  for (int r = 0; r + 1 < W; ++r) {
    const int t = win.start + r;
    const LinearizedDynamics dyn = linearize_dynamics(model, t, win.lin_filt[r]);
    const Eigen::VectorXd w = candidates[r + 1] - dyn.A * candidates[r] - dyn.u;
    cost += w.dot(spd_inverse(win.Q[r], "mhe_cost: Q") * w);
  }
  for (int r = 0; r < W; ++r) {
    const int t = win.start + r;
    const LinearizedMeasurement meas = linearize_measurement(model, t, win.lin_pred[r]);
    const Eigen::VectorXd v = win.y[r] - meas.C * candidates[r] - meas.d;
    cost += v.dot(spd_inverse(win.R[r], "mhe_cost: R") * v);
  }
  return cost;
}

/// Same cost expressed over the stacked noise estimates.
inline double mhe_cost_from_noise(const HorizonSystem& sys, const Eigen::VectorXd& omega) {
  const Eigen::VectorXd resid = sys.B - sys.D * omega;
  return omega.dot(sys.Qtilde * omega) + resid.dot(sys.Rbig * resid);
}

/// Gradient of the noise-stack cost: 2 (Qtilde + E) Omega - 2 G B.
inline Eigen::VectorXd mhe_cost_gradient(const HorizonSystem& sys, const Eigen::VectorXd& omega) {
  const Eigen::MatrixXd g = sys.D.transpose() * sys.Rbig;
  return 2.0 * (sys.Qtilde * omega + g * (sys.D * omega) - g * sys.B);
}

/// Rebuilds the prediction gain L = Atilde (E + Qtilde)^{-1} G from its
/// decomposition into the sub-horizon gain and the Kalman gain of the newest
/// epoch:
///   L = [ (A_k - A_k K_k C_k) L_sub,  A_k K_k ]
/// Oracle for the direct computation; requires a nonempty horizon.
inline Eigen::MatrixXd lemma3_gain_decomposition(const HorizonWindow& win,
                                                 const HorizonSystem& sys) {
  const int W = win.size();
  if (win.horizon() < 1)
    throw ContractViolation("lemma3_gain_decomposition: requires horizon N > 0");

  HorizonWindow sub = win;
  sub.y.pop_back();
  sub.R.pop_back();
  sub.lin_pred.pop_back();
  sub.lin_filt.pop_back();
  sub.Q.resize(W - 1);  // keeps Q at the sub-window's newest epoch
  std::vector<LinearizedDynamics> sub_dyn(sys.dyn.begin(), sys.dyn.end() - 1);
  std::vector<LinearizedMeasurement> sub_meas(sys.meas.begin(), sys.meas.end() - 1);
  const HorizonSystem sub_sys = detail::assemble_from_linearized(
      sub, std::move(sub_dyn), std::move(sub_meas), MheVariant::kWithArrivalCost);

  const Eigen::MatrixXd p_k = riccati_via_horizon(sub, sub_sys);
  const Eigen::MatrixXd& c_k = sys.meas.back().C;
  const Eigen::MatrixXd& a_k = sys.dyn.back().A;
  const Eigen::MatrixXd k_k = kalman_gain(p_k, c_k, win.R.back());

  const Eigen::MatrixXd g_sub = sub_sys.D.transpose() * sub_sys.Rbig;
  const Eigen::MatrixXd m_sub = g_sub * sub_sys.D + sub_sys.Qtilde;
  const Eigen::MatrixXd l_sub =
      sub_sys.Atilde * solve_normal_equations(m_sub, g_sub, nullptr, "lemma3 sub-horizon");

  const Eigen::Index m_last = c_k.rows();
  const Eigen::Index m_total = sys.row_offset.back();
  Eigen::MatrixXd l(a_k.rows(), m_total);
  l.leftCols(m_total - m_last) = (a_k - a_k * k_k * c_k) * l_sub;
  l.rightCols(m_last) = a_k * k_k;
  return l;
}

/// Residual of the filtered-covariance identity that links the Riccati matrix
/// to the assembled horizon blocks. The window must end one epoch before the
/// measurement (C_k, R_k); P_k is the Riccati matrix at that epoch. Test-only.
inline double corollary21_identity_check(const Eigen::MatrixXd& P_k, const HorizonWindow& win,
                                         const HorizonSystem& sys, const Eigen::MatrixXd& C_k,
                                         const Eigen::MatrixXd& R_k) {
  if (static_cast<int>(win.Q.size()) != win.size())
    throw ContractViolation("corollary21_identity_check: window must carry its newest Q");
  const Eigen::MatrixXd f = C_k.transpose() * spd_inverse(R_k, "corollary21: R_k") * C_k;
  const Eigen::MatrixXd lhs = spd_inverse(
      spd_inverse(P_k, "corollary21: P_k") + f, "corollary21: filtered information");

  const Eigen::MatrixXd q_inv = spd_inverse(win.Q.back(), "corollary21: Q_{k-1}");
  const Eigen::MatrixXd e_tilde = f + q_inv;
  const Eigen::MatrixXd e_inv = spd_inverse(e_tilde, "corollary21: single-step information");
  const Eigen::MatrixXd theta = q_inv - q_inv * e_inv * q_inv;
  const Eigen::MatrixXd g = sys.D.transpose() * sys.Rbig;
  const Eigen::MatrixXd w =
      g * sys.D + sys.Qtilde + sys.Atilde.transpose() * theta * sys.Atilde;
  const Eigen::MatrixXd half = sys.Atilde.transpose() * (q_inv * e_inv);
  const Eigen::MatrixXd lambda =
      half.transpose() * solve_normal_equations(w, half, nullptr, "corollary21 inner solve");
  const Eigen::MatrixXd rhs = e_inv + lambda;
  return (lhs - rhs).norm() / lhs.norm();
}

/// Recursive estimator state. A value type: each step consumes a state and
/// returns the successor, so distinct instances can run on distinct threads.
struct EstimatorState {
  MheVariant variant = MheVariant::kWithArrivalCost;
  int horizon = 0;                ///< configured N
  int k = -1;                     ///< last processed epoch (-1 before the first step)
  Eigen::VectorXd x_pred;         ///< xhat_{k+1|k}
  Eigen::VectorXd x_filt;         ///< xhat_{k|k} from the window solve (empty before any step)
  HorizonWindow window;           ///< epochs max(0, k-N) .. k
  std::deque<Eigen::MatrixXd> P;  ///< Riccati matrices P_j, j = window.start .. k+1
  SolveInfo last_solve;           ///< diagnostics of the most recent horizon solve
};

inline EstimatorState mhe_init(MheVariant variant, int horizon, const Eigen::VectorXd& x0,
                               const Eigen::MatrixXd& P0) {
  if (horizon < 0) throw ContractViolation("mhe_init: horizon must be >= 0");
  if (P0.rows() != x0.size() || P0.cols() != x0.size())
    throw ContractViolation("mhe_init: P0/x0 dimension mismatch");
  if (!is_spd(P0)) throw NumericError("mhe_init: P0 is not symmetric positive definite");
  EstimatorState s;
  s.variant = variant;
  s.horizon = horizon;
  s.x_pred = x0;
  s.window.start = 0;
  s.window.prior_state = x0;
  s.window.prior_cov = P0;
  s.P.push_back(P0);
  return s;
}

/// Processes epoch k+1: slides the window, linearizes the new epoch at the
/// filter-updated point, assembles and solves the horizon problem, and runs
/// the Riccati recursion. The arrival-cost-free variant zeroes the prior
/// information block but keeps the Riccati bookkeeping for its gains.
inline EstimatorState mhe_step(EstimatorState state, const Eigen::VectorXd& y_next,
                               const NltvModel& model, const NoiseSchedule& noise) {
  const int t = state.k + 1;
  try {
    HorizonWindow& win = state.window;

    if (y_next.size() != model.meas_dim(t))
      throw ContractViolation("mhe_step: measurement dimension mismatch at epoch " +
                              std::to_string(t));
    const Eigen::MatrixXd r_t = noise.R(t);
    const Eigen::MatrixXd q_t = noise.Q(t);
    const Eigen::VectorXd lin_pred_t = state.x_pred;
    const LinearizedMeasurement meas_t = linearize_measurement(model, t, lin_pred_t);
    const Eigen::MatrixXd p_t = state.P.back();
    const Eigen::MatrixXd k_t = kalman_gain(p_t, meas_t.C, r_t);
    const Eigen::VectorXd filt_point = theorem1_filter_point(lin_pred_t, y_next, k_t, model, t);

    win.y.push_back(y_next);
    win.R.push_back(r_t);
    win.Q.push_back(q_t);
    win.lin_pred.push_back(lin_pred_t);
    win.lin_filt.push_back(filt_point);

    // slide so the window holds [max(0, t - N) .. t]; the dropped epoch's
    // prediction and Riccati matrix become the new prior
    const int new_start = std::max(0, t - state.horizon);
    while (win.start < new_start) {
      win.y.erase(win.y.begin());
      win.R.erase(win.R.begin());
      win.Q.erase(win.Q.begin());
      win.lin_pred.erase(win.lin_pred.begin());
      win.lin_filt.erase(win.lin_filt.begin());
      state.P.pop_front();
      ++win.start;
      win.prior_state = win.lin_pred.front();
      win.prior_cov = state.P.front();
    }

    const HorizonSystem sys = assemble_horizon(win, model, state.variant);
    const Eigen::VectorXd omega = solve_noise_estimates(sys, &state.last_solve);
    state.x_pred = predict_state(win, sys, omega);
    state.x_filt = lemma1_state(win, sys.dyn, omega, t);
    state.P.push_back(riccati_update(p_t, sys.dyn.back().A, sys.meas.back().C, q_t, r_t));
    state.k = t;
    return state;
  } catch (const NumericError& e) {
    throw NumericError("epoch " + std::to_string(t) + ": " + e.what());
  }
}

}  // namespace hest
