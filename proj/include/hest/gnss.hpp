#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "hest/errors.hpp"
#include "hest/mhe.hpp"
#include "hest/model.hpp"

namespace hest {
namespace gnss {

/// State layout: [x, vx, y, vy, z, vz, dt_u, df_u]
/// ECEF meters and m/s; the receiver clock bias dt_u is range-equivalent
/// (meters), the clock drift df_u is m/s.
inline constexpr int kStateDim = 8;
enum StateIndex { kIdxX = 0, kIdxVx, kIdxY, kIdxVy, kIdxZ, kIdxVz, kIdxClkBias, kIdxClkDrift };

using NavState = Eigen::Matrix<double, 8, 1>;

inline Eigen::Vector3d position(const NavState& x) { return {x[kIdxX], x[kIdxY], x[kIdxZ]}; }
inline Eigen::Vector3d velocity(const NavState& x) { return {x[kIdxVx], x[kIdxVy], x[kIdxVz]}; }

inline void set_position(NavState& x, const Eigen::Vector3d& p) {
  x[kIdxX] = p.x();
  x[kIdxY] = p.y();
  x[kIdxZ] = p.z();
}
inline void set_velocity(NavState& x, const Eigen::Vector3d& v) {
  x[kIdxVx] = v.x();
  x[kIdxVy] = v.y();
  x[kIdxVz] = v.z();
}

/// One satellite's corrected observables at an epoch. Satellite states arrive
/// precomputed from the ingestion pipeline (transmit-time and Earth-rotation
/// corrections already applied). A missing rate observation is expressed by an
/// empty prr; its row is simply absent from the stacked measurement.
struct SatelliteObservation {
  std::string sat_id;
  double pr = 0.0;                  ///< pseudorange [m]
  std::optional<double> prr;        ///< pseudorange rate [m/s]
  Eigen::Vector3d sat_pos = Eigen::Vector3d::Zero();  ///< ECEF [m]
  Eigen::Vector3d sat_vel = Eigen::Vector3d::Zero();  ///< ECEF [m/s]
  double sigma_pr = 1.0;            ///< 1-sigma [m]
  double sigma_prr = 0.1;           ///< 1-sigma [m/s]
};

struct Epoch {
  std::int64_t t_ms = 0;  ///< UTC milliseconds
  double Ts = 0.0;        ///< seconds since the previous epoch (0 for the first)
  std::vector<SatelliteObservation> sats;
};

/// Spectral densities of the constant-velocity + two-state clock process model.
struct ProcessNoiseConfig {
  double S_p = 1.0;  ///< position-velocity PSD [m^2/s^3]
  double S_f = 1.0;  ///< clock bias PSD [m^2/s]
  double S_g = 0.1;  ///< clock drift PSD [m^2/s^3]
};

/// Diagnostic sanity checks (not hard errors).
inline bool terrestrial_position_sane(const NavState& x) {
  const double r = position(x).norm();
  return x.allFinite() && r >= 6.2e6 && r <= 7.5e6;
}
inline bool satellite_orbit_sane(const SatelliteObservation& s) {
  const double r = s.sat_pos.norm();
  return r >= 2.0e7 && r <= 4.5e7;
}

namespace detail {

inline Eigen::Vector3d geometry_vector(const NavState& state, const SatelliteObservation& sat,
                                       double* range = nullptr) {
  const Eigen::Vector3d delta = position(state) - sat.sat_pos;
  const double r = delta.norm();
  if (r < 1e-6) throw NumericError("gnss: user and satellite positions coincide");
  if (range) *range = r;
  return delta / r;
}

}  // namespace detail

/// Geometric range plus receiver clock bias.
inline double predict_pseudorange(const NavState& state, const SatelliteObservation& sat) {
  double range = 0.0;
  detail::geometry_vector(state, sat, &range);
  return range + state[kIdxClkBias];
}

/// Relative velocity projected on the unit satellite-user geometry vector,
/// plus receiver clock drift.
inline double predict_rate(const NavState& state, const SatelliteObservation& sat) {
  const Eigen::Vector3d g = detail::geometry_vector(state, sat);
  return (velocity(state) - sat.sat_vel).dot(g) + state[kIdxClkDrift];
}

/// Number of measurement rows of an epoch: one pseudorange per satellite plus
/// one rate row when present.
inline Eigen::Index epoch_meas_dim(const Epoch& epoch) {
  Eigen::Index m = 0;
  for (const auto& s : epoch.sats) m += 1 + (s.prr.has_value() ? 1 : 0);
  return m;
}

/// Stacked observed measurement vector, interleaved [pr1, prr1, pr2, prr2, ...]
/// with absent rate rows skipped.
inline Eigen::VectorXd stacked_measurements(const Epoch& epoch) {
  Eigen::VectorXd y(epoch_meas_dim(epoch));
  Eigen::Index row = 0;
  for (const auto& s : epoch.sats) {
    y[row++] = s.pr;
    if (s.prr) y[row++] = *s.prr;
  }
  return y;
}

/// Predicted measurement vector and its Jacobian at `state`.
///
/// Pseudorange rows carry the geometry vector in the position slots and 1 in
/// the clock-bias slot. Rate rows carry the geometry vector in the velocity
/// slots and 1 in the drift slot; their position partials are set to zero.
/// The geometry sensitivity of the rate to position is O(v/r) of the retained
/// terms at terrestrial speeds and is deliberately neglected, so
/// finite-difference checks must exclude that block.
inline std::pair<Eigen::VectorXd, Eigen::MatrixXd> measurement_model(const NavState& state,
                                                                     const Epoch& epoch) {
  if (epoch.sats.empty()) throw ContractViolation("measurement_model: epoch has no satellites");
  const Eigen::Index m = epoch_meas_dim(epoch);
  Eigen::VectorXd h(m);
  Eigen::MatrixXd c = Eigen::MatrixXd::Zero(m, kStateDim);
  Eigen::Index row = 0;
  for (const auto& sat : epoch.sats) {
    double range = 0.0;
    const Eigen::Vector3d g = detail::geometry_vector(state, sat, &range);
    h[row] = range + state[kIdxClkBias];
    c(row, kIdxX) = g.x();
    c(row, kIdxY) = g.y();
    c(row, kIdxZ) = g.z();
    c(row, kIdxClkBias) = 1.0;
    ++row;
    if (sat.prr) {
      h[row] = (velocity(state) - sat.sat_vel).dot(g) + state[kIdxClkDrift];
      c(row, kIdxVx) = g.x();
      c(row, kIdxVy) = g.y();
      c(row, kIdxVz) = g.z();
      c(row, kIdxClkDrift) = 1.0;
      ++row;
    }
  }
  return {std::move(h), std::move(c)};
}

/// Constant-velocity transition matrix: four [1 Ts; 0 1] blocks on the diagonal.
inline Eigen::Matrix<double, 8, 8> transition_matrix(double Ts) {
  Eigen::Matrix<double, 8, 8> a = Eigen::Matrix<double, 8, 8>::Identity();
  for (int blk = 0; blk < 4; ++blk) a(2 * blk, 2 * blk + 1) = Ts;
  return a;
}

/// Process noise over an interval: three identical position-velocity blocks
///   [ S_p Ts^3/3, S_p Ts^2/2 ; S_p Ts^2/2, S_p Ts ]
/// and the two-state clock block
///   [ S_f Ts + S_g Ts^3/3, S_g Ts^2/2 ; S_g Ts^2/2, S_g Ts ].
inline Eigen::Matrix<double, 8, 8> process_noise(double Ts, const ProcessNoiseConfig& cfg) {
  if (!(Ts > 0.0)) throw ContractViolation("process_noise: Ts must be positive");
  Eigen::Matrix<double, 8, 8> q = Eigen::Matrix<double, 8, 8>::Zero();
  const double t2 = Ts * Ts;
  const double t3 = t2 * Ts;
  for (int blk = 0; blk < 3; ++blk) {
    const int i = 2 * blk;
    q(i, i) = cfg.S_p * t3 / 3.0;
    q(i, i + 1) = cfg.S_p * t2 / 2.0;
    q(i + 1, i) = cfg.S_p * t2 / 2.0;
    q(i + 1, i + 1) = cfg.S_p * Ts;
  }
  q(kIdxClkBias, kIdxClkBias) = cfg.S_f * Ts + cfg.S_g * t3 / 3.0;
  q(kIdxClkBias, kIdxClkDrift) = cfg.S_g * t2 / 2.0;
  q(kIdxClkDrift, kIdxClkBias) = cfg.S_g * t2 / 2.0;
  q(kIdxClkDrift, kIdxClkDrift) = cfg.S_g * Ts;
  return q;
}

/// Diagonal measurement covariance, interleaved [sigma_pr^2, sigma_prr^2, ...]
/// matching the measurement_model row order.
inline Eigen::MatrixXd measurement_covariance(const Epoch& epoch) {
  const Eigen::Index m = epoch_meas_dim(epoch);
  Eigen::MatrixXd r = Eigen::MatrixXd::Zero(m, m);
  Eigen::Index row = 0;
  for (const auto& sat : epoch.sats) {
    if (!(sat.sigma_pr > 0.0))
      throw ContractViolation("measurement_covariance: non-positive sigma_pr for sat " +
                              sat.sat_id);
    r(row, row) = sat.sigma_pr * sat.sigma_pr;
    ++row;
    if (sat.prr) {
      if (!(sat.sigma_prr > 0.0))
        throw ContractViolation("measurement_covariance: non-positive sigma_prr for sat " +
                                sat.sat_id);
      r(row, row) = sat.sigma_prr * sat.sigma_prr;
      ++row;
    }
  }
  return r;
}

/// System and noise schedule over a fixed sequence of epochs. Dynamics are the
/// linear constant-velocity model rebuilt per epoch from the actual sampling
/// intervals; measurements close over the epoch data. The transition out of
/// the final epoch reuses the last interval (its prediction is never scored).
struct GnssSystem {
  NltvModel model;
  NoiseSchedule noise;
};

inline GnssSystem build_gnss_model(std::vector<Epoch> epochs, const ProcessNoiseConfig& cfg) {
  if (epochs.empty()) throw ContractViolation("build_gnss_model: no epochs");
  if (!(cfg.S_p >= 0.0 && cfg.S_f >= 0.0 && cfg.S_g >= 0.0) ||
      (cfg.S_p == 0.0 && cfg.S_f == 0.0 && cfg.S_g == 0.0))
    throw ContractViolation("build_gnss_model: process noise PSDs must be >= 0 and not all zero");
  for (std::size_t i = 1; i < epochs.size(); ++i) {
    if (epochs[i].t_ms <= epochs[i - 1].t_ms)
      throw ContractViolation("build_gnss_model: epoch timestamps must be strictly increasing");
    if (!(epochs[i].Ts > 0.0))
      throw ContractViolation("build_gnss_model: non-positive sampling interval at epoch " +
                              std::to_string(i));
  }

  auto data = std::make_shared<const std::vector<Epoch>>(std::move(epochs));
  const int n_epochs = static_cast<int>(data->size());

  // interval of the transition k -> k+1; the final epoch reuses the last one
  auto interval = [data, n_epochs](int k) -> double {
    if (k + 1 < n_epochs) return (*data)[k + 1].Ts;
    const double last = n_epochs >= 2 ? (*data)[n_epochs - 1].Ts : 0.0;
    return last > 0.0 ? last : 1.0;
  };
  auto at = [data, n_epochs](int k) -> const Epoch& {
    if (k < 0 || k >= n_epochs)
      throw ContractViolation("gnss model: epoch index " + std::to_string(k) + " out of range");
    return (*data)[k];
  };

  GnssSystem sys;
  sys.model.state_dim = kStateDim;
  sys.model.f = [interval](int k, const Eigen::VectorXd& x) -> Eigen::VectorXd {
    return transition_matrix(interval(k)) * x;
  };
  sys.model.df_dx = [interval](int k, const Eigen::VectorXd&) -> Eigen::MatrixXd {
    return transition_matrix(interval(k));
  };
  sys.model.h = [at](int k, const Eigen::VectorXd& x) -> Eigen::VectorXd {
    return measurement_model(NavState(x), at(k)).first;
  };
  sys.model.dh_dx = [at](int k, const Eigen::VectorXd& x) -> Eigen::MatrixXd {
    return measurement_model(NavState(x), at(k)).second;
  };
  sys.model.meas_dim = [at](int k) -> Eigen::Index { return epoch_meas_dim(at(k)); };

  sys.noise.Q = [interval, cfg](int k) -> Eigen::MatrixXd {
    return process_noise(interval(k), cfg);
  };
  sys.noise.R = [at](int k) -> Eigen::MatrixXd { return measurement_covariance(at(k)); };
  return sys;
}

}  // namespace gnss
}  // namespace hest
